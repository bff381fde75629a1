"""Resolvent rows, boundary vertices, resonant scans, decay fits."""

import numpy as np
import pytest
import scipy.linalg as sla

from helpers import free_model, shift_model, strong_model
from qptransport.errors import SingularEnergyError
from qptransport.evolve import spectral_data_for
from qptransport.green import (
    boundary_vertices,
    combes_thomas_fit,
    green_row,
    offbox_green_bound,
    resonant_measure,
)
from qptransport.model import Kernel, Volume, as_fixed_phase, assemble_operator


def test_free_green_closed_form():
    # infinite-lattice row at z = 3: G(0, n) = -x^|n| / sqrt(5), x = (3 - sqrt 5)/2
    sd = spectral_data_for(free_model(), Volume.box(200, 1))
    row = green_row(sd, 3.0).row
    n = np.arange(-200, 201)
    x = (3.0 - np.sqrt(5.0)) / 2.0
    ref = -(x ** np.abs(n)) / np.sqrt(5.0)
    sel = np.abs(n) <= 10
    assert np.max(np.abs(row[sel] - ref[sel])) < 1e-12


def test_green_row_matches_lu_solve():
    m = shift_model(coupling=2.0)
    vol = Volume.box(30, 1)
    theta = as_fixed_phase([0.27], 1)
    sd = spectral_data_for(m, vol, theta)
    z = 0.7 + 0.3j
    row = green_row(sd, z).row
    H = assemble_operator(m, vol, theta)
    e0 = np.zeros(vol.size)
    e0[vol.origin_index] = 1.0
    ref = sla.solve(H - z * np.eye(vol.size), e0)
    assert np.max(np.abs(row - ref)) < 1e-10


def test_green_row_real_energy_in_gap():
    sd = spectral_data_for(free_model(), Volume.box(50, 1))
    row = green_row(sd, 2.5).row
    assert np.all(np.isreal(row))
    # decay away from origin
    assert abs(row[0]) < abs(row[50])


def test_green_singular_energy_raises():
    sd = spectral_data_for(free_model(), Volume.box(20, 1))
    with pytest.raises(SingularEnergyError):
        green_row(sd, float(sd.eigenvalues[3]))


def test_boundary_vertices_nearest_neighbor():
    idx, wit = boundary_vertices(Kernel.laplacian(1), Volume.box(5, 1), 0.0)
    assert idx.tolist() == [0, 10]
    assert wit.tolist() == [[-6], [6]]


def test_boundary_vertices_layer_width_follows_radius():
    idx, _ = boundary_vertices(Kernel.exp_decay(1, 1.0, 3), Volume.box(6, 1), 0.0)
    assert idx.tolist() == [0, 1, 2, 10, 11, 12]
    # thresholding drops the long offsets and thins the layer
    idx2, _ = boundary_vertices(Kernel.exp_decay(1, 1.0, 3), Volume.box(6, 1),
                                np.exp(-1.5))
    assert idx2.tolist() == [0, 12]


def test_boundary_vertices_2d_edges():
    idx, wit = boundary_vertices(Kernel.laplacian(2), Volume.box(2, 2), 0.0)
    sites = Volume.box(2, 2).sites()[idx]
    assert len(idx) == 16  # all but the 3x3 core of a 5x5 box
    assert np.all(np.max(np.abs(sites), axis=1) == 2)
    assert np.all(np.max(np.abs(wit), axis=1) == 3)


def test_combes_thomas_rate_increases_with_distance():
    m = shift_model(coupling=1.5)
    sd = spectral_data_for(m, Volume.box(40, 1), as_fixed_phase([0.19], 1))
    top = float(np.max(sd.eigenvalues))
    rates = []
    for dist in (0.3, 1.0):
        fit = combes_thomas_fit(sd, top + dist)
        assert not fit.degenerate
        assert fit.rate > 0
        rates.append(fit.rate)
    assert rates[0] < rates[1]


def test_combes_thomas_degenerate_on_tiny_box():
    sd = spectral_data_for(free_model(), Volume.box(3, 1))
    fit = combes_thomas_fit(sd, 5.0)
    assert fit.degenerate


def test_offbox_chain_bound_holds():
    m = shift_model(coupling=2.0)
    theta = as_fixed_phase([0.44], 1)
    rep = offbox_green_bound(m, theta, Volume.box(10, 1), Volume.box(20, 1),
                             0.3 + 0.5j, [14])
    assert not rep.inconclusive
    assert rep.holds
    assert rep.direct <= rep.chain + 1e-15


def test_offbox_requires_geometry():
    m = shift_model()
    theta = as_fixed_phase([0.1], 1)
    with pytest.raises(ValueError):
        offbox_green_bound(m, theta, Volume.box(10, 1), Volume.box(20, 1),
                           1j, [5])  # w inside the inner box


def test_resonant_measure_extremes():
    m = strong_model()
    theta = as_fixed_phase([0.3], 1)
    vols = [Volume.interval(-4, 8), Volume.interval(-3, 8)]
    # eps far above any resolvent value: nothing resonant
    scan_hi = resonant_measure(m, theta, vols, eps=1e6, grid_step=0.05)
    assert scan_hi.delta_hat == 0.0
    assert scan_hi.intersection_count == 0
    # eps far below: every grid energy resonant, delta_hat = window length
    scan_lo = resonant_measure(m, theta, vols, eps=1e-300, grid_step=0.05)
    assert scan_lo.intersection_count == scan_lo.energies.size
    window = scan_lo.window[1] - scan_lo.window[0]
    assert abs(scan_lo.delta_hat - 0.05 * scan_lo.energies.size) < 1e-12
    assert scan_lo.delta_hat >= window - 0.1


def test_resonant_measure_monotone_in_eps():
    m = strong_model()
    theta = as_fixed_phase([0.52], 1)
    vols = [Volume.interval(-6, 12)]
    hats = [resonant_measure(m, theta, vols, eps, 0.02).delta_hat
            for eps in (1e-4, 1e-2, 1.0)]
    assert hats[0] >= hats[1] >= hats[2]


def test_resonant_intersection_shrinks_with_members():
    m = strong_model()
    theta = as_fixed_phase([0.07], 1)
    one = resonant_measure(m, theta, [Volume.interval(-4, 8)], 1e-3, 0.02)
    both = resonant_measure(
        m, theta, [Volume.interval(-4, 8), Volume.interval(-3, 8)], 1e-3, 0.02)
    assert both.delta_hat <= one.delta_hat + 1e-15

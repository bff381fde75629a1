"""Spectral decomposition, unitary propagation, moments, light-cone checks."""

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.special as sps

from helpers import free_model, shift_model, strong_model
from qptransport.evolve import (
    ballistic_check,
    diagonalize,
    propagate,
    propagator_row,
    propagator_row_contour,
    spectral_data_for,
    transport_moments,
    truncation_gap,
)
from qptransport.model import Volume, as_fixed_phase, assemble_operator


def test_free_row_matches_bessel():
    # V = 0: e^{itH}(0, n) = i^n J_n(2t), so magnitudes match Bessel exactly
    sd = spectral_data_for(free_model(), Volume.box(64, 1))
    t = 2.0
    row = np.abs(propagator_row(sd, t))
    n = np.arange(-64, 65)
    ref = np.abs(sps.jv(n, 2 * t))
    sel = np.abs(n) <= 20
    assert np.max(np.abs(row[sel] - ref[sel])) < 1e-9


def test_free_second_moment_is_ballistic():
    sd = spectral_data_for(free_model(), Volume.box(64, 1))
    ts = np.array([0.5, 1.0, 2.0])
    rec = propagate(sd, ts)
    m2 = transport_moments(rec, 2.0)
    assert np.max(np.abs(m2 / (2.0 * ts**2) - 1.0)) < 1e-9


def test_propagator_matches_expm():
    m = shift_model(coupling=2.0)
    vol = Volume.box(20, 1)
    theta = as_fixed_phase([0.3], 1)
    sd = spectral_data_for(m, vol, theta)
    t = 1.7
    row = propagator_row(sd, t)
    H = assemble_operator(m, vol, theta)
    U = sla.expm(1j * t * H)
    assert np.max(np.abs(row - U[:, vol.origin_index])) < 1e-9


def test_propagation_is_unitary():
    sd = spectral_data_for(strong_model(), Volume.box(40, 1), as_fixed_phase([0.12], 1))
    rec = propagate(sd, np.array([0.0, 0.3, 1.1]))
    mass = transport_moments(rec, 0.0)
    assert np.max(np.abs(mass - 1.0)) < 1e-12
    assert np.all(np.abs(rec.probabilities[0] - (np.arange(81) == 40)) < 1e-24)


def test_moment_order_validation():
    sd = spectral_data_for(free_model(), Volume.box(8, 1))
    rec = propagate(sd, np.array([1.0]))
    with pytest.raises(ValueError):
        transport_moments(rec, -0.5)


def test_dense_and_tridiagonal_spectra_agree():
    m = shift_model(coupling=1.4)
    vol = Volume.box(25, 1)
    theta = as_fixed_phase([0.41], 1)
    sd_tri = spectral_data_for(m, vol, theta)
    H = assemble_operator(m, vol, theta)
    sd_dense = diagonalize(H, vol)
    assert np.max(np.abs(sd_tri.eigenvalues - sd_dense.eigenvalues)) < 1e-10
    r1 = propagator_row(sd_tri, 2.3)
    r2 = propagator_row(sd_dense, 2.3)
    assert np.max(np.abs(r1 - r2)) < 1e-9


@pytest.mark.parametrize("coupling,hw", [(0.0, 8), (1.0, 10), (10.0, 12)])
def test_contour_route_matches_spectral(coupling, hw):
    m = shift_model(coupling=coupling)
    vol = Volume.box(hw, 1)
    theta = as_fixed_phase([0.23], 1)
    sd = spectral_data_for(m, vol, theta)
    t = 1.5
    ref = propagator_row(sd, t)
    alt = propagator_row_contour(sd, t)
    assert np.max(np.abs(alt - ref)) < 1e-6


def test_ballistic_fit_on_free_tail():
    sd = spectral_data_for(free_model(), Volume.box(64, 1))
    rec = propagate(sd, np.array([1.0, 2.0, 4.0]))
    fit = ballistic_check(rec, velocity=4.0)
    assert not fit.degenerate
    assert fit.c > 0.5
    assert fit.n_points >= 12


def test_ballistic_fit_needs_wide_box():
    sd = spectral_data_for(free_model(), Volume.box(10, 1))
    rec = propagate(sd, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        ballistic_check(rec, velocity=4.0)


def test_truncation_gap_tiny_beyond_light_cone():
    m = shift_model(coupling=2.0)
    theta = as_fixed_phase([0.31], 1)
    gap = truncation_gap(m, theta, 2.0, Volume.box(40, 1), Volume.box(60, 1))
    assert gap < 1e-12


def test_times_must_be_sorted():
    sd = spectral_data_for(free_model(), Volume.box(8, 1))
    with pytest.raises(ValueError):
        propagate(sd, np.array([2.0, 1.0]))
    with pytest.raises(ValueError):
        propagate(sd, np.array([-1.0, 1.0]))


def test_edge_mass_small_inside_cone():
    sd = spectral_data_for(free_model(), Volume.box(64, 1))
    rec = propagate(sd, np.array([1.0, 2.0]))
    # light cone radius 4 t = 8 << 0.9 * 64
    assert np.max(rec.edge_mass) < 1e-25

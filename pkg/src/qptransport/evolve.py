"""Spectral decomposition and unitary transport on finite boxes.

The propagator row e^{itH}(0, .) is computed from a full symmetric
eigendecomposition (one decomposition serves every time point, and the
resolvent machinery reuses it), with an independent contour-integral route for
cross-checks. Probabilities P_t(w) = |e^{itH}(0, w)|^2 feed the moment and
light-cone diagnostics.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, UnsupportedModelError
from .model import OperatorModel, Volume, assemble_operator, assemble_tridiagonal

_RESID_TOL = 1e-10


@dataclass
class SpectralData:
    """Eigenvalues (ascending) and eigenvector columns of a finite-volume matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    volume: Volume
    residual: float = 0.0

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    @property
    def origin_weights(self) -> np.ndarray:
        """psi_j(0) for every eigenvector j."""
        return self.eigenvectors[self.volume.origin_index, :]

    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.size else 0.0

    def min_gap(self) -> float:
        if self.size < 2:
            return np.inf
        return float(np.min(np.diff(self.eigenvalues)))


def _fingerprint(arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def _check_spectral(sd: SpectralData, resid: float) -> SpectralData:
    lam = sd.eigenvalues
    if np.any(np.diff(lam) < 0):
        raise NumericalError("eigenvalues not ascending")
    scale = max(1.0, sd.norm())
    if resid > _RESID_TOL * scale:
        raise NumericalError(
            f"eigen residual {resid:.3e} above {_RESID_TOL:.0e} * max(1, ||H||)"
        )
    w0 = float(np.sum(sd.origin_weights**2))
    if abs(w0 - 1.0) > 1e-10:
        raise NumericalError(f"origin weights not normalized: sum psi(0)^2 = {w0!r}")
    sd.residual = resid
    return sd


def diagonalize(H: np.ndarray, volume: Volume, check: bool = True) -> SpectralData:
    """Full symmetric eigendecomposition with a residual certificate."""
    if H.shape != (volume.size, volume.size):
        raise ValueError("matrix shape does not match the volume")
    try:
        lam, vec = sla.eigh(H)
    except sla.LinAlgError as exc:
        raise NumericalError(
            f"eigensolver failed to converge (matrix {_fingerprint([H])})"
        ) from exc
    sd = SpectralData(lam, vec, volume)
    if check:
        resid = 0.0
        n = lam.size
        step = max(1, min(n, 2**22 // max(n, 1)))
        for j0 in range(0, n, step):
            blk = slice(j0, min(j0 + step, n))
            R = H @ vec[:, blk] - vec[:, blk] * lam[blk][None, :]
            resid = max(resid, float(np.sqrt(np.max(np.sum(R * R, axis=0)))))
        return _check_spectral(sd, resid)
    return sd


def diagonalize_tridiagonal(d: np.ndarray, e: np.ndarray, volume: Volume, check: bool = True) -> SpectralData:
    """Eigendecomposition of a symmetric tridiagonal matrix (large 1-D boxes)."""
    try:
        lam, vec = sla.eigh_tridiagonal(d, e)
    except (sla.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"tridiagonal eigensolver failed (matrix {_fingerprint([d, e])})"
        ) from exc
    sd = SpectralData(lam, vec, volume)
    if check:
        n = lam.size
        resid = 0.0
        step = max(1, min(n, 2**22 // max(n, 1)))
        for j0 in range(0, n, step):
            blk = slice(j0, min(j0 + step, n))
            V = vec[:, blk]
            R = d[:, None] * V - V * lam[blk][None, :]
            R[:-1] += e[:, None] * V[1:]
            R[1:] += e[:, None] * V[:-1]
            resid = max(resid, float(np.sqrt(np.max(np.sum(R * R, axis=0)))))
        return _check_spectral(sd, resid)
    return sd


def spectral_data_for(model: OperatorModel, volume: Volume, theta=None, check: bool = True) -> SpectralData:
    """Assemble and diagonalize, taking the tridiagonal fast path when available."""
    try:
        d, e = assemble_tridiagonal(model, volume, theta)
    except UnsupportedModelError:
        return diagonalize(assemble_operator(model, volume, theta), volume, check=check)
    return diagonalize_tridiagonal(d, e, volume, check=check)


# ── propagation ──────────────────────────────────────────────────────────────


def propagator_row(sd: SpectralData, t: float) -> np.ndarray:
    """Row e^{itH}(0, .) over the volume; t = 0 short-circuits to the exact indicator."""
    if t == 0.0:
        row = np.zeros(sd.size, dtype=np.complex128)
        row[sd.volume.origin_index] = 1.0
        return row
    # two real gemvs instead of complex-casting the eigenvector matrix
    phase = t * sd.eigenvalues
    w0 = sd.origin_weights
    c = np.cos(phase) * w0
    s = np.sin(phase) * w0
    row = sd.eigenvectors @ c + 1j * (sd.eigenvectors @ s)
    nrm = float(np.vdot(row, row).real)
    if abs(nrm - 1.0) > 1e-10:
        raise NumericalError(f"propagator row lost unitarity: |row|^2 = {nrm!r}")
    return row


def propagator_row_contour(
    sd: SpectralData, t: float, half_height: float = 1.0, nodes_per_cycle: int = 16
) -> np.ndarray:
    """Independent route: -(1/2 pi i) oint e^{itz} (H - z)^{-1} e_0 dz.

    The contour is the counterclockwise rectangle |Re z| <= max|lambda| + 1,
    |Im z| <= half_height, integrated edge by edge with Gauss-Legendre nodes.
    Accuracy degrades like e^{t * half_height} (lower-edge growth), so this is
    a small-t cross-check, not the production propagator.
    """
    a = sd.norm() + 1.0
    y0 = float(half_height)
    if y0 <= 0:
        raise ValueError("half_height > 0 required")
    lam = sd.eigenvalues
    w0 = sd.origin_weights

    def edge(z0: complex, z1: complex, m: int) -> np.ndarray:
        x, w = np.polynomial.legendre.leggauss(m)
        mid, half = (z0 + z1) / 2.0, (z1 - z0) / 2.0
        z = mid + half * x.astype(np.complex128)
        coef = w0[None, :] / (lam[None, :] - z[:, None])
        rows = coef @ sd.eigenvectors.T
        fac = (w.astype(np.complex128) * np.exp(1j * t * z)) * half
        return fac @ rows

    # resolution scale along an edge is the distance to the nearest pole
    # (= half_height), on top of the e^{itz} oscillation count
    m_h = max(48, int(6 * (2 * a) / y0), int(nodes_per_cycle * (1.0 + abs(t) * (2 * a) / (2 * np.pi))))
    m_v = max(48, int(nodes_per_cycle * (1.0 + abs(t) * (2 * y0) / (2 * np.pi))))
    total = (
        edge(-a - 1j * y0, a - 1j * y0, m_h)
        + edge(a - 1j * y0, a + 1j * y0, m_v)
        + edge(a + 1j * y0, -a + 1j * y0, m_h)
        + edge(-a + 1j * y0, -a - 1j * y0, m_v)
    )
    return -total / (2j * np.pi)


@dataclass
class TransportRecord:
    """Site occupation probabilities over a time grid on one box."""

    times: np.ndarray
    volume: Volume
    probabilities: np.ndarray  # (nt, n)
    edge_mass: np.ndarray  # (nt,) mass in the outer 10 percent shell
    theta: tuple | None = None


def propagate(sd: SpectralData, times, theta=None) -> TransportRecord:
    """P_t(w) = |e^{itH}(0, w)|^2 for every t in `times` (ascending)."""
    ts = np.asarray(times, dtype=np.float64)
    if ts.ndim != 1 or ts.size == 0 or np.any(np.diff(ts) < 0) or np.any(ts < 0):
        raise ValueError("times must be a nondecreasing 1-D grid of t >= 0")
    norms = sd.volume.norms()
    shell = norms >= 0.9 * np.max(norms) if norms.size > 1 else norms >= 0
    P = np.empty((ts.size, sd.size))
    edge = np.empty(ts.size)
    for i, t in enumerate(ts):
        row = propagator_row(sd, float(t))
        P[i] = row.real**2 + row.imag**2
        edge[i] = float(np.sum(P[i][shell]))
    return TransportRecord(ts, sd.volume, P, edge, theta=tuple(theta) if theta is not None else None)


def transport_moments(record: TransportRecord, p: float) -> np.ndarray:
    """M_p(t) = sum_w P_t(w) ||w||^p (max norm), for one p >= 0, over the grid.

    p = 0 gives the total captured mass (1 up to truncation leakage)."""
    if p < 0:
        raise ValueError("moment order p must be nonnegative")
    if p == 0:
        return record.probabilities @ np.ones(record.volume.size)
    weights = record.volume.norms().astype(np.float64) ** p
    return record.probabilities @ weights


@dataclass
class BallisticFit:
    """Least-squares envelope log P ~ log C - c ||w|| outside the light cone."""

    c: float
    C: float
    n_points: int
    degenerate: bool


def ballistic_check(
    record: TransportRecord,
    velocity: float,
    floor: float = 1e-280,
    min_points: int = 12,
) -> BallisticFit:
    """Fit the exponential tail of P_t(w) over {(t, w): ||w|| >= velocity * t > 0}.

    Precondition: box half-width >= 3 * velocity * max(t); raises ValueError
    otherwise. Degenerate data (too few usable points, or a nonnegative slope)
    is flagged rather than fitted.
    """
    norms = record.volume.norms().astype(np.float64)
    hw = float(np.max(norms))
    tmax = float(np.max(record.times))
    if hw < 3.0 * velocity * tmax:
        raise ValueError(
            f"box half-width {hw:g} below 3 * velocity * t_max = {3.0 * velocity * tmax:g}"
        )
    xs, ys = [], []
    for i, t in enumerate(record.times):
        if t <= 0:
            continue
        mask = (norms >= velocity * float(t)) & (record.probabilities[i] > floor)
        xs.append(norms[mask])
        ys.append(np.log(record.probabilities[i][mask]))
    if not xs:
        return BallisticFit(0.0, 0.0, 0, True)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    if x.size < min_points or np.ptp(x) == 0:
        return BallisticFit(0.0, 0.0, int(x.size), True)
    slope, intercept = np.polyfit(x, y, 1)
    if slope >= 0:
        return BallisticFit(float(-slope), float(np.exp(intercept)), int(x.size), True)
    return BallisticFit(float(-slope), float(np.exp(intercept)), int(x.size), False)


def truncation_gap(model: OperatorModel, theta, t: float, vol1: Volume, vol2: Volume) -> float:
    """sup_w |e^{itH_vol2}(0, w) - e^{itH_vol1}(0, w)| over the smaller box.

    vol2 must contain vol1. Used to certify that a propagation box is large
    enough: the gap decays like e^{-c max(||w||, t)} once the box clears the
    light cone.
    """
    for (l1, h1), (l2, h2) in zip(vol1.bounds, vol2.bounds):
        if l2 > l1 or h2 < h1:
            raise ValueError("vol2 must contain vol1")
    sd1 = spectral_data_for(model, vol1, theta)
    sd2 = spectral_data_for(model, vol2, theta)
    row1 = propagator_row(sd1, t)
    row2 = propagator_row(sd2, t)
    idx = vol2.index_of(vol1.sites())
    return float(np.max(np.abs(row2[idx] - row1)))

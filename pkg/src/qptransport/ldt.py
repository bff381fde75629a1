"""Transfer matrices, Lyapunov exponents, large-deviation ladders, and the
moment envelopes they feed.

One-dimensional chains with unit nearest-neighbor hopping admit the 2x2
cocycle M_n = [[E - V(n), -1], [1, 0]], det = 1. Products are accumulated
with per-step rescaling so hyperbolic growth never overflows; the unit
determinant is checked whenever double precision can resolve it (the
`det_checkable` flag is an explicit error model, not a hope). On top sit
phase-averaged Lyapunov estimates, the scale ladder for the deviation
probability p(N, zeta) with its stretched-exponential fit, the bridge from a
deviation rate to Green decay on a four-interval family, and the three
spread-moment envelope regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, SingularEnergyError, UnsupportedModelError
from .model import OperatorModel, as_fixed_phase, continued_fraction_denominators, four_interval_family
from .sampling import kronecker_sequence

_EPS_MACH = float(np.finfo(np.float64).eps)
_DET_SAFETY = 8.0


# ── transfer products ────────────────────────────────────────────────────────


@dataclass
class TransferBatch:
    """Rescaled cocycle products over a batch of (theta, E, N) draws.

    True product = matrices[i] * exp(log_scales[i]). det_residuals holds
    |det - 1| of the descaled product; trust it only where det_checkable,
    i.e. where eps_mach * N * exp(2 * peak_log_norms) stays under det_tol.
    """

    matrices: np.ndarray  # (B, 2, 2), rescaled
    log_scales: np.ndarray
    log_norms: np.ndarray  # log of the true spectral norm
    det_residuals: np.ndarray
    det_checkable: np.ndarray  # bool
    peak_log_norms: np.ndarray
    lengths: np.ndarray
    energies: np.ndarray

    @property
    def size(self) -> int:
        return int(self.lengths.size)


@dataclass
class TransferProduct:
    matrix: np.ndarray
    log_scale: float
    log_norm: float
    det_residual: float
    det_checkable: bool
    peak_log_norm: float
    length: int
    energy: float


def _require_chain(model: OperatorModel):
    if not model.kernel.is_unit_nn_1d:
        raise UnsupportedModelError(
            "transfer matrices need a 1-D kernel with unit nearest-neighbor hopping"
        )


def _potential_rows(model: OperatorModel, thetas_fixed: np.ndarray, length: int) -> np.ndarray:
    """V over sites 0..length-1 for each phase in the batch, shape (B, length)."""
    sites = np.arange(0, length, dtype=np.int64)[:, None]
    out = np.empty((thetas_fixed.shape[0], length))
    for i in range(thetas_fixed.shape[0]):
        out[i] = model.potential(thetas_fixed[i], sites)
    return out


def transfer_products(
    model: OperatorModel,
    thetas,
    energies,
    lengths,
    det_tol: float = 1e-9,
    chunk: int = 2048,
) -> TransferBatch:
    """Batched products of the one-step matrices over sites 0..N-1, with
    per-step rescaling. N = 0 gives the identity.

    Snapshots are taken at each lane's own length, so mixed-N ensembles run
    in one sweep. Norms are exact 2x2 spectral norms (closed form), never
    Frobenius surrogates.
    """
    _require_chain(model)
    th = np.stack([as_fixed_phase(t, model.base.k) for t in thetas])
    E = np.asarray(energies, dtype=np.float64)
    N = np.asarray(lengths, dtype=np.int64)
    if not (th.shape[0] == E.size == N.size):
        raise ValueError("thetas, energies, lengths must have equal batch size")
    if np.any(N < 0):
        raise ValueError("lengths must be >= 0")
    B = E.size
    mats = np.empty((B, 2, 2))
    S_out = np.empty(B)
    ln_out = np.empty(B)
    det_out = np.empty(B)
    peak_out = np.empty(B)
    for lo in range(0, B, chunk):
        hi = min(lo + chunk, B)
        _transfer_chunk(
            model, th[lo:hi], E[lo:hi], N[lo:hi],
            mats[lo:hi], S_out[lo:hi], ln_out[lo:hi], det_out[lo:hi], peak_out[lo:hi],
        )
    with np.errstate(over="ignore"):
        est = _EPS_MACH * _DET_SAFETY * N * np.exp(2.0 * peak_out)
    checkable = est <= det_tol
    return TransferBatch(
        matrices=mats, log_scales=S_out, log_norms=ln_out,
        det_residuals=det_out, det_checkable=checkable,
        peak_log_norms=peak_out, lengths=N, energies=E,
    )


def _transfer_chunk(model, th, E, N, mats, S_out, ln_out, det_out, peak_out):
    b = E.size
    n_max = int(N.max())
    a = np.ones(b)
    bb = np.zeros(b)
    c = np.zeros(b)
    d = np.ones(b)
    S = np.zeros(b)
    peak = np.zeros(b)

    def snapshot(sel):
        det_r = a[sel] * d[sel] - bb[sel] * c[sel]
        f2 = a[sel] ** 2 + bb[sel] ** 2 + c[sel] ** 2 + d[sel] ** 2
        disc = np.sqrt(np.maximum(f2 * f2 - 4.0 * det_r * det_r, 0.0))
        sig = np.sqrt(0.5 * (f2 + disc))
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            ld = np.log(np.abs(det_r))
            resid = np.where(det_r > 0.0, np.abs(np.expm1(ld + 2.0 * S[sel])), np.inf)
        mats[sel, 0, 0] = a[sel]; mats[sel, 0, 1] = bb[sel]
        mats[sel, 1, 0] = c[sel]; mats[sel, 1, 1] = d[sel]
        S_out[sel] = S[sel]
        ln_out[sel] = S[sel] + np.log(sig)
        det_out[sel] = resid
        peak_out[sel] = peak[sel]

    if np.any(N == 0):
        snapshot(N == 0)
    if n_max == 0:
        return
    V = _potential_rows(model, th, n_max)
    for n in range(n_max):
        x = E - V[:, n]
        a, bb, c, d = x * a - c, x * bb - d, a, bb
        # rescale every step: keeps entries O(1) so dets and norms stay exact
        s = np.maximum(np.maximum(np.abs(a), np.abs(bb)), np.maximum(np.abs(c), np.abs(d)))
        s = np.where(s == 0.0, 1.0, s)
        a /= s; bb /= s; c /= s; d /= s
        S = S + np.log(s)
        np.maximum(peak, S, out=peak)
        if np.any(N == n + 1):
            snapshot(N == n + 1)


def transfer_product(model: OperatorModel, theta, energy: float, length: int) -> TransferProduct:
    batch = transfer_products(model, [theta], [energy], [length])
    return TransferProduct(
        matrix=batch.matrices[0],
        log_scale=float(batch.log_scales[0]),
        log_norm=float(batch.log_norms[0]),
        det_residual=float(batch.det_residuals[0]),
        det_checkable=bool(batch.det_checkable[0]),
        peak_log_norm=float(batch.peak_log_norms[0]),
        length=int(length),
        energy=float(energy),
    )


# ── Lyapunov exponent and deviation probabilities ────────────────────────────


@dataclass
class LyapunovEstimate:
    gamma_hat: float
    spread: float  # std of log|Phi|/N over phases
    length: int
    n_phases: int


def lyapunov(
    model: OperatorModel, energy: float, length: int, n_phases: int = 64, seed: int = 0
) -> LyapunovEstimate:
    """Phase-averaged finite-scale Lyapunov exponent log|Phi_N| / N."""
    thetas = kronecker_sequence(n_phases, model.base.k, seed=seed)
    batch = transfer_products(
        model, list(thetas), np.full(n_phases, energy), np.full(n_phases, length)
    )
    vals = batch.log_norms / length
    return LyapunovEstimate(
        gamma_hat=float(np.mean(vals)),
        spread=float(np.std(vals)),
        length=int(length),
        n_phases=int(n_phases),
    )


@dataclass
class DeviationPoint:
    p_hat: float
    center: float  # the gamma used as deviation center
    zeta: float
    length: int
    n_phases: int
    below_resolution: bool = False  # p_hat = 0: tail finer than 1/n_phases


def ld_probability(
    model: OperatorModel,
    energy: float,
    length: int,
    zeta: float,
    n_phases: int = 512,
    seed: int = 0,
    center: float | None = None,
) -> DeviationPoint:
    """Empirical P{ |log|Phi_N|/N - gamma| >= zeta } over Kronecker phases.

    The center defaults to the same-sample mean, so p_hat(0) = 1 exactly and
    p_hat is non-increasing in zeta by construction.
    """
    if zeta < 0:
        raise ValueError("zeta must be >= 0")
    thetas = kronecker_sequence(n_phases, model.base.k, seed=seed)
    batch = transfer_products(
        model, list(thetas), np.full(n_phases, energy), np.full(n_phases, length)
    )
    vals = batch.log_norms / length
    c = float(np.mean(vals)) if center is None else float(center)
    p = float(np.mean(np.abs(vals - c) >= zeta))
    return DeviationPoint(
        p_hat=p, center=c, zeta=float(zeta), length=int(length),
        n_phases=int(n_phases), below_resolution=p == 0.0,
    )


@dataclass
class LadderReport:
    """p_hat across scales plus the stretched-exponential fit p ~ e^{-r N^rho}.

    Only scales with p_hat in [10/n_phases, 1/2] enter the fit: below that
    band the empirical probability is resolution noise, above it the run is
    not yet in the deviation regime. degenerate means fewer than two usable
    points (rate/exponent then carry no information).
    """

    scales: np.ndarray
    p_hats: np.ndarray
    centers: np.ndarray
    zeta: float
    rho_hat: float
    rate_hat: float
    n_fit: int
    degenerate: bool


def ld_scale_ladder(
    model: OperatorModel,
    energy: float,
    scales,
    zeta: float,
    n_phases: int = 512,
    seed: int = 0,
) -> LadderReport:
    scales = np.asarray(scales, dtype=np.int64)
    if scales.size < 2 or np.any(np.diff(scales) <= 0):
        raise ValueError("scales must be at least two strictly increasing lengths")
    p = np.empty(scales.size)
    centers = np.empty(scales.size)
    for i, N in enumerate(scales):
        pt = ld_probability(model, energy, int(N), zeta, n_phases=n_phases, seed=seed)
        p[i] = pt.p_hat
        centers[i] = pt.center
    lo_band = 10.0 / n_phases
    use = (p >= lo_band) & (p <= 0.5)
    rho_hat = rate_hat = math.nan
    n_fit = int(np.count_nonzero(use))
    degenerate = n_fit < 2
    if not degenerate:
        xs = np.log(scales[use].astype(np.float64))
        ys = np.log(-np.log(p[use]))
        slope, intercept = np.polyfit(xs, ys, 1)
        rho_hat = float(slope)
        rate_hat = float(math.exp(intercept))
    return LadderReport(
        scales=scales, p_hats=p, centers=centers, zeta=float(zeta),
        rho_hat=rho_hat, rate_hat=rate_hat, n_fit=n_fit, degenerate=degenerate,
    )


# ── bridge from deviation rates to Green decay ───────────────────────────────


@dataclass
class BridgeReport:
    """Green-function smallness on a four-interval family at tolerance
    eps = exp(-rate * N^rho).

    holds means at least one interval in the family has all its boundary
    resolvent entries below eps. degenerate flags eps underflowing double
    precision (the comparison is then vacuous and must not be trusted).
    """

    eps: float
    length: int
    boundary_maxima: list[float]
    best_interval: int
    holds: bool
    degenerate: bool


def ld_to_green_bridge(
    model: OperatorModel, theta, energy: float, length: int, rate: float, rho: float
) -> BridgeReport:
    """Check that some interval of the four-interval family at scale N has
    |G_E(0, v)| <= e^{-rate N^rho} at every boundary vertex v."""
    from .evolve import spectral_data_for
    from .green import boundary_vertices, green_row

    if rate <= 0 or rho <= 0:
        raise ValueError("rate and rho must be positive")
    arg = rate * float(length) ** rho
    degenerate = arg > 700.0
    eps = math.exp(-arg) if not degenerate else 0.0
    theta = as_fixed_phase(theta, model.base.k)
    values = []
    for vol in four_interval_family(length):
        sd = spectral_data_for(model, vol, theta)
        try:
            row = green_row(sd, float(energy)).row
        except SingularEnergyError:
            values.append(math.inf)
            continue
        idx, _ = boundary_vertices(model.kernel, vol, 0.0)
        values.append(float(np.max(np.abs(row[idx]))))
    best = int(np.argmin(values))
    holds = values[best] <= eps
    return BridgeReport(
        eps=eps, length=int(length), boundary_maxima=values,
        best_interval=best, holds=holds, degenerate=degenerate,
    )


# ── moment envelopes (three regimes) ─────────────────────────────────────────


def rho_preset(kind: str, *, hull_dim: int | None = None, kappa: float | None = None,
               power: float | None = None) -> float:
    """Stretched-exponential exponents for the standard base-dynamics classes.

    shift:            1 / (k^3 kappa^2)
    skew:             1 / (4^{k-1} k^3 kappa^2)
    denominator_power:(2 - s) / s for ladders N_j ~ q_j^s, 0 < s < 2
    bounded_type:     1
    refined_one_freq: (3.25 - 3 kappa)^2 for 1 <= kappa < 13/12
    """
    if kind == "shift":
        if not (hull_dim and kappa and kappa >= 1):
            raise ValueError("shift preset needs hull_dim >= 1 and kappa >= 1")
        return 1.0 / (hull_dim ** 3 * kappa ** 2)
    if kind == "skew":
        if not (hull_dim and kappa and kappa >= 1):
            raise ValueError("skew preset needs hull_dim >= 1 and kappa >= 1")
        return 1.0 / (4.0 ** (hull_dim - 1) * hull_dim ** 3 * kappa ** 2)
    if kind == "denominator_power":
        if power is None or not (0.0 < power < 2.0):
            raise ValueError("denominator_power preset needs 0 < power < 2")
        return (2.0 - power) / power
    if kind == "bounded_type":
        return 1.0
    if kind == "refined_one_freq":
        if kappa is None or not (1.0 <= kappa < 13.0 / 12.0):
            raise ValueError("refined_one_freq preset needs 1 <= kappa < 13/12")
        return (3.25 - 3.0 * kappa) ** 2
    raise ValueError(f"unknown rho preset kind {kind!r}")


def scale_ladder_from_frequency(
    alpha: float, count: int = 8, power: float = 1.0, prefactor: float = 1.0
) -> tuple[np.ndarray, bool]:
    """Scales N_j = ceil(prefactor * q_j^power) from the continued-fraction
    denominators q_j of alpha. Returns (scales, exhausted) where exhausted
    mirrors the denominator search hitting its exact-arithmetic cap."""
    qs, exhausted = continued_fraction_denominators(alpha, count)
    ns = []
    for q in qs:
        n = int(math.ceil(prefactor * float(q) ** power))
        if not ns or n > ns[-1]:
            ns.append(max(n, 2))
    return np.asarray(ns, dtype=np.int64), exhausted


def weak_gap_sequence(scales, rho: float) -> np.ndarray:
    """The gap quantities N_j^{-rho} log N_{j+1} whose decay licenses the
    all-times envelope in the weak regime."""
    s = np.asarray(scales, dtype=np.float64)
    if s.size < 2:
        raise ValueError("need at least two scales")
    return s[:-1] ** (-rho) * np.log(s[1:])


def subsequence_times(scales, rate: float, rho: float, p: float) -> np.ndarray:
    """Checkpoint times t_j = exp(rate N_j^rho / (2p + 1)) for the
    subsequence regime."""
    if rate <= 0 or rho <= 0 or p <= 0:
        raise ValueError("rate, rho, p must be positive")
    s = np.asarray(scales, dtype=np.float64)
    args = rate * s ** rho / (2.0 * p + 1.0)
    if np.any(args > 700.0):
        raise ValueError("subsequence times overflow double precision; shrink the ladder")
    return np.exp(args)


def moment_envelope(
    times,
    p: float,
    rho: float,
    regime: str = "diophantine",
    kappa: float = 1.0,
    eta: float = 0.25,
    rate: float = 1.0,
    constant: float = 1.0,
) -> np.ndarray:
    """Upper envelope for the p-th spread moment in each regime.

    diophantine: C (log(t + e))^{kappa p / rho}, all times.
    weak:        C (log(t + e))^{(1 + eta) p / rho}, all times, any eta > 0,
                 contingent on the weak_gap_sequence decaying.
    subsequence: C ((2p + 1) log t / rate)^{p / rho}, valid at checkpoint
                 times t_j only (equals C N_j^p there).
    """
    t = np.asarray(times, dtype=np.float64)
    if np.any(t <= 0):
        raise ValueError("times must be positive")
    if regime == "diophantine":
        if kappa < 1:
            raise ValueError("kappa must be >= 1")
        return constant * np.log(t + math.e) ** (kappa * p / rho)
    if regime == "weak":
        if eta <= 0:
            raise ValueError("eta must be positive")
        return constant * np.log(t + math.e) ** ((1.0 + eta) * p / rho)
    if regime == "subsequence":
        if np.any(t <= 1.0):
            raise ValueError("subsequence checkpoints satisfy t > 1")
        return constant * ((2.0 * p + 1.0) * np.log(t) / rate) ** (p / rho)
    raise ValueError(f"unknown regime {regime!r}")


@dataclass
class EnvelopeSpec:
    """Predicted moment envelope from an escape-rate ladder.

    exponent is the power of log(t) in the envelope; checkpoint_times is set
    only in the subsequence regime (the envelope is claimed there, not in
    between); gap_sequence/gap_decays diagnose the weak-regime license.
    """

    regime: str
    p: float
    rho: float
    rate: float
    exponent: float
    kappa_hat: float | None = None
    gap_sequence: np.ndarray | None = None
    gap_decays: bool | None = None
    checkpoint_times: np.ndarray | None = None
    eta: float | None = None

    def evaluate(self, times, constant: float = 1.0) -> np.ndarray:
        kw = dict(p=self.p, rho=self.rho, regime=self.regime, rate=self.rate,
                  constant=constant)
        if self.regime == "diophantine":
            kw["kappa"] = self.kappa_hat
        if self.regime == "weak":
            kw["eta"] = self.eta
        return moment_envelope(times, **kw)


def moment_bound_from_escape(
    scales,
    rho: float,
    rate: float,
    regime: str,
    p: float = 2.0,
    kappa: float | None = None,
    eta: float = 0.25,
) -> EnvelopeSpec:
    """Turn a scale ladder plus escape rate into a concrete moment envelope.

    diophantine: needs N_{j+1} <= N_j^kappa; kappa is fitted from the ladder
    when not given (largest log-ratio of consecutive scales >= 2). weak:
    reports the gap quantities N_j^{-rho} log N_{j+1} and whether they decay.
    subsequence: emits the checkpoint times t_j where the envelope applies.
    """
    s = np.asarray(scales, dtype=np.int64)
    if s.size < 2 or np.any(np.diff(s) <= 0):
        raise ValueError("scales must be strictly increasing with at least two entries")
    if regime == "diophantine":
        if kappa is None:
            big = s[s >= 2].astype(np.float64)
            if big.size < 2:
                raise ValueError("need two scales >= 2 to fit kappa")
            kappa = float(np.max(np.log(big[1:]) / np.log(big[:-1])))
        kappa = max(float(kappa), 1.0)
        return EnvelopeSpec(
            regime=regime, p=p, rho=rho, rate=rate,
            exponent=kappa * p / rho, kappa_hat=kappa,
        )
    if regime == "weak":
        gaps = weak_gap_sequence(s, rho)
        half = gaps[gaps.size // 2:]
        decays = bool(np.all(np.diff(half) < 0)) if half.size > 1 else False
        return EnvelopeSpec(
            regime=regime, p=p, rho=rho, rate=rate,
            exponent=(1.0 + eta) * p / rho, gap_sequence=gaps,
            gap_decays=decays, eta=eta,
        )
    if regime == "subsequence":
        return EnvelopeSpec(
            regime=regime, p=p, rho=rho, rate=rate, exponent=p / rho,
            checkpoint_times=subsequence_times(s, rate, rho, p),
        )
    raise ValueError(f"unknown regime {regime!r}")


def fit_envelope_constant(moments, envelope) -> float:
    """Smallest C with moments <= C * envelope pointwise (max ratio)."""
    m = np.asarray(moments, dtype=np.float64)
    g = np.asarray(envelope, dtype=np.float64)
    if m.shape != g.shape:
        raise ValueError("moments and envelope must align")
    if np.any(g <= 0):
        raise NumericalError("envelope must be strictly positive")
    return float(np.max(m / g))


def loglog_time_exponent(times, values, tail_fraction: float = 0.5) -> tuple[float, int]:
    """Slope of log(values) against log(log(t + e)) over the tail of the run.

    Recovers kappa p / rho from a measured moment curve; pairs with
    moment_envelope for the regime diagnostics."""
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.size != v.size or t.size < 4:
        raise ValueError("need at least four aligned samples")
    if not (0.0 < tail_fraction <= 1.0):
        raise ValueError("tail_fraction in (0, 1]")
    k0 = int(math.floor(t.size * (1.0 - tail_fraction)))
    t, v = t[k0:], v[k0:]
    good = v > 0
    if np.count_nonzero(good) < 3:
        return math.nan, int(np.count_nonzero(good))
    xs = np.log(np.log(t[good] + math.e))
    ys = np.log(v[good])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return slope, int(np.count_nonzero(good))

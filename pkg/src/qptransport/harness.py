"""End-to-end runs behind the CLI: assemble, evolve, scan, and check, then
write deterministic CSV reports.

Each run_* function takes a validated RunConfig, does the numerics, and
returns a report dataclass; passing an output directory also writes CSVs
(atomic tmp+rename, '#' comment headers, shortest round-trip float text so
identical runs are byte-identical), a small matplotlib script per table, and
a run manifest. The manifest carries wall time and versions and is excluded
from any byte-identity claim; the CSVs are not.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, build_model, time_grid, validate_config
from .errors import ConfigError, NumericalError
from .evolve import (
    ballistic_check,
    propagator_row,
    propagator_row_contour,
    propagate,
    spectral_data_for,
    transport_moments,
)
from .green import resonant_measure
from .ldt import ld_scale_ladder, ld_to_green_bridge, loglog_time_exponent, lyapunov, moment_envelope
from .model import (
    OperatorModel,
    Volume,
    as_fixed_phase,
    four_interval_family,
    torus_distance,
)
from .sampling import kronecker_sequence

# ── deterministic CSV / manifest output ──────────────────────────────────────


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@dataclass
class Table:
    """One CSV artifact: rows are parallel columns, meta goes in '#' lines."""

    name: str
    title: str
    meta: dict
    columns: dict
    xscale: str = "log"
    yscale: str = "log"
    plot: bool = True


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def write_csv(path: str, title: str, meta: dict, columns: dict) -> None:
    """Write a comment-headed CSV atomically with round-trip float text."""
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    n_rows = cols[0].shape[0] if cols else 0
    if any(c.shape[0] != n_rows for c in cols):
        raise ValueError("csv columns must share a length")
    lines = [f"# {title}"]
    for k, v in meta.items():
        lines.append(f"# {k} = {_fmt(v)}")
    lines.append("# columns: " + ",".join(names))
    for i in range(n_rows):
        lines.append(",".join(_fmt(c[i]) for c in cols))
    _atomic_write(path, "\n".join(lines) + "\n")


_PLOT_TEMPLATE = """\
\"\"\"Quick-look plot for {csv}. Needs matplotlib.\"\"\"
import matplotlib.pyplot as plt

rows, names = [], []
with open({csv!r}) as fh:
    for line in fh:
        if line.startswith("# columns:"):
            names = line.split(":", 1)[1].strip().split(",")
        elif not line.startswith("#"):
            rows.append([float(v) for v in line.strip().split(",")])
cols = list(zip(*rows))
fig, ax = plt.subplots()
for name, ys in zip(names[1:], cols[1:]):
    ax.plot(cols[0], ys, marker=".", label=name)
ax.set_xlabel(names[0])
ax.set_xscale({xscale!r})
ax.set_yscale({yscale!r})
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig({png!r}, dpi=150)
print("wrote", {png!r})
"""


def emit_outputs(out_dir: str, command: str, cfg: RunConfig, tables: list, t0: float) -> list:
    """Write every table as CSV + plot script, then the run manifest.

    An empty table list still writes the manifest, so every run leaves a
    record. Returns the list of files written (manifest last)."""
    import scipy

    files = []
    for tb in tables:
        write_csv(os.path.join(out_dir, tb.name), tb.title, tb.meta, tb.columns)
        files.append(tb.name)
        if tb.plot:
            stem = os.path.splitext(tb.name)[0]
            script = f"plot_{stem}.py"
            _atomic_write(
                os.path.join(out_dir, script),
                _PLOT_TEMPLATE.format(csv=tb.name, png=f"{stem}.png",
                                      xscale=tb.xscale, yscale=tb.yscale),
            )
            files.append(script)
    lines = [
        f"command: {command}",
        f"seed: {cfg.seed}",
        f"numpy: {np.__version__}",
        f"scipy: {scipy.__version__}",
        f"config: {cfg!r}",
        "files:",
    ]
    for f in files:
        lines.append(f"  {f} ({os.path.getsize(os.path.join(out_dir, f))} bytes)")
    lines.append(f"wall_seconds: {time.monotonic() - t0:.3f}")
    _atomic_write(os.path.join(out_dir, "run_manifest.txt"), "\n".join(lines) + "\n")
    files.append("run_manifest.txt")
    return files


def _theta(cfg: RunConfig, model: OperatorModel) -> np.ndarray:
    return as_fixed_phase(list(cfg.evolve.theta), model.base.k)


def _member_volumes(cfg: RunConfig) -> list:
    rc = cfg.resonance
    if rc.family_scale is not None:
        return four_interval_family(int(rc.family_scale))
    if rc.boxes:
        return [Volume.interval(int(lo), int(hi)) for lo, hi in rc.boxes]
    raise ConfigError(
        "resonance member family missing: set resonance.family_scale or resonance.boxes"
    )


def _require_tolerances(cfg: RunConfig, command: str) -> None:
    if cfg.resonance.eps is None:
        raise ConfigError(f"{command} needs resonance.eps and resonance.delta")


def power_law_slope(times, values, window_factor: float = 10.0) -> float:
    """Tail slope of log(values) vs log(times), over t >= t_max / window_factor."""
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    sel = (t >= t[-1] / window_factor) & (v > 0)
    if np.count_nonzero(sel) < 3:
        return math.nan
    return float(np.polyfit(np.log(t[sel]), np.log(v[sel]), 1)[0])


# ── build / evolve / green-scan / ldt runs ───────────────────────────────────


@dataclass
class BuildReport:
    n_sites: int
    norm_bound: float
    spectrum_lo: float
    spectrum_hi: float
    energy_window: tuple
    velocity_bound: float


def run_build(cfg: RunConfig, out_dir: str | None = None) -> BuildReport:
    t0 = time.monotonic()
    model = build_model(cfg.model)
    vol = Volume.box(cfg.volume.halfwidth, model.kernel.nu)
    sd = spectral_data_for(model, vol, _theta(cfg, model))
    rep = BuildReport(
        n_sites=vol.size,
        norm_bound=model.norm_bound(),
        spectrum_lo=float(sd.eigenvalues[0]),
        spectrum_hi=float(sd.eigenvalues[-1]),
        energy_window=model.energy_window(),
        velocity_bound=model.velocity_bound(),
    )
    if out_dir:
        emit_outputs(out_dir, "build", cfg, [Table(
            "spectrum.csv", "finite-volume spectrum",
            {"n_sites": rep.n_sites, "norm_bound": rep.norm_bound,
             "velocity_bound": rep.velocity_bound},
            {"index": np.arange(sd.eigenvalues.size), "eigenvalue": sd.eigenvalues},
            xscale="linear", yscale="linear",
        )], t0)
    return rep


@dataclass
class EvolutionReport:
    times: np.ndarray
    moments: dict  # order -> array over times
    edge_mass_max: float
    slopes: dict  # order -> tail power-law slope


def run_evolve(cfg: RunConfig, out_dir: str | None = None) -> EvolutionReport:
    t0 = time.monotonic()
    model = build_model(cfg.model)
    vol = Volume.box(cfg.volume.halfwidth, model.kernel.nu)
    theta = _theta(cfg, model)
    sd = spectral_data_for(model, vol, theta)
    times = time_grid(cfg.evolve.horizon, cfg.evolve.n_times, cfg.evolve.t_min)
    record = propagate(sd, times, theta)
    moments = {p: transport_moments(record, float(p)) for p in cfg.evolve.moment_orders}
    slopes = {p: power_law_slope(times, m) for p, m in moments.items()}
    rep = EvolutionReport(
        times=times,
        moments=moments,
        edge_mass_max=float(np.max(record.edge_mass)),
        slopes=slopes,
    )
    if out_dir:
        cols = {"t": times}
        for p, m in moments.items():
            cols[f"moment_p{_fmt(p)}"] = m
        cols["edge_mass"] = record.edge_mass
        emit_outputs(out_dir, "evolve", cfg, [Table(
            "evolution.csv", "spread moments on a fixed box",
            {"halfwidth": cfg.volume.halfwidth, "edge_mass_max": rep.edge_mass_max},
            cols,
        )], t0)
    return rep


def run_green_scan(cfg: RunConfig, out_dir: str | None = None):
    t0 = time.monotonic()
    model = build_model(cfg.model)
    rc = cfg.resonance
    _require_tolerances(cfg, "green-scan")
    vols = _member_volumes(cfg)
    scan = resonant_measure(
        model, _theta(cfg, model), vols, rc.eps, rc.grid_step, complexify=rc.complexify
    )
    if out_dir:
        emit_outputs(out_dir, "green-scan", cfg, [_resonance_table(scan, rc, len(vols))], t0)
    return scan


def _resonance_table(scan, rc, members: int) -> Table:
    return Table(
        "resonance_grid.csv", "resonant-energy grid scan",
        {
            "eps": rc.eps, "delta": rc.delta, "grid_step": scan.grid_step,
            "delta_hat": scan.delta_hat, "members": members,
            "intersection_count": scan.intersection_count,
            "refinement_flag": scan.refinement_flag,
            "grid_too_coarse": scan.grid_too_coarse,
        },
        {"energy": scan.energies, "in_intersection": scan.intersection.astype(np.int64)},
        xscale="linear", yscale="linear",
    )


@dataclass
class LdtRunReport:
    gamma_hat: float
    gamma_spread: float
    ladder: object
    bridge: object | None


def run_ldt(cfg: RunConfig, out_dir: str | None = None) -> LdtRunReport:
    t0 = time.monotonic()
    model = build_model(cfg.model)
    lc = cfg.ldt
    scales = [int(n) for n in lc.scales]
    est = lyapunov(model, lc.energy, scales[-1], n_phases=min(lc.n_phases, 128), seed=cfg.seed)
    ladder = ld_scale_ladder(
        model, lc.energy, scales, lc.zeta, n_phases=lc.n_phases, seed=cfg.seed
    )
    bridge = None
    if not ladder.degenerate and ladder.rho_hat > 0 and ladder.rate_hat > 0:
        bridge = ld_to_green_bridge(
            model, list(cfg.evolve.theta), lc.energy, scales[-1],
            ladder.rate_hat, ladder.rho_hat,
        )
    rep = LdtRunReport(
        gamma_hat=est.gamma_hat, gamma_spread=est.spread, ladder=ladder, bridge=bridge
    )
    if out_dir:
        emit_outputs(out_dir, "ldt", cfg, [Table(
            "ld_ladder.csv", "large-deviation probability across scales",
            {
                "energy": lc.energy, "zeta": lc.zeta, "n_phases": lc.n_phases,
                "gamma_hat": est.gamma_hat, "gamma_stderr": est.spread / math.sqrt(est.n_phases),
                "rho_hat": ladder.rho_hat, "rate_hat": ladder.rate_hat,
                "fit_points": ladder.n_fit,
            },
            {"scale": ladder.scales, "p_hat": ladder.p_hats, "center": ladder.centers},
        )], t0)
    return rep


# ── the transport-bound check ────────────────────────────────────────────────


@dataclass
class BoxCheck:
    halfwidth: int
    C_raw: float  # smallest C making the bound hold (max probability/rhs ratio)
    C_fit: float  # admissible fitted constant, >= 1
    violations: int  # grid points with P > C_fit * rhs (0 by construction)
    violations_at_C1: int  # diagnostic: count against C = 1
    max_prob_tail: float  # largest probability outside the free cone


@dataclass
class TheoremReport:
    eps: float
    delta: float
    delta_hat: float
    hypothesis_met: bool
    M: int
    member_size_max: int
    horizon_cap: float
    times: np.ndarray | None = None
    c_hat: float = math.nan
    flat_term: float = math.nan  # |Lambda|^2 eps^{1/(5M)}
    boxes: list = field(default_factory=list)  # BoxCheck per ambient halfwidth
    C_ratio: float = math.nan  # max/min C_raw across boxes
    sweep_scale: int | None = None
    sweep_delta_hat: float | None = None
    contour_gap: float = math.nan
    refinement_flag: bool = False
    grid_too_coarse: bool = False


def run_theorem_check(cfg: RunConfig, out_dir: str | None = None) -> TheoremReport:
    """Verify the transport bound end to end on one configuration.

    Pipeline: measure the resonant-energy set across the member family (exact
    grid scan); when delta_hat <= delta, evolve on each ambient box up to the
    admissible horizon, fit the decay rate and the smallest admissible
    envelope constant, and report constant stability across ambient boxes
    plus a +4 family-scale sweep. When the hypothesis fails the report says
    so and asserts nothing about the conclusion.
    """
    t0 = time.monotonic()
    validate_config(cfg, for_theorem_check=True)
    model = build_model(cfg.model)
    rc = cfg.resonance
    _require_tolerances(cfg, "theorem-check")
    theta = _theta(cfg, model)
    vols = _member_volumes(cfg)
    M = len(vols)
    scan = resonant_measure(model, theta, vols, rc.eps, rc.grid_step, complexify=rc.complexify)
    cap = abs(math.log(rc.eps)) / (40.0 * M * rc.delta)
    size_max = max(v.size for v in vols)
    rep = TheoremReport(
        eps=rc.eps, delta=rc.delta, delta_hat=scan.delta_hat,
        hypothesis_met=scan.delta_hat <= rc.delta, M=M,
        member_size_max=size_max, horizon_cap=cap,
        refinement_flag=scan.refinement_flag, grid_too_coarse=scan.grid_too_coarse,
    )
    tables = [_resonance_table(scan, rc, M)]
    if not rep.hypothesis_met:
        if out_dir:
            emit_outputs(out_dir, "theorem-check", cfg, tables, t0)
        return rep

    horizon = min(cfg.evolve.horizon, cap)
    times = time_grid(horizon, cfg.evolve.n_times, cfg.evolve.t_min)
    rep.times = times
    rep.flat_term = size_max ** 2 * rc.eps ** (1.0 / (5.0 * M))

    halfwidths = [int(h) for h in (cfg.volume.ambient_halfwidths or [cfg.volume.halfwidth])]
    records = []
    for hw in halfwidths:
        vol = Volume.box(hw, model.kernel.nu)
        sd = spectral_data_for(model, vol, theta)
        records.append((hw, vol, propagate(sd, times, theta), sd))

    # decay rate from the largest box, reused for every box so the fitted
    # constants are comparable across sizes
    c_hat = 1.0
    try:
        fit = ballistic_check(records[-1][2], model.velocity_bound())
        if not fit.degenerate and fit.c > 0:
            c_hat = float(fit.c)
    except ValueError:
        pass
    rep.c_hat = c_hat

    for hw, vol, record, _sd in records:
        norms = vol.norms()
        rhs_base = np.exp(-c_hat * norms) * rc.delta ** 2 + rep.flat_term
        ratios = record.probabilities / rhs_base[None, :]
        c_raw = float(np.max(ratios))
        c_fit = max(1.0, c_raw)
        violations = int(np.count_nonzero(record.probabilities > c_fit * rhs_base[None, :]))
        at_c1 = int(np.count_nonzero(record.probabilities > rhs_base[None, :]))
        outside = norms > model.velocity_bound() * times[-1]
        tail = float(np.max(record.probabilities[:, outside])) if np.any(outside) else 0.0
        rep.boxes.append(BoxCheck(
            halfwidth=hw, C_raw=c_raw, C_fit=c_fit,
            violations=violations, violations_at_C1=at_c1, max_prob_tail=tail,
        ))
    cs = [b.C_raw for b in rep.boxes]
    rep.C_ratio = float(max(cs) / min(cs)) if min(cs) > 0 else math.inf

    # +4 family sweep: stability of the measured hypothesis under the scale
    if rc.family_scale is not None:
        sweep = int(rc.family_scale) + 4
        rep.sweep_scale = sweep
        rep.sweep_delta_hat = resonant_measure(
            model, theta, four_interval_family(sweep), rc.eps, rc.grid_step,
            complexify=rc.complexify,
        ).delta_hat

    # independent propagator route on the smallest box at the median time
    hw0, vol0, rec0, sd0 = records[0]
    t_mid = float(times[times.size // 2])
    rep.contour_gap = float(np.max(np.abs(
        propagator_row(sd0, t_mid) - propagator_row_contour(sd0, t_mid)
    )))

    if out_dir:
        # per-(t, w) bound table for the first ambient box
        hw0, vol0, rec0, _ = records[0]
        b0 = rep.boxes[0]
        norms0 = vol0.norms()
        rhs0 = b0.C_fit * (np.exp(-c_hat * norms0) * rc.delta ** 2 + rep.flat_term)
        sites = vol0.sites()
        nt, nw = rec0.probabilities.shape
        cols = {"t": np.repeat(times, nw)}
        for j in range(vol0.nu):
            cols[f"w_{j}"] = np.tile(sites[:, j], nt)
        P_flat = rec0.probabilities.reshape(-1)
        rhs_flat = np.tile(rhs0, nt)
        cols["P"] = P_flat
        cols["rhs"] = rhs_flat
        cols["holds"] = (P_flat <= rhs_flat).astype(np.int64)
        tables.append(Table(
            "theorem_check.csv", "pointwise transport bound on the first ambient box",
            {
                "halfwidth": hw0, "eps": rc.eps, "delta": rc.delta,
                "delta_hat": scan.delta_hat, "C_fit": b0.C_fit, "c_hat": c_hat,
                "flat_term": rep.flat_term, "violations": b0.violations,
            },
            cols, plot=False,
        ))
        for bchk, (hw, vol, record, _) in zip(rep.boxes, records):
            rhs_base = np.exp(-c_hat * vol.norms()) * rc.delta ** 2 + rep.flat_term
            per_t = np.max(record.probabilities / rhs_base[None, :], axis=1)
            tables.append(Table(
                f"transport_bound_hw{hw}.csv",
                "probability/envelope ratio over time",
                {
                    "halfwidth": hw, "eps": rc.eps, "delta": rc.delta,
                    "delta_hat": scan.delta_hat, "c_hat": c_hat,
                    "flat_term": rep.flat_term, "C_raw": bchk.C_raw,
                    "C_fit": bchk.C_fit, "violations": bchk.violations,
                },
                {"t": times, "max_ratio": per_t, "edge_mass": record.edge_mass},
            ))
        emit_outputs(out_dir, "theorem-check", cfg, tables, t0)
    return rep


# ── moment scan ──────────────────────────────────────────────────────────────


@dataclass
class MomentReport:
    times: np.ndarray
    moments: dict  # order -> array (sup over the phase sample if > 1)
    slopes: dict  # order -> tail slope of log M vs log t
    loglog_slopes: dict  # order -> slope of log M vs log log t
    edge_mass_max: float
    halfwidth: int
    envelopes: dict = field(default_factory=dict)  # order -> envelope array
    envelope_exponents: dict = field(default_factory=dict)  # order -> p/rho
    doubling_delta: float = math.nan  # sup-sample convergence indicator


def run_moment_scan(cfg: RunConfig, out_dir: str | None = None) -> MomentReport:
    """Spread moments on a box wide enough that truncation cannot bias them.

    The kernel velocity bound makes the check quantitative: the run refuses
    horizons beyond halfwidth / velocity and names the largest admissible
    horizon in the error. With phase_sup_samples > 1 the reported M_p(t) is
    the max over a low-discrepancy phase sample and the half-versus-full
    sample delta tracks convergence toward the phase supremum.
    """
    t0 = time.monotonic()
    model = build_model(cfg.model)
    hw = int(cfg.volume.halfwidth)
    vb = model.velocity_bound()
    if vb * cfg.evolve.horizon > hw:
        raise NumericalError(
            f"box halfwidth {hw} cannot contain the light cone: "
            f"velocity bound {vb!r} * horizon {cfg.evolve.horizon!r} exceeds it; "
            f"largest admissible horizon = {hw / vb!r}"
        )
    vol = Volume.box(hw, model.kernel.nu)
    times = time_grid(cfg.evolve.horizon, cfg.evolve.n_times, cfg.evolve.t_min)
    n_sample = int(cfg.evolve.phase_sup_samples)
    if n_sample > 1:
        phase_list = [
            as_fixed_phase(ph, model.base.k)
            for ph in kronecker_sequence(n_sample, model.base.k, seed=cfg.seed)
        ]
    else:
        phase_list = [_theta(cfg, model)]

    orders = [float(p) for p in cfg.evolve.moment_orders]
    moments = {p: np.zeros(times.size) for p in orders}
    half = {p: np.zeros(times.size) for p in orders}
    edge_max = 0.0
    for i, theta in enumerate(phase_list):
        sd = spectral_data_for(model, vol, theta)
        record = propagate(sd, times, theta)
        edge_max = max(edge_max, float(np.max(record.edge_mass)))
        for p in orders:
            m = transport_moments(record, p)
            np.maximum(moments[p], m, out=moments[p])
            if i < max(1, n_sample // 2):
                np.maximum(half[p], m, out=half[p])
    if n_sample > 1:
        deltas = [
            float(np.max(np.abs(moments[p] - half[p]) / np.maximum(moments[p], 1e-300)))
            for p in orders
        ]
        doubling = max(deltas)
    else:
        doubling = math.nan

    slopes = {p: power_law_slope(times, moments[p]) for p in orders}
    ll_slopes = {p: loglog_time_exponent(times, moments[p])[0] for p in orders}
    envelopes, exponents = {}, {}
    if cfg.evolve.rho is not None:
        for p in orders:
            if p == 0:
                continue
            envelopes[p] = moment_envelope(times, p, cfg.evolve.rho, regime="diophantine", kappa=1.0)
            exponents[p] = p / cfg.evolve.rho
    rep = MomentReport(
        times=times, moments=moments, slopes=slopes, loglog_slopes=ll_slopes,
        edge_mass_max=edge_max, halfwidth=hw, envelopes=envelopes,
        envelope_exponents=exponents, doubling_delta=doubling,
    )
    if out_dir:
        cols = {"t": times}
        for p in orders:
            cols[f"moment_p{_fmt(p)}"] = moments[p]
        for p, env in envelopes.items():
            cols[f"envelope_p{_fmt(p)}"] = env
        meta = {
            "halfwidth": hw, "velocity_bound": vb, "edge_mass_max": edge_max,
            "phase_sup_samples": n_sample, "doubling_delta": doubling,
        }
        for p in orders:
            meta[f"tail_slope_p{_fmt(p)}"] = slopes[p]
            meta[f"loglog_slope_p{_fmt(p)}"] = ll_slopes[p]
            if p in exponents:
                meta[f"envelope_exponent_p{_fmt(p)}"] = exponents[p]
        emit_outputs(out_dir, "moment-scan", cfg,
                     [Table("moments.csv", "spread moment scan", meta, cols)], t0)
    return rep


# ── phase uniformity ─────────────────────────────────────────────────────────


@dataclass
class UniformityReport:
    delta_hats: np.ndarray
    mean_delta_hat: float
    typical_fraction: float  # fraction with delta_hat <= delta
    atypical_fraction: float
    chebyshev_prediction: float  # mean delta_hat / delta
    inconclusive: bool  # no typical phase in the sample
    hull_constant: bool
    pair_distance: float = 0.0
    gap: float = 0.0
    gap_surrogate: float = 0.0
    gap_ok: bool = True


def run_phase_uniformity(cfg: RunConfig, out_dir: str | None = None) -> UniformityReport:
    """Resonant measure across a low-discrepancy phase sample, with the
    typical/atypical split at delta and a perturbation check.

    The atypical fraction is compared against its first-moment (Chebyshev)
    prediction mean(delta_hat)/delta. For the worst atypical phase the check
    pairs it with the nearest typical phase in the sample, evolves both, and
    compares the probability gap against the first-order surrogate
    2 |g| Lip(F) dist t (1 + hw)^chi, chi the polynomial phase-distortion
    power of the base dynamics. No typical phase at all marks the run
    inconclusive.
    """
    t0 = time.monotonic()
    model = build_model(cfg.model)
    rc = cfg.resonance
    _require_tolerances(cfg, "phase-uniformity")
    vols = _member_volumes(cfg)
    n = int(cfg.uniformity.n_phases)
    phases = kronecker_sequence(n, model.base.k, seed=cfg.seed)
    d_hats = np.empty(n)
    for i in range(n):
        theta = as_fixed_phase(phases[i], model.base.k)
        d_hats[i] = resonant_measure(
            model, theta, vols, rc.eps, rc.grid_step, complexify=rc.complexify
        ).delta_hat
    typical = d_hats <= rc.delta
    mean = float(np.mean(d_hats))
    rep = UniformityReport(
        delta_hats=d_hats,
        mean_delta_hat=mean,
        typical_fraction=float(np.mean(typical)),
        atypical_fraction=float(np.mean(~typical)),
        chebyshev_prediction=mean / rc.delta,
        inconclusive=not bool(np.any(typical)),
        hull_constant=model.hull.is_constant,
    )

    if not rep.inconclusive and np.any(~typical):
        atypical_idx = np.flatnonzero(~typical)
        worst = int(atypical_idx[np.argmax(d_hats[atypical_idx])])
        typ_idx = np.flatnonzero(typical)
        theta_a = as_fixed_phase(phases[worst], model.base.k)
        dists = np.array([
            torus_distance(theta_a, as_fixed_phase(phases[j], model.base.k))
            for j in typ_idx
        ])
        near = int(typ_idx[np.argmin(dists)])
        theta_b = as_fixed_phase(phases[near], model.base.k)
        dist = float(np.min(dists))
        hw = int(cfg.volume.halfwidth)
        vol = Volume.box(hw, model.kernel.nu)
        t_star = float(cfg.uniformity.gap_time or cfg.evolve.horizon)
        ts = np.array([t_star])
        rec_a = propagate(spectral_data_for(model, vol, theta_a), ts, theta_a)
        rec_b = propagate(spectral_data_for(model, vol, theta_b), ts, theta_b)
        rep.gap = float(np.max(np.abs(rec_a.probabilities - rec_b.probabilities)))
        rep.pair_distance = dist
        distortion = (1.0 + hw) ** model.base.chi
        rep.gap_surrogate = (
            2.0 * abs(model.coupling) * model.hull.lipschitz * dist * t_star * distortion
            + 1e-12
        )
        rep.gap_ok = rep.gap <= rep.gap_surrogate

    if out_dir:
        cols = {"phase_index": np.arange(n)}
        for j in range(model.base.k):
            cols[f"theta_{j}"] = phases[:, j]
        cols["delta_hat"] = d_hats
        cols["typical"] = typical.astype(np.int64)
        emit_outputs(out_dir, "phase-uniformity", cfg, [Table(
            "phase_uniformity.csv", "resonant measure across phases",
            {
                "eps": rc.eps, "delta": rc.delta, "mean_delta_hat": mean,
                "typical_fraction": rep.typical_fraction,
                "atypical_fraction": rep.atypical_fraction,
                "chebyshev_prediction": rep.chebyshev_prediction,
                "inconclusive": rep.inconclusive,
                "pair_distance": rep.pair_distance,
                "gap": rep.gap, "gap_surrogate": rep.gap_surrogate,
                "gap_ok": rep.gap_ok,
            },
            cols, xscale="linear", yscale="linear",
        )], t0)
    return rep

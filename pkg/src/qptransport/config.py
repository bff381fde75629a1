"""TOML run configuration: parsing, validation, and model construction.

Validation is strict and front-loaded: unknown keys are errors, and the two
quantitative compatibility constraints between the resonance tolerances and
the evolution horizon are enforced at load time with the violated inequality
quoted verbatim, so a run never discovers a vacuous hypothesis halfway
through.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .model import BaseDynamics, HullFunction, Kernel, OperatorModel
from .sampling import kronecker_alphas

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ModelConfig:
    dimension: int = 1
    kernel: str = "laplacian"
    kernel_rate: float = 1.0
    kernel_radius: int = 3
    hull: str = "cosine"
    hull_dim: int = 1
    hull_coeffs: list | None = None
    hull_values: list | None = None
    coupling: float = 1.0
    base: str = "shift"
    frequencies: list | None = None


@dataclass
class VolumeConfig:
    halfwidth: int = 32
    ambient_halfwidths: list | None = None  # theorem-check box sweep


@dataclass
class ResonanceConfig:
    eps: float | None = None
    delta: float | None = None
    grid_step: float = 1e-3
    family_scale: int | None = None  # four-interval family at this length
    boxes: list | None = None  # explicit [lo, hi] member volumes
    complexify: float = 0.0


@dataclass
class EvolveConfig:
    horizon: float = 10.0
    n_times: int = 24
    t_min: float | None = None
    moment_orders: list = field(default_factory=lambda: [2.0])
    theta: list = field(default_factory=lambda: [0.0])
    rho: float | None = None  # envelope exponent for moment-scan comparison
    phase_sup_samples: int = 1  # >1: report sup over a phase sample, with doubling delta


@dataclass
class LdtConfig:
    energy: float = 0.0
    scales: list = field(default_factory=lambda: [25, 50, 100, 200, 400])
    zeta: float = 0.05
    n_phases: int = 512
    det_tol: float = 1e-9


@dataclass
class UniformityConfig:
    n_phases: int = 64
    gap_time: float | None = None  # time for the typical/atypical pairing check


@dataclass
class OutputConfig:
    write_plots: bool = True


@dataclass
class RunConfig:
    model: ModelConfig
    volume: VolumeConfig
    resonance: ResonanceConfig
    evolve: EvolveConfig
    ldt: LdtConfig
    uniformity: UniformityConfig
    output: OutputConfig
    seed: int = 0

    def member_count(self) -> int | None:
        """Number M of member volumes in the resonance family."""
        if self.resonance.family_scale is not None:
            return 4
        if self.resonance.boxes:
            return len(self.resonance.boxes)
        return None


_SECTIONS = {
    "model": ModelConfig,
    "volume": VolumeConfig,
    "resonance": ResonanceConfig,
    "evolve": EvolveConfig,
    "ldt": LdtConfig,
    "uniformity": UniformityConfig,
    "output": OutputConfig,
}


def _section(cls, data, name: str):
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {', '.join(unknown)}")
    return cls(**data)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    top_known = set(_SECTIONS) | {"seed"}
    unknown = sorted(set(raw) - top_known)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    parts = {name: _section(cls, raw.get(name, {}), name) for name, cls in _SECTIONS.items()}
    cfg = RunConfig(seed=int(raw.get("seed", 0)), **parts)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig, for_theorem_check: bool = False) -> None:
    """Cross-field checks. The time-horizon cap only binds transport-bound
    runs; setting for_theorem_check enforces it on top of the load-time gate.
    """
    mc, rc, ec = cfg.model, cfg.resonance, cfg.evolve
    if mc.dimension < 1:
        raise ConfigError("model.dimension must be >= 1")
    if mc.hull_dim < 1:
        raise ConfigError("model.hull_dim must be >= 1")
    if not math.isfinite(mc.coupling):
        raise ConfigError("model.coupling must be finite")
    if mc.kernel not in ("laplacian", "exp_decay", "none"):
        raise ConfigError(f"unknown model.kernel {mc.kernel!r}")
    if mc.hull not in ("cosine", "trig_poly", "table"):
        raise ConfigError(f"unknown model.hull {mc.hull!r}")
    if mc.base not in ("shift", "skew_shift"):
        raise ConfigError(f"unknown model.base {mc.base!r}")
    if mc.base == "skew_shift" and mc.dimension != 1:
        raise ConfigError("skew_shift base is one-dimensional")
    if mc.frequencies is not None:
        freqs = np.asarray(mc.frequencies, dtype=np.float64)
        if freqs.shape != (mc.dimension, mc.hull_dim):
            raise ConfigError(
                "model.frequencies must be a dimension x hull_dim table of floats"
            )
        if np.any(freqs <= 0.0) or np.any(freqs >= 1.0):
            raise ConfigError("model.frequencies must lie strictly inside (0, 1)")
    if cfg.volume.halfwidth < 1:
        raise ConfigError("volume.halfwidth must be >= 1")
    if cfg.volume.ambient_halfwidths is not None:
        hw = list(cfg.volume.ambient_halfwidths)
        if len(hw) < 1 or any(int(h) < 1 for h in hw) or sorted(hw) != hw:
            raise ConfigError("volume.ambient_halfwidths must be increasing and >= 1")
    if rc.grid_step <= 0:
        raise ConfigError("resonance.grid_step must be positive")
    if rc.family_scale is not None and rc.boxes:
        raise ConfigError("give resonance.family_scale or resonance.boxes, not both")
    if rc.family_scale is not None and rc.family_scale < 2:
        raise ConfigError("resonance.family_scale must be >= 2")
    if ec.n_times < 2:
        raise ConfigError("evolve.n_times must be >= 2")
    if ec.horizon <= 0:
        raise ConfigError("evolve.horizon must be positive")
    if ec.t_min is not None and not (0 < ec.t_min < ec.horizon):
        raise ConfigError("evolve.t_min must lie in (0, horizon)")
    if any(p < 0 for p in ec.moment_orders):
        raise ConfigError("evolve.moment_orders must be nonnegative")
    if ec.rho is not None and ec.rho <= 0:
        raise ConfigError("evolve.rho must be positive")
    if ec.phase_sup_samples < 1:
        raise ConfigError("evolve.phase_sup_samples must be >= 1")
    if cfg.uniformity.gap_time is not None and cfg.uniformity.gap_time <= 0:
        raise ConfigError("uniformity.gap_time must be positive")
    if cfg.ldt.zeta < 0:
        raise ConfigError("ldt.zeta must be >= 0")
    if cfg.ldt.n_phases < 2 or cfg.uniformity.n_phases < 2:
        raise ConfigError("phase sample counts must be >= 2")

    # tolerance compatibility: these two are the load-time gate that keeps a
    # transport-bound run honest, so they fail loudly with the inequality shown
    if (rc.eps is None) != (rc.delta is None):
        raise ConfigError("resonance.eps and resonance.delta must be set together")
    if rc.eps is not None:
        M = cfg.member_count()
        if M is None:
            raise ConfigError(
                "resonance.eps/delta need a member family "
                "(resonance.family_scale or resonance.boxes)"
            )
        nu = mc.dimension
        if not (0.0 < rc.delta <= 1.0):
            raise ConfigError("resonance.delta must lie in (0, 1]")
        cap = rc.delta ** (8 * (nu + 1) * M)
        if not (0.0 < rc.eps <= cap):
            raise ConfigError(
                f"tolerances violate 0 < eps <= delta**(8*(nu+1)*M) <= 1: "
                f"eps = {rc.eps!r}, delta**{8 * (nu + 1) * M} = {cap!r}"
            )
        t_cap = abs(math.log(rc.eps)) / (40.0 * M * rc.delta)
        if for_theorem_check and ec.horizon > t_cap * (1.0 + 1e-12):
            raise ConfigError(
                f"evolve.horizon violates horizon <= |log eps| / (40*M*delta): "
                f"horizon = {ec.horizon!r}, cap = {t_cap!r}"
            )


# ── construction ─────────────────────────────────────────────────────────────


def default_frequencies(nu: int, k: int) -> np.ndarray:
    """Deterministic irrational frequency matrix: golden mean when 1x1, the
    harmonious low-discrepancy vector otherwise."""
    if nu == 1 and k == 1:
        return np.array([[_GOLDEN]])
    return kronecker_alphas(nu * k).reshape(nu, k)


def build_model(mc: ModelConfig) -> OperatorModel:
    nu, k = mc.dimension, mc.hull_dim
    if mc.kernel == "laplacian":
        kernel = Kernel.laplacian(nu)
    elif mc.kernel == "none":
        kernel = Kernel.zero(nu)
    else:
        kernel = Kernel.exp_decay(nu, rate=float(mc.kernel_rate), radius=int(mc.kernel_radius))
    if mc.hull == "cosine":
        hull = HullFunction.cosine(k)
    elif mc.hull == "trig_poly":
        if not mc.hull_coeffs:
            raise ConfigError("model.hull_coeffs required for trig_poly hull")
        hull = HullFunction.trig_poly(np.asarray(mc.hull_coeffs, dtype=np.float64), k)
    else:
        if not mc.hull_values:
            raise ConfigError("model.hull_values required for table hull")
        hull = HullFunction.from_table(np.asarray(mc.hull_values, dtype=np.float64), k)
    if mc.frequencies is not None:
        freqs = np.asarray(mc.frequencies, dtype=np.float64)
    else:
        freqs = default_frequencies(nu, k)
    base = BaseDynamics(kind=mc.base, nu=nu, k=k, frequencies=freqs)
    return OperatorModel(kernel=kernel, hull=hull, base=base, coupling=float(mc.coupling))


def time_grid(horizon: float, n_times: int, t_min: float | None = None) -> np.ndarray:
    """Geometric time grid ending exactly at the horizon."""
    if horizon <= 0 or n_times < 2:
        raise ConfigError("horizon must be positive and n_times >= 2")
    lo = horizon * 1e-3 if t_min is None else float(t_min)
    if not (0 < lo < horizon):
        raise ConfigError("t_min must lie in (0, horizon)")
    return np.geomspace(lo, horizon, int(n_times))

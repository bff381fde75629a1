"""Lattice operator models: hopping kernels, hull functions, torus dynamics,
finite volumes, assembly, and frequency arithmetic.

The operator acts on ell^2(Z^nu) as

    (H phi)(w) = sum_v A(w - v) phi(v) + V(w) phi(w),      V(w) = g * F(T^w theta),

with a symmetric finitely supported kernel A, a hull function F on the torus T^k,
and a base dynamics T (commuting shifts, or the skew shift on T^k for nu = 1).
Everything downstream restricts H to finite boxes.

Torus points are carried as 64-bit fixed-point fractions (uint64 / 2^64): every
dynamics map is then an exact linear map on Z/2^64, so iterating, composing and
translating phases commute bitwise (T^{w+w'} = T^w o T^{w'} exactly). Hull
functions are evaluated at the float64 image of the fixed-point phase. The
quantization (5.4e-20) is far below every tolerance used in this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError, UnsupportedModelError

_TWO64 = 2.0**64
_MASK = (1 << 64) - 1

# ── fixed-point torus coordinates ────────────────────────────────────────────


def to_fixed(theta: Sequence[float] | np.ndarray) -> np.ndarray:
    """Float torus point(s) in [0,1) -> uint64 fixed-point, last axis = coordinate."""
    arr = np.mod(np.asarray(theta, dtype=np.float64), 1.0)
    return np.round(arr * _TWO64).astype(np.uint64)


def to_float(fixed: np.ndarray) -> np.ndarray:
    """uint64 fixed-point -> float64 in [0,1] (top of range rounds to 1.0)."""
    return np.asarray(fixed, dtype=np.uint64).astype(np.float64) * (1.0 / _TWO64)


def torus_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max-metric distance on T^k; takes float points or uint64 fixed-point."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.dtype == np.uint64 or b.dtype == np.uint64:
        # wrap-exact subtraction; min(diff, -diff) is the circular gap in fixed units
        diff = a.astype(np.uint64) - b.astype(np.uint64)
        d = to_float(np.minimum(diff, np.uint64(0) - diff))
        return float(np.max(d)) if d.size else 0.0
    d = np.abs(np.mod(a.astype(np.float64) - b.astype(np.float64), 1.0))
    return float(np.max(np.minimum(d, 1.0 - d))) if d.size else 0.0


# ── hopping kernels ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Kernel:
    """Symmetric finitely supported hopping kernel A on Z^nu.

    offsets/weights list every site with a nonzero weight; construction enforces
    A(w) = A(-w) with bitwise-equal weights, so assembled matrices are exactly
    symmetric. decay_rate is the rate used in the summability report
    sum |A(w)| e^{rate * ||w||} (always finite here; kept for bookkeeping).
    """

    nu: int
    offsets: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...]
    decay_rate: float = 1.0

    def __post_init__(self):
        if self.nu < 1:
            raise ValueError("nu >= 1 required")
        table = {}
        for off, a in zip(self.offsets, self.weights):
            if len(off) != self.nu:
                raise ValueError(f"offset {off} has wrong dimension")
            if not math.isfinite(a):
                raise ValueError("kernel weights must be finite")
            if off in table and table[off] != a:
                raise ValueError(f"conflicting weights for offset {off}")
            table[off] = float(a)
        for off, a in list(table.items()):
            neg = tuple(-c for c in off)
            if neg not in table:
                raise ValueError(f"kernel not symmetric: missing mirror of {off}")
            if table[neg] != a:
                raise ValueError(f"kernel not symmetric at {off}")
        ordered = tuple(sorted(table))
        object.__setattr__(self, "offsets", ordered)
        object.__setattr__(self, "weights", tuple(table[o] for o in ordered))

    @classmethod
    def from_pairs(cls, nu: int, pairs, decay_rate: float = 1.0) -> "Kernel":
        """Build from (offset, weight) pairs; the mirror of each offset is filled in."""
        table = {}
        for off, a in pairs:
            off = tuple(int(c) for c in (off if isinstance(off, (tuple, list)) else (off,)))
            table[off] = float(a)
            table.setdefault(tuple(-c for c in off), float(a))
        items = sorted(table.items())
        return cls(nu, tuple(o for o, _ in items), tuple(a for _, a in items), decay_rate)

    @classmethod
    def zero(cls, nu: int = 1) -> "Kernel":
        """Empty kernel: H is the multiplication operator by the potential."""
        return cls(nu, (), ())

    @classmethod
    def laplacian(cls, nu: int = 1) -> "Kernel":
        """Nearest-neighbor kernel: weight 1 at +-e_i."""
        pairs = []
        for i in range(nu):
            e = tuple(1 if j == i else 0 for j in range(nu))
            pairs.append((e, 1.0))
        return cls.from_pairs(nu, pairs)

    @classmethod
    def exp_decay(cls, nu: int, rate: float, radius: int) -> "Kernel":
        """A(w) = e^{-rate ||w||} for 0 < ||w|| <= radius (max norm)."""
        if rate <= 0 or radius < 1:
            raise ValueError("rate > 0 and radius >= 1 required")
        pairs = []
        grids = np.meshgrid(*([np.arange(-radius, radius + 1)] * nu), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        for w in pts:
            n = int(np.max(np.abs(w)))
            if 0 < n <= radius:
                pairs.append((tuple(int(c) for c in w), math.exp(-rate * n)))
        return cls.from_pairs(nu, pairs, decay_rate=rate)

    def weight(self, offset: tuple[int, ...]) -> float:
        try:
            i = self.offsets.index(tuple(offset))
        except ValueError:
            return 0.0
        return self.weights[i]

    @property
    def cutoff_radius(self) -> int:
        return max((max(abs(c) for c in o) for o in self.offsets), default=0)

    def l1(self) -> float:
        return float(sum(abs(a) for a in self.weights))

    def sup(self) -> float:
        return float(max((abs(a) for a in self.weights), default=0.0))

    def exp_weighted_sum(self, rate: float | None = None) -> float:
        r = self.decay_rate if rate is None else rate
        return float(
            sum(abs(a) * math.exp(r * max(abs(c) for c in o)) for o, a in zip(self.offsets, self.weights))
        )

    def velocity_bound(self) -> float:
        """Light-cone group velocity bound 2 sum |A(w)| max(||w||, 1)."""
        return 2.0 * float(
            sum(abs(a) * max(max(abs(c) for c in o), 1) for o, a in zip(self.offsets, self.weights))
        )

    @property
    def is_unit_nn_1d(self) -> bool:
        """Exactly the 1-D discrete Schrodinger hopping: weight 1 at +-1."""
        return self.nu == 1 and self.offsets == ((-1,), (1,)) and self.weights == (1.0, 1.0)

    @property
    def is_tridiagonal_1d(self) -> bool:
        return self.nu == 1 and all(abs(o[0]) <= 1 for o in self.offsets)


# ── hull functions on the torus ──────────────────────────────────────────────


@dataclass
class HullFunction:
    """Sampling function F: T^k -> R with recorded regularity bounds.

    fn is vectorized: it maps an (n, k) array of torus points to (n,) values.
    sup_abs is a rigorous upper bound for presets and tables; for user callables
    it is a grid estimate inflated by 5 percent and flagged (sup_estimated).
    """

    k: int
    fn: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    sup_abs: float
    descriptor: str = "callable"
    sup_estimated: bool = False
    is_constant: bool = False

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = np.asarray(self.fn(pts), dtype=np.float64)
        if out.shape != (pts.shape[0],):
            raise ValueError("hull evaluator must map (n, k) -> (n,)")
        return out

    @classmethod
    def cosine(cls, k: int = 1) -> "HullFunction":
        """F(x) = 2 cos(2 pi x_last); the canonical even sampling function."""
        return cls(
            k=k,
            fn=lambda x: 2.0 * np.cos(2.0 * np.pi * x[:, -1]),
            lipschitz=4.0 * math.pi,
            sup_abs=2.0,
            descriptor="cos",
        )

    @classmethod
    def trig_poly(cls, coeffs: Sequence[float], k: int = 1) -> "HullFunction":
        """F(x) = sum_m c_m cos(2 pi m x_last), m = 0..len(coeffs)-1."""
        c = np.asarray(coeffs, dtype=np.float64)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficient list must be a nonempty 1-D sequence")

        def f(x, c=c):
            m = np.arange(c.size)
            return np.cos(2.0 * np.pi * x[:, -1:] * m[None, :]) @ c

        lip = float(2.0 * math.pi * np.sum(np.abs(c) * np.arange(c.size)))
        return cls(
            k=k,
            fn=f,
            lipschitz=lip,
            sup_abs=float(np.sum(np.abs(c))),
            descriptor="trig_poly",
            is_constant=bool(np.all(c[1:] == 0.0)),
        )

    @classmethod
    def from_table(cls, values: Sequence[float], k: int = 1) -> "HullFunction":
        """Periodic linear interpolation of samples on the uniform grid j/len."""
        v = np.asarray(values, dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("table needs at least two values")
        m = v.size
        vv = np.concatenate([v, v[:1]])

        def f(x, vv=vv, m=m):
            s = np.mod(x[:, -1], 1.0) * m
            i = np.minimum(s.astype(np.int64), m - 1)
            frac = s - i
            return vv[i] * (1.0 - frac) + vv[i + 1] * frac

        lip = float(np.max(np.abs(np.diff(vv))) * m)
        return cls(
            k=k,
            fn=f,
            lipschitz=lip,
            sup_abs=float(np.max(np.abs(v))),
            descriptor="table",
            is_constant=bool(np.all(v == v[0])),
        )

    @classmethod
    def from_callable(
        cls,
        fn: Callable[[np.ndarray], np.ndarray],
        k: int,
        lipschitz: float | None = None,
        sup_abs: float | None = None,
        probe: int = 8192,
    ) -> "HullFunction":
        """Wrap a user evaluator; missing bounds are probed on a low-discrepancy grid."""
        from .sampling import kronecker_sequence

        pts = kronecker_sequence(probe, k, seed=7)
        vals = np.asarray(fn(pts), dtype=np.float64)
        estimated = False
        if sup_abs is None:
            sup_abs = float(np.max(np.abs(vals))) * 1.05 + 1e-12
            estimated = True
        if lipschitz is None:
            d = pts[1:] - pts[:-1]
            d = np.abs(d - np.round(d))
            dist = np.max(d, axis=1)
            dv = np.abs(np.diff(vals))
            ok = dist > 1e-12
            lipschitz = float(np.max(dv[ok] / dist[ok])) * 1.05 + 1e-12 if np.any(ok) else 0.0
        return cls(
            k=k,
            fn=fn,
            lipschitz=float(lipschitz),
            sup_abs=float(sup_abs),
            descriptor="callable",
            sup_estimated=estimated,
            is_constant=bool(np.max(vals) - np.min(vals) < 1e-14),
        )

    def validate_lipschitz(self, n: int = 512, seed: int = 3) -> bool:
        """Check |F(x)-F(y)| <= L dist(x,y) + 1e-9 on sampled pairs."""
        from .sampling import kronecker_sequence

        xs = kronecker_sequence(n, self.k, seed=seed)
        ys = kronecker_sequence(n, self.k, seed=seed + 1)
        fx, fy = self(xs), self(ys)
        d = np.abs(xs - ys)
        d = np.max(np.minimum(d, 1.0 - d), axis=1)
        return bool(np.all(np.abs(fx - fy) <= self.lipschitz * d + 1e-9))


# ── base dynamics on the torus ───────────────────────────────────────────────


@dataclass
class BaseDynamics:
    """Torus dynamics indexed by lattice translations.

    kind 'shift': T^w theta = theta + w_1 a_1 + ... + w_nu a_nu with frequency
    rows a_i in T^k (distortion exponent 0). kind 'skew_shift' (nu = 1 only):
    T(t_1..t_k) = (t_1 + alpha, t_2 + t_1, ..., t_k + t_{k-1}), distortion
    exponent k - 1. kind 'explicit': the potential is supplied directly as a
    function of the site and no torus structure is used.
    """

    kind: str
    nu: int
    k: int
    frequencies: np.ndarray | None = None
    explicit_potential: Callable[[np.ndarray], np.ndarray] | None = None
    _freq_fixed: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.kind not in ("shift", "skew_shift", "explicit"):
            raise ValueError(f"unknown dynamics kind {self.kind!r}")
        if self.kind == "shift":
            f = np.atleast_2d(np.asarray(self.frequencies, dtype=np.float64))
            if f.shape != (self.nu, self.k):
                raise ValueError(f"frequency matrix must be (nu, k) = ({self.nu}, {self.k})")
            self.frequencies = f
            self._freq_fixed = to_fixed(f)
        elif self.kind == "skew_shift":
            if self.nu != 1:
                raise ValueError("skew shift is defined for nu = 1")
            f = np.asarray(self.frequencies, dtype=np.float64).reshape(1, 1)
            self.frequencies = f
            self._freq_fixed = to_fixed(f)
        else:
            if self.explicit_potential is None:
                raise ValueError("explicit dynamics needs a potential callable")

    @property
    def chi(self) -> int:
        """Distortion exponent: dist(T^w x, T^w y) <= (|w|+1)^chi dist(x, y)."""
        return self.k - 1 if self.kind == "skew_shift" else 0

    @property
    def alpha(self) -> float:
        if self.kind != "skew_shift":
            raise UnsupportedModelError("alpha is the skew-shift frequency")
        return float(self.frequencies[0, 0])

    # one forward / backward skew step on a (..., k) uint64 array, exact on Z/2^64
    def _skew_step(self, th: np.ndarray) -> np.ndarray:
        out = th.copy()
        out[..., 0] = th[..., 0] + self._freq_fixed[0, 0]
        if self.k > 1:
            out[..., 1:] = th[..., 1:] + th[..., :-1]
        return out

    def _skew_unstep(self, th: np.ndarray) -> np.ndarray:
        out = th.copy()
        out[..., 0] = th[..., 0] - self._freq_fixed[0, 0]
        for j in range(1, self.k):
            out[..., j] = th[..., j] - out[..., j - 1]
        return out

    def phase(self, theta_fixed: np.ndarray, w) -> np.ndarray:
        """T^w theta in fixed point; w is a length-nu integer tuple (or int for nu=1)."""
        w = (int(w),) if np.isscalar(w) else tuple(int(c) for c in w)
        if self.kind == "shift":
            acc = theta_fixed.astype(np.uint64).copy()
            for i in range(self.nu):
                wi = np.uint64(w[i] & _MASK)
                acc = acc + wi * self._freq_fixed[i]
            return acc
        if self.kind == "skew_shift":
            th = theta_fixed.astype(np.uint64).copy()
            n = w[0]
            step = self._skew_step if n >= 0 else self._skew_unstep
            for _ in range(abs(n)):
                th = step(th)
            return th
        raise UnsupportedModelError("explicit dynamics has no torus phase")

    def phases_for_sites(self, theta_fixed: np.ndarray, sites: np.ndarray) -> np.ndarray:
        """Fixed-point phases T^w theta for every row w of `sites`, shape (n, k)."""
        sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        n = sites.shape[0]
        if self.kind == "shift":
            out = np.broadcast_to(theta_fixed.astype(np.uint64), (n, self.k)).copy()
            w64 = sites.astype(np.uint64)
            for i in range(self.nu):
                out = out + w64[:, i : i + 1] * self._freq_fixed[i][None, :]
            return out
        if self.kind == "skew_shift":
            w = sites[:, 0]
            lo, hi = int(w.min()), int(w.max())
            lo, hi = min(lo, 0), max(hi, 0)
            table = np.empty((hi - lo + 1, self.k), dtype=np.uint64)
            th = theta_fixed.astype(np.uint64).copy()
            table[-lo] = th
            cur = th
            for j in range(1, hi + 1):
                cur = self._skew_step(cur)
                table[j - lo] = cur
            cur = th
            for j in range(1, -lo + 1):
                cur = self._skew_unstep(cur)
                table[-lo - j] = cur
            return table[w - lo]
        raise UnsupportedModelError("explicit dynamics has no torus phase")


# ── finite volumes ───────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Volume:
    """Box product_i [lo_i, hi_i] subset Z^nu containing the origin.

    Sites are enumerated lexicographically (first coordinate slowest), which
    fixes matrix indexing and keeps every downstream reduction deterministic.
    """

    bounds: tuple[tuple[int, int], ...]

    def __post_init__(self):
        bnds = tuple((int(lo), int(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bnds)
        for lo, hi in bnds:
            if not (lo <= 0 <= hi):
                raise ValueError(f"box side [{lo}, {hi}] must contain 0")

    @classmethod
    def box(cls, halfwidth: int, nu: int = 1) -> "Volume":
        return cls(tuple((-halfwidth, halfwidth) for _ in range(nu)))

    @classmethod
    def interval(cls, lo: int, hi: int) -> "Volume":
        return cls(((lo, hi),))

    @property
    def nu(self) -> int:
        return len(self.bounds)

    @property
    def size(self) -> int:
        n = 1
        for lo, hi in self.bounds:
            n *= hi - lo + 1
        return n

    def sites(self) -> np.ndarray:
        """(size, nu) int64 array of sites in lexicographic order."""
        axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in self.bounds]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def contains(self, sites: np.ndarray) -> np.ndarray:
        s = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        ok = np.ones(s.shape[0], dtype=bool)
        for i, (lo, hi) in enumerate(self.bounds):
            ok &= (s[:, i] >= lo) & (s[:, i] <= hi)
        return ok

    def index_of(self, sites: np.ndarray) -> np.ndarray:
        """Lexicographic index of each row; caller guarantees containment."""
        s = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        idx = np.zeros(s.shape[0], dtype=np.int64)
        stride = 1
        for i in range(self.nu - 1, -1, -1):
            lo, hi = self.bounds[i]
            idx += (s[:, i] - lo) * stride
            stride *= hi - lo + 1
        return idx

    @property
    def origin_index(self) -> int:
        return int(self.index_of(np.zeros((1, self.nu), dtype=np.int64))[0])

    def norms(self) -> np.ndarray:
        """Max norm ||w|| of every site, in site order."""
        return np.max(np.abs(self.sites()), axis=1)


def four_interval_family(N: int) -> list[Volume]:
    """The four nested intervals [-L,R], [-L+1,R], [-L,R-1], [-L+1,R-1].

    L = floor(N/2), R = L + N. Their union is the first interval. This is the
    finite family fed to the resonance scan in the 1-D bound check.
    """
    if N < 2:
        raise ValueError("family scale N >= 2 required")
    L = N // 2
    R = L + N
    return [
        Volume.interval(-L, R),
        Volume.interval(-L + 1, R),
        Volume.interval(-L, R - 1),
        Volume.interval(-L + 1, R - 1),
    ]


# ── the model and assembly ───────────────────────────────────────────────────


@dataclass
class OperatorModel:
    """Kernel + hull + base dynamics + coupling g: the full operator family H_theta."""

    kernel: Kernel
    hull: HullFunction | None
    base: BaseDynamics
    coupling: float = 1.0

    def __post_init__(self):
        if self.kernel.nu != self.base.nu:
            raise ValueError("kernel and dynamics disagree on nu")
        if self.base.kind != "explicit":
            if self.hull is None:
                raise ValueError("torus dynamics needs a hull function")
            if self.hull.k != self.base.k:
                raise ValueError("hull and dynamics disagree on k")

    @property
    def nu(self) -> int:
        return self.kernel.nu

    def potential(self, theta, sites: np.ndarray) -> np.ndarray:
        """V(w) = g F(T^w theta) for every row w of `sites` (g * user table if explicit)."""
        sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        if self.base.kind == "explicit":
            vals = np.asarray(self.base.explicit_potential(sites), dtype=np.float64)
            return self.coupling * vals
        th = as_fixed_phase(theta, self.base.k)
        ph = self.base.phases_for_sites(th, sites)
        return self.coupling * self.hull(to_float(ph))

    def potential_sup(self) -> float:
        """Upper bound for sup |V| (rigorous unless the hull sup was estimated)."""
        if self.base.kind == "explicit":
            raise UnsupportedModelError("no a-priori sup for explicit potentials")
        return abs(self.coupling) * self.hull.sup_abs

    def norm_bound(self) -> float:
        """Row-sum bound: ||H|| <= sum |A| + sup |V|."""
        return self.kernel.l1() + self.potential_sup()

    def energy_window(self) -> tuple[float, float]:
        b = self.norm_bound() + 1.0
        return (-b, b)

    def velocity_bound(self) -> float:
        return self.kernel.velocity_bound()


def as_fixed_phase(theta, k: int) -> np.ndarray:
    """Accept a float sequence or an already-fixed uint64 array; return uint64 (k,)."""
    if theta is None:
        theta = np.zeros(k)
    arr = np.asarray(theta)
    if arr.dtype == np.uint64:
        fixed = arr.reshape(-1)
    else:
        fixed = to_fixed(np.asarray(arr, dtype=np.float64).reshape(-1))
    if fixed.shape != (k,):
        raise ValueError(f"phase must have k = {k} coordinates")
    return fixed


def assemble_operator(model: OperatorModel, volume: Volume, theta=None) -> np.ndarray:
    """Dense symmetric matrix of H_theta restricted to `volume`.

    Entry (v, w) = A(v - w) + delta_vw V(v). Kernel weights are stored once and
    mirrored by construction, so the assembled matrix is exactly symmetric; a
    row-sum (Gershgorin) bound against sum|A| + sup|V| is asserted on every call.
    """
    if volume.nu != model.nu:
        raise ValueError("volume dimension does not match the model")
    sites = volume.sites()
    n = sites.shape[0]
    H = np.zeros((n, n), dtype=np.float64)
    rows = np.arange(n, dtype=np.int64)
    for off, a in zip(model.kernel.offsets, model.kernel.weights):
        tgt = sites + np.asarray(off, dtype=np.int64)[None, :]
        inside = volume.contains(tgt)
        if np.any(inside):
            H[rows[inside], volume.index_of(tgt[inside])] = a
    V = model.potential(theta, sites)
    H[rows, rows] += V
    if not np.array_equal(H, H.T):
        raise NumericalError("assembled matrix lost exact symmetry")
    row_sum = float(np.max(np.sum(np.abs(H), axis=1)))
    bound = model.kernel.l1() + float(np.max(np.abs(V)))
    if model.base.kind != "explicit" and not model.hull.sup_estimated:
        sup_v = model.potential_sup()
        if float(np.max(np.abs(V))) > sup_v + 1e-9:
            raise NumericalError("potential exceeded the declared hull sup bound")
        bound = model.kernel.l1() + sup_v
    if row_sum > bound + 1e-9:
        raise NumericalError("Gershgorin row-sum bound violated in assembly")
    return H


def assemble_tridiagonal(model: OperatorModel, volume: Volume, theta=None):
    """(diagonal, offdiagonal) of H_theta on a 1-D interval, for tridiagonal models.

    Fast path used by the scan pipelines on large boxes; requires nu = 1 and a
    kernel supported on {-1, 0, 1}.
    """
    if model.nu != 1 or volume.nu != 1 or not model.kernel.is_tridiagonal_1d:
        raise UnsupportedModelError("tridiagonal assembly needs nu = 1 and range-1 hopping")
    sites = volume.sites()
    d = model.potential(theta, sites) + model.kernel.weight((0,))
    e = np.full(volume.size - 1, model.kernel.weight((1,)))
    return d, e


# ── diophantine arithmetic ───────────────────────────────────────────────────


@dataclass(frozen=True)
class DiophantineParams:
    """Lower-bound profile for dist(T^w(0), 0) as a function of ||w||.

    kind 'dc':  coeff * ||w||^-kappa
    kind 'wdc': coeff * exp(-zeta ||w||^kappa)
    kind 'sdc': coeff * ||w||^-1 * log^-kappa(||w|| + e)
    """

    kind: str
    kappa: float
    coeff: float
    zeta: float | None = None

    def __post_init__(self):
        if self.kind not in ("dc", "wdc", "sdc"):
            raise ValueError(f"unknown diophantine kind {self.kind!r}")
        if self.coeff <= 0:
            raise ValueError("coefficient must be positive")
        if self.kind == "wdc" and (self.zeta is None or self.zeta <= 0):
            raise ValueError("wdc needs zeta > 0")

    @classmethod
    def dc(cls, kappa: float, tau: float) -> "DiophantineParams":
        return cls("dc", kappa, tau)

    @classmethod
    def wdc(cls, kappa: float, zeta: float, c: float = 1.0) -> "DiophantineParams":
        return cls("wdc", kappa, c, zeta=zeta)

    @classmethod
    def sdc(cls, kappa: float, c: float = 1.0) -> "DiophantineParams":
        return cls("sdc", kappa, c)

    @classmethod
    def one_frequency(cls, nu: int, tau: float = 0.1, kappa: float | None = None) -> "DiophantineParams":
        """Polynomial condition with kappa >= nu, the regime of the 1-frequency models."""
        kap = float(nu) if kappa is None else float(kappa)
        if kap < nu:
            raise ValueError(f"kappa >= nu = {nu} required for this preset")
        return cls.dc(kap, tau)

    def bound(self, norms: np.ndarray) -> np.ndarray:
        n = np.asarray(norms, dtype=np.float64)
        if self.kind == "dc":
            return self.coeff * n**-self.kappa
        if self.kind == "wdc":
            return self.coeff * np.exp(-self.zeta * n**self.kappa)
        return self.coeff / (n * np.log(n + math.e) ** self.kappa)


@dataclass(frozen=True)
class DiophantineReport:
    satisfied: bool
    margin: float
    worst_w: tuple[int, ...]
    worst_distance: float
    search_bound: int


def check_diophantine(frequencies, params: DiophantineParams, search_bound: int) -> DiophantineReport:
    """Exhaustively test dist(sum_i w_i a_i, Z^k) >= bound(||w||) for 0 < ||w|| <= search_bound.

    Distances are computed through the fixed-point representation (exact up to
    2^-64 quantization). Only one of each +-w pair is enumerated (the distance
    is symmetric). Returns the worst margin dist/bound and its witness w.
    """
    f = np.atleast_2d(np.asarray(frequencies, dtype=np.float64))
    nu, k = f.shape
    ffix = to_fixed(f)
    if search_bound < 1:
        raise ValueError("search_bound >= 1 required")
    if nu == 1:
        W = np.arange(1, search_bound + 1, dtype=np.int64)[:, None]
    else:
        axes = [np.arange(-search_bound, search_bound + 1, dtype=np.int64) for _ in range(nu)]
        grids = np.meshgrid(*axes, indexing="ij")
        W = np.stack([g.ravel() for g in grids], axis=1)
        nz = np.any(W != 0, axis=1)
        first = np.argmax(W != 0, axis=1)
        lead = W[np.arange(len(W)), first]
        W = W[nz & (lead > 0)]
    acc = np.zeros((W.shape[0], k), dtype=np.uint64)
    w64 = W.astype(np.uint64)
    for i in range(nu):
        acc = acc + w64[:, i : i + 1] * ffix[i][None, :]
    frac = to_float(acc)
    dist = np.max(np.minimum(frac, 1.0 - frac), axis=1)
    norms = np.max(np.abs(W), axis=1).astype(np.float64)
    margins = dist / params.bound(norms)
    # deterministic argmin: smallest margin, ties to the lexicographically first w
    order = np.lexsort(tuple(W[:, i] for i in range(nu - 1, -1, -1)) + (margins,))
    j = order[0]
    return DiophantineReport(
        satisfied=bool(margins[j] >= 1.0),
        margin=float(margins[j]),
        worst_w=tuple(int(c) for c in W[j]),
        worst_distance=float(dist[j]),
        search_bound=search_bound,
    )


def continued_fraction_denominators(alpha: float, count: int) -> tuple[list[int], bool]:
    """Strictly increasing convergent denominators of alpha, from exact float arithmetic.

    Works on the exact rational value of the float. Returns (denominators,
    exhausted): exhausted is True when the expansion ran out (rational input)
    or when denominators crossed 2^26, past which the float no longer pins
    down the continued fraction of the underlying real number.
    """
    if count < 1:
        raise ValueError("count >= 1 required")
    x = Fraction(float(alpha)) % 1
    qs = [1]
    exhausted = False
    q_prev, q_cur = 0, 1
    while len(qs) < count:
        if x == 0:
            exhausted = True
            break
        x = 1 / x
        a = int(x)
        x = x - a
        q_prev, q_cur = q_cur, a * q_cur + q_prev
        if q_cur > 1 << 26:
            exhausted = True
            break
        if q_cur > qs[-1]:
            qs.append(q_cur)
    return qs, exhausted

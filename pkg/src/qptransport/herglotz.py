"""Rational fractions with real poles: exact superlevel sets, Poisson averages,
and the off-axis min-max bound.

A fraction u(z) = sum_j a_j / (z - b_j) with real masses and poles and
sum|a_j| <= 1 is exactly the shape of a finite-volume resolvent entry
E -> G_E(0, v) (masses psi_j(0) psi_j(v), poles the eigenvalues). Superlevel
sets {|u| > lam} are finite unions of intervals whose endpoints are polynomial
roots, so their Lebesgue and Poisson measures are computed exactly (companion
matrix roots + sign tests), never by sampling. On top of that sit the two
quantitative facts the transport bound consumes: the Boole-type measure bound
mes{|u| > lam} <= 4 sum|a| / lam, and the bound on min_m max_v |u_{m,v}| at a
point z = x + iy off the axis given smallness on most of the axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .errors import NumericalError

_COLLISION_TOL = 1e-12

# ── interval algebra (finite unions of open intervals) ───────────────────────


def normalize_intervals(ivs) -> list[tuple[float, float]]:
    """Sort, drop empty, merge overlapping or touching intervals."""
    ivs = [(float(a), float(b)) for a, b in ivs if b > a]
    ivs.sort()
    out: list[tuple[float, float]] = []
    for a, b in ivs:
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return out


def union_intervals(*lists) -> list[tuple[float, float]]:
    merged = []
    for l in lists:
        merged.extend(l)
    return normalize_intervals(merged)


def intersect_intervals(xs, ys) -> list[tuple[float, float]]:
    """Intersection of two normalized interval lists (two-pointer sweep)."""
    out = []
    i = j = 0
    while i < len(xs) and j < len(ys):
        a = max(xs[i][0], ys[j][0])
        b = min(xs[i][1], ys[j][1])
        if b > a:
            out.append((a, b))
        if xs[i][1] < ys[j][1]:
            i += 1
        else:
            j += 1
    return out


def complement_intervals(ivs) -> list[tuple[float, float]]:
    """Complement of a normalized list within (-inf, inf)."""
    out = []
    prev = -math.inf
    for a, b in ivs:
        if a > prev:
            out.append((prev, a))
        prev = max(prev, b)
    if prev < math.inf:
        out.append((prev, math.inf))
    return out


def total_length(ivs) -> float:
    return float(sum(b - a for a, b in ivs))


def poisson_mass(ivs, z: complex) -> float:
    """Harmonic measure mu_z of an interval union, in closed form.

    mu_z([a,b]) = (arctan((b-x)/y) - arctan((a-x)/y)) / pi, y = |Im z| > 0.
    """
    x, y = float(np.real(z)), abs(float(np.imag(z)))
    if y <= 0:
        raise ValueError("z must be off the real axis")
    # atan2 maps +-inf endpoints to +-pi/2, so unbounded intervals need no case split
    s = 0.0
    for a, b in ivs:
        s += math.atan2(b - x, y) - math.atan2(a - x, y)
    return s / math.pi


# ── rational fractions ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class RationalFraction:
    """u(z) = sum_j masses[j] / (z - poles[j]), real data, sum|masses| <= 1."""

    masses: np.ndarray
    poles: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.masses, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.poles, dtype=np.float64))
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("masses and poles must be matching 1-D arrays")
        if a.size and not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("masses and poles must be finite")
        if a.size > 1 and not np.all(np.diff(b) > 0):
            raise ValueError("poles must be strictly increasing")
        if float(np.sum(np.abs(a))) > 1.0 + 1e-9:
            raise ValueError("total mass sum|a| must not exceed 1")
        object.__setattr__(self, "masses", a)
        object.__setattr__(self, "poles", b)

    @classmethod
    def zero(cls) -> "RationalFraction":
        return cls(np.zeros(0), np.zeros(0))

    @property
    def degree(self) -> int:
        return int(self.masses.size)

    def mass_l1(self) -> float:
        return float(np.sum(np.abs(self.masses)))

    def active(self) -> "RationalFraction":
        """Drop zero masses (their poles are spurious)."""
        keep = self.masses != 0.0
        if np.all(keep):
            return self
        return RationalFraction(self.masses[keep], self.poles[keep])

    def __call__(self, z):
        zs = np.asarray(z)
        if self.degree == 0:
            out = np.zeros(zs.shape, dtype=zs.dtype if np.iscomplexobj(zs) else np.float64)
            return out if zs.shape else out[()]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = self.masses / (zs[..., None] - self.poles)
            out = np.sum(terms, axis=-1)
        return out


def fraction_from_green(sd, site_index: int, merge_tol: float = 1e-12) -> RationalFraction:
    """The map E -> G_E(0, v) as a RationalFraction (poles = eigenvalues).

    Masses psi_j(0) psi_j(v); numerically coincident eigenvalues are merged so
    the pole list is strictly increasing. Total mass obeys sum|a| <= 1 by
    Cauchy-Schwarz; that is asserted, not assumed.
    """
    lam = sd.eigenvalues
    a = sd.origin_weights * sd.eigenvectors[site_index, :]
    poles, masses = [], []
    j = 0
    n = lam.size
    while j < n:
        k = j + 1
        while k < n and lam[k] - lam[k - 1] <= merge_tol:
            k += 1
        poles.append(float(np.mean(lam[j:k])))
        # G_z = sum psi psi^T / (lambda - z), so the z - pole form flips the sign
        masses.append(float(-np.sum(a[j:k])))
        j = k
    m = np.asarray(masses)
    if float(np.sum(np.abs(m))) > 1.0 + 1e-9:
        raise NumericalError("green fraction mass exceeded its Cauchy-Schwarz bound")
    return RationalFraction(m, np.asarray(poles))


# ── exact superlevel sets ────────────────────────────────────────────────────


@dataclass
class SuperlevelResult:
    value: float
    intervals: list[tuple[float, float]]
    boole_bound: float
    collisions: int


def superlevel_intervals(u: RationalFraction, lam: float, side: str = "abs") -> SuperlevelResult:
    """Exact superlevel set as a finite union of intervals.

    side "abs" gives {x : |u(x)| > lam}; side "above" gives {x : u(x) > lam},
    the set of the classical one-sided identity (positive masses: measure is
    exactly sum(a)/lam). Endpoints are the real roots of the degree-d
    polynomials P -+ lam Q (u = P/Q after clearing denominators), found as
    companion-matrix eigenvalues; membership between breakpoints is decided
    by a sign test at the midpoint. Near-coincident breakpoints (within
    1e-12) are merged and counted in `collisions`. The Boole-type bound
    value <= 4 sum|a| / lam is asserted on every call.
    """
    if lam <= 0:
        raise ValueError("level lam must be positive")
    if side not in ("abs", "above"):
        raise ValueError("side must be 'abs' or 'above'")
    ua = u.active()
    if ua.degree == 0:
        return SuperlevelResult(0.0, [], 0.0, 0)
    b = ua.poles
    a = ua.masses
    Q = np.poly(b)
    P = np.zeros(ua.degree)
    for j in range(ua.degree):
        others = np.delete(b, j)
        P = np.polyadd(P, a[j] * np.poly(others))
    breakpoints = list(b)
    signs = (1.0,) if side == "above" else (-1.0, 1.0)
    for sign in signs:
        coeffs = np.polysub(P, sign * lam * Q)
        roots = np.roots(coeffs)
        real = roots[np.abs(roots.imag) <= 1e-8 * (1.0 + np.abs(roots.real))].real
        breakpoints.extend(float(r) for r in real)
    breakpoints.sort()
    pts = []
    collisions = 0
    for t in breakpoints:
        if pts and t - pts[-1] <= _COLLISION_TOL:
            collisions += 1
            continue
        pts.append(t)
    ivs = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (lo + hi)
        val = ua(mid)
        # nan can only happen on top of a merged pole pair; count it in
        if side == "above":
            member = bool(np.isnan(val)) or val > lam
        else:
            member = bool(np.isnan(val)) or abs(val) > lam
        if member:
            ivs.append((lo, hi))
    ivs = normalize_intervals(ivs)
    value = total_length(ivs)
    boole = 4.0 * ua.mass_l1() / lam
    if value > boole * (1.0 + 1e-9) + 1e-12:
        raise NumericalError(
            f"superlevel measure {value!r} exceeds its Boole bound {boole!r}"
        )
    return SuperlevelResult(value, ivs, boole, collisions)


def superlevel_measure(u: RationalFraction, lam: float, side: str = "abs") -> float:
    """Measure of the superlevel set, exact up to root-finding precision."""
    return superlevel_intervals(u, lam, side=side).value


# ── families and the off-axis bound ──────────────────────────────────────────


@dataclass(frozen=True)
class FractionFamily:
    """Doubly indexed family u_{m,v}: members[m] is the tuple over v."""

    members: tuple[tuple[RationalFraction, ...], ...]

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValueError("family needs at least one member set")
        object.__setattr__(
            self, "members", tuple(tuple(row) for row in self.members)
        )

    @property
    def M(self) -> int:
        return len(self.members)

    def minmax(self, z) -> float:
        """min over m of max over v of |u_{m,v}(z)| (empty rows give 0)."""
        best = math.inf
        for row in self.members:
            worst = 0.0
            for u in row:
                worst = max(worst, abs(complex(u(complex(z)))))
            best = min(best, worst)
        return best


def family_superlevel_intervals(family: FractionFamily, eps: float) -> list[tuple[float, float]]:
    """Exact {x : min_m max_v |u_{m,v}(x)| > eps} by interval set algebra."""
    inter = None
    for row in family.members:
        row_union: list[tuple[float, float]] = []
        for u in row:
            row_union = union_intervals(row_union, superlevel_intervals(u, eps).intervals)
        inter = row_union if inter is None else intersect_intervals(inter, row_union)
        if not inter:
            return []
    return inter


def family_superlevel_measure(family: FractionFamily, eps: float) -> float:
    return total_length(family_superlevel_intervals(family, eps))


@dataclass
class MinmaxBound:
    """Off-axis control of min_m max_v |u_{m,v}| from axis smallness.

    General line: lhs <= 4 eps^{1/(2M)} / |y| for |y| >= (2/pi) delta.
    Single-set line (M = 1): lhs <= 4 eps^{1 - delta/(pi|y|)} / |y| for |y| > delta/pi.
    """

    lhs: float
    rhs_general: float
    rhs_sharp: float | None
    holds_general: bool | None
    holds_sharp: bool | None
    y_valid_general: bool
    y_valid_sharp: bool | None
    hypothesis_measure: float
    hypothesis_met: bool
    M: int


def offaxis_minmax_bound(
    family: FractionFamily, eps: float, delta: float, z: complex
) -> MinmaxBound:
    """Evaluate both sides of the off-axis min-max bound at z = x + iy.

    The hypothesis measure mes{min max |u| > eps} is computed exactly and
    compared against delta; the conclusion lines are evaluated wherever their
    |y| constraints allow. Both tolerances live in the unit range: the bound
    says nothing for delta > 1, and eps > 1 makes the rhs exponents vacuous.
    """
    if not (0.0 < eps <= 1.0):
        raise ValueError("eps must lie in (0, 1]")
    if not (0.0 <= delta <= 1.0):
        raise ValueError("delta must lie in [0, 1]")
    z = complex(z)
    y = abs(z.imag)
    if y == 0:
        raise ValueError("z must be off the real axis")
    M = family.M
    measure = family_superlevel_measure(family, eps)
    met = measure <= delta + 1e-12
    lhs = family.minmax(z)
    rhs_gen = 4.0 * eps ** (1.0 / (2.0 * M)) / y
    y_ok_gen = y >= (2.0 / math.pi) * delta - 1e-15
    out = MinmaxBound(
        lhs=lhs,
        rhs_general=rhs_gen,
        rhs_sharp=None,
        holds_general=(lhs <= rhs_gen) if y_ok_gen else None,
        holds_sharp=None,
        y_valid_general=y_ok_gen,
        y_valid_sharp=None,
        hypothesis_measure=measure,
        hypothesis_met=met,
        M=M,
    )
    if M == 1:
        y_ok_sharp = y > delta / math.pi
        rhs_sharp = 4.0 * eps ** (1.0 - delta / (math.pi * y)) / y
        out.rhs_sharp = rhs_sharp
        out.y_valid_sharp = y_ok_sharp
        out.holds_sharp = (lhs <= rhs_sharp) if y_ok_sharp else None
    return out


@dataclass
class CoverageSelection:
    """Index m whose sublevel sets carry at least 1/(2M) harmonic measure."""

    m: int
    coverages: list[float]  # mu_z( intersection_v {|u_{m,v}| <= eps} ) per m
    threshold: float


def half_coverage_selector(family: FractionFamily, eps: float, z: complex) -> CoverageSelection:
    """Pick the member set the pigeonhole step guarantees: coverage >= 1/(2M).

    Coverage of set m is the harmonic measure mu_z of the intersection over v
    of {|u_{m,v}| <= eps}, computed in closed form from the exact intervals.
    Raises NumericalError when no set qualifies (the axis hypothesis or the
    |y| constraint was not met upstream).
    """
    z = complex(z)
    M = family.M
    coverages = []
    for row in family.members:
        row_union: list[tuple[float, float]] = []
        for u in row:
            row_union = union_intervals(row_union, superlevel_intervals(u, eps).intervals)
        coverages.append(1.0 - poisson_mass(row_union, z))
    thr = 1.0 / (2.0 * M)
    for m, c in enumerate(coverages):
        if c >= thr - 1e-12:
            return CoverageSelection(m, coverages, thr)
    raise NumericalError(
        f"no member set reaches coverage 1/(2M) = {thr!r}; coverages = {coverages!r}"
    )


# ── Poisson averages ─────────────────────────────────────────────────────────


def poisson_average(u: RationalFraction, z: complex, f) -> float:
    """integral f(|u(t)|) dmu_z(t) with the harmonic measure of z = x + iy.

    Adaptive quadrature (absolute tolerance 1e-8) after the substitution
    t = x + y tan(pi (s - 1/2)), which turns mu_z into the uniform measure on
    (0, 1). Pole and zero preimages are passed as breakpoints. f must be
    integrable against log-type singularities (e.g. log itself).
    """
    z = complex(z)
    x, y = z.real, abs(z.imag)
    if y <= 0:
        raise ValueError("z must be off the real axis")
    ua = u.active()
    if ua.degree == 0:
        return float(f(0.0))

    special = list(ua.poles)
    P = np.zeros(ua.degree)
    for j in range(ua.degree):
        P = np.polyadd(P, ua.masses[j] * np.poly(np.delete(ua.poles, j)))
    if P.size > 1:
        zr = np.roots(P)
        special.extend(float(r) for r in zr[np.abs(zr.imag) < 1e-10].real)
    pts = sorted(0.5 + math.atan2(t - x, y) / math.pi for t in special)
    pts = [s for s in pts if 1e-12 < s < 1.0 - 1e-12]

    def integrand(s: float) -> float:
        t = x + y * math.tan(math.pi * (s - 0.5))
        return float(f(abs(float(ua(t)))))

    # pole/zero preimages as breakpoints; escalate subdivision once, then fail
    for limit in (400, 4000):
        out = scipy.integrate.quad(
            integrand, 0.0, 1.0, points=pts or None, limit=limit,
            epsabs=1e-8, epsrel=1e-8, full_output=1,
        )
        val, err = out[0], out[1]
        converged = len(out) == 3 and math.isfinite(val) and err <= 1e-6
        if converged:
            return float(val)
    raise NumericalError(
        f"poisson average quadrature failed to converge (error {err!r})"
    )

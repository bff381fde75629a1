"""Deterministic low-discrepancy phase sampling.

Phase sweeps use the R_d Kronecker sequence (additive recurrence with the
generalized golden ratio), not pseudo-random draws: coverage of the torus is
uniform at O(log n / n) discrepancy and every run is reproducible from a single
u64 seed. Workers can take strided slices of one sequence and reduce in index
order, which keeps parallel reductions byte-stable.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the splitmix64 generator (used only to derive seed offsets)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def harmonious_root(dim: int) -> float:
    """Positive root of x**(dim+1) = x + 1 (dim=1 gives the golden ratio)."""
    x = 2.0
    for _ in range(64):
        x = (1.0 + x) ** (1.0 / (dim + 1))
    return x


def kronecker_alphas(dim: int) -> np.ndarray:
    """Irrational step vector of the R_d sequence: phi**-(j+1), j = 0..dim-1."""
    phi = harmonious_root(dim)
    return np.array([(1.0 / phi) ** (j + 1) % 1.0 for j in range(dim)])


def kronecker_sequence(count: int, dim: int, seed: int = 0) -> np.ndarray:
    """First `count` points of the seeded R_d sequence, shape (count, dim) in [0, 1)."""
    if count < 0 or dim < 1:
        raise ValueError("count >= 0 and dim >= 1 required")
    alphas = kronecker_alphas(dim)
    # seed enters as a torus offset derived per coordinate; same seed -> same sweep
    state = seed & _MASK
    offs = np.empty(dim)
    for j in range(dim):
        state = splitmix64(state)
        offs[j] = state / 2.0**64
    idx = np.arange(1, count + 1, dtype=np.float64)
    return (offs[None, :] + idx[:, None] * alphas[None, :]) % 1.0

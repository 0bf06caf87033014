"""Permutations of {0,...,t-1} and the combinatorics behind the error terms.

Covers cycle/fixed-point statistics, unsigned Stirling numbers of the first
kind, falling factorials, and the two t!-indexed matrices (cycle-weighted and
fixed-point-weighted) whose spectral norms bound the off-diagonal mass of the
permutation Gram matrices used elsewhere.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, SizeLimitError

MAX_ENUM_T = 8  # t! enumeration guard
MAX_STIRLING_T = 20  # exact integer recurrence guard


@dataclass(frozen=True)
class Permutation:
    """Bijection of {0,...,t-1} in one-line notation: position a holds sigma(a)."""

    map: tuple[int, ...]

    def __post_init__(self):
        t = len(self.map)
        if t < 1 or sorted(self.map) != list(range(t)):
            raise PreconditionError(f"not a bijection of range({t}): {self.map!r}")

    @property
    def size(self) -> int:
        return len(self.map)

    def __call__(self, a: int) -> int:
        return self.map[a]

    def inverse(self) -> "Permutation":
        inv = [0] * self.size
        for a, b in enumerate(self.map):
            inv[b] = a
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """self after other: a -> self(other(a))."""
        if other.size != self.size:
            raise PreconditionError("size mismatch in composition")
        return Permutation(tuple(self.map[other.map[a]] for a in range(self.size)))

    def is_identity(self) -> bool:
        return all(self.map[a] == a for a in range(self.size))


def identity(t: int) -> Permutation:
    return Permutation(tuple(range(t)))


def all_permutations(t: int) -> list[Permutation]:
    """All t! permutations in lexicographic one-line order.

    This single ordering indexes every t!-sized matrix and basis in the
    package.
    """
    if not 1 <= t <= MAX_ENUM_T:
        raise SizeLimitError(f"t={t} outside enumeration guard 1..{MAX_ENUM_T}")
    return [Permutation(p) for p in itertools.permutations(range(t))]


def cycle_count(p: Permutation) -> int:
    """Number of cycles, counting fixed points as 1-cycles."""
    seen = [False] * p.size
    count = 0
    for start in range(p.size):
        if seen[start]:
            continue
        count += 1
        a = start
        while not seen[a]:
            seen[a] = True
            a = p.map[a]
    return count


def fixed_point_count(p: Permutation) -> int:
    return sum(1 for a in range(p.size) if p.map[a] == a)


def stirling_first(t: int, k: int) -> int:
    """Unsigned Stirling number of the first kind: permutations of [t] with k cycles.

    Computed by the recurrence S(t+1, k) = t*S(t, k) + S(t, k-1) with
    S(1, 1) = 1 and S(t, 0) = 0, in exact integer arithmetic.
    """
    if not (1 <= k <= t <= MAX_STIRLING_T):
        raise PreconditionError(f"need 1 <= k <= t <= {MAX_STIRLING_T}, got t={t}, k={k}")
    row = [0, 1]  # S(1, 0..1)
    for m in range(1, t):
        new = [0] * (m + 2)
        for j in range(1, m + 2):
            new[j] = m * (row[j] if j < len(row) else 0) + row[j - 1]
        row = new
    return row[k]


def falling_factorial(d: int, t: int) -> int:
    """(d)_t = d (d-1) ... (d-t+1); equals 1 at t=0 and 0 once t > d."""
    if d < 0 or t < 0:
        raise PreconditionError("falling_factorial needs nonnegative integers")
    out = 1
    for i in range(t):
        out *= d - i
        if out == 0:
            return 0
    return out


def distinct_fraction_deficit(d: int, t: int) -> tuple[float, float]:
    """Deficit 1 - (d)_t/d^t of distinct index tuples, with its t(t-1)/(2d) bound.

    Returns (exact, bound); exact <= bound always holds for d >= t.
    """
    if d < t:
        raise PreconditionError(f"need d >= t, got d={d}, t={t}")
    exact = 1.0 - falling_factorial(d, t) / float(d**t)
    bound = t * (t - 1) / (2.0 * d)
    return exact, bound


def _pair_statistic_matrix(t: int, weight) -> np.ndarray:
    perms = all_permutations(t)
    m = len(perms)
    out = np.zeros((m, m))
    for i, sigma in enumerate(perms):
        inv = sigma.inverse()
        for j, sigma_p in enumerate(perms):
            if i == j:
                continue
            out[i, j] = weight(inv.compose(sigma_p))
    return out


def cycle_gram_matrix(t: int, d: int) -> np.ndarray:
    """t! x t! matrix with entries d^(cycles(sigma^-1 sigma') - t) off the diagonal.

    Indexed by the all_permutations(t) ordering; symmetric with zero diagonal.
    Its spectral norm is at most t(t-1)/d when d > t^2.
    """
    if d <= t * t:
        raise PreconditionError(f"need d > t^2, got d={d}, t={t}")
    return _pair_statistic_matrix(t, lambda p: float(d) ** (cycle_count(p) - t))


def fixed_point_matrix(t: int, eps: float) -> np.ndarray:
    """t! x t! matrix with entries eps^(t - fixed_points(sigma^-1 sigma')) off-diagonal.

    Requires 0 < eps < 1/(2t); spectral norm is then at most 2 eps^2 t^2.
    """
    if not 0 < eps < 1.0 / (2 * t):
        raise PreconditionError(f"need 0 < eps < 1/(2t) = {1.0/(2*t)}, got {eps}")
    return _pair_statistic_matrix(t, lambda p: eps ** (t - fixed_point_count(p)))


def binomial(n: int, k: int) -> int:
    return math.comb(n, k)

"""Zigzag-style ensemble products and their closed-form spectral bounds.

Three constructions: the two-ensemble zigzag product, its derandomised
variant, and the generalised product interleaving k inner ensembles with a
control unitary. Bound calculators evaluate the corresponding closed-form
guarantees, flagging (never refusing) out-of-hypothesis parameters, since
desk-scale experiments intentionally run outside the guaranteed regimes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .ensemble import UnitaryEnsemble
from .epsgood import dprime_threshold
from .errors import PreconditionError, SizeLimitError

GENERALISED_DEGREE_LIMIT = 4096


@dataclass(frozen=True)
class ZigzagSpec:
    """Compatibility record for a product: outer/inner shapes and the kind."""

    kind: str  # "zigzag" | "derandomised" | "generalised"
    outer_dim: int
    outer_degree: int
    inner_dim: int
    inner_degree: int
    k: int = 1
    d_split: tuple[int, int] | None = None


def _outer_involution(g: UnitaryEnsemble) -> tuple[int, ...]:
    if g.involution is not None:
        return g.involution
    return tuple(range(g.size))  # identity map when no involution is attached


def g_dot(g: UnitaryEnsemble) -> np.ndarray:
    """Control unitary on C^(D*d): e_a (x) e_b -> (U_b e_a) (x) e_{-b}.

    Uses g's involution for the relabelling, or the identity map when none is
    attached. For an explicitly Hermitian g the result is an involution.
    """
    dd = g.dim
    s = g.size
    inv = _outer_involution(g)
    out = np.zeros((dd * s, dd * s), dtype=complex)
    rows = np.arange(dd)
    for b in range(s):
        out[np.ix_(rows * s + inv[b], rows * s + b)] = g.member(b)
    return out


def zigzag(g: UnitaryEnsemble, h: UnitaryEnsemble) -> UnitaryEnsemble:
    """Zigzag product: the s^2 unitaries (1 (x) V_i) Gdot (1 (x) V_j) on C^(D*d).

    Members are ordered row-major in (i, j). When both inputs are explicitly
    Hermitian the output carries the involution -(i,j) = (-j,-i).
    """
    if h.dim != g.size:
        raise PreconditionError(
            f"inner dimension must equal outer degree: dim(h) = {h.dim}, degree(g) = {g.size}"
        )
    dot = g_dot(g)
    big = g.dim * g.size
    s = h.size
    lifted = np.stack([np.kron(np.eye(g.dim), v) for v in h.unitaries])
    members = np.matmul(np.matmul(lifted[:, None], dot[None, None]), lifted[None, :]).reshape(s * s, big, big)
    involution = None
    if g.involution is not None and h.involution is not None:
        hinv = h.involution
        involution = tuple(hinv[j] * s + hinv[i] for i in range(s) for j in range(s))
    label = f"zigzag({g.label},{h.label})"
    return UnitaryEnsemble(big, members, involution, label)


def zigzag_derandomised(g: UnitaryEnsemble, h: UnitaryEnsemble) -> UnitaryEnsemble:
    """Derandomised zigzag: s^3 members (1xV_i)(1xV_j†) Gdot (1xV_j)(1xV_k).

    Defined for explicitly Hermitian inputs only. The inner block
    (1xV_j†) Gdot (1xV_j) is self-adjoint, so the output is closed under
    adjoints via -(i,j,k) = (-k, j, -i), attached as its involution.
    """
    if g.involution is None or h.involution is None:
        raise PreconditionError("derandomised zigzag needs explicitly Hermitian inputs (both involutions)")
    if h.dim != g.size:
        raise PreconditionError(
            f"inner dimension must equal outer degree: dim(h) = {h.dim}, degree(g) = {g.size}"
        )
    dot = g_dot(g)
    big = g.dim * g.size
    s = h.size
    eye = np.eye(g.dim)
    lifted = [np.kron(eye, v) for v in h.unitaries]
    hinv = h.involution
    members = np.empty((s * s * s, big, big), dtype=complex)
    pos = 0
    for i in range(s):
        for j in range(s):
            core = lifted[i] @ lifted[hinv[j]] @ dot @ lifted[j]
            for k in range(s):
                members[pos] = core @ lifted[k]
                pos += 1
    involution = tuple(
        (hinv[k] * s + j) * s + hinv[i] for i in range(s) for j in range(s) for k in range(s)
    )
    return UnitaryEnsemble(big, members, involution, f"zigzag'({g.label},{h.label})")


def g_dot_general(g: UnitaryEnsemble, d: int, dprime: int) -> np.ndarray:
    """Control unitary on C^(D*d*d'): e_a (x) e_b (x) e_b' -> (U_b e_a) (x) e_b (x) e_b'.

    Acts only through the middle index; no involution relabelling is applied.
    """
    if g.size != d:
        raise PreconditionError(f"outer degree {g.size} must equal d = {d}")
    big = g.dim * d * dprime
    out = np.zeros((big, big), dtype=complex)
    rows = np.arange(g.dim)
    for b in range(d):
        for bp in range(dprime):
            cols = rows * (d * dprime) + b * dprime + bp
            out[np.ix_(cols, cols)] = g.member(b)
    return out


def zigzag_generalised(g: UnitaryEnsemble, h_list: list[UnitaryEnsemble], d: int, dprime: int) -> UnitaryEnsemble:
    """Generalised zigzag: s^k members interleaving k inner factors with k-1
    copies of the control unitary.

    Word for index tuple (i_k, ..., i_1): (1 x V_{i_k}(k)) Gdot ... Gdot
    (1 x V_{i_1}(1)) -- no leading or trailing control factor, so k = 1 yields
    the lifted inner members alone. Output order is lexicographic in
    (i_k, ..., i_1). No involution: the inner ensembles are unrelated, so the
    product is in general not Hermitian.
    """
    k = len(h_list)
    if k < 1:
        raise PreconditionError("need at least one inner ensemble")
    sizes = {h.size for h in h_list}
    dims = {h.dim for h in h_list}
    if len(sizes) != 1:
        raise PreconditionError(f"inner ensembles must share one degree, got {sorted(sizes)}")
    if dims != {d * dprime}:
        raise PreconditionError(f"inner dimensions must all equal d*d' = {d*dprime}, got {sorted(dims)}")
    s = next(iter(sizes))
    if s**k > GENERALISED_DEGREE_LIMIT:
        raise SizeLimitError(f"degree s^k = {s**k} exceeds guard {GENERALISED_DEGREE_LIMIT}")
    dot = g_dot_general(g, d, dprime)
    big = g.dim * d * dprime
    eye = np.eye(g.dim)
    lifted = [np.stack([np.kron(eye, v) for v in h.unitaries]) for h in h_list]
    members = np.empty((s**k, big, big), dtype=complex)
    for pos, tup in enumerate(itertools.product(range(s), repeat=k)):
        # tup = (i_k, ..., i_1) lexicographic; h_list is likewise (H_k, ..., H_1)
        word = lifted[0][tup[0]]
        for level in range(1, k):
            word = word @ dot @ lifted[level][tup[level]]
        members[pos] = word
    labels = ",".join(h.label for h in h_list)
    return UnitaryEnsemble(big, members, None, f"genzigzag({g.label};{labels})")


@dataclass(frozen=True)
class BoundValue:
    """A closed-form bound evaluation plus any hypothesis warnings."""

    value: float
    flags: tuple[str, ...] = ()

    @property
    def vacuous(self) -> bool:
        return self.value >= 1.0


def _closeness_term(t: int, d: float) -> float:
    return (t * (t - 1) / d) ** 0.25


def bound_zigzag(l1: float, l2: float, t: int, d: int) -> BoundValue:
    """lambda_1 + lambda_2 + lambda_2^2 + 24 (t(t-1)/d)^(1/4)."""
    flags = () if d >= 10 * t * t else (f"hypothesis d >= 10 t^2 violated (d={d}, t={t})",)
    return BoundValue(l1 + l2 + l2 * l2 + 24.0 * _closeness_term(t, d), flags)


def bound_zigzag_improved(l1: float, l2: float, t: int, d: int, variant: str = "as-printed") -> BoundValue:
    """Improved two-ensemble bound; the inner-root term differs between the
    printed form and the classical squared form, so both are exposed."""
    if variant not in ("as-printed", "squared"):
        raise PreconditionError(f"variant must be 'as-printed' or 'squared', got {variant!r}")
    eps4 = _closeness_term(t, d)
    mu1 = l1 + 9.0 * math.sqrt(t * (t - 1) / d)
    mu2 = l2 + 2.0 * eps4
    inner = (1.0 - mu2**2) * mu1**2 if variant == "as-printed" else ((1.0 - mu2**2) * mu1) ** 2
    value = 0.5 * (1.0 - mu2**2) * mu1 + 0.5 * math.sqrt(max(inner + 4.0 * mu2**2, 0.0)) + 2.0 * eps4
    flags = () if d >= 10 * t * t else (f"hypothesis d >= 10 t^2 violated (d={d}, t={t})",)
    return BoundValue(value, flags)


def bound_zigzag_derandomised(l1: float, l2: float, t: int, d: int) -> BoundValue:
    """mu_1 + 2 mu_2^2 + 2 (t(t-1)/d)^(1/4) with the improved-bound mu's."""
    eps4 = _closeness_term(t, d)
    mu1 = l1 + 9.0 * math.sqrt(t * (t - 1) / d)
    mu2 = l2 + 2.0 * eps4
    flags = () if d >= 10 * t * t else (f"hypothesis d >= 10 t^2 violated (d={d}, t={t})",)
    return BoundValue(mu1 + 2.0 * mu2**2 + 2.0 * eps4, flags)


@dataclass(frozen=True)
class GenZigzagBound:
    """Generalised-product bound with the inner-dimension feasibility report."""

    value: float
    flags: tuple[str, ...]
    dprime_threshold: float
    dprime_feasible: bool

    @property
    def vacuous(self) -> bool:
        return self.value >= 1.0


def bound_genzigzag(l1: float, l2: float, k: int, t: int, d: int, dprime: int, eps: float) -> GenZigzagBound:
    """8(lambda_1 + 7 eps) + lambda_2^(k-1) + lambda_2^k + 47 (t(t-1)/(dd'))^(1/4).

    Also evaluates the inner-dimension threshold d' >= 30 ln(s)(ln(s)+ln(d))
    d^(2k+1) eps^-2 as a feasibility statement, using s = 4 (the smallest
    admissible degree) when no degree accompanies the call.
    """
    flags: list[str] = []
    if k < 2:
        flags.append(f"k={k} < 2 makes the lambda_2^(k-1) term equal 1 (vacuous)")
    if d * dprime < 10 * t * t:
        flags.append(f"hypothesis dd' >= 10 t^2 violated (dd'={d*dprime}, t={t})")
    if not 0.0 < eps < 1e-2:
        flags.append(f"hypothesis 0 < eps < 1e-2 violated (eps={eps})")
    value = 8.0 * (l1 + 7.0 * eps) + l2 ** (k - 1) + l2**k + 47.0 * _closeness_term(t, d * dprime)
    threshold = dprime_threshold(4, d, k, eps)
    return GenZigzagBound(value, tuple(flags), threshold.value, dprime >= threshold.value)

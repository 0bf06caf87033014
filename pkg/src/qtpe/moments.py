"""The t-th moment superoperator, its fixed space, and spectral diagnostics.

Everything here works on matrices over (C^n)^(x t), vectorised row-major into
C^(n^2t). The moment operator averages tensor-power conjugations over an
ensemble; the ideal operator is the orthogonal projection onto the span of
the register-shuffle matrices, and the second largest singular value of their
difference is the quantity every construction is judged by.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .ensemble import UnitaryEnsemble
from .errors import PreconditionError, SizeLimitError
from .linalg import (
    LinearMap,
    SeededRng,
    dense_limit,
    kron,
    max_principal_sine,
    orthonormalize,
    spectral_norm,
)
from .perms import Permutation, all_permutations, cycle_count

ITERATIVE_AMBIENT_LIMIT = 10**7
MAX_T_LAMBDA = 4
MAX_T_BASIS = 6
_BATCH_BYTES = 2**27  # member batching budget for the contraction kernel


def shuffle_operator(sigma: Permutation, n: int, t: int) -> np.ndarray:
    """Permutation matrix moving register a to register sigma(a) on (C^n)^(x t).

    Acts on basis vectors as e_{j_1}...e_{j_t} -> e_{j_{sigma^-1(1)}}...; the
    convention is pinned by the Gram identity <alpha_{s'}, alpha_s> =
    n^(cycles(s'^-1 s) - t), which a unit test enforces.
    """
    if sigma.size != t:
        raise PreconditionError(f"permutation size {sigma.size} != t = {t}")
    nt = n**t
    if nt > dense_limit():
        raise SizeLimitError(f"shuffle operator of size {nt} exceeds dense limit {dense_limit()}")
    inv = sigma.inverse().map
    idx = np.arange(nt)
    digits = np.array(np.unravel_index(idx, (n,) * t))
    dst = np.ravel_multi_index(tuple(digits[list(inv)]), (n,) * t)
    out = np.zeros((nt, nt), dtype=complex)
    out[dst, idx] = 1.0
    return out


def shuffle_vector(sigma: Permutation, x: np.ndarray, n: int, t: int) -> np.ndarray:
    """Matrix-free shuffle: same action as shuffle_operator without building it."""
    inv = sigma.inverse().map
    return x.reshape((n,) * t).transpose(inv).reshape(-1)


def alpha_sigma(sigma: Permutation, n: int, t: int) -> np.ndarray:
    """Fixed-space generator: register shuffle times the normalised identity.

    Unit Schatten-2 norm; commutes with every tensor power U^(x t).
    """
    if t > MAX_T_BASIS:
        raise SizeLimitError(f"t={t} exceeds basis guard {MAX_T_BASIS}")
    return shuffle_operator(sigma, n, t) / float(n) ** (t / 2.0)


def alpha_prime_inner(sigma: Permutation, d: int, t: int) -> np.ndarray:
    """Distinct-tuple variant of the inner fixed-space generator.

    Keeps only the diagonal entries whose index tuple has t distinct values
    before shuffling; squared norm is (d)_t / d^t.
    """
    if t > d:
        raise PreconditionError(f"distinct tuples need t <= d, got t={t}, d={d}")
    nt = d**t
    digits = np.array(np.unravel_index(np.arange(nt), (d,) * t))
    distinct = np.ones(nt, dtype=bool)
    for a in range(t):
        for b in range(a + 1, t):
            distinct &= digits[a] != digits[b]
    base = np.diag(distinct.astype(complex)) / float(d) ** (t / 2.0)
    return shuffle_operator(sigma, d, t) @ base


def alpha_prime_sigma(sigma: Permutation, split: tuple[int, int], t: int) -> np.ndarray:
    """Grouped-layout product generator: full alpha on the outer factor tensored
    with the distinct-tuple alpha on the inner factor."""
    outer_dim, inner_dim = split
    return kron(alpha_sigma(sigma, outer_dim, t), alpha_prime_inner(sigma, inner_dim, t))


def regroup_indices(outer_dim: int, inner_dim: int, t: int) -> np.ndarray:
    """Index permutation from interleaved (C^D x C^d)^(x t) to grouped
    (C^D)^(x t) x (C^d)^(x t) register order."""
    n = outer_dim * inner_dim
    idx = np.arange(n**t)
    digits = np.array(np.unravel_index(idx, (n,) * t))
    outer = digits // inner_dim
    inner = digits % inner_dim
    grouped = np.zeros_like(idx)
    for r in range(t):
        grouped = grouped * outer_dim + outer[r]
    for r in range(t):
        grouped = grouped * inner_dim + inner[r]
    return grouped


def regroup_matrix_vec(m: np.ndarray, outer_dim: int, inner_dim: int, t: int) -> np.ndarray:
    """Conjugate a matrix on the interleaved layout into the grouped layout."""
    g = regroup_indices(outer_dim, inner_dim, t)
    out = np.empty_like(m)
    out[np.ix_(g, g)] = m
    return out


@dataclass
class FixedSpaceBasis:
    """The shuffle-generator family, its Gram matrix, and an orthonormal basis.

    `alphas` follow the lexicographic permutation ordering; `ortho` holds
    orthonormal columns spanning the same space in vectorised form.
    """

    t: int
    local_dim: int
    alphas: list[np.ndarray]
    gram: np.ndarray
    ortho: np.ndarray
    rank: int

    def project_vec(self, x: np.ndarray) -> np.ndarray:
        return self.ortho @ (self.ortho.conj().T @ x)


def fixed_space_basis(n: int, t: int) -> FixedSpaceBasis:
    """Build the fixed space of all tensor-power conjugations on (C^n)^(x t).

    The Gram matrix is computed exactly from the cycle formula; the
    orthonormal basis uses the Gram inverse square root (Loewdin) when the
    family is full rank and an SVD-based orthonormalisation when t > n makes
    it rank-deficient.
    """
    if t > MAX_T_BASIS:
        raise SizeLimitError(f"t={t} exceeds basis guard {MAX_T_BASIS}")
    ambient = n ** (2 * t)
    if ambient > ITERATIVE_AMBIENT_LIMIT:
        raise SizeLimitError(f"ambient dimension {ambient} exceeds vector limit {ITERATIVE_AMBIENT_LIMIT}")
    perms = all_permutations(t)
    alphas = [alpha_sigma(sig, n, t) for sig in perms]
    gram = np.empty((len(perms), len(perms)))
    for i, sig in enumerate(perms):
        inv = sig.inverse()
        for j, sig_p in enumerate(perms):
            gram[i, j] = float(n) ** (cycle_count(inv.compose(sig_p)) - t)
    stacked = np.stack([a.reshape(-1) for a in alphas], axis=1)
    evals = np.linalg.eigvalsh(gram)
    if evals[0] > 1e-8 * evals[-1]:
        # Loewdin: continuous in n, keeps the permutation labelling symmetric
        w, v = np.linalg.eigh(gram)
        inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
        ortho = stacked @ inv_sqrt
        rank = len(perms)
    else:
        ortho, rank = orthonormalize(stacked, rank_tol=1e-8)
    return FixedSpaceBasis(t=t, local_dim=n, alphas=alphas, gram=gram, ortho=ortho, rank=rank)


def _conjugation_average(members: np.ndarray, adjoint: bool, x: np.ndarray, n: int, t: int) -> np.ndarray:
    """Average of tensor-power conjugations applied to vec(M), matrix-free.

    Realises M -> (1/s) sum_i A_i^(x t) M (A_i†)^(x t) with A = U (or U† for
    the adjoint map) as 2t mode contractions on a 2t-way tensor of side n,
    batched over members within a memory budget. Partial sums reduce in fixed
    member order for reproducibility.
    """
    s = members.shape[0]
    stack = members if not adjoint else members.conj().transpose(0, 2, 1)
    ambient = n ** (2 * t)
    chunk = max(1, min(s, _BATCH_BYTES // max(1, 16 * ambient)))
    acc = np.zeros(ambient, dtype=complex)
    x = np.asarray(x, dtype=complex).reshape(-1)
    for start in range(0, s, chunk):
        mats = stack[start : start + chunk]
        conj = mats.conj()
        c = mats.shape[0]
        view = np.broadcast_to(x.reshape((1,) + (n,) * (2 * t)), (c,) + (n,) * (2 * t))
        cur = view
        for mode in range(2 * t):
            lead = n**mode
            cur = np.matmul(mats[:, None] if mode < t else conj[:, None], cur.reshape(c, lead, n, -1))
        acc += np.add.reduce(cur.reshape(c, ambient), axis=0)
    return acc / s


@dataclass
class MomentOperator:
    """M -> (1/s) sum_i U_i^(x t) M (U_i†)^(x t) on matrices over (C^n)^(x t)."""

    ensemble: UnitaryEnsemble
    t: int

    def __post_init__(self):
        if self.t < 1:
            raise PreconditionError(f"t must be >= 1, got {self.t}")

    @property
    def local_dim(self) -> int:
        return self.ensemble.dim

    @property
    def ambient(self) -> int:
        return self.ensemble.dim ** (2 * self.t)

    def apply(self, m: np.ndarray) -> np.ndarray:
        n = self.local_dim
        nt = n**self.t
        m = np.asarray(m, dtype=complex)
        if m.shape != (nt, nt):
            raise PreconditionError(f"expected a {nt}x{nt} matrix, got {m.shape}")
        return self.apply_vec(m.reshape(-1)).reshape(nt, nt)

    def apply_vec(self, x: np.ndarray) -> np.ndarray:
        return _conjugation_average(self.ensemble.unitaries, False, x, self.local_dim, self.t)

    def adjoint_apply_vec(self, x: np.ndarray) -> np.ndarray:
        return _conjugation_average(self.ensemble.unitaries, True, x, self.local_dim, self.t)

    def dense(self) -> np.ndarray:
        if self.ambient > dense_limit():
            raise SizeLimitError(f"ambient {self.ambient} exceeds dense limit {dense_limit()}")
        n = self.local_dim
        acc = np.zeros((self.ambient, self.ambient), dtype=complex)
        for u in self.ensemble.unitaries:
            ut = u
            for _ in range(self.t - 1):
                ut = np.kron(ut, u)
            acc += np.kron(ut, ut.conj())
        return acc / self.ensemble.size


def ideal_apply(basis: FixedSpaceBasis, m: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto the fixed space (the Haar average)."""
    nt = basis.local_dim**basis.t
    m = np.asarray(m, dtype=complex)
    if m.shape != (nt, nt):
        raise PreconditionError(f"expected a {nt}x{nt} matrix, got {m.shape}")
    return basis.project_vec(m.reshape(-1)).reshape(nt, nt)


@dataclass
class SpectralReport:
    """Second-largest-singular-value report for one ensemble at one t."""

    lambda_: float
    method: str
    iterations: int
    residual: float
    seed: int
    t: int
    label: str = ""
    bound_reference: float | None = None
    converged: bool = True

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lambda_,
            "method": self.method,
            "iterations": self.iterations,
            "residual": self.residual,
            "bound_reference": self.bound_reference,
            "seed": self.seed,
            "ensemble-label": self.label,
            "t": self.t,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def deviation_map(e: UnitaryEnsemble, t: int) -> tuple[LinearMap, FixedSpaceBasis]:
    """The moment operator minus the fixed-space projector, as a LinearMap."""
    phi = MomentOperator(e, t)
    basis = fixed_space_basis(e.dim, t)
    ortho = basis.ortho

    def apply(x: np.ndarray) -> np.ndarray:
        return phi.apply_vec(x) - ortho @ (ortho.conj().T @ x)

    def adjoint(x: np.ndarray) -> np.ndarray:
        return phi.adjoint_apply_vec(x) - ortho @ (ortho.conj().T @ x)

    def dense() -> np.ndarray:
        return phi.dense() - ortho @ ortho.conj().T

    return LinearMap(dim=phi.ambient, apply=apply, adjoint_apply=adjoint, dense=dense), basis


def lambda_report(
    e: UnitaryEnsemble,
    t: int,
    method: str | None = None,
    tol: float | None = None,
    rng: SeededRng | None = None,
    max_iters: int = 5000,
    bound_reference: float | None = None,
    deflate: bool = True,
) -> SpectralReport:
    """Second largest singular value of the moment operator vs the Haar projector.

    The dense method materialises the n^2t x n^2t superoperator and takes an
    exact SVD; the iterative method is matrix-free with fixed-space deflation
    of every iterate. Non-convergence is surfaced in the report, never
    silently dropped.
    """
    if t > MAX_T_LAMBDA:
        raise SizeLimitError(f"t={t} exceeds lambda guard {MAX_T_LAMBDA}")
    ambient = e.dim ** (2 * t)
    if method == "dense-svd" and ambient > dense_limit():
        raise SizeLimitError(f"ambient {ambient} exceeds dense limit {dense_limit()}")
    if ambient > ITERATIVE_AMBIENT_LIMIT:
        raise SizeLimitError(f"ambient {ambient} exceeds iterative limit {ITERATIVE_AMBIENT_LIMIT}")
    rng = SeededRng(0, 0) if rng is None else rng
    op, basis = deviation_map(e, t)
    if method is None:
        method = "dense-svd" if ambient <= dense_limit() else "power-iteration"
    est = spectral_norm(
        op,
        tol=tol,
        max_iters=max_iters,
        rng=rng,
        method=method,
        deflate=basis.ortho if (deflate and method == "power-iteration") else None,
    )
    return SpectralReport(
        lambda_=est.value,
        method=est.method,
        iterations=est.iterations,
        residual=est.residual,
        seed=rng.seed,
        t=t,
        label=e.label,
        bound_reference=bound_reference,
        converged=est.converged,
    )


def design_error_monomial(
    e: UnitaryEnsemble,
    t: int,
    k: int,
    row_indices: tuple[int, ...],
    col_indices: tuple[int, ...],
) -> float:
    """Deviation of a balanced-monomial average from its Haar value.

    Evaluates |<E_I, (Phi^k - P_W)(M'_J)>| where M'_J is the matrix with a one
    at position (J, J), E_I the one at (I, I), and Phi^k the k-fold sequential
    iteration. Bounded by lambda^k for unit-norm monomial matrices.
    """
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    n = e.dim
    if len(row_indices) != t or len(col_indices) != t:
        raise PreconditionError("index tuples must have length t")
    for tup in (row_indices, col_indices):
        if any(not 0 <= j < n for j in tup):
            raise PreconditionError(f"indices must lie in range(0, {n}): {tup}")
    nt = n**t
    flat_j = 0
    for j in col_indices:
        flat_j = flat_j * n + j
    flat_i = 0
    for i in row_indices:
        flat_i = flat_i * n + i
    x = np.zeros(nt * nt, dtype=complex)
    x[flat_j * nt + flat_j] = 1.0
    phi = MomentOperator(e, t)
    basis = fixed_space_basis(n, t)
    y = x
    for _ in range(k):
        y = phi.apply_vec(y)
    y = y - basis.project_vec(x)
    return float(abs(y[flat_i * nt + flat_i]))


def design_iterations_needed(t: int, n: int, alpha: float, lam: float) -> int:
    """Iterations of the moment operator needed for an alpha-approximate design.

    ceil((t ln n + ln(1/alpha)) / ln(1/lambda)); the implied constant is fixed
    to 1 by choice, documented rather than claimed tight.
    """
    if not 0.0 < lam < 1.0:
        raise PreconditionError(f"lambda must lie in (0, 1), got {lam}")
    if not 0.0 < alpha < 1.0:
        raise PreconditionError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 2:
        raise PreconditionError(f"n must be >= 2, got {n}")
    return math.ceil((t * math.log(n) + math.log(1.0 / alpha)) / math.log(1.0 / lam))


@dataclass
class ClosenessReport:
    """Directed principal-angle distances between the exact and distinct-tuple
    fixed-space families, plus the bounds they are checked against.

    The perpendicular-space numbers reuse the projector identity implemented
    by complement_closeness, so no complement basis is ever built.
    """

    outer_dim: int
    inner_dim: int
    t: int
    w_to_wprime: float
    wprime_to_w: float
    w2prime_to_w2: float
    w2_to_w2prime: float
    bound_pair: float
    bound_perp: float

    @property
    def perp_w_to_wprime(self) -> float:
        return self.wprime_to_w

    @property
    def perp_wprime_to_w(self) -> float:
        return self.w_to_wprime

    @property
    def perp_w2prime_to_w2(self) -> float:
        return self.w2_to_w2prime

    @property
    def claims(self) -> dict[str, bool]:
        return {
            "pair_w": max(self.w_to_wprime, self.wprime_to_w) <= self.bound_pair,
            "pair_w2": self.w2prime_to_w2 <= self.bound_pair,
            "perp_w": max(self.perp_w_to_wprime, self.perp_wprime_to_w) <= self.bound_perp,
            "perp_w2": self.perp_w2prime_to_w2 <= self.bound_perp,
        }

    def to_json_dict(self) -> dict:
        return {
            "outer_dim": self.outer_dim,
            "inner_dim": self.inner_dim,
            "t": self.t,
            "w_to_wprime": self.w_to_wprime,
            "wprime_to_w": self.wprime_to_w,
            "w2prime_to_w2": self.w2prime_to_w2,
            "w2_to_w2prime": self.w2_to_w2prime,
            "bound_pair": self.bound_pair,
            "bound_perp": self.bound_perp,
            "claims": self.claims,
        }


def subspace_closeness_report(outer_dim: int, inner_dim: int, t: int) -> ClosenessReport:
    """Measure how close the product fixed space is to its distinct-tuple proxy.

    Works in the grouped register layout (outer factors first), which is a
    fixed unitary relabelling of the interleaved layout and therefore leaves
    all principal angles unchanged.
    """
    if t > 3:
        raise SizeLimitError(f"t={t} exceeds closeness guard 3")
    ambient = (outer_dim * inner_dim) ** (2 * t)
    if ambient > ITERATIVE_AMBIENT_LIMIT:
        raise SizeLimitError(f"ambient {ambient} exceeds vector limit {ITERATIVE_AMBIENT_LIMIT}")
    perms = all_permutations(t)
    w_cols = []
    wp_cols = []
    w2_cols = []
    w2p_cols = []
    for sig in perms:
        a1 = alpha_sigma(sig, outer_dim, t)
        a2 = alpha_sigma(sig, inner_dim, t)
        a2p = alpha_prime_inner(sig, inner_dim, t)
        w_cols.append(kron(a1, a2).reshape(-1))
        wp_cols.append(kron(a1, a2p).reshape(-1))
        w2_cols.append(a2.reshape(-1))
        w2p_cols.append(a2p.reshape(-1))
    qw, _ = orthonormalize(w_cols)
    qwp, _ = orthonormalize(wp_cols)
    q2, _ = orthonormalize(w2_cols)
    q2p, _ = orthonormalize(w2p_cols)
    tt = t * (t - 1) / inner_dim
    return ClosenessReport(
        outer_dim=outer_dim,
        inner_dim=inner_dim,
        t=t,
        w_to_wprime=max_principal_sine(qw, qwp),
        wprime_to_w=max_principal_sine(qwp, qw),
        w2prime_to_w2=max_principal_sine(q2p, q2),
        w2_to_w2prime=max_principal_sine(q2, q2p),
        bound_pair=2.0 * math.sqrt(tt),
        bound_perp=2.0 * tt**0.25,
    )

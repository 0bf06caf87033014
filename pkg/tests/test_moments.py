"""Moment operator, fixed space, spectra, design errors, subspace closeness."""

import json

import numpy as np
import pytest

from conftest import dense_lambda, hermitian_ensemble, identity_ensemble, pauli_ensemble, raw_haar_ensemble
from qtpe.ensemble import sample_random_qtpe
from qtpe.errors import PreconditionError, SizeLimitError
from qtpe.linalg import SeededRng, haar_unitary
from qtpe.moments import (
    MomentOperator,
    alpha_prime_inner,
    alpha_prime_sigma,
    alpha_sigma,
    design_error_monomial,
    design_iterations_needed,
    fixed_space_basis,
    ideal_apply,
    lambda_report,
    regroup_indices,
    shuffle_operator,
    subspace_closeness_report,
)
from qtpe.perms import Permutation, all_permutations, cycle_count, cycle_gram_matrix, identity


class TestShuffleOperator:
    def test_identity_permutation(self):
        assert np.array_equal(shuffle_operator(identity(2), 3, 2), np.eye(9))

    def test_swap_is_swap_gate(self):
        swap = shuffle_operator(Permutation((1, 0)), 2, 2)
        expected = np.zeros((4, 4))
        expected[0, 0] = expected[3, 3] = 1
        expected[1, 2] = expected[2, 1] = 1
        assert np.array_equal(swap, expected)

    def test_three_cycle_cubes_to_identity(self):
        s = shuffle_operator(Permutation((1, 2, 0)), 2, 3)
        assert np.array_equal(np.abs(s).sum(axis=0), np.ones(8))  # permutation matrix
        assert np.array_equal(np.abs(s).sum(axis=1), np.ones(8))
        assert np.allclose(s @ s @ s, np.eye(8))

    def test_homomorphism(self):
        a = Permutation((1, 2, 0))
        b = Permutation((0, 2, 1))
        lhs = shuffle_operator(a, 2, 3) @ shuffle_operator(b, 2, 3)
        rhs = shuffle_operator(a.compose(b), 2, 3)
        assert np.allclose(lhs, rhs)

    def test_matrix_free_shuffle_matches(self):
        from qtpe.moments import shuffle_vector

        g = SeededRng(9).generator()
        x = g.standard_normal(27) + 1j * g.standard_normal(27)
        for sig in all_permutations(3):
            assert np.allclose(shuffle_vector(sig, x, 3, 3), shuffle_operator(sig, 3, 3) @ x)


class TestAlphaSigma:
    def test_identity_is_normalised_identity(self):
        out = alpha_sigma(identity(2), 3, 2)
        assert np.allclose(out, np.eye(9) / 3.0)

    def test_unit_norm(self):
        for sig in all_permutations(3):
            a = alpha_sigma(sig, 2, 3)
            assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)

    def test_overlap_id_swap(self):
        perms = all_permutations(2)
        a_id = alpha_sigma(perms[0], 2, 2).reshape(-1)
        a_sw = alpha_sigma(perms[1], 2, 2).reshape(-1)
        assert np.vdot(a_id, a_sw) == pytest.approx(0.5, abs=1e-12)

    def test_commutes_with_tensor_powers(self):
        u = haar_unitary(2, SeededRng(13))
        ut = np.kron(u, u)
        for sig in all_permutations(2):
            a = alpha_sigma(sig, 2, 2)
            assert np.allclose(ut @ a, a @ ut, atol=1e-12)

    @pytest.mark.parametrize("n,t", [(2, 2), (3, 2), (2, 3)])
    def test_gram_convention_pinned(self, n, t):
        # the register-shuffle convention must reproduce n^(cycles - t) exactly
        perms = all_permutations(t)
        for i, sig in enumerate(perms):
            for j, sig_p in enumerate(perms):
                inner = np.vdot(
                    alpha_sigma(sig, n, t).reshape(-1), alpha_sigma(sig_p, n, t).reshape(-1)
                )
                expected = float(n) ** (cycle_count(sig.inverse().compose(sig_p)) - t)
                assert inner == pytest.approx(expected, abs=1e-10)


class TestAlphaPrime:
    def test_t1_equals_alpha(self):
        sig = identity(1)
        assert np.allclose(alpha_prime_inner(sig, 3, 1), alpha_sigma(sig, 3, 1))
        assert np.allclose(alpha_prime_sigma(sig, (2, 3), 1), alpha_sigma(sig, 6, 1))

    def test_norm_is_falling_factorial_fraction(self):
        sig = identity(2)
        a = alpha_prime_inner(sig, 2, 2)
        assert np.linalg.norm(a) ** 2 == pytest.approx(0.5, abs=1e-12)  # (2)_2 / 2^2

    def test_cross_orthogonality(self):
        perms = all_permutations(2)
        for i, sig in enumerate(perms):
            for j, sig_p in enumerate(perms):
                if i == j:
                    continue
                inner = np.vdot(
                    alpha_prime_inner(sig_p, 3, 2).reshape(-1), alpha_sigma(sig, 3, 2).reshape(-1)
                )
                assert abs(inner) <= 1e-12

    def test_distinctness_needs_t_at_most_d(self):
        with pytest.raises(PreconditionError):
            alpha_prime_inner(identity(3), 2, 3)


class TestRegroup:
    def test_fused_alpha_matches_grouped_kron(self):
        D, d, t = 2, 3, 2
        g = regroup_indices(D, d, t)
        for sig in all_permutations(t):
            fused = alpha_sigma(sig, D * d, t)
            grouped = np.kron(alpha_sigma(sig, D, t), alpha_sigma(sig, d, t))
            regrouped = np.empty_like(fused)
            regrouped[np.ix_(g, g)] = fused
            assert np.allclose(regrouped, grouped, atol=1e-12)


class TestFixedSpaceBasis:
    @pytest.mark.parametrize("n,t,rank", [(3, 2, 2), (4, 2, 2), (3, 3, 6), (2, 3, 5), (2, 1, 1)])
    def test_ranks(self, n, t, rank):
        assert fixed_space_basis(n, t).rank == rank

    def test_t1_basis_is_normalised_identity(self):
        basis = fixed_space_basis(2, 1)
        assert np.allclose(np.abs(basis.ortho[:, 0]), np.eye(2).reshape(-1) / np.sqrt(2))

    @pytest.mark.parametrize("n,t", [(2, 2), (3, 2), (2, 3)])
    def test_gram_matches_inner_products(self, n, t):
        basis = fixed_space_basis(n, t)
        stacked = np.stack([a.reshape(-1) for a in basis.alphas], axis=1)
        gram = (stacked.conj().T @ stacked).real
        assert np.max(np.abs(gram - basis.gram)) <= 1e-10

    @pytest.mark.parametrize("n,t", [(5, 2), (10, 3)])
    def test_gram_equals_identity_plus_cycle_matrix(self, n, t):
        basis = fixed_space_basis(n, t)
        expected = np.eye(basis.gram.shape[0]) + cycle_gram_matrix(t, n)
        assert np.max(np.abs(basis.gram - expected)) <= 1e-12

    def test_ortho_columns_orthonormal(self):
        basis = fixed_space_basis(2, 3)  # rank-deficient path
        gram = basis.ortho.conj().T @ basis.ortho
        assert np.max(np.abs(gram - np.eye(basis.rank))) <= 1e-10


class TestMomentOperatorApply:
    def test_identity_ensemble_is_identity_map(self):
        phi = MomentOperator(identity_ensemble(2), 2)
        g = SeededRng(3).generator()
        m = g.standard_normal((4, 4)) + 1j * g.standard_normal((4, 4))
        assert np.allclose(phi.apply(m), m)

    def test_pauli_t1_is_trace_projector(self):
        phi = MomentOperator(pauli_ensemble(), 1)
        g = SeededRng(4).generator()
        m = g.standard_normal((2, 2)) + 1j * g.standard_normal((2, 2))
        assert np.allclose(phi.apply(m), np.trace(m) / 2.0 * np.eye(2), atol=1e-12)

    def test_matrix_free_matches_dense_superoperator(self):
        e = raw_haar_ensemble(2, 3, seed=6)
        for t in (1, 2):
            phi = MomentOperator(e, t)
            dense = phi.dense()
            g = SeededRng(5, t).generator()
            x = g.standard_normal(phi.ambient) + 1j * g.standard_normal(phi.ambient)
            assert np.allclose(phi.apply_vec(x), dense @ x, atol=1e-10)
            assert np.allclose(phi.adjoint_apply_vec(x), dense.conj().T @ x, atol=1e-10)

    @pytest.mark.parametrize("n,t,seed", [(2, 2, 0), (2, 2, 1), (2, 2, 2), (3, 2, 0), (2, 3, 0), (3, 3, 0)])
    def test_fixed_space_invariance(self, n, t, seed):
        e = raw_haar_ensemble(n, 2, seed=seed)
        phi = MomentOperator(e, t)
        for sig in all_permutations(t):
            a = alpha_sigma(sig, n, t)
            assert np.linalg.norm(phi.apply(a) - a) <= 1e-9

    @pytest.mark.parametrize("t", [1, 2])
    def test_trace_preserved_and_contractive(self, t):
        e = hermitian_ensemble(3, 4, seed=2)
        phi = MomentOperator(e, t)
        g = SeededRng(6, t).generator()
        nt = 3**t
        m = g.standard_normal((nt, nt)) + 1j * g.standard_normal((nt, nt))
        out = phi.apply(m)
        assert abs(np.trace(out) - np.trace(m)) <= 1e-9
        assert np.linalg.norm(out) <= np.linalg.norm(m) + 1e-9


class TestIdealApply:
    def test_fixes_alphas(self):
        basis = fixed_space_basis(2, 2)
        for a in basis.alphas:
            assert np.allclose(ideal_apply(basis, a), a, atol=1e-10)

    def test_kills_traceless_offdiagonal_t1(self):
        basis = fixed_space_basis(3, 1)
        m = np.zeros((3, 3), dtype=complex)
        m[0, 1] = 1.0
        assert np.allclose(ideal_apply(basis, m), 0.0, atol=1e-12)

    def test_idempotent(self):
        basis = fixed_space_basis(2, 3)
        g = SeededRng(7).generator()
        m = g.standard_normal((8, 8)) + 1j * g.standard_normal((8, 8))
        once = ideal_apply(basis, m)
        assert np.allclose(ideal_apply(basis, once), once, atol=1e-10)


class TestLambda:
    def test_identity_ensemble_lambda_one(self):
        assert dense_lambda(identity_ensemble(2), 1) == pytest.approx(1.0, abs=1e-12)

    def test_pauli_t1_zero(self):
        assert dense_lambda(pauli_ensemble(), 1) == pytest.approx(0.0, abs=1e-12)

    def test_pauli_t2_one(self):
        assert dense_lambda(pauli_ensemble(), 2) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("d,t,seed", [(3, 1, 0), (4, 1, 1), (2, 2, 2), (3, 2, 3), (2, 3, 4)])
    def test_dense_vs_iterative(self, d, t, seed):
        e = hermitian_ensemble(d, 4, seed)
        dense = lambda_report(e, t, method="dense-svd")
        it = lambda_report(e, t, method="power-iteration", tol=1e-9, rng=SeededRng(seed), max_iters=20000)
        assert it.converged
        assert abs(dense.lambda_ - it.lambda_) <= 1e-7

    def test_lambda_in_unit_interval(self):
        for seed in range(5):
            e = raw_haar_ensemble(3, 3, seed)
            lam = dense_lambda(e, 2)
            assert -1e-12 <= lam <= 1.0 + 1e-9

    def test_hermitian_power_lambda(self):
        # iterating a self-adjoint ensemble squares and cubes its deviation norm
        from qtpe.ensemble import square_compose

        e = hermitian_ensemble(3, 4, seed=11)
        lam = dense_lambda(e, 1)
        sq = square_compose(e)
        assert dense_lambda(sq, 1) == pytest.approx(lam**2, abs=1e-6)
        cube_members = np.stack([a @ b for a in sq.unitaries for b in e.unitaries])
        from qtpe.ensemble import UnitaryEnsemble

        cube = UnitaryEnsemble(3, cube_members, None, "cube")
        assert dense_lambda(cube, 1) == pytest.approx(lam**3, abs=1e-6)

    def test_report_serialisation_fields(self):
        rep = lambda_report(pauli_ensemble(), 1, bound_reference=0.5)
        doc = json.loads(rep.to_json())
        assert set(doc) == {
            "lambda",
            "method",
            "iterations",
            "residual",
            "bound_reference",
            "seed",
            "ensemble-label",
            "t",
            "converged",
        }
        assert doc["ensemble-label"] == "pauli"
        assert doc["bound_reference"] == 0.5

    def test_guards(self):
        e = hermitian_ensemble(2, 4, seed=0)
        with pytest.raises(SizeLimitError):
            lambda_report(e, 5)


class TestDesignError:
    def test_pauli_exact_design_t1(self):
        e = pauli_ensemble()
        for k in (1, 2, 3):
            for i in range(2):
                for j in range(2):
                    assert design_error_monomial(e, 1, k, (i,), (j,)) <= 1e-12

    @pytest.mark.parametrize("t", [1, 2])
    @pytest.mark.parametrize("seed", range(3))
    def test_bounded_by_lambda_power(self, t, seed):
        e = hermitian_ensemble(2, 4, seed)
        lam = dense_lambda(e, t)
        idx = [(a, b) for a in range(2) for b in range(2)] if t == 2 else [(a,) for a in range(2)]
        for k in (1, 2, 3):
            for rows in idx:
                for cols in idx:
                    err = design_error_monomial(e, t, k, rows, cols)
                    assert err <= lam**k + 1e-9

    def test_k_zero_rejected(self):
        with pytest.raises(PreconditionError):
            design_error_monomial(pauli_ensemble(), 1, 0, (0,), (0,))

    def test_index_range_checked(self):
        with pytest.raises(PreconditionError):
            design_error_monomial(pauli_ensemble(), 1, 1, (2,), (0,))


class TestDesignIterations:
    def test_example_small(self):
        assert design_iterations_needed(1, 2, 0.5, 0.5) == 2

    def test_example_larger(self):
        assert design_iterations_needed(2, 4, 1e-3, 0.8) == 44

    def test_lambda_one_rejected(self):
        with pytest.raises(PreconditionError):
            design_iterations_needed(1, 2, 0.5, 1.0)


class TestSubspaceCloseness:
    def test_t1_all_zero(self):
        rep = subspace_closeness_report(2, 4, 1)
        assert rep.w_to_wprime == pytest.approx(0.0, abs=1e-10)
        assert rep.wprime_to_w == pytest.approx(0.0, abs=1e-10)
        assert rep.w2prime_to_w2 == pytest.approx(0.0, abs=1e-10)

    def test_t2_values_within_bounds_and_monotone(self):
        reports = {d: subspace_closeness_report(2, d, 2) for d in (4, 8)}
        for d, rep in reports.items():
            assert max(rep.w_to_wprime, rep.wprime_to_w) <= rep.bound_pair + 1e-12
            assert rep.w2prime_to_w2 <= rep.bound_pair + 1e-12
            assert max(rep.perp_w_to_wprime, rep.perp_wprime_to_w) <= rep.bound_perp + 1e-12
            assert all(rep.claims.values())
        assert reports[8].w_to_wprime < reports[4].w_to_wprime

    def test_t2_d4_analytic_value(self):
        # distance from W into W' is sqrt(1 - (d)_t/d^t) for the pure generators:
        # at t=2, d=4 the deficit is 1/4 with Gram corrections pushing it to 0.57735
        rep = subspace_closeness_report(2, 4, 2)
        assert rep.w_to_wprime == pytest.approx(0.5773502691896257, abs=1e-9)

    def test_guard(self):
        with pytest.raises(SizeLimitError):
            subspace_closeness_report(2, 4, 4)

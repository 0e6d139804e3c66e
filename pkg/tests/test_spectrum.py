"""Tests for the normalization pipeline, CDR evaluator, and power summary."""

import numpy as np
import pytest

from crossdep.core import batch_acf, batch_ccf
from crossdep.linalg import SymMatrix, sym_eig
from crossdep.netfn import mlp_init
from crossdep.spectrum import (
    SpectrumResult,
    cdr,
    cdr_matrix,
    cross_spectrum,
    eigenfunctions,
    estimate_spectrum,
    total_power,
    whiten,
)


class TestWhiten:
    def test_identity_acf_leaves_outputs(self):
        rng = np.random.default_rng(0)
        out = rng.standard_normal((6, 3))
        assert np.allclose(whiten(out, SymMatrix.identity(3)), out, atol=1e-12)

    def test_scalar_diag_four_halves(self):
        out = np.array([[2.0], [4.0]])
        assert np.allclose(whiten(out, SymMatrix([[4.0]])), [[1.0], [2.0]], atol=1e-12)

    def test_post_whitening_acf_is_identity(self):
        rng = np.random.default_rng(1)
        out = rng.standard_normal((500, 4)) @ rng.standard_normal((4, 4))
        acf = batch_acf(out, 1e-8)
        white = whiten(out, acf)
        assert np.max(np.abs(batch_acf(white, 0.0).a - np.eye(4))) <= 1e-6


class TestCrossSpectrum:
    def test_diagonal_ccf(self):
        # empirical CCF of these rows is exactly [[1, 0], [0, 0.5]]
        f_bar = np.array([[np.sqrt(2.0), 0.0], [0.0, np.sqrt(2.0)]])
        g_bar = np.array([[np.sqrt(2.0), 0.0], [0.0, np.sqrt(2.0) / 2.0]])
        sigma, q_f, q_g = cross_spectrum(f_bar, g_bar)
        assert np.allclose(sigma, [1.0, 0.25], atol=1e-12)
        assert np.allclose(q_f, np.eye(2), atol=1e-12)
        assert np.allclose(q_g, np.eye(2), atol=1e-12)

    def test_matched_families_give_unit_spectrum(self):
        rng = np.random.default_rng(2)
        out = rng.standard_normal((400, 3))
        f_bar = whiten(out, batch_acf(out, 0.0))
        sigma, _, _ = cross_spectrum(f_bar, f_bar)
        assert np.allclose(sigma, 1.0, atol=1e-9)

    def test_matches_svd_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            f_bar = rng.standard_normal((50, 4))
            g_bar = rng.standard_normal((50, 3))
            sigma, q_f, q_g = cross_spectrum(f_bar, g_bar)
            want = np.sort(
                np.linalg.svd(batch_ccf(f_bar, g_bar), compute_uv=False) ** 2
            )[::-1]
            assert np.max(np.abs(sigma - want)) <= 1e-9

    def test_two_sides_share_leading_spectrum(self):
        rng = np.random.default_rng(4)
        f_bar = rng.standard_normal((60, 5))
        g_bar = rng.standard_normal((60, 3))
        p = batch_ccf(f_bar, g_bar)
        vals_f = sym_eig(SymMatrix.symmetrized(p @ p.T)).values
        vals_g = sym_eig(SymMatrix.symmetrized(p.T @ p)).values
        assert np.max(np.abs(vals_f[:3] - vals_g[:3])) <= 1e-9

    def test_rotations_orthogonal(self):
        rng = np.random.default_rng(5)
        f_bar = rng.standard_normal((40, 4))
        g_bar = rng.standard_normal((40, 2))
        _, q_f, q_g = cross_spectrum(f_bar, g_bar)
        assert np.linalg.norm(q_f @ q_f.T - np.eye(4)) <= 1e-8
        assert np.linalg.norm(q_g @ q_g.T - np.eye(2)) <= 1e-8


class TestEstimateSpectrum:
    def test_sigma_descending_and_bounded(self):
        rng = np.random.default_rng(6)
        res = estimate_spectrum(
            rng.uniform(0.0, 1.0, (300, 4)), rng.uniform(0.0, 1.0, (300, 3)), 1e-3
        )
        assert res.sigma.shape == (3,)
        assert np.all(np.diff(res.sigma) <= 1e-12)
        assert np.all(res.sigma >= -1e-12) and np.all(res.sigma <= 1.0 + 1e-9)

    def test_gl_invariance_of_sigma(self):
        # full-rank re-mixing of raw outputs must not move the spectrum
        rng = np.random.default_rng(7)
        f = rng.standard_normal((400, 4)) + 1.0
        g = rng.standard_normal((400, 3)) + 1.0
        base = estimate_spectrum(f, g, 0.0).sigma
        for _ in range(5):
            a = np.eye(4) + 0.5 * rng.standard_normal((4, 4))
            b = np.eye(3) + 0.5 * rng.standard_normal((3, 3))
            moved = estimate_spectrum(f @ a.T, g @ b.T, 0.0).sigma
            assert np.max(np.abs(moved - base)) <= 1e-8


def toy_result(k=3):
    return SpectrumResult(
        sigma=np.array([1.0, 0.5, 0.25][:k]),
        w_f=SymMatrix.identity(k),
        w_g=SymMatrix.identity(k),
        q_f=np.eye(k),
        q_g=np.eye(k),
    )


class TestEigenfunctions:
    def test_identity_transforms_return_forward(self):
        p = mlp_init([2, 8, 3], seed=0)
        res = toy_result()
        rows = np.random.default_rng(8).standard_normal((5, 2))
        from crossdep.netfn import forward

        assert np.allclose(eigenfunctions(p, res, rows), forward(p, rows), atol=1e-14)

    def test_side_selection_and_errors(self):
        p = mlp_init([2, 8, 3], seed=0)
        res = toy_result()
        rows = np.zeros((2, 2))
        assert eigenfunctions(p, res, rows, side="g").shape == (2, 3)
        with pytest.raises(ValueError):
            eigenfunctions(p, res, rows, side="h")

    def test_dimension_mismatch(self):
        p = mlp_init([2, 8, 4], seed=0)
        with pytest.raises(ValueError):
            eigenfunctions(p, toy_result(3), np.zeros((2, 2)))


class TestCdr:
    def test_symmetry_exact(self):
        p = mlp_init([2, 10, 3], seed=1)
        rng = np.random.default_rng(9)
        out = rng.standard_normal((200, 3))
        res = estimate_spectrum(out, out, 1e-3)
        x = rng.standard_normal(2)
        y = rng.standard_normal(2)
        assert cdr(p, res, x, y) == cdr(p, res, y, x)

    def test_matrix_matches_scalar(self):
        p = mlp_init([2, 10, 3], seed=2)
        rng = np.random.default_rng(10)
        out = rng.standard_normal((200, 3))
        res = estimate_spectrum(out, out, 1e-3)
        a = rng.standard_normal((3, 2))
        b = rng.standard_normal((4, 2))
        mat = cdr_matrix(p, res, a, b)
        assert mat.shape == (3, 4)
        for i in range(3):
            for j in range(4):
                assert abs(mat[i, j] - cdr(p, res, a[i], b[j])) <= 1e-12

    def test_single_argument_matrix_symmetric(self):
        p = mlp_init([2, 10, 3], seed=3)
        rng = np.random.default_rng(11)
        res = estimate_spectrum(
            rng.standard_normal((100, 3)), rng.standard_normal((100, 3)), 1e-3
        )
        mat = cdr_matrix(p, res, rng.standard_normal((6, 2)))
        assert np.array_equal(mat, mat.T)


class TestTotalPower:
    def test_independence_gives_zero(self):
        assert total_power([1.0, 0.0, 0.0, 0.0]) == 0.0

    def test_reference_row(self):
        got = total_power([1.0, 0.245, 0.057, 0.011, 0.002])
        assert abs(got - 0.0176) <= 5e-4
        assert abs(got - 0.018) <= 5e-4

    def test_scalar_evaluation(self):
        assert abs(total_power([1.0, 0.9]) - (-np.log(0.1) / 20.0)) <= 1e-12

    def test_clamp_keeps_finite(self):
        got = total_power([1.0, 1.0])
        assert np.isfinite(got)
        assert abs(got - (-np.log(1e-6) / 20.0)) <= 1e-9

    def test_short_and_bad_input(self):
        assert total_power([1.0]) == 0.0
        with pytest.raises(ValueError):
            total_power(np.ones((2, 2)))

    def test_divisor(self):
        assert abs(total_power([1.0, 0.5], divisor=2.0) - (-np.log(0.5) / 2.0)) <= 1e-12

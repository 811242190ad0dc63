"""Kernel tests: every routine is checked against an independent loop-level
oracle written here, plus the documented degenerate cases."""

import numpy as np
import pytest

from ipopcma.errors import ContractError, NumericError, ShapeError
from ipopcma.linalg import EigenPair, eig_symmetric, gemm, syr1


def gemm_oracle(alpha, a, b, beta, cin):
    """Triple-loop product, no vectorization."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = alpha * acc + beta * cin[i, j]
    return out


def syr1_oracle(c, v, alpha):
    """Double-loop outer-product update."""
    n = c.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = c[i, j] + alpha * v[i] * v[j]
    return out


class TestGemm:
    def test_identity_case(self):
        b = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = gemm(1.0, np.eye(2), b, 0.0, np.zeros((2, 2)))
        np.testing.assert_array_equal(out, b)

    def test_scaling_degeneracy(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        m = rng.standard_normal((3, 2))
        out = gemm(0.0, a, b, 1.0, m)
        np.testing.assert_allclose(out, m, rtol=0, atol=0)

    def test_random_against_triple_loop(self):
        rng = np.random.default_rng(42)
        a = rng.standard_normal((5, 3))
        b = rng.standard_normal((3, 4))
        cin = rng.standard_normal((5, 4))
        got = gemm(1.7, a, b, -0.3, cin)
        want = gemm_oracle(1.7, a, b, -0.3, cin)
        assert np.max(np.abs(got - want)) < 1e-13

    def test_cin_not_modified(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((2, 2))
        cin = rng.standard_normal((2, 2))
        keep = cin.copy()
        gemm(1.0, a, a, 2.0, cin)
        np.testing.assert_array_equal(cin, keep)

    def test_associativity_property(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(2, 11))
            a = rng.standard_normal((n, n))
            b = rng.standard_normal((n, n))
            c = rng.standard_normal((n, n))
            left = gemm(1.0, gemm(1.0, a, b), c)
            right = gemm(1.0, a, gemm(1.0, b, c))
            scale = np.max(np.abs(left))
            assert np.max(np.abs(left - right)) < 1e-10 * max(scale, 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            gemm(1.0, np.eye(3), np.eye(2))
        with pytest.raises(ShapeError):
            gemm(1.0, np.eye(2), np.eye(2), 1.0, np.zeros((3, 3)))

    def test_nonfinite_rejected(self):
        bad = np.array([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(NumericError):
            gemm(1.0, bad, np.eye(2))


class TestSyr1:
    def test_zero_scaling(self):
        c = np.array([[2.0, 1.0], [1.0, 3.0]])
        np.testing.assert_array_equal(syr1(c, np.array([5.0, -7.0]), 0.0), c)

    def test_outer_product(self):
        out = syr1(np.zeros((2, 2)), np.array([1.0, 2.0]), 1.0)
        np.testing.assert_array_equal(out, np.array([[1.0, 2.0], [2.0, 4.0]]))

    def test_random_against_double_loop(self):
        rng = np.random.default_rng(8)
        c = rng.standard_normal((6, 6))
        c = c + c.T
        v = rng.standard_normal(6)
        got = syr1(c, v, -0.37)
        want = syr1_oracle(c, v, -0.37)
        assert np.max(np.abs(got - want)) < 1e-14

    def test_bitwise_symmetry(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            n = int(rng.integers(1, 12))
            c = rng.standard_normal((n, n))
            c = 0.5 * (c + c.T)
            c = np.triu(c) + np.triu(c, 1).T  # bitwise-symmetric start
            out = syr1(c, rng.standard_normal(n), float(rng.standard_normal()))
            assert np.array_equal(out, out.T)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            syr1(np.zeros((2, 3)), np.array([1.0, 2.0]))
        with pytest.raises(ShapeError):
            syr1(np.eye(2), np.array([1.0, 2.0, 3.0]))


def random_spd(rng, n):
    """SPD matrix with a known random spectrum, built as Q diag(lam) Q^T."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.sort(10.0 ** rng.uniform(-3, 3, size=n))
    return q @ np.diag(lam) @ q.T, lam


class TestEigSymmetric:
    def test_identity(self):
        pair = eig_symmetric(np.eye(3))
        np.testing.assert_allclose(pair.values, np.ones(3), atol=1e-14)
        np.testing.assert_allclose(
            pair.vectors.T @ pair.vectors, np.eye(3), atol=1e-12
        )

    def test_diagonal_case(self):
        pair = eig_symmetric(np.diag([4.0, 1.0]))
        np.testing.assert_allclose(pair.values, [1.0, 4.0], atol=1e-14)
        # axis-aligned up to sign
        assert abs(abs(pair.vectors[1, 0]) - 1.0) < 1e-12
        assert abs(abs(pair.vectors[0, 1]) - 1.0) < 1e-12

    def test_construct_then_decompose(self):
        rng = np.random.default_rng(123)
        c, lam = random_spd(rng, 8)
        c = 0.5 * (c + c.T)
        pair = eig_symmetric(c)
        np.testing.assert_allclose(pair.values, lam, rtol=1e-9)

    def test_contract_on_random_spd(self):
        rng = np.random.default_rng(2024)
        for _ in range(40):
            n = int(rng.integers(2, 33))
            c, _ = random_spd(rng, n)
            c = 0.5 * (c + c.T)
            pair = eig_symmetric(c)
            # ascending, non-negative
            assert np.all(np.diff(pair.values) >= 0)
            assert np.all(pair.values >= 0)
            # orthonormality
            gram = pair.vectors.T @ pair.vectors
            assert np.max(np.abs(gram - np.eye(n))) < 1e-10
            # reconstruction
            rec = pair.vectors @ np.diag(pair.values) @ pair.vectors.T
            rel = np.linalg.norm(rec - c) / np.linalg.norm(c)
            assert rel < 1e-8

    def test_matches_reference_eigensolver(self):
        # Cross-check the authored solver against numpy's LAPACK route.
        rng = np.random.default_rng(55)
        for _ in range(10):
            n = int(rng.integers(2, 20))
            c, _ = random_spd(rng, n)
            c = 0.5 * (c + c.T)
            got = eig_symmetric(c).values
            want = np.sort(np.linalg.eigvalsh(c))
            np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)

    def test_near_multiple_eigenvalues(self):
        rng = np.random.default_rng(77)
        q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        lam = np.array([1.0, 1.0, 1.0 + 1e-13, 2.0, 2.0, 5.0])
        c = q @ np.diag(lam) @ q.T
        c = 0.5 * (c + c.T)
        pair = eig_symmetric(c)
        rec = pair.vectors @ np.diag(pair.values) @ pair.vectors.T
        assert np.linalg.norm(rec - c) / np.linalg.norm(c) < 1e-8

    def test_clamps_roundoff_negatives(self):
        # Rank-deficient: smallest eigenvalue is 0 up to round-off and the
        # result must never go negative.
        rng = np.random.default_rng(5)
        b = rng.standard_normal((6, 3))
        c = b @ b.T
        c = 0.5 * (c + c.T)
        pair = eig_symmetric(c)
        assert np.all(pair.values >= 0.0)

    def test_rejects_nonsymmetric(self):
        c = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ContractError):
            eig_symmetric(c)

    def test_rejects_nonsquare(self):
        with pytest.raises(ShapeError):
            eig_symmetric(np.zeros((2, 3)))

    def test_returns_eigenpair_type(self):
        assert isinstance(eig_symmetric(np.eye(2)), EigenPair)

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from xlab import mat3
from xlab.errors import ValidationError

entries = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)
mats = arrays(np.float64, (3, 3), elements=entries)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


class TestSymEig:
    def test_diagonal(self):
        r = mat3.sym_eig(np.diag([4.0, 1.0, 0.25]))
        assert r.values == pytest.approx([4.0, 1.0, 0.25])
        assert np.allclose(r.vectors, np.eye(3))

    def test_identity(self):
        r = mat3.sym_eig(np.eye(3))
        assert r.values == pytest.approx([1.0, 1.0, 1.0])
        assert np.allclose(r.vectors, np.eye(3))

    def test_known_factorization(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            Q = random_rotation(rng)
            D = np.sort(rng.uniform(-5, 5, 3))[::-1]
            r = mat3.sym_eig(Q @ np.diag(D) @ Q.T)
            assert np.abs(r.values - D).max() <= 1e-10

    @settings(max_examples=200, deadline=None)
    @given(mats)
    def test_reconstruction_and_orthogonality(self, A):
        S = A + A.T
        r = mat3.sym_eig(S)
        V = r.vectors
        assert np.linalg.norm(V @ np.diag(r.values) @ V.T - S) <= 1e-10 * (1 + np.linalg.norm(S))
        assert np.abs(V.T @ V - np.eye(3)).max() <= 1e-12
        assert np.all(np.diff(r.values) <= 0)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValidationError):
            mat3.sym_eig(np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValidationError):
            mat3.sym_eig(np.full((3, 3), np.nan))


class TestSVD3:
    def test_identity(self):
        f = mat3.svd3(np.eye(3))
        assert f.s == pytest.approx([1.0, 1.0, 1.0])

    def test_diagonal_sorted(self):
        e = math.e
        f = mat3.svd3(np.diag([e**2, e**-4, e**2]))
        assert f.s == pytest.approx([e**2, e**2, e**-4])

    def test_sl3_product_of_singular_values(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            g = mat3.expm(rng.normal(size=(3, 3)) - 0 * np.eye(3))
            g = g / np.cbrt(np.linalg.det(g))
            f = mat3.svd3(g, det=1.0)
            assert np.prod(f.s) == pytest.approx(1.0, abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(mats)
    def test_rotations_and_reconstruction(self, M):
        assume(abs(np.linalg.det(M)) > 1e-6 * max(np.linalg.norm(M), 1e-3) ** 3)
        f = mat3.svd3(M)
        assert np.abs(f.u @ np.diag(f.s) @ f.v.T - M).max() <= 1e-9 * (1 + np.abs(M).max())
        assert np.linalg.det(f.u) == pytest.approx(1.0)
        # a negative determinant leaves the reflection in V
        assert np.linalg.det(f.v) == pytest.approx(np.sign(np.linalg.det(M)))
        assert abs(f.s[0]) >= abs(f.s[1]) >= abs(f.s[2]) - 1e-12

    def test_ill_conditioned_with_known_determinant(self):
        import mpmath

        g = np.diag([math.exp(20), math.exp(-5), math.exp(-15)])
        R = random_rotation(np.random.default_rng(3))
        M = R @ g @ R.T
        f = mat3.svd3(M, det=1.0)
        with mpmath.workdps(60):
            ref = [float(x) for x in mpmath.svd_r(mpmath.matrix(M.tolist()), compute_uv=False)]
        assert f.s[0] == pytest.approx(ref[0], rel=1e-9)
        # backward-stable bound: absolute error of order eps * s1
        assert abs(f.s[1] - ref[1]) <= 10 * np.finfo(float).eps * ref[0]
        assert np.prod(f.s) == pytest.approx(1.0, rel=1e-12)

    def test_singular_rejected(self):
        with pytest.raises(ValidationError):
            mat3.svd3(np.zeros((3, 3)))


class TestExpLog:
    def test_expm_zero(self):
        assert np.allclose(mat3.expm(np.zeros((3, 3))), np.eye(3))

    def test_logm_diagonal(self):
        L = mat3.logm_spd(np.diag([math.e, 1.0, 1 / math.e]))
        assert np.allclose(L, np.diag([1.0, 0.0, -1.0]), atol=1e-12)

    def test_traceless_determinant(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            M = rng.normal(size=(3, 3))
            M -= np.trace(M) / 3 * np.eye(3)
            assert np.linalg.det(mat3.expm(M)) == pytest.approx(1.0, abs=1e-9)

    def test_expm_matches_scipy(self):
        from scipy.linalg import expm as sexpm

        rng = np.random.default_rng(5)
        for _ in range(50):
            M = rng.normal(scale=2.0, size=(3, 3))
            assert np.allclose(mat3.expm(M), sexpm(M), rtol=1e-10, atol=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, (3, 3), elements=st.floats(-3, 3)))
    def test_roundtrip(self, A):
        S = 0.5 * (A + A.T)
        assert np.abs(mat3.logm_spd(mat3.expm(S)) - S).max() <= 1e-9

    def test_logm_rejects_indefinite(self):
        with pytest.raises(ValidationError):
            mat3.logm_spd(np.diag([1.0, -1.0, 1.0]))

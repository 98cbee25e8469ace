import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stressgrowth import tensor as tn
from stressgrowth.errors import AsymmetricInputError, NotSPDError, SingularMatrixError

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
mat3 = arrays(np.float64, (3, 3), elements=finite)


def random_spd(rng, n, lo=0.1, hi=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, 3, 3)))
    w = rng.uniform(lo, hi, (n, 3))
    return tn.sym(np.einsum("nik,nk,njk->nij", q, w, q))


def expm_mp(a, dps=40):
    """High-precision exponential by a long Taylor series in mpmath."""
    with mpmath.workdps(dps):
        x = mpmath.matrix(a.tolist())
        nrm = mpmath.mnorm(x, "f")
        s = max(0, int(mpmath.ceil(mpmath.log(nrm + 1, 2))))
        x = x / 2**s
        term = mpmath.eye(3)
        out = mpmath.eye(3)
        for k in range(1, 80):
            term = term * x / k
            out += term
        for _ in range(s):
            out = out * out
        return np.array(out.tolist(), dtype=float)


class TestInvert:
    def test_identity(self):
        np.testing.assert_array_equal(tn.invert(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(tn.invert(np.diag([2.0, 4.0, 5.0])), np.diag([0.5, 0.25, 0.2]), rtol=1e-15)

    def test_random_residual(self):
        rng = np.random.default_rng(1)
        a = tn.mat_exp(0.7 * rng.standard_normal((100, 3, 3)))  # well conditioned
        err = np.abs(a @ tn.invert(a) - np.eye(3)).max()
        assert err < 1e-12

    @pytest.mark.parametrize("a", [np.zeros((3, 3)), np.diag([1.0, 1.0, 0.0]), np.ones((3, 3))])
    def test_singular(self, a):
        with pytest.raises(SingularMatrixError):
            tn.invert(a)

    def test_singular_threshold_scales(self):
        # tiny but well-conditioned matrices are fine
        np.testing.assert_allclose(tn.invert(1e-6 * np.eye(3)), 1e6 * np.eye(3))


class TestDeviator:
    def test_identity(self):
        np.testing.assert_allclose(tn.deviator(np.eye(3)), 0.0, atol=1e-16)

    @pytest.mark.parametrize("s", [1.0, -3.5, 250.0])
    def test_uniaxial(self, s):
        np.testing.assert_allclose(tn.deviator(np.diag([s, 0, 0])), np.diag([2 * s / 3, -s / 3, -s / 3]),
                                   rtol=1e-15, atol=1e-15 * abs(s))

    @given(mat3)
    def test_trace_free(self, a):
        assert abs(tn.trace(tn.deviator(a))) <= 1e-12 * max(np.linalg.norm(a), 1.0)


class TestSymSqrt:
    def test_identity(self):
        np.testing.assert_allclose(tn.sym_sqrt(np.eye(3)), np.eye(3), atol=1e-15)

    def test_diagonal(self):
        np.testing.assert_allclose(tn.sym_sqrt(np.diag([4.0, 9.0, 16.0])), np.diag([2.0, 3.0, 4.0]), rtol=1e-14)

    def test_reconstruction_1000(self):
        rng = np.random.default_rng(2)
        a = random_spd(rng, 1000)
        r = tn.sym_sqrt(a)
        err = np.linalg.norm(r @ r - a, axis=(1, 2)) / np.linalg.norm(a, axis=(1, 2))
        assert err.max() < 1e-10
        assert np.all(np.linalg.eigvalsh(r) > 0)
        assert tn.is_symmetric(r)

    @pytest.mark.parametrize("a", [np.diag([1.0, -1.0, 2.0]), np.diag([1.0, 0.0, 2.0]), -np.eye(3)])
    def test_not_spd_reports_eigenvalue(self, a):
        with pytest.raises(NotSPDError) as info:
            tn.sym_sqrt(a)
        assert info.value.min_eigenvalue == pytest.approx(np.linalg.eigvalsh(a)[0])

    def test_asymmetric_rejected(self):
        with pytest.raises(NotSPDError):
            tn.sym_sqrt(np.array([[2.0, 1.0, 0], [0, 2.0, 0], [0, 0, 1.0]]))


class TestMatExp:
    def test_zero(self):
        np.testing.assert_array_equal(tn.mat_exp(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(tn.mat_exp(np.diag([1.0, 2.0, 3.0])), np.diag(np.exp([1.0, 2.0, 3.0])),
                                   rtol=1e-14)

    def test_matches_high_precision_series(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            a = rng.standard_normal((3, 3))
            a *= rng.uniform(0.0, 2.0) / np.linalg.norm(a)
            ref = expm_mp(a)
            assert np.abs(tn.mat_exp(a) - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())

    def test_nilpotent(self):
        n = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
        np.testing.assert_allclose(tn.mat_exp(n), np.eye(3) + n + n @ n / 2, atol=1e-15)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((5, 3, 3))
        single = np.array([tn.mat_exp(x) for x in a])
        np.testing.assert_allclose(tn.mat_exp(a), single, rtol=1e-13)

    @settings(max_examples=200)
    @given(mat3)
    def test_inverse_identity(self, a):
        nrm = np.linalg.norm(a)
        if nrm > 5:
            a = a * (5 / nrm)
        assert np.abs(tn.mat_exp(a) @ tn.mat_exp(-a) - np.eye(3)).max() < 1e-10

    @settings(max_examples=200)
    @given(mat3)
    def test_det_identity(self, a):
        nrm = np.linalg.norm(a)
        if nrm > 5:
            a = a * (5 / nrm)
        ref = np.exp(np.trace(a))
        assert abs(tn.det(tn.mat_exp(a)) - ref) <= 1e-10 * ref

    def test_non_finite(self):
        with pytest.raises(FloatingPointError):
            tn.mat_exp(np.full((3, 3), np.nan))


class TestNorm:
    @pytest.mark.parametrize("a, expected", [(np.zeros((3, 3)), 0.0), (np.eye(3), np.sqrt(3.0)),
                                             (np.diag([3.0, 4.0, 0.0]), 5.0)])
    def test_values(self, a, expected):
        assert tn.frobenius_norm(a) == pytest.approx(expected, rel=1e-15)


class TestVoigt:
    def test_identity(self):
        np.testing.assert_array_equal(tn.voigt_pack(np.eye(3)), [1, 1, 1, 0, 0, 0])

    @pytest.mark.parametrize("pos, slot", [((0, 1), 3), ((0, 2), 4), ((1, 2), 5)])
    def test_ordering(self, pos, slot):
        a = np.zeros((3, 3))
        a[pos] = a[pos[::-1]] = 7.0
        v = tn.voigt_pack(a)
        assert v[slot] == 7.0
        assert np.count_nonzero(v) == 1

    @given(mat3)
    def test_round_trip_exact(self, a):
        s = tn.sym(a)
        np.testing.assert_array_equal(tn.voigt_unpack(tn.voigt_pack(s)), s)

    def test_asymmetric_rejected(self):
        with pytest.raises(AsymmetricInputError):
            tn.voigt_pack(np.array([[1.0, 2.0, 0], [0, 1.0, 0], [0, 0, 1.0]]))


class TestSymEig:
    def test_identity(self):
        w, _ = tn.sym_eig(np.eye(3))
        np.testing.assert_allclose(w, [1, 1, 1])

    def test_sorted_descending(self):
        w, _ = tn.sym_eig(np.diag([2.0, 5.0, -1.0]))
        np.testing.assert_allclose(w, [5, 2, -1])

    def test_random_reconstruction(self):
        rng = np.random.default_rng(5)
        a = tn.sym(rng.standard_normal((200, 3, 3)))
        w, v = tn.sym_eig(a)
        scale = np.linalg.norm(a, axis=(1, 2))[:, None, None]
        assert np.all(np.abs(a @ v - v * w[:, None, :]) <= 1e-10 * scale)
        assert np.abs(np.swapaxes(v, 1, 2) @ v - np.eye(3)).max() < 1e-10
        recon = np.einsum("nik,nk,njk->nij", v, w, v)
        assert np.all(np.abs(recon - a) <= 1e-10 * scale)
        assert np.all(np.diff(w, axis=1) <= 0)

import numpy as np
import pytest

from nystrom_mp import (
    CholeskyError,
    ConfigError,
    FormatOverflowError,
    SpdMatrix,
    SyntheticSpec,
    approx_errors,
    builtin_format,
    draw_sketch,
    expected_exact_error_bound,
    gen_synthetic,
    load_approx,
    nystrom_approx,
    save_approx,
)
from nystrom_mp.nystrom import NystromApprox, reconstruct, sym_norm2
from nystrom_mp.precision import MatmulMode

FP64 = builtin_format("fp64")


def poly(beta=1.0, r=10, n=100):
    return gen_synthetic(SyntheticSpec("poly", 1.0, n=n, r=r, beta=beta))


class TestSketch:
    def test_orthonormal(self):
        Q = draw_sketch(5, 2, seed=3).Q
        assert Q.shape == (5, 2)
        np.testing.assert_allclose(Q.T @ Q, np.eye(2), atol=1e-12)

    def test_deterministic(self):
        np.testing.assert_array_equal(draw_sketch(30, 4, 2, seed=9).Q, draw_sketch(30, 4, 2, seed=9).Q)

    def test_invalid_sizes(self):
        with pytest.raises(ConfigError):
            draw_sketch(5, 6)
        with pytest.raises(ConfigError):
            draw_sketch(5, 0)


class TestNystromApprox:
    def test_identity(self):
        n, k = 40, 7
        A = SpdMatrix(np.eye(n))
        ap = nystrom_approx(A, k, seed=2)
        assert np.all(np.abs(ap.theta - 1.0) <= 4 * ap.nu)
        assert abs(approx_errors(A, ap).total_error - 1.0) <= 1e-10

    @pytest.mark.xfail(
        strict=True,
        reason="the nu-shift itself moves the recovered subspace by O(nu * cond(Q_1)^2); 10*nu is out of reach for cond(Q_1) > 1",
    )
    def test_exact_rank_recovery_within_ten_nu(self):
        A = gen_synthetic(SyntheticSpec("noise", 0.0, n=60, r=5, beta=1.0))
        ap = nystrom_approx(A, 5, seed=4)
        assert sym_norm2(A.entries - ap.dense()) <= 10 * ap.nu * A.norm2

    @pytest.mark.parametrize("seed", range(1, 11))
    def test_exact_rank_recovery(self, seed):
        A = gen_synthetic(SyntheticSpec("noise", 0.0, n=60, r=5, beta=1.0))
        ap = nystrom_approx(A, 5, seed=seed)
        cond_q1 = np.linalg.cond(draw_sketch(60, 5, seed=seed).Q[:5])
        assert sym_norm2(A.entries - ap.dense()) <= 10 * ap.nu * cond_q1**2 * A.norm2

    def test_oversampling_truncates(self):
        ap = nystrom_approx(poly(), 5, l=5, seed=1)
        assert ap.U.shape == (100, 5) and ap.theta.shape == (5,)
        np.testing.assert_allclose(ap.U.T @ ap.U, np.eye(5), atol=1e-12)

    def test_theta_nonnegative_sorted(self):
        ap = nystrom_approx(poly(1e3), 12, up=builtin_format("fp16"), seed=5)
        assert np.all(ap.theta >= 0)
        assert np.all(np.diff(ap.theta) <= 0)

    def test_matches_direct_formula(self):
        # oracle: A_N = Y (Q^T Y)^{-1} Y^T with an explicit solve
        A = poly(1.0)
        for seed in (1, 2):
            ap = nystrom_approx(A, 8, seed=seed)
            Q = draw_sketch(100, 8, seed=seed).Q
            Y = A.entries @ Q
            direct = Y @ np.linalg.solve(Q.T @ Y, Y.T)
            assert sym_norm2(ap.dense() - direct) <= 1e-10 * A.norm2

    def test_error_between_optimal_and_expected_bound(self):
        A = poly(1.0)
        k = 6
        errs = [approx_errors(A, nystrom_approx(A, k, seed=s)).total_error for s in range(1, 11)]
        lam = A.spectrum()
        assert lam[k] * (1 - 1e-12) <= np.mean(errs) <= expected_exact_error_bound(lam, k)

    def test_zero_matrix_fails_cholesky(self):
        with pytest.raises(CholeskyError):
            nystrom_approx(SpdMatrix(np.zeros((10, 10))), 2)

    def test_overflow_reported(self):
        with pytest.raises(FormatOverflowError):
            nystrom_approx(poly(1e6), 3, up=builtin_format("fp16"))

    def test_low_precision_close_to_reference(self):
        A = poly(1.0)
        ref = nystrom_approx(A, 5, seed=3)
        for name in ("fp32", "fp16"):
            ap = nystrom_approx(A, 5, up=builtin_format(name), seed=3)
            err = approx_errors(A, ap, ref).finite_precision_error
            assert 0 < err <= 100 * 100 * builtin_format(name).unit_roundoff * A.norm2

    def test_roundio_mode_runs(self):
        ap = nystrom_approx(poly(), 4, up=builtin_format("fp16"), mode="roundio", seed=1)
        assert ap.mode is MatmulMode.ROUND_IO


class TestReconstructAndErrors:
    def test_zero_theta(self):
        ap = NystromApprox(np.eye(4)[:, :2], np.zeros(2), 0.0, 2, 0, FP64, 0, MatmulMode.PER_OP)
        np.testing.assert_array_equal(reconstruct(ap).entries, np.zeros((4, 4)))

    def test_single_direction(self):
        ap = NystromApprox(np.eye(3)[:, :1], np.array([2.0]), 0.0, 1, 0, FP64, 0, MatmulMode.PER_OP)
        expected = np.zeros((3, 3))
        expected[0, 0] = 2.0
        np.testing.assert_array_equal(reconstruct(ap).entries, expected)

    def test_reconstruction_psd(self):
        ap = nystrom_approx(poly(1e2), 10, up=builtin_format("fp16"), seed=8)
        assert np.linalg.eigvalsh(ap.dense()).min() >= -1e-12 * ap.theta[0]

    def test_self_reference(self):
        A = poly(1e2)
        ap = nystrom_approx(A, 6, seed=2)
        assert approx_errors(A, ap, ap).finite_precision_error <= 1e-14 * A.norm2

    def test_reference_must_match(self):
        A = poly()
        with pytest.raises(ValueError, match="share"):
            approx_errors(A, nystrom_approx(A, 3, seed=1), nystrom_approx(A, 3, seed=2))
        with pytest.raises(ValueError, match="fp64"):
            fp16 = builtin_format("fp16")
            approx_errors(A, nystrom_approx(A, 3, seed=1), nystrom_approx(A, 3, up=fp16, seed=1))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        ap = nystrom_approx(poly(), 4, l=2, up=builtin_format("fp16"), seed=6)
        p = tmp_path / "ap.txt"
        save_approx(ap, p)
        back = load_approx(p)
        np.testing.assert_array_equal(back.U, ap.U)
        np.testing.assert_array_equal(back.theta, ap.theta)
        assert (back.nu, back.k, back.l, back.seed, back.up, back.mode) == (ap.nu, ap.k, ap.l, ap.seed, ap.up, ap.mode)

    def test_malformed(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("3 1\n0.5\n")
        with pytest.raises(ConfigError):
            load_approx(p)

import math

import numpy as np
import pytest

from nystrom_mp import (
    ConfigError,
    MatrixMarketError,
    NotPsdError,
    SpdMatrix,
    SyntheticSpec,
    gen_gaussian_kernel,
    gen_synthetic,
    load_matrix_market,
    save_matrix_market,
    spectrum,
)
from nystrom_mp.matrices import load_features_csv, synthetic_diagonal, write_spectrum_csv


class TestSpdMatrix:
    def test_symmetrizes_and_freezes(self):
        A = SpdMatrix([[2.0, 1.0], [1.0 + 1e-14, 2.0]])
        assert A.entries[0, 1] == A.entries[1, 0]
        with pytest.raises(ValueError):
            A.entries[0, 0] = 5.0

    def test_rejects_indefinite(self):
        with pytest.raises(NotPsdError):
            SpdMatrix([[1.0, 0.0], [0.0, -1.0]])

    def test_rejects_nonsquare_and_nonfinite(self):
        with pytest.raises(ValueError):
            SpdMatrix(np.ones((2, 3)))
        with pytest.raises(ValueError):
            SpdMatrix([[np.inf]])

    def test_spectrum_sorted_descending(self):
        assert list(spectrum(SpdMatrix(np.diag([3.0, 1.0, 2.0])))) == [3.0, 2.0, 1.0]

    def test_norm_and_shift(self):
        A = SpdMatrix(np.diag([4.0, 1.0]))
        assert A.norm2 == 4.0 and A.lambda_min == 1.0
        np.testing.assert_array_equal(A.shifted(0.5), np.diag([4.5, 1.5]))


class TestSynthetic:
    def test_poly_decay(self):
        d = synthetic_diagonal(SyntheticSpec("poly", 1.0, n=100, r=10, beta=1.0))
        expected = np.concatenate([np.ones(10), 1.0 / np.arange(2, 92)])
        np.testing.assert_array_equal(d, expected)

    def test_exp_decay(self):
        d = synthetic_diagonal(SyntheticSpec("exp", 1.0, n=100, r=10, beta=1.0))
        assert d[10] == 0.1
        assert d[11] == 10.0**-2

    def test_noise_free(self):
        A = gen_synthetic(SyntheticSpec("noise", 0.0, n=20, r=5, beta=3.0))
        np.testing.assert_array_equal(A.entries, np.diag([3.0] * 5 + [0.0] * 15))

    def test_noise_shifts_top_eigenvalue_slightly(self):
        A = gen_synthetic(SyntheticSpec("noise", 1e-2, n=100, r=10, beta=1.0, seed=1))
        assert 1.0 <= A.spectrum()[0] <= 1.05

    def test_norm_equals_beta(self):
        for kind, param in (("exp", 0.25), ("poly", 2.0)):
            assert gen_synthetic(SyntheticSpec(kind, param, beta=1e3)).norm2 == 1e3

    @pytest.mark.parametrize(
        "kwargs",
        [dict(kind="cubic", param=1.0), dict(kind="poly", param=-1.0), dict(kind="poly", param=1.0, r=0), dict(kind="noise", param=-1.0)],
    )
    def test_invalid_specs(self, kwargs):
        with pytest.raises(ConfigError):
            SyntheticSpec(**kwargs)


class TestKernel:
    def test_known_entry(self):
        A = gen_gaussian_kernel(np.array([[0.0], [1.0]]), 0.5)
        assert A.entries[0, 0] == 1.0
        assert math.isclose(A.entries[0, 1], math.exp(-2.0), rel_tol=1e-15)

    def test_identical_rows(self):
        A = gen_gaussian_kernel(np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]), 1.0)
        assert A.entries[0, 1] == 1.0

    def test_matches_direct_formula(self, rng):
        Y = rng.standard_normal((30, 4))
        A = gen_gaussian_kernel(Y, 0.7)
        i, j = 3, 17
        direct = math.exp(-np.sum((Y[i] - Y[j]) ** 2) / (2 * 0.7**2))
        assert math.isclose(A.entries[i, j], direct, rel_tol=1e-12)

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            gen_gaussian_kernel(np.zeros((2, 1)), 0.0)

    def test_features_csv(self, tmp_path):
        p = tmp_path / "y.csv"
        p.write_text("# header\n0,1\n2,3\n")
        np.testing.assert_array_equal(load_features_csv(p), [[0, 1], [2, 3]])
        p.write_text("0,1\n2\n")
        with pytest.raises(ConfigError):
            load_features_csv(p)


class TestMatrixMarket:
    def test_reads_lower_triangle(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 3\n1 1 2\n2 1 1\n2 2 2\n")
        np.testing.assert_array_equal(load_matrix_market(p).entries, [[2.0, 1.0], [1.0, 2.0]])

    def test_round_trip(self, tmp_path, rng):
        G = rng.standard_normal((12, 12))
        a = G @ G.T
        a[np.abs(a) < 1.0] = 0.0
        a += 20 * np.eye(12)
        p = tmp_path / "r.mtx"
        save_matrix_market(a, p, comment="test")
        np.testing.assert_array_equal(load_matrix_market(p).entries, a)

    def test_integer_field(self, tmp_path):
        p = tmp_path / "i.mtx"
        p.write_text("%%MatrixMarket matrix coordinate integer symmetric\n1 1 1\n1 1 7\n")
        assert load_matrix_market(p).entries[0, 0] == 7.0

    @pytest.mark.parametrize(
        "body, fragment",
        [
            ("%%MatrixMarket matrix array real symmetric\n1 1\n1\n", "coordinate"),
            ("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n", "symmetric"),
            ("%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1 0\n", "field"),
            ("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n", "declared 2"),
            ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1\n", "outside"),
            ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 x\n", ":3:"),
            ("hello\n", "header"),
        ],
    )
    def test_malformed(self, tmp_path, body, fragment):
        p = tmp_path / "bad.mtx"
        p.write_text(body)
        with pytest.raises(MatrixMarketError, match=fragment):
            load_matrix_market(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MatrixMarketError, match="nope.mtx"):
            load_matrix_market(tmp_path / "nope.mtx")

    def test_spectrum_csv(self, tmp_path):
        p = tmp_path / "s.csv"
        write_spectrum_csv([3.0, 0.5], p)
        assert p.read_text() == "k,lambda_k\n1,3\n2,0.5\n"

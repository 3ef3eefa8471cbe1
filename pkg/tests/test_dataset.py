import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from regcompare.dataset import (Dataset, DatasetError, GeneratorProfile, SplitSpec,
                                correlation_matrix, generate_synthetic, histogram, load_csv,
                                pearson, skewness, split_indices, summarize, train_test_split)

TABLE2 = """$n_i^{0.8}$,inv_n,$d_i^{0.99}$,$d_i^{0.98}$,$d_i^{0.97}$,$d_i^{0.80}$
1935,0.0005168,0.009260363,0.006162207,0.004907865,0.003719588
1836,0.00054466,0.008406241,0.005927148,0.004872629,0.003975488
1801,0.00055525,0.009136795,0.006179498,0.005038435,0.004043477
1642,0.00060901,0.009246823,0.006631469,0.005672362,0.004429832
"""

finite = st.floats(-1e6, 1e6, allow_nan=False)


def _write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_sample_table(self, tmp_path):
        ds = load_csv(_write(tmp_path, TABLE2))
        assert ds.n == 4
        assert ds.column("$d_i^{0.99}$")[0] == 0.009260363
        assert ds.names[2] == "$d_i^{0.99}$"

    def test_header_only(self, tmp_path):
        with pytest.raises(DatasetError, match="empty dataset"):
            load_csv(_write(tmp_path, "a,b\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(DatasetError, match="empty dataset"):
            load_csv(_write(tmp_path, ""))

    def test_nan_cell_names_row(self, tmp_path):
        text = "a,b\n1,2\n3,4\nNaN,6\n"
        with pytest.raises(DatasetError, match="row 3"):
            load_csv(_write(tmp_path, text))

    def test_unparseable_cell(self, tmp_path):
        with pytest.raises(DatasetError, match=r"row 2, column 'b'.*'x'"):
            load_csv(_write(tmp_path, "a,b\n1,2\n3,x\n"))

    def test_ragged_row(self, tmp_path):
        with pytest.raises(DatasetError, match="row 1"):
            load_csv(_write(tmp_path, "a,b\n1\n"))

    def test_duplicate_header(self, tmp_path):
        with pytest.raises(DatasetError, match="duplicate"):
            load_csv(_write(tmp_path, "a,a\n1,2\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="no such file"):
            load_csv(tmp_path / "nope.csv")

    def test_round_trip(self, tmp_path):
        ds = generate_synthetic(30, 3)
        ds.to_csv(tmp_path / "out.csv")
        assert load_csv(tmp_path / "out.csv") == ds


class TestDataset:
    def test_columns_are_read_only(self):
        ds = Dataset({"a": [1.0, 2.0]})
        with pytest.raises(ValueError):
            ds.column("a")[0] = 5.0

    def test_rejects_ragged(self):
        with pytest.raises(DatasetError, match="length"):
            Dataset({"a": [1, 2], "b": [1]})

    def test_rejects_inf(self):
        with pytest.raises(DatasetError, match="row 1"):
            Dataset({"a": [1.0, math.inf]})

    def test_unknown_column(self):
        with pytest.raises(DatasetError, match="unknown column"):
            Dataset({"a": [1.0]}).column("b")

    def test_take_and_matrix(self):
        ds = Dataset({"a": [1, 2, 3], "b": [4, 5, 6]})
        sub = ds.take([2, 0])
        np.testing.assert_array_equal(sub.matrix(["b", "a"]), [[6, 3], [4, 1]])


class TestSummarize:
    def test_symmetric(self):
        s = summarize([1, 2, 3, 4, 5])
        assert s.skewness == 0.0
        assert (s.mean, s.median, s.q1, s.q3) == (3.0, 3.0, 2.0, 4.0)
        assert s.std_dev == pytest.approx(math.sqrt(2.5))

    def test_constant(self):
        s = summarize([7, 7, 7])
        assert s.std_dev == 0.0
        assert s.skewness == 0.0

    def test_lognormal_skew_matches_independent_formula(self):
        x = np.exp(np.random.default_rng(12345).standard_normal(1000))
        g = summarize(x).skewness
        # adjusted Fisher-Pearson estimator, as computed by scipy
        assert g == pytest.approx(stats.skew(x, bias=False), rel=1e-10)
        assert 4.0 <= g <= 8.0

    @given(arrays(float, st.integers(3, 40), elements=finite))
    def test_matches_numpy(self, x):
        s = summarize(x)
        assert s.n == x.size
        assert s.min <= s.q1 <= s.median <= s.q3 <= s.max
        assert s.mean == pytest.approx(np.mean(x), rel=1e-12, abs=1e-9)

    @given(arrays(float, st.integers(3, 30), elements=st.floats(-100, 100)),
           st.floats(0.1, 10), st.floats(-50, 50))
    def test_skewness_affine_invariant(self, x, a, b):
        if np.ptp(x) < 1e-3:
            return
        assert skewness(a * x + b) == pytest.approx(skewness(x), abs=1e-7)

    def test_empty(self):
        with pytest.raises(DatasetError):
            summarize([])


class TestPearson:
    def test_identity_and_flip(self):
        x = np.array([1.0, 4.0, 2.0, 8.0])
        assert pearson(x, x) == 1.0
        assert pearson(x, -x) == -1.0

    def test_hand_value(self):
        # cov = 1.5, sxx = 2, syy = 4.6667
        assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.9819805, abs=1e-6)

    def test_constant_rejected(self):
        with pytest.raises(DatasetError, match="constant"):
            pearson([1, 1, 1], [1, 2, 3])

    @given(arrays(float, st.integers(3, 30), elements=st.floats(-100, 100)),
           arrays(float, st.integers(3, 30), elements=st.floats(-100, 100)))
    def test_matches_numpy(self, x, y):
        n = min(x.size, y.size)
        x, y = x[:n], y[:n]
        if np.std(x) < 1e-6 or np.std(y) < 1e-6:
            return
        assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-9)


class TestCorrelationMatrix:
    def test_identical_columns(self):
        ds = Dataset({"a": [1, 2, 4], "b": [1, 2, 4]})
        assert correlation_matrix(ds, ["a", "b"]).r[0, 1] == pytest.approx(1.0)

    def test_residualized_pair(self, rng):
        x = rng.standard_normal(50)
        z = rng.standard_normal(50)
        xc = x - x.mean()
        zc = z - z.mean()
        z_perp = zc - (xc @ zc) / (xc @ xc) * xc
        r = correlation_matrix(Dataset({"x": x, "z": z_perp}), ["x", "z"]).r
        assert abs(r[0, 1]) <= 1e-12
        np.testing.assert_array_equal(np.diag(r), [1.0, 1.0])

    def test_constant_column_named(self):
        ds = Dataset({"a": [1, 2, 3], "b": [5, 5, 5]})
        with pytest.raises(DatasetError, match="'b'"):
            correlation_matrix(ds, ["a", "b"])

    def test_synthetic_d98_d97(self):
        ds = generate_synthetic(124, 1)
        r = correlation_matrix(ds, ["d99", "d98", "d97"]).r
        assert abs(r[1, 2] - 0.98) <= 0.03
        np.testing.assert_allclose(r, r.T)


class TestHistogram:
    def test_even_split(self):
        np.testing.assert_array_equal(histogram([0, 1, 2, 3], 2).counts, [2, 2])

    def test_edge_assignment(self):
        # 0.5 sits on the inner edge and goes right
        np.testing.assert_array_equal(histogram([0, 0.4, 0.5, 1], 2).counts, [2, 2])

    def test_constant(self):
        h = histogram([3.0] * 5, 3)
        assert h.counts.tolist() == [5]

    def test_bad_bins(self):
        with pytest.raises(DatasetError):
            histogram([1, 2], 0)

    @given(arrays(float, st.integers(1, 60), elements=finite), st.integers(1, 20))
    def test_counts_cover_everything(self, x, bins):
        h = histogram(x, bins)
        assert h.counts.sum() == x.size
        assert h.bin_edges[0] == x.min() and h.bin_edges[-1] == x.max()
        assert np.all(np.diff(h.bin_edges) >= 0)


class TestSplit:
    def test_deterministic(self):
        a = split_indices(10, SplitSpec(0.2, 42))
        b = split_indices(10, SplitSpec(0.2, 42))
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u, v)

    def test_ceiling_rule(self):
        train, test = split_indices(124, SplitSpec(0.2, 0))
        assert (train.size, test.size) == (100, 24)

    def test_too_small(self):
        with pytest.raises(DatasetError, match="at least 2"):
            split_indices(5, SplitSpec(0.9, 0))

    @given(st.integers(3, 300), st.floats(0.01, 0.6), st.integers(0, 2**32 - 1))
    def test_partition(self, n, f, seed):
        train, test = split_indices(n, SplitSpec(f, seed))
        both = np.concatenate([train, test])
        assert sorted(both.tolist()) == list(range(n))
        assert train.size == math.ceil(round(n * (1 - f), 9))

    def test_dataset_split(self):
        ds = generate_synthetic(20, 0)
        tr, te = train_test_split(ds, SplitSpec(0.25, 1))
        assert (tr.n, te.n) == (15, 5)


class TestSynthetic:
    def test_deterministic(self):
        a = generate_synthetic(124, 1)
        b = generate_synthetic(124, 1)
        assert a == b
        assert a.matrix(a.names).tobytes() == b.matrix(b.names).tobytes()

    def test_seeds_differ(self):
        assert generate_synthetic(50, 1) != generate_synthetic(50, 2)

    def test_predictor_skew(self):
        ds = generate_synthetic(124, 1)
        for c in ("d99", "d98", "d97"):
            assert summarize(ds.column(c)).skewness > 2.0

    def test_shape_and_scale(self):
        ds = generate_synthetic(124, 1)
        assert ds.names == ["d99", "d98", "d97", "d80"]
        X = ds.matrix(ds.names)
        assert np.all(X > 0)
        assert 1e-3 < np.median(X) < 1e-2

    def test_profile_changes_output(self):
        a = generate_synthetic(40, 0, GeneratorProfile(noise=0.0))
        b = generate_synthetic(40, 0)
        np.testing.assert_array_equal(a.column("d97"), b.column("d97"))
        assert not np.array_equal(a.column("d80"), b.column("d80"))

    def test_too_few_rows(self):
        with pytest.raises(DatasetError):
            generate_synthetic(5, 0)

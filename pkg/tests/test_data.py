import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dartboost import Dataset, QueryGroups, load_csv, load_svmlight, save_svmlight, subsample_rows
from dartboost.errors import DataFormatError, LabelDomainError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_basic(self, tmp_path):
        ds = load_csv(write(tmp_path, "a.csv", "f1,f2,y\n1,2,5\n3,4,6"), "y")
        assert (ds.n_rows, ds.n_features) == (2, 2)
        np.testing.assert_array_equal(ds.labels, [5, 6])
        np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4]])
        assert ds.feature_names == ("f1", "f2")

    def test_label_by_index_and_no_header(self, tmp_path):
        ds = load_csv(write(tmp_path, "a.csv", "5,1,2\n6,3,4\n"), 0, has_header=False)
        np.testing.assert_array_equal(ds.labels, [5, 6])
        np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4]])

    def test_nan_cell_names_row_and_column(self, tmp_path):
        with pytest.raises(DataFormatError, match=r"line 3, column 2"):
            load_csv(write(tmp_path, "a.csv", "f1,f2,y\n1,2,5\n3,nan,6\n"), "y")

    @pytest.mark.parametrize("text", ["", "f1,y\n"])
    def test_no_data_rows(self, tmp_path, text):
        with pytest.raises(DataFormatError, match="no data rows"):
            load_csv(write(tmp_path, "a.csv", text), "y")

    def test_non_numeric(self, tmp_path):
        with pytest.raises(DataFormatError, match="non-numeric.*'abc'"):
            load_csv(write(tmp_path, "a.csv", "f1,y\nabc,1\n"), "y")

    def test_ragged(self, tmp_path):
        with pytest.raises(DataFormatError, match="line 3"):
            load_csv(write(tmp_path, "a.csv", "f1,y\n1,2\n1,2,3\n"), "y")

    def test_missing_label_column(self, tmp_path):
        with pytest.raises(DataFormatError, match="'z' not found"):
            load_csv(write(tmp_path, "a.csv", "f1,y\n1,2\n"), "z")

    def test_io_failure(self, tmp_path):
        with pytest.raises(DataFormatError, match="cannot read"):
            load_csv(tmp_path / "missing.csv")

    def test_group_column(self, tmp_path):
        ds = load_csv(write(tmp_path, "a.csv", "pid,f,y\n7,1,2\n7,2,3\n9,5,1\n"), "y", group_column="pid")
        assert ds.n_features == 1
        assert list(ds.entity_ids) == ["7", "7", "9"]


class TestLoadSvmlight:
    def test_qid_line(self, tmp_path):
        ds = load_svmlight(write(tmp_path, "a.svm", "2 qid:1 1:0.5 3:1.0\n"), expect_qid=True)
        np.testing.assert_array_equal(ds.features, [[0.5, 0.0, 1.0]])
        np.testing.assert_array_equal(ds.labels, [2])
        assert ds.query_groups.qids == (1,)
        np.testing.assert_array_equal(ds.query_groups.offsets, [0, 1])

    def test_groups_and_comments(self, tmp_path):
        text = "# header\n1 qid:4 1:1 # doc a\n0 qid:4 2:1\n\n3 qid:2 1:2\n"
        ds = load_svmlight(write(tmp_path, "a.svm", text), expect_qid=True)
        np.testing.assert_array_equal(ds.query_groups.offsets, [0, 2, 3])
        assert ds.query_groups.qids == (4, 2)

    def test_non_contiguous_qid(self, tmp_path):
        text = "1 qid:1 1:1\n1 qid:1 1:1\n0 qid:2 1:1\n1 qid:1 1:2\n"
        with pytest.raises(DataFormatError, match="non-contiguous query id 1"):
            load_svmlight(write(tmp_path, "a.svm", text), expect_qid=True)

    def test_malformed_token(self, tmp_path):
        with pytest.raises(DataFormatError, match=r"line 1.*'2:abc'"):
            load_svmlight(write(tmp_path, "a.svm", "1 2:abc\n"))

    def test_decreasing_indices(self, tmp_path):
        with pytest.raises(DataFormatError, match="strictly increasing"):
            load_svmlight(write(tmp_path, "a.svm", "1 3:1 2:1\n"))

    def test_missing_qid(self, tmp_path):
        with pytest.raises(DataFormatError, match="missing qid"):
            load_svmlight(write(tmp_path, "a.svm", "1 1:1\n"), expect_qid=True)

    def test_qid_ignored_when_not_expected(self, tmp_path):
        ds = load_svmlight(write(tmp_path, "a.svm", "1 qid:3 1:1\n0 qid:1 1:2\n1 qid:3 1:3\n"))
        assert ds.query_groups is None

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(12, 5)) * 10.0 ** rng.integers(-300, 300, size=(12, 5))
        X[0, 4] = 0.0
        X[1, 1] = -0.0
        y = rng.integers(0, 5, size=12).astype(float)
        ds = Dataset(X, y, QueryGroups.from_sizes([3, 4, 5], (10, 2, 7)))
        path = tmp_path / "rt.svm"
        save_svmlight(ds, path)
        back = load_svmlight(path, expect_qid=True)
        assert back.features.tobytes() == ds.features.tobytes()
        assert back.labels.tobytes() == ds.labels.tobytes()
        assert back.query_groups == ds.query_groups


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="0123456789 .:-qidnaNIf#\n\te", max_size=80))
def test_svmlight_fuzz_only_typed_errors(tmp_path_factory, text):
    path = tmp_path_factory.mktemp("fuzz") / "f.svm"
    path.write_text(text)
    for expect in (False, True):
        try:
            ds = load_svmlight(path, expect_qid=expect)
        except DataFormatError:
            continue
        assert np.all(np.isfinite(ds.features)) and np.all(np.isfinite(ds.labels))
        assert len(ds.labels) == ds.n_rows


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="0123456789,.-naif\n\"y", max_size=60))
def test_csv_fuzz_only_typed_errors(tmp_path_factory, text):
    path = tmp_path_factory.mktemp("fuzz") / "f.csv"
    path.write_text(text)
    try:
        ds = load_csv(path, -1, has_header=False)
    except DataFormatError:
        return
    assert np.all(np.isfinite(ds.features)) and ds.labels.shape == (ds.n_rows,)


class TestDatasetInvariants:
    def test_immutable(self, regression):
        with pytest.raises(ValueError):
            regression.features[0, 0] = 1.0

    def test_rejects_inf(self):
        with pytest.raises(DataFormatError):
            Dataset([[1.0], [np.inf]], [0, 1])

    def test_groups_must_cover_rows(self):
        with pytest.raises(DataFormatError):
            Dataset([[1.0], [2.0]], [0, 1], QueryGroups.from_sizes([1]))

    @pytest.mark.parametrize("offsets", [[1, 2], [0, 2, 2], [0]])
    def test_bad_offsets(self, offsets):
        with pytest.raises(DataFormatError):
            QueryGroups(np.array(offsets))

    def test_relevance_grades(self):
        Dataset([[0.0]] * 3, [0, 4, 31]).check_relevance_grades()
        for bad in (1.5, -1, 32):
            with pytest.raises(LabelDomainError):
                Dataset([[0.0]], [bad]).check_relevance_grades()

    def test_sorted_index(self):
        ds = Dataset([[3.0, 1.0], [1.0, 1.0], [2.0, 0.0]], [0, 0, 0])
        np.testing.assert_array_equal(ds.sorted_index, [[1, 2, 0], [2, 0, 1]])

    def test_take_keeps_whole_groups(self, ranking):
        offs = ranking.query_groups.offsets
        rows = np.concatenate([np.arange(offs[2], offs[3]), np.arange(offs[0], offs[1])])
        sub = ranking.take(rows)
        assert sub.query_groups.n_groups == 2
        with pytest.raises(DataFormatError):
            ranking.take(np.arange(offs[0], offs[1] - 1))


class TestSubsample:
    def test_identity(self):
        np.testing.assert_array_equal(subsample_rows(100, 1.0, np.random.default_rng(0)), np.arange(100))

    def test_cardinality(self):
        idx = subsample_rows(100, 0.25, np.random.default_rng(7))
        assert len(idx) == 25 and len(set(idx.tolist())) == 25
        assert idx.min() >= 0 and idx.max() < 100

    def test_never_empty_exhaustive(self):
        for n in range(1, 30):
            for frac in (1e-6, 0.01, 0.1, 0.33, 0.5, 0.99):
                for seed in range(5):
                    idx = subsample_rows(n, frac, np.random.default_rng(seed))
                    assert 1 <= len(idx) <= n
        assert len(subsample_rows(3, 0.01, np.random.default_rng(1))) == 1

    def test_deterministic(self):
        a = subsample_rows(1000, 0.3, np.random.default_rng(11))
        b = subsample_rows(1000, 0.3, np.random.default_rng(11))
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("frac", [0.0, -0.1, 1.5])
    def test_bad_fraction(self, frac):
        with pytest.raises(ValueError):
            subsample_rows(10, frac, np.random.default_rng(0))

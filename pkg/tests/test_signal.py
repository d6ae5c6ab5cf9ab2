import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from pgvar.errors import (
    DegenerateScaleError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
    InvalidShapeError,
    SequenceFormatError,
)
from pgvar.signal import (
    PreprocessTransform,
    SignalSequence,
    flatten_matrix,
    load_sequence,
    preprocess,
    reshape_to_matrix,
    save_sequence,
    split_series,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestSequence:
    def test_accessors(self):
        data = np.arange(12.0).reshape(2, 6)  # N=3, F=2
        seq = SignalSequence(data, 3, 2)
        assert (seq.n_steps, seq.dim) == (2, 6)
        assert seq.node_signal(1, 2).tolist() == [10.0, 11.0]
        assert seq.feature_signal(0, 1).tolist() == [1.0, 3.0, 5.0]
        assert seq.channel(0).tolist() == [[0, 2, 4], [6, 8, 10]]

    def test_copy_and_read_only(self):
        data = np.zeros((2, 2))
        seq = SignalSequence(data, 2)
        data[0, 0] = 1.0
        assert seq.data[0, 0] == 0.0
        with pytest.raises(ValueError):
            seq.data[0, 0] = 5.0

    def test_validation(self):
        with pytest.raises(InvalidShapeError):
            SignalSequence(np.zeros((3, 5)), 2, 2)
        with pytest.raises(InvalidShapeError):
            SignalSequence(np.zeros(4), 4)
        with pytest.raises(InvalidInputError):
            SignalSequence(np.array([[1.0, np.nan]]), 2)


class TestPreprocess:
    def test_hand_case(self):
        seq, tr = preprocess(SignalSequence(np.array([[1.0], [3.0]]), 1))
        assert seq.data.ravel().tolist() == [-1.0, 1.0]
        assert tr.mean.tolist() == [2.0] and tr.scale == 1.0

    @given(hnp.arrays(float, st.tuples(st.integers(2, 12), st.integers(1, 6)), elements=finite))
    @settings(max_examples=80, deadline=None)
    def test_properties(self, data):
        seq = SignalSequence(data, data.shape[1])
        centred = data - data.mean(axis=0)
        noise = data.shape[0] * np.finfo(float).eps * np.max(np.abs(data))
        if np.max(np.abs(centred)) <= noise:
            with pytest.raises(DegenerateScaleError):
                preprocess(seq)
            return
        out, tr = preprocess(seq)
        assert np.max(np.abs(out.data)) == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_allclose(out.data.mean(axis=0), 0.0, atol=1e-12)
        back = tr.invert(out.data)
        np.testing.assert_allclose(back, data, rtol=1e-12, atol=1e-12 * tr.scale)

    def test_idempotent(self, rng):
        once, _ = preprocess(SignalSequence(rng.normal(size=(30, 8)), 4, 2))
        twice, tr = preprocess(once)
        np.testing.assert_allclose(twice.data, once.data, atol=1e-15)
        assert tr.scale == pytest.approx(1.0, abs=1e-15)

    def test_transform_dict_round_trip(self, rng):
        tr = PreprocessTransform(rng.normal(size=4), 2.5)
        tr2 = PreprocessTransform.from_dict(tr.to_dict())
        np.testing.assert_array_equal(tr2.mean, tr.mean)
        assert tr2.scale == tr.scale

    def test_errors(self):
        with pytest.raises(DegenerateScaleError):
            preprocess(SignalSequence(np.ones((5, 3)), 3))
        with pytest.raises(DegenerateScaleError):
            preprocess(SignalSequence(np.full((10, 1), 2.1), 1))
        with pytest.raises(InsufficientDataError):
            preprocess(SignalSequence(np.ones((1, 3)), 3))


class TestReshape:
    def test_hand_case(self):
        # N=2, F=2: x = [a, b, c, d] -> columns are node signals
        y = reshape_to_matrix(np.array([1.0, 2.0, 3.0, 4.0]), 2, 2)
        assert y.tolist() == [[1.0, 3.0], [2.0, 4.0]]
        assert flatten_matrix(y).tolist() == [1.0, 2.0, 3.0, 4.0]

    @given(n=st.integers(1, 6), f=st.integers(1, 4), seed=st.integers(0, 1000))
    def test_round_trip(self, n, f, seed):
        x = np.random.default_rng(seed).normal(size=n * f)
        y = reshape_to_matrix(x, n, f)
        assert y.shape == (f, n)
        for i in range(n):
            np.testing.assert_array_equal(y[:, i], x[i * f:(i + 1) * f])
        np.testing.assert_array_equal(flatten_matrix(y), x)

    def test_bad_length(self):
        with pytest.raises(InvalidShapeError):
            reshape_to_matrix(np.zeros(5), 2, 2)


class TestSplit:
    def test_hand_cases(self):
        tr, va, te = split_series(59, 0.9, 0.7)
        assert (tr.size, va.size, te.size) == (37, 16, 6)
        tr, va, te = split_series(10, 0.5, 0.4)
        assert tr.tolist() == [0, 1] and va.tolist() == [2, 3, 4] and te.tolist() == [5, 6, 7, 8, 9]

    def test_exhaustive_small(self):
        for T in range(1, 31):
            for a in (0.3, 0.5, 0.7, 0.9):
                for b in (0.2, 0.5, 0.7):
                    for lag in (0, 1, 2):
                        n_in = math.floor(a * T)
                        n_tr = math.floor(b * n_in)
                        sizes = (n_tr, n_in - n_tr, T - n_in)
                        if min(sizes) < lag + 1:
                            with pytest.raises(InsufficientDataError):
                                split_series(T, a, b, lag)
                            continue
                        segs = split_series(T, a, b, lag)
                        assert tuple(s.size for s in segs) == sizes
                        assert np.concatenate(segs).tolist() == list(range(T))

    def test_offending_segment_named(self):
        with pytest.raises(InsufficientDataError) as e:
            split_series(10, 0.9, 0.7, max_lag=3)
        assert e.value.segment in {"validation", "test"}

    @pytest.mark.parametrize("a, b", [(0.0, 0.5), (1.0, 0.5), (0.5, 1.0), (0.5, -0.1)])
    def test_bad_fractions(self, a, b):
        with pytest.raises(InvalidParameterError):
            split_series(20, a, b)


class TestCsv:
    def test_example_layout(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("t,v0,v1,v2,v3\n0,1.0,2.0,3.0,4.0\n1,5,6,7,8\n")
        seq = load_sequence(p, n_features=2)
        assert (seq.n_nodes, seq.n_features, seq.n_steps) == (2, 2, 2)
        assert seq.node_signal(1, 1).tolist() == [7.0, 8.0]

    def test_bitwise_round_trip(self, tmp_path, rng):
        seq = SignalSequence(rng.normal(size=(7, 6)) * 10.0 ** rng.integers(-20, 20, (7, 6)), 3, 2)
        save_sequence(seq, tmp_path / "s.csv")
        back = load_sequence(tmp_path / "s.csv", n_features=2)
        assert back.data.tobytes() == seq.data.tobytes()

    def test_times(self, tmp_path):
        seq = SignalSequence(np.ones((3, 1)), 1)
        save_sequence(seq, tmp_path / "s.csv", times=[4, 5, 9])
        _, t = load_sequence(tmp_path / "s.csv", return_times=True)
        assert t.tolist() == [4, 5, 9]

    @pytest.mark.parametrize(
        "body, row",
        [
            ("t,v0,v1\n0,1,2\n1,3\n", 2),
            ("t,v0\n0,1\n1,nan\n", 2),
            ("t,v0\n0,1\n0,2\n", 2),
            ("t,v0\n0,x\n", 1),
        ],
    )
    def test_format_errors(self, tmp_path, body, row):
        p = tmp_path / "s.csv"
        p.write_text(body)
        with pytest.raises(SequenceFormatError) as e:
            load_sequence(p)
        assert e.value.row == row

    def test_header_and_divisibility(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("a,b\n0,1\n")
        with pytest.raises(SequenceFormatError):
            load_sequence(p)
        p.write_text("t,v0,v1,v2\n0,1,2,3\n")
        with pytest.raises(SequenceFormatError):
            load_sequence(p, n_features=2)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emgwin.windowing import FrameSet, WindowParams, frame_count, label_runs, segment, segment_many


def brute_force_starts(run_length, window, stride):
    starts, s = [], 0
    while s + window <= run_length:
        starts.append(s)
        s += stride
    return starts


@pytest.mark.parametrize("f, overlap, stride", [(0, 0, 125), (0.25, 31, 94), (0.5, 62, 63),
                                                (0.75, 93, 32)])
def test_overlap_floor_t125(f, overlap, stride):
    p = WindowParams(125, f)
    assert (p.overlap, p.stride) == (overlap, stride)


def test_overlap_is_floored_for_fractional_products():
    assert WindowParams(150, 0.75).overlap == 112
    assert WindowParams(175, 0.5).overlap == 87


@pytest.mark.parametrize("r, t, f, expected", [
    (125, 125, 0.0, 1),
    (1000, 125, 0.0, 8),
    (1000, 125, 0.75, 28),
    (5120, 150, 0.75, 131),
    (5120, 175, 0.5, 57),
    (124, 125, 0.0, 0),
    (0, 8, 0.5, 0),
])
def test_frame_count_examples(r, t, f, expected):
    assert frame_count(r, WindowParams(t, f)) == expected


@pytest.mark.parametrize("t, f", [(0, 0), (-3, 0), (8, 1.0), (8, -0.1), (2.5, 0)])
def test_window_params_rejects_invalid(t, f):
    with pytest.raises(ValueError):
        WindowParams(t, f)


def test_label_runs():
    assert label_runs([0, 0, 1, 1, 1, 0]) == [(0, 2, 0), (2, 5, 1), (5, 6, 0)]
    assert label_runs([]) == []


def test_single_run_of_exact_length_gives_one_frame(make_recording):
    rec = make_recording(np.full(125, 2))
    fs = segment(rec, WindowParams(125, 0.75))
    assert len(fs) == 1
    assert fs.labels.tolist() == [2]
    np.testing.assert_array_equal(fs.get([0])[0], rec.samples.astype(np.float64))


def test_frames_never_cross_label_boundaries(make_recording):
    labels = np.repeat([0, 1, 0, 3, 3, 4], [300, 170, 90, 60, 200, 400])
    rec = make_recording(labels)
    fs = segment(rec, WindowParams(64, 0.5))
    for lab, st_ in zip(fs.labels, fs.starts):
        assert np.all(rec.labels[st_:st_ + 64] == lab)


def test_consecutive_frames_share_overlap_columns(make_recording):
    rec = make_recording(np.zeros(2000))
    p = WindowParams(150, 0.75)
    data = segment(rec, p).data
    for a, b in zip(data[:-1], data[1:]):
        np.testing.assert_array_equal(a[:, p.stride:], b[:, :p.overlap])


def test_frame_data_is_immutable_copy(make_recording):
    rec = make_recording(np.zeros(300))
    fs = segment(rec, WindowParams(100, 0.0))
    before = fs.data.copy()
    rec.samples.setflags(write=True)
    rec.samples[:] = 0.0
    np.testing.assert_array_equal(fs.data, before)
    with pytest.raises(ValueError):
        fs.labels[0] = 3


def test_order_is_recording_then_run_then_start(make_recording):
    a = make_recording(np.repeat([1, 2], [40, 40]), seed=1)
    b = make_recording(np.repeat([3], [40]), seed=2, session="R02")
    fs = segment_many([a, b], WindowParams(20, 0.5))
    assert fs.sources.tolist() == [0] * 6 + [1] * 3
    assert fs.starts.tolist() == [0, 10, 20, 40, 50, 60, 0, 10, 20]
    assert fs.labels.tolist() == [1, 1, 1, 2, 2, 2, 3, 3, 3]
    assert fs.record_ids == ("S01/R01", "S01/R02")


def test_subset_and_from_arrays_agree(make_recording):
    rec = make_recording(np.repeat([0, 1], [200, 200]))
    fs = segment(rec, WindowParams(50, 0.25))
    sub = fs.subset([4, 1, 7])
    np.testing.assert_array_equal(sub.data, fs.data[[4, 1, 7]])
    rebuilt = FrameSet.from_arrays(sub.data, sub.labels, sub.sources, sub.starts, sub.params,
                                   sub.record_ids)
    np.testing.assert_array_equal(rebuilt.data, sub.data)
    assert rebuilt.class_counts().tolist() == sub.class_counts().tolist()


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 3000), st.integers(1, 512), st.sampled_from([0.0, 0.25, 0.5, 0.75]))
def test_frame_count_matches_brute_force(r, t, f):
    p = WindowParams(t, f)
    assert frame_count(r, p) == len(brute_force_starts(r, t, p.stride))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(1, 90)), min_size=1, max_size=8),
       st.integers(1, 64), st.sampled_from([0.0, 0.25, 0.5, 0.75]))
def test_segment_emits_frame_count_per_run(runs, t, f):
    labels = np.concatenate([np.full(n, c) for c, n in runs]).astype(np.uint8)
    from emgwin.dataio import EmgRecording

    rec = EmgRecording("S", "R", np.zeros((2, labels.size), np.float32), labels)
    p = WindowParams(t, f)
    fs = segment(rec, p)
    expected = []
    for a, b, lab in label_runs(labels):
        expected += [(lab, a + s) for s in brute_force_starts(b - a, t, p.stride)]
    assert list(zip(fs.labels.tolist(), fs.starts.tolist())) == expected


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 3000), st.integers(1, 400))
def test_total_frames_non_decreasing_in_overlap(r, t):
    counts = [frame_count(r, WindowParams(t, f)) for f in (0.0, 0.25, 0.5, 0.75)]
    assert counts == sorted(counts)

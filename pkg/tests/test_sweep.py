import numpy as np
import pytest

from emgwin import sweep
from emgwin.synthgen import SynthConfig, generate
from emgwin.training import TrainConfig, train
from emgwin.windowing import WindowParams, segment_many

TOY = dict(filters=(2, 2, 4, 4), dense_units=8)
TEMPLATE = TrainConfig(epochs=2, learning_rate=1e-3, seed=11)


@pytest.fixture(scope="module")
def tiny():
    cfg = SynthConfig(seed=3, subjects=2, sessions=1, trials_per_active_class=2,
                      trial_duration=0.5, rest_duration=0.5, sample_rate=256, channels=8)
    return generate(cfg)


def fake(subject, t, f, k, seed, acc, f1=None):
    return sweep.SweepResult(subject, t, f, k, seed, acc, acc if f1 is None else f1,
                             np.full(5, acc))


def test_grid_cells_are_sorted_products():
    g = sweep.SweepGrid()
    cells = g.cells(["S01", "S02", "S03", "S04"])
    assert len(cells) == 3 * 4 * 3 * 4 == 144
    assert cells == sorted(cells) and len(set(cells)) == 144


@pytest.mark.parametrize("kwargs", [dict(windows=()), dict(kernels=(3, 3)), dict(overlaps=(1.0,))])
def test_grid_validation(kwargs):
    with pytest.raises(ValueError):
        sweep.SweepGrid(**kwargs)


def test_cell_seed_is_stable_and_kernel_free():
    a = sweep.cell_seed(0, "S01", 125, 0.75, 0)
    assert a == sweep.cell_seed(0, "S01", 125, 0.75, 0)
    assert len({a, sweep.cell_seed(1, "S01", 125, 0.75, 0), sweep.cell_seed(0, "S02", 125, 0.75, 0),
                sweep.cell_seed(0, "S01", 150, 0.75, 0), sweep.cell_seed(0, "S01", 125, 0.5, 0),
                sweep.cell_seed(0, "S01", 125, 0.75, 1)}) == 6
    assert 0 <= a < 2 ** 63


def test_improvement_delta_reference_example():
    res = [fake("S01", 150, 0.75, 5, 0, 0.9780), fake("S01", 150, 0.0, 5, 0, 0.8904)]
    assert sweep.improvement_delta(res)[(150, 5)] == pytest.approx(8.76, abs=1e-9)
    same = [fake("S01", 150, 0.75, 5, 0, 0.9), fake("S01", 150, 0.0, 5, 0, 0.9)]
    assert sweep.improvement_delta(same)[(150, 5)] == 0.0
    with pytest.raises(KeyError):
        sweep.improvement_delta(res[:1])


def test_improvement_delta_averages_subjects_and_seeds():
    res = [fake(s, 125, f, 3, seed, a) for s, f, seed, a in [
        ("S01", 0.75, 0, 0.9), ("S02", 0.75, 0, 0.8), ("S01", 0.75, 1, 1.0), ("S02", 0.75, 1, 0.7),
        ("S01", 0.0, 0, 0.5), ("S02", 0.0, 0, 0.6), ("S01", 0.0, 1, 0.7), ("S02", 0.0, 1, 0.6)]]
    assert sweep.improvement_delta(res)[(125, 3)] == pytest.approx(25.0)


def test_kernel_trend_reference_row():
    res = [fake("S01", 125, 0.75, k, 0, 0.0, f1) for k, f1 in
           [(3, 0.8949), (5, 0.9530), (7, 0.9593)]]
    row = sweep.kernel_trend(res, "f1")[125]
    assert [round(row[k], 2) for k in (3, 5, 7)] == [89.49, 95.30, 95.93]
    single = sweep.kernel_trend(res[:1], "f1")
    assert list(single[125]) == [3]


def test_results_csv_round_trip(tmp_path):
    cm = np.diag([3, 2, 2, 1, 1])
    r = sweep.SweepResult("S01", 150, 0.75, 5, 0, 0.5, 0.25, np.array([1, 0.5, np.nan, 0, 1]),
                          cm, 1.234)
    sweep.write_results([r], tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == ("subject,window,overlap_frac,kernel,seed,accuracy,f1_macro,"
                        "acc_NM,acc_WS,acc_WP,acc_HO,acc_HC,seconds")
    assert lines[1] == "S01,150,0.75,5,0,50.00,25.00,100.00,50.00,nan,0.00,100.00,1.23"
    (back,) = sweep.read_results(tmp_path / "r.csv")
    assert back.key == r.key and back.accuracy == 0.5
    np.testing.assert_array_equal(back.confusion, cm)
    sweep.write_results([r], tmp_path / "q.csv", record_time=False)
    assert (tmp_path / "q.csv").read_text().splitlines()[1].endswith(",0.00")


def test_read_results_rejects_foreign_csv(tmp_path):
    (tmp_path / "r.csv").write_text("a,b\n1,2\n")
    with pytest.raises(sweep.DataFormatError):
        sweep.read_results(tmp_path / "r.csv")


def test_singleton_grid_equals_direct_train(tiny):
    grid = sweep.SweepGrid(windows=(16,), overlaps=(0.5,), kernels=(3,), seeds=(0,),
                           subjects=("S02",))
    (res,) = sweep.run_grid(tiny, grid, TEMPLATE, **TOY)
    recs = [r for r in tiny if r.subject_id == "S02"]
    frames = segment_many(recs, WindowParams(16, 0.5))
    seed = sweep.cell_seed(TEMPLATE.seed, "S02", 16, 0.5, 0)
    _, rep = train(frames, 16, 3, TrainConfig(epochs=2, learning_rate=1e-3, seed=seed), **TOY)
    assert res.accuracy == rep.test_accuracy and res.f1_macro == rep.test_f1
    np.testing.assert_array_equal(res.confusion, rep.confusion)


def test_grid_rows_resume_and_failures(tiny, tmp_path, monkeypatch):
    grid = sweep.SweepGrid(windows=(16, 24), overlaps=(0.0, 0.5), kernels=(3, 5), seeds=(0,))
    out = tmp_path / "r.csv"
    res = sweep.run_grid(tiny, grid, TEMPLATE, out_path=out, record_time=False, **TOY)
    assert len(res) == 2 * 2 * 2 * 2
    first = out.read_bytes()
    assert len(first.splitlines()) == 17
    assert (tmp_path / "r.confusion.csv").is_file()

    calls = []
    real = sweep.run_cell
    monkeypatch.setattr(sweep, "run_cell", lambda *a, **k: calls.append(a) or real(*a, **k))
    again = sweep.run_grid(tiny, grid, TEMPLATE, out_path=out, record_time=False, **TOY)
    assert calls == [] and len(again) == 16
    assert out.read_bytes() == first

    # drop two rows; only those are recomputed, giving the same bytes
    lines = first.splitlines(keepends=True)
    out.write_bytes(b"".join(lines[:5] + lines[7:]))
    sweep.run_grid(tiny, grid, TEMPLATE, out_path=out, record_time=False, **TOY)
    assert len(calls) == 2
    assert out.read_bytes() == first


def test_failed_cells_are_logged_and_skipped(tiny, tmp_path):
    # T=200 leaves no frames at all in 128-sample trials
    grid = sweep.SweepGrid(windows=(16, 200), overlaps=(0.0,), kernels=(3,), seeds=(0,),
                           subjects=("S01",))
    res = sweep.run_grid(tiny, grid, TEMPLATE, out_path=tmp_path / "r.csv", **TOY)
    assert [r.window for r in res] == [16]
    text = (tmp_path / "r.failures.txt").read_text()
    assert "window=200" in text and text.count("\n") == 1


def test_unknown_subject_rejected(tiny):
    with pytest.raises(sweep.DataFormatError):
        sweep.run_grid(tiny, sweep.SweepGrid(subjects=("S09",)), TEMPLATE, **TOY)


def test_parallel_matches_serial(tiny, tmp_path):
    grid = sweep.SweepGrid(windows=(16,), overlaps=(0.0, 0.5), kernels=(3, 5), seeds=(0, 1))
    sweep.run_grid(tiny, grid, TEMPLATE, out_path=tmp_path / "a.csv", record_time=False, **TOY)
    sweep.run_grid(tiny, grid, TEMPLATE, out_path=tmp_path / "b.csv", jobs=3, record_time=False,
                   **TOY)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert ((tmp_path / "a.confusion.csv").read_bytes()
            == (tmp_path / "b.confusion.csv").read_bytes())


def test_summary_and_curves(tiny, tmp_path):
    grid = sweep.SweepGrid(windows=(16,), overlaps=(0.0,), kernels=(3,), seeds=(0,),
                           subjects=("S01",))
    res = sweep.run_grid(tiny, grid, TEMPLATE, curves_dir=tmp_path / "curves", **TOY)
    files = list((tmp_path / "curves").glob("*.csv"))
    assert [f.name for f in files] == ["curve_S01_T16_f0_k3_s0.csv"]
    ((t, f, k, acc, f1),) = sweep.summary_table(res)
    assert (t, f, k) == (16, 0.0, 3) and acc == pytest.approx(100 * res[0].accuracy)

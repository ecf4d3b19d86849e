"""Tests for the figure builders and their CSV companions."""

import os

import numpy as np
import pytest

from cvepkit.codes import CLASS_SHIFTS, class_codewords
from cvepkit.data import CHANNEL_NAMES, N_CHANNELS, N_SAMPLES, Trial
from cvepkit.io import fmt, read_csv, save_checkpoint, write_csv, write_session_file
from cvepkit.plots import (
    _parse_grid_entry,
    augmentation_grid,
    grand_average,
    kbit_reconstruction,
)


def _write_session(path, n_trials, seed=0):
    rng = np.random.default_rng(seed)
    trials = [Trial(data=rng.normal(size=(N_CHANNELS, N_SAMPLES))
                    .astype(np.float32).astype(np.float64),
                    label=int(rng.integers(0, 6)))
              for _ in range(n_trials)]
    write_session_file(str(path), trials)
    return trials


def test_grand_average_single_trial(tmp_path):
    trials = _write_session(tmp_path / "s.cvep", n_trials=1)
    out = grand_average([str(tmp_path / "s.cvep")], str(tmp_path / "fig"))
    assert [os.path.basename(p) for p in out] == ["grand_average.svg",
                                                  "grand_average.csv"]
    with open(out[0], "rb") as fh:
        assert fh.read(5) == b"<?xml"
    header, rows = read_csv(out[1])
    expect = ["time_s"]
    for name in CHANNEL_NAMES:
        expect.extend([f"{name}_mean", f"{name}_sd"])
    assert header == expect
    assert len(rows) == N_SAMPLES
    assert rows[0][0] == fmt(0.0)
    assert rows[100][0] == fmt(100 / 512.0)
    # one trial: mean is the trial itself and the envelope is zero
    data = trials[0].data
    for i in (0, 17, 400):
        for c in range(N_CHANNELS):
            assert rows[i][1 + 2 * c] == fmt(data[c, i])
            assert rows[i][2 + 2 * c] == fmt(0.0)


def test_grand_average_mean_and_sd(tmp_path):
    _write_session(tmp_path / "a.cvep", n_trials=3, seed=1)
    _write_session(tmp_path / "b.cvep", n_trials=2, seed=2)
    # a directory input picks up both files
    out = grand_average([str(tmp_path)], str(tmp_path / "fig"))
    _, rows = read_csv(out[1])
    from cvepkit.io import read_session_file
    stack = []
    for name in ("a.cvep", "b.cvep"):
        trials, _ = read_session_file(str(tmp_path / name))
        stack.extend(t.data for t in trials)
    data = np.stack(stack)
    assert rows[7][1] == fmt(data[:, 0, 7].mean())
    assert rows[7][2] == fmt(data[:, 0, 7].std(ddof=1))


def test_grand_average_is_deterministic(tmp_path):
    _write_session(tmp_path / "s.cvep", n_trials=2)
    out1 = grand_average([str(tmp_path / "s.cvep")], str(tmp_path / "f1"))
    out2 = grand_average([str(tmp_path / "s.cvep")], str(tmp_path / "f2"))
    for a, b in zip(out1, out2):
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()


def test_grand_average_missing_input(tmp_path):
    with pytest.raises(FileNotFoundError):
        grand_average([str(tmp_path / "nope.cvep")], str(tmp_path))
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(ValueError, match="no .cvep files"):
        grand_average([str(empty)], str(tmp_path))


def test_kbit_reconstruction_perfect_outputs(tmp_path):
    # outputs that equal each trial's codeword align exactly onto the
    # base sequence once unrotated, so mean == bits and sd == 0
    words = class_codewords().astype(np.float32)
    labels = np.array([0, 3, 5, 1, 2, 4, 0, 5], dtype=np.int64)
    path = tmp_path / "f.ckpt"
    save_checkpoint(str(path), {"outputs": words[labels], "labels": labels})
    out = kbit_reconstruction([str(path)], str(tmp_path / "fig"))
    header, rows = read_csv(out[1])
    assert header == ["bit_index", "true_bit", "mean", "sd"]
    assert len(rows) == 63
    base = class_codewords()[0]
    for i, row in enumerate(rows):
        assert row[0] == str(i)
        assert row[1] == str(int(base[i]))
        assert row[2] == fmt(float(base[i]))
        assert row[3] == fmt(0.0)


def test_kbit_reconstruction_alignment_uses_class_shift(tmp_path):
    # a constant ramp rolls by the class shift; the aligned mean of one
    # class-1 trial must equal the ramp rolled back into base position
    ramp = np.linspace(0.0, 1.0, 63).astype(np.float32)
    shifted = np.roll(ramp, CLASS_SHIFTS[1]).astype(np.float32)
    path = tmp_path / "f.ckpt"
    save_checkpoint(str(path), {"outputs": shifted[None, :],
                                "labels": np.array([1], dtype=np.int64)})
    out = kbit_reconstruction([str(path)], str(tmp_path / "fig"))
    _, rows = read_csv(out[1])
    for i in (0, 5, 31, 62):
        assert rows[i][2] == fmt(float(ramp[i]))


def test_kbit_reconstruction_errors(tmp_path):
    path = tmp_path / "f.ckpt"
    save_checkpoint(str(path), {"outputs": np.zeros((2, 63),
                                                    dtype=np.float32)})
    with pytest.raises(ValueError, match="outputs/labels"):
        kbit_reconstruction([str(path)], str(tmp_path / "fig"))
    save_checkpoint(str(path), {"outputs": np.zeros((2, 63),
                                                    dtype=np.float32),
                                "labels": np.zeros(3, dtype=np.int64)})
    with pytest.raises(ValueError, match="mismatch"):
        kbit_reconstruction([str(path)], str(tmp_path / "fig"))
    save_checkpoint(str(path), {"outputs": np.zeros((1, 63),
                                                    dtype=np.float32),
                                "labels": np.array([6], dtype=np.int64)})
    with pytest.raises(ValueError, match="out of range"):
        kbit_reconstruction([str(path)], str(tmp_path / "fig"))


def _accuracy_csv(path, means):
    """Two folds per method whose average is the requested mean."""
    rows = []
    for method, mean in means.items():
        rows.append(["0", method, "0", fmt(mean + 0.01)])
        rows.append(["0", method, "1", fmt(mean - 0.01)])
    write_csv(str(path), ["subject", "method", "fold", "accuracy"], rows)


def test_parse_grid_entry():
    assert _parse_grid_entry("NA:res/a.csv") == ("NA", None, "res/a.csv")
    assert _parse_grid_entry("TC:2:res/b.csv") == ("TC", 2, "res/b.csv")
    assert _parse_grid_entry("NA:4:x.csv") == ("NA", 4, "x.csv")
    with pytest.raises(ValueError, match="unknown strategy"):
        _parse_grid_entry("XX:2:x.csv")
    with pytest.raises(ValueError, match="only NA"):
        _parse_grid_entry("TA:x.csv")
    with pytest.raises(ValueError, match="alpha"):
        _parse_grid_entry("TA:3:x.csv")


def test_augmentation_grid_cells_and_row_fill(tmp_path):
    na = tmp_path / "na.csv"
    tc = tmp_path / "tc.csv"
    _accuracy_csv(na, {"corr_blda": 0.50, "zzz_custom": 0.30})
    _accuracy_csv(tc, {"corr_blda": 0.70, "zzz_custom": 0.40})
    out = augmentation_grid([f"NA:{na}", f"TC:2:{tc}"],
                            str(tmp_path / "fig"))
    header, rows = read_csv(out[1])
    assert header == ["method", "strategy", "alpha_1", "alpha_2",
                      "alpha_4", "alpha_8"]
    # registry methods come first, unknown names after
    assert [r[:2] for r in rows[:4]] == [["corr_blda", "NA"],
                                         ["corr_blda", "TATC"],
                                         ["corr_blda", "TC"],
                                         ["corr_blda", "TA"]]
    assert rows[4][0] == "zzz_custom"
    grid = {(r[0], r[1]): r[2:] for r in rows}
    assert grid[("corr_blda", "NA")] == [fmt(0.5)] * 4
    assert grid[("corr_blda", "TC")] == ["", fmt(0.7), "", ""]
    assert grid[("corr_blda", "TA")] == [""] * 4
    assert grid[("zzz_custom", "NA")] == [fmt(0.3)] * 4
    assert grid[("zzz_custom", "TC")] == ["", fmt(0.4), "", ""]
    with open(out[0], "rb") as fh:
        assert fh.read(5) == b"<?xml"


def test_augmentation_grid_rejects_wrong_header(tmp_path):
    bad = tmp_path / "bad.csv"
    write_csv(str(bad), ["subject", "accuracy"], [["0", "0.5"]])
    with pytest.raises(ValueError, match="accuracy.csv header"):
        augmentation_grid([f"NA:{bad}"], str(tmp_path / "fig"))

"""Figure builders: standalone SVG plus the exact numbers as CSV.

Every builder returns the list of files it wrote. SVGs are deterministic
under a fixed input (hash salt pinned, no timestamps) so re-running a
plot command on the same data reproduces the files byte for byte.
"""

from __future__ import annotations

import io as _io
import os

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .codes import CLASS_SHIFTS, N_CLASSES, canonical_sequence
from .data import CHANNEL_NAMES, FS
from .io import atomic_write_bytes, fmt, load_checkpoint, read_csv, write_csv
from .methods import METHOD_NAMES

matplotlib.rcParams["svg.hashsalt"] = "cvepkit"

GRID_STRATEGIES = ("NA", "TATC", "TC", "TA")
GRID_ALPHAS = (1, 2, 4, 8)


def _expand(inputs: list[str], suffix: str) -> list[str]:
    """Resolve files and directories to a sorted file list."""
    files = []
    for item in inputs:
        if os.path.isdir(item):
            files.extend(os.path.join(item, name)
                         for name in sorted(os.listdir(item))
                         if name.endswith(suffix))
        elif os.path.exists(item):
            files.append(item)
        else:
            raise FileNotFoundError(f"no such file or directory: {item}")
    if not files:
        raise ValueError(f"no {suffix} files found in {inputs}")
    return files


def _save_svg(fig: Figure, path: str):
    buf = _io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    atomic_write_bytes(path, buf.getvalue())


def grand_average(inputs: list[str], out_dir: str) -> list[str]:
    """Per-channel mean waveform with a +/- SD envelope across trials.

    Parameters
    ----------
    inputs : list of str
        Trial files or directories of them.
    out_dir : str
        Receives grand_average.svg and grand_average.csv.
    """
    from .io import read_session_file

    stacks = []
    for path in _expand(inputs, ".cvep"):
        trials, fs = read_session_file(path)
        stacks.extend(t.data for t in trials)
    data = np.stack(stacks)
    n, n_ch, n_samp = data.shape
    mean = data.mean(axis=0)
    sd = data.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
    t = np.arange(n_samp) / FS

    names = list(CHANNEL_NAMES) if n_ch == len(CHANNEL_NAMES) \
        else [f"ch{i}" for i in range(n_ch)]
    header = ["time_s"]
    for name in names:
        header.extend([f"{name}_mean", f"{name}_sd"])
    rows = []
    for i in range(n_samp):
        row = [fmt(t[i])]
        for c in range(n_ch):
            row.extend([fmt(mean[c, i]), fmt(sd[c, i])])
        rows.append(row)

    fig = Figure(figsize=(10.0, 1.6 * n_ch), constrained_layout=True)
    axes = fig.subplots(n_ch, 1, sharex=True)
    axes = np.atleast_1d(axes)
    for c, ax in enumerate(axes):
        ax.fill_between(t, mean[c] - sd[c], mean[c] + sd[c], alpha=0.3,
                        color="tab:blue", linewidth=0)
        ax.plot(t, mean[c], color="tab:blue", linewidth=0.9)
        ax.set_ylabel(names[c])
    axes[-1].set_xlabel("time, s")
    axes[0].set_title(f"grand average of {n} trials")

    os.makedirs(out_dir, exist_ok=True)
    svg = os.path.join(out_dir, "grand_average.svg")
    csv = os.path.join(out_dir, "grand_average.csv")
    _save_svg(fig, svg)
    write_csv(csv, header, rows)
    return [svg, csv]


def kbit_reconstruction(inputs: list[str], out_dir: str) -> list[str]:
    """Mean reconstructed code versus the true bits.

    Reads fold checkpoints holding network outputs and labels, unrotates
    each output by its class shift so all trials align to the base code,
    and plots the aligned mean with a +/- SD envelope against the true
    bit pattern.
    """
    outputs = []
    for path in _expand(inputs, ".ckpt"):
        ck = load_checkpoint(path)
        if "outputs" not in ck or "labels" not in ck:
            raise ValueError(f"{path}: missing outputs/labels tensors")
        out = np.asarray(ck["outputs"], dtype=np.float64)
        labels = np.asarray(ck["labels"], dtype=np.int64)
        if out.shape[0] != labels.shape[0]:
            raise ValueError(f"{path}: outputs/labels length mismatch")
        for row, label in zip(out, labels):
            if not 0 <= label < N_CLASSES:
                raise ValueError(f"{path}: label {label} out of range")
            outputs.append(np.roll(row, -CLASS_SHIFTS[label]))
    aligned = np.stack(outputs)
    mean = aligned.mean(axis=0)
    sd = aligned.std(axis=0, ddof=1) if aligned.shape[0] > 1 \
        else np.zeros_like(mean)
    bits = canonical_sequence().bits.astype(np.float64)

    header = ["bit_index", "true_bit", "mean", "sd"]
    rows = [[str(i), str(int(bits[i])), fmt(mean[i]), fmt(sd[i])]
            for i in range(bits.size)]

    fig = Figure(figsize=(10.0, 4.0), constrained_layout=True)
    ax = fig.subplots()
    idx = np.arange(bits.size)
    ax.step(idx, bits, where="mid", color="tab:gray", linewidth=1.0,
            label="true bits")
    ax.fill_between(idx, mean - sd, mean + sd, alpha=0.3, color="tab:red",
                    linewidth=0)
    ax.plot(idx, mean, color="tab:red", linewidth=1.2,
            label=f"reconstruction mean (n={aligned.shape[0]})")
    ax.set_xlabel("bit index")
    ax.set_ylabel("bit value")
    ax.legend(loc="upper right")

    os.makedirs(out_dir, exist_ok=True)
    svg = os.path.join(out_dir, "kbit_reconstruction.svg")
    csv = os.path.join(out_dir, "kbit_reconstruction.csv")
    _save_svg(fig, svg)
    write_csv(csv, header, rows)
    return [svg, csv]


def _parse_grid_entry(entry: str) -> tuple[str, int | None, str]:
    """Split STRATEGY:ALPHA:path (or NA:path, filling its whole row)."""
    parts = entry.split(":", 2)
    strategy = parts[0]
    if strategy not in GRID_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r} in {entry!r}; "
                         f"expected one of {GRID_STRATEGIES}")
    if len(parts) == 2:
        if strategy != "NA":
            raise ValueError(f"{entry!r}: only NA may omit alpha")
        return strategy, None, parts[1]
    if len(parts) != 3:
        raise ValueError(f"{entry!r}: expected STRATEGY:ALPHA:path")
    alpha = int(parts[1])
    if alpha not in GRID_ALPHAS:
        raise ValueError(f"{entry!r}: alpha must be one of {GRID_ALPHAS}")
    return strategy, alpha, parts[2]


def _method_means(path: str) -> dict[str, float]:
    """Mean accuracy per method from a long accuracy CSV."""
    header, rows = read_csv(path)
    if header != ["subject", "method", "fold", "accuracy"]:
        raise ValueError(f"{path}: expected an accuracy.csv header")
    acc: dict[str, list[float]] = {}
    for row in rows:
        acc.setdefault(row[1], []).append(float(row[3]))
    return {m: float(np.mean(v)) for m, v in acc.items()}


def augmentation_grid(entries: list[str], out_dir: str) -> list[str]:
    """Strategy-by-alpha accuracy grids, one per method.

    Each entry names the run that produced one grid cell (or, for NA,
    one alpha-invariant row). Cells with no entry stay empty in the CSV
    and are skipped in the figure.
    """
    cells: dict[tuple[str, int], dict[str, float]] = {}
    for entry in entries:
        strategy, alpha, path = _parse_grid_entry(entry)
        means = _method_means(path)
        targets = [(strategy, a) for a in GRID_ALPHAS] if alpha is None \
            else [(strategy, alpha)]
        for key in targets:
            cells[key] = means

    seen: list[str] = []
    for means in cells.values():
        for m in means:
            if m not in seen:
                seen.append(m)
    methods = [m for m in METHOD_NAMES if m in seen] \
        + [m for m in seen if m not in METHOD_NAMES]

    header = ["method", "strategy"] + [f"alpha_{a}" for a in GRID_ALPHAS]
    rows = []
    for m in methods:
        for strategy in GRID_STRATEGIES:
            row = [m, strategy]
            for a in GRID_ALPHAS:
                means = cells.get((strategy, a))
                row.append(fmt(means[m]) if means and m in means else "")
            rows.append(row)

    n = len(methods)
    ncols = min(3, n)
    nrows = -(-n // ncols)
    fig = Figure(figsize=(4.0 * ncols, 3.0 * nrows), constrained_layout=True)
    axes = np.atleast_1d(fig.subplots(nrows, ncols)).ravel()
    for ax in axes[n:]:
        ax.set_visible(False)
    for m, ax in zip(methods, axes):
        for strategy in GRID_STRATEGIES:
            xs = [a for a in GRID_ALPHAS
                  if (strategy, a) in cells and m in cells[(strategy, a)]]
            ys = [cells[(strategy, a)][m] for a in xs]
            if xs:
                ax.plot(xs, ys, marker="o", label=strategy)
        ax.set_title(m, fontsize=9)
        ax.set_xscale("log", base=2)
        ax.set_xticks(GRID_ALPHAS)
        ax.set_xticklabels([str(a) for a in GRID_ALPHAS])
        ax.set_xlabel("alpha, samples")
        ax.set_ylabel("accuracy")
    if n:
        axes[0].legend(fontsize=7)

    os.makedirs(out_dir, exist_ok=True)
    svg = os.path.join(out_dir, "augmentation_grid.svg")
    csv = os.path.join(out_dir, "augmentation_grid.csv")
    _save_svg(fig, svg)
    write_csv(csv, header, rows)
    return [svg, csv]

"""Command line: simulate data, run experiments, compute stats, plot.

Exit codes: 0 on success, 2 for usage errors including unknown method
names, 1 for runtime failures (missing files, malformed inputs).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys


def _configure_threads():
    """Apply the CVEP_THREADS cap; 0 or unset leaves BLAS defaults alone.

    Must run before numpy is imported anywhere in the process, because
    BLAS pools size themselves at load time.
    """
    raw = os.environ.get("CVEP_THREADS", "").strip()
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        raise SystemExit(f"CVEP_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise SystemExit(f"CVEP_THREADS must be >= 0, got {n}")
    if n > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ[var] = str(n)


_configure_threads()

import numpy as np  # noqa: E402  (thread caps must precede this import)

from .augment import AugmentationSpec  # noqa: E402
from .data import Session  # noqa: E402
from .io import (  # noqa: E402
    AUG_CHOICES, RunConfig, fmt, parse_config_file, read_csv,
    read_session_file, save_checkpoint, write_csv, write_session_file)
from .methods import METHOD_NAMES, UnknownMethodError, make_methods  # noqa: E402
from .pipeline import preprocess_sessions, run_experiment  # noqa: E402
from .stats import compare_methods  # noqa: E402
from .synth import (  # noqa: E402
    ForwardModelConfig, make_subject_configs, simulate_subject)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_AUG_TO_STRATEGY = {"NA": "NA", "TA": "TA", "TC": "TC", "TATC": "TA_TC"}
_KBIT_METHODS = {"cnn_euclidean", "cnn_mahalanobis", "cnn_emd", "cnn_cemd"}
ACCURACY_COLUMNS = ["subject", "method", "fold", "accuracy"]


def trial_path(out_dir: str, subject: int, session_id: int) -> str:
    """Canonical location of one subject-session trial file."""
    return os.path.join(out_dir, "trials",
                        f"subject_{subject:02d}_session_{session_id}.cvep")


def checkpoint_path(out_dir: str, subject: int, fold: int) -> str:
    """Canonical location of one fold's reconstruction checkpoint."""
    return os.path.join(out_dir, "checkpoints",
                        f"subject_{subject:02d}_fold_{fold}_kbit.ckpt")


def _merge_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    """CLI flags override the config file."""
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "methods", None):
        cfg.methods = tuple(m.strip() for m in args.methods.split(",")
                            if m.strip())
    if getattr(args, "aug", None):
        cfg.aug = args.aug
    if getattr(args, "alpha", None) is not None:
        cfg.alpha = args.alpha
    if getattr(args, "radius", None) is not None:
        cfg.radius = args.radius
    if not cfg.methods:
        cfg.methods = METHOD_NAMES
    return cfg


def _load_config(args: argparse.Namespace) -> RunConfig:
    cfg = parse_config_file(args.config) if getattr(args, "config", None) \
        else RunConfig()
    return _merge_flags(cfg, args)


def _subject_seed(master: int, subject: int) -> int:
    """Stable per-subject experiment seed."""
    ss = np.random.SeedSequence(entropy=(int(master), 0x5EED, int(subject)))
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


def cmd_simulate(args: argparse.Namespace) -> int:
    """Write one binary trial file per subject-session."""
    cfg = _load_config(args)
    base = ForwardModelConfig(noise_sd=cfg.noise_sd, jitter_sd=cfg.jitter_sd,
                              trials_per_class=cfg.trials_per_class)
    count = 0
    for s, sub_cfg in enumerate(make_subject_configs(cfg.subjects, base,
                                                     master_seed=cfg.seed)):
        for session in simulate_subject(sub_cfg):
            write_session_file(trial_path(cfg.out, s, session.session_id),
                               session.trials)
            count += 1
    print(f"wrote {count} session files under "
          f"{os.path.join(cfg.out, 'trials')}")
    return EXIT_OK


def _read_subject(out_dir: str, subject: int,
                  n_sessions: int = 5) -> list[Session]:
    sessions = []
    for sid in range(n_sessions):
        path = trial_path(out_dir, subject, sid)
        if not os.path.exists(path):
            raise FileNotFoundError(
                f"missing trial file {path}; run 'simulate' first")
        trials, _ = read_session_file(path)
        sessions.append(Session(trials=trials, session_id=sid))
    return sessions


def _network_tensors(net) -> dict[str, np.ndarray]:
    """Parameters keyed by layer position, type and slot."""
    out = {}
    for i, layer in enumerate(net.layers):
        for j, p in enumerate(layer.params()):
            out[f"layer{i:02d}.{type(layer).__name__}.{p.name or f'p{j}'}"] = p.value
    return out


def cmd_run(args: argparse.Namespace) -> int:
    """Cross-validate the selected methods on simulated trial files."""
    cfg = _load_config(args)
    methods = make_methods(cfg.methods, radius=cfg.radius)
    spec = AugmentationSpec(strategy=_AUG_TO_STRATEGY[cfg.aug],
                            alpha=cfg.alpha)
    save_kbit = bool(_KBIT_METHODS & set(cfg.methods))

    acc_rows = []
    summary_rows = []
    per_method_means = {name: [] for name in cfg.methods}
    for s in range(cfg.subjects):
        sessions = preprocess_sessions(_read_subject(cfg.out, s))

        def hook(fold, session_id, pool, x_te, y_te, subject=s):
            if not save_kbit:
                return
            tensors = _network_tensors(pool.kbit_net)
            tensors["outputs"] = pool.kbit_predict(x_te).astype(np.float32)
            tensors["labels"] = np.asarray(y_te, dtype=np.int64)
            save_checkpoint(checkpoint_path(cfg.out, subject, fold), tensors)

        results = run_experiment(methods, sessions, spec,
                                 seed=_subject_seed(cfg.seed, s),
                                 fold_hook=hook)
        summary = [str(s)]
        for name in cfg.methods:
            r = results[name]
            for fold, acc in enumerate(r.accuracies):
                acc_rows.append([str(s), name, str(fold), fmt(acc)])
            summary.extend([fmt(r.mean), fmt(r.sd)])
            per_method_means[name].append(r.mean)
        summary_rows.append(summary)

    grand = ["mean"]
    for name in cfg.methods:
        means = np.asarray(per_method_means[name])
        grand.extend([fmt(float(means.mean())),
                      fmt(float(means.std(ddof=1)) if means.size > 1 else 0.0)])
    summary_rows.append(grand)

    write_csv(os.path.join(cfg.out, "accuracy.csv"), ACCURACY_COLUMNS, acc_rows)
    summary_header = ["subject"]
    for name in cfg.methods:
        summary_header.extend([f"{name}_mean", f"{name}_sd"])
    write_csv(os.path.join(cfg.out, "summary.csv"), summary_header,
              summary_rows)
    print(f"wrote {os.path.join(cfg.out, 'accuracy.csv')} and summary.csv "
          f"({cfg.subjects} subjects x {len(cfg.methods)} methods)")
    return EXIT_OK


def _matrix_from_csv(path: str) -> tuple[np.ndarray, list[str]]:
    """Accuracy matrix (subjects x methods) from a long or wide CSV.

    Long format is the accuracy.csv layout (subject, method, fold,
    accuracy); fold accuracies are averaged per subject. Wide format is
    one subject per row with one column per method.
    """
    header, rows = read_csv(path)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if header == ACCURACY_COLUMNS:
        subjects = []
        methods = []
        sums: dict[tuple[str, str], list[float]] = {}
        for row in rows:
            s, m, _, acc = row
            if s not in subjects:
                subjects.append(s)
            if m not in methods:
                methods.append(m)
            sums.setdefault((s, m), []).append(float(acc))
        matrix = np.empty((len(subjects), len(methods)))
        for i, s in enumerate(subjects):
            for j, m in enumerate(methods):
                cell = sums.get((s, m))
                if not cell:
                    raise ValueError(f"{path}: no rows for subject {s}, "
                                     f"method {m}")
                matrix[i, j] = np.mean(cell)
        return matrix, methods
    methods = header[1:]
    if len(methods) < 2:
        raise ValueError(f"{path}: need at least 2 method columns")
    try:
        matrix = np.array([[float(v) for v in row[1:]] for row in rows])
    except ValueError:
        raise ValueError(f"{path}: non-numeric accuracy cell")
    return matrix, methods


def cmd_stats(args: argparse.Namespace) -> int:
    """Friedman test, mean ranks and pairwise Wilcoxon comparisons."""
    matrix, methods = _matrix_from_csv(args.input)
    if matrix.shape[0] < 2:
        raise ValueError("need accuracies from at least 2 subjects")
    comp = compare_methods(matrix, methods)
    fr = comp.friedman

    rows = [["friedman", "chi2", "", fmt(fr.chi2)],
            ["friedman", "df", "", str(fr.df)],
            ["friedman", "p_value", "", fmt(fr.p_value)],
            ["friedman", "kendall_w", "", fmt(fr.kendall_w)],
            ["threshold", "bonferroni", "", fmt(comp.alpha_adjusted)]]
    order = np.argsort(fr.mean_ranks, kind="stable")
    for j in order:
        rows.append(["rank", methods[j], "", fmt(fr.mean_ranks[j], 2)])
    for i in range(len(methods)):
        for j in range(i + 1, len(methods)):
            rows.append(["wilcoxon", methods[i], methods[j],
                         fmt(comp.pairwise_p[i, j])])
    out_path = os.path.join(args.out, "stats.csv")
    write_csv(out_path, ["section", "a", "b", "value"], rows)

    print(f"friedman chi2={fr.chi2:.4f} df={fr.df} p={fr.p_value:.3e} "
          f"W={fr.kendall_w:.4f}")
    print("mean ranks: " + ", ".join(
        f"{methods[j]}={fr.mean_ranks[j]:.2f}" for j in order))
    print(f"bonferroni threshold: {comp.alpha_adjusted:.4f}")
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    """Dispatch to the figure builders; each emits SVG plus exact CSV."""
    from . import plots

    if args.kind == "grand_average":
        if not args.trials:
            raise ValueError("grand_average needs --trials")
        out = plots.grand_average(args.trials, args.out)
    elif args.kind == "kbit_reconstruction":
        if not args.checkpoints:
            raise ValueError("kbit_reconstruction needs --checkpoints")
        out = plots.kbit_reconstruction(args.checkpoints, args.out)
    else:
        if not args.results:
            raise ValueError("augmentation_grid needs --results entries")
        out = plots.augmentation_grid(args.results, args.out)
    for path in out:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvep",
        description="Synthetic c-VEP decoding experiments: simulate "
                    "sessions, cross-validate decoders, compare methods.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, methods_flag=True):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--out", help="output directory (default: results)")
        p.add_argument("--seed", type=int, help="master seed")
        if methods_flag:
            p.add_argument("--methods", help="comma-separated method names")
            p.add_argument("--aug", choices=AUG_CHOICES,
                           help="augmentation strategy")
            p.add_argument("--alpha", type=int, choices=(1, 2, 4, 8),
                           help="shift magnitude, samples")
            p.add_argument("--radius", type=int,
                           help="transport band radius for cnn_cemd")

    p_sim = sub.add_parser("simulate", help="write synthetic trial files")
    common(p_sim, methods_flag=False)
    p_sim.set_defaults(func=cmd_simulate)

    p_run = sub.add_parser("run", help="cross-validate decoding methods")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_stats = sub.add_parser("stats", help="rank statistics from accuracies")
    p_stats.add_argument("input", help="accuracy CSV (long or wide)")
    p_stats.add_argument("--out", default="results", help="output directory")
    p_stats.set_defaults(func=cmd_stats)

    p_plot = sub.add_parser("plot", help="figures with exact CSV companions")
    p_plot.add_argument("kind", choices=("grand_average",
                                         "kbit_reconstruction",
                                         "augmentation_grid"))
    p_plot.add_argument("--out", default="results", help="output directory")
    p_plot.add_argument("--trials", nargs="+",
                        help="trial files or directories (grand_average)")
    p_plot.add_argument("--checkpoints", nargs="+",
                        help="checkpoint files or directories "
                             "(kbit_reconstruction)")
    p_plot.add_argument("--results", action="append",
                        help="STRATEGY:ALPHA:accuracy.csv entry "
                             "(augmentation_grid); NA:path fills its row")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnknownMethodError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

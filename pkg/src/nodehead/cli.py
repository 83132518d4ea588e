"""Command-line entry point.

Subcommands: ``train`` (one head, one run), ``compare`` (baseline vs NODE
across seeds with stability statistics), ``gradcheck`` (pairwise gradient
agreement), ``sweep-tol`` (tolerance/cost trade-off table), ``bench``
(timing table), ``plot`` (SVG curves from a metrics CSV), and ``rerun``
(re-execute any run from its manifest).

Every command resolves its flags, writes a RunManifest into the output
directory before doing any work, and appends the finish timestamp when done.
Exit codes are a stable contract: 0 success, 1 usage or precondition
problems, 2 data/format problems, 3 numeric failures or threshold
violations.
"""

import argparse
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    FEATURE_MAGIC,
    FrozenExtractor,
    extract_features,
    load_cifar10_bin,
    load_feature_file,
)
from .errors import ContractError, DataError, FormatError, NumericError
from .model import (
    evaluate,
    head_from_flat,
    head_to_flat,
    init_node_head,
    load_checkpoint,
    loss_and_grads,
    save_checkpoint,
)
from .solvers import SolverConfig, rk4_terminal_batch
from .svgplot import plot_metrics_csv
from .train import (
    AdamConfig,
    SgdConfig,
    TrainConfig,
    read_metrics_csv,
    stability_stats,
    train,
    write_metrics_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_HEADS = ("baseline", "node")


class _Parser(argparse.ArgumentParser):
    """argparse with the package's exit-code contract (usage errors exit 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# run manifests

def _utc_now():
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def write_manifest(path, command, arg_pairs):
    """Record the resolved configuration before the run starts."""
    lines = [
        f"command={command}",
        f"toolkit_version={__version__}",
        f"started_at={_utc_now()}",
    ]
    for key, value in arg_pairs:
        if value is None:
            continue
        text = str(value)
        if "\n" in text:
            raise ValueError(f"manifest value for {key} contains a newline")
        lines.append(f"arg.{key}={text}")
    Path(path).write_text("\n".join(lines) + "\n")


def finish_manifest(path):
    with open(path, "a") as fh:
        fh.write(f"finished_at={_utc_now()}\n")


def read_manifest(path):
    """Parse a manifest into (command, {arg: value})."""
    command = None
    args = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise FormatError(f"{path}: line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        if key == "command":
            command = value
        elif key.startswith("arg."):
            args[key[4:]] = value
    if command is None:
        raise FormatError(f"{path}: no command recorded")
    return command, args


def _args_to_pairs(args, names):
    return [(name.replace("_", "-"), getattr(args, name)) for name in names]


# ---------------------------------------------------------------------------
# shared flag groups and resolution

def _add_data_flags(p):
    p.add_argument("--data", required=True, help="NODF feature file or CIFAR-10 binary batch file")
    p.add_argument("--feature-dim", type=int, default=64, help="extractor output dimension for image input")
    p.add_argument("--extractor-seed", type=int, default=0, help="seed of the frozen feature extractor")
    p.add_argument("--limit", type=int, default=0, help="keep only the first N rows (0 = all)")


def _add_model_flags(p):
    p.add_argument("--width", type=int, default=64, help="hidden width of the dynamics MLP")
    p.add_argument("--scale", type=float, default=0.1, help="init scale of the dynamics MLP")


def _add_solver_flags(p):
    p.add_argument("--rtol", type=float, default=1e-5)
    p.add_argument("--atol", type=float, default=1e-5)
    p.add_argument("--n-steps", type=int, default=16, help="fixed-step count for the discrete method")
    p.add_argument("--max-steps", type=int, default=100_000)


def _add_optimizer_flags(p):
    p.add_argument("--optimizer", choices=("auto", "adam", "sgd"), default="auto",
                   help="auto pairs adam with the discrete method and sgd with the adjoint")
    p.add_argument("--lr", type=float, default=None, help="defaults to 1e-3 (adam) / 1e-2 (sgd)")
    p.add_argument("--beta1", type=float, default=0.9)
    p.add_argument("--beta2", type=float, default=0.999)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--momentum", type=float, default=0.9)


def _add_train_flags(p):
    p.add_argument("--head", choices=_HEADS, required=True)
    p.add_argument("--grad", choices=("discrete", "adjoint"), default="discrete")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)


def _resolve_optimizer(args):
    """Fill in the auto optimizer/lr pairing in place."""
    if args.optimizer == "auto":
        args.optimizer = "sgd" if args.grad == "adjoint" else "adam"
    if args.lr is None:
        args.lr = 1e-3 if args.optimizer == "adam" else 1e-2


def _optimizer_config(args):
    if args.optimizer == "adam":
        return AdamConfig(lr=args.lr, beta1=args.beta1, beta2=args.beta2, eps=args.eps)
    return SgdConfig(lr=args.lr, momentum=args.momentum)


def _solver_config(args, grad_method):
    method = "rk4_fixed" if grad_method == "discrete" else "dopri5"
    return SolverConfig(
        method=method,
        rtol=args.rtol,
        atol=args.atol,
        n_steps=args.n_steps,
        max_steps=args.max_steps,
    )


def _train_config(args):
    return TrainConfig(
        optimizer=_optimizer_config(args),
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        grad_method=args.grad,
        solver=_solver_config(args, args.grad),
        val_fraction=args.val_fraction,
        width=args.width,
        init_scale=args.scale,
    )


def _load_dataset(path, feature_dim, extractor_seed, limit):
    """Sniff the file kind by magic: NODF features, otherwise CIFAR binary."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == FEATURE_MAGIC:
        ds = load_feature_file(path)
    else:
        images = load_cifar10_bin(path)
        ds = extract_features(FrozenExtractor(extractor_seed, feature_dim), images)
    if limit and limit > 0:
        ds = ds.subset(np.arange(min(limit, len(ds))))
    if len(ds) == 0:
        raise DataError(f"{path}: dataset is empty")
    return ds


def _dataset_from_args(args):
    return _load_dataset(args.data, args.feature_dim, args.extractor_seed, args.limit)


_TRAIN_ARG_NAMES = (
    "head", "grad", "data", "out", "seed", "epochs", "batch_size", "val_fraction",
    "optimizer", "lr", "beta1", "beta2", "eps", "momentum",
    "rtol", "atol", "n_steps", "max_steps", "width", "scale",
    "feature_dim", "extractor_seed", "limit",
)


# ---------------------------------------------------------------------------
# commands

def cmd_train(args):
    _resolve_optimizer(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.txt"
    write_manifest(manifest, "train", _args_to_pairs(args, _TRAIN_ARG_NAMES))
    dataset = _dataset_from_args(args)
    head, records = train(args.head, dataset, _train_config(args))
    write_metrics_csv(records, out / "metrics.csv")
    save_checkpoint(head, out / "head.nodc")
    finish_manifest(manifest)
    last = records[-1]
    print(
        f"{args.head}: epoch {last.epoch} train_loss={last.train_loss:.6g} "
        f"train_acc={last.train_acc:.4f} val_loss={last.val_loss:.6g} val_acc={last.val_acc:.4f}"
    )
    return EXIT_OK


def _stability_csv(report, path, first_end_epoch):
    lines = ["window_end_epoch,rolling_std_val_loss,rolling_std_val_acc"]
    for i, (sl, sa) in enumerate(zip(report.rolling_std_val_loss, report.rolling_std_val_acc)):
        lines.append(f"{first_end_epoch + i},{sl:.6g},{sa:.6g}")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_compare(args):
    _resolve_optimizer(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.txt"
    seeds = args.seeds
    pairs = _args_to_pairs(
        args,
        ("grad", "data", "test_data", "out", "epochs", "batch_size", "val_fraction",
         "optimizer", "lr", "beta1", "beta2", "eps", "momentum", "rtol", "atol",
         "n_steps", "max_steps", "width", "scale", "feature_dim", "extractor_seed",
         "limit", "window"),
    ) + [("seeds", ",".join(str(s) for s in seeds))]
    write_manifest(manifest, "compare", pairs)

    test_ds = None
    if args.test_data:
        test_ds = _load_dataset(args.test_data, args.feature_dim, args.extractor_seed, 0)

    rows = []
    failures = []
    for seed in seeds:
        for head_kind in _HEADS:
            run_dir = out / f"seed{seed}" / head_kind
            argv = ["train", "--head", head_kind, "--seed", str(seed), "--out", str(run_dir)]
            for name in ("grad", "data", "optimizer"):
                argv += [f"--{name}", str(getattr(args, name))]
            for name in ("epochs", "batch_size", "val_fraction", "lr", "beta1", "beta2",
                         "eps", "momentum", "rtol", "atol", "n_steps", "max_steps",
                         "width", "scale", "feature_dim", "extractor_seed", "limit"):
                argv += [f"--{name.replace('_', '-')}", str(getattr(args, name))]
            code = main(argv)
            row = {"seed": seed, "head": head_kind, "flag": "ok"}
            if code != EXIT_OK:
                row["flag"] = f"failed-exit-{code}"
                failures.append((seed, head_kind, code))
                rows.append(row)
                continue
            records = read_metrics_csv(run_dir / "metrics.csv")
            row["final_train_acc"] = records[-1].train_acc
            row["final_val_acc"] = records[-1].val_acc
            row["total_wall_s"] = sum(r.wall_ms for r in records) / 1000.0
            if test_ds is not None:
                head = load_checkpoint(run_dir / "head.nodc")
                _, test_acc, _ = evaluate(
                    head, test_ds.features, test_ds.labels, _solver_config(args, args.grad)
                )
                row["test_acc"] = test_acc
            if len(records) >= args.window:
                report = stability_stats(records, args.window)
                row["mean_std_val_loss"] = report.mean_rolling_std_val_loss
                row["max_epoch_jump"] = report.max_epoch_to_epoch_jump
                _stability_csv(report, run_dir / "stability.csv", first_end_epoch=args.window)
            else:
                row["flag"] = "insufficient-window"
            rows.append(row)

    node_wins = 0
    decided = 0
    for seed in seeds:
        by_head = {r["head"]: r for r in rows if r["seed"] == seed}
        base, node = by_head.get("baseline", {}), by_head.get("node", {})
        if "mean_std_val_loss" in base and "mean_std_val_loss" in node:
            decided += 1
            if node["mean_std_val_loss"] < base["mean_std_val_loss"]:
                node_wins += 1

    def _cell(row, key, fmt="{:.6g}"):
        return fmt.format(row[key]) if key in row else ""

    csv_lines = ["seed,head,final_train_acc,final_val_acc,test_acc,"
                 "mean_rolling_std_val_loss,max_epoch_jump,total_wall_s,flag"]
    for r in rows:
        csv_lines.append(",".join([
            str(r["seed"]), r["head"],
            _cell(r, "final_train_acc"), _cell(r, "final_val_acc"), _cell(r, "test_acc"),
            _cell(r, "mean_std_val_loss"), _cell(r, "max_epoch_jump"),
            _cell(r, "total_wall_s"), r["flag"],
        ]))
    (out / "comparison.csv").write_text("\n".join(csv_lines) + "\n")

    col = "{:<6}{:<10}{:>12}{:>12}{:>10}{:>22}{:>14}  {}"
    summary = [
        f"baseline vs node stability comparison  (window={args.window}, "
        f"grad={args.grad}, optimizer={args.optimizer}, epochs={args.epochs})",
        col.format("seed", "head", "train_acc", "val_acc", "test_acc",
                   "mean_std(val_loss)", "wall_s", "flag"),
    ]
    for r in rows:
        summary.append(col.format(
            r["seed"], r["head"],
            _cell(r, "final_train_acc", "{:.4f}"), _cell(r, "final_val_acc", "{:.4f}"),
            _cell(r, "test_acc", "{:.4f}"), _cell(r, "mean_std_val_loss", "{:.6g}"),
            _cell(r, "total_wall_s", "{:.2f}"), r["flag"],
        ))
    verdict = (
        f"node head has lower mean rolling std(val loss) in {node_wins} of {decided} decided seeds"
        if decided else
        "stability winner undecided: no seed produced a full rolling window for both heads"
    )
    if failures:
        verdict += f"; {len(failures)} run(s) failed"
    summary.append(verdict)
    text = "\n".join(summary) + "\n"
    (out / "summary.txt").write_text(text)
    print(text, end="")
    finish_manifest(manifest)
    return EXIT_NUMERIC if failures else EXIT_OK


def _pairwise_deviation(a, b, max_abs, max_rel):
    """Per-component agreement check between two gradient vectors.

    A component passes when its absolute deviation is within ``max_abs`` or
    its relative deviation (against the larger magnitude) is within
    ``max_rel``. Returns (max_abs_dev, max_rel_dev, all_ok); the relative
    column is taken over components big enough for it to mean anything.
    """
    diff = np.abs(a - b)
    scale = np.maximum(np.abs(a), np.abs(b))
    ok = np.all((diff <= max_abs) | (diff <= max_rel * scale))
    meaningful = scale > max_abs
    max_rel_dev = float((diff[meaningful] / scale[meaningful]).max()) if meaningful.any() else 0.0
    return float(diff.max()), max_rel_dev, bool(ok)


def _fd_loss_grad(head, features, labels, n_steps, step):
    """Central finite differences of the discrete-forward loss over all head params."""
    from .tensorops import EPS_LOG, softmax

    flat0 = head_to_flat(head)

    def loss_at(flat):
        h = head_from_flat(head, flat)
        hT = rk4_terminal_batch(h.dynamics, features, 0.0, 1.0, n_steps)
        logits = hT @ h.w_out.T + h.b_out
        probs = softmax(logits)
        picked = probs[np.arange(len(labels)), labels]
        return float(np.mean(-np.log(picked + EPS_LOG)))

    grad = np.empty_like(flat0)
    for i in range(flat0.size):
        bump = np.zeros_like(flat0)
        bump[i] = step
        grad[i] = (loss_at(flat0 + bump) - loss_at(flat0 - bump)) / (2 * step)
    return grad


def cmd_gradcheck(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.txt"
    names = ("d", "width", "seed", "classes", "batch", "rtol", "atol", "n_steps",
             "fd_n_steps", "fd_step", "scale", "max_rel", "max_abs", "out")
    write_manifest(manifest, "gradcheck", _args_to_pairs(args, names))

    head = init_node_head(args.seed, args.d, args.classes, width=args.width, scale=args.scale)
    rng = np.random.default_rng(args.seed)
    features = rng.standard_normal((args.batch, args.d))
    labels = rng.integers(0, args.classes, size=args.batch)

    fixed_cfg = SolverConfig(method="rk4_fixed", n_steps=args.n_steps)
    adaptive_cfg = SolverConfig(method="dopri5", rtol=args.rtol, atol=args.atol)
    _, g_discrete, _ = loss_and_grads(head, features, labels, "discrete", fixed_cfg)
    _, g_adjoint, _ = loss_and_grads(head, features, labels, "adjoint", adaptive_cfg)
    g_fd = _fd_loss_grad(head, features, labels, args.fd_n_steps, args.fd_step)

    table = [
        ("fd-vs-discrete", *_pairwise_deviation(g_fd, g_discrete, args.max_abs, args.max_rel)),
        ("fd-vs-adjoint", *_pairwise_deviation(g_fd, g_adjoint, args.max_abs, args.max_rel)),
        ("discrete-vs-adjoint",
         *_pairwise_deviation(g_discrete, g_adjoint, args.max_abs, args.max_rel)),
    ]
    print(f"{'pair':<22}{'max_abs_dev':>14}{'max_rel_dev':>14}  status")
    worst = None
    for name, abs_dev, rel_dev, ok in table:
        print(f"{name:<22}{abs_dev:>14.3e}{rel_dev:>14.3e}  {'ok' if ok else 'FAIL'}")
        if not ok and worst is None:
            worst = name
    finish_manifest(manifest)
    if worst is not None:
        print(f"gradcheck failed: {worst} exceeds max_abs={args.max_abs} and max_rel={args.max_rel}",
              file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_sweep_tol(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.txt"
    names = ("tols", "mode", "data", "out", "seed", "epochs", "batch_size", "val_fraction",
             "width", "scale", "feature_dim", "extractor_seed", "limit", "n_steps", "max_steps")
    pairs = [(n.replace("_", "-"),
              ",".join(f"{t:g}" for t in args.tols) if n == "tols" else getattr(args, n))
             for n in names]
    write_manifest(manifest, "sweep-tol", pairs)
    dataset = _dataset_from_args(args)

    lines = ["rtol,atol,n_feval,final_val_acc,wall_ms"]
    for tol in args.tols:
        cfg = SolverConfig(method="dopri5", rtol=tol, atol=tol, max_steps=args.max_steps)
        tic = time.perf_counter()
        if args.mode == "eval":
            head = init_node_head(args.seed, dataset.d, dataset.class_count,
                                  width=args.width, scale=args.scale)
            _, acc, stats = evaluate(head, dataset.features, dataset.labels, cfg)
            n_feval = stats.n_feval
        else:
            tcfg = TrainConfig(
                optimizer=SgdConfig(), epochs=args.epochs, batch_size=args.batch_size,
                seed=args.seed, grad_method="adjoint", solver=cfg,
                val_fraction=args.val_fraction, width=args.width, init_scale=args.scale,
            )
            _, records = train("node", dataset, tcfg)
            acc = records[-1].val_acc
            n_feval = sum(r.n_feval for r in records)
        wall_ms = (time.perf_counter() - tic) * 1000.0
        lines.append(f"{tol:g},{tol:g},{n_feval},{acc:.6g},{wall_ms:.6g}")
    table = "\n".join(lines) + "\n"
    (out / "sweep.csv").write_text(table)
    print(table, end="")
    finish_manifest(manifest)
    return EXIT_OK


def cmd_bench(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.txt"
    names = ("data", "out", "seed", "epochs", "batch_size", "val_fraction", "rtol", "atol",
             "n_steps", "max_steps", "width", "scale", "feature_dim", "extractor_seed", "limit")
    write_manifest(manifest, "bench", _args_to_pairs(args, names))
    dataset = _dataset_from_args(args)

    configs = [
        ("baseline", "baseline", "discrete", AdamConfig()),
        ("node-discrete", "node", "discrete", AdamConfig()),
        ("node-adjoint", "node", "adjoint", SgdConfig()),
    ]
    lines = ["model,epochs,mean_epoch_ms,total_s"]
    for label, head_kind, grad, opt in configs:
        cfg = TrainConfig(
            optimizer=opt, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
            grad_method=grad, solver=_solver_config(args, grad),
            val_fraction=args.val_fraction, width=args.width, init_scale=args.scale,
        )
        tic = time.perf_counter()
        _, records = train(head_kind, dataset, cfg)
        total_s = time.perf_counter() - tic
        mean_epoch_ms = sum(r.wall_ms for r in records) / len(records)
        lines.append(f"{label},{args.epochs},{mean_epoch_ms:.6g},{total_s:.6g}")
    table = "\n".join(lines) + "\n"
    (out / "bench.csv").write_text(table)
    print(table, end="")
    finish_manifest(manifest)
    return EXIT_OK


def cmd_plot(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.txt"
    write_manifest(manifest, "plot", _args_to_pairs(args, ("csv", "out", "columns")))
    columns = args.columns.split(",") if args.columns else None
    try:
        written = plot_metrics_csv(args.csv, out, columns)
    except FormatError:
        raise  # malformed CSV is a data problem (exit 2), not a usage one
    except ValueError as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for path in written:
        print(path)
    finish_manifest(manifest)
    return EXIT_OK


def cmd_rerun(args):
    command, recorded = read_manifest(args.manifest)
    if command == "rerun":
        raise ContractError("cannot rerun a rerun manifest")
    argv = [command]
    for key, value in recorded.items():
        if key == "out":
            continue
        argv += [f"--{key}", value]
    argv += ["--out", args.out]
    return main(argv)


# ---------------------------------------------------------------------------
# parser wiring

def _comma_ints(text):
    return [int(x) for x in text.split(",") if x != ""]


def _comma_floats(text):
    return [float(x) for x in text.split(",") if x != ""]


def build_parser():
    parser = _Parser(prog="nodehead", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nodehead {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[], help="train one head and write metrics + checkpoint")
    _add_train_flags(p)
    _add_data_flags(p)
    _add_model_flags(p)
    _add_solver_flags(p)
    _add_optimizer_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="baseline vs node across seeds with stability reports")
    p.add_argument("--seeds", type=_comma_ints, required=True, help="comma-separated seed list")
    p.add_argument("--grad", choices=("discrete", "adjoint"), default="discrete")
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--val-fraction", type=float, default=1 / 6)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--test-data", default=None)
    _add_data_flags(p)
    _add_model_flags(p)
    _add_solver_flags(p)
    _add_optimizer_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="pairwise finite-difference/discrete/adjoint agreement")
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--batch", type=int, default=3)
    p.add_argument("--scale", type=float, default=0.5)
    p.add_argument("--rtol", type=float, default=1e-8)
    p.add_argument("--atol", type=float, default=1e-8)
    p.add_argument("--n-steps", type=int, default=500)
    p.add_argument("--fd-n-steps", type=int, default=100)
    p.add_argument("--fd-step", type=float, default=1e-5)
    p.add_argument("--max-rel", type=float, default=1e-3)
    p.add_argument("--max-abs", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("sweep-tol", help="tolerance vs cost/accuracy trade-off table")
    p.add_argument("--tols", type=_comma_floats, required=True)
    p.add_argument("--mode", choices=("eval", "train"), default="eval")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--val-fraction", type=float, default=0.1)
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--n-steps", type=int, default=16)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_tol)

    p = sub.add_parser("bench", help="timing table: baseline / node-discrete / node-adjoint")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--val-fraction", type=float, default=0.1)
    _add_data_flags(p)
    _add_model_flags(p)
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="SVG charts from a metrics CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--columns", default=None, help="comma-separated metric columns (default: all)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("rerun", help="re-execute a recorded run into a new directory")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FormatError, DataError) as exc:
        print(f"nodehead {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ContractError as exc:
        print(f"nodehead {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"nodehead {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"nodehead {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

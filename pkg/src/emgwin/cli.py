"""Command-line entry point: ``emgwin synth|preprocess|segment|train|sweep|report``.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical failure.
"""

import argparse
import datetime as dt
import logging
import sys
from pathlib import Path

from . import __version__, _kernels, dataio, dsp, report, sweep, synthgen, training
from .errors import DataFormatError, NumericalError, ShapeError
from .nn.network import DEFAULT_FILTERS
from .windowing import WindowParams, segment_many

log = logging.getLogger("emgwin")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text):
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _float_list(text):
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _str_list(text):
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def _now():
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _manifest_path(out):
    out = Path(out)
    if out.suffix == "":
        return out / "run_manifest.json"
    return out.with_suffix(".run.json")


def _write_manifest(args, out, inputs, master_seed=None, finished=False, manifest=None):
    manifest = manifest or {
        "tool": "emgwin",
        "version": __version__,
        "backend": _kernels.BACKEND,
        "command": args.command,
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in vars(args).items() if k not in ("func", "config")},
        "master_seed": master_seed,
        "inputs": [str(p) for p in inputs],
        "output": str(out),
        "started_at": _now(),
    }
    if finished:
        manifest["finished_at"] = _now()
    path = _manifest_path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataio.write_json(path, manifest)
    return manifest


# --------------------------------------------------------------------------
# commands

def cmd_synth(args):
    cfg = synthgen.SynthConfig(seed=args.seed, subjects=args.subjects, sessions=args.sessions,
                               trials_per_active_class=args.trials, sample_rate=args.rate,
                               channels=args.channels, snr=args.snr, scale=args.scale)
    m = _write_manifest(args, args.out, [], args.seed)
    recs = synthgen.generate(cfg)
    dataio.save_dataset(recs, args.out)
    _write_manifest(args, args.out, [], args.seed, True, m)
    log.info("wrote %d recordings to %s", len(recs), args.out)


def cmd_preprocess(args):
    m = _write_manifest(args, args.out, [args.input])
    recs = dataio.load_dataset(args.input)
    out = [dsp.preprocess(r, args.notch, args.lo, args.hi, args.order, args.q) for r in recs]
    dataio.save_dataset(out, args.out)
    _write_manifest(args, args.out, [args.input], finished=True, manifest=m)


def _select(recs, subjects):
    if not subjects:
        return recs
    chosen = [r for r in recs if r.subject_id in subjects]
    if not chosen:
        raise DataFormatError(f"no recordings for subjects {list(subjects)}")
    return chosen


def cmd_segment(args):
    m = _write_manifest(args, args.out, [args.input])
    recs = _select(dataio.load_dataset(args.input), args.subjects)
    frames = segment_many(recs, WindowParams(args.window, args.overlap))
    dataio.save_frames(frames, args.out)
    _write_manifest(args, args.out, [args.input], finished=True, manifest=m)
    log.info("%d frames, per class %s", len(frames), frames.class_counts().tolist())


def _train_config(args, seed):
    return training.TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                                train_fraction=args.train_fraction, batch_size=args.batch_size,
                                seed=seed)


def cmd_train(args):
    m = _write_manifest(args, args.out, [args.frames], args.seed)
    frames = dataio.load_frames(args.frames)
    net, rep = training.train(frames, frames.params.window, args.kernel,
                              _train_config(args, args.seed), filters=args.filters,
                              dense_units=args.dense_units)
    dataio.save_model(net, args.out)
    if args.curves:
        rep.write_curves(args.curves)
    summary = {"test_accuracy": rep.test_accuracy, "test_f1_macro": rep.test_f1,
               "confusion": rep.confusion.tolist(), "seconds": rep.seconds, "seed": rep.seed}
    if args.report:
        dataio.write_json(args.report, summary)
    _write_manifest(args, args.out, [args.frames], args.seed, True, m)
    print(f"test accuracy {100 * rep.test_accuracy:.2f}%  macro-F1 {100 * rep.test_f1:.2f}%")


def cmd_sweep(args):
    m = _write_manifest(args, args.out, [args.input], args.master_seed)
    recs = dataio.load_dataset(args.input)
    grid = sweep.SweepGrid(windows=args.windows, overlaps=args.overlaps, kernels=args.kernels,
                           seeds=tuple(range(args.seeds)), subjects=args.subjects or None)
    results = sweep.run_grid(recs, grid, _train_config(args, args.master_seed),
                             out_path=args.out, jobs=args.jobs, filters=args.filters,
                             dense_units=args.dense_units, curves_dir=args.curves,
                             record_time=not args.no_timing)
    _write_manifest(args, args.out, [args.input], args.master_seed, True, m)
    print(f"{len(results)} result rows in {args.out}")


def cmd_report(args):
    inputs = [args.csv] + ([args.curves] if args.curves else [])
    m = _write_manifest(args, args.plots, inputs)
    files = report.build_report(args.csv, args.plots, args.curves)
    _write_manifest(args, args.plots, inputs, finished=True, manifest=m)
    print(f"wrote {len(files)} files to {args.plots}")


# --------------------------------------------------------------------------
# parser

def _add_training_flags(p):
    p.add_argument("--epochs", type=int, default=35)
    p.add_argument("--lr", type=float, default=1e-4, help="Adam learning rate")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--filters", type=_int_list, default=DEFAULT_FILTERS,
                   help="filters per conv block, comma separated (default 32,32,64,64)")
    p.add_argument("--dense-units", type=int, default=128)


def build_parser():
    parser = _Parser(prog="emgwin", description="Synthetic sEMG window-length, overlap and "
                     "kernel-size experiments for a compact CNN.",
                     epilog="exit codes: 0 success, 1 usage error, 2 data/format error, "
                            "3 numerical failure")
    parser.add_argument("--version", action="version", version=f"emgwin {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="file of key=value lines; explicit flags win")
        p.set_defaults(func=func)
        return p

    p = command("synth", cmd_synth, "generate a seeded synthetic dataset")
    p.add_argument("--out", required=True, help="dataset directory to write")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", choices=["full", "small"], default="full")
    p.add_argument("--subjects", type=int, default=4)
    p.add_argument("--sessions", type=int, default=5)
    p.add_argument("--trials", type=int, default=10, help="trials per active class")
    p.add_argument("--rate", type=float, default=1024.0, help="sample rate in Hz")
    p.add_argument("--channels", type=int, default=32)
    p.add_argument("--snr", type=float, default=3.0)

    p = command("preprocess", cmd_preprocess, "notch, band-pass and class-wise z-score a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--notch", type=float, default=50.0, help="notch frequency, 0 disables")
    p.add_argument("--q", type=float, default=30.0, help="notch quality factor")
    p.add_argument("--lo", type=float, default=10.0)
    p.add_argument("--hi", type=float, default=500.0)
    p.add_argument("--order", type=int, default=4)

    p = command("segment", cmd_segment, "cut a dataset into labeled K x T frames")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="frame dump directory")
    p.add_argument("--window", type=int, default=150)
    p.add_argument("--overlap", type=float, default=0.75, help="overlap fraction of the window")
    p.add_argument("--subjects", type=_str_list, default=(), help="subject ids to keep")

    p = command("train", cmd_train, "train one network on a frame dump")
    p.add_argument("--frames", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--kernel", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--curves", help="per-epoch learning-curve CSV to write")
    p.add_argument("--report", help="JSON file for final test metrics")
    _add_training_flags(p)

    p = command("sweep", cmd_sweep, "run the window/overlap/kernel grid per subject")
    p.add_argument("--in", dest="input", required=True, help="preprocessed dataset directory")
    p.add_argument("--out", required=True, help="results CSV (resumed if present)")
    p.add_argument("--windows", type=_int_list, default=(125, 150, 175))
    p.add_argument("--overlaps", type=_float_list, default=(0.0, 0.25, 0.5, 0.75))
    p.add_argument("--kernels", type=_int_list, default=(3, 5, 7))
    p.add_argument("--seeds", type=int, default=1, help="number of replicate seeds")
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--subjects", type=_str_list, default=())
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--curves", help="directory for per-cell learning-curve CSVs")
    p.add_argument("--no-timing", action="store_true",
                   help="write 0.00 in the seconds column so reruns are byte-identical")
    _add_training_flags(p)

    p = command("report", cmd_report, "render tables and SVG figures from sweep results")
    p.add_argument("--csv", required=True)
    p.add_argument("--plots", required=True, help="output directory")
    p.add_argument("--curves", help="directory of learning-curve CSVs")
    return parser


def _read_config(path):
    values = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def _config_arg(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv):
    """Parse ``argv``; values from a ``--config`` file become the subcommand's defaults."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    cfg_path = _config_arg(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    commands = parser._subparsers._group_actions[0].choices
    if cfg_path and command in commands:
        try:
            values = _read_config(cfg_path)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        sub = commands[command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, val in values.items():
            key = "input" if key == "in" else key
            if key not in known or key in ("help", "config"):
                raise UsageError(f"unknown config key {key!r} for {command}")
            action = known[key]
            try:
                if isinstance(action, argparse._StoreTrueAction):
                    val = val.lower() in ("1", "true", "yes")
                elif action.type is not None:
                    val = action.type(val)
            except ValueError as exc:
                raise UsageError(f"config key {key}: {exc}") from exc
            if action.choices is not None and val not in action.choices:
                raise UsageError(f"config key {key}: {val!r} not in {sorted(action.choices)}")
            defaults[key] = val
            action.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"emgwin: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (NumericalError, ArithmeticError) as exc:
        print(f"emgwin: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (DataFormatError, ShapeError, OSError) as exc:
        print(f"emgwin: data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"emgwin: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

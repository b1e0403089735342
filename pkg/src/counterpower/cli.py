"""Command-line driver: ``counterpower {synth,select,train,predict,evaluate}``.

Exit codes: 0 on success, 1 when a model or data error stops the run,
2 on bad usage (argparse errors, invalid flag combinations, missing inputs).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import PowerModelError
from .evaluation import compare_report, evaluate, format_ranking
from .fitting import MODEL_KINDS, fit_power_model
from .hcs import HcsConfig, select_counters, selection_stability
from .ingestion import (SyntheticSpec, format_number, generate_synthetic, read_trace_file,
                        write_trace_file, write_truth)
from .models.grid import HyperparamGrid, default_grid
from .serialize import load_model, save_model

log = logging.getLogger("counterpower")

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


def truth_path(trace: Path) -> Path:
    return trace.with_name(trace.stem + ".truth.csv")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _name_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _out_path(path: str) -> Path:
    p = Path(path)
    if p.parent and not p.parent.is_dir():
        raise UsageError(f"output directory does not exist: {p.parent}")
    return p


def default_coeffs(n_relevant: int) -> list[float]:
    """Descending coefficients from 8 W to 2 W, a 4x spread."""
    if n_relevant == 1:
        return [8.0]
    return [float(c) for c in np.geomspace(8.0, 2.0, n_relevant)]


# -- synth ------------------------------------------------------------------

def cmd_synth(args) -> int:
    coeffs = args.coeffs if args.coeffs is not None else default_coeffs(args.relevant)
    pairs = args.relevant * (args.relevant - 1) / 2
    power_range = float(np.sum(np.abs(coeffs))) + args.nonlinear_weight * pairs
    noise = args.noise_std if args.noise_std is not None else args.noise_frac * power_range
    try:
        spec = SyntheticSpec(args.counters, args.relevant, tuple(coeffs),
                             args.nonlinear_weight, noise, args.vectors, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    out = _out_path(args.output)
    data, truth = generate_synthetic(spec)
    write_trace_file(data, out)
    with open(truth_path(out), "wb") as fh:
        write_truth(truth, fh)
    log.info("wrote %d vectors to %s (relevant: %s)", len(data), out, ",".join(truth.relevant))
    return 0


# -- select -----------------------------------------------------------------

def write_selection(result, path: Path, stability=None, n_vectors=None) -> None:
    cfg = result.config
    lines = [f"# hcs n={cfg.n_select} ntree={cfg.ntree} partitions={cfg.m_partitions} "
             f"seed={cfg.rng_seed}" + (f" vectors={n_vectors}" if n_vectors else ""),
             "# selected: " + ",".join(result.selected),
             "counter,avg_importance,selected"]
    chosen = set(result.selected)
    for name, imp in result.ranking():
        lines.append(f"{name},{format_number(imp)},{int(name in chosen)}")
    if stability is not None:
        lines.append(f"# ntree_sweep stable_from={stability.stable_from}")
        lines.append("ntree,same_as_largest,selected")
        final = set(stability.results[stability.ntrees[-1]].selected)
        for t in stability.ntrees:
            sel = stability.results[t].selected
            lines.append(f"{t},{int(set(sel) == final)},{';'.join(sel)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_selection(path: Path) -> list[str]:
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("# selected: "):
            return _name_list(line[len("# selected: "):])
    raise UsageError(f"{path} has no '# selected:' line")


def cmd_select(args) -> int:
    trace = _existing(args.trace)
    out = _out_path(args.output)
    try:
        cfg = HcsConfig(args.n, args.ntree, args.partitions, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    data = read_trace_file(trace)
    if args.n > data.schema.n:
        raise UsageError(f"--n {args.n} exceeds the {data.schema.n} counters in {trace}")
    result = select_counters(data, cfg)
    stability = None
    if args.ntree_sweep:
        stability = selection_stability(data, args.ntree_sweep, cfg)
    write_selection(result, out, stability, len(data))
    print(",".join(result.selected))
    return 0


# -- train / predict ----------------------------------------------------------

def _counters_arg(args):
    if args.counters and args.selection:
        raise UsageError("give either --counters or --selection, not both")
    if args.selection:
        return read_selection(_existing(args.selection))
    return args.counters


def _project(data, names):
    if not names:
        return data
    missing = [n for n in names if n not in data.schema.names]
    if missing:
        raise UsageError(f"unknown counters: {', '.join(missing)}")
    return data.project(names)


def _grid_arg(args):
    if args.grid and args.default_grid:
        raise UsageError("give either --grid or --default-grid, not both")
    if args.grid:
        try:
            return HyperparamGrid.from_json(_existing(args.grid))
        except ValueError as exc:
            raise UsageError(f"bad grid file: {exc}")
    return default_grid() if args.default_grid else None


def _hp_for(kind, args) -> dict:
    if kind in ("svmpm", "tspm"):
        hp = {"C": args.C, "epsilon": args.epsilon, "gamma": args.gamma, "kernel": args.kernel}
    elif kind == "nnpm":
        hp = {"hidden": args.hidden, "lr": args.lr, "epochs": args.epochs}
    else:
        return {}
    return {k: v for k, v in hp.items() if v is not None}


def cmd_train(args) -> int:
    trace = _existing(args.trace)
    out = _out_path(args.output)
    names = _counters_arg(args)
    grid = _grid_arg(args)
    data = _project(read_trace_file(trace), names)
    model = fit_power_model(args.model, data, hp=_hp_for(args.model, args), grid=grid,
                            folds=args.folds, rng_seed=args.seed,
                            fit_intercept=not args.no_intercept)
    save_model(model, out)
    log.info("trained %s on %d vectors, counters %s", args.model, len(data),
             ",".join(data.schema.names))
    return 0


def cmd_predict(args) -> int:
    model = load_model(_existing(args.model))
    data = read_trace_file(_existing(args.trace))
    out = _out_path(args.output)
    data = _project(data, list(model.schema.names))
    est = model.predict_raw(data.counters)
    lines = ["index,measured,predicted"]
    lines += [f"{i},{format_number(m)},{repr(float(e))}"
              for i, (m, e) in enumerate(zip(data.power, est))]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


# -- evaluate -----------------------------------------------------------------

def cmd_evaluate(args) -> int:
    trace = _existing(args.trace)
    out = _out_path(args.output)
    ranking = _out_path(args.ranking) if args.ranking else None
    kinds = args.models
    bad = [k for k in kinds if k not in MODEL_KINDS]
    if bad or not kinds:
        raise UsageError(f"unknown model kinds: {', '.join(bad) or '(none)'}")
    names = _counters_arg(args)
    grid = _grid_arg(args)
    data = _project(read_trace_file(trace), names)
    hp = {k: _hp_for(k, args) for k in kinds}
    report = evaluate(kinds, data, n_parts=args.parts, grid=grid, hp=hp,
                      folds=args.folds, rng_seed=args.seed)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        compare_report(report, fh)
    text = format_ranking(report)
    if ranking is not None:
        ranking.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# -- parser -------------------------------------------------------------------

def _add_selection_args(p):
    p.add_argument("--counters", type=_name_list,
                   help="comma-separated counters to keep (e.g. the output of select)")
    p.add_argument("--selection", help="selection file written by 'select'")


def _add_hp_args(p):
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--C", type=float, help="SVR regularization (default 10)")
    g.add_argument("--epsilon", type=float, help="SVR tube width in watts (default 1%% of range)")
    g.add_argument("--gamma", type=float, help="RBF gamma (default 1/n_counters)")
    g.add_argument("--kernel", choices=("rbf", "linear"))
    g.add_argument("--hidden", type=int, help="MLP hidden units (default 8)")
    g.add_argument("--lr", type=float, help="MLP learning rate (default 0.1)")
    g.add_argument("--epochs", type=int, help="MLP epochs (default 2000)")
    g.add_argument("--grid", help="JSON hyperparameter grid; overrides the flags above")
    g.add_argument("--default-grid", action="store_true", help="search the built-in grid")
    g.add_argument("--folds", type=int, default=3, help="CV folds for grid search")
    g.add_argument("--no-intercept", action="store_true",
                   help="fit the linear model without a constant term")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="counterpower",
        description="Counter selection and power models from hardware counter traces.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic trace with known ground truth")
    p.add_argument("--counters", type=int, required=True)
    p.add_argument("--relevant", type=int, required=True)
    p.add_argument("--vectors", type=int, default=5000)
    p.add_argument("--coeffs", type=_float_list,
                   help="linear coefficients of the relevant counters (default 8..2 W)")
    p.add_argument("--nonlinear-weight", type=float, default=0.0)
    noise = p.add_mutually_exclusive_group()
    noise.add_argument("--noise-std", type=float, help="noise standard deviation in watts")
    noise.add_argument("--noise-frac", type=float, default=0.05,
                       help="noise std as a fraction of the power range (default 0.05)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select", help="rank counters by partition-averaged forest importance")
    p.add_argument("trace")
    p.add_argument("--n", type=int, default=6, help="counters to select")
    p.add_argument("--ntree", type=int, default=16)
    p.add_argument("--partitions", type=int, default=4)
    p.add_argument("--ntree-sweep", type=_int_list, help="e.g. 2,4,8,16")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train one power model and save it")
    p.add_argument("trace")
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    _add_selection_args(p)
    _add_hp_args(p)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a trace with a saved model")
    p.add_argument("model")
    p.add_argument("trace")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="Known/Unknown comparison of power models")
    p.add_argument("trace")
    p.add_argument("--models", type=_name_list, default=list(MODEL_KINDS))
    p.add_argument("--parts", type=int, default=4)
    _add_selection_args(p)
    _add_hp_args(p)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("-o", "--output", required=True, help="report CSV")
    p.add_argument("--ranking", help="write the text ranking here instead of stdout")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (PowerModelError, ValueError, OSError) as exc:
        print(f"{parser.prog} {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

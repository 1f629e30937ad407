"""Command-line front end: reproducible experiments with CSV artifacts.

Subcommands: stat, saturate, train, generate, filter, bench. Commands that
write artifacts take ``--config`` (an INI document whose unknown keys are
rejected), ``--seed``, ``--out`` and ``--threads``; every run echoes its
fully resolved configuration and a manifest next to its outputs.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, synth
from .exceptions import (
    ConfigError,
    DataError,
    NumericError,
    SingularCovarianceError,
    SoftknockError,
)
from .experiments import (
    STATISTICS,
    FilterConfig,
    bench_run,
    evaluate_statistic,
    saturation_rows,
)
from .generator import TrainingConfig, load_model, sample_knockoffs, save_model, train
from .knockoff_filter import run_filter
from .stats import KernelSpec


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# CSV and config plumbing

def read_matrix_csv(path) -> np.ndarray:
    """Read a numeric CSV matrix, tolerating one header row."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"cannot read {path}: no such file")
    rows = []
    with open(p, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise DataError(f"{path} is empty")
    start = 0
    try:
        [float(tok) for tok in lines[0].split(",")]
    except ValueError:
        start = 1
    width = None
    for ln in lines[start:]:
        try:
            row = [float(tok) for tok in ln.split(",")]
        except ValueError as exc:
            raise DataError(f"{path}: non-numeric value ({exc})") from exc
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(f"{path}: ragged rows ({len(row)} vs {width})")
        rows.append(row)
    if not rows:
        raise DataError(f"{path} contains a header but no data rows")
    return np.asarray(rows, dtype=float)


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def write_csv(path, header: list[str], rows: list[dict]):
    """Comma-separated, '.'-decimal, header row, UTF-8, LF endings.

    Floats are written with round-trip precision so identical runs give
    byte-identical files.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[col]) for col in header) + "\n")


def _parse_scalar(raw: str, kind: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "floats":
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        if kind == "ints":
            return tuple(int(tok) for tok in raw.split(",") if tok.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {kind}: {exc}") from exc


# Section schemas: key -> (type, default). None defaults mean "required
# unless another mechanism supplies the value".
DATA_SCHEMA = {
    "setting": ("str", "gaussian_ar1"),
    "d": ("int", 30),
    "n_train": ("int", 1000),
    "rho": ("float", 0.5),
    "rhos": ("floats", (0.3, 0.5, 0.7)),
    "weights": ("floats", (1 / 3, 1 / 3, 1 / 3)),
    "means": ("floats", (0.0, 0.0, 0.0)),
    "dof": ("float", 3.0),
    "sparsity": ("int", 10),
}
TRAIN_SCHEMA = {
    "epochs": ("int", 100),
    "batch_size": ("int", 500),
    "learning_rate": ("float", 0.01),
    "epsilon": ("float", 10.0),
    "lambda_so": ("float", 1.0),
    "delta_corr": ("float", 1.0),
    "sinkhorn_iters": ("int", 100),
    "momentum": ("float", 0.0),
    "loss": ("str", "srmmd"),
    "bandwidths": ("floats", KernelSpec().bandwidths),
    "hidden_layers": ("int", 6),
    "hidden_multiplier": ("int", 5),
    "leaky_slope": ("float", 0.01),
}
FILTER_RUN_SCHEMA = {
    "alpha": ("float", 0.1),
    "q": ("float", 0.1),
    "num_nonzero": ("int", 10),
    "amplitudes": ("floats", (5.0, 10.0, 15.0, 20.0)),
    "repetitions": ("int", 50),
    "n_test": ("int", 1000),
    "random_signs": ("bool", True),
    "lasso_tolerance": ("float", 1e-9),
    "lasso_max_iters": ("int", 10_000),
}
GENERATE_SCHEMA = {
    "model": ("str", None),
    "input": ("str", None),
}
FILTER_IO_SCHEMA = {
    "x": ("str", None),
    "knockoffs": ("str", None),
    "y": ("str", None),
    "alpha": ("float", 0.1),
    "q": ("float", 0.1),
    "support": ("ints", ()),
    "lasso_tolerance": ("float", 1e-9),
    "lasso_max_iters": ("int", 10_000),
}
SATURATE_SCHEMA = {
    "statistic": ("str", "srmmd"),
    "shifts": ("floats", (-10.0, -5.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 5.0, 10.0)),
    "n": ("ints", (256,)),
    "d": ("ints", (2, 8)),
    "epsilon": ("floats", (0.0, 1.0, 10.0)),
    "repetitions": ("int", 20),
    "bandwidths": ("floats", KernelSpec().bandwidths),
    "sinkhorn_max_iters": ("int", 10_000),
    "sinkhorn_tolerance": ("float", 1e-6),
}

COMMAND_SECTIONS = {
    "train": {"data": DATA_SCHEMA, "train": TRAIN_SCHEMA},
    "bench": {"data": DATA_SCHEMA, "train": TRAIN_SCHEMA, "filter": FILTER_RUN_SCHEMA},
    "generate": {"generate": GENERATE_SCHEMA},
    "filter": {"filter": FILTER_IO_SCHEMA},
    "saturate": {"saturate": SATURATE_SCHEMA},
}


def load_config(path, sections: dict[str, dict]) -> dict[str, dict]:
    """Parse an INI document against the schemas, rejecting unknown keys."""
    parser = configparser.ConfigParser()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise DataError(f"cannot read config {path}: no such file")
        try:
            parser.read(p, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
    for section in parser.sections():
        if section not in sections:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in sections[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
    resolved: dict[str, dict] = {}
    for section, schema in sections.items():
        resolved[section] = {}
        for key, (kind, default) in schema.items():
            if parser.has_option(section, key):
                resolved[section][key] = _parse_scalar(parser.get(section, key), kind)
            else:
                if default is None:
                    raise ConfigError(f"missing required key '{key}' in section [{section}]")
                resolved[section][key] = default
    return resolved


def write_config_echo(out_dir: Path, resolved: dict, seed: int, threads: int):
    echo = configparser.ConfigParser()
    echo["run"] = {"seed": str(seed), "threads": str(threads)}
    for section, values in resolved.items():
        echo[section] = {
            key: ",".join(_fmt(v) for v in val) if isinstance(val, tuple) else _fmt(val)
            for key, val in values.items()
        }
    with open(out_dir / "config_echo.ini", "w", encoding="utf-8", newline="\n") as fh:
        echo.write(fh)


def write_manifest(out_dir: Path, command: str, seed: int, threads: int, started: float):
    import scipy

    manifest = {
        "command": command,
        "softknock_version": __version__,
        "python_version": sys.version.split()[0],
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "seed": seed,
        "threads": threads,
        "wall_time_seconds": time.time() - started,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def _prepare_out(args) -> Path:
    if not args.out:
        raise ConfigError("--out DIR is required for this command")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _data_spec(values: dict, seed) -> synth.SynthSpec:
    return synth.SynthSpec(
        kind=values["setting"],
        d=values["d"],
        n=values["n_train"],
        seed=seed,
        rho=values["rho"],
        rhos=values["rhos"],
        weights=values["weights"],
        means=values["means"],
        dof=values["dof"],
        sparsity=values["sparsity"],
    )


def _train_cfg(values: dict, seed: int) -> TrainingConfig:
    return TrainingConfig(
        epsilon=values["epsilon"],
        lambda_so=values["lambda_so"],
        delta_corr=values["delta_corr"],
        learning_rate=values["learning_rate"],
        batch_size=values["batch_size"],
        epochs=values["epochs"],
        seed=seed,
        kernel=KernelSpec(values["bandwidths"]),
        sinkhorn_iters=values["sinkhorn_iters"],
        momentum=values["momentum"],
        loss_kind=values["loss"],
        hidden_layers=values["hidden_layers"],
        hidden_multiplier=values["hidden_multiplier"],
        leaky_slope=values["leaky_slope"],
    )


def _filter_cfg(values: dict) -> FilterConfig:
    return FilterConfig(
        alpha=values["alpha"],
        q=values["q"],
        num_nonzero=values["num_nonzero"],
        amplitudes=values["amplitudes"],
        repetitions=values["repetitions"],
        n_test=values["n_test"],
        random_signs=values["random_signs"],
        lasso_tolerance=values["lasso_tolerance"],
        lasso_max_iters=values["lasso_max_iters"],
    )


# ---------------------------------------------------------------------------
# Commands

def cmd_stat(args) -> int:
    x = read_matrix_csv(args.x_csv)
    y = read_matrix_csv(args.y_csv)
    if x.shape[1] != y.shape[1]:
        raise DataError(
            f"width mismatch: {args.x_csv} has {x.shape[1]} columns, "
            f"{args.y_csv} has {y.shape[1]}"
        )
    kernel = KernelSpec(tuple(args.bandwidths)) if args.bandwidths else KernelSpec()
    if args.statistic in ("sre", "srmmd") and args.epsilon is None:
        raise ConfigError(f"--epsilon is required for statistic '{args.statistic}'")
    value = evaluate_statistic(
        args.statistic, x, y, epsilon=args.epsilon or 0.0, kernel=kernel
    )
    print(_fmt(float(value)))
    return 0


def cmd_saturate(args) -> int:
    started = time.time()
    resolved = load_config(args.config, COMMAND_SECTIONS["saturate"])
    out_dir = _prepare_out(args)
    sat = resolved["saturate"]
    if sat["statistic"] not in STATISTICS:
        raise ConfigError(f"statistic must be one of {STATISTICS}")
    from .ot import SinkhornConfig

    rows = saturation_rows(
        sat["statistic"],
        sat["shifts"],
        sat["n"],
        sat["d"],
        sat["epsilon"],
        sat["repetitions"],
        args.seed,
        kernel=KernelSpec(sat["bandwidths"]),
        cfg=SinkhornConfig(sat["sinkhorn_max_iters"], sat["sinkhorn_tolerance"]),
        threads=args.threads,
    )
    write_csv(
        out_dir / "saturate.csv",
        ["statistic", "s", "n", "d", "epsilon", "mean", "std_error", "repetitions"],
        rows,
    )
    write_config_echo(out_dir, resolved, args.seed, args.threads)
    write_manifest(out_dir, "saturate", args.seed, args.threads, started)
    return 0


def _write_training_log(out_dir: Path, log):
    rows = [
        {
            "epoch": i,
            "total": b.total,
            "srmmd_term": b.srmmd_term,
            "second_order_term": b.second_order_term,
            "decorrelation_term": b.decorrelation_term,
        }
        for i, b in enumerate(log)
    ]
    write_csv(
        out_dir / "training_log.csv",
        ["epoch", "total", "srmmd_term", "second_order_term", "decorrelation_term"],
        rows,
    )


def cmd_train(args) -> int:
    started = time.time()
    resolved = load_config(args.config, COMMAND_SECTIONS["train"])
    out_dir = _prepare_out(args)
    data = synth.sample(_data_spec(resolved["data"], (args.seed, 0)))
    model, log = train(data, _train_cfg(resolved["train"], args.seed))
    save_model(model, out_dir / "model.json")
    _write_training_log(out_dir, log)
    write_config_echo(out_dir, resolved, args.seed, args.threads)
    write_manifest(out_dir, "train", args.seed, args.threads, started)
    return 0


def cmd_generate(args) -> int:
    started = time.time()
    resolved = load_config(args.config, COMMAND_SECTIONS["generate"])
    out_dir = _prepare_out(args)
    model = load_model(resolved["generate"]["model"])
    x = read_matrix_csv(resolved["generate"]["input"])
    xk = sample_knockoffs(model, x, args.seed)
    header = [f"x{j}" for j in range(xk.shape[1])]
    rows = [{header[j]: float(v) for j, v in enumerate(row)} for row in xk]
    write_csv(out_dir / "knockoffs.csv", header, rows)
    write_config_echo(out_dir, resolved, args.seed, args.threads)
    write_manifest(out_dir, "generate", args.seed, args.threads, started)
    return 0


def cmd_filter(args) -> int:
    started = time.time()
    resolved = load_config(args.config, COMMAND_SECTIONS["filter"])
    out_dir = _prepare_out(args)
    vals = resolved["filter"]
    x = read_matrix_csv(vals["x"])
    xk = read_matrix_csv(vals["knockoffs"])
    yv = read_matrix_csv(vals["y"]).ravel()
    if x.shape != xk.shape:
        raise DataError(f"x shape {x.shape} does not match knockoffs shape {xk.shape}")
    support = set(vals["support"]) if vals["support"] else None
    outcome = run_filter(
        x,
        xk,
        yv,
        vals["alpha"],
        vals["q"],
        true_support=support,
        tolerance=vals["lasso_tolerance"],
        max_iters=vals["lasso_max_iters"],
    )
    sel_rows = [
        {"column": j, "w": float(outcome.w[j]), "selected": int(j in outcome.selected)}
        for j in range(x.shape[1])
    ]
    write_csv(out_dir / "selection.csv", ["column", "w", "selected"], sel_rows)
    summary = {
        "tau": float(outcome.tau),
        "n_selected": len(outcome.selected),
        "fdp": float(outcome.fdp),
        "power": float(outcome.power),
        "q": float(outcome.q),
    }
    write_csv(out_dir / "summary.csv", list(summary), [summary])
    write_config_echo(out_dir, resolved, args.seed, args.threads)
    write_manifest(out_dir, "filter", args.seed, args.threads, started)
    return 0


def cmd_bench(args) -> int:
    started = time.time()
    resolved = load_config(args.config, COMMAND_SECTIONS["bench"])
    out_dir = _prepare_out(args)
    data_spec = _data_spec(resolved["data"], 0)
    detail, aggregate, model, log = bench_run(
        data_spec,
        _train_cfg(resolved["train"], args.seed),
        _filter_cfg(resolved["filter"]),
        seed=args.seed,
        threads=args.threads,
    )
    write_csv(
        out_dir / "detail.csv",
        ["setting", "amplitude", "repetition", "fdp", "power", "tau", "n_selected"],
        detail,
    )
    write_csv(
        out_dir / "aggregate.csv",
        ["setting", "amplitude", "mean_fdr", "mean_power", "repetitions"],
        aggregate,
    )
    save_model(model, out_dir / "model.json")
    _write_training_log(out_dir, log)
    write_config_echo(out_dir, resolved, args.seed, args.threads)
    write_manifest(out_dir, "bench", args.seed, args.threads, started)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="softknock", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="INI parameter document")
        p.add_argument("--seed", type=int, default=0, help="global seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads")

    p_stat = sub.add_parser("stat", help="print one two-sample statistic")
    p_stat.add_argument("statistic", choices=STATISTICS)
    p_stat.add_argument("x_csv")
    p_stat.add_argument("y_csv")
    p_stat.add_argument("--epsilon", type=float, default=None)
    p_stat.add_argument("--bandwidths", type=float, nargs="+", default=None)
    p_stat.set_defaults(func=cmd_stat)

    for name, fn in (
        ("saturate", cmd_saturate),
        ("train", cmd_train),
        ("generate", cmd_generate),
        ("filter", cmd_filter),
        ("bench", cmd_bench),
    ):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, SingularCovarianceError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, SoftknockError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

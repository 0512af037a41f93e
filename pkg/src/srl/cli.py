"""``srl`` command line: fit, canon, complexity, bench, verify.

Settings resolve as built-in defaults, then the ``[<command>]`` table of a
``--config`` TOML file, then explicit flags.  The seed falls back to
``SRL_SEED`` when neither the file nor a flag sets it.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np
import tomli

from . import __version__, bench, canonical, complexity, verify
from .errors import ConfigError, ParseError, SRLError, VerificationError
from .estimators import Dataset, FitConfig, fit
from .modelio import FORMAT_VERSION, dumps, load_model, load_model_doc, save_model
from .network import path_norm
from .rng import stream

log = logging.getLogger("srl")

DEFAULTS: dict[str, dict[str, Any]] = {
    "fit": {
        "data": None, "mode": "constrained", "M": None, "lambda": None, "width": 16,
        "epochs": 5000, "step_size": 0.05, "batch": "full", "tolerance": 1e-9,
        "restarts": 1, "label_bound": None, "seed": 0, "out": "model.json", "threads": 1,
    },
    "canon": {"model": None, "out": None},
    "complexity": {
        "points": None, "uniform": None, "d": 1, "delta": 0.25, "M": 1.0, "width": 8,
        "class": "nn", "replicates": 200, "noise": "rademacher", "noise_scale": 1.0,
        "steps": 300, "step_size": 0.1, "restarts": 8, "trunc_level": 1.0, "seed": 0, "out": None,
    },
    "bench": {
        "regime": "variation", "alpha": 1.0, "d": 1, "mode": None, "builder": "hat",
        "teacher_width": 8, "n_grid": list(bench.DEFAULT_N_GRID), "trials": 5, "seed": 0,
        "noise": 0.5, "label_bound": 2.0, "eval_points": 20000, "constants": [1.0, 1.0, 1.0],
        "step_size": 0.1, "max_epochs": 5000, "tolerance": 1e-9, "restarts": 3,
        "out": None, "csv": None, "svg": None, "threads": 1,
    },
    "verify": {"suite": "all", "seed": 0, "out": None, "threads": 1},
}


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _batch(text: str):
    return text if text == "full" else int(text)


def read_toml(path: str, command: str) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    unknown_tables = set(doc) - set(DEFAULTS)
    if unknown_tables:
        raise ConfigError(f"{path}: unknown table(s) {sorted(unknown_tables)}")
    for name, section in doc.items():
        if not isinstance(section, dict):
            raise ConfigError(f"{path}: [{name}] must be a table")
        unknown = set(section) - set(DEFAULTS[name])
        if unknown:
            raise ConfigError(f"{path}: unknown key(s) in [{name}]: {sorted(unknown)}")
    return dict(doc.get(command, {}))


def resolve(command: str, flags: dict[str, Any], config_path: Optional[str],
            env: Optional[dict] = None) -> dict[str, Any]:
    """Defaults, then TOML, then SRL_SEED (if nothing set a seed), then flags."""
    env = os.environ if env is None else env
    cfg = dict(DEFAULTS[command])
    from_file = read_toml(config_path, command) if config_path else {}
    cfg.update(from_file)
    if "seed" in cfg and "seed" not in from_file and "seed" not in flags and env.get("SRL_SEED"):
        try:
            cfg["seed"] = int(env["SRL_SEED"])
        except ValueError:
            raise ConfigError(f"SRL_SEED must be an integer, got {env['SRL_SEED']!r}") from None
    cfg.update(flags)
    if "threads" in cfg and (not isinstance(cfg["threads"], int) or cfg["threads"] < 1):
        raise ConfigError("threads must be a positive integer")
    return cfg


def _require(cfg: dict, key: str, command: str) -> Any:
    if cfg.get(key) is None:
        raise ConfigError(f"{command}: '{key}' is required (flag or config file)")
    return cfg[key]


# --------------------------------------------------------------------------
# I/O helpers
# --------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(doc: dict, path: Optional[str]) -> str:
    text = dumps(_jsonable(doc))
    if path:
        Path(path).write_text(text)
    return text


def read_csv(path: str, want_labels: bool) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Parse ``x1,...,xd[,y]`` with a header row; errors name the offending line."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    d = len(header) - (1 if want_labels else 0)
    expected = [f"x{j}" for j in range(1, d + 1)] + (["y"] if want_labels else [])
    if d < 1 or header != expected:
        want = "x1,...,xd,y" if want_labels else "x1,...,xd"
        raise ParseError(f"{path}: line 1: header must be {want}, got {lines[0]!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric field in {line!r}") from None
    arr = np.array(rows, dtype=np.float64).reshape(-1, len(header))
    if want_labels:
        return arr[:, :d], arr[:, d]
    return arr, None


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_fit(cfg: dict) -> int:
    X, y = read_csv(_require(cfg, "data", "fit"), want_labels=True)
    B = cfg["label_bound"]
    if B is None:
        B = float(np.max(np.abs(y))) if y.size and np.max(np.abs(y)) > 0 else 1.0
        cfg["label_bound"] = B
    data = Dataset(X, y, B)
    fc = FitConfig(width=int(cfg["width"]), mode=cfg["mode"], M=cfg["M"], lam=cfg["lambda"],
                   step_size=float(cfg["step_size"]), max_epochs=int(cfg["epochs"]),
                   batch=cfg["batch"], tolerance=float(cfg["tolerance"]),
                   restarts=int(cfg["restarts"]), seed=int(cfg["seed"]))
    res = fit(data, fc, threads=cfg["threads"])
    summary = {"train_mse": res.train_mse, "penalty": res.penalty_value, "objective": res.objective,
               "kappa": path_norm(res.net), "epochs_used": res.epochs_used,
               "restart_index": res.restart_index}
    save_model(res.net, cfg["out"], extra=_jsonable({"fit": {"config": cfg, "result": summary}}))
    print(json.dumps(_jsonable({"format_version": FORMAT_VERSION, "out": cfg["out"], **summary})))
    return 0


def canon_report(net) -> dict:
    cf = canonical.canonicalize(net)
    kb = canonical.kappa_bounds(cf)
    zero = canonical.is_zero_function(canonical.to_measure(net))
    return {
        "canonical": cf.to_dict(),
        "kappa_bounds": {"lower": kb.lower, "upper": kb.upper, "ratio": kb.ratio, "case": kb.case},
        "path_norm": path_norm(net),
        "zero_function": bool(zero),
    }


def cmd_canon(cfg: dict) -> int:
    path = _require(cfg, "model", "canon")
    doc = load_model_doc(path)
    net = load_model(path)
    report = canon_report(net)
    out = cfg["out"] or str(Path(path).with_suffix("")) + ".canon.json"
    doc.update(_jsonable(report))
    doc["format_version"] = FORMAT_VERSION
    doc["canon_config"] = {"model": path, "out": out}
    write_json(doc, out)
    cf, kb = report["canonical"], report["kappa_bounds"]
    print(f"ridge atoms: {len(cf['ridge'])}")
    for c, v in cf["ridge"]:
        print(f"  {c:+.12g} * relu(<(x,1), [{', '.join(f'{t:.12g}' for t in v)}]>)")
    print(f"linear part: [{', '.join(f'{t:.12g}' for t in cf['linear'])}]")
    ratio = "n/a" if not math.isfinite(kb["ratio"]) else f"{kb['ratio']:.6g}"
    print(f"kappa bounds: [{kb['lower']:.12g}, {kb['upper']:.12g}]  ratio {ratio}  case {kb['case']}")
    print(f"path norm of input: {report['path_norm']:.12g}")
    print(f"zero function: {str(report['zero_function']).lower()}")
    print(f"wrote {out}")
    return 0


def cmd_complexity(cfg: dict) -> int:
    if (cfg["points"] is None) == (cfg["uniform"] is None):
        raise ConfigError("complexity: give exactly one of --points or --uniform")
    if cfg["points"] is not None:
        X, _ = read_csv(cfg["points"], want_labels=False)
        cfg["d"] = X.shape[1]
    else:
        n, d = int(cfg["uniform"]), int(cfg["d"])
        if n < 1 or d < 1:
            raise ConfigError("complexity: --uniform and --d must be positive")
        X = bench.uniform_ball(stream(int(cfg["seed"]), "complexity", "points"), n, d)
    cc = complexity.ComplexityConfig(
        M=float(cfg["M"]), delta=float(cfg["delta"]), width=int(cfg["width"]), noise=cfg["noise"],
        noise_scale=float(cfg["noise_scale"]), replicates=int(cfg["replicates"]), steps=int(cfg["steps"]),
        step_size=float(cfg["step_size"]), restarts=int(cfg["restarts"]), seed=int(cfg["seed"]),
        trunc_level=float(cfg["trunc_level"]))
    est = complexity.mc_local_complexity(X, cc, cls=cfg["class"])
    doc = est.to_dict()
    doc["config_echo"] = {**doc["config_echo"], "command": cfg}
    sys.stdout.write(write_json(doc, cfg["out"]))
    return 0


def _svg(report: bench.RateReport, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ns = np.array([t.n for t in report.trials if not t.diverged], dtype=float)
    risks = np.array([t.excess_risk for t in report.trials if not t.diverged])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(ns, risks, "o", alpha=0.5, label="trials")
    grid = np.array([r.n for r in report.rows], dtype=float)
    if math.isfinite(report.fitted_slope):
        ax.loglog(grid, np.exp(report.intercept) * grid**report.fitted_slope,
                  label=f"fit {report.fitted_slope:.2f}")
        anchor = np.exp(report.intercept) * grid[0] ** report.fitted_slope
        ax.loglog(grid, anchor * (grid / grid[0]) ** report.theory_slope, "--",
                  label=f"theory {report.theory_slope:.2f}")
    ax.set_xlabel("n")
    ax.set_ylabel("excess risk")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_bench(cfg: dict) -> int:
    if cfg["mode"] is None:
        cfg["mode"] = "constrained" if cfg["regime"] == "holder" else "path"
    ec = bench.ExperimentConfig(
        regime=cfg["regime"], d=int(cfg["d"]), alpha=float(cfg["alpha"]), builder=cfg["builder"],
        teacher_width=int(cfg["teacher_width"]), mode=cfg["mode"], n_grid=tuple(cfg["n_grid"]),
        trials=int(cfg["trials"]), seed=int(cfg["seed"]), noise=float(cfg["noise"]),
        label_bound=float(cfg["label_bound"]), eval_points=int(cfg["eval_points"]),
        constants=tuple(cfg["constants"]), step_size=float(cfg["step_size"]),
        max_epochs=int(cfg["max_epochs"]), tolerance=float(cfg["tolerance"]), restarts=int(cfg["restarts"]))

    def progress(rec):
        log.info("n=%d trial=%d risk=%.4g", rec.n, rec.trial, rec.excess_risk)

    report = bench.run_rate_experiment(ec, threads=cfg["threads"], progress=progress)
    doc = report.to_dict()
    doc["config"] = {**doc["config"], "command": cfg}
    write_json(doc, cfg["out"])
    if cfg["csv"]:
        Path(cfg["csv"]).write_text(f"# format_version={FORMAT_VERSION}\n" + report.csv_text())
    if cfg["svg"]:
        _svg(report, cfg["svg"])
    print(report.diagnostics())
    return 0


def cmd_verify(cfg: dict) -> int:
    if cfg["suite"] not in ("all",) + verify.SUITES:
        raise ConfigError(f"unknown suite {cfg['suite']!r}")
    results = verify.run_suite(cfg["suite"], seed=int(cfg["seed"]), threads=cfg["threads"])
    doc = {"format_version": FORMAT_VERSION, "config": cfg,
           "passed": all(r.passed for r in results), "suites": [r.to_dict() for r in results]}
    sys.stdout.write(write_json(doc, cfg["out"]))
    if not doc["passed"]:
        failed = [f"{r.name}.{k}" for r in results for k, ok in r.checks.items() if not ok]
        raise VerificationError(f"failed checks: {', '.join(failed)}")
    return 0


COMMANDS = {"fit": cmd_fit, "canon": cmd_canon, "complexity": cmd_complexity,
            "bench": cmd_bench, "verify": cmd_verify}


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="TOML file; table [<command>] mirrors the flags")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="srl", description="Norm-controlled shallow ReLU regression tools.")
    p.add_argument("--version", action="version", version=f"srl {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", parents=[common], help="fit a network to CSV data")
    f.add_argument("--data", default=S, help="CSV with header x1,...,xd,y")
    f.add_argument("--mode", choices=("constrained", "path", "l2"), default=S)
    f.add_argument("--M", type=float, default=S, help="path-norm budget (constrained mode)")
    f.add_argument("--lambda", dest="lambda", type=float, default=S, help="penalty weight (path, l2)")
    f.add_argument("--width", type=int, default=S)
    f.add_argument("--epochs", type=int, default=S)
    f.add_argument("--step-size", dest="step_size", type=float, default=S)
    f.add_argument("--batch", type=_batch, default=S, help="'full' or a minibatch size")
    f.add_argument("--tolerance", type=float, default=S)
    f.add_argument("--restarts", type=int, default=S)
    f.add_argument("--label-bound", dest="label_bound", type=float, default=S)
    f.add_argument("--seed", type=int, default=S)
    f.add_argument("--threads", type=int, default=S)
    f.add_argument("--out", default=S)

    c = sub.add_parser("canon", parents=[common], help="canonical form and path-norm bounds of a model")
    c.add_argument("model", nargs="?", default=S)
    c.add_argument("--out", default=S, help="augmented model file (default <model>.canon.json)")

    x = sub.add_parser("complexity", parents=[common], help="Monte-Carlo local complexity")
    x.add_argument("--points", default=S, help="CSV with header x1,...,xd")
    x.add_argument("--uniform", type=int, default=S, help="draw this many uniform points in the ball")
    x.add_argument("--d", type=int, default=S)
    x.add_argument("--delta", type=float, default=S)
    x.add_argument("--M", type=float, default=S)
    x.add_argument("--width", type=int, default=S)
    x.add_argument("--class", dest="class", choices=complexity.CLASSES, default=S)
    x.add_argument("--replicates", type=int, default=S)
    x.add_argument("--noise", choices=complexity.NOISE_KINDS, default=S)
    x.add_argument("--noise-scale", dest="noise_scale", type=float, default=S)
    x.add_argument("--steps", type=int, default=S)
    x.add_argument("--step-size", dest="step_size", type=float, default=S)
    x.add_argument("--restarts", type=int, default=S)
    x.add_argument("--trunc-level", dest="trunc_level", type=float, default=S)
    x.add_argument("--seed", type=int, default=S)
    x.add_argument("--out", default=S)

    b = sub.add_parser("bench", parents=[common], help="rate experiment on a synthetic target")
    b.add_argument("--regime", choices=("holder", "variation"), default=S)
    b.add_argument("--alpha", type=float, default=S)
    b.add_argument("--d", type=int, default=S)
    b.add_argument("--mode", choices=("constrained", "path", "l2"), default=S)
    b.add_argument("--builder", choices=("hat", "radial-power"), default=S)
    b.add_argument("--teacher-width", dest="teacher_width", type=int, default=S)
    b.add_argument("--n-grid", dest="n_grid", type=_int_list, default=S, help="e.g. 64,128,256,512")
    b.add_argument("--trials", type=int, default=S)
    b.add_argument("--seed", type=int, default=S)
    b.add_argument("--noise", type=float, default=S)
    b.add_argument("--label-bound", dest="label_bound", type=float, default=S)
    b.add_argument("--eval-points", dest="eval_points", type=int, default=S)
    b.add_argument("--constants", type=_float_list, default=S, help="c_M,c_N,c_lambda")
    b.add_argument("--step-size", dest="step_size", type=float, default=S)
    b.add_argument("--max-epochs", dest="max_epochs", type=int, default=S)
    b.add_argument("--tolerance", type=float, default=S)
    b.add_argument("--restarts", type=int, default=S)
    b.add_argument("--threads", type=int, default=S)
    b.add_argument("--out", default=S)
    b.add_argument("--csv", default=S)
    b.add_argument("--svg", default=S)

    v = sub.add_parser("verify", parents=[common], help="run seeded property suites")
    v.add_argument("--suite", choices=("all",) + verify.SUITES, default=S)
    v.add_argument("--seed", type=int, default=S)
    v.add_argument("--threads", type=int, default=S)
    v.add_argument("--out", default=S)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")
    verbose = args.pop("verbose")
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(command, args, config_path)
        return COMMANDS[command](cfg)
    except SRLError as exc:
        print(f"srl {command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ArithmeticError as exc:
        print(f"srl {command}: numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Synthetic regression benchmarks: targets, sample-size schedules, excess risk, rate fits."""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import ConfigError, DivergenceError
from .estimators import Dataset, FitConfig, fit
from .network import Parameterization, path_norm, truncate
from .rng import stream

log = logging.getLogger(__name__)

DEFAULT_N_GRID = (64, 128, 256, 512, 1024, 2048, 4096)


# --------------------------------------------------------------------------
# Targets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TargetSpec:
    """Regression function description.

    ``kind`` is ``"holder"`` (with ``builder`` in {"hat", "radial-power"} and
    smoothness ``alpha``) or ``"variation"`` (a width-``width`` teacher network
    with path norm one drawn from ``seed``).
    """

    kind: str = "holder"
    d: int = 1
    alpha: float = 1.0
    builder: str = "hat"
    width: int = 8
    seed: int = 0
    radius: float = 1.0
    scale: float = 1.0


@dataclass
class Target:
    fn: Callable[[np.ndarray], np.ndarray]
    spec: TargetSpec
    sup_bound: float
    holder_constant: Optional[float] = None
    teacher: Optional[Parameterization] = None
    metadata: dict = field(default_factory=dict)

    def __call__(self, X) -> np.ndarray:
        return self.fn(np.asarray(X, dtype=np.float64).reshape(-1, self.spec.d))


def make_target(spec: TargetSpec) -> Target:
    d = spec.d
    if d < 1:
        raise ConfigError("target dimension must be positive")
    if spec.kind == "holder":
        alpha = spec.alpha
        if not 0 < alpha < (d + 3) / 2:
            raise ConfigError(f"alpha={alpha} outside (0, (d+3)/2) for d={d}")
        if not 0 < alpha <= 1:
            raise ConfigError(f"builder {spec.builder!r} only certifies alpha in (0, 1], got {alpha}")
        if spec.builder == "hat":
            s, rho = spec.scale, spec.radius
            if not (0 < s <= 1 and rho >= s):
                raise ConfigError("hat target needs 0 < scale <= 1 and radius >= scale")

            def hat(X, s=s, rho=rho):
                return s * np.maximum(0.0, 1.0 - np.linalg.norm(X, axis=1) / rho)

            return Target(hat, spec, sup_bound=s, holder_constant=s / rho,
                          metadata={"lipschitz": s / rho, "sup": s})
        if spec.builder == "radial-power":

            def radial(X, alpha=alpha):
                return np.linalg.norm(X, axis=1) ** alpha

            return Target(radial, spec, sup_bound=1.0, holder_constant=1.0,
                          metadata={"holder_exponent": alpha, "sup": 1.0})
        raise ConfigError(f"unknown Hölder builder {spec.builder!r}")
    if spec.kind == "variation":
        if spec.width < 1:
            raise ConfigError("teacher width must be positive")
        rng = stream(spec.seed, "target", "teacher")
        W = rng.standard_normal((spec.width, d + 1))
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        a = rng.standard_normal(spec.width)
        a /= np.sum(np.abs(a))
        teacher = Parameterization(d, a, W)
        # |relu(<(x,1), v>)| <= ||(x,1)|| <= sqrt(2) on the ball.
        return Target(teacher, spec, sup_bound=math.sqrt(2.0) * path_norm(teacher),
                      teacher=teacher, metadata={"kappa": path_norm(teacher)})
    raise ConfigError(f"unknown target kind {spec.kind!r}")


# --------------------------------------------------------------------------
# Sampling
# --------------------------------------------------------------------------


def uniform_ball(rng: np.random.Generator, m: int, d: int) -> np.ndarray:
    """``m`` points uniform on the unit ball of ``R^d`` (polar method)."""
    g = rng.standard_normal((m, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.uniform(0.0, 1.0, m) ** (1.0 / d)
    return g * r[:, None]


def sample_dataset(target: Target, n: int, noise: float, seed: int, label_bound: float) -> Dataset:
    """Draw ``Y = h(X) + eta`` with ``X`` uniform on the ball and ``eta ~ U[-noise, noise]``."""
    if noise < 0:
        raise ConfigError("noise level must be nonnegative")
    if target.sup_bound + noise > label_bound:
        raise ConfigError(
            f"sup|h| + noise = {target.sup_bound + noise} exceeds label bound {label_bound}"
        )
    rng = stream(seed, "data")
    X = uniform_ball(rng, n, target.spec.d)
    eta = rng.uniform(-noise, noise, n) if noise > 0 else np.zeros(n)
    y = target(X) + eta
    return Dataset(X, y, label_bound)


# --------------------------------------------------------------------------
# Schedules
# --------------------------------------------------------------------------


def _frac(x) -> Fraction:
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def exponents(regime: str, d: int, alpha=None) -> dict[str, Fraction]:
    """Exact rational exponents of ``M_n``, ``N_n``, ``lambda_n / log n`` and the rate."""
    d = Fraction(d)
    if regime == "holder":
        a = _frac(alpha)
        return {
            "M": (d + 3 - 2 * a) / (2 * d + 4 * a),
            "N": d / (d + 2 * a),
            "lam": -(d + 3 + 2 * a) / (2 * d + 4 * a),
            "rate": -2 * a / (d + 2 * a),
        }
    if regime == "variation":
        return {
            "M": Fraction(0),
            "N": d / (2 * d + 3),
            "lam": -(d + 3) / (2 * d + 3),
            "rate": -(d + 3) / (2 * d + 3),
        }
    raise ConfigError(f"unknown regime {regime!r}")


def _ceil(x: float) -> int:
    # Guards against powers such as 1024**0.2 landing a hair above an integer.
    return math.ceil(x * (1.0 - 1e-12))


@dataclass(frozen=True)
class Schedule:
    regime: str
    n: int
    M: float
    N: int
    lam: float
    constants: tuple = (1.0, 1.0, 1.0)


def schedule(regime: str, n: int, d: int, alpha=None, constants=(1.0, 1.0, 1.0)) -> Schedule:
    if n < 2:
        raise ConfigError("schedules need n >= 2")
    c_M, c_N, c_lam = constants
    e = exponents(regime, d, alpha)
    if regime == "holder":
        M = c_M * n ** float(e["M"])
    else:
        if c_M < 1:
            raise ConfigError("the variation regime needs a constant M >= 1")
        M = float(c_M)
    N = _ceil(c_N * n ** float(e["N"]))
    lam = c_lam * n ** float(e["lam"]) * math.log(n)
    return Schedule(regime, n, M, N, lam, tuple(constants))


def theory_slope(regime: str, d: int, alpha=None) -> float:
    return float(exponents(regime, d, alpha)["rate"])


# --------------------------------------------------------------------------
# Risk and rates
# --------------------------------------------------------------------------


def excess_risk(net, target: Target, b: float, m: int = 20000, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo ``E|T_b f(X) - h(X)|^2`` over ``X`` uniform on the ball: (mean, stderr)."""
    if m < 100:
        raise ConfigError("excess risk needs at least 100 evaluation points")
    X = uniform_ball(stream(seed, "eval"), m, target.spec.d)
    pred = net(X) if callable(net) else np.full(m, float(net))
    err = (truncate(pred, b) - target(X)) ** 2
    return float(err.mean()), float(err.std(ddof=1) / math.sqrt(m))


def fit_slope(ns, risks) -> tuple[float, float, float]:
    """OLS of ``log risk`` on ``log n``: (slope, slope stderr, intercept)."""
    res = stats.linregress(np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(risks, dtype=float)))
    return float(res.slope), float(res.stderr), float(res.intercept)


@dataclass
class ExperimentConfig:
    regime: str = "variation"
    d: int = 1
    alpha: float = 1.0
    builder: str = "hat"
    teacher_width: int = 8
    mode: str = "path"
    n_grid: tuple = DEFAULT_N_GRID
    trials: int = 5
    seed: int = 0
    noise: float = 0.5
    label_bound: float = 2.0
    eval_points: int = 20000
    constants: tuple = (1.0, 1.0, 1.0)
    step_size: float = 0.1
    max_epochs: int = 5000
    tolerance: float = 1e-9
    restarts: int = 3

    def __post_init__(self):
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.constants = tuple(float(c) for c in self.constants)
        if len(self.n_grid) < 4 or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be strictly increasing with at least 4 entries")
        if self.trials < 3:
            raise ConfigError("trials_per_n must be at least 3")
        if self.regime not in ("holder", "variation"):
            raise ConfigError(f"unknown regime {self.regime!r}")

    def target_spec(self) -> TargetSpec:
        if self.regime == "holder":
            return TargetSpec("holder", self.d, alpha=self.alpha, builder=self.builder)
        return TargetSpec("variation", self.d, width=self.teacher_width, seed=self.seed)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n_grid"] = list(self.n_grid)
        out["constants"] = list(self.constants)
        return out


@dataclass
class TrialRecord:
    n: int
    trial: int
    excess_risk: float
    excess_risk_stderr: float
    train_mse: float
    kappa_reached: float
    seed: int
    epochs: int
    diverged: bool = False


@dataclass
class RateRow:
    n: int
    excess_risk_mean: float
    excess_risk_stderr: float
    train_mse: float
    kappa_reached: float
    flagged: bool = False


@dataclass
class RateReport:
    rows: list
    fitted_slope: float
    slope_stderr: float
    intercept: float
    theory_slope: float
    trials: list
    config: dict

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "rows": [asdict(r) for r in self.rows],
            "fitted_slope": self.fitted_slope,
            "slope_stderr": self.slope_stderr,
            "intercept": self.intercept,
            "theory_slope": self.theory_slope,
            "trials": [asdict(t) for t in self.trials],
            "config": self.config,
        }

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "trial", "excess_risk", "train_mse", "kappa_reached", "seed"])
        for t in self.trials:
            writer.writerow([t.n, t.trial, repr(t.excess_risk), repr(t.train_mse), repr(t.kappa_reached), t.seed])
        return buf.getvalue()

    def diagnostics(self) -> str:
        lines = [f"{'n':>6} {'risk':>12} {'stderr':>10} {'train_mse':>12} {'kappa':>9}"]
        for r in self.rows:
            flag = "  (flagged)" if r.flagged else ""
            lines.append(f"{r.n:>6} {r.excess_risk_mean:12.4e} {r.excess_risk_stderr:10.2e} "
                         f"{r.train_mse:12.4e} {r.kappa_reached:9.4f}{flag}")
        lines.append(f"slope {self.fitted_slope:.4f} +- {self.slope_stderr:.4f} (theory {self.theory_slope:.4f})")
        return "\n".join(lines)


def cell_seed(seed: int, n: int, trial: int) -> int:
    return int(stream(seed, "bench", "cell", n, trial).integers(0, 2**63 - 1))


def _run_cell(cfg: ExperimentConfig, target: Target, n: int, trial: int) -> TrialRecord:
    sched = schedule(cfg.regime, n, cfg.d, cfg.alpha, cfg.constants)
    seed = cell_seed(cfg.seed, n, trial)
    data = sample_dataset(target, n, cfg.noise, seed, cfg.label_bound)
    fit_cfg = FitConfig(
        width=sched.N, mode=cfg.mode,
        M=sched.M if cfg.mode == "constrained" else None,
        lam=sched.lam if cfg.mode != "constrained" else None,
        step_size=cfg.step_size, max_epochs=cfg.max_epochs,
        tolerance=cfg.tolerance, restarts=cfg.restarts, seed=seed,
    )
    try:
        res = fit(data, fit_cfg)
    except DivergenceError as exc:
        log.warning("n=%d trial=%d diverged: %s", n, trial, exc)
        nan = float("nan")
        return TrialRecord(n, trial, nan, nan, nan, nan, seed, 0, diverged=True)
    risk, se = excess_risk(res.net, target, cfg.label_bound, cfg.eval_points, seed)
    return TrialRecord(n, trial, risk, se, res.train_mse, path_norm(res.net), seed, res.epochs_used)


def run_rate_experiment(cfg: ExperimentConfig, *, threads: int = 1, progress=None) -> RateReport:
    """Fit at every (n, trial) cell, average excess risks per n and fit the log-log slope."""
    target = make_target(cfg.target_spec())
    cells = [(n, t) for n in cfg.n_grid for t in range(cfg.trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda c: _run_cell(cfg, target, *c), cells))
    else:
        records = []
        for c in cells:
            records.append(_run_cell(cfg, target, *c))
            if progress:
                progress(records[-1])
    rows = []
    for n in cfg.n_grid:
        recs = [r for r in records if r.n == n and not r.diverged]
        if len(recs) < cfg.trials:
            flagged = True
        else:
            flagged = False
        if not recs:
            nan = float("nan")
            rows.append(RateRow(n, nan, nan, nan, nan, True))
            continue
        risks = np.array([r.excess_risk for r in recs])
        rows.append(RateRow(
            n,
            float(risks.mean()),
            float(risks.std(ddof=1) / math.sqrt(len(risks))) if len(risks) > 1 else float("nan"),
            float(np.mean([r.train_mse for r in recs])),
            float(np.mean([r.kappa_reached for r in recs])),
            flagged,
        ))
    usable = [r for r in rows if not r.flagged]
    if len(usable) >= 3:
        slope, slope_se, intercept = fit_slope([r.n for r in usable], [r.excess_risk_mean for r in usable])
    else:
        slope = slope_se = intercept = float("nan")
    return RateReport(rows, slope, slope_se, intercept, theory_slope(cfg.regime, cfg.d, cfg.alpha),
                      records, cfg.to_dict())

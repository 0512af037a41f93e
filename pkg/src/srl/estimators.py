"""Constrained and regularized least squares over shallow ReLU networks.

Three estimators share one gradient loop:

* ``constrained``: minimize the empirical MSE subject to ``kappa(theta) <= M``
  (projected gradient descent, projection by outer-weight scaling);
* ``path``: MSE + ``lam * kappa(theta)`` (proximal gradient; the prox of the
  penalty soft-thresholds each ``a_i`` and shrinks each ``w_i``);
* ``l2``: MSE + ``lam / 2 * ||theta||^2`` (plain weight decay).

The objectives are nonconvex, so every fit is an approximate minimizer.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, DimensionError, DivergenceError, EmptyDataError
from .network import Parameterization, check_points, lift, path_norm, rescale_balanced, truncate
from .rng import stream

log = logging.getLogger(__name__)

MODES = ("constrained", "path", "l2")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Samples ``(x_i, y_i)`` with ``||x_i|| <= 1`` and ``|y_i| <= label_bound``."""

    X: np.ndarray
    y: np.ndarray
    label_bound: float

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if X.shape[0] == 0:
            raise EmptyDataError("dataset has no samples")
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"{X.shape[0]} inputs but {y.shape[0]} labels")
        check_points(X, X.shape[1])
        B = float(self.label_bound)
        if not B > 0:
            raise ConfigError(f"label bound must be positive, got {B}")
        if np.max(np.abs(y)) > B:
            raise ConfigError(f"label of size {np.max(np.abs(y))} exceeds the bound {B}")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "label_bound", B)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim_input(self) -> int:
        return self.X.shape[1]


@dataclass
class FitConfig:
    width: int
    mode: str = "constrained"
    M: Optional[float] = None
    lam: Optional[float] = None
    step_size: float = 0.05
    max_epochs: int = 5000
    batch: Union[str, int] = "full"
    tolerance: float = 1e-9
    restarts: int = 1
    seed: int = 0
    patience: int = 50

    def __post_init__(self):
        if self.width < 1:
            raise ConfigError("width must be at least 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "constrained" and not (self.M is not None and self.M > 0):
            raise ConfigError("constrained mode needs a positive M")
        if self.mode in ("path", "l2") and not (self.lam is not None and self.lam > 0):
            raise ConfigError(f"{self.mode} mode needs a positive lam")
        if not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        if self.max_epochs < 1 or self.restarts < 1:
            raise ConfigError("max_epochs and restarts must be at least 1")
        if self.tolerance < 0:
            raise ConfigError("tolerance must be nonnegative")
        if self.batch != "full" and not (isinstance(self.batch, int) and self.batch >= 1):
            raise ConfigError("batch must be 'full' or a positive integer")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FitResult:
    net: Parameterization
    train_mse: float
    penalty_value: float
    objective: float
    epochs_used: int
    restart_index: int
    history: list = field(default_factory=list, repr=False)


def empirical_mse(net: Parameterization, data: Dataset) -> float:
    if data.n == 0:
        raise EmptyDataError("dataset has no samples")
    if data.dim_input != net.dim_input:
        raise DimensionError(f"network has d={net.dim_input}, data has d={data.dim_input}")
    r = net(data.X) - data.y
    return float(np.mean(r * r))


def penalty(net: Parameterization, mode: str, lam: Optional[float]) -> float:
    if mode == "path":
        return lam * path_norm(net)
    if mode == "l2":
        return 0.5 * lam * net.sq_norm()
    return 0.0


def objective(net: Parameterization, data: Dataset, cfg: FitConfig) -> float:
    return empirical_mse(net, data) + penalty(net, cfg.mode, cfg.lam)


def project_kappa_ball(net: Parameterization, M: float) -> Parameterization:
    """Scale the outer weights so that ``kappa <= M``; identity on feasible nets."""
    if not M > 0:
        raise ConfigError(f"M must be positive, got {M}")
    kappa = path_norm(net)
    if kappa <= M:
        return net
    return Parameterization(net.dim_input, net.outer * (M / kappa), net.inner)


def _project_arrays(a: np.ndarray, W: np.ndarray, M: float) -> np.ndarray:
    kappa = float(np.sum(np.abs(a) * np.linalg.norm(W, axis=1)))
    return a * (M / kappa) if kappa > M else a


def initial_parameters(d: int, width: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Unit inner weights uniform on the sphere; outer weights ``+-0.1/N`` alternating."""
    W = rng.standard_normal((width, d + 1))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    a = 0.1 * np.where(np.arange(width) % 2 == 0, 1.0, -1.0) / width
    return a, W


def _prox_path(a, W, t):
    """Blockwise prox of ``t * sum |a_i| ||w_i||``: soft-threshold ``a``, then shrink ``W``."""
    norms = np.linalg.norm(W, axis=1)
    a = np.sign(a) * np.maximum(np.abs(a) - t * norms, 0.0)
    safe = np.where(norms > 0, norms, 1.0)
    W = W * np.maximum(1.0 - t * np.abs(a) / safe, 0.0)[:, None]
    return a, W


def _gradients(a, W, Xl, y, mode, lam):
    """Gradients of the smooth part (MSE, plus weight decay in l2 mode)."""
    pre = Xl @ W.T
    act = np.maximum(pre, 0.0)
    r = act @ a - y
    n = y.shape[0]
    g_a = (2.0 / n) * (act.T @ r)
    g_W = (2.0 / n) * (((pre > 0) * r[:, None]).T @ Xl) * a[:, None]
    if mode == "l2":
        g_a = g_a + lam * a
        g_W = g_W + lam * W
    return g_a, g_W


def _objective_arrays(a, W, Xl, y, mode, lam) -> tuple[float, float]:
    r = np.maximum(Xl @ W.T, 0.0) @ a - y
    mse = float(np.mean(r * r))
    if mode == "path":
        pen = lam * float(np.sum(np.abs(a) * np.linalg.norm(W, axis=1)))
    elif mode == "l2":
        pen = 0.5 * lam * float(np.sum(a * a) + np.sum(W * W))
    else:
        pen = 0.0
    return mse, pen


def _fit_once(data: Dataset, cfg: FitConfig, restart: int) -> FitResult:
    # overflow is reported as DivergenceError below, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        return _descend(data, cfg, restart)


def _descend(data: Dataset, cfg: FitConfig, restart: int) -> FitResult:
    rng = stream(cfg.seed, "fit", "restart", restart)
    d = data.dim_input
    a, W = initial_parameters(d, cfg.width, rng)
    if cfg.mode == "constrained":
        a = _project_arrays(a, W, cfg.M)
    Xl = lift(data.X)
    y = data.y
    n = data.n
    batch = n if cfg.batch == "full" else min(int(cfg.batch), n)
    mse, pen = _objective_arrays(a, W, Xl, y, cfg.mode, cfg.lam)
    history = [mse + pen]
    epochs = 0
    for epoch in range(1, cfg.max_epochs + 1):
        if batch == n:
            batches = (slice(None),)
        else:
            perm = rng.permutation(n)
            batches = [perm[k : k + batch] for k in range(0, n, batch)]
        for idx in batches:
            g_a, g_W = _gradients(a, W, Xl[idx], y[idx], cfg.mode, cfg.lam)
            a = a - cfg.step_size * g_a
            W = W - cfg.step_size * g_W
            if cfg.mode == "path":
                a, W = _prox_path(a, W, cfg.step_size * cfg.lam)
            if cfg.mode == "constrained":
                a = _project_arrays(a, W, cfg.M)
        mse, pen = _objective_arrays(a, W, Xl, y, cfg.mode, cfg.lam)
        obj = mse + pen
        if not np.isfinite(obj):
            raise DivergenceError(
                f"objective became non-finite at epoch {epoch} (restart {restart}); "
                f"reduce step_size={cfg.step_size}"
            )
        history.append(obj)
        epochs = epoch
        if epoch >= cfg.patience and history[-cfg.patience - 1] - obj < cfg.tolerance:
            break
    net = Parameterization(d, a, W)
    mse = empirical_mse(net, data)
    pen = penalty(net, cfg.mode, cfg.lam)
    return FitResult(net, mse, pen, mse + pen, epochs, restart, history)


def fit(data: Dataset, cfg: FitConfig, *, threads: int = 1) -> FitResult:
    """Fit a width-``cfg.width`` network; best restart by objective, then index."""
    if data.n == 0:
        raise EmptyDataError("dataset has no samples")
    restarts = range(cfg.restarts)
    if threads > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _fit_once(data, cfg, r), restarts))
    else:
        results = [_fit_once(data, cfg, r) for r in restarts]
    best = min(results, key=lambda res: (res.objective, res.restart_index))
    log.debug("fit: mode=%s width=%d objective=%.6g epochs=%d restart=%d",
              cfg.mode, cfg.width, best.objective, best.epochs_used, best.restart_index)
    return best


def predict_truncated(net: Parameterization, x, b: float):
    return truncate(net(x), b)


@dataclass(frozen=True)
class EquivalenceReport:
    mse: float
    lam: float
    kappa: float
    kappa_balanced: float
    sq_norm: float
    sq_norm_balanced: float
    path_objective: float
    path_objective_balanced: float
    l2_objective: float
    l2_objective_balanced: float
    checks: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def regularizer_equivalence_report(
    net: Parameterization, data: Dataset, lam: float, tol: float = 1e-10
) -> EquivalenceReport:
    """Audit the identities linking path-norm and weight-decay objectives under balancing."""
    bal = rescale_balanced(net)
    mse = empirical_mse(net, data)
    kappa, kappa_b = path_norm(net), path_norm(bal)
    sq, sq_b = net.sq_norm(), bal.sq_norm()
    path_obj, path_obj_b = mse + lam * kappa, mse + lam * kappa_b
    l2_obj, l2_obj_b = mse + 0.5 * lam * sq, mse + 0.5 * lam * sq_b
    scale = tol * max(1.0, kappa)
    checks = {
        "kappa_invariant": abs(kappa - kappa_b) <= scale,
        "balanced_sq_norm_is_twice_kappa": abs(0.5 * sq_b - kappa_b) <= scale,
        "balancing_shrinks_sq_norm": sq_b <= sq + scale,
        "l2_objective_decreases": l2_obj_b <= l2_obj + lam * scale,
        "path_equals_balanced_l2": abs(path_obj - l2_obj_b) <= lam * scale + tol,
    }
    return EquivalenceReport(mse, lam, kappa, kappa_b, sq, sq_b, path_obj, path_obj_b,
                             l2_obj, l2_obj_b, checks)

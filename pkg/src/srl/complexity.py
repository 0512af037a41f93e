"""Local complexity of norm-bounded shallow ReLU classes.

Analytic side: covering-number entropy bounds, the Dudley entropy integral
and the width-free local bound shape
``C * s * delta^(3/(d+3)) * M^(d/(d+3)) * sqrt(log(n M / delta)) / sqrt(n)``.

Monte-Carlo side: for each noise draw ``xi`` the supremum of
``|(1/n) sum_i xi_i f(X_i)|`` over the empirical ``delta``-ball of the class
is approximated by projected gradient ascent, so the reported value is a lower
estimate of the true expected supremum.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, NumericError, RangeError
from .network import check_points, lift
from .rng import stream

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


# --------------------------------------------------------------------------
# Entropy and Dudley bounds
# --------------------------------------------------------------------------


def entropy_bound(eps: float, N: int, M: float, d: int) -> float:
    """``N (d+2) log(1 + 4 sqrt(2) M / eps)``: log covering number of NN(N, M) in sup norm."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    return N * (d + 2) * math.log1p(4.0 * SQRT2 * M / eps)


def width_for_scale(eps: float, M: float, d: int) -> int:
    """Width whose NN(N, M) approximates the variation ball to ``eps / 2``."""
    x = (eps / (2.0 * M)) ** (-2.0 * d / (d + 3))
    return math.ceil(x * (1.0 - 1e-12))


def variation_entropy_bound(eps: float, M: float, d: int, *, with_flag: bool = False):
    """Width-free entropy bound for the variation ball of radius ``M``.

    Scales above ``M`` are capped at ``M``; pass ``with_flag=True`` to also get
    whether the cap was applied.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if not M > 0:
        raise DomainError(f"M must be positive, got {M}")
    capped = eps > M
    e = min(eps, M)
    value = entropy_bound(e / 2.0, width_for_scale(e, M, d), M, d)
    return (value, capped) if with_flag else value


def _sqrt_entropy(t: np.ndarray, k: np.ndarray, M: float, d: int) -> np.ndarray:
    return np.sqrt(k * (d + 2) * np.log1p(8.0 * SQRT2 * M / t))


def entropy_integral(a: float, b: float, M: float, d: int, rtol: float = 1e-6,
                     max_doublings: int = 30) -> float:
    """``int_a^b sqrt(variation_entropy_bound(t)) dt`` for ``0 < a <= b <= M``.

    The width ``N(t)`` is a step function, so the range is split at its jumps
    and composite Simpson runs on all smooth pieces at once, doubling the
    number of panels until the relative change drops below ``rtol``.
    """
    if b <= a:
        return 0.0
    if not a > 0:
        raise DomainError("lower integration limit must be positive")
    q = 2.0 * d / (d + 3)
    k_lo, k_hi = width_for_scale(b, M, d), width_for_scale(a, M, d)
    ks = np.arange(k_lo, k_hi + 1, dtype=np.float64)
    if ks.size > 5_000_000:
        raise NumericError(f"entropy integral over [{a:.3g}, {b:.3g}] needs {ks.size} pieces")
    # Width equals k on [2M k^(-1/q), 2M (k-1)^(-1/q)).
    left = np.maximum(a, 2.0 * M * ks ** (-1.0 / q))
    with np.errstate(divide="ignore"):
        right = np.minimum(b, np.where(ks > 1, 2.0 * M * (ks - 1) ** (-1.0 / q), np.inf))
    keep = right > left
    left, right, ks = left[keep], right[keep], ks[keep]
    panels = 2
    prev = None
    for _ in range(max_doublings):
        u = np.linspace(0.0, 1.0, panels + 1)
        t = left[:, None] + (right - left)[:, None] * u[None, :]
        f = _sqrt_entropy(t, ks[:, None], M, d)
        w = np.ones(panels + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        total = float(np.sum((right - left) / (3.0 * panels) * (f @ w)))
        if prev is not None and abs(total - prev) <= rtol * abs(total):
            return total
        prev = total
        panels *= 2
    raise NumericError(
        f"Simpson quadrature did not reach rtol={rtol} on [{a:.6g}, {b:.6g}] "
        f"after {max_doublings} doublings (last change {abs(total - prev):.3g})"
    )


@dataclass(frozen=True)
class DudleyResult:
    value: float
    eps: float
    integral: float


def dudley_objective(eps: float, delta: float, M: float, d: int, n: int) -> float:
    return 4.0 * eps + 16.0 / math.sqrt(n) * entropy_integral(eps, delta, M, d)


def dudley_bound(delta: float, M: float, d: int, n: int, *, full: bool = False):
    """``inf_{0 <= eps <= delta} 4 eps + (16/sqrt(n)) int_eps^delta sqrt(H(t)) dt``.

    ``H`` is :func:`variation_entropy_bound`.  The objective is convex in
    ``eps`` (its derivative ``4 - 16 sqrt(H(eps)) / sqrt(n)`` is non-decreasing),
    so the minimizer is where ``sqrt(H(eps))`` first drops to ``sqrt(n) / 4``;
    that point is located by bisection.
    """
    if not 0 < delta <= M:
        raise DomainError(f"need 0 < delta <= M, got delta={delta}, M={M}")
    if n < 1:
        raise DomainError("n must be positive")
    level = math.sqrt(n) / 4.0

    def steep(eps):  # objective still decreasing at eps
        return math.sqrt(variation_entropy_bound(eps, M, d)) > level

    if steep(delta):
        eps = delta
    else:
        lo, hi = delta * 1e-30, delta
        if not steep(lo):
            raise NumericError(f"entropy below sqrt(n)/4 even at eps={lo:.3g}")
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if steep(mid):
                lo = mid
            else:
                hi = mid
            if hi / lo - 1.0 < 1e-13:
                break
        eps = hi
    integral = entropy_integral(eps, delta, M, d)
    value = 4.0 * eps + 16.0 / math.sqrt(n) * integral
    return DudleyResult(value, eps, integral) if full else value


def local_bound_shape(delta: float, M: float, n: int, d: int, scale: float = 1.0, C: float = 1.0) -> float:
    """``C * scale * delta^(3/(d+3)) * M^(d/(d+3)) * sqrt(log(n M / delta)) / sqrt(n)``."""
    if not 0 < delta <= M:
        raise DomainError(f"need 0 < delta <= M, got delta={delta}, M={M}")
    if n < 2:
        raise DomainError("need n >= 2")
    if not n * M / delta > 1:
        raise DomainError("need n M / delta > 1")
    if scale < 0 or C < 0:
        raise DomainError("scale and C must be nonnegative")
    return (C * scale * delta ** (3.0 / (d + 3)) * M ** (d / (d + 3))
            * math.sqrt(math.log(n * M / delta)) / math.sqrt(n))


def fixed_point_radius(bound: Callable[[float], float], c: float, hi: float,
                       lo: float = 1e-8, rtol: float = 1e-12) -> float:
    """Smallest ``delta`` in ``[lo, hi]`` with ``bound(delta) <= c * delta**2``.

    Requires ``bound(delta) / delta`` to be non-increasing, which makes
    ``bound(delta) / delta - c * delta`` decreasing; bisection (in log scale)
    brackets its sign change.
    """
    if not c > 0:
        raise DomainError("c must be positive")

    def ok(delta):
        return bound(delta) <= c * delta * delta

    if not ok(hi):
        raise RangeError(f"no crossing in [{lo:.3g}, {hi:.3g}]: bound({hi:.6g})={bound(hi):.6g} "
                         f"> c*hi^2={c * hi * hi:.6g}")
    if ok(lo):
        raise RangeError(f"no crossing in [{lo:.3g}, {hi:.3g}]: bound({lo:.3g})={bound(lo):.6g} "
                         f"<= c*lo^2={c * lo * lo:.6g} already")
    while hi / lo - 1.0 > rtol:
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------------------------------------------------------
# Monte-Carlo local complexity
# --------------------------------------------------------------------------

NOISE_KINDS = ("rademacher", "bounded", "subgaussian")
CLASSES = ("nn", "star-trunc")


@dataclass
class ComplexityConfig:
    """Settings for :func:`mc_local_complexity`.

    ``noise_scale`` is ``B`` for bounded noise (draws uniform on ``{-B, B}``)
    and the standard deviation for Gaussian (sub-Gaussian) noise.
    """

    M: float = 1.0
    delta: float = 0.25
    width: int = 8
    noise: str = "rademacher"
    noise_scale: float = 1.0
    replicates: int = 200
    steps: int = 300
    step_size: float = 0.1
    restarts: int = 8
    seed: int = 0
    trunc_level: float = 1.0
    chunk: int = 25

    def __post_init__(self):
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"noise must be one of {NOISE_KINDS}")
        if self.M < 0 or not self.delta > 0:
            raise ConfigError("need M >= 0 and delta > 0")
        if self.M > 0 and self.delta > self.M:
            raise ConfigError(f"need delta <= M, got delta={self.delta}, M={self.M}")
        if self.replicates < 1 or self.restarts < 1 or self.width < 1 or self.steps < 0:
            raise ConfigError("replicates, restarts and width must be positive")

    @property
    def subgaussian_scale(self) -> float:
        return 1.0 if self.noise == "rademacher" else float(self.noise_scale)


@dataclass
class ComplexityEstimate:
    mc_value: float
    std_error: float
    analytic_bound: float
    dudley_bound: float
    replicate_values: np.ndarray = field(repr=False)
    lower_estimate: bool = True
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "mc_value": self.mc_value,
            "std_error": self.std_error,
            "analytic_bound": self.analytic_bound,
            "dudley_bound": self.dudley_bound,
            "mc_value_is_lower_estimate": self.lower_estimate,
            "config_echo": self.config,
        }


def draw_noise(cfg: ComplexityConfig, n: int, replicate: int) -> np.ndarray:
    rng = stream(cfg.seed, "complexity", "xi", replicate)
    if cfg.noise == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=n)
    if cfg.noise == "bounded":
        return cfg.noise_scale * rng.choice(np.array([-1.0, 1.0]), size=n)
    return cfg.noise_scale * rng.standard_normal(n)


def _ball_objective(f: np.ndarray, xi: np.ndarray, delta: float):
    """Value and gradient (in ``f``) of ``<xi, f>/n * min(1, delta / ||f||_n)``.

    ``f`` and ``xi`` broadcast over leading batch axes; the sample axis is last.
    """
    n = f.shape[-1]
    A = np.sum(xi * f, axis=-1) / n
    rho = np.sqrt(np.mean(f * f, axis=-1))
    inside = rho <= delta
    safe = np.where(inside, 1.0, rho)
    value = np.where(inside, A, delta * (A / safe))
    grad_out = delta * (xi / n / safe[..., None] - (A / safe**3)[..., None] * f / n)
    grad = np.where(inside[..., None], xi / n + 0.0 * f, grad_out)
    return value, grad


def _sup_finite(values: np.ndarray, xi: np.ndarray, delta: float) -> float:
    """Exact sup over the star hull of finitely many functions (rows of ``values``)."""
    v, _ = _ball_objective(values, xi, delta)
    return float(np.max(np.abs(v)))


def _sup_network(Xl: np.ndarray, xis: np.ndarray, cfg: ComplexityConfig, replicate0: int,
                 truncated: Optional[float] = None) -> np.ndarray:
    """Projected gradient ascent over ``NN(width, M)`` (or its truncated star hull)
    for a chunk of noise vectors ``xis`` (R, n); returns the best value per row."""
    R, n = xis.shape
    K, N, D = cfg.restarts, cfg.width, Xl.shape[1]
    M, delta = cfg.M, cfg.delta
    a = np.empty((R, K, N))
    W = np.empty((R, K, N, D))
    for r in range(R):
        rng = stream(cfg.seed, "complexity", "init", replicate0 + r)
        V = rng.standard_normal((K, N, D))
        V /= np.linalg.norm(V, axis=-1, keepdims=True)
        c = rng.choice(np.array([-1.0, 1.0]), size=(K, N)) * (M / N)
        # balanced start: |a_i| = ||w_i|| = sqrt(|c_i|)
        a[r] = np.sign(c) * np.sqrt(np.abs(c))
        W[r] = V * np.sqrt(np.abs(c))[..., None]
    xi = xis[:, None, :]
    best = np.zeros((R, K))
    scale0 = math.sqrt(M / N)
    for step in range(cfg.steps + 1):
        pre = np.einsum("rknj,ij->rkni", W, Xl)
        act = np.maximum(pre, 0.0)
        f = np.einsum("rkni,rkn->rki", act, a)
        if truncated is not None:
            g_mask = np.abs(f) < truncated
            f = np.clip(f, -truncated, truncated)
        value, g_f = _ball_objective(f, xi, delta)
        best = np.maximum(best, np.abs(value))
        if step == cfg.steps:
            break
        if truncated is not None:
            g_f = g_f * g_mask
        g_a = np.einsum("rkni,rki->rkn", act, g_f)
        g_W = np.einsum("rkni,rki,ij->rknj", (pre > 0).astype(np.float64), g_f, Xl) * a[..., None]
        gnorm = np.sqrt(np.sum(g_a**2, axis=-1) + np.sum(g_W**2, axis=(-1, -2)))
        gnorm = np.where(gnorm > 0, gnorm, 1.0)
        eta = cfg.step_size * scale0 * (1.0 - step / cfg.steps) / gnorm
        a = a + eta[..., None] * g_a
        W = W + eta[..., None, None] * g_W
        # rebalance atoms, then scale onto the path-norm ball
        norms = np.linalg.norm(W, axis=-1)
        prod = np.abs(a) * norms
        live = prod > 0
        ratio = np.sqrt(np.where(live, np.abs(a), 0.0) / np.where(live, norms, 1.0))
        W = W * ratio[..., None]
        a = np.where(live, np.sign(a) * np.sqrt(prod), 0.0)
        kappa = np.sum(prod, axis=-1)
        shrink = np.where(kappa > M, M / np.where(kappa > 0, kappa, 1.0), 1.0)
        a = a * shrink[..., None]
    return best.max(axis=1)


def mc_local_complexity(points, cfg: ComplexityConfig, cls: str = "nn",
                        evaluators: Optional[Sequence] = None) -> ComplexityEstimate:
    """Monte-Carlo estimate of ``E sup_{f in F, ||f||_n <= delta} |(1/n) sum xi_i f(X_i)|``.

    ``cls`` is ``"nn"`` for ``NN(width, M)`` or ``"star-trunc"`` for the star hull
    of the ``trunc_level``-truncated class.  Passing ``evaluators`` (callables or
    value vectors on ``points``) replaces the network class by the star hull of
    those functions, for which the supremum is exact.
    """
    if cls not in CLASSES:
        raise ConfigError(f"class must be one of {CLASSES}")
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    d = X.shape[1]
    X = check_points(X, d)
    n = X.shape[0]
    echo = asdict(cfg)
    echo.update({"class": cls, "n": n, "d": d})
    s = cfg.subgaussian_scale
    if cfg.M == 0 and evaluators is None:
        zeros = np.zeros(cfg.replicates)
        return ComplexityEstimate(0.0, 0.0, 0.0, 0.0, zeros, True, echo)
    xis = np.stack([draw_noise(cfg, n, r) for r in range(cfg.replicates)])
    if evaluators is not None:
        vals = np.stack([np.asarray(e(X) if callable(e) else e, dtype=np.float64).reshape(n)
                         for e in evaluators])
        reps = np.array([_sup_finite(vals, xi, cfg.delta) for xi in xis])
    else:
        Xl = lift(X)
        chunks = []
        for start in range(0, cfg.replicates, cfg.chunk):
            block = xis[start : start + cfg.chunk]
            trunc = cfg.trunc_level if cls == "star-trunc" else None
            chunks.append(_sup_network(Xl, block, cfg, start, trunc))
        reps = np.concatenate(chunks)
        if not np.all(np.isfinite(reps)):
            raise NumericError("inner maximization produced non-finite values")
    mean = float(np.mean(reps))
    se = float(np.std(reps, ddof=1) / math.sqrt(len(reps))) if len(reps) > 1 else 0.0
    if cfg.M > 0 and n >= 2 and cfg.delta <= cfg.M and n * cfg.M / cfg.delta > 1:
        analytic = local_bound_shape(cfg.delta, cfg.M, n, d, s)
        dudley = s * dudley_bound(cfg.delta, cfg.M, d, n)
    else:
        analytic = dudley = float("nan")
    return ComplexityEstimate(mean, se, analytic, dudley, reps, True, echo)


def calibrate_constant(mc_value: float, delta: float, M: float, n: int, d: int, scale: float = 1.0) -> float:
    """Constant ``C`` making :func:`local_bound_shape` equal ``mc_value`` at one point."""
    return mc_value / local_bound_shape(delta, M, n, d, scale)

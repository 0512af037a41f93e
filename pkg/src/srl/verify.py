"""Seeded property suites behind ``srl verify``.

Each suite returns a :class:`SuiteResult` with the measured quantities and a
pass/fail flag per check, so callers (CLI, tests) can report or assert on
the same numbers.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from . import bench, canonical, complexity
from .network import Parameterization, evaluate, path_norm, rescale_balanced
from .rng import stream

SUITES = ("canonical", "rescale", "complexity", "rates")


@dataclass
class SuiteResult:
    name: str
    checks: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "checks": self.checks,
                "metrics": self.metrics, "seconds": round(self.seconds, 3)}


def ball_points(rng: np.random.Generator, m: int, d: int) -> np.ndarray:
    if d == 1:
        return np.linspace(-1.0, 1.0, m).reshape(-1, 1)
    pts = bench.uniform_ball(rng, m, d)
    # a slice of boundary points, where ridges are furthest from linear
    k = m // 10
    pts[:k] /= np.linalg.norm(pts[:k], axis=1, keepdims=True)
    return pts


def random_network(rng: np.random.Generator, d: int, width: int, inject: bool) -> Parameterization:
    """Standard normal weights; with ``inject`` also parallel and antipodal copies of some atoms."""
    a = rng.standard_normal(width)
    W = rng.standard_normal((width, d + 1))
    if inject and width >= 2:
        picks = rng.choice(width, size=max(1, width // 4), replace=False)
        scales = rng.uniform(0.3, 3.0, picks.size) * rng.choice([-1.0, 1.0], picks.size)
        a = np.concatenate([a, rng.standard_normal(picks.size)])
        W = np.concatenate([W, W[picks] * scales[:, None]])
        if W.shape[0] > 32:
            a, W = a[:32], W[:32]
    return Parameterization(d, a, W)


# --------------------------------------------------------------------------
# canonical
# --------------------------------------------------------------------------


def check_canonicalization(seed: int = 0, count: int = 200, points: int = 10_000) -> dict:
    rng = stream(seed, "verify", "canonical")
    worst_dev = 0.0
    worst_ratio = 0.0
    for i in range(count):
        d = int(rng.integers(1, 4))
        width = int(rng.integers(1, 33))
        net = random_network(rng, d, width, inject=bool(i % 2))
        X = ball_points(rng, points, d)
        cf = canonical.canonicalize(net)
        dev = float(np.max(np.abs(evaluate(net, X) - cf(X)))) / (1.0 + path_norm(net))
        kb = canonical.kappa_bounds(cf)
        worst_dev = max(worst_dev, dev)
        if kb.lower > 0:
            worst_ratio = max(worst_ratio, kb.upper / kb.lower)
    return {"networks": count, "max_normalized_deviation": worst_dev, "max_kappa_ratio": worst_ratio}


def zero_measure(rng: np.random.Generator, d: int) -> canonical.DiscreteMeasure:
    """A random measure satisfying both conditions of the zero-function characterization."""
    pairs = int(rng.integers(1, 5))
    coefs, dirs = [], []
    pair_sum = np.zeros(d + 1)
    for _ in range(pairs):
        head = rng.standard_normal(d)
        head /= np.linalg.norm(head)
        last = rng.uniform(-0.5, 0.5)
        u = np.concatenate([head * math.sqrt(1 - last * last), [last]])
        c = rng.standard_normal()
        coefs += [c, -c]
        dirs += [u, -u]
        pair_sum += c * u
    P = []
    for _ in range(d + 1):
        head = rng.standard_normal(d)
        head /= np.linalg.norm(head)
        last = rng.uniform(0.8, 1.0)
        P.append(np.concatenate([head * math.sqrt(1 - last * last), [last]]))
    P = np.array(P)
    b = np.linalg.solve(P.T, -pair_sum)
    coefs += list(b)
    dirs += list(P)
    for _ in range(int(rng.integers(0, 3))):
        head = rng.standard_normal(d)
        head /= np.linalg.norm(head)
        last = rng.uniform(-1.0, -0.75)
        dirs.append(np.concatenate([head * math.sqrt(1 - last * last), [last]]))
        coefs.append(rng.standard_normal())
    return canonical.DiscreteMeasure.build(d, coefs, np.array(dirs))


def check_zero_characterization(seed: int = 0, count: int = 50, points: int = 1000, bump: float = 1e-2) -> dict:
    rng = stream(seed, "verify", "zero-function")
    worst_zero = 0.0
    weakest_perturbed = math.inf
    certified = 0
    rejected = 0
    for _ in range(count):
        d = int(rng.integers(1, 4))
        m = zero_measure(rng, d)
        X = ball_points(rng, points, d)
        worst_zero = max(worst_zero, float(np.max(np.abs(m(X)))))
        certified += bool(canonical.is_zero_function(m))
        # S_minus atoms are invisible on the ball, so only the others are perturbed
        live = [i for i, r in enumerate(m.regions) if r != canonical.S_MINUS]
        i = int(rng.choice(live))
        c = m.coefficients.copy()
        c[i] += bump * rng.choice([-1.0, 1.0])
        pm = canonical.DiscreteMeasure.build(d, c, m.directions)
        weakest_perturbed = min(weakest_perturbed, float(np.max(np.abs(pm(X)))))
        rejected += not canonical.is_zero_function(pm)
    return {"measures": count, "max_abs_zero_measure": worst_zero,
            "min_max_abs_perturbed": weakest_perturbed,
            "certified_zero": certified, "perturbed_rejected": rejected}


def canonical_suite(seed: int = 0) -> SuiteResult:
    t = time.perf_counter()
    res = SuiteResult("canonical")
    canon = check_canonicalization(seed)
    zero = check_zero_characterization(seed)
    res.metrics.update(canon)
    res.metrics.update(zero)
    res.checks["function_preserved"] = canon["max_normalized_deviation"] <= 1e-9
    res.checks["kappa_ratio_at_most_3"] = canon["max_kappa_ratio"] <= 3 + 1e-12
    res.checks["zero_measures_vanish"] = zero["max_abs_zero_measure"] <= 1e-9
    res.checks["perturbations_visible"] = zero["min_max_abs_perturbed"] > 1e-4
    res.checks["zero_test_agrees"] = (zero["certified_zero"] == zero["measures"]
                                      and zero["perturbed_rejected"] == zero["measures"])
    res.seconds = time.perf_counter() - t
    return res


# --------------------------------------------------------------------------
# rescale
# --------------------------------------------------------------------------


def check_rescaling(seed: int = 0, count: int = 1000, points: int = 200) -> dict:
    rng = stream(seed, "verify", "rescale")
    kappa_err = norm_err = fn_err = 0.0
    worst_growth = -math.inf
    for _ in range(count):
        d = int(rng.integers(1, 4))
        net = random_network(rng, d, int(rng.integers(1, 33)), inject=False)
        bal = rescale_balanced(net)
        k = path_norm(net)
        kappa_err = max(kappa_err, abs(path_norm(bal) - k))
        norm_err = max(norm_err, abs(bal.sq_norm() / 2 - k))
        worst_growth = max(worst_growth, bal.sq_norm() - net.sq_norm())
        X = bench.uniform_ball(rng, points, d)
        fn_err = max(fn_err, float(np.max(np.abs(evaluate(bal, X) - evaluate(net, X)))))
    return {"networks": count, "max_kappa_change": kappa_err, "max_half_sq_norm_gap": norm_err,
            "max_function_change": fn_err, "max_sq_norm_growth": worst_growth}


def rescale_suite(seed: int = 0) -> SuiteResult:
    t = time.perf_counter()
    res = SuiteResult("rescale")
    m = check_rescaling(seed)
    res.metrics.update(m)
    res.checks["kappa_invariant"] = m["max_kappa_change"] <= 1e-12
    res.checks["half_sq_norm_equals_kappa"] = m["max_half_sq_norm_gap"] <= 1e-12
    res.checks["function_invariant"] = m["max_function_change"] <= 1e-9
    res.checks["sq_norm_not_increased"] = m["max_sq_norm_growth"] <= 1e-12
    res.seconds = time.perf_counter() - t
    return res


# --------------------------------------------------------------------------
# complexity
# --------------------------------------------------------------------------

GRID_N = (32, 128, 512)
GRID_DELTA = (0.125, 0.25, 0.5)


def complexity_grid(seed: int = 0, replicates: int = 100, M: float = 1.0, width: int = 8) -> dict:
    """MC local Rademacher complexity of NN(width, M), d = 1, on the (n, delta) grid."""
    table = {}
    for n in GRID_N:
        X = bench.uniform_ball(stream(seed, "verify", "complexity", "points", n), n, 1)
        for delta in GRID_DELTA:
            cfg = complexity.ComplexityConfig(M=M, delta=delta, width=width, replicates=replicates, seed=seed)
            est = complexity.mc_local_complexity(X, cfg)
            table[(n, delta)] = (est.mc_value, est.std_error)
    return table


def complexity_shape_checks(table: dict, M: float = 1.0, d: int = 1) -> dict:
    def comb(*ses):
        return 3.0 * math.sqrt(sum(s * s for s in ses))

    mono = shape = scaling = bound = True
    worst = {"monotone": -math.inf, "normalized": -math.inf, "scaling": -math.inf, "bound": -math.inf}
    for n in GRID_N:
        for d1, d2 in combinations(GRID_DELTA, 2):
            (v1, s1), (v2, s2) = table[(n, d1)], table[(n, d2)]
            gap = v1 - v2 - comb(s1, s2)
            worst["monotone"] = max(worst["monotone"], gap)
            mono &= gap <= 0
        for d1 in GRID_DELTA:
            d2 = 2 * d1
            if (n, d2) in table:
                (v1, s1), (v2, s2) = table[(n, d1)], table[(n, d2)]
                gap = v2 / d2 - v1 / d1 - comb(s1 / d1, s2 / d2)
                worst["normalized"] = max(worst["normalized"], gap)
                shape &= gap <= 0
    for delta in GRID_DELTA:
        for n1, n2 in combinations(GRID_N, 2):
            (v1, s1), (v2, s2) = table[(n1, delta)], table[(n2, delta)]
            gap = abs(v1 * math.sqrt(n1) - v2 * math.sqrt(n2)) - comb(s1 * math.sqrt(n1), s2 * math.sqrt(n2))
            worst["scaling"] = max(worst["scaling"], gap)
            scaling &= gap <= 0
    n0, delta0 = GRID_N[0], GRID_DELTA[-1]
    C = complexity.calibrate_constant(table[(n0, delta0)][0], delta0, M, n0, d)
    for (n, delta), (v, _) in table.items():
        gap = v - complexity.local_bound_shape(delta, M, n, d, 1.0, C)
        worst["bound"] = max(worst["bound"], gap)
        bound &= gap <= 1e-15 * max(1.0, v)
    return {"monotone_in_delta": mono, "normalized_non_increasing": shape,
            "root_n_scaling": scaling, "below_calibrated_shape": bound,
            "calibrated_C": C, "worst_gaps": worst}


FIXED_POINT_CASES = [
    (a, d, c)
    for a, d, c in [
        (0.1, 1, 1.0), (0.5, 1, 1.0), (1.0, 1, 1.0), (2.0, 1, 0.5), (5.0, 1, 4.0),
        (0.3, 2, 1.0), (0.7, 2, 2.0), (1.5, 2, 0.5), (3.0, 2, 3.0), (0.05, 2, 0.25),
        (0.2, 3, 1.0), (0.9, 3, 0.7), (2.5, 3, 1.5), (4.0, 3, 8.0), (0.01, 3, 0.1),
        (1.0, 5, 1.0), (0.4, 5, 0.2), (6.0, 10, 2.0), (0.25, 10, 1.0), (1.2, 7, 0.9),
    ]
]


def check_fixed_points() -> dict:
    worst = 0.0
    for a, d, c in FIXED_POINT_CASES:
        p = 3.0 / (d + 3)
        got = complexity.fixed_point_radius(lambda t: a * t**p, c, hi=1e6)
        exact = (a / c) ** ((d + 3) / (2 * d + 3))
        worst = max(worst, abs(got - exact) / exact)
    return {"cases": len(FIXED_POINT_CASES), "max_relative_error": worst}


def complexity_suite(seed: int = 0, replicates: int = 100) -> SuiteResult:
    t = time.perf_counter()
    res = SuiteResult("complexity")
    table = complexity_grid(seed, replicates)
    shape = complexity_shape_checks(table)
    fp = check_fixed_points()
    res.metrics["grid"] = {f"n={n},delta={dl}": {"mc_value": v, "std_error": s} for (n, dl), (v, s) in table.items()}
    res.metrics["calibrated_C"] = shape["calibrated_C"]
    res.metrics["worst_gaps"] = shape["worst_gaps"]
    res.metrics["fixed_point"] = fp
    for key in ("monotone_in_delta", "normalized_non_increasing", "root_n_scaling", "below_calibrated_shape"):
        res.checks[key] = bool(shape[key])
    res.checks["fixed_point_closed_form"] = fp["max_relative_error"] <= 1e-9
    res.seconds = time.perf_counter() - t
    return res


# --------------------------------------------------------------------------
# rates
# --------------------------------------------------------------------------

EXPONENT_TABLE = {
    # (d, alpha): (M, N, lambda / log n, rate) exponents, hand reduced
    (1, Fraction(1)): (Fraction(1, 3), Fraction(1, 3), Fraction(-1), Fraction(-2, 3)),
    (2, Fraction(1)): (Fraction(3, 8), Fraction(1, 2), Fraction(-7, 8), Fraction(-1, 2)),
    (1, Fraction(1, 2)): (Fraction(3, 4), Fraction(1, 2), Fraction(-5, 4), Fraction(-1, 2)),
    (3, Fraction(2)): (Fraction(1, 7), Fraction(3, 7), Fraction(-5, 7), Fraction(-4, 7)),
}
VARIATION_TABLE = {1: (Fraction(1, 5), Fraction(-4, 5)), 2: (Fraction(2, 7), Fraction(-5, 7)),
                   3: (Fraction(1, 3), Fraction(-2, 3))}


def check_exponents() -> bool:
    ok = True
    for (d, alpha), expected in EXPONENT_TABLE.items():
        e = bench.exponents("holder", d, alpha)
        ok &= (e["M"], e["N"], e["lam"], e["rate"]) == expected
    for d, (n_exp, rate) in VARIATION_TABLE.items():
        e = bench.exponents("variation", d)
        ok &= (e["N"], e["lam"], e["rate"]) == (n_exp, rate, rate)
    return bool(ok)


def check_oracle_risk(seed: int = 0, m: int = 20000) -> dict:
    target = bench.make_target(bench.TargetSpec("holder", 1, alpha=1.0, builder="hat"))
    mean, se = bench.excess_risk(lambda X: np.zeros(X.shape[0]), target, b=2.0, m=m, seed=seed)
    return {"risk": mean, "stderr": se, "exact": 1.0 / 3.0, "z": abs(mean - 1.0 / 3.0) / se}


def rate_experiments(seed: int = 0, threads: int = 1) -> dict:
    var = bench.run_rate_experiment(bench.ExperimentConfig(regime="variation", mode="path", seed=seed),
                                    threads=threads)
    hol = bench.run_rate_experiment(bench.ExperimentConfig(regime="holder", mode="constrained",
                                                           alpha=1.0, builder="hat", seed=seed),
                                    threads=threads)
    return {"variation": var, "holder": hol}


def rates_suite(seed: int = 0, threads: int = 1) -> SuiteResult:
    t = time.perf_counter()
    res = SuiteResult("rates")
    res.checks["schedule_exponents"] = check_exponents()
    oracle = check_oracle_risk(seed)
    res.metrics["oracle_risk"] = oracle
    res.checks["oracle_risk_within_3_stderr"] = oracle["z"] <= 3.0
    reports = rate_experiments(seed, threads)
    var, hol = reports["variation"], reports["holder"]
    res.metrics["variation"] = {"slope": var.fitted_slope, "stderr": var.slope_stderr,
                                "theory": var.theory_slope, "table": var.diagnostics()}
    res.metrics["holder"] = {"slope": hol.fitted_slope, "stderr": hol.slope_stderr,
                             "theory": hol.theory_slope, "table": hol.diagnostics()}
    res.checks["variation_slope"] = var.fitted_slope <= -0.45 and var.slope_stderr <= 0.15
    res.checks["holder_slope"] = hol.fitted_slope <= -0.40
    res.seconds = time.perf_counter() - t
    return res


def run_suite(name: str, seed: int = 0, threads: int = 1) -> list[SuiteResult]:
    if name == "all":
        return [r for s in SUITES for r in run_suite(s, seed, threads)]
    if name == "canonical":
        return [canonical_suite(seed)]
    if name == "rescale":
        return [rescale_suite(seed)]
    if name == "complexity":
        return [complexity_suite(seed)]
    if name == "rates":
        return [rates_suite(seed, threads)]
    raise ValueError(f"unknown suite {name!r}")

"""Sphere measures, the reduced (canonical) form and two-sided variation-norm bounds.

A finite network ``sum_i a_i relu(<(x,1), w_i>)`` equals ``f_mu`` for the
discrete measure ``mu = sum_i a_i ||w_i|| delta_{w_i / ||w_i||}`` on the sphere
``S^d`` of ``R^{d+1}``.  The sphere splits into three regions according to the
last (bias) coordinate of a direction ``v``:

* ``S_minus`` (``v_{d+1} <= -sqrt(2)/2``): the ridge vanishes on the unit ball,
* ``S_plus``  (``v_{d+1} >=  sqrt(2)/2``): the ridge is linear on the unit ball,
* ``S_zero``  (everything else): the ridge has a kink inside the ball.

Any network reduces to ``sum_k c_k relu(<(x,1), v_k>) + <(x,1), w>`` with
pairwise non-antipodal ``v_k`` in ``S_zero``.  From this form the variation
norm ``kappa(f)`` is bracketed within a factor of three.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateDirectionError, DimensionError
from .network import Parameterization, check_points, lift, path_norm, relu

S_MINUS = "S_minus"
S_PLUS = "S_plus"
S_ZERO = "S_zero"

HALF_SQRT2 = np.sqrt(2.0) / 2.0
ANGLE_TOL = 1e-12
COEF_DROP = 1e-14
ZERO_W_TOL = 1e-12
ZERO_TEST_TOL = 1e-10
# Last coordinates within this distance of +-sqrt(2)/2 count as on the boundary,
# so unit vectors built from sqrt(2)/2 entries do not flip region under rounding.
BOUNDARY_TOL = 1e-12


def region_of(last_coord: float) -> str:
    if last_coord <= -HALF_SQRT2 + BOUNDARY_TOL:
        return S_MINUS
    if last_coord >= HALF_SQRT2 - BOUNDARY_TOL:
        return S_PLUS
    return S_ZERO


@dataclass(frozen=True, eq=False)
class SphereDirection:
    unit: np.ndarray
    region: str


def classify(v) -> SphereDirection:
    """Normalize ``v`` and tag it with its sphere region."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    norm = np.linalg.norm(v)
    if not norm > 0:
        raise DegenerateDirectionError("cannot classify the zero vector")
    unit = v / norm
    return SphereDirection(unit, region_of(unit[-1]))


def _regions(directions: np.ndarray) -> tuple[str, ...]:
    return tuple(region_of(v[-1]) for v in directions)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Signed atomic measure ``sum_i c_i delta_{v_i}`` on ``S^d``.

    Use :meth:`build` to construct one from raw atoms; it normalizes
    directions, merges coincident directions and drops zero coefficients.
    """

    dim_input: int
    coefficients: np.ndarray
    directions: np.ndarray
    regions: tuple[str, ...] = field(default=())

    @classmethod
    def build(cls, dim_input: int, coefficients, directions, *, tol: float = ANGLE_TOL):
        c = np.asarray(coefficients, dtype=np.float64).reshape(-1)
        V = np.asarray(directions, dtype=np.float64).reshape(-1, dim_input + 1)
        if V.shape[0] != c.shape[0]:
            raise DimensionError("coefficient and direction counts differ")
        kept_c: list[float] = []
        kept_v: list[np.ndarray] = []
        for ci, vi in zip(c, V):
            norm = np.linalg.norm(vi)
            if norm == 0 or ci == 0:
                continue
            u = vi / norm
            for k, vk in enumerate(kept_v):
                if np.linalg.norm(u - vk) <= tol:
                    kept_c[k] += ci
                    break
            else:
                kept_c.append(float(ci))
                kept_v.append(u)
        keep = [k for k, ck in enumerate(kept_c) if abs(ck) > COEF_DROP]
        c_out = np.array([kept_c[k] for k in keep])
        V_out = np.array([kept_v[k] for k in keep]).reshape(-1, dim_input + 1)
        return cls(dim_input, c_out, V_out, _regions(V_out))

    @property
    def size(self) -> int:
        return self.coefficients.shape[0]

    def total_variation(self) -> float:
        return float(np.sum(np.abs(self.coefficients)))

    def __call__(self, X) -> np.ndarray:
        X = check_points(X, self.dim_input)
        return relu(lift(X) @ self.directions.T) @ self.coefficients

    def mask(self, region: str) -> np.ndarray:
        return np.array([r == region for r in self.regions], dtype=bool)


@dataclass(frozen=True, eq=False)
class CanonicalForm:
    """``sum_k c_k relu(<(x,1), v_k>) + <(x,1), w>`` with non-antipodal ``v_k`` in ``S_zero``."""

    dim_input: int
    coefficients: np.ndarray
    directions: np.ndarray
    linear: np.ndarray

    @property
    def size(self) -> int:
        return self.coefficients.shape[0]

    def __call__(self, X) -> np.ndarray:
        X = check_points(X, self.dim_input)
        Xl = lift(X)
        return relu(Xl @ self.directions.T) @ self.coefficients + Xl @ self.linear

    def to_dict(self) -> dict:
        return {
            "ridge": [[float(c), [float(x) for x in v]] for c, v in zip(self.coefficients, self.directions)],
            "linear": [float(x) for x in self.linear],
        }


@dataclass(frozen=True)
class KappaBounds:
    lower: float
    upper: float
    case: int

    @property
    def ratio(self) -> float:
        if self.lower == 0:
            return 1.0 if self.upper == 0 else float("inf")
        return self.upper / self.lower


@dataclass(frozen=True)
class ZeroCertificate:
    is_zero: bool
    failed_condition: Optional[int]
    unpaired: tuple[int, ...]
    residual: np.ndarray

    def __bool__(self):
        return self.is_zero


def to_measure(net: Parameterization) -> DiscreteMeasure:
    norms = np.linalg.norm(net.inner, axis=1)
    return DiscreteMeasure.build(net.dim_input, net.outer * norms, net.inner)


def _antipode_index(V: np.ndarray, i: int, candidates, tol: float = ANGLE_TOL) -> Optional[int]:
    for j in candidates:
        if j != i and np.linalg.norm(V[i] + V[j]) <= tol:
            return j
    return None


def reduce(m: DiscreteMeasure) -> CanonicalForm:
    """Reduce a measure to canonical form representing the same function on the ball.

    ``S_minus`` atoms are dropped, ``S_plus`` atoms move into the linear part and
    antipodal ``S_zero`` pairs ``(c_i, v), (c_j, -v)`` become ``(c_i + c_j, v)``
    plus the linear term ``-c_j v``.  The direction seen first is kept.
    """
    d = m.dim_input
    V, c = m.directions, m.coefficients
    linear = np.zeros(d + 1)
    zero_idx = [i for i, r in enumerate(m.regions) if r == S_ZERO]
    used: set[int] = set()
    ridge_c: list[float] = []
    ridge_v: list[np.ndarray] = []
    for i in zero_idx:
        if i in used:
            continue
        used.add(i)
        j = _antipode_index(V, i, [k for k in zero_idx if k not in used])
        if j is None:
            ridge_c.append(c[i])
        else:
            used.add(j)
            ridge_c.append(c[i] + c[j])
            linear -= c[j] * V[i]
        ridge_v.append(V[i])
    for i, r in enumerate(m.regions):
        if r == S_PLUS:
            linear += c[i] * V[i]
    keep = [k for k, ck in enumerate(ridge_c) if abs(ck) > COEF_DROP]
    return CanonicalForm(
        d,
        np.array([ridge_c[k] for k in keep]),
        np.array([ridge_v[k] for k in keep]).reshape(-1, d + 1),
        linear,
    )


def canonicalize(net: Parameterization) -> CanonicalForm:
    return reduce(to_measure(net))


def is_zero_function(m: DiscreteMeasure, tol: float = ZERO_TEST_TOL) -> ZeroCertificate:
    """Decide whether ``f_m`` vanishes on the unit ball.

    Condition 1: every ``S_zero`` atom has an antipodal partner with the negated
    coefficient.  Condition 2: ``sum_{S_zero} c_i v_i / 2 + sum_{S_plus} c_i v_i = 0``.
    """
    V, c = m.directions, m.coefficients
    zero_idx = [i for i, r in enumerate(m.regions) if r == S_ZERO]
    unpaired = []
    for i in zero_idx:
        j = _antipode_index(V, i, zero_idx)
        if j is None or abs(c[i] + c[j]) > tol:
            unpaired.append(i)
    residual = np.zeros(m.dim_input + 1)
    for i, r in enumerate(m.regions):
        if r == S_ZERO:
            residual += 0.5 * c[i] * V[i]
        elif r == S_PLUS:
            residual += c[i] * V[i]
    if unpaired:
        return ZeroCertificate(False, 1, tuple(unpaired), residual)
    if np.linalg.norm(residual) > tol:
        return ZeroCertificate(False, 2, (), residual)
    return ZeroCertificate(True, None, (), residual)


def _case(cf: CanonicalForm) -> tuple[int, Optional[int], float]:
    """Return (case, ridge index, signed scale c) for the linear part ``w``."""
    w_norm = float(np.linalg.norm(cf.linear))
    if w_norm <= ZERO_W_TOL:
        return 1, None, 0.0
    u = cf.linear / w_norm
    if region_of(u[-1]) != S_ZERO:
        return 2, None, w_norm
    for i, v in enumerate(cf.directions):
        if np.linalg.norm(u - v) <= ANGLE_TOL:
            return 3, i, w_norm
        if np.linalg.norm(u + v) <= ANGLE_TOL:
            return 3, i, -w_norm
    return 4, None, w_norm


def kappa_bounds(cf: CanonicalForm) -> KappaBounds:
    """Bracket ``kappa(f)`` as ``max(||w||, sum|c_k|) <= kappa(f) <= ||mu||``.

    ``mu`` is the explicit measure from :func:`constructed_measure`; the upper
    bound never exceeds three times the lower bound.
    """
    ridge = float(np.sum(np.abs(cf.coefficients)))
    case, i, scale = _case(cf)
    if case == 1:
        return KappaBounds(ridge, ridge, 1)
    w_norm = float(np.linalg.norm(cf.linear))
    lower = max(w_norm, ridge)
    if case == 2:
        upper = ridge + w_norm
    elif case == 3:
        ci = cf.coefficients[i]
        upper = ridge - abs(ci) + abs(ci + scale) + abs(scale)
    else:
        upper = ridge + 2.0 * w_norm
    # the case-3 sum can round one ulp below sum|c|
    return KappaBounds(lower, max(float(upper), lower), case)


def constructed_measure(cf: CanonicalForm) -> DiscreteMeasure:
    """A measure representing ``cf`` whose mass equals ``kappa_bounds(cf).upper``."""
    c = list(cf.coefficients)
    V = list(cf.directions)
    case, i, scale = _case(cf)
    if case == 2:
        u = cf.linear / np.linalg.norm(cf.linear)
        if region_of(u[-1]) == S_PLUS:
            c.append(scale)
            V.append(u)
        else:
            c.append(-scale)
            V.append(-u)
    elif case == 3:
        c[i] = c[i] + scale
        c.append(-scale)
        V.append(-cf.directions[i])
    elif case == 4:
        u = cf.linear / scale
        c.extend([scale, -scale])
        V.extend([u, -u])
    return DiscreteMeasure.build(cf.dim_input, c, np.array(V).reshape(-1, cf.dim_input + 1))


def measure_to_net(m: DiscreteMeasure) -> Parameterization:
    """Network with one unit-direction atom per measure atom; its path norm is ``||m||``."""
    return Parameterization(m.dim_input, m.coefficients.copy(), m.directions.copy())


def render(cf: CanonicalForm) -> Parameterization:
    """Write ``cf`` back as a network.

    Ridge atoms are copied; the linear part is spread over the ``S_plus``
    directions ``e_{d+1}`` and ``e_j + 2 e_{d+1}``, on which ReLU is linear, so
    that reducing the result recovers ``cf`` exactly.
    """
    d = cf.dim_input
    w = cf.linear
    outer = list(cf.coefficients)
    inner = [v for v in cf.directions]
    if np.any(w != 0):
        for j in range(d):
            if w[j] != 0:
                p = np.zeros(d + 1)
                p[j], p[d] = 1.0, 2.0
                outer.append(w[j])
                inner.append(p)
        bias = w[d] - 2.0 * np.sum(w[:d])
        if bias != 0:
            p = np.zeros(d + 1)
            p[d] = 1.0
            outer.append(bias)
            inner.append(p)
    return Parameterization(d, np.array(outer), np.array(inner).reshape(-1, d + 1))


def kappa_upper_via_theorem(net: Parameterization) -> float:
    """Best available upper estimate of ``kappa(f_net)``: the smaller of the path
    norm and the canonical construction."""
    return min(path_norm(net), kappa_bounds(canonicalize(net)).upper)

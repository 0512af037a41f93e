"""Shallow ReLU networks ``f(x) = sum_i a_i relu(<(x, 1), w_i>)`` on the unit ball.

A network is stored as an outer-weight vector ``a`` of shape ``(N,)`` and an
inner-weight matrix ``W`` of shape ``(N, d + 1)`` whose last column multiplies
the constant input 1 (the bias slot).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError

BALL_SLACK = 1e-12


def relu(t):
    return np.maximum(t, 0.0)


def lift(x: np.ndarray) -> np.ndarray:
    """Append the constant coordinate: ``x -> (x, 1)`` along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    ones = np.ones(x.shape[:-1] + (1,))
    return np.concatenate([x, ones], axis=-1)


@dataclass(frozen=True, eq=False)
class Parameterization:
    """Immutable raw parameters of a width-``N`` shallow ReLU network.

    Parameters
    ----------
    dim_input : int
        Input dimension ``d``.
    outer : ndarray, shape (N,)
        Outer weights ``a_i``.
    inner : ndarray, shape (N, d + 1)
        Inner weights ``w_i``; the last entry is the bias.
    """

    dim_input: int
    outer: np.ndarray
    inner: np.ndarray

    def __post_init__(self):
        d = int(self.dim_input)
        if d < 1:
            raise ConfigError(f"dim_input must be a positive integer, got {self.dim_input}")
        a = np.array(self.outer, dtype=np.float64).reshape(-1)
        W = np.array(self.inner, dtype=np.float64)
        if W.size == 0:
            W = W.reshape(0, d + 1)
        if W.ndim != 2 or W.shape[1] != d + 1:
            raise DimensionError(f"inner weights must have shape (N, {d + 1}), got {W.shape}")
        if W.shape[0] != a.shape[0]:
            raise DimensionError(f"{a.shape[0]} outer weights but {W.shape[0]} inner weights")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(W))):
            raise ConfigError("network parameters must be finite")
        a.flags.writeable = False
        W.flags.writeable = False
        object.__setattr__(self, "dim_input", d)
        object.__setattr__(self, "outer", a)
        object.__setattr__(self, "inner", W)

    @classmethod
    def from_atoms(cls, dim_input: int, atoms: Iterable[tuple[float, Sequence[float]]]):
        atoms = list(atoms)
        outer = [float(a) for a, _ in atoms]
        inner = [list(map(float, w)) for _, w in atoms]
        if not atoms:
            return cls.zero(dim_input)
        for w in inner:
            if len(w) != dim_input + 1:
                raise DimensionError(f"inner vector {w} must have length {dim_input + 1}")
        return cls(dim_input, np.array(outer), np.array(inner))

    @classmethod
    def zero(cls, dim_input: int, width: int = 0):
        return cls(dim_input, np.zeros(width), np.zeros((width, dim_input + 1)))

    @property
    def width(self) -> int:
        return self.outer.shape[0]

    @property
    def atoms(self) -> list[tuple[float, np.ndarray]]:
        return [(float(a), w.copy()) for a, w in zip(self.outer, self.inner)]

    def flat(self) -> np.ndarray:
        """The parameter vector ``(a_1, w_1, ..., a_N, w_N)``."""
        return np.concatenate([self.outer[:, None], self.inner], axis=1).reshape(-1)

    def sq_norm(self) -> float:
        return float(np.sum(self.outer**2) + np.sum(self.inner**2))

    def __call__(self, X) -> np.ndarray:
        return evaluate(self, X)

    def __repr__(self):
        return f"Parameterization(d={self.dim_input}, N={self.width}, kappa={path_norm(self):.6g})"


def check_points(X, dim_input: int, *, in_ball: bool = True) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != dim_input:
        raise DimensionError(f"expected points of dimension {dim_input}, got shape {X.shape}")
    if in_ball and X.shape[0]:
        radius = float(np.max(np.linalg.norm(X, axis=1)))
        if radius > 1.0 + BALL_SLACK:
            raise ConfigError(f"input point of norm {radius} lies outside the unit ball")
    return X


def preactivations(net: Parameterization, X: np.ndarray) -> np.ndarray:
    return lift(X) @ net.inner.T


def evaluate(net: Parameterization, x, *, check_ball: bool = True):
    """Evaluate the network at a point (returns a float) or at rows of ``x``.

    A scalar is accepted as a point when ``d = 1``.
    """
    single = np.ndim(x) <= 1
    if np.ndim(x) == 0:
        x = np.reshape(np.asarray(x, dtype=np.float64), (1,))
    X = check_points(x, net.dim_input, in_ball=check_ball)
    values = relu(preactivations(net, X)) @ net.outer
    return float(values[0]) if single else values


def path_norm(net: Parameterization) -> float:
    """``sum_i |a_i| * ||w_i||_2``."""
    return float(np.sum(np.abs(net.outer) * np.linalg.norm(net.inner, axis=1)))


def rescale_balanced(net: Parameterization) -> Parameterization:
    """Rescale every atom so that ``|a_i| = ||w_i||_2`` without changing the function.

    Atoms with ``|a_i| * ||w_i|| = 0`` become the zero atom.  After rescaling,
    ``||theta||^2 / 2`` equals the path norm.
    """
    a = net.outer
    norms = np.linalg.norm(net.inner, axis=1)
    prod = np.abs(a) * norms
    live = prod > 0
    new_a = np.zeros_like(a)
    new_W = np.zeros_like(net.inner)
    new_a[live] = np.sign(a[live]) * np.sqrt(prod[live])
    new_W[live] = net.inner[live] * np.sqrt(np.abs(a[live]) / norms[live])[:, None]
    return Parameterization(net.dim_input, new_a, new_W)


def truncate(value, level: float):
    """Clamp ``value`` to ``[-level, level]``; works on scalars and arrays."""
    if not level > 0:
        raise ConfigError(f"truncation level must be positive, got {level}")
    out = np.clip(value, -level, level)
    return float(out) if np.ndim(out) == 0 else out

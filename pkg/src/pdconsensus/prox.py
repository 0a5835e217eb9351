"""Proximal operators for the separable cost terms.

Conjugate proxes are never coded by hand: :func:`prox_conjugate` derives them
from the primal prox through the Moreau decomposition

    v = prox_{t f*}(v) + t * prox_{f/t}(v / t).
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

__all__ = [
    "ProxFunction",
    "ZeroFunction",
    "L1Norm",
    "SquaredDistance",
    "BoxIndicator",
    "prox_l1",
    "prox_sq_dist",
    "prox_conjugate",
    "evaluate_objective",
]


def _check_step(t):
    if not t > 0:
        raise ValueError(f"prox step must be positive, got {t!r}")


def _finite(v, name="v"):
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def prox_l1(v, t):
    """Soft thresholding: ``sign(v) * max(|v| - t, 0)``."""
    _check_step(t)
    v = _finite(v)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def prox_sq_dist(v, d, t):
    """Prox of ``z -> 0.5 * ||z - d||^2`` with step ``t``."""
    _check_step(t)
    v = np.asarray(v, dtype=float)
    d = np.asarray(d, dtype=float)
    if v.shape != d.shape:
        raise ValueError(f"shape mismatch: v {v.shape} vs d {d.shape}")
    return (v + t * d) / (1.0 + t)


class ProxFunction(ABC):
    """A closed convex function with a cheap proximal mapping.

    Subclasses must be immutable after construction.
    """

    #: piecewise linear-quadratic; informational only
    is_plq = True

    @abstractmethod
    def evaluate(self, x) -> float:
        """Function value, ``np.inf`` off the domain."""

    @abstractmethod
    def prox(self, v, gamma):
        """``argmin_z f(z) + ||z - v||^2 / (2 gamma)``."""

    def __call__(self, x):
        return self.evaluate(x)


class ZeroFunction(ProxFunction):
    def evaluate(self, x):
        return 0.0

    def prox(self, v, gamma):
        _check_step(gamma)
        return np.array(v, dtype=float)

    def __repr__(self):
        return "ZeroFunction()"


class L1Norm(ProxFunction):
    """``weight * ||x||_1``."""

    def __init__(self, weight=1.0):
        if weight < 0:
            raise ValueError("weight must be non-negative")
        self.weight = float(weight)

    def evaluate(self, x):
        return self.weight * float(np.abs(x).sum())

    def prox(self, v, gamma):
        _check_step(gamma)
        # inlined soft threshold; this sits on the solver's hot path
        thr = self.weight * gamma
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)

    def __repr__(self):
        return f"L1Norm(weight={self.weight!r})"


class SquaredDistance(ProxFunction):
    """``0.5 * ||x - center||^2``."""

    def __init__(self, center):
        self.center = np.array(center, dtype=float)
        self.center.setflags(write=False)

    def evaluate(self, x):
        r = np.asarray(x, dtype=float) - self.center
        return 0.5 * float(r @ r)

    def prox(self, v, gamma):
        _check_step(gamma)
        return (v + gamma * self.center) / (1.0 + gamma)

    def __repr__(self):
        return f"SquaredDistance(center=<{self.center.size}>)"


class BoxIndicator(ProxFunction):
    """Indicator of ``{x : lower <= x <= upper}``."""

    def __init__(self, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if np.any(lower > upper):
            raise ValueError("empty box: some lower bound exceeds its upper bound")
        self.lower, self.upper = lower, upper

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.all(x >= self.lower) and np.all(x <= self.upper)
        return 0.0 if inside else np.inf

    def prox(self, v, gamma):
        _check_step(gamma)
        return np.clip(v, self.lower, self.upper)

    def __repr__(self):
        return "BoxIndicator(...)"


def prox_conjugate(f: ProxFunction, v, t):
    """Prox of the Fenchel conjugate ``f*`` with step ``t``."""
    _check_step(t)
    v = np.asarray(v, dtype=float)
    return v - t * f.prox(v / t, 1.0 / t)


def evaluate_objective(fs, gs, Cs, x) -> float:
    """``sum_i f_i(x) + g_i(C_i x)``; a ``None`` g/C pair contributes nothing."""
    if not (len(fs) == len(gs) == len(Cs)):
        raise ValueError("fs, gs and Cs must have equal length")
    x = np.asarray(x, dtype=float)
    total = 0.0
    for f, g, C in zip(fs, gs, Cs):
        total += f.evaluate(x)
        if g is not None:
            if C.shape[1] != x.shape[0]:
                raise ValueError(f"C has {C.shape[1]} columns, x has {x.shape[0]} entries")
            total += g.evaluate(C @ x)
        if total == np.inf:
            return np.inf
    return float(total)

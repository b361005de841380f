"""Composite Gauss-Legendre panel quadrature shared by the exact-solution modules."""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Tuple

import numpy as np

from .errors import ConvergenceError

DEFAULT_ORDER = 16


@lru_cache(maxsize=64)
def _leggauss(order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(a: float, b: float, panels: int, order: int = DEFAULT_ORDER,
               edges: np.ndarray | None = None) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule on ``[a, b]``.

    ``edges`` overrides the uniform panel boundaries when given.
    """
    if edges is None:
        edges = np.linspace(a, b, panels + 1)
    x, w = _leggauss(order)
    lo = edges[:-1, None]
    half = 0.5 * np.diff(edges)[:, None]
    nodes = lo + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def integrate(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, panels: int = 8,
              order: int = DEFAULT_ORDER) -> float:
    """Integral of a vectorized ``f`` over ``[a, b]``."""
    x, w = panel_rule(a, b, panels, order)
    return float(np.sum(w * f(x)))


def integrate_refined(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                      rtol: float = 1e-12, atol: float = 0.0, panels: int = 4,
                      order: int = DEFAULT_ORDER, max_panels: int = 4096) -> Tuple[float, float]:
    """Integrate with panel doubling until two successive values agree.

    Returns ``(value, error_estimate)``; raises :class:`ConvergenceError` when
    ``max_panels`` is reached first.
    """
    prev = integrate(f, a, b, panels, order)
    while panels < max_panels:
        panels *= 2
        cur = integrate(f, a, b, panels, order)
        err = abs(cur - prev)
        if err <= max(atol, rtol * abs(cur)):
            return cur, err
        prev = cur
    raise ConvergenceError(f"quadrature on [{a}, {b}] did not settle within {max_panels} panels")

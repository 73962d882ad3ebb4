# src/quadrature.py
"""
Составные квадратуры Гаусса–Лежандра.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy import special

DEFAULT_ORDER = 8


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Узлы и веса на [-1, 1]; массивы только для чтения (они кешируются)."""
    if order < 1:
        raise ValueError(f"Порядок квадратуры должен быть >= 1: {order}")
    nodes, weights = special.roots_legendre(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_rule(edges: np.ndarray, order: int = DEFAULT_ORDER) -> Tuple[np.ndarray, np.ndarray]:
    """
    Узлы/веса составного правила по заданным границам панелей (edges возрастают).
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges должны быть строго возрастающим массивом длины >= 2")
    x, w = gauss_legendre(order)
    left = edges[:-1, None]
    half = 0.5 * np.diff(edges)[:, None]
    nodes = left + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def uniform_rule(a: float, b: float, panels: int, order: int = DEFAULT_ORDER) -> Tuple[np.ndarray, np.ndarray]:
    if panels < 1:
        raise ValueError(f"Число панелей должно быть >= 1: {panels}")
    return composite_rule(np.linspace(a, b, panels + 1), order)


def integrate(
    fn: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    panels: int = 64,
    order: int = DEFAULT_ORDER,
) -> float:
    """∫_a^b fn(x) dx; fn векторизована."""
    nodes, weights = uniform_rule(a, b, panels, order)
    return float(np.dot(weights, fn(nodes)))

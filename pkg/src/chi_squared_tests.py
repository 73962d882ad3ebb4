# src/chi_squared_tests.py
"""
Хи-квадрат с растущим числом равных ячеек m_n.

T_n(F) = n·m·Σ_l (p_l - 1/m)² - одна формула и для эмпирических масс p̂, и для
популяционных масс 1/m + ∫_cell f (интегралы экспонент в замкнутой форме).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .config import DEFAULTS
from .errors import InvalidInputError
from .quadratic_tests import Decision
from .sequence_model import Basis, CoefficientVector, normal_quantile, std_normal_cdf

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class CellHistogram:
    m: int
    counts: np.ndarray
    n: int

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (self.m,):
            raise InvalidInputError(f"ожидалось {self.m} ячеек, получено {counts.shape}")
        if np.any(counts < 0) or int(counts.sum()) != self.n:
            raise InvalidInputError("counts должны быть неотрицательны и давать в сумме n")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def p_hat(self) -> np.ndarray:
        return self.counts / self.n

    @classmethod
    def from_sample(cls, sample, m: int) -> "CellHistogram":
        x = np.asarray(sample, dtype=float).ravel()
        if x.size == 0:
            raise InvalidInputError("пустая выборка")
        if m < 2:
            raise InvalidInputError(f"m должно быть >= 2: {m}")
        if np.any((x < 0.0) | (x > 1.0)):
            raise InvalidInputError("значения выборки должны лежать в [0, 1]")
        cells = np.minimum((x * m).astype(np.int64), m - 1)
        return cls(m=m, counts=np.bincount(cells, minlength=m), n=int(x.size))


def default_cells(n: int, r: float, const: float = 1.0) -> int:
    """m_n = [const·n^{2-4r}], но не меньше 2."""
    return max(2, int(math.floor(const * n ** (2.0 - 4.0 * r))))


def chi2_from_cell_masses(p: np.ndarray, n: int) -> float:
    """n·m·Σ(p_l - 1/m)²."""
    p = np.asarray(p, dtype=float)
    m = p.size
    return float(n * m * math.fsum(((p - 1.0 / m) ** 2).tolist()))


def chi2_statistic(sample, m: int) -> float:
    hist = CellHistogram.from_sample(sample, m)
    return chi2_from_cell_masses(hist.p_hat, hist.n)


def chi2_statistic_from_histogram(hist: CellHistogram) -> float:
    return chi2_from_cell_masses(hist.p_hat, hist.n)


def cell_integrals(theta: CoefficientVector, m: int) -> np.ndarray:
    """
    ∫ f по каждой ячейке [l/m, (l+1)/m) в замкнутой форме.
    """
    if m < 2:
        raise InvalidInputError(f"m должно быть >= 2: {m}")
    if theta.is_zero:
        return np.zeros(m)
    edges = np.arange(m + 1) / m
    j = theta.indices.astype(float)
    if theta.basis is Basis.TRIG_COMPLEX:
        phase = np.exp(2j * np.pi * np.outer(edges, j))
        antideriv = (phase / (2j * np.pi * j)) @ theta.values
        return 2.0 * np.diff(antideriv).real
    if theta.basis is Basis.COSINE_HALF:
        antideriv = (SQRT2 * np.sin(np.pi * np.outer(edges, j)) / (np.pi * j)) @ theta.values
        return np.diff(antideriv)
    raise InvalidInputError("ячейки определены только для базисов trig и cosine")


def chi2_functional(theta: CoefficientVector, m: int, n: int) -> float:
    """Популяционное T_n(F) по точным массам ячеек."""
    return chi2_from_cell_masses(1.0 / m + cell_integrals(theta, m), n)


def fourier_identity(theta: CoefficientVector, m: int, n: int) -> float:
    """
    T_n(F) через двойную сумму по классам вычетов:

        n·m·m·Σ_k Σ_j θ_j conj(θ_{j-km}) (2 - 2cos(2πj/m)) / (4π² j (j - km)),

    слагаемые с j = 0 или j = km равны нулю (0/0 = 0).
    """
    if theta.basis is not Basis.TRIG_COMPLEX:
        raise InvalidInputError("тождество записано для базиса trig")
    if m < 2:
        raise InvalidInputError(f"m должно быть >= 2: {m}")
    J = max(theta.support_max, 1)
    half = theta.to_dense(J)
    full = np.concatenate([np.conj(half[::-1]), [0.0], half])  # индексы -J..J
    j_all = np.arange(-J, J + 1)
    factor = 2.0 - 2.0 * np.cos(2.0 * np.pi * j_all / m)
    total = 0.0 + 0.0j
    for k in range(-(2 * J) // m - 1, (2 * J) // m + 2):
        shift = k * m
        lo, hi = max(-J, -J + shift), min(J, J + shift)
        if lo > hi:
            continue
        j = np.arange(lo, hi + 1)
        a = full[j + J]
        b = np.conj(full[j - shift + J])
        denom = 4.0 * np.pi**2 * j * (j - shift)
        term = np.zeros(j.size, dtype=complex)
        ok = denom != 0
        term[ok] = a[ok] * b[ok] * factor[j[ok] + J] / denom[ok]
        total += term.sum()
    return float(n * m * m * total.real)


@dataclass(frozen=True)
class TailBoundCheck:
    lhs: float
    rhs: float
    ratio: float
    holds: bool
    i_n: int
    constant: float


def chi2_tail_bound_check(
    theta: CoefficientVector,
    m: int,
    i_n: Optional[int] = None,
    d: float = 2.0,
    constant: Optional[float] = None,
) -> TailBoundCheck:
    """
    Сравнивает n⁻¹m⁻²T_n(F̃) для хвоста θ (|j| > i_n) с m⁻¹i_n⁻¹Σ_{|j|>i_n}|θ_j|².
    ratio - измеренная константа; holds - ratio <= constant.
    """
    if not d > 1.0:
        raise InvalidInputError(f"d должно быть > 1: {d}")
    constant = float(DEFAULTS["chi2_tail_constant"] if constant is None else constant)
    i_n = int(math.floor(d * m)) if i_n is None else int(i_n)
    tail = theta.restrict(lo=i_n + 1)
    lhs = chi2_functional(tail, m, 1) / m**2
    unit = tail.squared_norm() / (m * i_n)
    ratio = lhs / unit if unit > 0 else 0.0
    return TailBoundCheck(lhs=lhs, rhs=constant * unit, ratio=ratio, holds=bool(ratio <= constant), i_n=i_n, constant=constant)


def _warn_regime(m: int, n: int) -> None:
    if m < DEFAULTS["chi2_min_cells"]:
        logger.warning("chi2: m=%d is below %d, the normal limit is unreliable", m, DEFAULTS["chi2_min_cells"])
    ratio = n * n / m
    if ratio < DEFAULTS["chi2_min_n2_over_m"]:
        logger.warning(
            "chi2: n^2/m=%.1f is below %g (n=%d, m=%d), the normal limit is unreliable",
            ratio, DEFAULTS["chi2_min_n2_over_m"], n, m,
        )


def chi2_score(statistic: float, m: int) -> float:
    """(T - m + 1)/√(2m)."""
    return (statistic - m + 1.0) / math.sqrt(2.0 * m)


def chi2_decide(sample, m: int, alpha: float) -> Decision:
    hist = CellHistogram.from_sample(sample, m)
    _warn_regime(m, hist.n)
    threshold = normal_quantile(alpha)
    score = chi2_score(chi2_statistic_from_histogram(hist), m)
    return Decision(reject=bool(score > threshold), score=score, threshold=threshold)


def chi2_noncentrality_argument(theta: CoefficientVector, m: int, n: int) -> float:
    return chi2_functional(theta, m, n) / math.sqrt(2.0 * m)


def chi2_power_formula(theta: CoefficientVector, m: int, n: int, alpha: float) -> float:
    """β = Φ(x_α - 2^{-1/2} m^{-1/2} T_n(F))."""
    _warn_regime(m, n)
    return float(std_normal_cdf(normal_quantile(alpha) - chi2_noncentrality_argument(theta, m, n)))


def chi2_decide_and_power(source: Union[CoefficientVector, np.ndarray], m: int, n: int, alpha: float):
    """
    Для θ - предсказанная ошибка второго рода, для выборки - решение теста.
    """
    if isinstance(source, CoefficientVector):
        return chi2_power_formula(source, m, n, alpha)
    if np.asarray(source).size != n:
        raise InvalidInputError(f"размер выборки не равен n={n}")
    return chi2_decide(source, m, alpha)


def scale_to_chi2_noncentrality(theta: CoefficientVector, m: int, n: int, target: float) -> CoefficientVector:
    current = chi2_noncentrality_argument(theta, m, n)
    if current <= 0:
        raise InvalidInputError("θ не видна ячейкам: T_n(F) = 0")
    return theta.scale(math.sqrt(target / current))

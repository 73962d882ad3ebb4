# src/montecarlo.py
"""
Движок Монте-Карло.

Репликация i эксперимента с тегом tag всегда использует поток stream(seed, tag, i),
поэтому 1 воркер и W воркеров дают одинаковые счётчики. Блоки репликаций
раздаются ProcessPoolExecutor и собираются в порядке индексов.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import DEFAULTS
from .errors import InvalidInputError
from .sequence_model import DensitySpec, draw_sequence_noise, sample_density_iid
from .rng import stream

logger = logging.getLogger(__name__)


# === Оценки вероятностей ===
def wilson_interval(k: int, n: int, z: Optional[float] = None) -> Tuple[float, float]:
    """Интервал Уилсона для k успехов из n."""
    if n <= 0:
        raise InvalidInputError(f"n должно быть положительным: {n}")
    if not 0 <= k <= n:
        raise InvalidInputError(f"k должно лежать в [0, n]: {k}")
    z = float(DEFAULTS["wilson_z"] if z is None else z)
    p = k / n
    denom = 1.0 + z**2 / n
    center = (p + z**2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class PowerEstimate:
    """Оценка вероятности отклонения H0 по MC с интервалом Уилсона."""

    rejections: int
    reps: int
    estimate: float
    ci_low: float
    ci_high: float
    seed: int
    runtime_ms: int = 0

    @classmethod
    def from_counts(cls, rejections: int, reps: int, seed: int, runtime_ms: int = 0) -> "PowerEstimate":
        lo, hi = wilson_interval(int(rejections), int(reps))
        estimate = rejections / reps
        return cls(int(rejections), int(reps), estimate, min(lo, estimate), max(hi, estimate), int(seed), int(runtime_ms))

    @property
    def width(self) -> float:
        return self.ci_high - self.ci_low

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def complement(self) -> "PowerEstimate":
        """Оценка 1 - p (например, β = 1 - мощность) с отражённым интервалом."""
        return PowerEstimate(
            self.reps - self.rejections, self.reps, 1.0 - self.estimate, 1.0 - self.ci_high, 1.0 - self.ci_low, self.seed, self.runtime_ms
        )

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def paired_difference(first: np.ndarray, second: np.ndarray, z: Optional[float] = None) -> Dict[str, float]:
    """
    Разность долей для парных индикаторов (общие случайные числа) и её интервал.
    """
    a = np.asarray(first, dtype=float)
    b = np.asarray(second, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise InvalidInputError("нужны парные массивы одной длины (>= 2)")
    z = float(DEFAULTS["wilson_z"] if z is None else z)
    d = b - a
    mean = float(d.mean())
    se = float(d.std(ddof=1) / math.sqrt(d.size))
    return {"difference": mean, "se": se, "ci_low": mean - z * se, "ci_high": mean + z * se}


# === Задачи для блоков ===
@dataclass(frozen=True)
class ReplicationTask:
    """
    Вызывает replicate(rng) для каждой репликации блока со своим потоком.
    replicate возвращает вектор счётов (по одному на «плечо» эксперимента).
    """

    replicate: Callable[[np.random.Generator], np.ndarray]
    seed: int
    tag: str

    def __call__(self, bounds: Tuple[int, int]) -> np.ndarray:
        start, stop = bounds
        rows = [np.atleast_1d(self.replicate(stream(self.seed, self.tag, i))) for i in range(start, stop)]
        return np.vstack(rows)


def _blocks(total: int, block: int) -> List[Tuple[int, int]]:
    return [(start, min(start + block, total)) for start in range(0, total, block)]


def run_blocks(task: Callable[[Tuple[int, int]], np.ndarray], total: int, block: Optional[int] = None, workers: int = 1) -> np.ndarray:
    """
    Выполняет task по блокам [start, stop) и склеивает результаты по порядку.
    Границы блоков зависят только от block, но не от числа воркеров.
    """
    if total < 1:
        raise InvalidInputError(f"число репликаций должно быть >= 1: {total}")
    block = int(block or DEFAULTS["mc_block"])
    bounds = _blocks(total, block)
    if workers <= 1 or len(bounds) == 1:
        parts = [task(b) for b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(task, bounds))
    return np.concatenate(parts, axis=0)


def simulate_scores(
    replicate: Callable[[np.random.Generator], np.ndarray],
    reps: int,
    seed: int,
    tag: str,
    workers: int = 1,
    block: Optional[int] = None,
) -> np.ndarray:
    """Матрица счётов (reps × число плеч)."""
    started = time.perf_counter()
    scores = run_blocks(ReplicationTask(replicate, int(seed), tag), reps, block, workers)
    logger.debug("simulated %d reps for %s in %.2fs", reps, tag, time.perf_counter() - started)
    return scores


def estimate_rejection(rejected: np.ndarray, seed: int, runtime_ms: int = 0) -> PowerEstimate:
    rejected = np.asarray(rejected, dtype=bool)
    return PowerEstimate.from_counts(int(rejected.sum()), int(rejected.size), seed, runtime_ms)


# === Стандартные репликации ===
@dataclass(frozen=True)
class QuadraticFormReplicate:
    """
    Квадратичная форма на общем шуме: для каждого плеча y = mean + (σ/√n)ξ,
    счёт = (Σ mw|y|² - offset) / divisor.
    """

    means: np.ndarray
    mw: np.ndarray
    offset: float
    divisor: float
    sigma: float
    n: int
    two_sided: bool

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        J = self.mw.size - 1 if self.two_sided else self.mw.size
        noise = (self.sigma / math.sqrt(self.n)) * draw_sequence_noise(rng, J, self.two_sided)
        y = self.means + noise[None, :]
        return ((np.abs(y) ** 2) @ self.mw - self.offset) / self.divisor


@dataclass(frozen=True)
class DensityReplicate:
    """
    Выборки из каждой плотности на одном и том же состоянии генератора
    (общие случайные числа), счёт считается функцией statistic(sample).
    densities - None означает равномерную плотность.
    """

    densities: Tuple[Optional[DensitySpec], ...]
    n: int
    statistic: Callable[[np.ndarray], float]

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        start = rng.bit_generator.state
        scores = np.empty(len(self.densities))
        for a, density in enumerate(self.densities):
            rng.bit_generator.state = start
            sample = rng.random(self.n) if density is None else sample_density_iid(density, self.n, rng)
            scores[a] = self.statistic(sample)
        return scores


def rejection_rates(
    scores: np.ndarray,
    threshold: float,
    seed: int,
    runtime_ms: int = 0,
) -> List[PowerEstimate]:
    """Для каждого столбца счётов - оценка P(score > threshold)."""
    scores = np.atleast_2d(scores)
    return [estimate_rejection(scores[:, a] > threshold, seed, runtime_ms) for a in range(scores.shape[1])]


def mean_with_se(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))

# src/cvm_tests.py
"""
Крамер – фон Мизес: n·T²(F̂_n - F_0) на выборке, спектральная форма
nΣθ_j²/(π²j²) в базисе √2cos(πjt), предельная случайная величина броуновского моста
Σ(ξ_j + √n θ_j)²/(π²j²) и калибровка критических значений по ней.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import special

from .config import DEFAULTS
from .errors import InvalidInputError
from .io import append_cvm_cache, lookup_cvm_cache
from .montecarlo import DensityReplicate, PowerEstimate, rejection_rates, run_blocks, simulate_scores
from .quadratic_tests import Decision
from .quadrature import uniform_rule
from .rng import stream
from .sequence_model import AlternativeFamily, Basis, CoefficientVector, evaluate, make_density

logger = logging.getLogger(__name__)

NULL_MEAN = 1.0 / 6.0
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class CvmResult:
    n_t_squared: float
    n: int


def _checked_sample(sample) -> np.ndarray:
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size == 0:
        raise InvalidInputError("пустая выборка")
    if x[0] <= 0.0 or x[-1] >= 1.0:
        raise InvalidInputError("значения выборки должны лежать в (0, 1)")
    return x


def cvm_statistic(sample) -> CvmResult:
    """
    Точный ∫_0^1 (F̂_n(x) - x)² dx: на [u_(i), u_(i+1)) F̂ = i/n, кусок равен
    ((b - i/n)³ - (a - i/n)³)/3.
    """
    u = _checked_sample(sample)
    n = u.size
    edges = np.concatenate([[0.0], u, [1.0]])
    level = np.arange(n + 1) / n
    pieces = ((edges[1:] - level) ** 3 - (edges[:-1] - level) ** 3) / 3.0
    value = n * math.fsum(pieces.tolist())
    return CvmResult(n_t_squared=max(value, 0.0), n=n)


def cvm_statistic_classical(sample) -> float:
    """Σ(u_(i) - (2i-1)/(2n))² + 1/(12n) - то же значение n·T²."""
    u = _checked_sample(sample)
    n = u.size
    centers = (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)
    return math.fsum(((u - centers) ** 2).tolist()) + 1.0 / (12.0 * n)


def cvm_sample_score(sample) -> float:
    return cvm_statistic(sample).n_t_squared


def _check_cosine(theta: CoefficientVector) -> None:
    if theta.basis is not Basis.COSINE_HALF:
        raise InvalidInputError("КфМ-функционалы записаны в базисе cosine")


def cvm_spectral(theta: CoefficientVector, n: int) -> float:
    """n·Σθ_j²/(π²j²)."""
    _check_cosine(theta)
    j = theta.indices.astype(float)
    return n * math.fsum((theta.values**2 / (np.pi**2 * j**2)).tolist())


def cdf_shift_mean(theta: CoefficientVector) -> float:
    """∫_0^1 G, G = F - F_0: Σθ_j √2 (1 - (-1)^j)/(π²j²)."""
    _check_cosine(theta)
    j = theta.indices
    odd = (j % 2 == 1).astype(float)
    return math.fsum((theta.values * SQRT2 * 2.0 * odd / (np.pi**2 * j.astype(float) ** 2)).tolist())


def cvm_double_integral(theta: CoefficientVector, kernel: str = "min", panels: int = 32, order: int = 16) -> float:
    """
    ∫∫ k(s, t) f(s) f(t) ds dt квадратурой.

    kernel="min": k = min(s, t); при ∫f = 0 это T²(F - F_0).
    kernel="bridge": k = min(s, t) - st; равно T² - (∫G)² (центрированная форма).
    Вычисляется как 2∫_0^1 f(t)(∫_0^t s f(s) ds) dt.
    """
    _check_cosine(theta)
    if kernel not in ("min", "bridge"):
        raise InvalidInputError(f"Неизвестное ядро: {kernel}")
    t, wt = uniform_rule(0.0, 1.0, panels, order)
    x, wx = uniform_rule(0.0, 1.0, 4, order)
    s = t[:, None] * x[None, :]
    inner = t * ((s * evaluate(theta, s)) @ wx)
    f_t = evaluate(theta, t)
    value = 2.0 * float(np.dot(wt, f_t * inner))
    if kernel == "bridge":
        first_moment = float(np.dot(wt, t * f_t))
        value -= first_moment**2
    return value


# === Предел броуновского моста ===
def bridge_tail_mean(J: int) -> float:
    """Σ_{j>J} 1/(π²j²) = ψ'(J+1)/π²."""
    return float(special.polygamma(1, J + 1) / np.pi**2)


def _check_bridge_J(theta: CoefficientVector, J: int) -> None:
    if J < theta.support_max:
        raise InvalidInputError(f"J={J} меньше носителя θ ({theta.support_max})")
    if bridge_tail_mean(J) >= DEFAULTS["bridge_tail_max"]:
        raise InvalidInputError(
            f"J={J} слишком мал: хвост Σ_{{j>J}}1/(π²j²) = {bridge_tail_mean(J):.2e} >= {DEFAULTS['bridge_tail_max']}"
        )


@dataclass(frozen=True)
class BridgeBlockTask:
    """Блок розыгрышей с потоком stream(seed, tag, номер блока)."""

    shift: np.ndarray
    inv_weights: np.ndarray
    tail: float
    seed: int
    tag: str
    block: int

    def __call__(self, bounds) -> np.ndarray:
        start, stop = bounds
        rng = stream(self.seed, self.tag, start // self.block)
        xi = rng.standard_normal((stop - start, self.inv_weights.size))
        return ((xi + self.shift[None, :]) ** 2) @ self.inv_weights + self.tail


def bridge_limit_draws(
    theta: CoefficientVector,
    n: int,
    J: int,
    draws: int,
    seed: int,
    workers: int = 1,
    block: Optional[int] = None,
    tag: str = "bridge",
) -> np.ndarray:
    """
    Розыгрыши Σ_{j<=J}(ξ_j + √n θ_j)²/(π²j²) + Σ_{j>J}1/(π²j²).
    """
    _check_cosine(theta)
    _check_bridge_J(theta, J)
    block = int(block or DEFAULTS["cvm_block"])
    j = np.arange(1, J + 1, dtype=float)
    task = BridgeBlockTask(
        shift=math.sqrt(n) * theta.to_dense(J),
        inv_weights=1.0 / (np.pi**2 * j**2),
        tail=bridge_tail_mean(J),
        seed=int(seed),
        tag=tag,
        block=block,
    )
    return run_blocks(task, draws, block, workers)


def bridge_limit_sample(theta: CoefficientVector, n: int, J: int, seed: int) -> float:
    """Один розыгрыш предельной величины."""
    return float(bridge_limit_draws(theta, n, J, 1, seed, block=1)[0])


# === Калибровка и решение ===
def calibrate_cvm(
    alpha: Optional[float] = None,
    J: Optional[int] = None,
    draws: Optional[int] = None,
    seed: Optional[int] = None,
    cache: Optional[Union[str, Path]] = None,
    workers: int = 1,
) -> float:
    """
    x_α: (1 - α)-квантиль нулевого предела. Если задан cache, значение читается
    из CSV alpha,J,draws,seed,x_alpha или дописывается туда.
    """
    alpha = float(DEFAULTS["alpha"] if alpha is None else alpha)
    J = int(DEFAULTS["cvm_J"] if J is None else J)
    draws = int(DEFAULTS["cvm_draws"] if draws is None else draws)
    seed = int(DEFAULTS["seed"] if seed is None else seed)
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha должен лежать в (0, 1): {alpha}")

    if cache is not None:
        cached = lookup_cvm_cache(cache, alpha, J, draws, seed)
        if cached is not None:
            return cached
    null = CoefficientVector.zeros(Basis.COSINE_HALF)
    values = bridge_limit_draws(null, 1, J, draws, seed, workers=workers, tag="cvm-calibration")
    x_alpha = float(np.quantile(values, 1.0 - alpha))
    logger.info("calibrated CvM critical value x_alpha=%.6f (alpha=%g, J=%d, draws=%d)", x_alpha, alpha, J, draws)
    if cache is not None:
        append_cvm_cache(cache, alpha, J, draws, seed, x_alpha)
    return x_alpha


def cvm_decide(sample, alpha: float, critical_value: Union[float, Callable[[float], float]]) -> Decision:
    """
    Отклоняет H0, если n·T² > x_α; critical_value - число или функция alpha -> x_α.
    """
    threshold = float(critical_value(alpha) if callable(critical_value) else critical_value)
    score = cvm_statistic(sample).n_t_squared
    return Decision(reject=bool(score > threshold), score=score, threshold=threshold)


def cvm_predicted_power(theta: CoefficientVector, n: int, critical_value: float, J: int, draws: int, seed: int, workers: int = 1) -> float:
    """P(предел со сдвигом √nθ > x_α) по розыгрышам моста."""
    values = bridge_limit_draws(theta, n, J, draws, seed, workers=workers, tag="cvm-prediction")
    return float(np.mean(values > critical_value))


def cvm_unbiasedness_experiment(
    family: Callable[[int], CoefficientVector],
    n_grid: Sequence[int],
    reps: int,
    seed: int,
    critical_value: float,
    alpha: float = DEFAULTS["alpha"],
    workers: int = 1,
    tag: str = "cvm-unbiasedness",
) -> pd.DataFrame:
    """
    MC-частоты отклонения для альтернатив θ(n) на сетке n вместе с nT²(F_n - F_0).
    """
    rows: List[Dict[str, object]] = []
    for n in n_grid:
        theta = family(n)
        density = make_density(theta)
        replicate = DensityReplicate(densities=(density,), n=int(n), statistic=cvm_sample_score)
        scores = simulate_scores(replicate, reps, seed, f"{tag}/n={n}", workers)
        estimate: PowerEstimate = rejection_rates(scores, critical_value, seed)[0]
        rows.append(
            {
                "n": int(n),
                "n_t_squared_population": cvm_spectral(theta, n),
                "rejection_rate": estimate.estimate,
                "ci_low": estimate.ci_low,
                "ci_high": estimate.ci_high,
                "excess_over_alpha": estimate.estimate - alpha,
            }
        )
    return pd.DataFrame(rows)


def fixed_distance_alternative(n: int, a: float = 1.0) -> CoefficientVector:
    """θ_{n,1} = π√(a/n): n·T²(F_n - F_0) = a при всех n."""
    return CoefficientVector.from_mapping(Basis.COSINE_HALF, {1: math.pi * math.sqrt(a / n)})


def vanishing_alternative(n: int, a: float = 1.0, power: float = 0.25) -> CoefficientVector:
    """n·T² = a·n^{-power} -> 0."""
    return CoefficientVector.from_mapping(Basis.COSINE_HALF, {1: math.pi * math.sqrt(a * n**-power / n)})


# === Условие G1 ===
@dataclass
class G1Report:
    frame: pd.DataFrame
    verdicts: Dict[float, str]

    @property
    def verdict(self) -> str:
        """holds-trend, если хотя бы одно c₃ даёт убывание к нулю."""
        values = set(self.verdicts.values())
        if "holds-trend" in values:
            return "holds-trend"
        if values == {"violates-trend"}:
            return "violates-trend"
        return "indeterminate"


def cvm_scale(n: int, r: float) -> int:
    """k_n = [n^{(1-2r)/2}]."""
    return max(1, int(math.floor(n ** ((1.0 - 2.0 * r) / 2.0))))


def g1_check(
    family: AlternativeFamily,
    c3: Union[float, Sequence[float]],
    n_grid: Sequence[int],
    tau_zero: Optional[float] = None,
    tau_low: Optional[float] = None,
) -> G1Report:
    """
    n·Σ_{j<c₃k_n} θ²_{nj} j⁻² на сетке n для каждого c₃.

    Вердикт для c₃: holds-trend - значения не растут и последнее <= τ₀;
    violates-trend - значения не убывают и последнее >= τ₋; иначе indeterminate.
    """
    if not 0.0 < family.r < 0.5:
        raise InvalidInputError(f"r должен лежать в (0, 1/2): {family.r}")
    tau_zero = float(DEFAULTS["tau_zero"] if tau_zero is None else tau_zero)
    tau_low = float(DEFAULTS["tau_low"] if tau_low is None else tau_low)
    c3_list = [float(c3)] if np.isscalar(c3) else [float(c) for c in c3]
    rows = []
    for n in n_grid:
        theta = family(n)
        k = cvm_scale(n, family.r)
        j = theta.indices.astype(float)
        for c in c3_list:
            mask = j < c * k
            value = n * float(np.sum(np.abs(theta.values[mask]) ** 2 / j[mask] ** 2))
            rows.append({"n": int(n), "c3": c, "k_n": k, "cutoff": c * k, "value": value})
    frame = pd.DataFrame(rows)
    verdicts: Dict[float, str] = {}
    for c in c3_list:
        values = frame.loc[frame["c3"] == c, "value"].to_numpy()
        diffs = np.diff(values)
        if np.all(diffs <= 1e-12) and values[-1] <= tau_zero:
            verdicts[c] = "holds-trend"
        elif np.all(diffs >= -1e-12) and values[-1] >= tau_low:
            verdicts[c] = "violates-trend"
        else:
            verdicts[c] = "indeterminate"
    return G1Report(frame=frame, verdicts=verdicts)

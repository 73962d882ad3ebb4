# src/consistency_lab.py
"""
Классификация последовательностей альтернатив.

- масса низких частот и «тренды» состоятельности / несостоятельности;
- хвостовой критерий чистой состоятельности;
- тела Бесова B^s_{2∞}(P0) и разложение f = f1 + f2 на гладкую и осциллирующую части;
- взаимодействие состоятельной и несостоятельной компонент (общие случайные числа);
- демонстрация: компактность множества альтернатив и существование состоятельных тестов.

Все вердикты - тренды на конечной сетке с порогами τ₋, τ₀ из DEFAULTS.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import special, stats

from .config import DEFAULTS
from .errors import InvalidInputError
from .families import SCALE_RULES
from .montecarlo import PowerEstimate, estimate_rejection, paired_difference, simulate_scores
from .plans import StatisticPlan, build_plan
from .quadratic_tests import KappaFamily, cross_noncentrality, make_kappa_family, noncentrality
from .sequence_model import AlternativeFamily, Basis, CoefficientVector, density_tail_check, normal_quantile

logger = logging.getLogger(__name__)

VERDICTS = ("consistent-trend", "inconsistent-trend", "indeterminate")


# === Массы ===
def low_frequency_mass(theta: CoefficientVector, cutoff: float) -> float:
    """Σ_{|j| < cutoff} |θ_j|²."""
    if cutoff < 1:
        raise InvalidInputError(f"cutoff должен быть >= 1: {cutoff}")
    mask = theta.indices < cutoff
    return theta.multiplicity * math.fsum(theta.squared_moduli()[mask].tolist())


def high_frequency_mass(theta: CoefficientVector, cutoff: float) -> float:
    """Σ_{|j| > cutoff} |θ_j|²."""
    mask = theta.indices > cutoff
    return theta.multiplicity * math.fsum(theta.squared_moduli()[mask].tolist())


def statistic_scale(statistic_family: str, n: int, r: float, kappa_family: Optional[KappaFamily] = None) -> int:
    """
    k_n семейства тестов: полу-масса весов для quadratic, [n^{2-4r}] для kernel и chi2,
    [n^{(1-2r)/2}] для cvm.
    """
    if statistic_family == "quadratic":
        family = kappa_family or make_kappa_family("example", r)
        return family(n).k_n
    if statistic_family in ("kernel", "chi2"):
        return SCALE_RULES["n^(2-4r)"](n, r)
    if statistic_family == "cvm":
        return SCALE_RULES["n^((1-2r)/2)"](n, r)
    raise InvalidInputError(f"Неизвестное семейство статистик: {statistic_family}")


# === Классификация ===
@dataclass
class ClassificationReport:
    family: str
    statistic_family: str
    k_rule: str
    frame: pd.DataFrame
    verdict: str
    tau_low: float
    tau_zero: float
    witnesses: Dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        out = self.frame.copy()
        out["verdict"] = self.verdict
        return out


K_RULES = {
    "quadratic": "half-mass of kappa weights",
    "kernel": "[n^(2-4r)]",
    "chi2": "[n^(2-4r)]",
    "cvm": "[n^((1-2r)/2)]",
}


def classify_family(
    family: AlternativeFamily,
    statistic_family: str,
    n_grid: Sequence[int],
    c2_grid: Sequence[float],
    kappa_family: Optional[KappaFamily] = None,
    tau_low: Optional[float] = None,
    tau_zero: Optional[float] = None,
) -> ClassificationReport:
    """
    n^{2r}·Σ_{|j|<c₂k_n}|θ_{nj}|² на сетках n и c₂.

    consistent-trend - для некоторого c₂ значение не опускается ниже τ₋ на всей сетке;
    inconsistent-trend - для всех c₂ значение при наибольшем n ниже τ₀.
    """
    if not n_grid or not c2_grid:
        raise InvalidInputError("сетки n и c₂ не должны быть пустыми")
    if statistic_family not in K_RULES:
        raise InvalidInputError(f"Неизвестное семейство статистик: {statistic_family}")
    tau_low = float(DEFAULTS["tau_low"] if tau_low is None else tau_low)
    tau_zero = float(DEFAULTS["tau_zero"] if tau_zero is None else tau_zero)
    r = family.r

    rows = []
    for n in n_grid:
        theta = family(n)
        k = statistic_scale(statistic_family, n, r, kappa_family)
        for c2 in c2_grid:
            cutoff = c2 * k
            rows.append(
                {
                    "n": int(n),
                    "c2": float(c2),
                    "k_n": k,
                    "cutoff": cutoff,
                    "low_mass_scaled": n ** (2 * r) * (low_frequency_mass(theta, cutoff) if cutoff >= 1 else 0.0),
                    "tail_mass_scaled": n ** (2 * r) * high_frequency_mass(theta, cutoff),
                }
            )
    frame = pd.DataFrame(rows)

    per_c2 = frame.groupby("c2")["low_mass_scaled"]
    lows = per_c2.min()
    last_n = frame["n"].max()
    at_last = frame[frame["n"] == last_n].set_index("c2")["low_mass_scaled"]
    if (lows >= tau_low).any():
        verdict = "consistent-trend"
        witness = {"c2": float(lows.idxmax()), "min_scaled_mass": float(lows.max())}
    elif (at_last < tau_zero).all():
        verdict = "inconsistent-trend"
        witness = {"max_scaled_mass_at_last_n": float(at_last.max())}
    else:
        verdict = "indeterminate"
        witness = {"max_scaled_mass_at_last_n": float(at_last.max())}
    return ClassificationReport(
        family=family.name,
        statistic_family=statistic_family,
        k_rule=K_RULES[statistic_family],
        frame=frame,
        verdict=verdict,
        tau_low=tau_low,
        tau_zero=tau_zero,
        witnesses=witness,
    )


# === Чистая состоятельность ===
@dataclass
class PurityReport:
    family: str
    frame: pd.DataFrame
    smallest_c1: Dict[float, Optional[float]]
    verdict: str
    illegal_cutoffs: List[Tuple[int, float]]

    @property
    def is_pure(self) -> bool:
        return self.verdict == "purity-trend"


def purity_check(
    family: AlternativeFamily,
    statistic_family: str,
    n_grid: Sequence[int],
    C1_grid: Sequence[float],
    epsilon: Union[float, Sequence[float], None] = None,
    burn_in: Optional[int] = None,
    kappa_family: Optional[KappaFamily] = None,
    check_density: Optional[bool] = None,
) -> PurityReport:
    """
    Для каждого ε - наименьшее C₁ из сетки с n^{2r}·Σ_{|j|>C₁k_n}|θ|² <= ε при всех n
    после первых burn_in точек сетки. Для плотностей хвост 1 + Σ_{|i|>l}θ_iφ_i
    должен оставаться плотностью; недопустимые срезки пропускаются и перечисляются.
    """
    ladder = list(DEFAULTS["epsilon_ladder"]) if epsilon is None else ([float(epsilon)] if np.isscalar(epsilon) else [float(e) for e in epsilon])
    if any(e <= 0 for e in ladder):
        raise InvalidInputError("ε должны быть положительными")
    burn_in = int(DEFAULTS["burn_in"] if burn_in is None else burn_in)
    n_grid = [int(n) for n in n_grid]
    if burn_in >= len(n_grid):
        burn_in = 0
    C1_grid = sorted(float(c) for c in C1_grid)
    r = family.r
    if check_density is None:
        check_density = family.basis is not Basis.GENERIC

    rows = []
    illegal: List[Tuple[int, float]] = []
    for n in n_grid:
        theta = family(n)
        k = statistic_scale(statistic_family, n, r, kappa_family)
        cutoffs = [int(math.floor(c * k)) for c in C1_grid]
        legal = {}
        if check_density and theta.basis is not Basis.GENERIC:
            table = density_tail_check(theta, sorted(set(cutoffs)), grid_size=4096)
            legal = dict(zip(table["cutoff"], table["tail_is_density"]))
        for c, cut in zip(C1_grid, cutoffs):
            ok = bool(legal.get(cut, True))
            if not ok:
                illegal.append((n, c))
            rows.append({"n": n, "C1": c, "cutoff": cut, "tail_scaled": n ** (2 * r) * high_frequency_mass(theta, cut), "legal": ok})
    frame = pd.DataFrame(rows)
    considered = frame[frame["n"].isin(n_grid[burn_in:])]

    smallest: Dict[float, Optional[float]] = {}
    for eps in ladder:
        smallest[eps] = None
        for c in C1_grid:
            sub = considered[considered["C1"] == c]
            if sub["legal"].all() and (sub["tail_scaled"] <= eps).all():
                smallest[eps] = c
                break
    verdict = "purity-trend" if all(v is not None for v in smallest.values()) else "impurity-trend"
    return PurityReport(family=family.name, frame=frame, smallest_c1=smallest, verdict=verdict, illegal_cutoffs=illegal)


# === Тела Бесова ===
class BesovFlavor(str, Enum):
    BAR = "bar"  # односторонний вещественный, j >= 1
    B = "b"  # двусторонний комплексный
    B_TILDE = "b-tilde"  # двусторонний, θ_0 = 0


@dataclass(frozen=True)
class BesovBall:
    s: float
    P0: float
    flavor: BesovFlavor = BesovFlavor.BAR

    def __post_init__(self) -> None:
        if not self.s > 0 or not self.P0 > 0:
            raise InvalidInputError(f"s и P0 должны быть положительными: s={self.s}, P0={self.P0}")


def _check_flavor(theta: CoefficientVector, flavor: BesovFlavor) -> None:
    two_sided = theta.basis is Basis.TRIG_COMPLEX
    if two_sided != (flavor is not BesovFlavor.BAR):
        raise InvalidInputError(f"вариант {flavor.value} не соответствует базису {theta.basis.value}")


def besov_profile(theta: CoefficientVector, s: float) -> pd.DataFrame:
    """
    Для каждой точки носителя j: хвост Σ_{|k|>=j}|θ_k|² и j^{2s}·хвост
    (значение функционала при λ -> j⁻).
    """
    sq = theta.squared_moduli() * theta.multiplicity
    tails = np.cumsum(sq[::-1])[::-1]
    j = theta.indices.astype(float)
    return pd.DataFrame({"j": theta.indices, "tail": tails, "profile": j ** (2.0 * s) * tails})


def besov_norm(theta: CoefficientVector, s: float, flavor: Optional[BesovFlavor] = None) -> float:
    """sup_λ λ^{2s}Σ_{|j|>λ}|θ_j|² (точно для конечного носителя)."""
    if flavor is not None:
        _check_flavor(theta, flavor)
    if theta.is_zero:
        return 0.0
    return float(besov_profile(theta, s)["profile"].max())


def besov_membership(theta: CoefficientVector, ball: BesovBall) -> Tuple[float, bool]:
    value = besov_norm(theta, ball.s, ball.flavor)
    return value, bool(value <= ball.P0)


def smoothness_for_rate(r: float) -> float:
    """s с r = 2s/(1 + 4s)."""
    if not 0.0 < r < 0.5:
        raise InvalidInputError(f"r должен лежать в (0, 1/2): {r}")
    return r / (2.0 - 4.0 * r)


@dataclass(frozen=True)
class Decomposition:
    f1: CoefficientVector
    f2: CoefficientVector
    besov_norm_f1: float

    @property
    def pythagoras_defect(self) -> float:
        whole = self.f1 + self.f2
        return whole.squared_norm() - self.f1.squared_norm() - self.f2.squared_norm()


def maxiset_decompose(theta_n: CoefficientVector, cutoff: int, s: float) -> Decomposition:
    """f1 - коэффициенты с |j| < cutoff, f2 - остальные."""
    if cutoff < 1:
        raise InvalidInputError(f"cutoff должен быть >= 1: {cutoff}")
    f1 = theta_n.restrict(lo=1, hi=int(cutoff))
    f2 = theta_n.restrict(lo=int(cutoff))
    return Decomposition(f1=f1, f2=f2, besov_norm_f1=besov_norm(f1, s))


def maxiset_scan(
    family: AlternativeFamily,
    statistic_family: str,
    n_grid: Sequence[int],
    c: float = 1.0,
    s: Optional[float] = None,
    kappa_family: Optional[KappaFamily] = None,
) -> pd.DataFrame:
    """
    Разложение на сетке n со срезкой c·k_n; scaled_besov = ‖f1‖_B / (n^{2r}‖θ‖²)
    должно оставаться ограниченным.
    """
    r = family.r
    s = smoothness_for_rate(r) if s is None else s
    rows = []
    for n in n_grid:
        theta = family(n)
        k = statistic_scale(statistic_family, n, r, kappa_family)
        cutoff = max(1, int(math.floor(c * k)))
        dec = maxiset_decompose(theta, cutoff, s)
        norm2 = theta.squared_norm()
        rows.append(
            {
                "n": int(n),
                "cutoff": cutoff,
                "norm_f1_sq": dec.f1.squared_norm(),
                "norm_f2_sq": dec.f2.squared_norm(),
                "besov_norm_f1": dec.besov_norm_f1,
                "scaled_besov": dec.besov_norm_f1 / (n ** (2 * r) * norm2) if norm2 > 0 else 0.0,
            }
        )
    return pd.DataFrame(rows)


def measure_approximation(
    family: AlternativeFamily,
    statistic_family: str,
    n_grid: Sequence[int],
    cutoff_grid: Sequence[float],
    epsilon: float = 0.05,
    alpha: float = DEFAULTS["alpha"],
    params: Optional[Mapping[str, Any]] = None,
    s: Optional[float] = None,
) -> pd.DataFrame:
    """
    Приближение f гладкой частью f1 (срезка C·k_n): |β(f) - β(f1)| по асимптотической
    формуле, остаток ‖f2‖·n^r и норма Бесова f1. within_epsilon отмечает пары (C, n),
    на которых f1 неотличима от f с точностью ε.
    """
    r = family.r
    s = smoothness_for_rate(r) if s is None else s
    rows = []
    for n in n_grid:
        plan = build_plan(statistic_family, int(n), alpha, {"r": r, **dict(params or {})})
        theta = family(n)
        k = statistic_scale(statistic_family, n, r)
        beta_full = plan.prediction(theta)
        for C in cutoff_grid:
            cutoff = max(1, int(math.floor(C * k)))
            dec = maxiset_decompose(theta, cutoff, s)
            beta_smooth = plan.prediction(dec.f1) if not dec.f1.is_zero else 1.0 - alpha
            gap = abs(beta_full - beta_smooth)
            rows.append(
                {
                    "n": int(n),
                    "C": float(C),
                    "cutoff": cutoff,
                    "beta_f": beta_full,
                    "beta_f1": beta_smooth,
                    "beta_gap": gap,
                    "remainder_scaled": math.sqrt(dec.f2.squared_norm()) * n**r,
                    "scaled_besov": dec.besov_norm_f1 / (n ** (2 * r) * theta.squared_norm()) if not theta.is_zero else 0.0,
                    "besov_norm_f1": dec.besov_norm_f1,
                    "within_epsilon": bool(gap <= epsilon),
                }
            )
    return pd.DataFrame(rows)


# === Ортогональность и взаимодействие ===
def orthogonality_check(f: CoefficientVector, g: CoefficientVector) -> Tuple[float, float]:
    """(Σ Re θ_j conj η_j по всем индексам, ‖f+g‖² - ‖f‖² - ‖g‖²)."""
    if f.basis is not g.basis:
        raise InvalidInputError("f и g заданы в разных базисах")
    J = max(f.max_index, g.max_index, 1)
    a = f.to_dense(J)
    b = g.to_dense(J)
    cross = f.multiplicity * math.fsum(np.real(a * np.conj(b)).tolist())
    total = f.multiplicity * math.fsum((np.abs(a + b) ** 2).tolist())
    defect = total - f.squared_norm() - g.squared_norm()
    return cross, defect


@dataclass
class InteractionResult:
    n: int
    statistic_family: str
    beta_f: PowerEstimate
    beta_f_plus_g: PowerEstimate
    difference: Dict[str, float]
    predicted: Dict[str, float]
    additivity: Optional[Dict[str, float]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "statistic_family": self.statistic_family,
            "beta_f": self.beta_f.to_dict(),
            "beta_f_plus_g": self.beta_f_plus_g.to_dict(),
            "difference": self.difference,
            "predicted": self.predicted,
            "additivity": self.additivity,
        }


def interaction_noncentrality(f: CoefficientVector, g: CoefficientVector, plan: StatisticPlan) -> Dict[str, float]:
    """
    R_n(f + g) - R_n(f) против 2σ⁻⁴n²Σκ²θ_jη_j + R_n(g) (точное раскрытие формы).
    """
    if plan.weights is None:
        raise InvalidInputError("аддитивность определена для квадратичных форм")
    w = plan.weights
    r_f, _ = noncentrality(f, w)
    r_g, _ = noncentrality(g, w)
    r_fg, _ = noncentrality(f + g, w)
    expanded = 2.0 * cross_noncentrality(f, g, w) + r_g
    return {"R_f": r_f, "R_g": r_g, "R_f_plus_g": r_fg, "difference": r_fg - r_f, "expanded": expanded}


def interaction_experiment(
    consistent: AlternativeFamily,
    inconsistent: AlternativeFamily,
    statistic_family: str,
    n: int,
    reps: int,
    seed: int,
    alpha: float = DEFAULTS["alpha"],
    params: Optional[Mapping[str, Any]] = None,
    workers: int = 1,
) -> InteractionResult:
    """
    β(f) и β(f + g) на общих случайных числах (одна репликация считает оба счёта).
    """
    plan = build_plan(statistic_family, n, alpha, {"r": consistent.r, **dict(params or {})}, seed=seed, workers=workers)
    f = consistent(n)
    g = inconsistent(n)
    both = f + g
    scores = simulate_scores(plan.replicate([f, both]), reps, seed, f"interaction/{statistic_family}/n={n}", workers)
    accept_f = scores[:, 0] <= plan.threshold
    accept_fg = scores[:, 1] <= plan.threshold
    beta_f = estimate_rejection(accept_f, seed)
    beta_fg = estimate_rejection(accept_fg, seed)
    additivity = interaction_noncentrality(f, g, plan) if plan.weights is not None else None
    predicted = {"beta_f": plan.prediction(f), "beta_f_plus_g": plan.prediction(both)}
    return InteractionResult(
        n=int(n),
        statistic_family=statistic_family,
        beta_f=beta_f,
        beta_f_plus_g=beta_fg,
        difference=paired_difference(accept_f, accept_fg),
        predicted=predicted,
        additivity=additivity,
    )


# === Компактность ===
@dataclass(frozen=True)
class MixtureReplicate:
    """
    Логарифм отношения правдоподобия для равномерной смеси {a·e_j : j <= J}
    при H0 и при сигнале в первой координате (общий шум).
    """

    J: int
    a: float

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.J)
        null = special.logsumexp(self.a * z)
        z[0] += self.a
        alt = special.logsumexp(self.a * z)
        return np.array([null, alt])


@dataclass(frozen=True)
class TruncatedChi2Replicate:
    """Σ_{i∈D}(z_i + a_i)² для каждого направления сетки (a_i - сдвиг направления)."""

    shifts: np.ndarray  # (направления × |D|)

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.shifts.shape[1])
        return np.sum((z[None, :] + self.shifts) ** 2, axis=1)


@dataclass
class CompactnessReport:
    set_kind: str
    directions: pd.DataFrame
    mixture: Optional[pd.DataFrame] = None
    minimax_power: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)


def _mixture_power(J: int, a: float, alpha: float, reps: int, seed: int, workers: int) -> Tuple[float, Optional[PowerEstimate]]:
    """Мощность байесовского теста против смеси; для J = 1 - точная формула."""
    if J == 1:
        return float(special.ndtr(a - normal_quantile(alpha))), None
    scores = simulate_scores(MixtureReplicate(J=J, a=a), reps, seed, f"compactness/mixture/J={J}", workers)
    critical = float(np.quantile(scores[:, 0], 1.0 - alpha))
    estimate = estimate_rejection(scores[:, 1] > critical, seed)
    return estimate.estimate, estimate


def compactness_demo(
    set_kind: str,
    rho: float,
    direction_grid: Sequence[int],
    n: int,
    reps: int,
    seed: int,
    sigma: float = 1.0,
    alpha: float = DEFAULTS["alpha"],
    mixture_dims: Sequence[int] = (1, 10, 100, 1000, 10_000),
    ellipsoid_power: float = 1.0,
    workers: int = 1,
) -> CompactnessReport:
    """
    l2_ball: мощность лучшего теста по одной координате не зависит от j, а тест
    против смеси по J направлениям теряет мощность с ростом J.
    ellipsoid (a_j = j^{-p}): допустимы лишь j с a_j >= ρ, их конечное число;
    χ²-тест по этим координатам сохраняет мощность на всех допустимых направлениях.
    """
    if not rho > 0:
        raise InvalidInputError(f"rho должен быть положительным: {rho}")
    if not sigma > 0 or n < 1:
        raise InvalidInputError(f"некорректные n={n} или sigma={sigma}")
    scale = math.sqrt(n) / sigma
    x_alpha = normal_quantile(alpha)

    if set_kind == "l2_ball":
        a = rho * scale
        per_coord = float(special.ndtr(a - x_alpha))
        directions = pd.DataFrame({"j": [int(j) for j in direction_grid], "effective_rho": rho, "power": per_coord, "method": "exact"})
        rows = []
        for J in mixture_dims:
            power, estimate = _mixture_power(int(J), a, alpha, reps, seed, workers)
            rows.append(
                {
                    "J": int(J),
                    "power": power,
                    "ci_low": estimate.ci_low if estimate else power,
                    "ci_high": estimate.ci_high if estimate else power,
                    "method": "exact" if estimate is None else "monte-carlo",
                    "excess_over_alpha": power - alpha,
                }
            )
        return CompactnessReport(
            set_kind, directions, mixture=pd.DataFrame(rows), metadata={"snr": a, "per_coordinate_power": per_coord}
        )

    if set_kind == "ellipsoid":
        p = float(ellipsoid_power)
        feasible = [j for j in range(1, int(math.floor(rho ** (-1.0 / p))) + 2) if j ** (-p) >= rho]
        if not feasible:
            raise InvalidInputError(f"при ρ={rho} нет допустимых направлений")
        df = len(feasible)
        critical = float(stats.chi2.ppf(1.0 - alpha, df))
        grid = [int(j) for j in direction_grid]
        eff = [min(rho, j ** (-p)) for j in grid]
        shifts = np.zeros((len(grid), df))
        for row, (j, r_eff) in enumerate(zip(grid, eff)):
            if j in feasible:
                shifts[row, feasible.index(j)] = r_eff * scale
        scores = simulate_scores(TruncatedChi2Replicate(shifts=shifts), reps, seed, "compactness/ellipsoid", workers)
        rows = []
        for row, (j, r_eff) in enumerate(zip(grid, eff)):
            nc = float(np.sum(shifts[row] ** 2))
            exact = float(stats.ncx2.sf(critical, df, nc)) if nc > 0 else alpha
            est = estimate_rejection(scores[:, row] > critical, seed)
            rows.append(
                {
                    "j": j,
                    "a_j": j ** (-p),
                    "feasible": j in feasible,
                    "effective_rho": r_eff,
                    "power": exact,
                    "power_mc": est.estimate,
                    "ci_low": est.ci_low,
                    "ci_high": est.ci_high,
                }
            )
        directions = pd.DataFrame(rows)
        nc_min = (rho * scale) ** 2
        minimax = float(stats.ncx2.sf(critical, df, nc_min))
        return CompactnessReport(
            set_kind,
            directions,
            minimax_power=minimax,
            metadata={"feasible_directions": feasible, "critical_value": critical, "df": df},
        )

    raise InvalidInputError(f"Неизвестный тип множества: {set_kind}")

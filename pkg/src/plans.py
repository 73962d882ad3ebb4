# src/plans.py
"""
План теста: как для данной статистики и n
- разыграть счёты сразу для нескольких альтернатив на общих случайных числах;
- получить порог отклонения;
- предсказать ошибку второго рода по асимптотической формуле.

Используется и харнессом, и экспериментами consistency_lab.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np

from .chi_squared_tests import chi2_functional, chi2_power_formula, chi2_score, chi2_statistic, default_cells
from .config import DEFAULTS, STATISTICS
from .cvm_tests import calibrate_cvm, cvm_predicted_power, cvm_sample_score, cvm_spectral
from .errors import InvalidInputError
from .families import STATISTIC_BASIS
from .kernel_tests import (
    KernelPlan,
    kernel_noncentrality_argument,
    kernel_power_formula,
    kernel_weights,
    make_kernel_plan,
)
from .montecarlo import DensityReplicate, QuadraticFormReplicate
from .quadratic_tests import (
    KappaWeights,
    example_kappa_family,
    noncentrality,
    noncentrality_argument,
    quadratic_power_formula,
)
from .sequence_model import Basis, CoefficientVector, make_density, normal_quantile, observation_mean

logger = logging.getLogger(__name__)


def chi2_sample_score(sample: np.ndarray, m: int) -> float:
    return chi2_score(chi2_statistic(sample, m), m)


@dataclass
class StatisticPlan:
    """
    Собранный тест. weights - для quadratic/kernel, m - для chi2,
    critical_value - для cvm (для остальных порог x_α).
    """

    statistic: str
    n: int
    alpha: float
    threshold: float
    basis: Basis
    sigma: float = 1.0
    weights: Optional[KappaWeights] = None
    kernel_plan: Optional[KernelPlan] = None
    m: Optional[int] = None
    cvm_J: int = DEFAULTS["cvm_J"]
    prediction_draws: int = 100_000
    seed: int = DEFAULTS["seed"]
    metadata: Dict[str, Any] = field(default_factory=dict)

    # --- счёты ---
    def replicate(self, thetas: Sequence[CoefficientVector]):
        """Репликация, возвращающая по счёту на каждую альтернативу (общий шум)."""
        for theta in thetas:
            self._check_basis(theta)
        if self.statistic in ("quadratic", "kernel"):
            w = self.weights
            J = w.J
            means = np.vstack([observation_mean(theta, J) for theta in thetas])
            if self.statistic == "quadratic":
                divisor = math.sqrt(w.null_variance)
            else:
                plan = self.kernel_plan
                divisor = plan.sigma**2 * plan.gamma / (plan.n * math.sqrt(plan.h))
            return QuadraticFormReplicate(
                means=means,
                mw=w.multiplicity * w.weights,
                offset=w.sigma**2 * w.rho_n / w.n,
                divisor=divisor,
                sigma=w.sigma,
                n=w.n,
                two_sided=w.two_sided,
            )
        densities = tuple(None if theta.is_zero else make_density(theta) for theta in thetas)
        if self.statistic == "chi2":
            return DensityReplicate(densities=densities, n=self.n, statistic=partial(chi2_sample_score, m=self.m))
        return DensityReplicate(densities=densities, n=self.n, statistic=cvm_sample_score)

    def _check_basis(self, theta: CoefficientVector) -> None:
        if theta.basis is not self.basis:
            raise InvalidInputError(f"{self.statistic}: ожидается базис {self.basis.value}, получен {theta.basis.value}")

    # --- асимптотика ---
    def noncentrality_argument(self, theta: CoefficientVector) -> float:
        """
        Аргумент формулы мощности (для cvm - популяционное n·T²(F_n - F_0)).
        """
        self._check_basis(theta)
        if self.statistic == "quadratic":
            return noncentrality_argument(theta, self.weights)
        if self.statistic == "kernel":
            return kernel_noncentrality_argument(theta, self.kernel_plan)
        if self.statistic == "chi2":
            return chi2_functional(theta, self.m, self.n) / math.sqrt(2.0 * self.m)
        return cvm_spectral(theta, self.n)

    def prediction(self, theta: CoefficientVector) -> float:
        """Предсказанная ошибка второго рода β."""
        self._check_basis(theta)
        if self.statistic == "quadratic":
            r_n, a_n = noncentrality(theta, self.weights)
            return quadratic_power_formula(r_n, a_n, self.alpha)
        if self.statistic == "kernel":
            return kernel_power_formula(theta, self.kernel_plan, self.alpha)
        if self.statistic == "chi2":
            return chi2_power_formula(theta, self.m, self.n, self.alpha)
        power = cvm_predicted_power(theta, self.n, self.threshold, self.cvm_J, self.prediction_draws, self.seed)
        return 1.0 - power

    def scale_to(self, theta: CoefficientVector, target: float) -> CoefficientVector:
        """θ, отмасштабированная так, что noncentrality_argument = target."""
        current = self.noncentrality_argument(theta)
        if current <= 0:
            raise InvalidInputError(f"{self.statistic}: направление θ не видно статистике")
        if target < 0:
            raise InvalidInputError(f"target должен быть неотрицательным: {target}")
        return theta.scale(math.sqrt(target / current))

    @property
    def support_limit(self) -> Optional[int]:
        """Наибольший индекс, который видит симуляция (None - без ограничения)."""
        return self.weights.J if self.weights is not None else None

    def truncation_record(self) -> Optional[Dict[str, Any]]:
        source = self.weights.truncation if self.weights is not None else None
        if self.statistic == "cvm":
            return {"J": self.cvm_J, "rule": "bridge tail < 1e-4", "tail_fraction": None, "capped": False}
        return None if source is None else source.to_dict()


def build_plan(
    statistic: str,
    n: int,
    alpha: float,
    params: Optional[Mapping[str, Any]] = None,
    seed: int = DEFAULTS["seed"],
    workers: int = 1,
) -> StatisticPlan:
    """
    Параметры (все необязательные):
      quadratic: r, gamma, c, sigma, J, two_sided;
      kernel: kernel, r, c1, h, sigma, J;
      chi2: r, m или m_const;
      cvm: cvm_J, cvm_draws, critical_value, cvm_cache, prediction_draws.
    """
    if statistic not in STATISTICS:
        raise InvalidInputError(f"Неизвестная статистика: {statistic}")
    params = dict(params or {})
    r = float(params.get("r", 0.25))
    sigma = float(params.get("sigma", 1.0))
    threshold = normal_quantile(alpha)

    if statistic == "quadratic":
        two_sided = bool(params.get("two_sided", False))
        w = example_kappa_family(
            n,
            r=r,
            gamma=float(params.get("gamma", 2.0)),
            c=float(params.get("c", 1.0)),
            sigma=sigma,
            J=params.get("J"),
            two_sided=two_sided,
        )
        basis = Basis.TRIG_COMPLEX if two_sided else Basis.GENERIC
        return StatisticPlan(statistic, n, alpha, threshold, basis, sigma=sigma, weights=w, seed=seed, metadata={"r": r})

    if statistic == "kernel":
        plan = make_kernel_plan(
            kernel=params.get("kernel"),
            n=n,
            h=params.get("h"),
            sigma=sigma,
            J=params.get("J"),
            r=r,
            c1=float(params.get("c1", 1.0)),
        )
        return StatisticPlan(
            statistic, n, alpha, threshold, Basis.TRIG_COMPLEX, sigma=sigma,
            weights=kernel_weights(plan), kernel_plan=plan, seed=seed,
            metadata={"r": r, "h": plan.h, "gamma": plan.gamma, "kernel": plan.kernel.name},
        )

    if statistic == "chi2":
        m = int(params["m"]) if "m" in params else default_cells(n, r, float(params.get("m_const", 1.0)))
        return StatisticPlan(statistic, n, alpha, threshold, Basis.TRIG_COMPLEX, m=m, seed=seed, metadata={"r": r, "m": m})

    cvm_J = int(params.get("cvm_J", DEFAULTS["cvm_J"]))
    if "critical_value" in params:
        critical = float(params["critical_value"])
    else:
        critical = calibrate_cvm(
            alpha,
            J=cvm_J,
            draws=int(params.get("cvm_draws", DEFAULTS["cvm_draws"])),
            seed=seed,
            cache=params.get("cvm_cache"),
            workers=workers,
        )
    return StatisticPlan(
        statistic, n, alpha, critical, STATISTIC_BASIS["cvm"], cvm_J=cvm_J,
        prediction_draws=int(params.get("prediction_draws", 100_000)), seed=seed,
        metadata={"r": r, "critical_value": critical},
    )

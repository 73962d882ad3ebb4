# src/harness.py
"""
Оркестрация экспериментов.

- estimate_errors: α̂ и β̂ с интервалами Уилсона на сетке n (общие случайные числа
  для нулевого плеча и всех альтернатив);
- run_suite: прогон манифеста, JSON-бандл + CSV/Parquet на эксперимент + Markdown-сводка;
- acceptance_checks: приёмочный набор (тождества, калибровка, мощность, дихотомия,
  взаимодействие, нулевой мост, κ-семейство, компактность, детерминизм).

Всё, кроме полей runtime / runtime_ms, - чистая функция (манифест, seed).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .chi_squared_tests import chi2_functional, fourier_identity
from .config import DEFAULTS, SCHEMA_VERSION, ExperimentConfig, manifest_document
from .consistency_lab import compactness_demo, interaction_experiment, maxiset_decompose
from .cvm_tests import NULL_MEAN, bridge_limit_draws, cvm_double_integral, cvm_spectral
from .errors import LabError
from .families import family_from_config, make_family
from .io import RESULTS_DIR, dumps_json, safe_print, save_report, write_json, write_result_table
from .kernel_tests import make_kernel_plan, t1n_functional, t1n_time_domain
from .montecarlo import PowerEstimate, mean_with_se, rejection_rates, simulate_scores
from .plans import StatisticPlan, build_plan
from .quadratic_tests import make_kappa_family, validate_assumptions
from .rng import stream
from .sequence_model import (
    Basis,
    CoefficientVector,
    evaluate,
    parseval_norm,
    random_cosine_polynomial,
    random_trig_polynomial,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["experiment", "n", "alpha_hat", "alpha_lo", "alpha_hi", "beta_hat", "beta_lo", "beta_hi", "prediction"]
TIMING_KEYS = ("runtime", "runtime_ms")
DEFAULT_DIRECTION = {"preset": "shrinking-smooth"}


# === Результаты ===
@dataclass
class AlternativeResult:
    label: str
    beta_hat: PowerEstimate
    prediction: Optional[float]
    noncentrality: float
    dropped_mass: float = 0.0

    @property
    def power(self) -> float:
        return 1.0 - self.beta_hat.estimate

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "beta_hat": self.beta_hat.to_dict(),
            "prediction": self.prediction,
            "noncentrality": self.noncentrality,
            "dropped_mass": self.dropped_mass,
        }


@dataclass
class GridPointResult:
    n: int
    alpha_hat: PowerEstimate
    alternatives: List[AlternativeResult]
    plan: Dict[str, Any]
    truncation: Optional[Dict[str, Any]]
    runtime_ms: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "alpha_hat": self.alpha_hat.to_dict(),
            "alternatives": [a.to_dict() for a in self.alternatives],
            "plan": self.plan,
            "truncation": self.truncation,
            "runtime_ms": self.runtime_ms,
        }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    points: List[GridPointResult] = field(default_factory=list)
    status: str = "ok"
    error: Optional[str] = None
    assertions: List[Dict[str, Any]] = field(default_factory=list)
    runtime_ms: int = 0

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(a["passed"] for a in self.assertions)

    def to_frame(self) -> pd.DataFrame:
        """Строки CSV: по одной на (n, альтернатива); без альтернатив - только α̂."""
        rows = []
        for point in self.points:
            base = {
                "experiment": self.config.name,
                "n": point.n,
                "alpha_hat": point.alpha_hat.estimate,
                "alpha_lo": point.alpha_hat.ci_low,
                "alpha_hi": point.alpha_hat.ci_high,
            }
            if not point.alternatives:
                rows.append({**base, "beta_hat": None, "beta_lo": None, "beta_hi": None, "prediction": None})
            for alt in point.alternatives:
                rows.append(
                    {
                        **base,
                        "beta_hat": alt.beta_hat.estimate,
                        "beta_lo": alt.beta_hat.ci_low,
                        "beta_hi": alt.beta_hat.ci_high,
                        "prediction": alt.prediction,
                    }
                )
        return pd.DataFrame(rows, columns=CSV_COLUMNS)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.config.name,
            "config": self.config.to_dict(),
            "status": self.status,
            "error": self.error,
            "points": [p.to_dict() for p in self.points],
            "acceptance": self.assertions,
            "runtime_ms": self.runtime_ms,
        }


def strip_timing(obj: Any) -> Any:
    """Копия бандла без полей времени (для сравнения прогонов)."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


# === Альтернативы ===
def _alternative_label(spec: Dict[str, Any]) -> str:
    if "label" in spec:
        return str(spec["label"])
    if "preset" in spec:
        return str(spec["preset"])
    if "noncentrality" in spec:
        return f"noncentrality={spec['noncentrality']:g}"
    return "null"


def _family_spec(spec: Dict[str, Any], plan: StatisticPlan) -> Dict[str, Any]:
    spec = {k: v for k, v in spec.items() if k not in ("label", "direction", "noncentrality")}
    spec.setdefault("basis", plan.basis.value)
    return spec


def resolve_alternative(spec: Dict[str, Any], plan: StatisticPlan, config: ExperimentConfig) -> Tuple[CoefficientVector, float]:
    """
    θ для элемента alternatives при данном плане и доля массы, отброшенной
    усечением плана (θ за пределами J не видна симуляции).
    """
    r = float(config.statistic_params.get("r", 0.25))
    if spec.get("null"):
        return CoefficientVector.zeros(plan.basis), 0.0
    if "noncentrality" in spec:
        direction = _family_spec(dict(spec.get("direction") or DEFAULT_DIRECTION), plan)
        theta = family_from_config(direction, config.statistic, r)(plan.n)
    else:
        theta = family_from_config(_family_spec(spec, plan), config.statistic, r)(plan.n)

    dropped = 0.0
    limit = plan.support_limit
    if limit is not None and theta.support_max > limit:
        kept = theta.restrict(lo=1, hi=limit + 1)
        total = theta.squared_norm()
        dropped = (total - kept.squared_norm()) / total if total > 0 else 0.0
        logger.warning("%s: θ truncated at J=%d, dropped mass fraction %.3e", config.name, limit, dropped)
        theta = kept

    if "noncentrality" in spec:
        theta = plan.scale_to(theta, float(spec["noncentrality"]))
    return theta, dropped


# === estimate_errors ===
def estimate_errors(config: ExperimentConfig, workers: int = 1) -> List[GridPointResult]:
    """
    Для каждого n: нулевое плечо и все альтернативы на общих случайных числах
    (поток stream(seed, "<имя>/n=<n>", i)), α̂ = P(отклонить | H0), β̂ = P(принять | θ).
    """
    config.validate()
    points = []
    for n in config.n_grid:
        started = time.perf_counter()
        plan = build_plan(config.statistic, n, config.alpha, config.statistic_params, seed=config.seed, workers=workers)
        arms = [CoefficientVector.zeros(plan.basis)]
        labels, dropped = [], []
        for spec in config.alternatives:
            theta, lost = resolve_alternative(spec, plan, config)
            arms.append(theta)
            labels.append(_alternative_label(spec))
            dropped.append(lost)

        scores = simulate_scores(plan.replicate(arms), config.reps, config.seed, f"{config.name}/n={n}", workers)
        runtime_ms = int(round(1000 * (time.perf_counter() - started)))
        rates = rejection_rates(scores, plan.threshold, config.seed, runtime_ms)

        alternatives = []
        for label, theta, rate, lost in zip(labels, arms[1:], rates[1:], dropped):
            alternatives.append(
                AlternativeResult(
                    label=label,
                    beta_hat=rate.complement(),
                    prediction=plan.prediction(theta),
                    noncentrality=plan.noncentrality_argument(theta),
                    dropped_mass=lost,
                )
            )
        logger.info("%s n=%d: alpha_hat=%.4f (%d reps)", config.name, n, rates[0].estimate, config.reps)
        points.append(
            GridPointResult(
                n=int(n),
                alpha_hat=rates[0],
                alternatives=alternatives,
                plan={"threshold": plan.threshold, **plan.metadata},
                truncation=plan.truncation_record(),
                runtime_ms=runtime_ms,
            )
        )
    return points


# === Проверки манифеста ===
def _check(name: str, passed: bool, **detail: Any) -> Dict[str, Any]:
    return {"check": name, "passed": bool(passed), **detail}


def evaluate_assertions(result: ExperimentResult) -> List[Dict[str, Any]]:
    """
    Поддерживаемые ключи acceptance:
      alpha_tolerance - |α̂ - α| <= tol при всех n;
      prediction_tolerance - |β̂ - β_pred| <= tol для всех альтернатив;
      min_power_excess - {label: v}: (1 - β̂) - α >= v;
      max_power_excess - {label: v}: |(1 - β̂) - α| <= v.
    """
    spec = result.config.acceptance
    alpha = result.config.alpha
    checks = []
    for point in result.points:
        if "alpha_tolerance" in spec:
            gap = abs(point.alpha_hat.estimate - alpha)
            checks.append(_check("alpha_tolerance", gap <= spec["alpha_tolerance"], n=point.n, value=gap, limit=spec["alpha_tolerance"]))
        for alt in point.alternatives:
            if "prediction_tolerance" in spec and alt.prediction is not None:
                gap = abs(alt.beta_hat.estimate - alt.prediction)
                checks.append(
                    _check("prediction_tolerance", gap <= spec["prediction_tolerance"], n=point.n, alternative=alt.label, value=gap, limit=spec["prediction_tolerance"])
                )
            excess = alt.power - alpha
            if alt.label in spec.get("min_power_excess", {}):
                limit = spec["min_power_excess"][alt.label]
                checks.append(_check("min_power_excess", excess >= limit, n=point.n, alternative=alt.label, value=excess, limit=limit))
            if alt.label in spec.get("max_power_excess", {}):
                limit = spec["max_power_excess"][alt.label]
                checks.append(_check("max_power_excess", abs(excess) <= limit, n=point.n, alternative=alt.label, value=excess, limit=limit))
    return checks


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    started = time.perf_counter()
    result = ExperimentResult(config=config)
    try:
        result.points = estimate_errors(config, workers=workers)
        result.assertions = evaluate_assertions(result)
    except LabError as exc:
        logger.error("experiment %s failed: %s", config.name, exc)
        result.status = "error"
        result.error = str(exc)
    result.runtime_ms = int(round(1000 * (time.perf_counter() - started)))
    return result


# === run_suite ===
@dataclass
class SuiteResult:
    experiments: List[ExperimentResult]
    bundle: Dict[str, Any]
    bundle_path: Optional[Path] = None

    @property
    def passed(self) -> bool:
        return bool(self.bundle.get("passed"))

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def markdown_summary(experiments: Sequence[ExperimentResult]) -> str:
    lines = ["# Сводка прогона", "", "| эксперимент | статус | n | α̂ | проверки |", "|---|---|---|---|---|"]
    for e in experiments:
        checks = f"{sum(a['passed'] for a in e.assertions)}/{len(e.assertions)}"
        if not e.points:
            lines.append(f"| {e.config.name} | {e.status} | - | - | {checks} |")
        for p in e.points:
            lines.append(f"| {e.config.name} | {e.status} | {p.n} | {p.alpha_hat.estimate:.4f} | {checks} |")
    failed = [e.config.name for e in experiments if not e.passed]
    lines += ["", "Не прошли: " + (", ".join(failed) if failed else "нет")]
    return "\n".join(lines) + "\n"


def run_suite(
    manifest: Sequence[ExperimentConfig],
    out: Optional[Path] = None,
    workers: int = 1,
) -> SuiteResult:
    """
    Выполняет все эксперименты, пишет bundle.json, <имя>.csv/.parquet и summary.md в out.
    Ошибка одного эксперимента не останавливает остальные (status="error").
    """
    if not manifest:
        raise LabError("манифест пуст")
    started = time.perf_counter()
    experiments = [run_experiment(config, workers=workers) for config in manifest]
    seeds = sorted({c.seed for c in manifest})
    truncations = [
        {"experiment": e.config.name, "n": p.n, **p.truncation} for e in experiments for p in e.points if p.truncation
    ]
    bundle: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "seed": seeds[0] if len(seeds) == 1 else seeds,
        "manifest": manifest_document(list(manifest)),
        "experiments": [e.to_dict() for e in experiments],
        "metadata": {"truncations": truncations},
        "passed": all(e.passed for e in experiments),
        "runtime": {"total_ms": int(round(1000 * (time.perf_counter() - started))), "workers": workers},
    }
    result = SuiteResult(experiments=experiments, bundle=bundle)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for e in experiments:
            target = Path(e.config.output) if e.config.output else out / f"{e.config.name}.csv"
            write_result_table(e.to_frame(), target, quiet=True)
        result.bundle_path = write_json(bundle, out / "bundle.json")
        save_report(markdown_summary(experiments), "summary", fmt="md", directory=out)
    return result


# === Приёмка ===
@dataclass
class AcceptanceCheck:
    name: str
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"check": self.name, "passed": self.passed, "details": self.details}


def chi2_identity_check(seed: int, cases: int = 50) -> AcceptanceCheck:
    """Клеточная форма хи-квадрат против двойной суммы Фурье, m ∈ {4, 8, 16}."""
    rng = stream(seed, "identity/chi2")
    worst = 0.0
    for _ in range(cases):
        theta = random_trig_polynomial(int(rng.integers(1, 33)), rng, scale=0.05)
        for m in (4, 8, 16):
            direct = chi2_functional(theta, m, 1)
            worst = max(worst, abs(direct - fourier_identity(theta, m, 1)) / (1.0 + abs(direct)))
    return AcceptanceCheck("identity/chi2", worst <= 1e-10, {"worst_relative_gap": worst, "cases": cases})


def cvm_identity_check(seed: int, cases: int = 20) -> AcceptanceCheck:
    """Спектральная сумма КфМ против двойного интеграла с ядром min(s, t)."""
    rng = stream(seed, "identity/cvm")
    worst = 0.0
    for _ in range(cases):
        theta = random_cosine_polynomial(int(rng.integers(1, 9)), rng, scale=0.1)
        worst = max(worst, abs(cvm_spectral(theta, 1) - cvm_double_integral(theta, "min")))
    return AcceptanceCheck("identity/cvm", worst <= 1e-8, {"worst_gap": worst, "cases": cases})


def kernel_identity_check(seed: int, cases: int = 20) -> AcceptanceCheck:
    """Σ|K̂(jh)|²|θ_j|² против квадратуры свёртки, h ∈ {0.05, 0.1, 0.2}."""
    rng = stream(seed, "identity/kernel")
    worst = 0.0
    for case in range(cases):
        h = (0.05, 0.1, 0.2)[case % 3]
        degree = int(rng.integers(1, 17))
        theta = random_trig_polynomial(degree, rng, scale=0.1)
        plan = make_kernel_plan(n=1, h=h, J=degree, gamma=1.0)
        worst = max(worst, abs(t1n_functional(theta, plan) - t1n_time_domain(theta, plan.kernel, h)))
    return AcceptanceCheck("identity/kernel", worst <= 1e-6, {"worst_gap": worst, "cases": cases})


def norm_identity_checks(seed: int, cases: int = 20) -> List[AcceptanceCheck]:
    """Парсеваль на равномерной сетке и Пифагор для разложения f = f1 + f2."""
    rng = stream(seed, "identity/parseval")
    worst_parseval = 0.0
    worst_pythagoras = 0.0
    for _ in range(cases):
        degree = int(rng.integers(2, 33))
        theta = random_trig_polynomial(degree, rng)
        grid = np.arange(8 * degree) / (8 * degree)
        discrete = float(np.mean(evaluate(theta, grid) ** 2))
        worst_parseval = max(worst_parseval, abs(discrete - parseval_norm(theta) ** 2))
        dec = maxiset_decompose(theta, int(rng.integers(1, degree + 1)), s=0.5)
        worst_pythagoras = max(worst_pythagoras, abs(dec.pythagoras_defect))
    return [
        AcceptanceCheck("identity/parseval", worst_parseval <= 1e-10, {"worst_gap": worst_parseval}),
        AcceptanceCheck("identity/pythagoras", worst_pythagoras <= 1e-12, {"worst_gap": worst_pythagoras}),
    ]


IDENTITY_CHECKS: Dict[str, Callable[[int], AcceptanceCheck]] = {
    "chi2": chi2_identity_check,
    "cvm": cvm_identity_check,
    "kernel": kernel_identity_check,
}


def identity_suite(seed: int) -> List[AcceptanceCheck]:
    return [check(seed) for check in IDENTITY_CHECKS.values()] + norm_identity_checks(seed)


def acceptance_manifest(seed: int, reps: int, cvm_draws: int = 200_000) -> List[ExperimentConfig]:
    """Эксперименты Монте-Карло приёмки: калибровка, воспроизведение мощности, дихотомия."""
    n = 2**12
    levels = [{"noncentrality": t} for t in (0.5, 1.0, 2.0)]
    low = {"preset": "all-low", "amplitude": 1.5}
    escaping = {"preset": "escaping", "amplitude": 1.5}
    return [
        ExperimentConfig(
            name="quadratic",
            statistic="quadratic",
            n_grid=[n],
            statistic_params={"r": 0.25},
            alternatives=levels,
            reps=reps,
            seed=seed,
            acceptance={"alpha_tolerance": 0.01, "prediction_tolerance": 0.03},
        ),
        ExperimentConfig(
            name="kernel",
            statistic="kernel",
            n_grid=[n],
            statistic_params={"r": 0.25, "h": 1.0 / n},
            alternatives=levels,
            reps=reps,
            seed=seed,
            acceptance={"alpha_tolerance": 0.01, "prediction_tolerance": 0.03},
        ),
        ExperimentConfig(
            name="chi2",
            statistic="chi2",
            n_grid=[n, 10_000],
            statistic_params={"r": 0.25, "m": 64},
            alternatives=[{"noncentrality": t, "direction": {"preset": "all-low"}} for t in (0.5, 1.0, 2.0)],
            reps=reps,
            seed=seed,
            acceptance={"alpha_tolerance": 0.015, "prediction_tolerance": 0.04},
        ),
        ExperimentConfig(
            name="cvm-null",
            statistic="cvm",
            n_grid=[1000],
            statistic_params={"r": 0.25, "cvm_draws": cvm_draws},
            reps=reps,
            seed=seed,
            acceptance={"alpha_tolerance": 0.01},
        ),
        ExperimentConfig(
            name="dichotomy",
            statistic="quadratic",
            n_grid=[n],
            statistic_params={"r": 0.25},
            alternatives=[low, escaping],
            reps=reps,
            seed=seed,
            acceptance={"min_power_excess": {"all-low": 0.1}, "max_power_excess": {"escaping": 0.03}},
        ),
    ]


def _experiment_checks(suite: SuiteResult) -> List[AcceptanceCheck]:
    checks = []
    for e in suite.experiments:
        checks.append(
            AcceptanceCheck(
                f"experiment/{e.config.name}",
                e.passed,
                {"status": e.status, "error": e.error, "failed": [a for a in e.assertions if not a["passed"]]},
            )
        )
    return checks


def interaction_check(seed: int, reps: int, workers: int = 1) -> AcceptanceCheck:
    n = 2**12
    f = make_family("all-low", 0.25, amplitude=1.5)
    g = make_family("escaping", 0.25, amplitude=1.5)
    result = interaction_experiment(f, g, "quadratic", n, reps, seed, params={"r": 0.25}, workers=workers)
    gap = abs(result.difference["difference"])
    return AcceptanceCheck("interaction", gap <= 0.03, {"difference": result.difference, "n": n})


def bridge_null_check(seed: int, draws: int, workers: int = 1) -> AcceptanceCheck:
    values = bridge_limit_draws(CoefficientVector.zeros(Basis.COSINE_HALF), 1, 10_000, draws, seed, workers=workers, tag="acceptance/bridge-null")
    mean, se = mean_with_se(values)
    return AcceptanceCheck("bridge-null-mean", abs(mean - NULL_MEAN) <= 4 * se, {"mean": mean, "se": se, "target": NULL_MEAN})


def kappa_family_checks() -> List[AcceptanceCheck]:
    grid = [2**k for k in range(10, 15)]
    checks = []
    for r, gamma in ((0.2, 2.0), (0.25, 2.0), (0.25, 3.0)):
        report = validate_assumptions(make_kappa_family("example", r, gamma=gamma), grid)
        bands = {col: float(report.per_n[col].max() / report.per_n[col].min()) for col in ("rho_n_scaled", "k_n_scaled", "A_n")}
        passed = report.passes("A1", "A2", "A3", "A4", "A5") and all(b <= 2.0 for b in bands.values())
        checks.append(
            AcceptanceCheck(
                f"kappa-family/r={r:g},gamma={gamma:g}",
                passed,
                {"verdicts": {k: v.passed for k, v in report.verdicts.items()}, "bands": bands},
            )
        )
    return checks


def compactness_checks(seed: int, reps: int, workers: int = 1) -> List[AcceptanceCheck]:
    ball = compactness_demo("l2_ball", rho=0.15, direction_grid=[1, 10, 100], n=100, reps=reps, seed=seed, workers=workers)
    mix = ball.mixture
    last = float(mix["power"].iloc[-1])
    alpha = DEFAULTS["alpha"]
    ball_ok = abs(last - alpha) <= 0.02 and float(mix["power"].iloc[0]) > last
    ellipsoid = compactness_demo("ellipsoid", rho=0.5, direction_grid=[1, 2, 3, 10], n=100, reps=reps, seed=seed, workers=workers)
    return [
        AcceptanceCheck("compactness/l2-ball", ball_ok, {"powers": mix["power"].tolist(), "J": mix["J"].tolist()}),
        AcceptanceCheck(
            "compactness/ellipsoid",
            ellipsoid.minimax_power >= alpha + 0.1,
            {"minimax_power": ellipsoid.minimax_power, **ellipsoid.metadata},
        ),
    ]


def determinism_manifest(seed: int) -> List[ExperimentConfig]:
    return [
        replace(c, name=f"determinism-{c.name}", reps=DEFAULTS["min_reps"], n_grid=c.n_grid[:1])
        for c in acceptance_manifest(seed, DEFAULTS["min_reps"], cvm_draws=20_000)
    ]


def determinism_check(seed: int, workers: int) -> AcceptanceCheck:
    """
    Уменьшенный приёмочный манифест (все четыре статистики, для cvm - 20 000
    розыгрышей калибровки): повтор и 1 воркер против нескольких.
    """
    probe = determinism_manifest(seed)
    first = dumps_json(strip_timing(run_suite(probe, workers=1).bundle))
    second = dumps_json(strip_timing(run_suite(probe, workers=1).bundle))
    parallel = dumps_json(strip_timing(run_suite(probe, workers=max(2, workers)).bundle))
    return AcceptanceCheck(
        "determinism",
        first == second == parallel,
        {"repeat_identical": first == second, "parallel_identical": first == parallel},
    )


def acceptance_checks(
    seed: Optional[int] = None,
    reps: int = 100_000,
    workers: int = 1,
    out: Optional[Path] = None,
) -> SuiteResult:
    """
    Полный приёмочный прогон. Результаты проверок лежат в bundle["acceptance_checks"].
    """
    seed = int(DEFAULTS["seed"] if seed is None else seed)
    checks: List[AcceptanceCheck] = []
    stages: List[Tuple[str, Callable[[], Any]]] = [
        ("identities", lambda: identity_suite(seed)),
        ("interaction", lambda: [interaction_check(seed, reps, workers)]),
        ("bridge", lambda: [bridge_null_check(seed, reps, workers)]),
        ("kappa", kappa_family_checks),
        ("compactness", lambda: compactness_checks(seed, reps, workers)),
        ("determinism", lambda: [determinism_check(seed, workers)]),
    ]
    for name, stage in stages:
        started = time.perf_counter()
        try:
            checks.extend(stage())
        except LabError as exc:
            logger.error("acceptance stage %s failed: %s", name, exc)
            checks.append(AcceptanceCheck(name, False, {"error": str(exc)}))
        logger.info("acceptance stage %s done in %.1fs", name, time.perf_counter() - started)

    suite = run_suite(acceptance_manifest(seed, reps), out=None, workers=workers)
    checks = _experiment_checks(suite) + checks
    suite.bundle["acceptance_checks"] = [c.to_dict() for c in checks]
    suite.bundle["passed"] = all(c.passed for c in checks)
    if out is not None:
        out = Path(out)
        for e in suite.experiments:
            write_result_table(e.to_frame(), out / f"{e.config.name}.csv", quiet=True)
        suite.bundle_path = write_json(suite.bundle, out / "bundle.json")
        save_report(markdown_summary(suite.experiments), "summary", fmt="md", directory=out)
    for c in checks:
        safe_print(f"{'PASS' if c.passed else 'FAIL'} {c.name}")
    return suite


def default_output_dir(name: str) -> Path:
    return RESULTS_DIR / name

# src/config.py
"""
Схема конфигурации экспериментов и единая таблица значений по умолчанию.

Манифест - JSON вида {"schema_version": 1, "experiments": [...]}; каждый элемент
разбирается в ExperimentConfig с проверкой каждого поля (ошибка называет поле).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional

from .errors import ConfigError

SCHEMA_VERSION = 1

# Все фиксированные константы лаборатории. Менять здесь, а не в модулях.
DEFAULTS: Dict[str, Any] = {
    # уровни и Монте-Карло
    "alpha": 0.05,
    "reps": 10_000,
    "min_reps": 1_000,
    "seed": 20_240_601,
    "wilson_z": 1.96,
    "mc_block": 256,
    "workers": 1,
    # пороги «трендов» на нормированной массе n^{2r}·(масса)
    "tau_low": 0.1,
    "tau_zero": 0.01,
    "epsilon_ladder": [0.5, 0.2, 0.1, 0.05],
    "burn_in": 1,
    # квадратуры и усечения
    "quadrature_nodes": 4096,
    "truncation_tol": 1e-8,
    "max_truncation": 32_768,
    "kappa_J_factor": 16,
    "density_grid": 16_384,
    "density_grid_max": 262_144,
    "density_tol": 1e-12,
    "density_min_batch": 256,
    # проверки предположений A1–A6
    "band_factor": 2.0,
    "a4_deltas": [1, 3, 7, 15],
    "a5_cs": [2, 4],
    "a6_cs": [0.25, 0.5, 0.75],
    # ядра
    "kernel": "epanechnikov",
    "kernel_band_level": 0.1,
    "kernel_warn_noncentrality": 10.0,
    # хи-квадрат
    "chi2_min_cells": 8,
    "chi2_min_n2_over_m": 100.0,
    "chi2_tail_constant": 50.0,
    # Крамер – фон Мизес
    "cvm_J": 1024,
    "cvm_draws": 1_000_000,
    "cvm_block": 1000,
    "bridge_tail_max": 1e-4,
}

STATISTICS = ("quadratic", "kernel", "chi2", "cvm")


@dataclass
class ExperimentConfig:
    """
    Один эксперимент: какой тест, на каких альтернативах и с какими n.

    alternatives - список словарей:
      {"preset": "all-low", ...параметры пресета} - семейство из families.py;
      {"noncentrality": 1.0} - θ масштабируется под заданный аргумент Φ;
      {"null": true} - вырожденная альтернатива, совпадающая с нулевой.
    """

    name: str
    statistic: str
    n_grid: List[int]
    statistic_params: Dict[str, Any] = field(default_factory=dict)
    alternatives: List[Dict[str, Any]] = field(default_factory=list)
    reps: int = DEFAULTS["reps"]
    alpha: float = DEFAULTS["alpha"]
    seed: int = DEFAULTS["seed"]
    output: Optional[str] = None
    acceptance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.name, str) or not self.name.strip():
            raise ConfigError("name", "ожидается непустая строка", self.name)
        if self.statistic not in STATISTICS:
            raise ConfigError("statistic", f"допустимо одно из {STATISTICS}", self.statistic)
        if not isinstance(self.n_grid, list) or not self.n_grid:
            raise ConfigError("n_grid", "ожидается непустой список", self.n_grid)
        for n in self.n_grid:
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise ConfigError("n_grid", f"n должен быть целым >= 1, получено {n!r}", self.n_grid)
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid", "n должны строго возрастать", self.n_grid)
        if isinstance(self.reps, bool) or not isinstance(self.reps, int) or self.reps < DEFAULTS["min_reps"]:
            raise ConfigError("reps", f"ожидается целое >= {DEFAULTS['min_reps']}", self.reps)
        if isinstance(self.alpha, bool) or not isinstance(self.alpha, (int, float)) or not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha", "ожидается число в (0, 1)", self.alpha)
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "ожидается целое в [0, 2^64)", self.seed)
        if self.output is not None and not isinstance(self.output, str):
            raise ConfigError("output", "ожидается путь-строка", self.output)
        if not isinstance(self.statistic_params, dict):
            raise ConfigError("statistic_params", "ожидается объект", self.statistic_params)
        if not isinstance(self.acceptance, dict):
            raise ConfigError("acceptance", "ожидается объект", self.acceptance)
        if not isinstance(self.alternatives, list):
            raise ConfigError("alternatives", "ожидается список", self.alternatives)
        for i, alt in enumerate(self.alternatives):
            _validate_alternative(i, alt)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("experiment", "ожидается объект", data)
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "неизвестное поле")
        for required in ("name", "statistic", "n_grid"):
            if required not in data:
                raise ConfigError(required, "обязательное поле отсутствует")
        payload = {k: _copy_json(v) for k, v in data.items()}
        return cls(**payload)


def _validate_alternative(i: int, alt: Any) -> None:
    where = f"alternatives[{i}]"
    if not isinstance(alt, dict):
        raise ConfigError(where, "ожидается объект", alt)
    kinds = [k for k in ("preset", "noncentrality", "null") if k in alt]
    if len(kinds) != 1:
        raise ConfigError(where, "нужен ровно один из ключей preset / noncentrality / null", alt)
    if "preset" in alt:
        from .families import PRESETS  # локальный импорт: families зависит от config

        if alt["preset"] not in PRESETS:
            raise ConfigError(f"{where}.preset", f"неизвестный пресет, допустимо {sorted(PRESETS)}", alt["preset"])
    if "noncentrality" in alt:
        value = alt["noncentrality"]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
            raise ConfigError(f"{where}.noncentrality", "ожидается неотрицательное число", value)


def _copy_json(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _copy_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_copy_json(v) for v in value]
    return value


def parse_manifest(document: Mapping[str, Any]) -> List[ExperimentConfig]:
    """
    Разбор манифеста с проверкой версии схемы.
    """
    if not isinstance(document, Mapping):
        raise ConfigError("manifest", "ожидается JSON-объект")
    version = document.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"ожидается {SCHEMA_VERSION}", version)
    experiments = document.get("experiments")
    if not isinstance(experiments, list) or not experiments:
        raise ConfigError("experiments", "ожидается непустой список")
    configs = []
    for i, item in enumerate(experiments):
        try:
            configs.append(ExperimentConfig.from_dict(item))
        except ConfigError as exc:
            raise ConfigError(f"experiments[{i}].{exc.field}", exc.message, exc.value) from exc
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError("experiments", "имена экспериментов должны быть уникальны")
    return configs


def manifest_document(configs: List[ExperimentConfig]) -> Dict[str, Any]:
    return {"schema_version": SCHEMA_VERSION, "experiments": [c.to_dict() for c in configs]}

# src/families.py
"""
Декларативные пресеты последовательностей альтернатив.

Каждый пресет - правило n -> θ(n) с нормой ‖θ(n)‖ = amplitude·n^{-r}; форма задаётся
относительно частотного масштаба k_n (scale_rule):
  "n^(2-4r)"      - квадратичные, ядерные и хи-квадрат тесты;
  "n^((1-2r)/2)"  - Крамер – фон Мизес.
"""

from __future__ import annotations

import math
from functools import partial
from typing import Any, Callable, Dict, Mapping

import numpy as np

from .errors import ConfigError, InvalidInputError
from .sequence_model import AlternativeFamily, Basis, CoefficientVector

SCALE_RULES: Dict[str, Callable[[int, float], int]] = {
    "n^(2-4r)": lambda n, r: max(1, int(math.floor(n ** (2.0 - 4.0 * r)))),
    "n^((1-2r)/2)": lambda n, r: max(1, int(math.floor(n ** ((1.0 - 2.0 * r) / 2.0)))),
}

STATISTIC_SCALE = {"quadratic": "n^(2-4r)", "kernel": "n^(2-4r)", "chi2": "n^(2-4r)", "cvm": "n^((1-2r)/2)"}
STATISTIC_BASIS = {"quadratic": Basis.GENERIC, "kernel": Basis.TRIG_COMPLEX, "chi2": Basis.TRIG_COMPLEX, "cvm": Basis.COSINE_HALF}


def frequency_scale(n: int, r: float, rule: str) -> int:
    if rule not in SCALE_RULES:
        raise InvalidInputError(f"Неизвестное правило масштаба: {rule}")
    return SCALE_RULES[rule](n, r)


def _vector(basis: Basis, indices: np.ndarray, weights: np.ndarray, norm: float) -> CoefficientVector:
    """Коэффициенты пропорциональны weights и нормированы на ‖θ‖ = norm."""
    indices = np.asarray(indices, dtype=np.int64)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(indices)
    indices, weights = indices[order], weights[order]
    mult = 2.0 if basis is Basis.TRIG_COMPLEX else 1.0
    total = mult * float(np.sum(weights**2))
    values = weights * (norm / math.sqrt(total)) if total > 0 else weights
    return CoefficientVector(basis=basis, indices=indices, values=values, max_index=int(indices.max()) if indices.size else 0)


def _escape_index(n: int, scale: int, factor: float, power: float | None) -> int:
    if power is not None:
        return int(math.ceil(n**power))
    return int(math.ceil(factor * scale))


def _all_low(n, scale, norm, basis, low_index=1, **_):
    return _vector(basis, np.array([low_index]), np.array([1.0]), norm)


def _escaping(n, scale, norm, basis, escape_factor=10.0, escape_power=None, **_):
    return _vector(basis, np.array([_escape_index(n, scale, escape_factor, escape_power)]), np.array([1.0]), norm)


def _boundary(n, scale, norm, basis, position=0.5, **_):
    return _vector(basis, np.array([max(1, int(math.floor(position * scale)))]), np.array([1.0]), norm)


def _mixed(n, scale, norm, basis, low_fraction=0.7, low_index=1, escape_factor=10.0, escape_power=None, **_):
    if not 0.0 < low_fraction < 1.0:
        raise InvalidInputError(f"low_fraction должен лежать в (0, 1): {low_fraction}")
    high = _escape_index(n, scale, escape_factor, escape_power)
    if high <= low_index:
        raise InvalidInputError("уходящая компонента должна лежать выше низкочастотной")
    return _vector(
        basis,
        np.array([low_index, high]),
        np.array([math.sqrt(low_fraction), math.sqrt(1.0 - low_fraction)]),
        norm,
    )


def _power_law(n, scale, norm, basis, s=1.0, support_factor=4.0, **_):
    support = max(1, int(math.ceil(support_factor * scale)))
    j = np.arange(1, support + 1, dtype=float)
    return _vector(basis, j.astype(np.int64), j ** (-(s + 0.5)), norm)


def _shrinking_smooth(n, scale, norm, basis, width=0.25, **_):
    support = max(1, int(math.ceil(width * scale)))
    j = np.arange(1, support + 1)
    return _vector(basis, j, np.ones(support), norm)


PRESETS: Dict[str, Callable[..., CoefficientVector]] = {
    "all-low": _all_low,
    "escaping": _escaping,
    "boundary": _boundary,
    "mixed": _mixed,
    "power-law": _power_law,
    "shrinking-smooth": _shrinking_smooth,
}


def preset_theta(
    n: int,
    *,
    preset: str,
    r: float,
    basis: Basis,
    amplitude: float = 1.0,
    scale_rule: str = "n^(2-4r)",
    **params: Any,
) -> CoefficientVector:
    """θ(n) для пресета; сериализуется через functools.partial."""
    if preset not in PRESETS:
        raise InvalidInputError(f"Неизвестный пресет: {preset}")
    scale = frequency_scale(n, r, scale_rule)
    return PRESETS[preset](n, scale, amplitude * n**-r, basis, **params)


def make_family(
    preset: str,
    r: float,
    basis: Basis | str = Basis.GENERIC,
    amplitude: float = 1.0,
    scale_rule: str = "n^(2-4r)",
    **params: Any,
) -> AlternativeFamily:
    """
    Семейство альтернатив по имени пресета.
    """
    basis = Basis.parse(basis)
    if preset not in PRESETS:
        raise InvalidInputError(f"Неизвестный пресет: {preset}")
    if scale_rule not in SCALE_RULES:
        raise InvalidInputError(f"Неизвестное правило масштаба: {scale_rule}")
    generator = partial(preset_theta, preset=preset, r=r, basis=basis, amplitude=amplitude, scale_rule=scale_rule, **params)
    return AlternativeFamily(
        name=preset,
        r=r,
        generator=generator,
        bounds=(0.5 * amplitude, 2.0 * amplitude),
        basis=basis,
        metadata={"preset": preset, "amplitude": amplitude, "scale_rule": scale_rule, **params},
    )


def family_from_config(spec: Mapping[str, Any], statistic: str, r: float) -> AlternativeFamily:
    """
    Семейство из элемента alternatives: {"preset": ..., параметры}. Базис и масштаб
    по умолчанию определяются статистикой.
    """
    params = dict(spec)
    preset = params.pop("preset")
    basis = params.pop("basis", STATISTIC_BASIS[statistic])
    scale_rule = params.pop("scale_rule", STATISTIC_SCALE[statistic])
    amplitude = params.pop("amplitude", 1.0)
    r = params.pop("r", r)
    try:
        return make_family(preset, r, basis=basis, amplitude=amplitude, scale_rule=scale_rule, **params)
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(f"alternatives.{preset}", str(exc), dict(spec)) from exc

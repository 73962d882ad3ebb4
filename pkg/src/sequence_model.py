# src/sequence_model.py
"""
Модель данных: сигналы и плотности на (0, 1) в виде коэффициентов Фурье.

- CoefficientVector - конечный набор коэффициентов θ_j с тегом базиса;
- выборки в гауссовской последовательной модели y_j = θ_j + (σ/√n) ξ_j;
- i.i.d. выборки из плотности 1 + f (метод отбора);
- Φ, x_α, норма Парсеваля, вычисление f на сетке.

Для TrigComplex хранится только половина j >= 1, коэффициенты j <= -1 задаются
сопряжением, θ_0 = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import optimize, special

from .config import DEFAULTS
from .errors import InvalidInputError
from .rng import as_generator

SQRT2 = math.sqrt(2.0)
_EVAL_CHUNK = 1 << 21


class Basis(str, Enum):
    TRIG_COMPLEX = "trig"
    COSINE_HALF = "cosine"
    GENERIC = "generic"

    @classmethod
    def parse(cls, value: Union["Basis", str]) -> "Basis":
        if isinstance(value, Basis):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as exc:
            raise InvalidInputError(f"Неизвестный базис: {value}") from exc


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CoefficientVector:
    """
    Коэффициенты θ_j с конечным носителем.

    indices - возрастающие индексы j >= 1 (только ненулевые значения),
    values - вещественные (CosineHalf, Generic) или комплексные (TrigComplex),
    max_index - граница, за которой все коэффициенты равны нулю.
    """

    basis: Basis
    indices: np.ndarray
    values: np.ndarray
    max_index: int

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        dtype = complex if self.basis is Basis.TRIG_COMPLEX else float
        val = np.asarray(self.values, dtype=dtype)
        if idx.shape != val.shape or idx.ndim != 1:
            raise InvalidInputError("indices и values должны быть одномерными и одной длины")
        if idx.size and (idx[0] < 1 or np.any(np.diff(idx) <= 0)):
            raise InvalidInputError("indices должны строго возрастать и начинаться с j >= 1")
        if idx.size and int(idx[-1]) > self.max_index:
            raise InvalidInputError(f"max_index={self.max_index} меньше носителя {int(idx[-1])}")
        object.__setattr__(self, "indices", _frozen(idx.copy()))
        object.__setattr__(self, "values", _frozen(val.copy()))
        object.__setattr__(self, "max_index", int(self.max_index))

    # --- конструкторы ---
    @classmethod
    def from_mapping(
        cls,
        basis: Union[Basis, str],
        entries: Mapping[int, complex],
        max_index: Optional[int] = None,
    ) -> "CoefficientVector":
        """
        Словарь индекс -> коэффициент. Для TrigComplex допускаются отрицательные индексы,
        если пара (j, -j) согласована по сопряжению.
        """
        basis = Basis.parse(basis)
        half: Dict[int, complex] = {}
        for raw_j, raw_v in entries.items():
            j = int(raw_j)
            v = complex(raw_v) if basis is Basis.TRIG_COMPLEX else float(np.real(raw_v))
            if basis is not Basis.TRIG_COMPLEX and isinstance(raw_v, complex) and raw_v.imag != 0:
                raise InvalidInputError(f"Базис {basis.value} требует вещественных коэффициентов (j={j})")
            if j == 0:
                if v != 0:
                    raise InvalidInputError("θ_0 должен быть равен 0")
                continue
            if j < 0:
                if basis is not Basis.TRIG_COMPLEX:
                    raise InvalidInputError(f"Отрицательный индекс {j} допустим только для trig")
                j, v = -j, complex(v).conjugate()
            if j in half and not np.isclose(half[j], v, rtol=0.0, atol=1e-15):
                raise InvalidInputError(f"θ_{{-{j}}} не сопряжён с θ_{j}")
            half[j] = v

        nonzero = sorted(j for j, v in half.items() if v != 0)
        top = nonzero[-1] if nonzero else 0
        return cls(
            basis=basis,
            indices=np.array(nonzero, dtype=np.int64),
            values=np.array([half[j] for j in nonzero]),
            max_index=top if max_index is None else max(int(max_index), top),
        )

    @classmethod
    def from_dense(cls, basis: Union[Basis, str], coefficients: Sequence[complex]) -> "CoefficientVector":
        """coefficients[k] - коэффициент с индексом j = k + 1."""
        basis = Basis.parse(basis)
        arr = np.asarray(coefficients, dtype=complex if basis is Basis.TRIG_COMPLEX else float)
        mask = arr != 0
        return cls(
            basis=basis,
            indices=np.nonzero(mask)[0] + 1,
            values=arr[mask],
            max_index=int(arr.size),
        )

    @classmethod
    def zeros(cls, basis: Union[Basis, str], max_index: int = 0) -> "CoefficientVector":
        basis = Basis.parse(basis)
        return cls(basis=basis, indices=np.empty(0, dtype=np.int64), values=np.empty(0), max_index=max_index)

    # --- свойства ---
    @property
    def support_max(self) -> int:
        return int(self.indices[-1]) if self.indices.size else 0

    @property
    def is_zero(self) -> bool:
        return self.indices.size == 0

    @property
    def multiplicity(self) -> int:
        """Сколько раз |θ_j|² входит в норму: пара ±j для trig."""
        return 2 if self.basis is Basis.TRIG_COMPLEX else 1

    def squared_moduli(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def squared_norm(self) -> float:
        """Σ_j |θ_j|² по всем индексам (для trig - по j ∈ ℤ)."""
        return self.multiplicity * math.fsum(self.squared_moduli().tolist())

    def to_dense(self, J: int) -> np.ndarray:
        """Плотный массив длины J, позиция k отвечает индексу j = k + 1."""
        if J < self.support_max:
            raise InvalidInputError(f"J={J} меньше носителя θ ({self.support_max})")
        dense = np.zeros(J, dtype=complex if self.basis is Basis.TRIG_COMPLEX else float)
        dense[self.indices - 1] = self.values
        return dense

    def coefficient(self, j: int) -> complex:
        if self.basis is Basis.TRIG_COMPLEX and j < 0:
            return complex(self.coefficient(-j)).conjugate()
        if j == 0:
            return 0.0
        pos = np.searchsorted(self.indices, j)
        if pos < self.indices.size and self.indices[pos] == j:
            return self.values[pos]
        return 0.0

    # --- операции ---
    def scale(self, t: float) -> "CoefficientVector":
        return CoefficientVector(self.basis, self.indices, self.values * t, self.max_index)

    def __add__(self, other: "CoefficientVector") -> "CoefficientVector":
        if not isinstance(other, CoefficientVector):
            return NotImplemented
        if other.basis is not self.basis:
            raise InvalidInputError(f"Разные базисы: {self.basis.value} и {other.basis.value}")
        J = max(self.max_index, other.max_index, 1)
        total = self.to_dense(J) + other.to_dense(J)
        out = CoefficientVector.from_dense(self.basis, total)
        return CoefficientVector(out.basis, out.indices, out.values, J)

    def restrict(self, lo: int = 1, hi: Optional[int] = None) -> "CoefficientVector":
        """Оставляет коэффициенты с lo <= |j| < hi (hi=None - без верхней границы)."""
        mask = self.indices >= lo
        if hi is not None:
            mask &= self.indices < hi
        return CoefficientVector(self.basis, self.indices[mask], self.values[mask], self.max_index)

    def with_values(self, values: np.ndarray) -> "CoefficientVector":
        return CoefficientVector(self.basis, self.indices, values, self.max_index)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"j": self.indices, "theta": self.values})

    def __repr__(self) -> str:
        return (
            f"CoefficientVector(basis={self.basis.value}, nnz={self.indices.size}, "
            f"max_index={self.max_index}, norm={math.sqrt(self.squared_norm()):.4g})"
        )


@dataclass(frozen=True)
class SequenceObservation:
    """
    Наблюдение y_j = θ_j + (σ/√n) ξ_j.

    Для trig массив y хранит индексы 0..J (y_0 вещественный, y_{-j} = conj(y_j)),
    для остальных базисов - индексы 1..J.
    """

    y: np.ndarray
    basis: Basis
    n: int
    sigma: float
    J: int

    @property
    def index(self) -> np.ndarray:
        start = 0 if self.basis is Basis.TRIG_COMPLEX else 1
        return np.arange(start, self.J + 1)

    @property
    def two_sided(self) -> bool:
        return self.basis is Basis.TRIG_COMPLEX


@dataclass(frozen=True)
class AlternativeFamily:
    """
    Последовательность альтернатив n -> θ(n) со скоростью r и заявленными границами нормы.
    generator должен быть сериализуемым (функция модуля или functools.partial).
    """

    name: str
    r: float
    generator: object
    bounds: tuple = (0.0, math.inf)
    basis: Basis = Basis.GENERIC
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 < self.r < 0.5:
            raise InvalidInputError(f"r должен лежать в (0, 1/2): {self.r}")

    def __call__(self, n: int) -> CoefficientVector:
        return self.generator(n)

    def check_bounds(self, n_grid: Iterable[int]) -> pd.DataFrame:
        """
        Таблица n, ‖θ(n)‖·n^r и признак попадания в [c, C].
        """
        c_lo, c_hi = self.bounds
        rows = []
        for n in n_grid:
            scaled = parseval_norm(self(n)) * n**self.r
            rows.append({"n": n, "scaled_norm": scaled, "within_bounds": bool(c_lo <= scaled <= c_hi)})
        return pd.DataFrame(rows)


@dataclass(frozen=True)
class DensitySpec:
    """
    Плотность 1 + f. min_density - минимум на сетке, lipschitz_slack - поправка
    на расстояние до ближайшего узла, sup_bound - оценка sup|f| через Σ|θ_j|.
    certified_lower_bound - лучшая из двух гарантированных нижних оценок 1 + f:
    min_density - slack и 1 - sup_bound.
    """

    theta: CoefficientVector
    min_density: float
    lipschitz_slack: float
    sup_bound: float
    grid_size: int = 0

    @property
    def certified_lower_bound(self) -> float:
        return max(self.min_density - self.lipschitz_slack, 1.0 - self.sup_bound)


# === Нормальное распределение ===
def std_normal_cdf(x):
    """Φ(x); scipy.special.ndtr даёт относительную точность порядка машинной."""
    return special.ndtr(x)


@lru_cache(maxsize=256)
def normal_quantile(alpha: float) -> float:
    """
    x_α из уравнения α = 1 - Φ(x_α), бисекцией.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha должен лежать в (0, 1): {alpha}")
    return float(optimize.bisect(lambda x: special.ndtr(-x) - alpha, -40.0, 40.0, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500))


def parseval_norm(theta: CoefficientVector) -> float:
    return math.sqrt(theta.squared_norm())


# === Значения на сетке ===
def _evaluate_complex(theta: CoefficientVector, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    out = np.zeros(x.size, dtype=complex)
    if theta.is_zero:
        return out
    j = theta.indices.astype(float)
    step = max(1, _EVAL_CHUNK // max(1, j.size))
    for start in range(0, x.size, step):
        xs = x[start : start + step]
        phase = np.exp(2j * np.pi * np.outer(xs, j))
        out[start : start + step] = phase @ theta.values + np.conj(phase) @ np.conj(theta.values)
    return out


def evaluate(theta: CoefficientVector, x) -> np.ndarray:
    """
    f(x) = Σ θ_j φ_j(x). Для Generic базиса значения не определены.
    """
    x = np.asarray(x, dtype=float)
    if theta.basis is Basis.TRIG_COMPLEX:
        return _evaluate_complex(theta, x).real.reshape(x.shape)
    if theta.basis is Basis.COSINE_HALF:
        flat = x.ravel()
        out = np.zeros(flat.size)
        if not theta.is_zero:
            j = theta.indices.astype(float)
            step = max(1, _EVAL_CHUNK // max(1, j.size))
            for start in range(0, flat.size, step):
                xs = flat[start : start + step]
                out[start : start + step] = SQRT2 * np.cos(np.pi * np.outer(xs, j)) @ theta.values
        return out.reshape(x.shape)
    raise InvalidInputError("Для базиса generic нет функций φ_j на (0, 1)")


def imaginary_residue(theta: CoefficientVector, x) -> float:
    """Максимум |Im Σθ_jφ_j| по сетке (для trig с явной суммой по ±j)."""
    if theta.basis is not Basis.TRIG_COMPLEX:
        return 0.0
    values = _evaluate_complex(theta, np.asarray(x, dtype=float))
    return float(np.max(np.abs(values.imag))) if values.size else 0.0


def _lipschitz_constant(theta: CoefficientVector) -> float:
    j = theta.indices.astype(float)
    a = np.abs(theta.values)
    if theta.basis is Basis.TRIG_COMPLEX:
        return float(2.0 * np.sum(2.0 * np.pi * j * a))
    return float(SQRT2 * np.sum(np.pi * j * a))


def _sup_bound(theta: CoefficientVector) -> float:
    a = float(np.sum(np.abs(theta.values)))
    return 2.0 * a if theta.basis is Basis.TRIG_COMPLEX else SQRT2 * a


def make_density(theta: CoefficientVector, grid_size: Optional[int] = None, tol: Optional[float] = None) -> DensitySpec:
    """
    Проверка, что 1 + f - плотность: минимум на сетке из grid_size средних точек
    минус липшицева поправка L·h/2 (или 1 - Σ|θ|, если она лучше) не ниже -tol.
    Пока гарантии нет, сетка мельчится вчетверо до DEFAULTS["density_grid_max"].
    """
    if theta.basis is Basis.GENERIC:
        raise InvalidInputError("Плотность задаётся только в базисах trig или cosine")
    tol = float(DEFAULTS["density_tol"] if tol is None else tol)
    grid_size = int(grid_size or DEFAULTS["density_grid"])
    grid_cap = max(grid_size, int(DEFAULTS["density_grid_max"]))
    lipschitz = _lipschitz_constant(theta)
    sup_bound = _sup_bound(theta)
    while True:
        grid = (np.arange(grid_size) + 0.5) / grid_size
        values = 1.0 + evaluate(theta, grid)
        grid_min = float(values.min()) if values.size else 1.0
        if grid_min < -tol:
            raise InvalidInputError(f"1 + f отрицательна на сетке: минимум {grid_min:.3e}")
        spec = DensitySpec(
            theta=theta,
            min_density=grid_min,
            lipschitz_slack=lipschitz * 0.5 / grid_size,
            sup_bound=sup_bound,
            grid_size=grid_size,
        )
        if spec.certified_lower_bound >= -tol:
            return spec
        if grid_size * 4 > grid_cap:
            raise InvalidInputError(
                f"Положительность 1 + f не подтверждена: гарантированный минимум {spec.certified_lower_bound:.3e} "
                f"на сетке {grid_size}"
            )
        grid_size *= 4


def density_tail_check(
    theta: CoefficientVector,
    ladder: Sequence[int],
    grid_size: Optional[int] = None,
) -> pd.DataFrame:
    """
    Положительность 1 + Σ_{|i|>l} θ_iφ_i (хвост) и 1 + Σ_{|i|<l} θ_iφ_i (низкие частоты)
    для каждого l из лестницы. Используется, чтобы отбрасывать недопустимые срезки.
    """
    grid_size = int(grid_size or DEFAULTS["density_grid"])
    grid = (np.arange(grid_size) + 0.5) / grid_size
    rows = []
    for level in ladder:
        tail = theta.restrict(lo=int(level) + 1)
        head = theta.restrict(lo=1, hi=int(level))
        tail_min = float(1.0 + evaluate(tail, grid).min())
        head_min = float(1.0 + evaluate(head, grid).min())
        rows.append(
            {
                "cutoff": int(level),
                "tail_min": tail_min,
                "head_min": head_min,
                "tail_is_density": tail_min >= 0.0,
                "head_is_density": head_min >= 0.0,
            }
        )
    return pd.DataFrame(rows)


# === Выборки ===
def _check_model_args(n: int, sigma: float) -> None:
    if n < 1:
        raise InvalidInputError(f"n должен быть >= 1: {n}")
    if not sigma > 0:
        raise InvalidInputError(f"sigma должна быть положительной: {sigma}")


def draw_sequence_noise(rng: np.random.Generator, J: int, two_sided: bool) -> np.ndarray:
    """
    ξ на индексах наблюдения: для trig - ξ_0 вещественный и ξ_1..ξ_J комплексные
    (Re, Im независимы с дисперсией 1/2), иначе ξ_1..ξ_J.
    """
    if not two_sided:
        return rng.standard_normal(J)
    pair = rng.standard_normal((2, J)) * math.sqrt(0.5)
    noise = np.empty(J + 1, dtype=complex)
    noise[0] = rng.standard_normal()
    noise[1:] = pair[0] + 1j * pair[1]
    return noise


def observation_mean(theta: CoefficientVector, J: int) -> np.ndarray:
    """θ, выровненная по индексам наблюдения (для trig добавляется θ_0 = 0)."""
    dense = theta.to_dense(J)
    if theta.basis is Basis.TRIG_COMPLEX:
        dense = np.concatenate([np.zeros(1, dtype=complex), dense])
    return dense


def sample_sequence_observation(
    theta: CoefficientVector,
    n: int,
    sigma: float,
    J: int,
    seed: Union[int, np.random.Generator],
) -> SequenceObservation:
    """
    y_j = θ_j + (σ/√n) ξ_j; комплексный шум имеет независимые Re/Im с дисперсией 1/2.
    seed - целое (поток "sequence-observation") или готовый генератор репликации.
    """
    _check_model_args(n, sigma)
    if J < theta.support_max:
        raise InvalidInputError(f"J={J} меньше носителя θ ({theta.support_max})")
    rng = as_generator(seed, "sequence-observation")
    two_sided = theta.basis is Basis.TRIG_COMPLEX
    y = observation_mean(theta, J) + (sigma / math.sqrt(n)) * draw_sequence_noise(rng, J, two_sided)
    return SequenceObservation(y=_frozen(y), basis=theta.basis, n=int(n), sigma=float(sigma), J=int(J))


def noiseless_observation(theta: CoefficientVector, n: int, sigma: float, J: int) -> SequenceObservation:
    """Наблюдение с ξ ≡ 0 (детерминированная подстановка y_j = θ_j)."""
    _check_model_args(n, sigma)
    dense = observation_mean(theta, J)
    return SequenceObservation(y=_frozen(dense), basis=theta.basis, n=int(n), sigma=float(sigma), J=int(J))


def sample_density_iid(
    density: DensitySpec,
    n: int,
    seed: Union[int, np.random.Generator],
    batch: Optional[int] = None,
) -> np.ndarray:
    """
    n точек из плотности 1 + f методом отбора с равномерной огибающей 1 + sup|f|.
    Размер партии - остаток, делённый на ожидаемую долю принятия 1/envelope, с запасом.
    """
    if n < 1:
        raise InvalidInputError(f"n должен быть >= 1: {n}")
    tol = float(DEFAULTS["density_tol"])
    if density.certified_lower_bound < -tol:
        raise InvalidInputError(f"Положительность плотности не подтверждена: {density.certified_lower_bound:.3e}")
    rng = as_generator(seed, "density-iid")
    if density.theta.is_zero:
        return rng.random(n)

    batch = int(DEFAULTS["density_min_batch"] if batch is None else batch)
    envelope = 1.0 + density.sup_bound
    accepted: List[np.ndarray] = []
    total = 0
    while total < n:
        size = max(batch, int(math.ceil(1.1 * (n - total) * envelope)))
        x = rng.random(size)
        u = rng.random(size) * envelope
        keep = x[u <= 1.0 + evaluate(density.theta, x)]
        accepted.append(keep)
        total += keep.size
    return np.concatenate(accepted)[:n]


# === Усечение бесконечных сумм ===
@dataclass(frozen=True)
class Truncation:
    """J и доля отброшенной массы относительно оставленной."""

    J: int
    tail_fraction: float
    capped: bool
    rule: str = ""

    def to_dict(self) -> Dict[str, object]:
        return {"J": self.J, "tail_fraction": self.tail_fraction, "capped": self.capped, "rule": self.rule}


def choose_truncation(weight_fn, tol: Optional[float] = None, cap: Optional[int] = None, rule: str = "") -> Truncation:
    """
    Наименьшее J <= cap, при котором Σ_{j>J} w_j <= tol · Σ_{j<=J} w_j.
    Масса за cap оценивается по отрезку (cap, 2cap].
    """
    tol = float(DEFAULTS["truncation_tol"] if tol is None else tol)
    cap = int(DEFAULTS["max_truncation"] if cap is None else cap)
    j = np.arange(1, 2 * cap + 1, dtype=float)
    mass = np.asarray(weight_fn(j), dtype=float)
    if np.any(mass < 0):
        raise InvalidInputError("Веса усечения должны быть неотрицательными")
    retained = np.cumsum(mass)
    total = retained[-1]
    if total == 0:
        return Truncation(J=1, tail_fraction=0.0, capped=False, rule=rule)
    tail = total - retained
    with np.errstate(divide="ignore", invalid="ignore"):
        fraction = np.where(retained > 0, tail / retained, np.inf)
    ok = np.nonzero(fraction[:cap] <= tol)[0]
    if ok.size:
        J = int(ok[0]) + 1
        return Truncation(J=J, tail_fraction=float(fraction[J - 1]), capped=False, rule=rule)
    return Truncation(J=cap, tail_fraction=float(fraction[cap - 1]), capped=True, rule=rule)


# === Случайные многочлены для тождеств ===
def random_trig_polynomial(degree: int, rng: np.random.Generator, scale: float = 1.0) -> CoefficientVector:
    coeffs = scale * (rng.standard_normal(degree) + 1j * rng.standard_normal(degree)) / math.sqrt(2.0)
    return CoefficientVector.from_dense(Basis.TRIG_COMPLEX, coeffs)


def random_cosine_polynomial(degree: int, rng: np.random.Generator, scale: float = 1.0) -> CoefficientVector:
    return CoefficientVector.from_dense(Basis.COSINE_HALF, scale * rng.standard_normal(degree))

# src/io.py
"""
Утилиты ввода-вывода лаборатории:
- чтение/запись таблиц CSV и Parquet;
- стандартные пути results/, results/cache/, reports/;
- JSON-бандлы (с сортировкой ключей для воспроизводимости) и markdown-отчёты;
- табличные ядра (CSV t,k) и кеш критических значений КфМ (CSV alpha,J,draws,seed,x_alpha);
- безопасный вывод в консоль (без падения на UnicodeEncodeError).
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path
from typing import Any, List, Optional, Union

import numpy as np
import pandas as pd

from .config import ExperimentConfig, parse_manifest
from .errors import ConfigError, InvalidInputError

# === Базовые пути ===
BASE_DIR = Path(__file__).resolve().parents[1]
RESULTS_DIR = BASE_DIR / "results"
CACHE_DIR = RESULTS_DIR / "cache"
REPORTS_DIR = BASE_DIR / "reports"

CVM_CACHE_PATH = CACHE_DIR / "cvm_critical_values.csv"
CVM_CACHE_COLUMNS = ["alpha", "J", "draws", "seed", "x_alpha"]
KERNEL_COLUMNS = ["t", "k"]

PathLike = Union[str, Path]


def safe_print(msg: str) -> None:
    """
    Печать с заменой некодируемых символов, чтобы не падать на Windows-консолях.
    """
    try:
        print(msg)
    except UnicodeEncodeError:
        enc = sys.stdout.encoding or "utf-8"
        print(msg.encode(enc, errors="replace").decode(enc, errors="replace"))


def read_table(path: PathLike, **kwargs) -> pd.DataFrame:
    """
    Чтение таблицы (.csv, .parquet).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Файл не найден: {path}")

    suffix = path.suffix.lower()
    if suffix == ".csv":
        return pd.read_csv(path, **kwargs)
    if suffix == ".parquet":
        return pd.read_parquet(path, **kwargs)
    raise ValueError(f"Неподдерживаемое расширение файла: {suffix}")


def write_table(df: pd.DataFrame, path: PathLike, index: bool = False, quiet: bool = False, **kwargs) -> Path:
    """
    Запись датафрейма в .csv или .parquet.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    suffix = path.suffix.lower()
    if suffix == ".csv":
        df.to_csv(path, index=index, lineterminator="\n", **kwargs)
    elif suffix == ".parquet":
        df.to_parquet(path, index=index, **kwargs)
    else:
        raise ValueError(f"Неподдерживаемое расширение: {suffix}")

    if not quiet:
        safe_print(f"OK. Saved: {path}")
    return path


def write_result_table(df: pd.DataFrame, path: PathLike, quiet: bool = False) -> List[Path]:
    """
    CSV (контракт) плюс Parquet-копия рядом.
    """
    path = Path(path).with_suffix(".csv")
    return [write_table(df, path, quiet=quiet), write_table(df, path.with_suffix(".parquet"), quiet=quiet)]


def _json_default(obj: Any) -> Any:
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return obj.as_posix()
    if isinstance(obj, pd.DataFrame):
        return obj.to_dict(orient="records")
    raise TypeError(f"Объект типа {type(obj).__name__} не сериализуется в JSON")


def _finite(obj: Any) -> Any:
    """NaN/inf -> None, иначе JSON невалиден."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def dumps_json(obj: Any) -> str:
    normalized = json.loads(json.dumps(obj, default=_json_default))
    return json.dumps(_finite(normalized), ensure_ascii=False, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj: Any, path: PathLike, quiet: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_json(obj))
    if not quiet:
        safe_print(f"OK. Saved: {path}")
    return path


def read_json(path: PathLike) -> Any:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Файл не найден: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError("manifest", f"некорректный JSON в {path}: {exc}") from exc


def save_report(obj, name: str, fmt: str = "json", directory: Optional[PathLike] = None) -> Path:
    """
    Сохраняет отчёт (json или md) в reports/ (или в directory).
    """
    directory = Path(directory) if directory is not None else REPORTS_DIR
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}.{fmt}"

    if fmt == "json":
        write_json(obj, path, quiet=True)
    elif fmt == "md":
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(str(obj))
    else:
        raise ValueError("Допустимые форматы: json или md")

    safe_print(f"OK - report saved: {path}")
    return path


def load_manifest(path: PathLike) -> List[ExperimentConfig]:
    """Манифест экспериментов из JSON-файла."""
    return parse_manifest(read_json(path))


# === Табличные ядра ===
def read_kernel_table(path: PathLike, name: Optional[str] = None):
    """
    CSV со столбцами t,k; t строго возрастают на [-1, 1].
    """
    from .kernel_tests import Kernel

    df = read_table(path)
    missing = [c for c in KERNEL_COLUMNS if c not in df.columns]
    if missing:
        raise InvalidInputError(f"{path}: нет столбцов {missing}")
    return Kernel.tabulated(df["t"].to_numpy(), df["k"].to_numpy(), name=name or Path(path).stem)


# === Кеш критических значений КфМ ===
def _read_cvm_cache(path: PathLike) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        return pd.DataFrame(columns=CVM_CACHE_COLUMNS)
    df = read_table(path)
    if list(df.columns) != CVM_CACHE_COLUMNS:
        raise InvalidInputError(f"{path}: ожидаются столбцы {CVM_CACHE_COLUMNS}, найдены {list(df.columns)}")
    return df


def lookup_cvm_cache(path: PathLike, alpha: float, J: int, draws: int, seed: int) -> Optional[float]:
    df = _read_cvm_cache(path)
    if df.empty:
        return None
    hit = df[
        np.isclose(df["alpha"].astype(float), alpha, rtol=0, atol=1e-12)
        & (df["J"].astype(int) == J)
        & (df["draws"].astype(int) == draws)
        & (df["seed"].astype(str) == str(seed))
    ]
    return None if hit.empty else float(hit["x_alpha"].iloc[-1])


def append_cvm_cache(path: PathLike, alpha: float, J: int, draws: int, seed: int, x_alpha: float) -> Path:
    df = _read_cvm_cache(path)
    row = pd.DataFrame([{"alpha": alpha, "J": J, "draws": draws, "seed": str(seed), "x_alpha": repr(float(x_alpha))}])
    df = row if df.empty else pd.concat([df.astype(str), row.astype(str)], ignore_index=True)
    return write_table(df, path, quiet=True)

from __future__ import annotations

import json
import math

import numpy as np
import pandas as pd
import pytest

from src.config import SCHEMA_VERSION
from src.errors import ConfigError, InvalidInputError
from src.io import (
    append_cvm_cache,
    dumps_json,
    load_manifest,
    lookup_cvm_cache,
    read_json,
    read_kernel_table,
    read_table,
    save_report,
    write_json,
    write_result_table,
)


def test_json_is_sorted_and_finite():
    text = dumps_json({"b": float("nan"), "a": np.float64(1.5), "c": [np.int64(2), math.inf]})
    assert json.loads(text) == {"a": 1.5, "b": None, "c": [2, None]}
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')


def test_json_rejects_unknown_objects():
    with pytest.raises(TypeError):
        dumps_json({"x": object()})


def test_bad_json_is_config_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_json(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_json(tmp_path / "absent.json")


def test_result_table_writes_csv_and_parquet(tmp_path):
    df = pd.DataFrame({"experiment": ["a", "a"], "n": [10, 20], "beta_hat": [0.5, np.nan]})
    paths = write_result_table(df, tmp_path / "out" / "a.csv", quiet=True)
    assert [p.suffix for p in paths] == [".csv", ".parquet"]
    pd.testing.assert_frame_equal(read_table(paths[1]), df)
    assert read_table(paths[0])["n"].tolist() == [10, 20]


def test_unsupported_extension(tmp_path):
    path = tmp_path / "x.xlsx"
    path.write_bytes(b"")
    with pytest.raises(ValueError):
        read_table(path)


def test_save_report(tmp_path, capsys):
    path = save_report("# отчёт\n", "summary", fmt="md", directory=tmp_path)
    assert path.read_text(encoding="utf-8") == "# отчёт\n"
    assert "OK" in capsys.readouterr().out
    with pytest.raises(ValueError):
        save_report({}, "bad", fmt="xml", directory=tmp_path)


def test_load_manifest(tmp_path):
    path = tmp_path / "manifest.json"
    doc = {"schema_version": SCHEMA_VERSION, "experiments": [{"name": "c", "statistic": "chi2", "n_grid": [100], "reps": 1000}]}
    write_json(doc, path, quiet=True)
    (config,) = load_manifest(path)
    assert config.name == "c" and config.reps == 1000


def test_cvm_cache(tmp_path):
    path = tmp_path / "cache.csv"
    assert lookup_cvm_cache(path, 0.05, 1024, 100, 1) is None
    append_cvm_cache(path, 0.05, 1024, 100, 1, 0.4613)
    append_cvm_cache(path, 0.01, 1024, 100, 1, 0.7434)
    assert lookup_cvm_cache(path, 0.05, 1024, 100, 1) == 0.4613
    assert lookup_cvm_cache(path, 0.05, 1024, 200, 1) is None
    assert read_table(path).columns.tolist() == ["alpha", "J", "draws", "seed", "x_alpha"]


def test_cvm_cache_bad_columns(tmp_path):
    path = tmp_path / "cache.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(InvalidInputError):
        lookup_cvm_cache(path, 0.05, 1024, 100, 1)


def test_kernel_table(tmp_path):
    t = np.linspace(-1.0, 1.0, 201)
    path = tmp_path / "triangle.csv"
    pd.DataFrame({"t": t, "k": 1.0 - np.abs(t)}).to_csv(path, index=False)
    kernel = read_kernel_table(path)
    assert kernel.name == "triangle"
    np.testing.assert_allclose(kernel.knots, t)


def test_kernel_table_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    pd.DataFrame({"t": [-1.0, 0.0, 1.0]}).to_csv(path, index=False)
    with pytest.raises(InvalidInputError):
        read_kernel_table(path)

import json
import threading

import numpy as np
import pandas as pd
import pytest

from src.core.config import WORKERS_ENV
from src.core.models import ReportRow
from src.utils.file_utils import (
    emit_report,
    emit_table,
    format_float,
    parse_config_file,
    parse_value,
    read_jsonl,
    to_json_line,
    write_manifest,
)
from src.utils.helpers import aux_stream, derived_seed, resolve_workers, seed_streams, setup_directories, stream
from src.utils.parallel import run_ordered


# 随机流

def test_stream_is_reproducible():
    assert np.array_equal(stream(42, 3).random(5), stream(42, 3).random(5))
    assert not np.array_equal(stream(42, 3).random(5), stream(42, 4).random(5))
    assert not np.array_equal(stream(42, 3).random(5), aux_stream(42, 3).random(5))


def test_seed_streams():
    streams = seed_streams(7, 3)
    assert len(streams) == 3
    assert np.array_equal(streams[2].random(4), stream(7, 2).random(4))
    with pytest.raises(ValueError):
        seed_streams(7, 0)


def test_derived_seed():
    assert derived_seed(1, 1) == derived_seed(1, 1)
    assert derived_seed(1, 1) != derived_seed(1, 2)
    assert 0 <= derived_seed(2 ** 64 - 1, 3) < 2 ** 64


def test_resolve_workers(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert resolve_workers(None, None) == 4
    assert resolve_workers(None, 3) == 3
    monkeypatch.setenv(WORKERS_ENV, "6")
    assert resolve_workers(None, 3) == 6
    assert resolve_workers(2, 3) == 2
    monkeypatch.setenv(WORKERS_ENV, "many")
    with pytest.raises(ValueError):
        resolve_workers(None)
    with pytest.raises(ValueError):
        resolve_workers(0)


def test_setup_directories(tmp_path):
    target = tmp_path / "a" / "b"
    setup_directories(target)
    assert target.is_dir()


# 并行

def test_run_ordered_keeps_submission_order():
    def slow_square(x):
        threading.Event().wait(0.001 * (5 - x))
        return x * x

    ticks = []
    results = run_ordered(slow_square, list(range(5)), max_workers=3, progress=lambda: ticks.append(1))
    assert results == [0, 1, 4, 9, 16]
    assert len(ticks) == 5


def test_run_ordered_propagates_errors():
    def fail_on_two(x):
        if x == 2:
            raise RuntimeError("boom")
        return x

    with pytest.raises(RuntimeError):
        run_ordered(fail_on_two, list(range(4)), max_workers=2)
    with pytest.raises(RuntimeError):
        run_ordered(fail_on_two, list(range(4)), max_workers=1)


# 报告

def test_float_format_round_trips():
    value = 0.1 + 0.2
    assert float(format_float(value)) == value
    assert format_float(3.0) == "3.0"


def test_json_line_encoding():
    line = to_json_line({"x": np.float64(1.5), "n": np.int64(3), "ok": np.bool_(True), "bad": float("nan"),
                         "grid": np.array([1.0, 2.0]), "name": "体积"})
    data = json.loads(line)
    assert data == {"x": 1.5, "n": 3, "ok": True, "bad": None, "grid": [1.0, 2.0], "name": "体积"}
    with pytest.raises(TypeError):
        to_json_line({"x": object()})


def test_emit_report_jsonl_and_csv(tmp_path):
    rows = [
        ReportRow(experiment="simulate", params={"K": 8}, estimate=1.25, n=3, flags=["ok"]),
        ReportRow(experiment="simulate", params={"K": 8}, estimate=None),
    ]
    path = emit_report(rows, tmp_path / "out" / "report.jsonl")
    back = read_jsonl(path)
    assert back[0]["estimate"] == 1.25
    assert back[1]["estimate"] is None
    assert back[0]["params"] == {"K": 8}

    csv_path = emit_report([{"a": 1.0, "b": 2}], tmp_path / "report.csv", format="csv")
    assert list(pd.read_csv(csv_path).columns) == ["a", "b"]
    empty = emit_report([], tmp_path / "empty.csv", format="csv", columns=["a", "b"])
    assert empty.read_text().strip() == "a,b"
    with pytest.raises(ValueError):
        emit_report([], tmp_path / "report.xml", format="xml")


def test_emit_table_and_manifest(tmp_path):
    path = emit_table({"t": [0.0, 0.5], "normH": [1.0, 0.25]}, tmp_path / "traj.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["t", "normH"]
    assert frame["normH"].tolist() == [1.0, 0.25]

    manifest = write_manifest(tmp_path / "run.manifest.json", {"K": 8}, "0.1.0", 1.5)
    data = json.loads(manifest.read_text())
    assert data == {"version": "0.1.0", "config": {"K": 8}, "wall_time_seconds": 1.5}


# 配置

@pytest.mark.parametrize(
    "key, raw, expected",
    [
        ("K", "16", 16),
        ("record_states", "false", False),
        ("two_sided", "yes", True),
        ("alpha", "1.7", 1.7),
        ("M_grid", "1,2,4", [1.0, 2.0, 4.0]),
        ("functionals", "one, tanh_normH_sq", ["one", "tanh_normH_sq"]),
        ("component", "Y", "Y"),
    ],
)
def test_parse_value(key, raw, expected):
    assert parse_value(key, raw) == expected


def test_parse_value_rejects_bad_booleans():
    with pytest.raises(ValueError):
        parse_value("dump_states", "maybe")
    with pytest.raises(ValueError):
        parse_value("K", "1.5")


def test_parse_config_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# model\nK = 16\nalpha = 1.7  # stability\n\nM_grid = 1,2\nworkers = 2\n", encoding="utf-8")
    assert parse_config_file(path) == {"K": 16, "alpha": 1.7, "M_grid": [1.0, 2.0], "workers": 2}
    assert parse_config_file(None) == {}


@pytest.mark.parametrize("text", ["K 16\n", "K = 16\nK = 8\n", "= 3\n"])
def test_parse_config_file_errors(tmp_path, text):
    path = tmp_path / "bad.conf"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ValueError):
        parse_config_file(path)


def test_parse_config_file_missing(tmp_path):
    with pytest.raises(OSError):
        parse_config_file(tmp_path / "missing.conf")

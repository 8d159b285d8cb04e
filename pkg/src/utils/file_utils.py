from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union
import json
import logging
import math

import numpy as np
import pandas as pd

from .helpers import setup_directories

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

# 配置文件中按类型解析的键
_INT_KEYS = {"K", "record_stride", "seed", "max_halvings", "workers", "n_traj", "horizon_n"}
_BOOL_KEYS = {"record_states", "record_components", "two_sided", "dump_states", "compare_half_noise"}


def format_float(value: float) -> str:
    """17 位有效数字，保证可以精确读回"""
    text = FLOAT_FORMAT % value
    if "." not in text and "e" not in text and "n" not in text:
        text += ".0"
    return text


def _encode(value: Any) -> str:
    if value is None or isinstance(value, (bool, np.bool_)):
        return json.dumps(None if value is None else bool(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return format_float(value) if math.isfinite(value) else "null"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, Mapping):
        items = (f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(v)}" for k, v in value.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in value) + "]"
    if hasattr(value, "model_dump"):
        return _encode(value.model_dump())
    raise TypeError(f"cannot serialize {type(value).__name__} to a report")


def to_json_line(record: Any) -> str:
    """单条记录的 JSON 文本（浮点 17 位有效数字，非有限值写为 null）"""
    return _encode(record)


def emit_report(
    records: Sequence[Any],
    path: Union[str, Path],
    format: str = "jsonl",
    columns: Optional[Sequence[str]] = None,
) -> Path:
    """
    写出报告

    Args:
        records: 记录（dict 或 pydantic 模型）
        path: 输出文件
        format: "jsonl" 或 "csv"
        columns: CSV 列顺序（记录为空时仍写出表头）

    Returns:
        Path: 写出的文件

    Raises:
        ValueError: 未知格式
        OSError: I/O 失败（原样抛出）
    """
    path = Path(path)
    if path.parent != Path(""):
        setup_directories(path.parent)
    rows = [r.model_dump() if hasattr(r, "model_dump") else dict(r) for r in records]
    if format == "jsonl":
        with open(path, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(to_json_line(row) + "\n")
    elif format == "csv":
        frame = pd.DataFrame(rows, columns=list(columns) if columns is not None else None)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    else:
        raise ValueError(f"unknown report format {format!r}; expected 'jsonl' or 'csv'")
    logger.info(f"Wrote {len(rows)} records to {path}")
    return path


def emit_table(columns: Mapping[str, Iterable[Any]], path: Union[str, Path]) -> Path:
    """按给定列顺序写出 CSV（轨迹与生存曲线）"""
    path = Path(path)
    if path.parent != Path(""):
        setup_directories(path.parent)
    frame = pd.DataFrame({name: list(values) for name, values in columns.items()})
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote table with {len(frame)} rows to {path}")
    return path


def read_jsonl(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """读回 JSON-lines 报告"""
    with open(path, "r", encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def write_manifest(path: Union[str, Path], config: Mapping[str, Any], version: str, wall_time: float) -> Path:
    """运行清单: 完整配置、代码版本与耗时"""
    path = Path(path)
    if path.parent != Path(""):
        setup_directories(path.parent)
    manifest = {"version": version, "config": dict(config), "wall_time_seconds": wall_time}
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(to_json_line(manifest) + "\n")
    return path


def parse_value(key: str, raw: str) -> Any:
    """按键的类型解析配置值（布尔、整数、逗号分隔网格、浮点或字符串）"""
    if key in _BOOL_KEYS:
        lowered = raw.lower()
        if lowered not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"{key} must be a boolean, got {raw!r}")
        return lowered in ("true", "1", "yes")
    if key in _INT_KEYS:
        return int(raw)
    if "," in raw:
        items = [item.strip() for item in raw.split(",") if item.strip()]
        try:
            return [float(item) for item in items]
        except ValueError:
            return items
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_config_file(path: Optional[Union[str, Path]]) -> Dict[str, Any]:
    """
    解析 key = value 配置文件（# 开头为注释）

    Raises:
        ValueError: 行格式错误或重复的键
        OSError: 文件无法读取
    """
    if path is None:
        return {}
    values: Dict[str, Any] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{number}: expected 'key = value', got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            if not key or not raw:
                raise ValueError(f"{path}:{number}: empty key or value")
            if key in values:
                raise ValueError(f"{path}:{number}: duplicate key {key!r}")
            values[key] = parse_value(key, raw)
    return values

"""
工具函数模块
包含随机流、并行执行与报告输出等辅助函数
"""

from .helpers import (
    setup_directories,
    stream,
    seed_streams,
    aux_stream,
    derived_seed,
    resolve_workers
)
from .parallel import run_ordered
from .file_utils import emit_report, emit_table, read_jsonl, write_manifest, parse_config_file

__all__ = [
    'setup_directories',
    'stream',
    'seed_streams',
    'aux_stream',
    'derived_seed',
    'resolve_workers',
    'run_ordered',
    'emit_report',
    'emit_table',
    'read_jsonl',
    'write_manifest',
    'parse_config_file'
]

from pathlib import Path
from typing import List, Optional
import logging
import os

import numpy as np

from ..core.config import DEFAULT_WORKERS, WORKERS_ENV

# 配置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# 初值方向等辅助随机量使用的独立流标签
AUX_STREAM_TAG = 0x5EED


def setup_directories(*dirs) -> None:
    """
    创建必要的目录

    Args:
        *dirs: 需要创建的目录路径

    Raises:
        OSError: 当目录创建失败时
    """
    for dir_path in dirs:
        try:
            Path(dir_path).mkdir(parents=True, exist_ok=True)
            logger.info(f"Directory created/verified: {dir_path}")
        except Exception as e:
            logger.error(f"Failed to create directory {dir_path}: {str(e)}")
            raise OSError(f"Failed to create directory {dir_path}: {str(e)}")


def stream(master_seed: int, index: int, tag: Optional[int] = None) -> np.random.Generator:
    """
    计数器型随机流: 由 (master_seed, index) 唯一确定

    Args:
        master_seed: 64 位主种子
        index: 流编号
        tag: 可选标签，用于与轨迹流区分的辅助流
    """
    key = [int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index)]
    if tag is not None:
        key.append(int(tag))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def seed_streams(master_seed: int, n: int) -> List[np.random.Generator]:
    """
    生成 n 个独立随机流，第 i 个由 (master_seed, i) 决定，与调度无关

    Args:
        master_seed: 64 位主种子
        n: 流数量，n >= 1
    """
    if n < 1:
        raise ValueError(f"number of streams must be at least 1, got {n}")
    return [stream(master_seed, i) for i in range(n)]


def aux_stream(master_seed: int, index: int) -> np.random.Generator:
    """初值方向等非轨迹随机量的流"""
    return stream(master_seed, index, tag=AUX_STREAM_TAG)


def derived_seed(master_seed: int, purpose: int) -> int:
    """由主种子派生的独立 64 位种子（长轨迹、水平标定等辅助模拟）"""
    key = [int(master_seed) & 0xFFFFFFFFFFFFFFFF, AUX_STREAM_TAG, int(purpose)]
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0])


def resolve_workers(cli_value: Optional[int], file_value: Optional[int] = None) -> int:
    """
    决定 worker 数: 命令行 > 环境变量 GLSIM_WORKERS > 配置文件 > 默认值

    Raises:
        ValueError: worker 数小于 1 或环境变量无法解析
    """
    if cli_value is not None:
        workers = cli_value
    elif os.environ.get(WORKERS_ENV):
        try:
            workers = int(os.environ[WORKERS_ENV])
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {os.environ[WORKERS_ENV]!r}")
    elif file_value is not None:
        workers = file_value
    else:
        workers = DEFAULT_WORKERS
    if workers < 1:
        raise ValueError(f"worker count must be at least 1, got {workers}")
    return workers

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar
import logging

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def run_ordered(
    func: Callable[[T], R],
    items: Sequence[T],
    max_workers: int = 1,
    progress: Optional[Callable[[], None]] = None,
) -> List[R]:
    """
    并行执行任务，按提交顺序返回结果

    结果顺序只取决于 items 的顺序，与 worker 数和完成顺序无关。

    Args:
        func: 任务函数
        items: 任务参数列表
        max_workers: 线程数
        progress: 每完成一个任务调用一次的回调

    Returns:
        List: 与 items 一一对应的结果
    """
    if max_workers <= 1 or len(items) <= 1:
        results = []
        for item in items:
            results.append(func(item))
            if progress is not None:
                progress()
        return results

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(func, item) for item in items]
        results = []
        for index, future in enumerate(futures):
            try:
                results.append(future.result())
            except Exception as e:
                logger.error(f"Error in task {index}: {str(e)}")
                for pending in futures[index + 1:]:
                    pending.cancel()
                raise
            finally:
                if progress is not None:
                    progress()
        return results

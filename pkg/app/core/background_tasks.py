"""
ToolNet Pipeline Worker Pool
可并行阶段的任务管理（示教生成、评估、规划对比）
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class WorkerPool:
    """任务池：workers <= 1 时在当前进程顺序执行"""

    def __init__(self, workers: int = 1):
        self.workers = max(1, int(workers))

    def map(
        self,
        func: Callable[[T], R],
        items: Iterable[T],
        sort_key: Optional[Callable[[R], object]] = None,
    ) -> List[R]:
        """执行任务并按确定顺序合并结果"""
        items = list(items)
        if self.workers == 1 or len(items) <= 1:
            results = [func(item) for item in items]
        else:
            logger.info(f"启动 {self.workers} 个工作进程处理 {len(items)} 个任务")
            # func 与 items 必须可序列化（模块级函数）
            with ProcessPoolExecutor(max_workers=self.workers) as executor:
                results = list(executor.map(func, items, chunksize=max(1, len(items) // (4 * self.workers))))
        if sort_key is not None:
            results.sort(key=sort_key)
        return results

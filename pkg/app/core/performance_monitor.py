"""
ToolNet Pipeline Performance Monitor
性能监控和统计模块
"""

import time
import logging
import threading
from functools import wraps
from collections import defaultdict
from typing import Any, Callable, Dict

import psutil

logger = logging.getLogger(__name__)


class PerformanceMonitor:
    """性能监控器"""

    def __init__(self):
        self.metrics: Dict[str, list] = defaultdict(list)
        self.error_counts: Dict[str, int] = defaultdict(int)
        self.lock = threading.Lock()
        self._process = psutil.Process()

    def record_operation(self, operation: str, duration: float, success: bool = True) -> None:
        """记录一次操作耗时"""
        with self.lock:
            self.metrics[operation].append(duration)
            if not success:
                self.error_counts[operation] += 1

    def timer(self, operation: str) -> "_Timer":
        """上下文计时器"""
        return _Timer(self, operation)

    def get_operation_stats(self, operation: str) -> Dict[str, Any]:
        """获取单个操作的统计"""
        with self.lock:
            durations = list(self.metrics.get(operation, []))
            errors = self.error_counts.get(operation, 0)
        if not durations:
            return {"count": 0, "total": 0.0, "avg": 0.0, "max": 0.0, "errors": errors}
        return {
            "count": len(durations),
            "total": sum(durations),
            "avg": sum(durations) / len(durations),
            "max": max(durations),
            "errors": errors,
        }

    def get_system_stats(self) -> Dict[str, Any]:
        """获取进程资源统计"""
        try:
            memory = self._process.memory_info()
            return {
                "rss_bytes": memory.rss,
                "cpu_times_user": self._process.cpu_times().user,
                "num_threads": self._process.num_threads(),
            }
        except psutil.Error as e:
            logger.error(f"获取进程统计失败: {e}")
            return {}

    def get_performance_summary(self) -> Dict[str, Any]:
        """获取性能摘要"""
        with self.lock:
            names = sorted(self.metrics)
        return {
            "operations": {name: self.get_operation_stats(name) for name in names},
            "system": self.get_system_stats(),
        }

    def reset(self) -> None:
        with self.lock:
            self.metrics.clear()
            self.error_counts.clear()


class _Timer:
    def __init__(self, monitor: PerformanceMonitor, operation: str):
        self.monitor = monitor
        self.operation = operation
        self.elapsed = 0.0

    def __enter__(self) -> "_Timer":
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.elapsed = time.perf_counter() - self._start
        self.monitor.record_operation(self.operation, self.elapsed, exc_type is None)


# 性能监控装饰器
def monitor_performance(operation_name: str):
    """性能监控装饰器"""
    def decorator(func: Callable):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception:
                performance_monitor.record_operation(
                    operation_name, time.perf_counter() - start_time, False
                )
                raise
            performance_monitor.record_operation(operation_name, time.perf_counter() - start_time)
            return result
        return wrapper
    return decorator


# 全局性能监控器实例
performance_monitor = PerformanceMonitor()

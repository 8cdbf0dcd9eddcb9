"""
缓存管理器
按键缓存模型查询结果，容量有限，最久未使用者先淘汰
"""

import logging
from collections import OrderedDict
from typing import Any, Callable, Dict, Hashable, Optional

logger = logging.getLogger(__name__)


class CacheManager:
    """缓存管理器"""

    def __init__(self, max_entries: int = 4096):
        self.cache: "OrderedDict[Hashable, Any]" = OrderedDict()
        self.max_entries = max_entries
        self.stats = {
            "hits": 0,
            "misses": 0,
            "sets": 0,
            "evictions": 0
        }

    def get(self, key: Hashable) -> Optional[Any]:
        """获取缓存值"""
        if key not in self.cache:
            self.stats["misses"] += 1
            return None
        self.cache.move_to_end(key)
        self.stats["hits"] += 1
        return self.cache[key]

    def set(self, key: Hashable, value: Any) -> None:
        """设置缓存值"""
        self.cache[key] = value
        self.cache.move_to_end(key)
        self.stats["sets"] += 1
        while len(self.cache) > self.max_entries:
            self.cache.popitem(last=False)
            self.stats["evictions"] += 1

    def get_or_set(self, key: Hashable, func: Callable[[], Any]) -> Any:
        """获取缓存值，如果不存在则计算并设置"""
        if key in self.cache:
            return self.get(key)
        self.stats["misses"] += 1
        value = func()
        self.set(key, value)
        return value

    def get_stats(self) -> Dict[str, Any]:
        """获取缓存统计信息"""
        total_requests = self.stats["hits"] + self.stats["misses"]
        hit_rate = (self.stats["hits"] / total_requests * 100) if total_requests > 0 else 0
        return {
            **self.stats,
            "hit_rate": round(hit_rate, 2),
            "cache_size": len(self.cache),
            "total_requests": total_requests
        }

"""
Cache Manager for NODAL LAB
Keeps deterministic numerical tables (quadrature rules, Legendre tables)
so repeated replicates at one degree do not rebuild them
"""

import hashlib
import json
import logging
import threading
from typing import Any, Callable, Dict, Optional

import numpy as np
from cachetools import LRUCache

from core.config_manager import settings

logger = logging.getLogger(__name__)


class CacheManager:
    """
    LRU cache for expensive, deterministic tables
    Features:
    - LRU eviction policy
    - Thread-safe access
    - Read-only numpy payloads
    - Cache hit/miss statistics
    """

    def __init__(self, max_size: int = 64):
        """
        Initialize cache manager

        Args:
            max_size: Maximum number of cached tables
        """
        self.max_size = max_size
        self.cache: LRUCache = LRUCache(maxsize=max_size)
        self._lock = threading.Lock()

        # Statistics
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    def _generate_key(self, namespace: str, params: Dict[str, Any]) -> str:
        """
        Generate cache key from table parameters

        Args:
            namespace: Table family (e.g. "gauss_legendre")
            params: JSON-serializable parameters

        Returns:
            Cache key string
        """
        key_string = json.dumps({"namespace": namespace, "params": params}, sort_keys=True)
        return hashlib.md5(key_string.encode()).hexdigest()

    def get(self, namespace: str, params: Dict[str, Any]) -> Optional[Any]:
        """
        Get a cached table if present

        Args:
            namespace: Table family
            params: Table parameters

        Returns:
            Cached table or None
        """
        key = self._generate_key(namespace, params)
        with self._lock:
            value = self.cache.get(key)
            if value is None:
                self.misses += 1
                logger.debug(f"Cache miss for {namespace}: {key[:8]}...")
                return None
            self.hits += 1
        return value

    def set(self, namespace: str, params: Dict[str, Any], value: Any) -> None:
        """
        Store a table, freezing numpy arrays

        Args:
            namespace: Table family
            params: Table parameters
            value: Array, tuple of arrays, or any immutable object
        """
        key = self._generate_key(namespace, params)
        _freeze(value)
        with self._lock:
            if key not in self.cache and len(self.cache) >= self.max_size:
                self.evictions += 1
            self.cache[key] = value
        logger.debug(f"Cached {namespace} table {params}")

    def get_or_compute(
        self,
        namespace: str,
        params: Dict[str, Any],
        factory: Callable[[], Any]
    ) -> Any:
        """
        Return the cached table, building it with factory on a miss

        Args:
            namespace: Table family
            params: Table parameters
            factory: Zero-argument builder

        Returns:
            The (read-only) table
        """
        value = self.get(namespace, params)
        if value is None:
            value = factory()
            self.set(namespace, params, value)
        return value

    def clear(self) -> None:
        """Clear all cache entries"""
        with self._lock:
            count = len(self.cache)
            self.cache.clear()
        logger.info(f"Cleared {count} cache entries")

    def get_stats(self) -> Dict[str, Any]:
        """
        Get cache statistics

        Returns:
            Dict with cache statistics
        """
        total_requests = self.hits + self.misses
        hit_rate = self.hits / total_requests if total_requests > 0 else 0

        return {
            "size": len(self.cache),
            "max_size": self.max_size,
            "hits": self.hits,
            "misses": self.misses,
            "evictions": self.evictions,
            "hit_rate": hit_rate,
            "total_requests": total_requests,
            "utilization": len(self.cache) / self.max_size if self.max_size > 0 else 0
        }


def _freeze(value: Any) -> None:
    if isinstance(value, np.ndarray):
        value.setflags(write=False)
    elif isinstance(value, (tuple, list)):
        for item in value:
            _freeze(item)


# Global instance
cache_manager = CacheManager(max_size=settings.cache_max_entries)

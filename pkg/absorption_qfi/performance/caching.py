"""
Cache management for absorption-qfi.
This module keeps sweep results in memory, keyed by configuration hash, so figure panels that share a
curve evaluate it once per process.
"""

import logging
from enum import Enum
from typing import Any, Dict, MutableMapping, Optional

from cachetools import LRUCache

from absorption_qfi.error_handling.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class CACHE_TYPE(str, Enum):
    """Cache types supported by the cache manager."""

    LRU = "lru"
    MEMORY = "memory"


# Global cache manager instance
_cache_manager = None


def initialize_cache_manager(config: Dict[str, Any]) -> None:
    """
    Initialize the global cache manager.

    Args:
        config: Mapping with cache_type and cache_max_size

    Raises:
        ConfigurationError: If the cache manager is already initialized
    """
    global _cache_manager
    if _cache_manager is not None:
        raise ConfigurationError("Cache manager is already initialized")

    _cache_manager = CacheManager(config)
    logger.info("Cache manager initialized successfully")


def get_cache_manager() -> "CacheManager":
    """
    Get the global cache manager instance.

    Raises:
        ConfigurationError: If the cache manager is not initialized
    """
    if _cache_manager is None:
        raise ConfigurationError("Cache manager is not initialized")
    return _cache_manager


def get_cache_manager_or_none() -> Optional["CacheManager"]:
    return _cache_manager


def reset_cache_manager() -> None:
    """Clear the global cache manager (for tests and process teardown)."""
    global _cache_manager
    _cache_manager = None


class CacheManager:
    """In-process store of sweep results."""

    def __init__(self, config: Dict[str, Any]):
        self.config = config
        self.cache_type = CACHE_TYPE(config.get("cache_type", CACHE_TYPE.LRU))
        self.max_size = int(config.get("cache_max_size", 64))
        self.hits = 0
        self.misses = 0

        self.sweep_cache: MutableMapping[str, Any]
        if self.cache_type == CACHE_TYPE.LRU:
            self.sweep_cache = LRUCache(maxsize=self.max_size)
        else:
            self.sweep_cache = {}

        logger.info(f"Cache manager initialized with type: {self.cache_type.value}, max size {self.max_size}")

    def get(self, key: str) -> Optional[Any]:
        if key in self.sweep_cache:
            self.hits += 1
            logger.info(f"Cache hit for sweep {key}")
            return self.sweep_cache[key]
        self.misses += 1
        return None

    def put(self, key: str, value: Any) -> None:
        self.sweep_cache[key] = value
        logger.debug(f"Cached sweep {key}")

    def clear_cache(self) -> None:
        cleared = len(self.sweep_cache)
        self.sweep_cache.clear()
        logger.info(f"Cache cleared: {cleared} sweep results dropped")

    def stats(self) -> Dict[str, int]:
        return {"size": len(self.sweep_cache), "hits": self.hits, "misses": self.misses}

import os
import json
import logging
import time
import hashlib
from typing import Any, Optional

from ..core import env_flag, env_int

CACHE_DIR = os.getenv("ADENET_CACHE_DIR", "./cache")
CACHE_DISABLE = env_flag("ADENET_CACHE_DISABLE")
CACHE_TTL = env_int("ADENET_CACHE_TTL", 0)


def ensure_dirs():
    """
    Create the cache directory and its replication sub-directory.
    """
    os.makedirs(os.path.join(CACHE_DIR, "replications"), exist_ok=True)


def cache_key(prefix: str, payload: Any) -> str:
    """
    Stable key for a JSON-able payload: same payload, same key, on every run.
    """
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return f"{prefix}_{hashlib.sha256(blob.encode('utf-8')).hexdigest()[:32]}"


def _path_for(key: str) -> str:
    """
    File path of a key. The key is hashed so that names stay short and safe.
    """
    h = hashlib.md5(key.encode("utf-8")).hexdigest()
    return os.path.join(CACHE_DIR, "replications", f"{h}.json")


def _drop(path: str) -> None:
    try:
        os.remove(path)
    except OSError:
        pass


def _stale(path: str, ttl: Optional[int]) -> bool:
    ttl = CACHE_TTL if ttl is None else ttl
    return ttl > 0 and time.time() - os.path.getmtime(path) > ttl


def get_cache_json(key: str, ttl: Optional[int] = None) -> Optional[Any]:
    """Stored record of a key, or None.

    ttl overrides ADENET_CACHE_TTL for this call; 0 bypasses the cache.
    Expired and unreadable files are removed and count as misses.
    """
    if CACHE_DISABLE or ttl == 0:
        return None
    path = _path_for(key)
    try:
        if _stale(path, ttl):
            _drop(path)
            return None
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        return None
    except (OSError, ValueError):
        logging.warning("dropping unreadable cache record %s", path)
        _drop(path)
        return None


def set_cache_json(key: str, data: Any) -> None:
    """Write a record through a sibling tmp file and os.replace, so readers
    never see a partial file."""
    if CACHE_DISABLE:
        return
    path = _path_for(key)
    tmp = f"{path}.{os.getpid()}.{time.monotonic_ns()}.tmp"
    try:
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(data, f)
        os.replace(tmp, path)
    except OSError as e:
        logging.warning("cache write failed for %s: %s", path, e)
        _drop(tmp)

"""Content-addressed disk cache for provider completions."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from .gateway import GenerationConfig, Generator

DEFAULT_CACHE_DIR = ".k2sql-cache"


def content_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_digest(path: Path) -> str:
    return content_digest(Path(path).read_bytes())


class DiskCache:
    """Maps sha256 keys to small JSON payloads under a cache directory."""

    def __init__(self, root: Path, enabled: bool = True):
        self.root = Path(root)
        self.enabled = enabled

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> str | None:
        if not self.enabled:
            return None
        path = self._path(key)
        try:
            return json.loads(path.read_text(encoding="utf-8"))["value"]
        except (OSError, ValueError, KeyError):
            return None

    def put(self, key: str, value: str) -> None:
        if not self.enabled:
            return
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp-{os.getpid()}")
        tmp.write_text(json.dumps({"value": value}), encoding="utf-8")
        os.replace(tmp, path)


class CachedGenerator:
    """Wraps a provider with prompt-keyed completion caching."""

    def __init__(self, inner: Generator, cache: DiskCache):
        self.inner = inner
        self.cache = cache
        self.name = inner.name

    def _key(self, prompt: str, config: GenerationConfig) -> str:
        blob = f"{self.inner.name}\x00{config.fingerprint()}\x00{prompt}"
        return content_digest(blob.encode("utf-8"))

    def complete(self, prompt: str, config: GenerationConfig) -> str:
        key = self._key(prompt, config)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        completion = self.inner.complete(prompt, config)
        self.cache.put(key, completion)
        return completion

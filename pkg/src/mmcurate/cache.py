"""Content-addressed file cache for provider outputs.

Layout: ``<root>/<provider-id>/<first two hash chars>/<hash>``. Values are
JSON documents. Writes go through a temp file so a crash never leaves a
half-written entry behind.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any


def content_hash(*parts: str) -> str:
    """Stable hex digest over an ordered tuple of strings.

    Parts are length-prefixed before hashing so ("ab", "c") and ("a", "bc")
    cannot collide.
    """
    h = hashlib.sha256()
    for part in parts:
        data = part.encode("utf-8")
        h.update(str(len(data)).encode("ascii"))
        h.update(b":")
        h.update(data)
    return h.hexdigest()


class FileCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _path(self, provider_id: str, key: str) -> Path:
        if not provider_id or "/" in provider_id or os.sep in provider_id:
            raise ValueError(f"bad provider id {provider_id!r}")
        return self.root / provider_id / key[:2] / key

    def get(self, provider_id: str, key: str) -> Any | None:
        path = self._path(provider_id, key)
        try:
            with path.open("r", encoding="utf-8") as handle:
                return json.load(handle)
        except FileNotFoundError:
            return None
        except json.JSONDecodeError:
            # A corrupt entry is treated as a miss; the next put overwrites it.
            return None

    def put(self, provider_id: str, key: str, value: Any) -> None:
        path = self._path(provider_id, key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(value, handle, ensure_ascii=False)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

"""CSV tables and the JSON run manifest."""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float) or hasattr(v, "dtype"):
        x = float(v)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return f"{x + 0.0:.17g}"  # + 0.0 turns -0.0 into 0.0
    return str(v)


def git_blob_hash(data: bytes) -> str:
    """Content hash in git's blob format (sha1 over ``blob <len>\\0<data>``)."""
    return hashlib.sha1(b"blob %d\x00" % len(data) + data).hexdigest()


class OutputWriter:
    """Writes tables under one directory and remembers what it wrote."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def table(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        lines = [",".join(header)]
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"{name}: row has {len(row)} fields, header has {len(header)}")
            lines.append(",".join(fmt(v) for v in row))
        data = ("\n".join(lines) + "\n").encode("utf-8")
        path = self.root / name
        path.write_bytes(data)
        self.files[name] = git_blob_hash(data)
        return path

    def raw(self, name: str, data: bytes) -> Path:
        path = self.root / name
        path.write_bytes(data)
        self.files[name] = git_blob_hash(data)
        return path

    def manifest(self, payload: dict[str, Any]) -> Path:
        doc = dict(payload)
        doc["outputs"] = dict(sorted(self.files.items()))
        path = self.root / "manifest.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
        return path


def _jsonable(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")

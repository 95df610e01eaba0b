"""CSV and manifest output.

Every CSV starts with ``#``-prefixed ``key: value`` metadata lines followed
by a normal header row.  Files are written to a temporary name in the
target directory and renamed into place.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

__all__ = [
    "MANIFEST_NAME",
    "atomic_write_text",
    "format_value",
    "csv_text",
    "write_csv",
    "read_csv",
    "run_id",
    "write_manifest",
    "sha256_file",
]

MANIFEST_NAME = "manifest.json"


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_value(x) -> str:
    """Stable text for a CSV cell: shortest round-trip floats, lowercase booleans."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if hasattr(x, "item"):
        x = x.item()
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence], meta: Optional[Mapping] = None) -> str:
    buf = _io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {format_value(value)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells, expected {len(columns)}")
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path, columns, rows, meta=None) -> Path:
    return atomic_write_text(path, csv_text(columns, rows, meta))


def read_csv(path) -> tuple[dict, list[dict]]:
    """Metadata dict and data rows (as string dicts) of a CSV written by ``write_csv``."""
    meta, body = {}, []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(": ")
                meta[key] = value
            else:
                body.append(line)
    return meta, list(csv.DictReader(body))


def run_id(command: str, config_hash: str, seed: int, version: str) -> str:
    key = json.dumps([command, config_hash, int(seed), version])
    return hashlib.sha256(key.encode()).hexdigest()[:16]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    out_dir,
    *,
    command: str,
    config_hash: str,
    seed: int,
    version: str,
    outputs: Sequence,
    started: datetime,
    extra: Optional[Mapping] = None,
    name: str = MANIFEST_NAME,
) -> Path:
    """Write the run manifest.  Timestamps live here only, never in the CSVs."""
    out_dir = Path(out_dir)
    doc = {
        "command": command,
        "config_hash": config_hash,
        "seed": int(seed),
        "tool_version": version,
        "run_id": run_id(command, config_hash, seed, version),
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": [
            {"file": Path(p).name, "sha256": sha256_file(p)} for p in sorted(map(str, outputs))
        ],
    }
    if extra:
        doc.update(extra)
    return atomic_write_text(out_dir / name, json.dumps(doc, indent=2, sort_keys=True) + "\n")

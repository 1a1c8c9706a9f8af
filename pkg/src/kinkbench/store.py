"""Content-addressed run store and the JSON/CSV artifact writers.

A run lives in ``<root>/<config hash>/``.  Artifacts are written to a
scratch directory first and renamed into place, so a hash directory either
holds a complete run or does not exist.  ``record.json`` lists every
artifact with its digest; wall-clock timings go to ``.timings.json`` so the
artifact tree itself stays byte-identical across reruns.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1"
DEFAULT_ROOT = "kinkbench-store"
RECORD = "record.json"
TIMINGS = ".timings.json"


def clean(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def config_hash(config: dict) -> str:
    canon = json.dumps(clean(config), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode()).hexdigest()


def field_csv(x, u) -> str:
    lines = ["x,u"]
    lines.extend(f"{float(a)!r},{float(b)!r}" for a, b in zip(x, u))
    return "\n".join(lines) + "\n"


def store_root(out=None) -> Path:
    if out:
        return Path(out)
    return Path(os.environ.get("KINKBENCH_STORE", DEFAULT_ROOT))


class StoreCollision(RuntimeError):
    pass


class RunWriter:
    """Collects artifacts in memory and commits them as one directory."""

    def __init__(self):
        self.files: dict = {}

    def text(self, rel: str, content: str):
        if rel in self.files:
            raise ValueError(f"artifact {rel} written twice")
        self.files[rel] = content.encode()

    def json(self, rel: str, obj):
        self.text(rel, dumps(obj))

    def manifest(self) -> list:
        return [
            {"path": rel, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}
            for rel, data in sorted(self.files.items())
        ]

    def commit(self, target: Path, record: dict, timings: dict, *, force: bool = False) -> Path:
        target = Path(target)
        if target.exists():
            if not force:
                raise StoreCollision(f"{target} exists; use --force to replace it")
        target.parent.mkdir(parents=True, exist_ok=True)
        scratch = Path(tempfile.mkdtemp(prefix=".tmp-", dir=target.parent))
        try:
            for rel, data in self.files.items():
                path = scratch / rel
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(data)
            rec = dict(record)
            rec["artifacts"] = self.manifest()
            (scratch / RECORD).write_text(dumps(rec))
            (scratch / TIMINGS).write_text(dumps(timings))
            if target.exists():
                shutil.rmtree(target)
            os.replace(scratch, target)
        except BaseException:
            shutil.rmtree(scratch, ignore_errors=True)
            raise
        return target


def load_record(run_dir) -> dict:
    with open(Path(run_dir) / RECORD) as fh:
        return json.load(fh)


def artifact_tree(run_dir) -> dict:
    """{relative path: bytes} for the record and every listed artifact."""
    run_dir = Path(run_dir)
    rec = load_record(run_dir)
    out = {RECORD: (run_dir / RECORD).read_bytes()}
    for item in rec["artifacts"]:
        out[item["path"]] = (run_dir / item["path"]).read_bytes()
    return out

"""File formats: versioned JSON and CSV, atomic writes, run manifests."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import os
import tempfile
import time
from pathlib import Path as FsPath

from . import __version__
from .geometry import PathFamily

FAMILY_SCHEMA = "bwebsim.family/1"
KNOTS_SCHEMA = "bwebsim.knots/1"
REPORTS_SCHEMA = "bwebsim.reports/1"
COUNT_SCHEMA = "bwebsim.count/1"
MANIFEST_SCHEMA = "bwebsim.manifest/1"


class SchemaError(ValueError):
    """Input file does not match the expected schema."""


def write_atomic(path, data: bytes | str) -> FsPath:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return repr(v)
    return v


def csv_text(fields, rows, schema: str) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("schema",) + tuple(fields))
    for row in rows:
        w.writerow([schema] + [_cell(row[f]) for f in fields])
    return buf.getvalue()


def read_csv(path, expect: tuple[str, ...] | None = None) -> tuple[str, list[dict]]:
    """Read a CSV written by :func:`csv_text`; returns ``(schema, rows)``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    if "schema" not in rows[0]:
        raise SchemaError(f"{path}: missing schema column")
    schemas = {r["schema"] for r in rows}
    if len(schemas) != 1:
        raise SchemaError(f"{path}: mixed schemas {sorted(schemas)}")
    schema = schemas.pop()
    if expect is not None and schema not in expect:
        raise SchemaError(f"{path}: schema {schema!r} not one of {list(expect)}")
    return schema, rows


def family_json(K: PathFamily, extra: dict | None = None) -> dict:
    obj = {"schema": FAMILY_SCHEMA, "paths": K.to_json()}
    obj.update(extra or {})
    return obj


def load_family(path) -> PathFamily:
    """Load a family file: a bare array of paths or an object with a ``paths`` array."""
    with open(path) as fh:
        obj = json.load(fh)
    if isinstance(obj, dict):
        if obj.get("schema", FAMILY_SCHEMA) != FAMILY_SCHEMA:
            raise SchemaError(f"{path}: schema {obj.get('schema')!r} is not {FAMILY_SCHEMA}")
        obj = obj["paths"]
    if not isinstance(obj, list):
        raise SchemaError(f"{path}: expected a list of paths")
    return PathFamily.from_json(obj)


def knots_rows(K: PathFamily):
    for k, p in enumerate(K):
        if p.sentinel:
            yield {"path": k, "start": p.start, "sentinel": "+inf" if p.sentinel > 0 else "-inf", "t": None, "x": None}
            continue
        for t, x in zip(p.times.tolist(), p.values.tolist()):
            yield {"path": k, "start": p.start, "sentinel": "none", "t": t, "x": x}


KNOT_FIELDS = ("path", "start", "sentinel", "t", "x")


class Manifest:
    """Collects output files and writes ``manifest.json`` last."""

    def __init__(self, out_dir, argv, seed=None, config=None):
        self.out_dir = FsPath(out_dir)
        self.argv = list(argv)
        self.seed = seed
        self.config_digest = None if config is None else hashlib.sha256(
            json.dumps(config, sort_keys=True, default=str).encode()
        ).hexdigest()
        self.started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        self.files: list[FsPath] = []

    def write(self, name: str, data) -> FsPath:
        p = write_atomic(self.out_dir / name, data)
        self.files.append(p)
        return p

    def add(self, path) -> None:
        self.files.append(FsPath(path))

    def finish(self) -> FsPath:
        outputs = [
            {"file": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size}
            for p in self.files
        ]
        obj = {
            "schema": MANIFEST_SCHEMA,
            "tool": "bwebsim",
            "version": __version__,
            "command": self.argv,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "started": self.started,
            "finished": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "outputs": outputs,
        }
        return write_atomic(self.out_dir / "manifest.json", dumps(obj))

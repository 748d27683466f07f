"""Run artifacts: the binary matrix file format, CSV helpers, and run manifests.

Matrix file layout (little-endian throughout):

    magic   4 bytes  b"MPST"
    version u32      currently 1
    dtype   u32      1 = float64, 2 = complex128
    ndim    u32
    dims    ndim * u64
    payload row-major array data

CSV files are UTF-8, comma-separated, with a mandatory header row.
"""

import csv
import hashlib
import json
import os
import struct
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import ConfigError

MAGIC = b"MPST"
VERSION = 1
_DTYPE_CODES = {1: np.dtype("<f8"), 2: np.dtype("<c16")}
_CODE_FOR_KIND = {"f": 1, "c": 2}


def write_matrix(path, array):
    """Write an array as a matrix file; real arrays stored as float64."""
    arr = np.asarray(array)
    if arr.dtype.kind in ("i", "u", "b"):
        arr = arr.astype(np.float64)
    if arr.dtype.kind not in _CODE_FOR_KIND:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    code = _CODE_FOR_KIND[arr.dtype.kind]
    arr = np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code])
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, code, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes(order="C"))
    return path


def read_matrix(path):
    """Read a matrix file written by :func:`write_matrix`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        version, code, ndim = struct.unpack("<III", fh.read(12))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        if code not in _DTYPE_CODES:
            raise ValueError(f"{path}: unknown dtype code {code}")
        dims = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        dtype = _DTYPE_CODES[code]
        count = int(np.prod(dims)) if ndim else 1
        payload = fh.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise ValueError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def write_csv(path, header, rows):
    """Write rows (iterable of sequences) with a mandatory header row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return Path(path)


def read_csv(path):
    """Return (header, rows-as-strings)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    return header, rows


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(run_dir, config, seeds, version):
    """Write manifest.json atomically, checksumming every file in the run dir."""
    run_dir = Path(run_dir)
    files = {}
    for p in sorted(run_dir.rglob("*")):
        if p.is_file() and p.name not in ("manifest.json", ".lock"):
            files[str(p.relative_to(run_dir))] = sha256_file(p)
    manifest = {
        "config": config,
        "code_version": version,
        "seeds": seeds,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "files": files,
    }
    tmp = run_dir / "manifest.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, run_dir / "manifest.json")
    return manifest


def read_manifest(run_dir):
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise ConfigError(f"no manifest.json in {run_dir}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


@contextmanager
def run_lock(run_dir):
    """Exclusive lock on a run directory; refuses concurrent writers."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    lock_path = run_dir / ".lock"
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"run directory {run_dir} is locked (stale .lock? remove it to proceed)"
        )
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield run_dir
    finally:
        try:
            os.unlink(lock_path)
        except FileNotFoundError:
            pass


def validate_keys(mapping, allowed, context):
    """Strict config check: reject unknown keys to catch typos early."""
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ConfigError(
            f"unknown key(s) in {context}: {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def load_json_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must contain a JSON object")
    return cfg

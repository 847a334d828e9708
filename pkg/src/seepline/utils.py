"""Seeding, digests and atomic file output shared by every stage."""

import hashlib
import json
import os
import tempfile
import zlib
from pathlib import Path

import numpy as np


def substream(seed, name):
    """Independent generator for a named consumer of the global seed.

    Stages draw from their own stream so that toggling one stage never
    shifts the draws seen by another.
    """
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8"))])


def child_seeds(seed, name, n):
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode("utf-8"))])
    return ss.spawn(n)


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_json(obj):
    return sha256_bytes(canonical_json(obj).encode("utf-8"))


def atomic_write_text(path, text):
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_json(path, obj):
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def format_float(x):
    """Shortest repr that round-trips exactly."""
    return repr(float(x))


def derive_seed(seed, name):
    """Integer seed for ``name``, for APIs that take a plain int."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode("utf-8"))])
    return int(ss.generate_state(1)[0])

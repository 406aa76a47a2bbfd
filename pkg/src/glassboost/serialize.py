"""Canonical JSON helpers shared by models, studies and CLI reports.

All artifacts are dumped with sorted keys and default float repr, so two
runs that compute the same numbers produce byte-identical files. Wall
clock measurements live under ``"timing"`` keys, which :func:`strip_timing`
removes before digests or file comparisons.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

TIMING_KEY = "timing"


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)


def strip_timing(payload):
    """Deep copy of ``payload`` with every ``"timing"`` mapping removed."""
    if isinstance(payload, dict):
        return {
            k: strip_timing(v) for k, v in payload.items() if k != TIMING_KEY
        }
    if isinstance(payload, list):
        return [strip_timing(v) for v in payload]
    return payload


def payload_digest(payload) -> str:
    """sha256 of the canonical dump, ignoring timing sections."""
    doc = canonical_json(strip_timing(payload))
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()


def write_json(path, payload) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(payload))
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)

"""Instance and sample file formats.

Instance descriptors are JSON; samples and dual observations are CSV
with comment headers carrying the instance hash.  Every output embeds
that hash and readers treat a mismatch as a hard error, so a stale
sample file can never be attacked against the wrong instance.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .errors import SampleFileMismatch
from .rlwe import RlweInstance, SampleBatch

FORMAT_VERSION = "rlwe-forge-v1"


def instance_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def instance_payload(inst: RlweInstance) -> dict:
    payload = inst.params()
    payload["kind"] = "prime-cyclotomic" if inst.prime_cyclotomic else "subfield"
    return payload


def write_instance(path, payload: dict) -> str:
    payload = dict(payload)
    payload["format"] = FORMAT_VERSION
    payload["hash"] = instance_hash({k: v for k, v in payload.items()
                                     if k not in ("hash", "format")})
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return payload["hash"]


def read_instance(path) -> dict:
    payload = json.loads(Path(path).read_text())
    expect = instance_hash({k: v for k, v in payload.items()
                            if k not in ("hash", "format")})
    if payload.get("hash") != expect:
        raise SampleFileMismatch(f"instance file {path} fails its own hash check")
    return payload


def write_samples(path, batch: SampleBatch, inst_hash: str, meta: Optional[dict] = None) -> None:
    n = batch.a.shape[1]
    lines = [f"# {FORMAT_VERSION} samples", f"# instance_hash={inst_hash}"]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}={v}")
    header = ",".join([f"a{i}" for i in range(n)] + [f"b{i}" for i in range(n)])
    lines.append(header)
    data = np.concatenate([batch.a, batch.b], axis=1)
    lines.extend(",".join(str(int(v)) for v in row) for row in data)
    Path(path).write_text("\n".join(lines) + "\n")


def read_samples(path, expected_hash: Optional[str] = None) -> Tuple[SampleBatch, str]:
    file_hash = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "instance_hash=" in line:
                    file_hash = line.split("instance_hash=")[1].strip()
                continue
            if line[0].isalpha():
                continue  # column header
            rows.append([int(v) for v in line.split(",")])
    if expected_hash is not None and file_hash != expected_hash:
        raise SampleFileMismatch(
            f"sample file hash {file_hash} != instance hash {expected_hash}")
    data = np.asarray(rows, dtype=np.int64)
    n = data.shape[1] // 2
    return SampleBatch(data[:, :n], data[:, n:]), file_hash


def write_dual_observations(path, values: np.ndarray, inst_hash: str,
                            meta: Optional[dict] = None) -> None:
    lines = [f"# {FORMAT_VERSION} dual-observations", f"# instance_hash={inst_hash}"]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}={v}")
    lines.append("value")
    lines.extend(repr(float(v)) for v in values)
    Path(path).write_text("\n".join(lines) + "\n")


def read_dual_observations(path, expected_hash: Optional[str] = None) -> Tuple[np.ndarray, str]:
    file_hash = None
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "instance_hash=" in line:
                    file_hash = line.split("instance_hash=")[1].strip()
                continue
            if line == "value":
                continue
            vals.append(float(line))
    if expected_hash is not None and file_hash != expected_hash:
        raise SampleFileMismatch(
            f"observation file hash {file_hash} != instance hash {expected_hash}")
    return np.asarray(vals), file_hash

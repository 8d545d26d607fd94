"""Portable binary cache for the precomputed coefficient tensors.

Layout (all integers and floats little-endian):

    bytes 0..4    magic "KCEL1"
    bytes 5..8    format version (u32)
    bytes 9..16   header length in bytes (u64)
    header        UTF-8 key=value lines: energy cap, scattering model,
                  Monte Carlo metadata, and the partition's structured
                  text block (cell corners as hex floats) plus its
                  content hash
    payload       float64 arrays in order: dual matrices (N*25),
                  drift tensor (N*75), block index (B*3 as u32),
                  block values (B*125), block standard errors (B*125)

The header stores the payload byte count and CRC32 so truncation and
bit corruption are detected before any array is trusted.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .basis import DualBasisSet
from .coefficients import CollisionTensor, DriftTensor
from .errors import CorruptFile, HashMismatch, VersionMismatch
from .geometry import Partition
from .kinematics import ScatteringModel

__all__ = ["MAGIC", "FORMAT_VERSION", "CacheBundle", "save_cache", "load_cache"]

MAGIC = b"KCEL1"
FORMAT_VERSION = 1


@dataclass
class CacheBundle:
    """Everything a run needs, as loaded from one cache file."""

    partition: Partition
    duals: DualBasisSet
    drift: DriftTensor
    collision: CollisionTensor


def _header_text(partition, model, collision) -> str:
    lines = [
        f"format={MAGIC.decode()}",
        f"version={FORMAT_VERSION}",
        f"model.kind={model.kind}",
        f"model.rate_constant={float(model.rate_constant).hex()}",
        f"model.vhs_exponent={float(model.vhs_exponent).hex()}",
        f"mc.method={collision.method}",
        f"mc.seed={collision.seed}",
        f"mc.samples_per_pair={collision.samples_per_pair}",
        f"blocks.count={collision.n_blocks}",
        f"partition.content_hash={partition.content_hash}",
    ]
    return "\n".join(lines) + "\npartition.begin\n" + partition.to_text() + "partition.end\n"


def save_cache(path, partition: Partition, duals: DualBasisSet,
               drift: DriftTensor, collision: CollisionTensor):
    """Write a lossless, byte-reproducible cache file."""
    for artifact in (duals, drift, collision):
        if artifact.partition_hash != partition.content_hash:
            raise HashMismatch("cannot cache tensors built for a different partition")
    payload = b"".join([
        np.ascontiguousarray(duals.matrices, dtype="<f8").tobytes(),
        np.ascontiguousarray(drift.values, dtype="<f8").tobytes(),
        np.ascontiguousarray(collision.block_index, dtype="<u4").tobytes(),
        np.ascontiguousarray(collision.values, dtype="<f8").tobytes(),
        np.ascontiguousarray(collision.std_errors, dtype="<f8").tobytes(),
    ])
    header = _header_text(partition, collision.model, collision)
    header += f"payload.bytes={len(payload)}\npayload.crc32={zlib.crc32(payload)}\n"
    blob = header.encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(FORMAT_VERSION).tobytes())
        fh.write(np.uint64(len(blob)).tobytes())
        fh.write(blob)
        fh.write(payload)


def _parse_header(blob: bytes):
    text = blob.decode()
    fields = {}
    partition_text = None
    if "partition.begin\n" in text:
        before, rest = text.split("partition.begin\n", 1)
        partition_text, after = rest.split("partition.end\n", 1)
        text = before + after
    for line in text.strip().splitlines():
        key, _, value = line.partition("=")
        fields[key] = value
    return fields, partition_text


def load_cache(path) -> CacheBundle:
    """Read a cache file back; raises before returning anything inconsistent."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 17 or raw[:5] != MAGIC:
        raise CorruptFile(f"{path}: bad magic, not a coefficient cache")
    version = int(np.frombuffer(raw[5:9], dtype="<u4")[0])
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    header_len = int(np.frombuffer(raw[9:17], dtype="<u8")[0])
    if len(raw) < 17 + header_len:
        raise CorruptFile(f"{path}: truncated header")
    fields, partition_text = _parse_header(raw[17:17 + header_len])
    if partition_text is None:
        raise CorruptFile(f"{path}: header missing partition block")
    for key in ("payload.bytes", "payload.crc32", "partition.content_hash", "blocks.count"):
        if key not in fields:
            raise CorruptFile(f"{path}: header missing field {key}")

    payload = raw[17 + header_len:]
    expected = int(fields["payload.bytes"])
    if len(payload) != expected:
        raise CorruptFile(f"{path}: payload.bytes is {len(payload)}, header says {expected}")
    if zlib.crc32(payload) != int(fields["payload.crc32"]):
        raise CorruptFile(f"{path}: payload.crc32 check failed")

    partition = Partition.from_text(partition_text)
    if partition.content_hash != fields["partition.content_hash"]:
        raise HashMismatch(
            f"{path}: partition.content_hash does not match the embedded geometry")

    model = ScatteringModel(
        kind=fields["model.kind"],
        rate_constant=float.fromhex(fields["model.rate_constant"]),
        vhs_exponent=float.fromhex(fields["model.vhs_exponent"]),
    )
    n = partition.n_cells
    n_blocks = int(fields["blocks.count"])
    sizes = [n * 25 * 8, n * 75 * 8, n_blocks * 3 * 4, n_blocks * 125 * 8, n_blocks * 125 * 8]
    if len(payload) != sum(sizes):
        raise CorruptFile(f"{path}: payload size inconsistent with cell/block counts")
    offsets = np.cumsum([0] + sizes)
    duals_m = np.frombuffer(payload[offsets[0]:offsets[1]], dtype="<f8").reshape(n, 5, 5)
    drift_v = np.frombuffer(payload[offsets[1]:offsets[2]], dtype="<f8").reshape(n, 5, 5, 3)
    index = np.frombuffer(payload[offsets[2]:offsets[3]], dtype="<u4").reshape(n_blocks, 3)
    values = np.frombuffer(payload[offsets[3]:offsets[4]], dtype="<f8").reshape(n_blocks, 5, 5, 5)
    errors = np.frombuffer(payload[offsets[4]:offsets[5]], dtype="<f8").reshape(n_blocks, 5, 5, 5)

    duals = DualBasisSet(matrices=duals_m.copy(), conds=np.full(n, np.nan),
                         partition_hash=partition.content_hash)
    drift = DriftTensor(values=drift_v.copy(), partition_hash=partition.content_hash)
    collision = CollisionTensor(
        block_index=index.astype(np.int32),
        values=values.copy(),
        std_errors=errors.copy(),
        partition_hash=partition.content_hash,
        energy_cap=partition.domain.energy_cap,
        model=model,
        method=fields.get("mc.method", "mc"),
        seed=int(fields.get("mc.seed", 0)),
        samples_per_pair=int(fields.get("mc.samples_per_pair", 0)),
    )
    return CacheBundle(partition=partition, duals=duals, drift=drift, collision=collision)

# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

"""Versioned binary checkpoints.

Layout (little-endian): header (magic, version, kind length, metadata length, tensor count), kind (ascii), metadata
(JSON with sorted keys), then for each tensor in name order: name length, dtype string length, ndim, name, dtype,
shape (u8 each) and the raw C-order bytes. Nothing in the layout depends on insertion order or wall-clock time, so
saving a loaded checkpoint reproduces the file byte for byte.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import BinaryIO, Dict

import numpy as np

from motioncompose.utils.errors import CheckpointError


CHECKPOINT_MAGIC: bytes = b"MCKP"
CHECKPOINT_VERSION: int = 1
CHECKPOINT_KINDS = ("vae", "latent-denoiser", "sequence-denoiser")

HEADER_DTYPE = np.dtype([
    ("magic", "S4"), ("version", "<u2"), ("kind_length", "u1"), ("metadata_length", "<u4"), ("count", "<u4"),
])
TENSOR_HEADER_DTYPE = np.dtype([("name_length", "<u2"), ("dtype_length", "u1"), ("ndim", "u1")])


@dataclass
class Checkpoint:
    kind: str
    tensors: Dict[str, np.ndarray]
    metadata: dict = field(default_factory=lambda: {})

    def __post_init__(self) -> None:
        if self.kind not in CHECKPOINT_KINDS:
            raise CheckpointError(f"Unknown checkpoint kind {self.kind}, choose from {CHECKPOINT_KINDS}")

    @property
    def step(self) -> int:
        return int(self.metadata.get("step", 0))


def _metadata_bytes(metadata: dict) -> bytes:
    try:
        return json.dumps(metadata, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")
    except (TypeError, ValueError) as e:
        raise CheckpointError(f"Checkpoint metadata is not JSON-serializable: {e}")


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    metadata = _metadata_bytes(ckpt.metadata)
    kind = ckpt.kind.encode("ascii")
    chunks = [
        np.array(
            [(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(kind), len(metadata), len(ckpt.tensors))], dtype=HEADER_DTYPE,
        ).tobytes(),
        kind,
        metadata,
    ]
    for name in sorted(ckpt.tensors):
        tensor = np.ascontiguousarray(ckpt.tensors[name])
        # Fix the byte order so the file does not depend on the writing machine.
        tensor = tensor.astype(tensor.dtype.newbyteorder("<"), copy=False)
        name_bytes = name.encode("utf-8")
        dtype_bytes = tensor.dtype.str.encode("ascii")
        chunks.append(np.array([(len(name_bytes), len(dtype_bytes), tensor.ndim)], dtype=TENSOR_HEADER_DTYPE).tobytes())
        chunks.append(name_bytes)
        chunks.append(dtype_bytes)
        chunks.append(np.array(tensor.shape, dtype="<u8").tobytes())
        chunks.append(tensor.tobytes())
    return b"".join(chunks)


def save_checkpoint(ckpt: Checkpoint, path: str) -> str:
    """Writes the checkpoint and returns its sha256 hex digest."""
    data = encode_checkpoint(ckpt)
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "wb") as fout:
            fout.write(data)
    except OSError as e:
        raise CheckpointError(f"Cannot write checkpoint {path}: {e}")
    return hashlib.sha256(data).hexdigest()


def _read_exact(fin: BinaryIO, size: int) -> bytes:
    buffer = fin.read(size)
    if len(buffer) != size:
        raise CheckpointError("Unexpected end of checkpoint file")
    return buffer


def load_checkpoint(path: str, kind: str = None) -> Checkpoint:
    try:
        with open(path, "rb") as fin:
            header = np.frombuffer(_read_exact(fin, HEADER_DTYPE.itemsize), dtype=HEADER_DTYPE)[0]
            if header["magic"] != CHECKPOINT_MAGIC:
                raise CheckpointError(f"{path} is not a checkpoint file")
            if header["version"] != CHECKPOINT_VERSION:
                raise CheckpointError(f"Unsupported checkpoint version {header['version']}")

            loaded_kind = _read_exact(fin, int(header["kind_length"])).decode("ascii")
            metadata = json.loads(_read_exact(fin, int(header["metadata_length"])).decode("ascii"))
            tensors: Dict[str, np.ndarray] = {}
            for _ in range(int(header["count"])):
                tensor_header = np.frombuffer(_read_exact(fin, TENSOR_HEADER_DTYPE.itemsize), dtype=TENSOR_HEADER_DTYPE)[0]
                name = _read_exact(fin, int(tensor_header["name_length"])).decode("utf-8")
                dtype = np.dtype(_read_exact(fin, int(tensor_header["dtype_length"])).decode("ascii"))
                ndim = int(tensor_header["ndim"])
                shape = tuple(int(s) for s in np.frombuffer(_read_exact(fin, 8 * ndim), dtype="<u8")) if ndim > 0 else ()
                size = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
                tensors[name] = np.frombuffer(_read_exact(fin, size), dtype=dtype).reshape(shape).copy()

            if len(fin.read(1)) != 0:
                raise CheckpointError(f"Trailing bytes in checkpoint {path}")
    except CheckpointError:
        raise
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}")
    except (UnicodeDecodeError, json.JSONDecodeError, TypeError) as e:
        raise CheckpointError(f"Corrupt checkpoint {path}: {e}")

    if kind is not None and loaded_kind != kind:
        raise CheckpointError(f"Expected a {kind} checkpoint but {path} holds a {loaded_kind} checkpoint")
    return Checkpoint(kind=loaded_kind, tensors=tensors, metadata=metadata)


def file_digest(path: str) -> str:
    with open(path, "rb") as fin:
        return hashlib.sha256(fin.read()).hexdigest()

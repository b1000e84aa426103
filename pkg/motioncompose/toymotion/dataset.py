# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import BinaryIO, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from motioncompose.numerics.rng import make_rng, split_seed
from motioncompose.toymotion.common import (
    DEFAULT_FRAME_RATE, FAMILY_CODES, FAMILY_MODES, MAX_LENGTH, MAX_MAGNITUDE, MIN_LENGTH, MIN_MAGNITUDE,
    MOTION_DIM, ConceptDescription, ConceptFamily, ConceptToken, MotionSequence,
)
from motioncompose.toymotion.synthesizer import synthesize_motion
from motioncompose.utils.errors import DatasetError, InvalidInputError


DATASET_MAGIC: bytes = b"TMOT"
DATASET_VERSION: int = 1

HEADER_DTYPE = np.dtype([
    ("magic", "S4"), ("version", "<u2"), ("d_m", "<u2"), ("frame_rate", "<f8"), ("count", "<u4"),
])
TOKEN_DTYPE = np.dtype([("family", "u1"), ("mode", "u1"), ("magnitude", "<f8")])
FRAME_DTYPE = np.dtype("<f4")

FAMILY_BY_CODE: Dict[int, ConceptFamily] = {code: family for family, code in FAMILY_CODES.items()}


@dataclass
class MotionRecord:
    motion: MotionSequence
    description: ConceptDescription

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MotionRecord):
            return NotImplemented
        return (
            self.description == other.description
            and self.motion.frame_rate == other.motion.frame_rate
            and self.motion.frames.dtype == other.motion.frames.dtype
            and np.array_equal(self.motion.frames, other.motion.frames)
        )


@dataclass
class DatasetConfig:
    count: int = 2000
    min_length: int = MIN_LENGTH
    max_length: int = MAX_LENGTH
    noise_level: float = 0.05
    min_tokens: int = 1
    max_tokens: int = 4
    # Relative chance of each family (by its text name) being part of a sampled description.
    family_weights: Dict[str, float] = field(default_factory=lambda: {family.value: 1.0 for family in ConceptFamily})
    frame_rate: float = DEFAULT_FRAME_RATE
    seed: int = 0
    num_parallel: int = 1

    def __post_init__(self) -> None:
        if not MIN_LENGTH <= self.min_length <= self.max_length <= MAX_LENGTH:
            raise InvalidInputError(f"Invalid length range [{self.min_length}, {self.max_length}]")
        if not 1 <= self.min_tokens <= self.max_tokens <= len(ConceptFamily):
            raise InvalidInputError(f"Invalid token count range [{self.min_tokens}, {self.max_tokens}]")
        unknown = set(self.family_weights) - {family.value for family in ConceptFamily}
        if len(unknown) > 0:
            raise InvalidInputError(f"Unknown families in family_weights: {sorted(unknown)}")
        positive = [name for name, weight in self.family_weights.items() if weight > 0]
        if len(positive) < self.max_tokens:
            raise InvalidInputError(
                f"max_tokens={self.max_tokens} but only {len(positive)} families have a positive weight"
            )


def sample_description(
    rng: np.random.Generator, family_weights: Dict[str, float], min_tokens: int = 1, max_tokens: int = 4,
) -> ConceptDescription:
    names = [family.value for family in ConceptFamily if family_weights.get(family.value, 0.0) > 0]
    weights = np.array([family_weights[name] for name in names], dtype=np.float64)
    num_tokens = int(rng.integers(min_tokens, max_tokens + 1))
    chosen = rng.choice(len(names), size=num_tokens, replace=False, p=weights / weights.sum())

    tokens = []
    for idx in sorted(chosen):
        family = ConceptFamily(names[idx])
        mode = FAMILY_MODES[family][int(rng.integers(len(FAMILY_MODES[family])))]
        magnitude = round(float(rng.uniform(MIN_MAGNITUDE, MAX_MAGNITUDE)), 2)
        tokens.append(ConceptToken(family, mode, magnitude))
    return ConceptDescription(tuple(tokens))


def generate_record(config: DatasetConfig, index: int) -> MotionRecord:
    record_seed = split_seed(config.seed, "record", index)
    rng = make_rng(record_seed, "description")
    desc = sample_description(rng, config.family_weights, config.min_tokens, config.max_tokens)
    length = int(rng.integers(config.min_length, config.max_length + 1))
    motion = synthesize_motion(desc, length, config.noise_level, record_seed, config.frame_rate)
    # Stored precision, so that records compare equal after a write / read cycle.
    motion.frames = motion.frames.astype(FRAME_DTYPE)
    return MotionRecord(motion=motion, description=desc)


def generate_records(config: DatasetConfig, show_progress: bool = False) -> List[MotionRecord]:
    indices = range(config.count)
    if config.num_parallel <= 1:
        iterator = tqdm(indices, desc="Generating motions") if show_progress else indices
        return [generate_record(config, idx) for idx in iterator]

    with ThreadPoolExecutor(max_workers=config.num_parallel) as executor:
        results = executor.map(lambda idx: generate_record(config, idx), indices)
        if show_progress:
            results = tqdm(results, total=config.count, desc="Generating motions")
        return list(results)


def _encode_description(desc: ConceptDescription) -> bytes:
    tokens = np.zeros(len(desc.tokens), dtype=TOKEN_DTYPE)
    for idx, token in enumerate(desc.tokens):
        tokens[idx] = (FAMILY_CODES[token.family], FAMILY_MODES[token.family].index(token.mode), token.magnitude)
    return np.array([len(desc.tokens)], dtype="u1").tobytes() + tokens.tobytes()


def index_path(path: str) -> str:
    return f"{path}.index.txt"


def write_dataset(records: List[MotionRecord], path: str, frame_rate: Optional[float] = None) -> None:
    if frame_rate is None:
        frame_rate = records[0].motion.frame_rate if len(records) > 0 else DEFAULT_FRAME_RATE

    for record in records:
        if record.motion.frame_rate != frame_rate:
            raise DatasetError(f"Mixed frame rates in one dataset: {record.motion.frame_rate} vs {frame_rate}")

    header = np.array([(DATASET_MAGIC, DATASET_VERSION, MOTION_DIM, frame_rate, len(records))], dtype=HEADER_DTYPE)
    try:
        dirname = os.path.dirname(os.path.abspath(path))
        os.makedirs(dirname, exist_ok=True)
        with open(path, "wb") as fout:
            fout.write(header.tobytes())
            for record in records:
                fout.write(np.array([record.motion.length], dtype="<u2").tobytes())
                fout.write(record.motion.frames.astype(FRAME_DTYPE).tobytes())
                fout.write(_encode_description(record.description))

        with open(index_path(path), "w", encoding="utf-8") as fout:
            for idx, record in enumerate(records):
                fout.write(f"{idx}\t{record.motion.length}\t{record.description.to_text()}\n")
    except OSError as e:
        raise DatasetError(f"Cannot write dataset to {path}: {e}")


def _read_exact(fin: BinaryIO, dtype: np.dtype, count: int = 1) -> np.ndarray:
    size = np.dtype(dtype).itemsize * count
    buffer = fin.read(size)
    if len(buffer) != size:
        raise DatasetError("Unexpected end of dataset file")
    return np.frombuffer(buffer, dtype=dtype, count=count)


def read_dataset(path: str) -> Tuple[dict, List[MotionRecord]]:
    """Returns (header dict, records)."""
    try:
        with open(path, "rb") as fin:
            header = _read_exact(fin, HEADER_DTYPE)[0]
            if header["magic"] != DATASET_MAGIC:
                raise DatasetError(f"{path} is not a motion dataset file")
            if header["version"] != DATASET_VERSION:
                raise DatasetError(f"Unsupported dataset version {header['version']}")
            if header["d_m"] != MOTION_DIM:
                raise DatasetError(f"Dataset motion dim {header['d_m']} differs from {MOTION_DIM}")

            frame_rate = float(header["frame_rate"])
            records: List[MotionRecord] = []
            for _ in range(int(header["count"])):
                length = int(_read_exact(fin, "<u2")[0])
                frames = _read_exact(fin, FRAME_DTYPE, length * MOTION_DIM).reshape(length, MOTION_DIM).copy()
                num_tokens = int(_read_exact(fin, "u1")[0])
                tokens = []
                for token in _read_exact(fin, TOKEN_DTYPE, num_tokens):
                    family = FAMILY_BY_CODE[int(token["family"])]
                    tokens.append(ConceptToken(family, FAMILY_MODES[family][int(token["mode"])], float(token["magnitude"])))
                desc = ConceptDescription(tuple(tokens))
                motion = MotionSequence(frames=frames, frame_rate=frame_rate, metadata={"description": desc.to_text()})
                records.append(MotionRecord(motion=motion, description=desc))

            if len(fin.read(1)) != 0:
                raise DatasetError(f"Trailing bytes after {len(records)} records in {path}")
    except DatasetError:
        raise
    except OSError as e:
        raise DatasetError(f"Cannot read dataset {path}: {e}")
    except InvalidInputError as e:
        raise DatasetError(f"Corrupt record in {path}: {e}")

    header_dict = {
        "version": int(header["version"]), "d_m": int(header["d_m"]), "frame_rate": frame_rate,
        "count": int(header["count"]),
    }
    return header_dict, records


def make_dataset(config: DatasetConfig, out: str, show_progress: bool = False) -> List[MotionRecord]:
    records = generate_records(config, show_progress=show_progress)
    write_dataset(records, out, frame_rate=config.frame_rate)
    return records


def channel_statistics(records: List[MotionRecord]) -> Tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and std over all frames (std floored at 1e-3)."""
    if len(records) == 0:
        return np.zeros(MOTION_DIM), np.ones(MOTION_DIM)
    frames = np.concatenate([record.motion.frames.astype(np.float64) for record in records], axis=0)
    return frames.mean(axis=0), np.maximum(frames.std(axis=0), 1e-3)

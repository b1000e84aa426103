# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import zlib
from typing import Union

import numpy as np


SeedLike = Union[int, np.random.Generator]


def _name_key(name: Union[str, int]) -> int:
    if isinstance(name, (int, np.integer)):
        return int(name)
    return zlib.crc32(str(name).encode("utf-8"))


def make_rng(seed: SeedLike, *names: Union[str, int]) -> np.random.Generator:
    """Return a counter-based (Philox) generator for the stream `seed/names[0]/names[1]/...`.

    Streams with different names are statistically independent, and the same (seed, names) always yields the same
    sequence, regardless of which other streams were created before. Passing a Generator returns it unchanged.
    """
    if isinstance(seed, np.random.Generator):
        assert len(names) == 0, "Named sub-streams can only be derived from an integer seed"
        return seed

    assert int(seed) >= 0, f"Seed must be non-negative but {seed} was given"
    entropy = [int(seed)] + [_name_key(name) for name in names]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def split_seed(seed: int, *names: Union[str, int]) -> int:
    """Derive a child integer seed, e.g. one per dataset record."""
    entropy = [int(seed)] + [_name_key(name) for name in names]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint32)[0])


def rng_state(rng: np.random.Generator) -> dict:
    """JSON-friendly snapshot of a generator state."""
    def _plain(value):
        if isinstance(value, dict):
            return {key: _plain(v) for key, v in value.items()}
        if isinstance(value, np.ndarray):
            return [int(v) for v in value.tolist()]
        if isinstance(value, np.integer):
            return int(value)
        return value

    return _plain(rng.bit_generator.state)


def restore_rng(state: dict) -> np.random.Generator:
    assert state["bit_generator"] == "Philox", f"Unsupported bit generator: {state['bit_generator']}"
    bit_generator = np.random.Philox()
    restored = dict(state)
    restored["state"] = {
        key: np.asarray(value, dtype=np.uint64) for key, value in state["state"].items()
    }
    restored["buffer"] = np.asarray(state["buffer"], dtype=np.uint64)
    bit_generator.state = restored
    return np.random.Generator(bit_generator)

"""Small shared helpers: seeded RNG derivation and canonical JSON output."""
from __future__ import annotations

import json
import zlib
from typing import Any

import numpy as np


def child_rng(seed: int, *keys: int | str) -> np.random.Generator:
    """Derive an independent generator from a root seed and a stable key path.

    String keys are hashed with crc32 so the derivation does not depend on
    Python's randomized ``hash``.  The same (seed, keys) always yields the
    same stream, regardless of call order or thread count.
    """
    words = [int(seed) & 0xFFFFFFFF]
    for k in keys:
        if isinstance(k, str):
            words.append(zlib.crc32(k.encode("utf-8")))
        else:
            words.append(int(k) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(words))


def derive_seed(seed: int, *keys: int | str) -> int:
    """Stable integer sub-seed for the same (seed, keys) path as child_rng."""
    words = [int(seed) & 0xFFFFFFFF]
    for k in keys:
        if isinstance(k, str):
            words.append(zlib.crc32(k.encode("utf-8")))
        else:
            words.append(int(k) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1, np.uint32)[0])


def parallel_map(fn, items, jobs: int = 1) -> list:
    """Map fn over items, optionally on a thread pool.

    Results come back in input order, so output is independent of the
    worker count as long as fn is a pure function of its item.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def dump_json(obj: Any, indent: int | None = 2) -> str:
    """Serialize to canonical JSON: sorted keys, fixed separators, newline."""
    return json.dumps(obj, sort_keys=True, indent=indent) + "\n"


def write_json(path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_json(obj))


def read_json(path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)

# src/rng.py
"""
Счётчиковые (counter-based) потоки случайных чисел.

Поток однозначно задаётся мастер-сидом и набором тегов, например
(seed, "power/quadratic", 17) - семнадцатая репликация эксперимента.
Порядок выполнения воркеров на значения не влияет.
"""

from __future__ import annotations

import hashlib
from typing import Tuple, Union

import numpy as np

Tag = Union[int, str]

_MAX_SEED = 2**64 - 1


def tag_to_int(tag: Tag) -> int:
    """
    Строковые теги хешируются BLAKE2b (стабильно между процессами, в отличие от hash()).
    """
    if isinstance(tag, (bool, np.bool_)):
        raise TypeError("bool нельзя использовать как тег потока")
    if isinstance(tag, (int, np.integer)):
        if tag < 0:
            raise ValueError(f"Тег потока должен быть неотрицательным: {tag}")
        return int(tag)
    if isinstance(tag, str):
        digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"Неподдерживаемый тип тега: {type(tag).__name__}")


def stream_key(seed: int, *tags: Tag) -> Tuple[int, Tuple[int, ...]]:
    if not 0 <= int(seed) <= _MAX_SEED:
        raise ValueError(f"seed должен быть в [0, 2^64): {seed}")
    return int(seed), tuple(tag_to_int(t) for t in tags)


def stream(seed: int, *tags: Tag) -> np.random.Generator:
    """
    Генератор Philox, ключ - SeedSequence(seed, spawn_key=tags).
    """
    entropy, key = stream_key(seed, *tags)
    seq = np.random.SeedSequence(entropy, spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def as_generator(seed_or_rng: Union[int, np.random.Generator], *tags: Tag) -> np.random.Generator:
    """Готовый генератор проходит насквозь, целое число превращается в поток."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return stream(int(seed_or_rng), *tags)

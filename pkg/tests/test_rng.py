from __future__ import annotations

import hashlib

import numpy as np
import pytest

from src.rng import as_generator, stream, stream_key, tag_to_int


class TestTags:
    def test_int_passes_through(self):
        assert tag_to_int(17) == 17

    def test_string_is_blake2b(self):
        expected = int.from_bytes(hashlib.blake2b(b"power/quadratic", digest_size=8).digest(), "little")
        assert tag_to_int("power/quadratic") == expected

    def test_bool_rejected(self):
        with pytest.raises(TypeError):
            tag_to_int(True)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            tag_to_int(-1)

    def test_seed_range(self):
        with pytest.raises(ValueError):
            stream_key(2**64)


class TestStreams:
    def test_same_key_same_numbers(self):
        a = stream(7, "exp", 3).standard_normal(5)
        b = stream(7, "exp", 3).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_replication_index_changes_stream(self):
        a = stream(7, "exp", 3).standard_normal(5)
        b = stream(7, "exp", 4).standard_normal(5)
        assert not np.array_equal(a, b)

    def test_tag_changes_stream(self):
        a = stream(7, "exp-a", 0).random(4)
        b = stream(7, "exp-b", 0).random(4)
        assert not np.array_equal(a, b)

    def test_as_generator_keeps_generator(self):
        g = stream(1, "x")
        assert as_generator(g, "ignored") is g

    def test_as_generator_from_int(self):
        np.testing.assert_array_equal(as_generator(5, "t").random(3), stream(5, "t").random(3))

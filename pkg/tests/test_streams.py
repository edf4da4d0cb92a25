import numpy as np
import pytest

from fogmimo.streams import DROP, FADING, substream


def test_same_keys_same_draws():
    a = substream(5, 3, DROP).random(8)
    b = substream(5, 3, DROP).random(8)
    assert np.array_equal(a, b)


def test_different_keys_differ():
    a = substream(5, 3, DROP).random(8)
    assert not np.array_equal(a, substream(5, 3, FADING).random(8))
    assert not np.array_equal(a, substream(5, 4, DROP).random(8))
    assert not np.array_equal(a, substream(6, 3, DROP).random(8))


def test_generator_passes_through():
    g = np.random.default_rng(1)
    assert substream(g) is g


def test_negative_keys_rejected():
    with pytest.raises(ValueError):
        substream(1, -2)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kochskew.rng import PathStream, path_key


def test_reproducible():
    a = PathStream(5, 17)
    b = PathStream(5, 17)
    assert [a.uniform() for _ in range(10)] == [b.uniform() for _ in range(10)]
    assert [a.normal() for _ in range(10)] == [b.normal() for _ in range(10)]


@given(st.integers(0, 2 ** 40), st.integers(0, 2 ** 40), st.integers(0, 2 ** 40))
def test_keys_distinct(seed, p, q):
    if p != q:
        assert path_key(seed, p) != path_key(seed, q)


def test_streams_differ_by_path_and_seed():
    u = PathStream(1, 0).uniforms(5)
    assert not np.array_equal(u, PathStream(1, 1).uniforms(5))
    assert not np.array_equal(u, PathStream(2, 0).uniforms(5))


def test_uniform_moments():
    s = PathStream(3, 0)
    u = s.uniforms(200_000)
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / len(u))
    assert s.counter > 0


def test_normal_moments():
    s = PathStream(4, 9)
    z = np.array([s.normal() for _ in range(100_000)])
    assert abs(z.mean()) < 4 / np.sqrt(len(z))
    assert abs(z.var() - 1) < 4 * np.sqrt(2 / len(z))
    assert abs(np.mean(z ** 3)) < 4 * np.sqrt(15 / len(z))


def test_bad_arguments():
    with pytest.raises(ValueError):
        PathStream(-1, 0)

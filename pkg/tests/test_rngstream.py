import numpy as np

from cellsim.rngstream import hash_normal, hash_uniform, substream


def test_substream_deterministic():
    a = substream(42, "fading", 3).standard_normal(16)
    b = substream(42, "fading", 3).standard_normal(16)
    assert np.array_equal(a, b)


def test_substreams_independent_of_each_other():
    a = substream(42, "fading", 3).standard_normal(16)
    b = substream(42, "fading", 4).standard_normal(16)
    c = substream(42, "users").standard_normal(16)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_hash_uniform_scalar_and_shape():
    u = hash_uniform(7, "shadowing", 3, 5)
    assert isinstance(u, float)
    assert 0.0 < u < 1.0
    assert u == hash_uniform(7, "shadowing", 3, 5)
    grid = hash_uniform(7, "shadowing", np.arange(4)[:, None], np.arange(6)[None, :])
    assert grid.shape == (4, 6)
    assert grid[3, 5] == u
    assert ((grid > 0) & (grid < 1)).all()


def test_hash_uniform_distinct_keys():
    vals = hash_uniform(1, "x", np.arange(10000))
    assert len(np.unique(vals)) == 10000


def test_hash_normal_moments():
    z = hash_normal(9, "shadowing", np.arange(100000))
    assert abs(z.mean()) < 0.02
    assert abs(z.std() - 1.0) < 0.02

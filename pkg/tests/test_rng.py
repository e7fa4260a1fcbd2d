import numpy as np

from langevin_transport import rng


def _draw(gen, a, z):
    return gen.standard_normal(z - a)


def test_blocks_do_not_depend_on_threads():
    try:
        rng.set_threads(1)
        one = np.concatenate(rng.map_blocks(_draw, 20_000, 5, 7))
        rng.set_threads(4)
        four = np.concatenate(rng.map_blocks(_draw, 20_000, 5, 7))
    finally:
        rng.set_threads(1)
    assert np.array_equal(one, four)


def test_streams_and_seeds_differ():
    a = rng.generator(1, 2, 0).standard_normal(4)
    b = rng.generator(1, 3, 0).standard_normal(4)
    c = rng.generator(2, 2, 0).standard_normal(4)
    assert not np.allclose(a, b) and not np.allclose(a, c)
    assert rng.stream_id("x", 1) == rng.stream_id("x", 1) != rng.stream_id("x", 2)


def test_moment_accumulator_matches_numpy():
    data = np.random.default_rng(0).standard_normal((1000, 3)) @ np.array([[1, 0.5, 0], [0, 1, 0], [0, 0, 2.0]])
    acc = rng.MomentAccumulator(3)
    for chunk in np.array_split(data, 7):
        acc.add(chunk)
    assert acc.count == 1000
    assert np.allclose(acc.mean(), data.mean(axis=0), atol=1e-14)
    assert np.allclose(acc.cov(), np.cov(data.T), atol=1e-13)

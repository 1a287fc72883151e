import json

import numpy as np
from hypothesis import given, strategies as st

from mnldesign.rng import CounterRNG


def test_golden_vectors(golden_dir):
    gold = json.loads((golden_dir / "rng_vectors.json").read_text())
    for key, vec in gold.items():
        seed, stream = map(int, key.split(":"))
        assert [int(x) for x in CounterRNG(seed, stream).raw(4)] == vec["raw"]
        assert CounterRNG(seed, stream).uniform(4).tolist() == vec["uniform"]
        assert CounterRNG(seed, stream).normal(3).tolist() == vec["normal"]
        assert CounterRNG(seed, stream).ball(3, 1.0).tolist() == vec["ball3"]


def test_batch_equals_sequential():
    a = CounterRNG(5, 2).uniform(50)
    r = CounterRNG(5, 2)
    assert np.array_equal(a, [r.uniform() for _ in range(50)])


def test_streams_differ():
    assert not np.array_equal(CounterRNG(1, 3).uniform(8), CounterRNG(1, 4).uniform(8))
    assert not np.array_equal(CounterRNG(1, 3).uniform(8), CounterRNG(2, 3).uniform(8))


@given(st.integers(0, 2**32), st.integers(0, 10))
def test_uniform_open_interval(seed, stream):
    u = CounterRNG(seed, stream).uniform(256)
    assert np.all(u > 0) and np.all(u < 1)


@given(st.integers(0, 2**20), st.integers(1, 6), st.floats(0.0, 5.0))
def test_ball_radius(seed, d, B):
    x = CounterRNG(seed, 0).ball(d, B)
    assert x.shape == (d,)
    assert np.linalg.norm(x) <= B * (1 + 1e-12)


def test_categorical_degenerate():
    r = CounterRNG(0, 0)
    assert all(r.categorical([0.0, 1.0, 0.0]) == 1 for _ in range(20))


def test_integers_range():
    k = CounterRNG(3, 1).integers(7, 1000)
    assert k.min() == 0 and k.max() == 6

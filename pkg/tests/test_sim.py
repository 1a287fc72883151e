import numpy as np
import pytest

from mnldesign.assortment import true_gap
from mnldesign.mnl import OUTSIDE, Instance, choice_probs
from mnldesign.rng import CounterRNG
from mnldesign.sim import Environment, GenerationError, gen_instance, sample_choice


def test_zero_radius_gives_zero_theta():
    for seed in range(5):
        assert np.all(gen_instance(4, 2, 1, 0.0, seed=seed).theta_star == 0.0)


@pytest.mark.parametrize("seed", range(10))
def test_generated_instances_are_valid(seed):
    inst = gen_instance(12, 3, 4, 1.5, seed=seed)
    assert np.all(np.linalg.norm(inst.features, axis=1) <= 1.0)
    assert np.linalg.norm(inst.theta_star) <= 1.5
    assert np.all((inst.revenues >= 0) & (inst.revenues < 1))
    assert inst.outside_option
    assert true_gap(inst)[1] >= 1e-6


def test_generation_is_deterministic():
    a, b = gen_instance(9, 2, 3, 1.0, seed=7), gen_instance(9, 2, 3, 1.0, seed=7)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.revenues, b.revenues)


def test_gap_margin_enforced():
    inst = gen_instance(10, 2, 3, 1.0, seed=1, gap_margin=0.05)
    assert true_gap(inst)[1] >= 0.05
    with pytest.raises(GenerationError):
        gen_instance(10, 2, 3, 1.0, seed=1, gap_margin=2.0, max_redraws=5)


def test_gen_rejects_bad_sizes():
    with pytest.raises(ValueError):
        gen_instance(2, 1, 3, 1.0, seed=0)
    with pytest.raises(ValueError):
        gen_instance(5, 6, 3, 1.0, seed=0)


def test_ball_radial_law():
    # for uniform in the radius-B ball, |theta|^d / B^d is Unif(0, 1)
    d, B, n = 3, 2.0, 100_000
    r = CounterRNG(3, 99)
    x = np.array([np.linalg.norm(r.ball(d, B)) ** d / B**d for _ in range(n)])
    assert abs(x.mean() - 0.5) <= 3 * np.sqrt(1 / 12 / n)


def test_saturated_utility_always_chooses_item():
    inst = Instance([[1.0]], [0.5], 1, 60.0, theta_star=[60.0], outside_option=True)
    env = Environment(inst, seed=0)
    assert all(sample_choice(env, (0,)) == 0 for _ in range(1000))


def test_choice_frequencies():
    inst = gen_instance(6, 3, 2, 1.0, seed=2)
    env = Environment(inst, seed=2)
    S, n = (0, 2, 5), 1_000_000
    ch = env.sample_choices([S] * n, "A")
    p = choice_probs(inst, S, inst.theta_star)
    labels = list(S) + [OUTSIDE]
    for lab, pk in zip(labels, p):
        freq = np.mean(ch == lab)
        assert abs(freq - pk) <= 4 * np.sqrt(pk * (1 - pk) / n)


def test_batch_sampling_matches_sequential():
    inst = gen_instance(6, 3, 2, 1.0, seed=3)
    sets = [(0, 1), (2,), (1, 3, 5), (0, 1), (4, 5)] * 40
    batch = Environment(inst, seed=5).sample_choices(sets, "B")
    env = Environment(inst, seed=5)
    assert batch.tolist() == [env.sample_choice(S, "B") for S in sets]


def test_streams_independent():
    inst = gen_instance(6, 2, 2, 1.0, seed=4)
    env = Environment(inst, seed=4)
    S, n = (1, 3), 200_000
    a = (env.sample_choices([S] * n, "A") == OUTSIDE).astype(float)
    b = (env.sample_choices([S] * n, "B") == OUTSIDE).astype(float)
    assert abs(np.corrcoef(a, b)[0, 1]) <= 4 / np.sqrt(n)


def test_environment_requires_outside_option():
    inst = Instance([[0.1], [0.2]], [0.5, 0.5], 2, 1.0, theta_star=[0.5])
    with pytest.raises(ValueError):
        Environment(inst, seed=0)

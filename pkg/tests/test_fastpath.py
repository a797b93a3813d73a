"""The compiled spin kernels must reproduce the generic kernels exactly."""

import numpy as np
import pytest

import admap
from admap import fastpath
from admap.ad import ADParams, ad_trial
from admap.minimize import local_minimize
from admap.rng import stream
from admap.samplers import gibbs_sweep


@pytest.fixture(scope="module")
def pair():
    model = admap.sk_model(12, seed=3)
    minima, _ = admap.flip_stable_minima(model)
    return model, minima[0], minima[1]


def test_ad_trial_routes_identical(pair):
    model, a, b = pair
    params = ADParams(temperature=0.3, alpha=2.0, delta=0.0, improvement_limit=40)
    for seed in range(25):
        slow = ad_trial(model, a, b, params, rng=stream(seed, "eq"), use_fastpath=False)
        fast = ad_trial(model, a, b, params, rng=stream(seed, "eq"), use_fastpath=True)
        assert slow.success == fast.success
        assert slow.iterations == fast.iterations
        assert slow.best_distance == fast.best_distance
        assert np.array_equal(slow.terminal, fast.terminal)
        assert slow.barrier == fast.barrier


def test_recorded_paths_identical(pair):
    model, a, b = pair
    params = ADParams(temperature=0.5, alpha=5.0, delta=0.0, improvement_limit=50)
    slow = ad_trial(model, a, b, params, rng=stream(5, "p"), use_fastpath=False,
                    record_path=True)
    fast = ad_trial(model, a, b, params, rng=stream(5, "p"), use_fastpath=True,
                    record_path=True)
    assert slow.success and fast.success
    assert len(slow.path_states) == len(fast.path_states)
    for s, f in zip(slow.path_states, fast.path_states):
        assert np.array_equal(s, f)
    assert np.array_equal(slow.path_energies, fast.path_energies)
    # discrete paths move one coordinate at a time
    for s, t in zip(slow.path_states, slow.path_states[1:]):
        assert int((np.asarray(s) != np.asarray(t)).sum()) == 1


def test_greedy_descent_routes_identical(pair):
    model, _, _ = pair
    rng = stream(0, "starts")
    for _ in range(20):
        x0 = model.palette[rng.integers(0, 2, size=model.dim)]
        slow = local_minimize(model, x0, use_fastpath=False)
        fast = local_minimize(model, x0, use_fastpath=True)
        assert np.array_equal(slow, fast)


def test_gibbs_chain_matches_generic_sweeps(pair):
    model, a, _ = pair
    temperature = 0.9
    n_sweeps = 30
    sigma, energy = fastpath.spin_gibbs_chain(
        model.couplings, model.field, model.temperature,
        a.astype(np.float64), model.energy(a), temperature, n_sweeps,
        stream(7, "chain"), np.empty(0, dtype=np.int64), np.empty(0))
    x = np.array(a, copy=True)
    e = model.energy(x)
    rng = stream(7, "chain")
    for _ in range(n_sweeps):
        x, e, _ = gibbs_sweep(model, x, temperature, rng, state_energy=e)
    assert np.array_equal(sigma.astype(int), x)
    assert energy == e

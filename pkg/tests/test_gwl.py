import math

import numpy as np
import pytest

import admap
from admap.errors import ConfigError, RejectedInput
from admap.gwl import GwlChain, GwlConfig, gwl_acceptance, gwl_run
from admap.minimize import local_minimize
from admap.oracle import state_index
from admap.rng import stream


def test_acceptance_rule_reduces_to_metropolis():
    for ratio in (-2.0, -0.5, 0.0, 0.7):
        assert gwl_acceptance(ratio, 10, 25, 0.0) == min(1.0, math.exp(ratio))
        assert gwl_acceptance(ratio, 17, 17, 0.8) == min(1.0, math.exp(ratio))


def test_acceptance_rule_arithmetic():
    assert gwl_acceptance(0.0, 10, 0, 0.1) == 1.0  # min(1, e^1)
    assert gwl_acceptance(0.0, 0, 10, 0.1) == pytest.approx(math.exp(-1.0))


def test_config_validation():
    with pytest.raises(RejectedInput):
        GwlConfig(e_lo=1.0, e_hi=1.0)
    with pytest.raises(RejectedInput):
        GwlConfig(e_lo=0.0, e_hi=1.0, n_bins=0)
    with pytest.raises(RejectedInput):
        GwlConfig(e_lo=0.0, e_hi=1.0, gamma=-1.0)


def test_histogram_accounts_every_step(sk12):
    cfg = GwlConfig(e_lo=-7.0, e_hi=-2.0, n_bins=10, gamma=0.5, iterations=5000)
    result = gwl_run(sk12, cfg, seed=3)
    total = sum(int(h.sum()) for h in result.histogram.values())
    assert total == 5000


def test_gwl_recovers_all_brute_force_minima(sk12):
    states, energies = admap.flip_stable_minima(sk12)
    cfg = GwlConfig(e_lo=float(energies[0]) - 0.5, e_hi=float(energies[-1]) + 1.5,
                    n_bins=40, gamma=1.0, iterations=200_000)
    result = gwl_run(sk12, cfg, seed=5)
    found = {tuple(np.asarray(s).tolist()) for _, s in result.minima_sorted()}
    brute = {tuple(s.tolist()) for s in states}
    assert found == brute
    # closed under negation
    assert all(tuple((-np.array(s)).tolist()) in found for s in found)


def test_transition_pairs_straddle_basins(sk12):
    cfg = GwlConfig(e_lo=-7.0, e_hi=-2.0, n_bins=20, gamma=1.0, iterations=30_000)
    result = gwl_run(sk12, cfg, seed=7)
    assert result.transitions
    for a, b in result.transitions[:50]:
        assert int((a != b).sum()) == 1
        ma = local_minimize(sk12, a)
        mb = local_minimize(sk12, b)
        assert not np.array_equal(ma, mb)


def test_memoized_basins_agree_with_fresh_descent(sk12):
    cfg = GwlConfig(e_lo=-7.0, e_hi=-2.0, n_bins=20, gamma=1.0, iterations=20_000)
    chain = GwlChain(sk12, cfg, seed=11)
    chain.advance(cfg.iterations)
    items = chain.memo_items()
    rng = stream(1, "spot")
    picks = rng.integers(0, len(items), size=max(1, len(items) // 100))
    for idx in picks:
        key, basin = items[int(idx)]
        state = np.frombuffer(key, dtype=sk12.palette.dtype)
        fresh = local_minimize(sk12, state)
        assert np.ascontiguousarray(fresh).tobytes() == basin


def test_flat_histogram_two_basin_instance():
    model = admap.sk_model(10, seed=120)
    states, energies = admap.flip_stable_minima(model)
    assert len(states) == 2
    ground = float(energies[0])
    cfg = GwlConfig(e_lo=ground - 0.3, e_hi=ground + 4.0, n_bins=5, gamma=1.0,
                    iterations=1_000_000, flatness_stride=100_000)
    result = gwl_run(model, cfg, seed=9)
    assert len(result.histogram) == 2
    counts = np.concatenate([h[1:-1] for h in result.histogram.values()])
    nonzero = counts[counts > 0]
    assert nonzero.max() / nonzero.min() < 3.0


def test_gamma_zero_matches_boltzmann():
    model = admap.sk_model(8, seed=23)
    cfg = GwlConfig(e_lo=-10.0, e_hi=5.0, n_bins=10, gamma=0.0, iterations=1_000_000)
    chain = GwlChain(model, cfg, seed=13)
    visits = np.zeros(2 ** 8, dtype=np.int64)
    for _ in range(cfg.iterations):
        chain.step()
        visits[state_index(chain.state)] += 1
    empirical = visits / visits.sum()
    exact = admap.exact_boltzmann(model, temperature=1.0)
    tv = 0.5 * np.abs(empirical - exact).sum()
    assert tv < 0.05


def test_spectrum_excluding_reachable_energies_errors(sk12):
    cfg = GwlConfig(e_lo=1000.0, e_hi=1001.0, n_bins=5, gamma=1.0, iterations=5000)
    with pytest.raises(ConfigError):
        gwl_run(sk12, cfg, seed=1)


def test_minima_csv_format(sk12):
    cfg = GwlConfig(e_lo=-7.0, e_hi=-2.0, n_bins=10, gamma=0.5, iterations=10_000)
    result = gwl_run(sk12, cfg, seed=3)
    lines = result.minima_csv().strip().splitlines()
    assert lines[0] == "energy,state"
    assert len(lines) >= 2
    energy, state = lines[1].split(",", 1)
    float(energy)
    assert state.startswith('"') and state.endswith('"')

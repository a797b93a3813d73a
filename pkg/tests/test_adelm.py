import json

import numpy as np
import pytest

import admap
from admap.ad import ADParams, phase_sweep
from admap.adelm import (AdelmConfig, adelm_run, catalog_representative_states,
                         consolidate, propose_start, tune_heuristic)
from admap.errors import ConfigError, TuningFailure
from admap.gwl import GwlChain, GwlConfig
from admap.minimize import local_minimize
from admap.rng import stream


def test_local_minimize_fixed_point():
    model = admap.sk_model(10, seed=4)
    minima, _ = admap.flip_stable_minima(model)
    for m in minima[:4]:
        assert np.array_equal(local_minimize(model, m), m)


def test_local_minimize_outputs_flip_stable():
    model = admap.sk_model(12, seed=31)
    rng = stream(3, "starts")
    for _ in range(15):
        x0 = model.palette[rng.integers(0, 2, size=12)]
        y = local_minimize(model, x0)
        for i in range(12):
            assert model.coordinate_delta(y, i, -y[i]) >= 0.0


def test_local_minimize_gmm_reaches_nearby_mode():
    gmm = admap.GaussianMixture(means=[[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]],
                                covs=[0.3, 0.5, 0.4], weights=[0.5, 0.3, 0.2])
    for mean in gmm.means:
        y = local_minimize(gmm, np.array(mean), g_tol=1e-10)
        # independent mode location: dense local grid refinement around the mean
        span = np.linspace(-0.2, 0.2, 4001)
        best = np.array(mean, dtype=float)
        for axis in range(2):
            cands = np.repeat(best[None, :], len(span), axis=0)
            cands[:, axis] = mean[axis] + span
            best = cands[np.argmin(gmm.batch_energy(cands))]
        assert np.linalg.norm(y - best) < 1e-4


def test_propose_start_strategies():
    model = admap.sk_model(16, seed=3)
    rng = stream(11, "prop")
    draws = np.array([propose_start("uniform-random", model, rng) for _ in range(10_000)])
    # per-proposal mean spin, averaged over draws, inside the binomial CI
    assert abs(draws.mean()) <= 4 / np.sqrt(10_000)

    gen = admap.random_network(1, [8, 12], role="generator")
    desc = admap.random_network(2, [12, 6, 1], role="descriptor")
    composed = admap.compose(gen, desc)
    z1 = propose_start("latent-gaussian", composed, stream(5, "z"))
    z2 = stream(5, "z").standard_normal(8)
    assert np.array_equal(z1, z2)

    bowl = admap.QuadraticBowl(dim=3)
    box = propose_start("uniform-random", bowl, stream(6, "box"), box=(-2.0, 2.0))
    assert box.shape == (3,) and np.all(np.abs(box) <= 2.0)
    with pytest.raises(ConfigError):
        propose_start("uniform-random", bowl, rng)
    with pytest.raises(ConfigError):
        propose_start("latent-gaussian", bowl, rng)
    with pytest.raises(ConfigError):
        propose_start("gwl-chain", model, rng)
    with pytest.raises(ConfigError):
        propose_start("mystery", model, rng)


def test_propose_start_gwl_chain_locality():
    model = admap.sk_model(10, seed=4)
    cfg = GwlConfig(e_lo=-8.0, e_hi=0.0, n_bins=10, gamma=0.5, iterations=10)
    chain = GwlChain(model, cfg, seed=3)
    stride = 4
    prev = propose_start("gwl-chain", model, stream(0, "g"), gwl_chain=chain,
                         gwl_stride=stride)
    for _ in range(5):
        nxt = propose_start("gwl-chain", model, stream(0, "g"), gwl_chain=chain,
                            gwl_stride=stride)
        assert int((prev != nxt).sum()) <= stride
        prev = nxt


def test_single_bowl_maps_to_one_basin():
    bowl = admap.QuadraticBowl(dim=2, sigma2=0.5)
    params = ADParams(temperature=0.5, alpha=1.0, delta=0.05, improvement_limit=100,
                      kernel="rw-metropolis", step_size=0.05)
    cfg = AdelmConfig(params=params, burn_in=10, testing=40,
                      proposal_box=(-2.0, 2.0), seed=8)
    catalog = adelm_run(bowl, cfg)
    assert catalog.n_basins == 1
    assert catalog.metadata["testing_new_basins"] == 0
    rep = catalog.representatives[1]
    assert np.linalg.norm(rep) < 1e-3


def test_double_well_two_basins_then_one():
    dw = admap.DoubleWell1D(a=2.0, quartic_scale=2.0)
    base = ADParams(temperature=0.5, alpha=1.0, delta=0.05, improvement_limit=200,
                    kernel="rw-metropolis", step_size=0.05)
    # boundary located by the sweep; run inside and far above it
    diagram = phase_sweep(dw, np.array([-2.0]), np.array([2.0]), [0.5], 32.0, base,
                          trials=10, alpha_floor=2.0, seed=4)
    stars = [p.alpha_star for p in diagram.points if p.alpha_star is not None]
    boundary = min(stars)
    inside = AdelmConfig(params=base.replace(alpha=0.25 * boundary), burn_in=15,
                         testing=45, proposal_box=(-3.0, 3.0), seed=5)
    catalog = adelm_run(dw, inside)
    assert catalog.n_basins == 2
    reps = sorted(float(r[0]) for r in catalog_representative_states(catalog))
    assert abs(reps[0] + 2.0) < 1e-3 and abs(reps[1] - 2.0) < 1e-3
    assert catalog.metadata["testing_new_basins"] == 0
    above = AdelmConfig(params=base.replace(alpha=2.0 * boundary), burn_in=15,
                        testing=45, proposal_box=(-3.0, 3.0), seed=5)
    merged = adelm_run(dw, above)
    assert merged.n_basins == 1


def test_representative_minimality_and_assignment_rule(sk12):
    params = ADParams(temperature=0.1, alpha=3.0, delta=0.0, improvement_limit=50)
    cfg = AdelmConfig(params=params, burn_in=40, testing=80, seed=2)
    catalog = adelm_run(sk12, cfg)
    counts = catalog.counts
    assert sum(counts.values()) == len(catalog.records)
    # representative minimality, exact
    for label in catalog.labels():
        members = [r.energy for r in catalog.records if r.label == label]
        assert catalog.rep_energies[label] == min(members)
    # assignment rule replay: argmin barrier, ties to the lowest index
    for record in catalog.records:
        if record.barriers:
            expect = min(record.barriers, key=lambda j: (record.barriers[j], j))
            assert record.label == expect


def test_adelm_determinism(sk12):
    params = ADParams(temperature=0.1, alpha=3.0, delta=0.0, improvement_limit=50)
    cfg = AdelmConfig(params=params, burn_in=30, testing=60, seed=12)
    a = adelm_run(sk12, cfg)
    b = adelm_run(sk12, cfg)
    assert a.to_jsonl() == b.to_jsonl()
    assert json.dumps(a.summary(), sort_keys=True) == json.dumps(b.summary(), sort_keys=True)


def test_basin_ceiling_aborts(sk12):
    params = ADParams(temperature=0.05, alpha=0.001, delta=0.0, improvement_limit=10)
    cfg = AdelmConfig(params=params, burn_in=0, testing=60, seed=4, basin_ceiling=2)
    with pytest.raises(TuningFailure):
        adelm_run(sk12, cfg)


def test_consolidate_no_connections_keeps_labels(sk12):
    params = ADParams(temperature=0.1, alpha=3.0, delta=0.0, improvement_limit=50)
    cfg = AdelmConfig(params=params, burn_in=0, testing=60, seed=2)
    catalog = adelm_run(sk12, cfg)
    frozen = consolidate(sk12, catalog, params.replace(alpha=1e-4,
                                                       improvement_limit=5),
                         budget=1, seed=1)
    assert frozen.labels() == catalog.labels()
    assert [r.label for r in frozen.records] == [r.label for r in catalog.records]


def test_consolidate_merges_duplicates_and_keeps_lowest(sk12):
    params = ADParams(temperature=0.1, alpha=3.0, delta=0.0, improvement_limit=50)
    catalog = adelm_run(sk12, AdelmConfig(params=params, burn_in=0, testing=40, seed=2))
    # plant a duplicate representative as a fresh basin label
    labels = catalog.labels()
    dup_label = max(labels) + 1
    src = labels[0]
    catalog.representatives[dup_label] = catalog.representatives[src].copy()
    catalog.rep_energies[dup_label] = catalog.rep_energies[src]
    catalog.records.append(admap.MinimumRecord(len(catalog.records),
                                               catalog.representatives[src].copy(),
                                               catalog.rep_energies[src], dup_label))
    # frozen chains: only the exact-duplicate pair can connect (zero distance
    # is an immediate success before any sweep runs)
    frozen = params.replace(temperature=0.01, alpha=1e-6, improvement_limit=2)
    merged = consolidate(sk12, catalog, frozen, budget=1, seed=0)
    assert dup_label not in merged.labels()
    assert len(merged.labels()) == len(labels)
    assert merged.representatives[src].tolist() == catalog.representatives[src].tolist()


def test_consolidate_double_well_planted_pair():
    dw = admap.DoubleWell1D.seeded(165, a=2.0, quartic_scale=2.0)
    m1 = local_minimize(dw, np.array([1.76]))
    m2 = local_minimize(dw, np.array([2.17]))
    other = local_minimize(dw, np.array([-2.0]))
    records = [admap.MinimumRecord(0, m1, dw.energy(m1), 1),
               admap.MinimumRecord(1, m2, dw.energy(m2), 2),
               admap.MinimumRecord(2, other, dw.energy(other), 3)]
    catalog = admap.BasinCatalog(records,
                                 {1: m1, 2: m2, 3: other},
                                 {1: dw.energy(m1), 2: dw.energy(m2),
                                  3: dw.energy(other)})
    params = ADParams(temperature=0.5, alpha=1.0, delta=0.05, improvement_limit=300,
                      kernel="rw-metropolis", step_size=0.05)
    merged = consolidate(dw, catalog, params, budget=3, seed=6)
    assert merged.n_basins == 2
    # groups renumber by their smallest original label: {1,2} -> 1, {3} -> 2
    kept = min(dw.energy(m1), dw.energy(m2))
    assert merged.rep_energies[1] == pytest.approx(kept)
    assert dw.energy(merged.representatives[1]) == pytest.approx(kept)
    assert np.array_equal(merged.representatives[2], other)


def test_mirror_consistency_sk():
    model = admap.sk_model(12, seed=106)
    params = ADParams(temperature=0.1, alpha=3.0, delta=0.0, improvement_limit=50)
    catalog = adelm_run(model, AdelmConfig(params=params, burn_in=100, testing=200,
                                           seed=9))
    reps = catalog_representative_states(catalog)
    # mirrors of representatives are themselves 1-flip stable
    for rep in reps:
        mirrored = local_minimize(model, -rep)
        assert np.array_equal(mirrored, -rep)
    # with a doubled budget, most basins see their mirror partner mapped
    doubled = adelm_run(model, AdelmConfig(params=params, burn_in=200, testing=400,
                                           seed=9))
    drs = catalog_representative_states(doubled)
    keys = {tuple(np.asarray(r).tolist()) for r in drs}
    mirrored = sum(tuple((-np.asarray(r)).tolist()) in keys for r in drs)
    assert mirrored / len(drs) >= 0.7


def test_testing_phase_convergence_on_desk_instances():
    # two-phase budget scaled to the instance: testing discovers nothing new
    model = admap.sk_model(12, seed=106)
    params = ADParams(temperature=0.1, alpha=3.04, delta=0.0, improvement_limit=50)
    catalog = adelm_run(model, AdelmConfig(params=params, burn_in=100, testing=150,
                                           seed=3))
    assert catalog.metadata["testing_new_basins"] == 0

    dw = admap.DoubleWell1D(a=2.0, quartic_scale=2.0)
    dw_params = ADParams(temperature=0.5, alpha=2.0, delta=0.05,
                         improvement_limit=200, kernel="rw-metropolis",
                         step_size=0.05)
    dw_catalog = adelm_run(dw, AdelmConfig(params=dw_params, burn_in=15, testing=45,
                                           proposal_box=(-3.0, 3.0), seed=5))
    assert dw_catalog.metadata["testing_new_basins"] == 0


def test_tune_heuristic_identical_minima_empty_window():
    model = admap.sk_model(10, seed=4)
    minima, _ = admap.flip_stable_minima(model)
    params = ADParams(temperature=0.3, alpha=1.0, delta=0.0, improvement_limit=30)
    window = tune_heuristic(model, minima[0], minima[0], 0.2, [0.3], [1.0, 4.0],
                            params, trials=2, seed=1)
    assert window.empty


def test_tune_heuristic_window_below_cross_boundary():
    dw = admap.DoubleWell1D(a=2.0, quartic_scale=2.0)
    left = local_minimize(dw, np.array([-2.0]))
    right = local_minimize(dw, np.array([2.0]))
    params = ADParams(temperature=0.5, alpha=1.0, delta=0.05, improvement_limit=200,
                      kernel="rw-metropolis", step_size=0.05)
    diagram = phase_sweep(dw, left, right, [0.5], 32.0, params, trials=10,
                          alpha_floor=2.0, seed=4)
    boundary = min(p.alpha_star for p in diagram.points if p.alpha_star is not None)
    alphas = [0.5, 1.0, 2.0, 4.0, boundary * 2]
    window = tune_heuristic(dw, left, right, 0.3, [0.5], alphas, params,
                            trials=3, seed=2)
    assert not window.empty
    assert window.alpha_upper_edge(0.5) < boundary


def test_tune_heuristic_zero_perturbation():
    dw = admap.DoubleWell1D(a=2.0, quartic_scale=2.0)
    left = local_minimize(dw, np.array([-2.0]))
    right = local_minimize(dw, np.array([2.0]))
    params = ADParams(temperature=0.5, alpha=1.0, delta=0.05, improvement_limit=150,
                      kernel="rw-metropolis", step_size=0.05)
    window = tune_heuristic(dw, left, right, 0.0, [0.5], [1.0, 4.0], params,
                            trials=2, seed=3)
    rel_a, rel_b = window.relatives
    assert np.array_equal(rel_a, left) and np.array_equal(rel_b, right)
    # self-trials trivially succeed, so the window is the set of alphas
    # where the cross pair fails both ways
    assert (0.5, 1.0) in window.points and (0.5, 4.0) in window.points


def test_catalog_serialization(sk12):
    params = ADParams(temperature=0.1, alpha=3.0, delta=0.0, improvement_limit=50)
    catalog = adelm_run(sk12, AdelmConfig(params=params, burn_in=10, testing=30, seed=2))
    rows = [json.loads(line) for line in catalog.to_jsonl().splitlines()]
    assert len(rows) == 40
    assert {"proposal", "label", "energy", "state", "barriers"} <= set(rows[0])
    summary = catalog.summary()
    assert summary["n_records"] == 40
    total = sum(b["count"] for b in summary["basins"].values())
    assert total == 40

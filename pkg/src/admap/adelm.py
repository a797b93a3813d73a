"""The landscape-mapping loop: propose, minimize, group by attraction-diffusion.

The first minimum founds basin 1.  Every later minimum runs magnetized
trials in both directions against each basin representative; the set of
reachable representatives with their path barriers decides membership
(lowest barrier wins, ties to the lowest basin index), and an unreachable
minimum founds a new basin.  Representatives are always the lowest-energy
member seen.  A burn-in phase is consolidated (representatives that can
reach each other merge) before the testing phase, whose count of newly
founded basins is the convergence signal.
"""

from __future__ import annotations

import io
import json
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ad import ADParams, ad_trial
from .errors import ConfigError, TuningFailure
from .landscapes import EnergyModel
from .minimize import local_minimize
from .networks import ComposedModel
from .rng import stream


@dataclass
class MinimumRecord:
    proposal_index: int
    state: np.ndarray
    energy: float
    label: int
    barriers: dict = field(default_factory=dict)  # basin label -> barrier at assignment


@dataclass
class BasinCatalog:
    records: list
    representatives: dict  # label -> state
    rep_energies: dict  # label -> energy
    metadata: dict = field(default_factory=dict)

    @property
    def n_basins(self) -> int:
        return len(self.representatives)

    @property
    def counts(self) -> Counter:
        return Counter(r.label for r in self.records)

    def labels(self) -> list:
        return sorted(self.representatives)

    def remapped(self, mapping: dict) -> "BasinCatalog":
        """Relabel everything through ``mapping`` (old label -> new label)."""
        records = []
        for r in self.records:
            barriers: dict = {}
            for old, b in r.barriers.items():
                new = mapping[old]
                barriers[new] = min(b, barriers.get(new, math.inf))
            records.append(MinimumRecord(r.proposal_index, r.state, r.energy,
                                         mapping[r.label], barriers))
        reps = {}
        rep_e = {}
        for old, state in self.representatives.items():
            new = mapping[old]
            if new not in rep_e or self.rep_energies[old] < rep_e[new]:
                reps[new] = state
                rep_e[new] = self.rep_energies[old]
        return BasinCatalog(records, reps, rep_e, dict(self.metadata))

    def to_jsonl(self) -> str:
        buf = io.StringIO()
        for r in self.records:
            buf.write(json.dumps({
                "proposal": r.proposal_index,
                "label": r.label,
                "energy": float(r.energy),
                "state": np.asarray(r.state).tolist(),
                "barriers": {str(k): float(v) for k, v in sorted(r.barriers.items())},
            }) + "\n")
        return buf.getvalue()

    def summary(self) -> dict:
        counts = self.counts
        return {
            "basins": {
                str(label): {
                    "state": np.asarray(self.representatives[label]).tolist(),
                    "energy": float(self.rep_energies[label]),
                    "count": counts.get(label, 0),
                }
                for label in self.labels()
            },
            "n_records": len(self.records),
            "metadata": self.metadata,
        }


@dataclass(frozen=True)
class AdelmConfig:
    params: ADParams
    burn_in: int = 0
    testing: int = 100
    proposal: str = "uniform-random"
    proposal_box: tuple | None = None  # (lo, hi) for continuous uniform proposals
    gwl_stride: int = 10  # elementary steps between gwl-chain proposals
    consolidation_trials: int = 3
    basin_ceiling: int | None = None  # default 10 * sqrt(total proposals)
    seed: int = 0
    workers: int = 1
    use_fastpath: bool = True

    @property
    def total(self) -> int:
        return self.burn_in + self.testing

    @property
    def ceiling(self) -> int:
        if self.basin_ceiling is not None:
            return self.basin_ceiling
        return max(8, math.ceil(10.0 * math.sqrt(max(self.total, 1))))


def propose_start(strategy: str, model: EnergyModel, rng: np.random.Generator,
                  box=None, gwl_chain=None, gwl_stride: int = 10) -> np.ndarray:
    """Draw a proposal state for a minimum search."""
    if strategy == "uniform-random":
        if model.kind == "discrete":
            idx = rng.integers(0, len(model.palette), size=model.dim)
            return model.palette[idx]
        if box is None:
            raise ConfigError("uniform-random proposals on a continuous model need a box")
        lo, hi = box
        return rng.uniform(lo, hi, size=model.dim)
    if strategy == "latent-gaussian":
        if not isinstance(model, ComposedModel):
            raise ConfigError("latent-gaussian proposals need a composed latent model")
        return rng.standard_normal(model.latent_dim)
    if strategy == "gwl-chain":
        if gwl_chain is None:
            raise ConfigError("gwl-chain proposals need a running GWL chain")
        return gwl_chain.advance(gwl_stride)
    raise ConfigError(f"unknown proposal strategy {strategy!r}")


def _group_candidates(model, y, reps, params, seed, n, use_fastpath, workers):
    """AD trials in both directions against every representative."""
    labels = sorted(reps)

    def probe(j):
        barriers = []
        out = ad_trial(model, y, reps[j], params,
                       rng=stream(seed, "adelm", n, j, "out"),
                       use_fastpath=use_fastpath)
        if out.success:
            barriers.append(out.barrier)
        back = ad_trial(model, reps[j], y, params,
                        rng=stream(seed, "adelm", n, j, "back"),
                        use_fastpath=use_fastpath)
        if back.success:
            barriers.append(back.barrier)
        return j, (min(barriers) if barriers else None)

    if workers > 1 and len(labels) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(probe, labels))
    else:
        results = [probe(j) for j in labels]
    return {j: b for j, b in results if b is not None}


def adelm_run(model: EnergyModel, config: AdelmConfig, gwl_chain=None) -> BasinCatalog:
    """Run the full mapping and return the catalog.

    Proposals are processed sequentially because the representative set
    mutates between them; the per-representative trials inside one
    proposal parallelize over ``config.workers``.
    """
    params = config.params
    rng_prop = stream(config.seed, "proposal")
    catalog = BasinCatalog([], {}, {}, {})
    next_label = 1
    testing_new_basins = 0
    burn_in_consolidated = False

    for n in range(config.total):
        x = propose_start(config.proposal, model, rng_prop, box=config.proposal_box,
                          gwl_chain=gwl_chain, gwl_stride=config.gwl_stride)
        y = local_minimize(model, x, use_fastpath=config.use_fastpath)
        e_y = model.energy(y)

        if not catalog.representatives:
            label = next_label
            next_label += 1
            catalog.representatives[label] = np.array(y, copy=True)
            catalog.rep_energies[label] = e_y
            barriers = {}
        else:
            barriers = _group_candidates(model, y, catalog.representatives, params,
                                         config.seed, n, config.use_fastpath,
                                         config.workers)
            if not barriers:
                label = next_label
                next_label += 1
                catalog.representatives[label] = np.array(y, copy=True)
                catalog.rep_energies[label] = e_y
                if burn_in_consolidated or config.burn_in == 0:
                    testing_new_basins += 1
            else:
                label = min(barriers, key=lambda j: (barriers[j], j))
                if e_y < catalog.rep_energies[label]:
                    catalog.representatives[label] = np.array(y, copy=True)
                    catalog.rep_energies[label] = e_y
        catalog.records.append(MinimumRecord(n, np.array(y, copy=True), e_y, label,
                                             barriers))
        if catalog.n_basins > config.ceiling:
            raise TuningFailure(
                f"{catalog.n_basins} basins after {n + 1} proposals exceeds the ceiling "
                f"{config.ceiling}; (T, alpha) look mistuned for this landscape"
            )
        if n + 1 == config.burn_in and config.burn_in > 0:
            catalog = consolidate(model, catalog, params,
                                  budget=config.consolidation_trials,
                                  seed=config.seed, workers=config.workers,
                                  use_fastpath=config.use_fastpath)
            next_label = max(catalog.representatives, default=0) + 1
            burn_in_consolidated = True

    catalog.metadata.update({
        "seed": config.seed,
        "burn_in": config.burn_in,
        "testing": config.testing,
        "proposal": config.proposal,
        "params": {
            "temperature": params.temperature,
            "alpha": params.alpha,
            "delta": params.delta,
            "improvement_limit": params.improvement_limit,
            "max_iters": params.iteration_cap,
            "kernel": params.kernel,
            "step_size": params.step_size,
        },
        "testing_new_basins": testing_new_basins,
        "model": model.name,
    })
    return catalog


class _UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def consolidate(model: EnergyModel, catalog: BasinCatalog, params: ADParams,
                budget: int = 3, seed: int = 0, workers: int = 1,
                use_fastpath: bool = True) -> BasinCatalog:
    """Merge representatives that can reach each other under the run's (T, alpha).

    Runs up to ``budget`` trials per direction for every representative
    pair; any success merges the pair (transitively, via union-find).  The
    lowest-energy representative survives for each merged group and labels
    are renumbered compactly.
    """
    labels = catalog.labels()
    uf = _UnionFind(labels)
    pairs = [(a, b) for ai, a in enumerate(labels) for b in labels[ai + 1:]]

    def connected(pair):
        a, b = pair
        for direction, (s, t) in (("out", (a, b)), ("back", (b, a))):
            for trial in range(budget):
                res = ad_trial(model, catalog.representatives[s],
                               catalog.representatives[t], params,
                               rng=stream(seed, "consolidate", a, b, direction, trial),
                               use_fastpath=use_fastpath)
                if res.success:
                    return pair, True
        return pair, False

    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(connected, pairs))
    else:
        results = [connected(p) for p in pairs]
    for (a, b), ok in results:
        if ok:
            uf.union(a, b)

    groups: dict = {}
    for label in labels:
        groups.setdefault(uf.find(label), []).append(label)
    mapping = {}
    for new, root in enumerate(sorted(groups), start=1):
        for old in groups[root]:
            mapping[old] = new
    return catalog.remapped(mapping)


@dataclass
class TuneWindow:
    """Grid points (T, alpha) where perturbed relatives connect but the pair stays apart."""

    points: list  # (temperature, alpha)
    relatives: tuple

    @property
    def empty(self) -> bool:
        return not self.points

    def alpha_upper_edge(self, temperature: float) -> float | None:
        alphas = [a for t, a in self.points if t == temperature]
        return max(alphas) if alphas else None


def tune_heuristic(model: EnergyModel, min_a: np.ndarray, min_b: np.ndarray,
                   perturb_scale: float, t_grid, alpha_grid, params: ADParams,
                   trials: int = 3, seed: int = 0,
                   use_fastpath: bool = True) -> TuneWindow:
    """Coarse (T, alpha) window where mapping should work for this pair.

    Perturbs each minimum into a nearby relative (displace, re-minimize)
    and keeps the grid points where diffusion connects each minimum with
    its own relative while failing between the two originals in both
    directions.  An empty window means the pair is inseparable at the
    tested resolution.
    """
    rng = stream(seed, "tune-perturb")

    def relative(state):
        if model.kind == "discrete":
            y = np.array(state, copy=True)
            flips = rng.random(model.dim) < perturb_scale
            for i in np.nonzero(flips)[0]:
                others = [v for v in model.palette if v != y[i]]
                y[i] = others[rng.integers(0, len(others))]
        else:
            y = np.asarray(state, float) + perturb_scale * rng.standard_normal(model.dim)
        return local_minimize(model, y, use_fastpath=use_fastpath)

    rel_a = relative(min_a)
    rel_b = relative(min_b)

    def connects(s, t, p, tag):
        for trial in range(trials):
            res = ad_trial(model, s, t, p, rng=stream(seed, "tune", tag, trial),
                           use_fastpath=use_fastpath)
            if res.success:
                return True
        return False

    points = []
    for ti, temperature in enumerate(t_grid):
        for ai, alpha in enumerate(alpha_grid):
            p = params.replace(temperature=float(temperature), alpha=float(alpha))
            if not connects(min_a, rel_a, p, f"aa-{ti}-{ai}"):
                continue
            if not connects(min_b, rel_b, p, f"bb-{ti}-{ai}"):
                continue
            if connects(min_a, min_b, p, f"ab-{ti}-{ai}"):
                continue
            if connects(min_b, min_a, p, f"ba-{ti}-{ai}"):
                continue
            points.append((float(temperature), float(alpha)))
    return TuneWindow(points=points, relatives=(rel_a, rel_b))


def catalog_representative_states(catalog: BasinCatalog) -> list:
    """Representatives ordered by basin label."""
    return [catalog.representatives[label] for label in catalog.labels()]

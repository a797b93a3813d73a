"""Generalized Wang-Landau mapping over (basin, energy-bin) visit counts.

A single-flip chain is driven by a time-inhomogeneous Metropolis rule
whose acceptance is tilted by the difference in visit counts between the
current and proposed (basin, bin) cells, pushing the chain toward a flat
histogram across every basin of attraction within the configured energy
spectrum.  Basins are keyed by the exact greedy-descent minimum of the
visited state (memoized), which both discovers minima and lets adjacent
chain states that descend to different minima be recorded as transition
pairs for later ridge refinement.
"""

from __future__ import annotations

import io
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RejectedInput, Unsupported
from .landscapes import EnergyModel
from .minimize import local_minimize
from .rng import stream


@dataclass(frozen=True)
class GwlConfig:
    e_lo: float
    e_hi: float
    n_bins: int = 50
    gamma: float = 1.0
    iterations: int = 100_000
    flatness_stride: int = 10_000
    memo_capacity: int = 1_000_000
    probe_steps: int = 2_000

    def __post_init__(self):
        if not self.e_lo < self.e_hi:
            raise RejectedInput("energy spectrum needs e_lo < e_hi")
        if self.n_bins < 1:
            raise RejectedInput("need at least one energy bin")
        if self.gamma < 0:
            raise RejectedInput("gamma must be non-negative")


def gwl_acceptance(log_target_ratio: float, n_cur: float, n_prop: float,
                   gamma: float) -> float:
    """Acceptance probability with the visit-count tilt (symmetric proposals)."""
    return min(1.0, math.exp(min(log_target_ratio + gamma * (n_cur - n_prop), 50.0)))


@dataclass
class GwlResult:
    minima: dict  # basin key (bytes) -> (state, energy)
    histogram: dict  # basin key -> visit counts, length n_bins + 2 (clamp bins at 0, -1)
    transitions: list  # (state_a, state_b) adjacent accepted pairs straddling basins
    flatness: list  # (step, max/min nonzero in-range visit ratio)
    steps: int
    config: GwlConfig

    def minima_sorted(self, within_spectrum: bool = True):
        items = [(e, s) for s, e in self.minima.values()
                 if not within_spectrum or self.config.e_lo <= e <= self.config.e_hi]
        items.sort(key=lambda t: (t[0], tuple(np.asarray(t[1]).tolist())))
        return items

    def minima_csv(self) -> str:
        buf = io.StringIO()
        buf.write("energy,state\n")
        for e, s in self.minima_sorted():
            buf.write(f"{float(e)!r},\"{' '.join(str(int(v)) for v in s)}\"\n")
        return buf.getvalue()


class GwlChain:
    """Persistent single-flip GWL chain; also serves as a proposal source."""

    def __init__(self, model: EnergyModel, config: GwlConfig, seed: int = 0,
                 x0: np.ndarray | None = None, use_fastpath: bool = True):
        if model.kind != "discrete":
            raise Unsupported("GWL runs on discrete models")
        self.model = model
        self.config = config
        self.rng = stream(seed, "gwl-chain")
        self.use_fastpath = use_fastpath
        if x0 is None:
            idx = self.rng.integers(0, len(model.palette), size=model.dim)
            x0 = model.palette[idx]
        self.state = np.array(model.check_state(x0), copy=True)
        self.energy = model.energy(self.state)
        self._memo: OrderedDict = OrderedDict()
        self._basin_ids: dict = {}
        self.minima: dict = {}
        self.histogram: dict = {}
        self.transitions: list = []
        self._transition_seen: set = set()
        self.flatness: list = []
        self.steps = 0
        self._in_range_visits = 0
        self._cur_basin = self._basin_key(self.state)

    # -- basin bookkeeping ------------------------------------------------

    def _descend(self, x: np.ndarray):
        y = local_minimize(self.model, x, use_fastpath=self.use_fastpath)
        return y

    def _basin_key(self, x: np.ndarray) -> bytes:
        key = np.ascontiguousarray(x).tobytes()
        memo = self._memo
        hit = memo.get(key)
        if hit is not None:
            memo.move_to_end(key)
            return hit
        minimum = self._descend(x)
        basin = np.ascontiguousarray(minimum).tobytes()
        if basin not in self.minima:
            self.minima[basin] = (np.array(minimum, copy=True),
                                  self.model.energy(minimum))
            self.histogram[basin] = np.zeros(self.config.n_bins + 2, dtype=np.int64)
            self._basin_ids[basin] = len(self._basin_ids)
        memo[key] = basin
        if len(memo) > self.config.memo_capacity:
            memo.popitem(last=False)
        return basin

    def _bin(self, energy: float) -> int:
        cfg = self.config
        if energy < cfg.e_lo:
            return 0
        if energy > cfg.e_hi:
            return cfg.n_bins + 1
        frac = (energy - cfg.e_lo) / (cfg.e_hi - cfg.e_lo)
        return min(1 + int(frac * cfg.n_bins), cfg.n_bins)

    # -- chain ------------------------------------------------------------

    def step(self) -> None:
        model = self.model
        rng = self.rng
        i = int(rng.integers(0, model.dim))
        palette = model.palette
        cur = self.state[i]
        k = int(rng.integers(0, len(palette) - 1))
        others = [v for v in palette if v != cur]
        v = others[k]
        delta = model.coordinate_delta(self.state, i, v)
        proposal = np.array(self.state, copy=True)
        proposal[i] = v
        prop_basin = self._basin_key(proposal)
        n_cur = self.histogram[self._cur_basin][self._bin(self.energy)]
        n_prop = self.histogram[prop_basin][self._bin(self.energy + delta)]
        prob = gwl_acceptance(-delta, n_cur, n_prop, self.config.gamma)
        if rng.random() < prob:
            if prop_basin != self._cur_basin:
                pair_key = (np.ascontiguousarray(self.state).tobytes(),
                            np.ascontiguousarray(proposal).tobytes())
                if pair_key not in self._transition_seen:
                    self._transition_seen.add(pair_key)
                    self.transitions.append((np.array(self.state, copy=True),
                                             np.array(proposal, copy=True)))
            self.state = proposal
            self.energy += delta
            self._cur_basin = prop_basin
        self.steps += 1
        b = self._bin(self.energy)
        self.histogram[self._cur_basin][b] += 1
        if 1 <= b <= self.config.n_bins:
            self._in_range_visits += 1
        if self.steps % self.config.flatness_stride == 0:
            self.flatness.append((self.steps, self._flatness_ratio()))

    def _flatness_ratio(self) -> float:
        counts = np.concatenate([h[1:-1] for h in self.histogram.values()])
        nonzero = counts[counts > 0]
        if len(nonzero) == 0:
            return math.inf
        return float(nonzero.max() / nonzero.min())

    def advance(self, n_steps: int) -> np.ndarray:
        for _ in range(n_steps):
            self.step()
        return np.array(self.state, copy=True)

    def memo_items(self, limit: int | None = None):
        items = list(self._memo.items())
        return items if limit is None else items[:limit]

    def result(self) -> GwlResult:
        return GwlResult(minima=self.minima, histogram=self.histogram,
                         transitions=self.transitions, flatness=self.flatness,
                         steps=self.steps, config=self.config)


def gwl_run(model: EnergyModel, config: GwlConfig, seed: int = 0,
            x0: np.ndarray | None = None, use_fastpath: bool = True) -> GwlResult:
    """Run a fresh GWL chain for ``config.iterations`` steps.

    Raises ConfigError when a probe prefix of the run never touches the
    configured spectrum, which means every reachable energy is clamped.
    """
    chain = GwlChain(model, config, seed=seed, x0=x0, use_fastpath=use_fastpath)
    probe = min(config.probe_steps, config.iterations)
    chain.advance(probe)
    if probe >= config.probe_steps and chain._in_range_visits == 0:
        raise ConfigError(
            f"no state visited in the first {probe} steps fell inside the spectrum "
            f"[{config.e_lo}, {config.e_hi}]; the spectrum excludes reachable energies"
        )
    chain.advance(config.iterations - probe)
    return chain.result()

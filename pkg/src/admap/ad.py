"""Attraction-diffusion trials, metastable-boundary sweeps, and AD interpolation.

A trial runs a magnetized local chain from a start state toward a target
minimum.  Reaching within the distance resolution ``delta`` is success and
certifies that the two states share a metastable basin at the trial's
(T, alpha); failing to improve the best distance for ``improvement_limit``
consecutive iterations is failure.  The running maximum of the raw energy
along a successful path upper-bounds the minimum barrier between the pair.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import fastpath
from .errors import RejectedInput, Unsupported
from .landscapes import EnergyModel, GaussianMixture, QuadraticSpinModel, state_distance
from .rng import stream
from .samplers import KERNELS, Magnetization, gibbs_sweep, langevin_step, rw_metropolis_step

_PATH_RECORD_CAP = 2_000_000  # elementary moves kept when recording a path


@dataclass(frozen=True)
class ADParams:
    """Knobs of one attraction-diffusion trial."""

    temperature: float
    alpha: float
    delta: float = 0.0
    improvement_limit: int = 50
    max_iters: int | None = None  # defaults to 200 * improvement_limit
    kernel: str = "gibbs"
    step_size: float = 0.01

    def __post_init__(self):
        if self.temperature <= 0:
            raise RejectedInput("temperature must be positive")
        if self.alpha < 0:
            raise RejectedInput("alpha must be non-negative")
        if self.delta < 0:
            raise RejectedInput("distance resolution must be non-negative")
        if self.improvement_limit < 1:
            raise RejectedInput("improvement limit must be at least 1")
        if self.kernel not in KERNELS:
            raise RejectedInput(f"unknown kernel {self.kernel!r}")

    @property
    def iteration_cap(self) -> int:
        return self.max_iters if self.max_iters is not None else 200 * self.improvement_limit

    def replace(self, **kw) -> "ADParams":
        return dataclasses.replace(self, **kw)


@dataclass
class ADResult:
    """Outcome of one trial.  ``barrier`` is set on success only."""

    success: bool
    iterations: int
    best_distance: float
    barrier: float | None
    terminal: np.ndarray
    path_states: list | None = None
    path_energies: np.ndarray | None = None
    path_truncated: bool = False

    def path_jsonl(self) -> str:
        if self.path_states is None:
            raise RejectedInput("trial was run without path recording")
        buf = io.StringIO()
        for state, energy in zip(self.path_states, self.path_energies):
            buf.write(json.dumps({"state": np.asarray(state).tolist(),
                                  "energy": float(energy)}) + "\n")
        return buf.getvalue()


def _check_kernel(model: EnergyModel, kernel: str) -> None:
    if kernel == "gibbs" and model.kind != "discrete":
        raise Unsupported("gibbs kernel needs a discrete model")
    if kernel in ("rw-metropolis", "langevin") and model.kind != "continuous":
        raise Unsupported(f"{kernel} kernel needs a continuous model")


def _spin_fastpath_ok(model: EnergyModel, params: ADParams) -> bool:
    return isinstance(model, QuadraticSpinModel) and params.kernel == "gibbs"


def ad_trial(model: EnergyModel, start: np.ndarray, target: np.ndarray,
             params: ADParams, seed: int = 0, rng: np.random.Generator | None = None,
             record_path: bool = False, use_fastpath: bool = True) -> ADResult:
    """One magnetized chain from ``start`` toward ``target``.

    Pure given (model, params, seed): trials parallelize over seeds.  With
    ``record_path`` every elementary accepted move is kept, so discrete
    paths step one coordinate at a time.
    """
    start = np.array(model.check_state(start), copy=True)
    target = np.array(model.check_state(target), copy=True)
    _check_kernel(model, params.kernel)
    rng = stream(seed, "ad-trial") if rng is None else rng

    e_start = model.energy(start)
    d1 = state_distance(start, target)
    if d1 <= params.delta:
        return ADResult(True, 0, d1, max(e_start, model.energy(target)), start,
                        path_states=[start.copy()] if record_path else None,
                        path_energies=np.array([e_start]) if record_path else None)

    if use_fastpath and _spin_fastpath_ok(model, params):
        return _ad_trial_spin(model, start, target, params, rng, record_path, e_start)
    if use_fastpath and isinstance(model, GaussianMixture) and params.kernel == "langevin":
        return _ad_trial_gmm(model, start, target, params, rng, record_path, e_start)

    mag = Magnetization(target=target.astype(float), alpha=params.alpha)
    x = start
    energy = e_start
    max_energy = e_start
    path = [(start.copy(), e_start)] if record_path else None
    d_best = d1
    m = 0
    iters = 0
    while d1 > params.delta and m < params.improvement_limit and iters < params.iteration_cap:
        if params.kernel == "gibbs":
            x, energy, sweep_max = gibbs_sweep(model, x, params.temperature, rng, mag,
                                               state_energy=energy, path=path)
            max_energy = max(max_energy, sweep_max)
        elif params.kernel == "rw-metropolis":
            x, energy, accepted = rw_metropolis_step(model, x, params.temperature,
                                                     params.step_size, rng, mag,
                                                     state_energy=energy)
            if accepted:
                max_energy = max(max_energy, energy)
                if path is not None:
                    path.append((x.copy(), energy))
        else:
            x, energy = langevin_step(model, x, params.temperature, params.step_size,
                                      rng, mag)
            max_energy = max(max_energy, energy)
            if path is not None:
                path.append((x.copy(), energy))
        d1 = state_distance(x, target)
        iters += 1
        if d1 >= d_best:
            m += 1
        else:
            m = 0
            d_best = d1
    success = d1 <= params.delta
    barrier = max(max_energy, model.energy(target)) if success else None
    result = ADResult(success, iters, d_best, barrier, x)
    if record_path:
        result.path_states = [s for s, _ in path]
        result.path_energies = np.array([e for _, e in path])
    return result


def _ad_trial_spin(model: QuadraticSpinModel, start, target, params: ADParams,
                   rng, record_path: bool, e_start: float) -> ADResult:
    if record_path:
        cap = min(params.iteration_cap * model.dim, _PATH_RECORD_CAP)
        rec_i = np.empty(cap, dtype=np.int64)
        rec_v = np.empty(cap, dtype=np.float64)
        rec_e = np.empty(cap, dtype=np.float64)
    else:
        rec_i = np.empty(0, dtype=np.int64)
        rec_v = np.empty(0, dtype=np.float64)
        rec_e = np.empty(0, dtype=np.float64)
    success, iters, d_best, max_energy, sigma, rec_n = fastpath.spin_ad_trial(
        model.couplings, model.field, model.temperature,
        start.astype(np.float64), target.astype(np.float64), e_start,
        params.temperature, params.alpha, params.delta,
        params.improvement_limit, params.iteration_cap, rng, rec_i, rec_v, rec_e)
    terminal = sigma.astype(start.dtype)
    barrier = max(max_energy, model.energy(target)) if success else None
    result = ADResult(bool(success), int(iters), float(d_best), barrier, terminal)
    if record_path:
        if rec_n < 0:
            result.path_truncated = True
        else:
            states = [start.copy()]
            energies = [e_start]
            cursor = start.copy()
            for k in range(rec_n):
                cursor[rec_i[k]] = rec_v[k]
                states.append(cursor.copy())
                energies.append(rec_e[k])
            result.path_states = states
            result.path_energies = np.array(energies)
    return result


def _ad_trial_gmm(model: GaussianMixture, start, target, params: ADParams,
                  rng, record_path: bool, e_start: float) -> ADResult:
    cap = min(params.iteration_cap, _PATH_RECORD_CAP) if record_path else 0
    path_out = np.empty((cap, model.dim))
    path_e_out = np.empty(cap)
    success, iters, d_best, max_energy, x, n_path = fastpath.gmm_langevin_ad_trial(
        model.means, model.precisions, model.log_norms,
        start.astype(np.float64), target.astype(np.float64), e_start,
        params.temperature, params.alpha, params.step_size, params.delta,
        params.improvement_limit, params.iteration_cap, rng, path_out, path_e_out)
    barrier = max(max_energy, model.energy(target)) if success else None
    result = ADResult(bool(success), int(iters), float(d_best), barrier, x)
    if record_path:
        result.path_states = [start.astype(float).copy()] + [
            path_out[k].copy() for k in range(n_path)]
        result.path_energies = np.concatenate([[e_start], path_e_out[:n_path]])
        result.path_truncated = n_path < iters
    return result


# ---------------------------------------------------------------------------
# Phase sweeps over (T, alpha)
# ---------------------------------------------------------------------------


@dataclass
class PhasePoint:
    """Boundary estimate for one temperature and direction."""

    temperature: float
    direction: str
    alpha_star: float | None
    flag: str  # "ok", "above_range" (no success at alpha_init) or "below_range"
    min_barrier: float | None
    ladder: list = field(default_factory=list)  # (alpha, successes) high to low

    @property
    def boundary_successes(self) -> int:
        for alpha, count in self.ladder:
            if self.alpha_star is not None and alpha == self.alpha_star:
                return count
        return 0


@dataclass
class PhaseDiagram:
    points: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("T,direction,alpha_star,min_barrier,successes\n")
        for p in self.points:
            a = "" if p.alpha_star is None else repr(float(p.alpha_star))
            b = "" if p.min_barrier is None else repr(float(p.min_barrier))
            buf.write(f"{float(p.temperature)!r},{p.direction},{a},{b},{p.boundary_successes}\n")
        return buf.getvalue()

    def point(self, temperature: float, direction: str) -> PhasePoint:
        for p in self.points:
            if p.temperature == temperature and p.direction == direction:
                return p
        raise KeyError((temperature, direction))


def phase_sweep(model: EnergyModel, min_a: np.ndarray, min_b: np.ndarray,
                t_grid, alpha_init: float, params: ADParams,
                decrement: float = 0.03, trials: int = 20,
                alpha_floor: float | None = None, seed: int = 0,
                use_fastpath: bool = True) -> PhaseDiagram:
    """Descend alpha from ``alpha_init`` by ``decrement`` per rung until all
    trials fail, for every temperature and both directions.

    The boundary alpha* is the last rung with at least one success; the
    minimum barrier across all successful trials at any rung is recorded.
    """
    if np.array_equal(min_a, min_b):
        raise RejectedInput("phase_sweep needs two distinct minima")
    floor = alpha_init * 0.01 if alpha_floor is None else alpha_floor
    points = []
    for ti, temperature in enumerate(t_grid):
        for direction, (s, t) in (("a->b", (min_a, min_b)), ("b->a", (min_b, min_a))):
            alpha = alpha_init
            alpha_star = None
            min_barrier = math.inf
            ladder = []
            rung = 0
            while True:
                p = params.replace(temperature=float(temperature), alpha=float(alpha))
                successes = 0
                for trial in range(trials):
                    rng = stream(seed, "phase-sweep", ti, direction, rung, trial)
                    res = ad_trial(model, s, t, p, rng=rng, use_fastpath=use_fastpath)
                    if res.success:
                        successes += 1
                        min_barrier = min(min_barrier, res.barrier)
                ladder.append((float(alpha), successes))
                if successes == 0:
                    break
                alpha_star = float(alpha)
                if alpha <= floor:
                    break
                alpha *= 1.0 - decrement
                rung += 1
            if alpha_star is None:
                flag = "above_range"
            elif alpha_star <= floor:
                flag = "below_range"
            else:
                flag = "ok"
            points.append(PhasePoint(float(temperature), direction, alpha_star, flag,
                                     None if math.isinf(min_barrier) else min_barrier,
                                     ladder))
    return PhaseDiagram(points)


def ad_interpolate(model: EnergyModel, a: np.ndarray, b: np.ndarray, params: ADParams,
                   retries: int = 20, seed: int = 0,
                   use_fastpath: bool = True) -> ADResult:
    """Lowest-barrier successful AD path from ``a`` to ``b``.

    Works best with alpha just above the metastable boundary for the pair
    (find it with phase_sweep); all-retries failure returns a no-path
    result rather than raising, signalling alpha below the boundary.
    """
    best = None
    last = None
    for r in range(retries):
        rng = stream(seed, "ad-interpolate", r)
        res = ad_trial(model, a, b, params, rng=rng, record_path=True,
                       use_fastpath=use_fastpath)
        last = res
        if res.success and not res.path_truncated:
            if best is None or res.barrier < best.barrier:
                best = res
    if best is not None:
        return best
    return ADResult(False, last.iterations if last else 0,
                    last.best_distance if last else math.inf, None,
                    last.terminal if last else np.array(a))

"""Barrier estimators and pairwise barrier-matrix assembly.

Each estimator returns a PathTrace whose barrier is the maximum raw
energy over its states; the matrix assembly runs every requested method
per representative pair and keeps the lowest barrier with its method tag.
On enumerable instances all of these sandwich between the exact minimax
barrier (from the brute-force oracle) and the 1D linear scan.
"""

from __future__ import annotations

import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ad import ADParams, ad_interpolate, phase_sweep
from .errors import DivergenceError, RejectedInput, Unsupported
from .landscapes import EnergyModel
from .minimize import local_minimize

METHODS = ("linear1d", "greedy-discrete", "ridge", "neb", "dneb", "ad")


@dataclass
class PathTrace:
    states: list
    energies: np.ndarray
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise RejectedInput(f"unknown path method {self.method!r}")
        if len(self.states) != len(self.energies):
            raise RejectedInput("states and energies disagree in length")

    @property
    def barrier(self) -> float:
        return float(np.max(self.energies))

    def jsonl(self) -> str:
        import json
        buf = io.StringIO()
        for s, e in zip(self.states, self.energies):
            buf.write(json.dumps({"state": np.asarray(s).tolist(),
                                  "energy": float(e)}) + "\n")
        return buf.getvalue()


def _interpolation_base(model: EnergyModel):
    """Continuous model to scan along segments; discretized wrappers expose one."""
    if model.kind == "continuous":
        return model
    base = getattr(model, "continuous_base", None)
    if base is None:
        raise Unsupported(
            f"{model.name} is strictly discrete; off-palette interpolation unsupported"
        )
    return base


def linear_1d_barrier(model: EnergyModel, a: np.ndarray, b: np.ndarray,
                      n_points: int = 256) -> PathTrace:
    """Max energy over the straight segment from a to b, endpoints included."""
    base = _interpolation_base(model)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ts = np.linspace(0.0, 1.0, n_points + 1)
    states = a[None, :] + ts[:, None] * (b - a)[None, :]
    energies = base.batch_energy(states)
    return PathTrace([s for s in states], np.asarray(energies), "linear1d")


def greedy_discrete_interpolate(model: EnergyModel, a: np.ndarray,
                                b: np.ndarray) -> PathTrace:
    """Greedy one-coordinate-at-a-time morph between two discrete states.

    At each step the move (among coordinates still differing from the
    target) with the smallest energy increase, or largest decrease, is
    applied.  The morph is run in both directions and the lower-barrier
    trace wins, oriented from a to b.
    """
    if model.kind != "discrete":
        raise Unsupported("greedy interpolation needs a discrete model")
    a = np.array(model.check_state(a), copy=True)
    b = np.array(model.check_state(b), copy=True)

    def morph(src, dst):
        x = np.array(src, copy=True)
        energy = model.energy(x)
        states = [x.copy()]
        energies = [energy]
        while True:
            differing = np.nonzero(x != dst)[0]
            if len(differing) == 0:
                break
            best_i = -1
            best_delta = np.inf
            for i in differing:
                delta = model.coordinate_delta(x, int(i), dst[i])
                if delta < best_delta:
                    best_delta = delta
                    best_i = int(i)
            x[best_i] = dst[best_i]
            energy += best_delta
            states.append(x.copy())
            energies.append(energy)
        return states, np.array(energies)

    fwd_states, fwd_e = morph(a, b)
    rev_states, rev_e = morph(b, a)
    if rev_e.max() < fwd_e.max():
        return PathTrace(rev_states[::-1], rev_e[::-1], "greedy-discrete")
    return PathTrace(fwd_states, fwd_e, "greedy-discrete")


@dataclass
class RidgeResult:
    saddle: np.ndarray
    barrier: float
    pair: tuple


def ridge_descent_refine(model: EnergyModel, s_a: np.ndarray, s_b: np.ndarray,
                         must_reach: tuple | None = None,
                         use_fastpath: bool = True) -> RidgeResult:
    """Slide an adjacent cross-basin pair downhill along the ridge.

    The pair must differ in exactly one coordinate and descend to
    different minima.  Moves translate one off-difference coordinate of
    both states together (or re-value the differing coordinate on the
    higher side when the palette allows), accepting only moves that
    strictly lower max(E(a), E(b)) while keeping the pair adjacent and
    straddling the same two basins.  Stops at a local ridge minimum and
    returns the saddle-side state, i.e. the higher-energy member.

    ``must_reach`` overrides which two minima the pair must keep reaching;
    by default they are the entry pair's own descent minima.
    """
    if model.kind != "discrete":
        raise Unsupported("ridge descent refines discrete transition pairs")
    a = np.array(model.check_state(s_a), copy=True)
    b = np.array(model.check_state(s_b), copy=True)
    differing = np.nonzero(a != b)[0]
    if len(differing) != 1:
        raise RejectedInput("transition pair must differ in exactly one coordinate")

    def basin(x):
        return np.ascontiguousarray(
            local_minimize(model, x, use_fastpath=use_fastpath)).tobytes()

    entry_basins = (basin(a), basin(b))
    if entry_basins[0] == entry_basins[1]:
        raise RejectedInput("transition pair descends to a single minimum")
    if must_reach is None:
        want = set(entry_basins)
    else:
        want = {np.ascontiguousarray(m).tobytes() for m in must_reach}
        if set(entry_basins) != want:
            raise RejectedInput("transition pair does not reach the requested minima")

    def pair_ok(x, y):
        return {basin(x), basin(y)} == want

    e_a, e_b = model.energy(a), model.energy(b)
    while True:
        current = max(e_a, e_b)
        best = None
        d = int(np.nonzero(a != b)[0][0])
        for j in range(model.dim):
            for v in model.palette:
                if j == d:
                    # re-value the differing coordinate on the higher side only
                    hi_is_a = e_a >= e_b
                    src = a if hi_is_a else b
                    if v == src[j] or v == (b[j] if hi_is_a else a[j]):
                        continue
                    a2, b2 = a.copy(), b.copy()
                    (a2 if hi_is_a else b2)[j] = v
                else:
                    if v == a[j]:
                        continue
                    a2, b2 = a.copy(), b.copy()
                    a2[j] = v
                    b2[j] = v
                e_a2, e_b2 = model.energy(a2), model.energy(b2)
                m2 = max(e_a2, e_b2)
                if m2 < current - 1e-12 and (best is None or m2 < best[0]):
                    if pair_ok(a2, b2):
                        best = (m2, a2, b2, e_a2, e_b2)
        if best is None:
            break
        _, a, b, e_a, e_b = best
    saddle = a if e_a >= e_b else b
    return RidgeResult(saddle=saddle, barrier=max(e_a, e_b), pair=(a, b))


def initial_linear_path(a: np.ndarray, b: np.ndarray, n_images: int = 32) -> list:
    ts = np.linspace(0.0, 1.0, n_images)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return [a + t * (b - a) for t in ts]


def neb_refine(model: EnergyModel, init, spring: float | None = None,
               doubly_nudged: bool = False, steps: int = 1000,
               step_size: float = 0.01) -> PathTrace:
    """Chain-of-states refinement with projected energy and spring forces.

    Interior images descend the component of the energy gradient
    perpendicular to the path tangent plus the parallel spring force;
    the doubly-nudged variant adds the spring force's perpendicular
    residual minus its projection onto the perpendicular energy gradient.
    Endpoints stay pinned.  The default spring constant is measured so
    spring and energy-gradient magnitudes match on the initial path.
    """
    if model.kind != "continuous":
        raise Unsupported("chain-of-states refinement needs a continuous model")
    if isinstance(init, PathTrace):
        images = [np.array(s, dtype=float) for s in init.states]
    else:
        images = [np.array(s, dtype=float) for s in init]
    if len(images) < 3:
        raise RejectedInput("need at least 3 images")
    n = len(images)

    init_e = np.array([model.energy(x) for x in images])
    blow_up = init_e.max() + 10.0 * max(init_e.max() - init_e.min(), 1.0)
    if spring is None:
        grads = np.array([np.linalg.norm(model.gradient(x)) for x in images[1:-1]])
        seps = np.array([np.linalg.norm(images[i + 1] - images[i]) for i in range(n - 1)])
        mean_sep = float(seps.mean())
        spring = float(grads.mean()) / mean_sep if mean_sep > 0 else 1.0

    for _ in range(steps):
        new_images = [images[0]]
        for i in range(1, n - 1):
            prev_img, cur, nxt = images[i - 1], images[i], images[i + 1]
            tangent = nxt - prev_img
            tnorm = np.linalg.norm(tangent)
            tangent = tangent / tnorm if tnorm > 0 else tangent
            grad = model.gradient(cur)
            g_par = (grad @ tangent) * tangent
            g_perp = grad - g_par
            spring_scalar = spring * (np.linalg.norm(nxt - cur)
                                      - np.linalg.norm(cur - prev_img))
            force = -g_perp + spring_scalar * tangent
            if doubly_nudged:
                f_spring = spring * (nxt - cur) + spring * (prev_img - cur)
                s_perp = f_spring - (f_spring @ tangent) * tangent
                gp_norm = np.linalg.norm(g_perp)
                if gp_norm > 1e-12:
                    g_hat = g_perp / gp_norm
                    s_perp = s_perp - (s_perp @ g_hat) * g_hat
                force = force + s_perp
            new_images.append(cur + step_size * force)
        new_images.append(images[-1])
        images = new_images
        energies = np.array([model.energy(x) for x in images])
        if energies.max() > blow_up:
            raise DivergenceError(
                "chain-of-states refinement diverged; use a smaller step size"
            )
    energies = np.array([model.energy(x) for x in images])
    return PathTrace(images, energies, "dneb" if doubly_nudged else "neb")


# ---------------------------------------------------------------------------
# Pairwise matrix assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ADBarrierSpec:
    """How the matrix assembly should run its AD entries.

    With ``sweep_alpha_init`` set, each pair first gets a one-temperature
    phase sweep and interpolation runs one rung above the located
    boundary, which is where AD barriers are tightest.  When even the
    initial alpha never succeeds for a pair, the pull doubles up to
    ``escalations`` times until travel becomes possible, so deep pairs
    still get a (looser) upper bound instead of a missing entry.
    """

    params: ADParams
    retries: int = 20
    sweep_alpha_init: float | None = None
    sweep_decrement: float = 0.03
    sweep_trials: int = 20
    escalations: int = 8


@dataclass
class BarrierMatrix:
    representatives: list
    values: np.ndarray  # (k, k); diagonal = representative energies; nan = missing
    methods: list  # (k, k) nested lists of method tags or None

    @property
    def size(self) -> int:
        return len(self.representatives)

    def entry(self, i: int, j: int):
        return self.values[i, j], self.methods[i][j]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("i,j,barrier,method\n")
        for i in range(self.size):
            for j in range(i + 1, self.size):
                if np.isnan(self.values[i, j]):
                    continue
                buf.write(f"{i},{j},{float(self.values[i, j])!r},{self.methods[i][j]}\n")
        return buf.getvalue()

    @classmethod
    def from_values(cls, representatives, energies, values, methods=None):
        k = len(representatives)
        mat = np.asarray(values, dtype=float).copy()
        np.fill_diagonal(mat, energies)
        tags = methods if methods is not None else [[None] * k for _ in range(k)]
        return cls(list(representatives), mat, tags)


def _ridge_candidates(model, trace: PathTrace, rep_a, rep_b, use_fastpath):
    """Direct basin crossings along a discrete path, refined by ridge descent."""
    want = (np.ascontiguousarray(rep_a).tobytes(), np.ascontiguousarray(rep_b).tobytes())
    basins = [np.ascontiguousarray(
        local_minimize(model, s, use_fastpath=use_fastpath)).tobytes()
        for s in trace.states]
    barriers = []
    for idx in range(len(trace.states) - 1):
        pair_basins = {basins[idx], basins[idx + 1]}
        if pair_basins == set(want):
            ridge = ridge_descent_refine(model, trace.states[idx], trace.states[idx + 1],
                                         must_reach=(rep_a, rep_b),
                                         use_fastpath=use_fastpath)
            barriers.append(ridge.barrier)
    return barriers


def _ad_entry(model, a, b, spec: ADBarrierSpec, seed, use_fastpath=True):
    params = spec.params
    if spec.sweep_alpha_init is not None:
        alpha_init = spec.sweep_alpha_init
        diagram = None
        for _ in range(spec.escalations + 1):
            diagram = phase_sweep(model, a, b, [params.temperature], alpha_init,
                                  params, decrement=spec.sweep_decrement,
                                  trials=spec.sweep_trials, seed=seed,
                                  use_fastpath=use_fastpath)
            if any(p.alpha_star is not None for p in diagram.points):
                break
            alpha_init *= 2.0
        barriers = []
        for direction, (s, t) in (("a->b", (a, b)), ("b->a", (b, a))):
            point = diagram.point(params.temperature, direction)
            if point.alpha_star is None:
                continue
            near = point.alpha_star / (1.0 - spec.sweep_decrement)
            for _ in range(4):  # success near the boundary is rare; nudge upward
                res = ad_interpolate(model, s, t, params.replace(alpha=near),
                                     retries=spec.retries, seed=seed,
                                     use_fastpath=use_fastpath)
                if res.success:
                    barriers.append(res.barrier)
                    break
                near *= 1.25
        return min(barriers) if barriers else None
    barriers = []
    for s, t in ((a, b), (b, a)):
        res = ad_interpolate(model, s, t, params, retries=spec.retries, seed=seed,
                             use_fastpath=use_fastpath)
        if res.success:
            barriers.append(res.barrier)
    return min(barriers) if barriers else None


def barrier_matrix(model: EnergyModel, representatives, methods,
                   ad: ADBarrierSpec | None = None, seed: int = 0,
                   workers: int = 1, use_fastpath: bool = True,
                   n_points: int = 256) -> BarrierMatrix:
    """Best-known barrier per representative pair, min over requested methods.

    A method unsupported for the model kind is skipped with a warning.
    """
    reps = [np.array(model.check_state(r), copy=True) for r in representatives]
    if len(reps) < 2:
        raise RejectedInput("need at least 2 representatives")
    for m in methods:
        if m not in METHODS:
            raise RejectedInput(f"unknown method {m!r}")
    if "ad" in methods and ad is None:
        raise RejectedInput("method 'ad' needs an ADBarrierSpec")
    k = len(reps)
    values = np.full((k, k), np.nan)
    tags = [[None] * k for _ in range(k)]
    energies = [model.energy(r) for r in reps]
    np.fill_diagonal(values, energies)

    def fill(pair):
        i, j = pair
        found = []
        greedy_trace = None
        for method in methods:
            try:
                if method == "linear1d":
                    found.append((linear_1d_barrier(model, reps[i], reps[j],
                                                    n_points).barrier, method))
                elif method == "greedy-discrete":
                    greedy_trace = greedy_discrete_interpolate(model, reps[i], reps[j])
                    found.append((greedy_trace.barrier, method))
                elif method == "ridge":
                    if greedy_trace is None:
                        greedy_trace = greedy_discrete_interpolate(model, reps[i], reps[j])
                    ridge_barriers = _ridge_candidates(model, greedy_trace, reps[i],
                                                       reps[j], use_fastpath)
                    if ridge_barriers:
                        found.append((min(ridge_barriers), method))
                elif method in ("neb", "dneb"):
                    trace = neb_refine(model, initial_linear_path(reps[i], reps[j]),
                                       doubly_nudged=(method == "dneb"))
                    found.append((trace.barrier, method))
                elif method == "ad":
                    barrier = _ad_entry(model, reps[i], reps[j], ad,
                                        seed=seed + 7919 * (i * k + j),
                                        use_fastpath=use_fastpath)
                    if barrier is not None:
                        found.append((barrier, method))
            except Unsupported as exc:
                warnings.warn(f"skipping {method} for pair ({i},{j}): {exc}",
                              stacklevel=2)
        return i, j, found

    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fill, pairs))
    else:
        results = [fill(p) for p in pairs]
    for i, j, found in results:
        if found:
            barrier, tag = min(found, key=lambda t: t[0])
            values[i, j] = values[j, i] = barrier
            tags[i][j] = tags[j][i] = tag
    return BarrierMatrix(reps, values, tags)

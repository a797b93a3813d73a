"""Brute-force references for desk-scale instances.

Everything here is exact and independent of the MCMC machinery: full state
enumeration, 1-flip-stable minima, exact minimax (bottleneck) barriers via
an energy-ordered union-find sweep over the flip graph, and the same sweep
on dense grids for continuous landscapes.  These are the oracles the
acceptance suite checks the samplers against.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import RejectedInput, Unsupported
from .landscapes import EnergyModel, QuadraticSpinModel

_MAX_ENUM_DIM = 22


def enumerate_spin_states(dim: int) -> np.ndarray:
    """All 2^dim spin vectors as an int8 matrix, row index = bitmask."""
    if dim > _MAX_ENUM_DIM:
        raise RejectedInput(f"enumeration beyond {_MAX_ENUM_DIM} spins is off the table")
    codes = np.arange(2 ** dim, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(dim)) & 1
    return (2 * bits - 1).astype(np.int8)


def state_index(state: np.ndarray) -> int:
    """Bitmask index of a spin vector (bit i set when spin i is +1)."""
    bits = (np.asarray(state) > 0).astype(np.int64)
    return int((bits << np.arange(len(bits))).sum())


def all_energies(model: EnergyModel) -> np.ndarray:
    """Energies of every state, indexed by bitmask."""
    if model.kind != "discrete" or not np.array_equal(model.palette, [-1, 1]):
        raise Unsupported("all_energies enumerates +-1 spin models only")
    states = enumerate_spin_states(model.dim)
    return model.batch_energy(states)


def flip_stable_minima(model: EnergyModel):
    """All 1-flip-stable states, sorted by energy.

    Returns (states, energies).  A state is stable when no single spin
    flip strictly lowers the energy.
    """
    states = enumerate_spin_states(model.dim)
    energies = all_energies(model)
    if isinstance(model, QuadraticSpinModel):
        s = states.astype(np.float64)
        local = s @ model.couplings
        # flipping spin i changes E by -(-2 s_i)(local_i / T + h_i)
        deltas = 2.0 * s * (local / model.temperature + model.field[None, :])
        stable = (deltas >= 0.0).all(axis=1)
    else:
        stable = np.ones(len(states), dtype=bool)
        for idx, state in enumerate(states):
            for i in range(model.dim):
                for v in model.palette:
                    if v != state[i] and model.coordinate_delta(state, i, v) < 0.0:
                        stable[idx] = False
                        break
                if not stable[idx]:
                    break
    order = np.argsort(energies[stable], kind="stable")
    return states[stable][order], energies[stable][order]


class _UnionFind:
    def __init__(self, n):
        self.parent = np.arange(n, dtype=np.int64)

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra
        return ra


def _activation_sweep(energies: np.ndarray, neighbors, marks: dict[int, int],
                      n_marks: int, merge_nodes: np.ndarray | None = None) -> np.ndarray:
    """Activate nodes in energy order; record merge levels between marks.

    ``neighbors(idx)`` yields the graph neighbours of node ``idx``;
    ``marks`` maps node index -> mark id.  Returns the symmetric matrix of
    exact minimax barriers (max node energy along the best path) between
    marks, with mark energies on the diagonal.  ``merge_nodes``, when
    given, receives the activating node index of each pairwise merge.
    """
    order = np.argsort(energies, kind="stable")
    uf = _UnionFind(len(energies))
    active = np.zeros(len(energies), dtype=bool)
    members: dict[int, list[int]] = {}
    barriers = np.full((n_marks, n_marks), np.nan)
    for idx in order:
        idx = int(idx)
        active[idx] = True
        root = uf.find(idx)
        if idx in marks:
            members.setdefault(root, []).append(marks[idx])
            barriers[marks[idx], marks[idx]] = energies[idx]
        for nb in neighbors(idx):
            if not active[nb]:
                continue
            ra, rb = uf.find(idx), uf.find(nb)
            if ra == rb:
                continue
            ma = members.pop(ra, [])
            mb = members.pop(rb, [])
            for a in ma:
                for b in mb:
                    barriers[a, b] = barriers[b, a] = energies[idx]
                    if merge_nodes is not None:
                        merge_nodes[a, b] = merge_nodes[b, a] = idx
            merged = uf.union(ra, rb)
            if ma or mb:
                members[merged] = ma + mb
    return barriers


def minimax_barrier_matrix(model: EnergyModel, minima: np.ndarray):
    """Exact minimax barriers between the given spin minima.

    The barrier between two states is min over flip paths of the max
    energy along the path, computed by activating all 2^dim states in
    energy order and recording the level at which components merge.
    """
    energies = all_energies(model)
    dim = model.dim
    marks = {state_index(m): k for k, m in enumerate(minima)}
    if len(marks) != len(minima):
        raise RejectedInput("duplicate minima passed to minimax_barrier_matrix")

    def neighbors(idx):
        for i in range(dim):
            yield idx ^ (1 << i)

    return _activation_sweep(energies, neighbors, marks, len(minima))


def refine_stationary(model: EnergyModel, x0: np.ndarray, steps: int = 60,
                      fd_step: float = 1e-5) -> np.ndarray:
    """Newton-polish a nearby stationary point (saddle or extremum) of the
    gradient field, using a finite-difference Hessian of the analytic
    gradient.  Used to sharpen grid-located saddles to continuum accuracy.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = len(x)
    for _ in range(steps):
        g = model.gradient(x)
        if np.linalg.norm(g) < 1e-12:
            break
        hess = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = fd_step
            hess[:, i] = (model.gradient(x + e) - model.gradient(x - e)) / (2 * fd_step)
        try:
            step = np.linalg.solve(0.5 * (hess + hess.T), g)
        except np.linalg.LinAlgError:
            break
        if np.linalg.norm(step) > 1.0:  # stay local to the grid cell
            step = step / np.linalg.norm(step)
        x = x - step
    return x


def discrete_minimax_barrier_matrix(model: EnergyModel, minima):
    """Exact minimax barriers on the single-coordinate-move graph.

    Works for any discrete palette: two states are adjacent when they
    differ in exactly one coordinate (by any palette value), matching the
    elementary moves of a Gibbs sweep.  Enumerates palette^dim states.
    """
    if model.kind != "discrete":
        raise Unsupported("palette enumeration needs a discrete model")
    palette = np.asarray(model.palette)
    n_values = len(palette)
    dim = model.dim
    n_states = n_values ** dim
    if n_states > 2 ** _MAX_ENUM_DIM:
        raise RejectedInput("palette state space too large to enumerate")
    value_index = {int(v): k for k, v in enumerate(palette)}
    codes = np.arange(n_states, dtype=np.int64)
    digits = np.empty((n_states, dim), dtype=np.int64)
    rem = codes
    for d in range(dim - 1, -1, -1):
        digits[:, d] = rem % n_values
        rem = rem // n_values
    states = palette[digits]
    energies = model.batch_energy(states)
    strides = np.array([n_values ** (dim - 1 - d) for d in range(dim)])

    def to_index(state):
        idx = 0
        for d in range(dim):
            idx += value_index[int(state[d])] * strides[d]
        return int(idx)

    marks = {to_index(m): k for k, m in enumerate(minima)}
    if len(marks) != len(minima):
        raise RejectedInput("duplicate minima passed to discrete_minimax_barrier_matrix")

    def neighbors(idx):
        for d in range(dim):
            digit = (idx // strides[d]) % n_values
            base = idx - digit * strides[d]
            for k in range(n_values):
                if k != digit:
                    yield base + k * strides[d]

    return _activation_sweep(energies, neighbors, marks, len(minima))


def grid_minimax_barrier(model: EnergyModel, lo, hi, shape, points,
                         refine: bool = False):
    """Minimax barriers between ``points`` on a dense grid of a continuous model.

    lo/hi are per-axis bounds, shape the grid resolution.  Points are
    snapped to their nearest grid nodes.  Adjacency is axis-aligned
    (4-neighbour in 2D).  Returns the barrier matrix between the points.
    With ``refine`` the grid-located merge saddles are Newton-polished to
    their continuum stationary points, removing the upward grid bias.
    """
    if model.kind != "continuous":
        raise Unsupported("grid oracle needs a continuous model")
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    axes = [np.linspace(lo[d], hi[d], shape[d]) for d in range(len(shape))]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.reshape(-1) for m in mesh], axis=1)
    energies = model.batch_energy(coords)
    strides = np.array([int(np.prod(shape[d + 1:])) for d in range(len(shape))])

    def to_index(point):
        idx = 0
        for d in range(len(shape)):
            k = int(np.argmin(np.abs(axes[d] - point[d])))
            idx += k * strides[d]
        return idx

    marks = {}
    for k, p in enumerate(points):
        marks[to_index(np.atleast_1d(p))] = k
    if len(marks) != len(points):
        raise RejectedInput("points collide on the grid; refine the resolution")

    def neighbors(idx):
        rem = idx
        coord = []
        for d in range(len(shape)):
            coord.append(rem // strides[d])
            rem = rem % strides[d]
        for d in range(len(shape)):
            if coord[d] > 0:
                yield idx - strides[d]
            if coord[d] < shape[d] - 1:
                yield idx + strides[d]

    merge_nodes = np.full((len(points), len(points)), -1, dtype=np.int64)
    barriers = _activation_sweep(energies, neighbors, marks, len(points), merge_nodes)
    if refine:
        for a in range(len(points)):
            for b in range(a + 1, len(points)):
                node = merge_nodes[a, b]
                if node < 0:
                    continue
                saddle = refine_stationary(model, coords[node])
                polished = model.energy(saddle)
                # accept only a local polish that removes the upward grid bias
                spacing = max(float(hi[d] - lo[d]) / (shape[d] - 1)
                              for d in range(len(shape)))
                if (np.linalg.norm(saddle - coords[node]) < 3 * spacing
                        and polished <= barriers[a, b] + 1e-9):
                    barriers[a, b] = barriers[b, a] = polished
    return barriers


def exact_boltzmann(model: EnergyModel, temperature: float = 1.0) -> np.ndarray:
    """Exact Boltzmann distribution exp(-E/T)/Z over all spin states."""
    energies = all_energies(model)
    logw = -energies / temperature
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


@dataclass
class OracleReport:
    """Minima and exact barrier matrix of one enumerable instance."""

    states: np.ndarray
    energies: np.ndarray
    barriers: np.ndarray

    def minima_csv(self) -> str:
        buf = io.StringIO()
        buf.write("energy,state\n")
        for e, s in zip(self.energies, self.states):
            buf.write(f"{float(e)!r},\"{' '.join(str(int(v)) for v in s)}\"\n")
        return buf.getvalue()

    def barriers_csv(self) -> str:
        buf = io.StringIO()
        buf.write("i,j,barrier,method\n")
        k = len(self.states)
        for i in range(k):
            for j in range(i + 1, k):
                buf.write(f"{i},{j},{float(self.barriers[i, j])!r},minimax-oracle\n")
        return buf.getvalue()


def oracle_report(model: EnergyModel) -> OracleReport:
    """Full brute-force reference: all 1-flip-stable minima + exact barriers."""
    states, energies = flip_stable_minima(model)
    barriers = minimax_barrier_matrix(model, states)
    return OracleReport(states=states, energies=energies, barriers=barriers)

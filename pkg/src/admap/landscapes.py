"""Energy-model abstraction and the built-in landscape families.

A model owns its geometry: dimension, state kind (discrete or continuous)
and, for discrete models, the palette of admissible per-coordinate values.
States themselves are plain numpy vectors; every public evaluator
validates them against the owning model, which is what makes two states
comparable only when their kinds and dimensions match.

All models are immutable after construction and safe to share across
worker threads.
"""

from __future__ import annotations

import io

import numpy as np

from .errors import RejectedInput, Unsupported
from .rng import stream


class EnergyModel:
    """Deterministic energy over discrete or continuous states.

    Subclasses set ``dim``, ``kind`` ("discrete" or "continuous"),
    ``palette`` (discrete only) and ``name``, and implement ``energy``.
    Gradients exist only for continuous models, single-coordinate deltas
    only for discrete ones.
    """

    dim: int
    kind: str
    name: str
    palette: np.ndarray | None = None

    def energy(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise Unsupported(f"{self.name}: no gradient for kind={self.kind}")

    def coordinate_delta(self, x: np.ndarray, i: int, v) -> float:
        """Energy change from setting coordinate ``i`` to palette value ``v``."""
        if self.kind != "discrete":
            raise Unsupported(f"{self.name}: coordinate_delta needs a discrete model")
        self.check_coordinate(i, v)
        y = np.array(x, copy=True)
        y[i] = v
        return self.energy(y) - self.energy(x)

    def batch_energy(self, xs: np.ndarray) -> np.ndarray:
        """Energies of the rows of ``xs``; subclasses may vectorize."""
        return np.array([self.energy(x) for x in xs])

    # -- validation -----------------------------------------------------

    def check_state(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim != 1 or x.shape[0] != self.dim:
            raise RejectedInput(
                f"{self.name}: state has shape {x.shape}, model dim is {self.dim}"
            )
        if self.kind == "discrete":
            if not np.isin(x, self.palette).all():
                raise RejectedInput(f"{self.name}: state values outside palette")
        return x

    def check_coordinate(self, i: int, v) -> None:
        if not 0 <= i < self.dim:
            raise RejectedInput(f"{self.name}: coordinate {i} out of range")
        if self.kind == "discrete" and not np.isin(v, self.palette):
            raise RejectedInput(f"{self.name}: value {v} not in palette")


def state_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two states of matching shape."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise RejectedInput(f"states not comparable: shapes {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def pixel_palette(levels: int = 8, lo: int = 0, hi: int = 255) -> np.ndarray:
    """Integer pixel palette, default 8 levels spanning 0..255."""
    return np.rint(np.linspace(lo, hi, levels)).astype(np.int64)


# ---------------------------------------------------------------------------
# Quadratic spin models (SK glass, lattice Ising)
# ---------------------------------------------------------------------------


class QuadraticSpinModel(EnergyModel):
    """Pairwise-coupled binary spins:  E(s) = -(s'Js)/(2T) - h's.

    ``couplings`` is symmetric with zero diagonal; ``field`` is an optional
    per-spin linear term.  Covers both the fully-coupled glass with random
    couplings and the nearest-neighbour lattice magnet.
    """

    kind = "discrete"

    def __init__(self, couplings: np.ndarray, field=None, temperature: float = 1.0,
                 name: str = "spin-model"):
        couplings = np.asarray(couplings, dtype=np.float64)
        n = couplings.shape[0]
        if couplings.shape != (n, n):
            raise RejectedInput("couplings must be square")
        if not np.allclose(couplings, couplings.T):
            raise RejectedInput("couplings must be symmetric")
        if np.any(np.diag(couplings) != 0.0):
            raise RejectedInput("couplings must have zero diagonal")
        if temperature <= 0:
            raise RejectedInput("temperature must be positive")
        self.couplings = couplings
        self.couplings.setflags(write=False)
        self.field = np.zeros(n) if field is None else np.asarray(field, dtype=np.float64)
        self.field.setflags(write=False)
        self.temperature = float(temperature)
        self.dim = n
        self.palette = np.array([-1, 1], dtype=np.int64)
        self.name = name

    def energy(self, x: np.ndarray) -> float:
        x = self.check_state(x)
        s = x.astype(np.float64)
        return float(-s @ self.couplings @ s / (2.0 * self.temperature) - self.field @ s)

    def coordinate_delta(self, x: np.ndarray, i: int, v) -> float:
        self.check_coordinate(i, v)
        s = np.asarray(x, dtype=np.float64)
        dv = float(v) - s[i]
        if dv == 0.0:
            return 0.0
        local = float(np.dot(self.couplings[i], s))
        return -dv * local / self.temperature - dv * self.field[i]

    def batch_energy(self, xs: np.ndarray) -> np.ndarray:
        s = np.asarray(xs, dtype=np.float64)
        quad = np.einsum("bi,ij,bj->b", s, self.couplings, s)
        return -quad / (2.0 * self.temperature) - s @ self.field


def sk_model(n: int, seed: int, temperature: float = 1.0) -> QuadraticSpinModel:
    """Fully-coupled spin glass with seeded Gaussian couplings of variance 1/n."""
    rng = stream(seed, "sk-couplings")
    upper = rng.normal(0.0, np.sqrt(1.0 / n), size=(n, n))
    j = np.triu(upper, k=1)
    j = j + j.T
    return QuadraticSpinModel(j, temperature=temperature, name=f"sk-{n}-seed{seed}")


def ising_model(width: int, height: int, temperature: float = 1.0,
                field: float = 0.0) -> QuadraticSpinModel:
    """2D periodic-lattice magnet with uniform external field.

    Energy is -(1/T) * sum over lattice bonds s_i s_j - H * sum s_i; the
    adjacency matrix drops straight into the quadratic form, which divides
    the double-counted bond sum by 2.
    """
    n = width * height
    adj = np.zeros((n, n))
    for r in range(height):
        for c in range(width):
            i = r * width + c
            for rr, cc in ((r, (c + 1) % width), ((r + 1) % height, c)):
                k = rr * width + cc
                adj[i, k] += 1.0
                adj[k, i] += 1.0
    model = QuadraticSpinModel(adj, field=np.full(n, field),
                               temperature=temperature,
                               name=f"ising-{width}x{height}")
    model.width = width
    model.height = height
    model.external_field = field
    return model


def couplings_csv(model: QuadraticSpinModel) -> str:
    """CSV dump of the upper-triangle couplings as (i, j, J_ij) rows."""
    buf = io.StringIO()
    buf.write("i,j,J_ij\n")
    n = model.dim
    for i in range(n):
        for k in range(i + 1, n):
            jik = float(model.couplings[i, k])
            if jik != 0.0:
                buf.write(f"{i},{k},{jik!r}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# 1D double well with optional tilt and seeded sinusoidal noise
# ---------------------------------------------------------------------------


class DoubleWell1D(EnergyModel):
    """E(x) = (x^2 - a^2)^2 / b + tilt*x + c*sin(w*x + phase).

    Two basins around +-a.  With a large ``b`` the basins are wide and
    flat; the sinusoidal term adds small local minima inside each basin.
    A nonzero tilt makes one well deeper than the other.
    """

    kind = "continuous"
    dim = 1

    def __init__(self, a: float = 2.0, quartic_scale: float = 8.0, tilt: float = 0.0,
                 noise_amp: float = 0.0, noise_freq: float = 0.0,
                 noise_phase: float = 0.0, name: str = "double-well"):
        self.a = float(a)
        self.quartic_scale = float(quartic_scale)
        self.tilt = float(tilt)
        self.noise_amp = float(noise_amp)
        self.noise_freq = float(noise_freq)
        self.noise_phase = float(noise_phase)
        self.name = name

    @classmethod
    def seeded(cls, seed: int, a: float = 2.0, quartic_scale: float = 8.0,
               tilt: float = 0.0) -> "DoubleWell1D":
        rng = stream(seed, "double-well-noise")
        amp = rng.uniform(0.2, 0.5)
        freq = rng.uniform(4.0, 8.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        return cls(a, quartic_scale, tilt, amp, freq, phase,
                   name=f"double-well-seed{seed}")

    def energy(self, x: np.ndarray) -> float:
        x = self.check_state(x)
        return float(self._value(x[0]))

    def _value(self, t):
        quart = (t * t - self.a * self.a) ** 2 / self.quartic_scale
        return quart + self.tilt * t + self.noise_amp * np.sin(self.noise_freq * t + self.noise_phase)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = self.check_state(x)
        t = x[0]
        g = 4.0 * t * (t * t - self.a * self.a) / self.quartic_scale + self.tilt
        g += self.noise_amp * self.noise_freq * np.cos(self.noise_freq * t + self.noise_phase)
        return np.array([g])

    def batch_energy(self, xs: np.ndarray) -> np.ndarray:
        t = np.asarray(xs, dtype=float).reshape(-1)
        return self._value(t)


# ---------------------------------------------------------------------------
# Gaussian-mixture negative log density
# ---------------------------------------------------------------------------


class GaussianMixture(EnergyModel):
    """E(x) = -log sum_i w_i N(x; mu_i, Sigma_i)."""

    kind = "continuous"

    def __init__(self, means, covs=None, weights=None, name: str = "gaussian-mixture"):
        means = np.atleast_2d(np.asarray(means, dtype=float))
        k, d = means.shape
        if covs is None:
            covs = np.array([np.eye(d)] * k)
        else:
            covs = np.asarray(covs, dtype=float)
            if covs.ndim == 0:
                covs = np.array([np.eye(d) * float(covs)] * k)
            elif covs.ndim == 1:
                # one isotropic variance per component
                covs = np.array([np.eye(d) * c for c in covs])
            elif covs.ndim == 2 and covs.shape == (k, d):
                # per-component diagonal variances (wins over a shared full
                # matrix when k == d; pass a 3-D stack to disambiguate)
                covs = np.array([np.diag(row) for row in covs])
            elif covs.ndim == 2:
                covs = np.array([covs] * k)
        weights = np.full(k, 1.0 / k) if weights is None else np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
        self.means = means
        self.precisions = np.array([np.linalg.inv(c) for c in covs])
        log_dets = np.array([np.linalg.slogdet(c)[1] for c in covs])
        self.log_norms = np.log(weights) - 0.5 * (d * np.log(2 * np.pi) + log_dets)
        self.dim = d
        self.n_components = k
        self.name = name

    def _component_logs(self, x: np.ndarray) -> np.ndarray:
        diff = x[None, :] - self.means
        quad = np.einsum("ki,kij,kj->k", diff, self.precisions, diff)
        return self.log_norms - 0.5 * quad

    def energy(self, x: np.ndarray) -> float:
        x = self.check_state(x).astype(float)
        logs = self._component_logs(x)
        m = logs.max()
        return float(-(m + np.log(np.exp(logs - m).sum())))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = self.check_state(x).astype(float)
        logs = self._component_logs(x)
        m = logs.max()
        resp = np.exp(logs - m)
        resp /= resp.sum()
        diff = x[None, :] - self.means
        # d/dx of each component log is -Prec (x - mu); energy flips the sign
        grads = np.einsum("kij,kj->ki", self.precisions, diff)
        return np.einsum("k,ki->i", resp, grads)

    def batch_energy(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        diff = xs[:, None, :] - self.means[None, :, :]
        quad = np.einsum("bki,kij,bkj->bk", diff, self.precisions, diff)
        logs = self.log_norms[None, :] - 0.5 * quad
        m = logs.max(axis=1, keepdims=True)
        return -(m[:, 0] + np.log(np.exp(logs - m).sum(axis=1)))


class QuadraticBowl(EnergyModel):
    """Single convex bowl  E(x) = ||x - center||^2 / (2 sigma^2)."""

    kind = "continuous"

    def __init__(self, dim: int = 1, center=None, sigma2: float = 1.0,
                 name: str = "quadratic-bowl"):
        self.dim = dim
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        self.sigma2 = float(sigma2)
        self.name = name

    def energy(self, x: np.ndarray) -> float:
        x = self.check_state(x).astype(float)
        d = x - self.center
        return float(d @ d / (2.0 * self.sigma2))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = self.check_state(x).astype(float)
        return (x - self.center) / self.sigma2

    def batch_energy(self, xs: np.ndarray) -> np.ndarray:
        d = np.asarray(xs, dtype=float) - self.center
        return np.einsum("bi,bi->b", d, d) / (2.0 * self.sigma2)


# ---------------------------------------------------------------------------
# Discretized wrapper: continuous energy evaluated on a finite pixel palette
# ---------------------------------------------------------------------------


class DiscretizedModel(EnergyModel):
    """Restrict a continuous model to states drawn from a finite palette.

    States hold the palette values themselves (integer levels), so the
    Euclidean distance used by magnetized sampling acts on the raw levels.
    The wrapped model stays reachable as ``continuous_base`` for methods
    that interpolate off-palette.
    """

    kind = "discrete"

    def __init__(self, base: EnergyModel, palette: np.ndarray | None = None):
        if base.kind != "continuous":
            raise RejectedInput("DiscretizedModel wraps a continuous model")
        self.continuous_base = base
        self.palette = pixel_palette() if palette is None else np.asarray(palette)
        self.dim = base.dim
        self.name = f"{base.name}-discretized{len(self.palette)}"

    def energy(self, x: np.ndarray) -> float:
        x = self.check_state(x)
        return self.continuous_base.energy(x.astype(float))

    def coordinate_delta(self, x: np.ndarray, i: int, v) -> float:
        self.check_coordinate(i, v)
        if x[i] == v:
            return 0.0
        y = np.array(x, copy=True)
        y[i] = v
        return self.continuous_base.energy(y.astype(float)) - self.continuous_base.energy(
            np.asarray(x).astype(float))

    def batch_energy(self, xs: np.ndarray) -> np.ndarray:
        return self.continuous_base.batch_energy(np.asarray(xs, dtype=float))

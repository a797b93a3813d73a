"""Local MCMC kernels: Gibbs sweeps, random-walk Metropolis, Langevin.

Every kernel samples the magnetized density

    p(x) ~ exp{ -( E(x)/T + alpha * ||x - target||_2 ) }

with ``alpha = 0`` (or ``mag=None``) reducing to plain tempered sampling.
Kernels draw from the generator in a fixed discipline (Gibbs: one uniform
per coordinate; Metropolis: one normal vector then one uniform; Langevin:
one normal vector) so that accelerated reimplementations can reproduce
the exact stream.  All kernels report the raw, untempered energy, which
keeps barrier records comparable across parameter settings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import RejectedInput, Unsupported
from .landscapes import EnergyModel, state_distance
from .rng import stream

KERNELS = ("gibbs", "rw-metropolis", "langevin")


@dataclass(frozen=True)
class Magnetization:
    """Distance penalty pulling the chain toward ``target`` with strength ``alpha``."""

    target: np.ndarray
    alpha: float

    def __post_init__(self):
        if self.alpha < 0:
            raise RejectedInput("magnetization strength must be non-negative")


@dataclass(frozen=True)
class SamplerConfig:
    """Kernel choice plus the knobs shared by chain drivers.

    ``step_size`` should stay small relative to the landscape's feature
    scale; that keeps the kernel local (single-step displacement bounded
    with overwhelming probability), which is what the trapping behaviour
    relies on.  This is documented, not enforced.
    """

    kernel: str = "gibbs"
    temperature: float = 1.0
    step_size: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise RejectedInput(f"unknown kernel {self.kernel!r}")
        if self.temperature <= 0:
            raise RejectedInput("temperature must be positive")
        if self.step_size <= 0:
            raise RejectedInput("step size must be positive")


def _mag_terms(mag: Magnetization | None, x: np.ndarray):
    if mag is None:
        return None, 0.0
    target = np.asarray(mag.target, dtype=float)
    if target.shape != np.asarray(x).shape:
        raise RejectedInput("magnetization target does not match state shape")
    return target, float(mag.alpha)


def gibbs_sweep(model: EnergyModel, x: np.ndarray, temperature: float,
                rng: np.random.Generator, mag: Magnetization | None = None,
                state_energy: float | None = None, path=None):
    """One sequential sweep over all coordinates; a sweep is one AD iteration.

    Each coordinate is resampled from the conditional of the magnetized
    density over the palette.  Returns ``(x, energy, max_energy)`` where
    the energies are raw model energies and ``max_energy`` covers every
    intermediate state visited inside the sweep.  When ``path`` is a list,
    a ``(state, energy)`` snapshot is appended after every accepted change.
    """
    if model.kind != "discrete":
        raise Unsupported("gibbs_sweep needs a discrete model")
    x = np.array(model.check_state(x), copy=True)
    target, alpha = _mag_terms(mag, x)
    palette = model.palette
    energy = model.energy(x) if state_energy is None else state_energy
    max_energy = energy
    d2 = float(np.sum((x.astype(float) - target) ** 2)) if target is not None else 0.0

    n_values = len(palette)
    scores = [0.0] * n_values
    deltas = [0.0] * n_values
    for i in range(model.dim):
        cur = x[i]
        best = -math.inf
        for k in range(n_values):
            v = palette[k]
            deltas[k] = 0.0 if v == cur else model.coordinate_delta(x, i, v)
            s = -deltas[k] / temperature
            if target is not None and alpha > 0.0:
                dv2 = d2 + (float(v) - target[i]) ** 2 - (float(cur) - target[i]) ** 2
                s -= alpha * (math.sqrt(max(dv2, 0.0)) - math.sqrt(d2))
            scores[k] = s
            if s > best:
                best = s
        total = 0.0
        for k in range(n_values):
            scores[k] = math.exp(scores[k] - best)
            total += scores[k]
        u = rng.random() * total
        acc = 0.0
        choice = n_values - 1
        for k in range(n_values):
            acc += scores[k]
            if u < acc:
                choice = k
                break
        v = palette[choice]
        if v != cur:
            if target is not None:
                d2 += (float(v) - target[i]) ** 2 - (float(cur) - target[i]) ** 2
            x[i] = v
            energy += deltas[choice]
            if energy > max_energy:
                max_energy = energy
            if path is not None:
                path.append((x.copy(), energy))
    return x, energy, max_energy


def rw_metropolis_step(model: EnergyModel, x: np.ndarray, temperature: float,
                       step_size: float, rng: np.random.Generator,
                       mag: Magnetization | None = None,
                       state_energy: float | None = None):
    """One Gaussian-proposal Metropolis step on the magnetized density.

    Returns ``(x, energy, accepted)`` with raw energies.
    """
    if model.kind != "continuous":
        raise Unsupported("rw_metropolis_step needs a continuous model")
    x = model.check_state(x).astype(float)
    target, alpha = _mag_terms(mag, x)
    energy = model.energy(x) if state_energy is None else state_energy

    proposal = x + step_size * rng.standard_normal(model.dim)
    prop_energy = model.energy(proposal)
    delta_mag = (prop_energy - energy) / temperature
    if target is not None and alpha > 0.0:
        delta_mag += alpha * (float(np.linalg.norm(proposal - target))
                              - float(np.linalg.norm(x - target)))
    u = rng.random()
    accepted = delta_mag <= 0.0 or u < math.exp(-min(delta_mag, 700.0))
    if accepted:
        return proposal, prop_energy, True
    return x, energy, False


def langevin_step(model: EnergyModel, x: np.ndarray, temperature: float,
                  step_size: float, rng: np.random.Generator,
                  mag: Magnetization | None = None):
    """One Langevin update of the magnetized dynamics; returns ``(x, energy)``.

    The drift is -(eps^2/2) (grad E / T + alpha * unit(x - target)); the
    magnetization direction is defined as 0 within 1e-12 of the target.
    """
    if model.kind != "continuous":
        raise Unsupported("langevin_step needs a continuous model")
    x = model.check_state(x).astype(float)
    target, alpha = _mag_terms(mag, x)
    drift = model.gradient(x) / temperature
    if target is not None and alpha > 0.0:
        diff = x - target
        norm = float(np.linalg.norm(diff))
        if norm >= 1e-12:
            drift = drift + alpha * diff / norm
    new = x - 0.5 * step_size * step_size * drift + step_size * rng.standard_normal(model.dim)
    return new, model.energy(new)


@dataclass
class ChainResult:
    state: np.ndarray
    energy: float
    energies: np.ndarray | None = None
    samples: np.ndarray | None = None
    accept_count: int = 0
    steps: int = 0


def run_chain(model: EnergyModel, x0: np.ndarray, config: SamplerConfig, n_steps: int,
              mag: Magnetization | None = None, rng: np.random.Generator | None = None,
              keep: str = "none", trace_path=None, trace_stride: int = 100) -> ChainResult:
    """Drive one chain for ``n_steps`` kernel applications.

    keep: "none", "energy" or "samples" (samples implies energies).
    When ``trace_path`` is given, (step, energy, distance-to-target) rows
    are dumped as JSON lines every ``trace_stride`` steps.
    """
    if keep not in ("none", "energy", "samples"):
        raise RejectedInput(f"unknown keep mode {keep!r}")
    rng = stream(config.seed, "chain") if rng is None else rng
    x = np.array(x0, copy=True)
    energy = model.energy(x)
    energies = np.empty(n_steps + 1) if keep != "none" else None
    samples = np.empty((n_steps + 1, model.dim)) if keep == "samples" else None
    if energies is not None:
        energies[0] = energy
    if samples is not None:
        samples[0] = x
    accept_count = 0
    trace = open(trace_path, "w") if trace_path is not None else None
    try:
        for step in range(1, n_steps + 1):
            if config.kernel == "gibbs":
                x, energy, _ = gibbs_sweep(model, x, config.temperature, rng, mag,
                                           state_energy=energy)
                accept_count += 1
            elif config.kernel == "rw-metropolis":
                x, energy, ok = rw_metropolis_step(model, x, config.temperature,
                                                   config.step_size, rng, mag,
                                                   state_energy=energy)
                accept_count += int(ok)
            else:
                x, energy = langevin_step(model, x, config.temperature,
                                          config.step_size, rng, mag)
                accept_count += 1
            if energies is not None:
                energies[step] = energy
            if samples is not None:
                samples[step] = x
            if trace is not None and step % trace_stride == 0:
                dist = state_distance(x, mag.target) if mag is not None else None
                trace.write(json.dumps({"step": step, "energy": energy,
                                        "distance_to_target": dist}) + "\n")
    finally:
        if trace is not None:
            trace.close()
    return ChainResult(state=x, energy=energy, energies=energies, samples=samples,
                       accept_count=accept_count, steps=n_steps)

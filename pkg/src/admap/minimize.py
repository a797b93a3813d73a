"""Local minimization: greedy single-coordinate descent and backtracking GD."""

from __future__ import annotations

import numpy as np

from . import fastpath
from .errors import Unsupported
from .landscapes import EnergyModel, QuadraticSpinModel


def local_minimize(model: EnergyModel, x: np.ndarray, g_tol: float = 1e-6,
                   max_steps: int = 10_000, max_step_length: float = 0.5,
                   use_fastpath: bool = True) -> np.ndarray:
    """Descend to a local minimum of the model from ``x``.

    Discrete models use greedy best-improvement single-coordinate descent
    until no single change lowers the energy (1-flip stability).
    Continuous models use gradient descent with Armijo backtracking until
    the gradient norm drops below ``g_tol``; trial steps never move more
    than ``max_step_length`` so the descent cannot leap across basins.
    """
    x = np.array(model.check_state(x), copy=True)
    if model.kind == "discrete":
        if use_fastpath and isinstance(model, QuadraticSpinModel):
            sigma, _, _ = fastpath.spin_greedy_descent(
                model.couplings, model.field, model.temperature,
                x.astype(np.float64), model.energy(x))
            return sigma.astype(x.dtype)
        return _greedy_descent(model, x, max_steps)
    if model.kind != "continuous":
        raise Unsupported(f"cannot minimize model kind {model.kind!r}")
    return _gradient_descent(model, x, g_tol, max_steps, max_step_length)


def _greedy_descent(model: EnergyModel, x: np.ndarray, max_steps: int) -> np.ndarray:
    palette = model.palette
    for _ in range(max_steps):
        best_delta = 0.0
        best_move = None
        for i in range(model.dim):
            for v in palette:
                if v == x[i]:
                    continue
                delta = model.coordinate_delta(x, i, v)
                if delta < best_delta:
                    best_delta = delta
                    best_move = (i, v)
        if best_move is None:
            return x
        x[best_move[0]] = best_move[1]
    return x


def _gradient_descent(model: EnergyModel, x: np.ndarray, g_tol: float,
                      max_steps: int, max_step_length: float) -> np.ndarray:
    x = x.astype(float)
    energy = model.energy(x)
    for _ in range(max_steps):
        grad = model.gradient(x)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < g_tol:
            break
        t = min(1.0, max_step_length / gnorm)
        moved = False
        while t > 1e-18:
            cand = x - t * grad
            cand_energy = model.energy(cand)
            if cand_energy <= energy - 1e-4 * t * gnorm * gnorm:
                x, energy = cand, cand_energy
                moved = True
                break
            t *= 0.5
        if not moved:
            break  # stalled on a kink or numerically flat region
    return x

"""Compiled kernels for pairwise spin models.

These mirror the generic Gibbs sweep and the attraction-diffusion trial
loop step for step: the same draw order, the same scalar arithmetic, the
same tie-breaking.  With a shared Philox stream the compiled and generic
routes produce identical chains, which the test suite asserts; the fast
route exists purely so hundred-spin mappings finish in minutes.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _sweep(couplings, field, t_model, sigma, target, alpha, t_ad, d2, energy,
           max_energy, rng, rec_i, rec_v, rec_e, rec_n):
    """One sequential Gibbs sweep over +-1 spins; returns updated scalars."""
    n = sigma.shape[0]
    rec_cap = rec_i.shape[0]
    for i in range(n):
        cur = sigma[i]
        local = np.dot(couplings[i], sigma)
        best = -math.inf
        s0 = 0.0
        s1 = 0.0
        delta0 = 0.0
        delta1 = 0.0
        for k in range(2):
            v = -1.0 if k == 0 else 1.0
            dv = v - cur
            if dv == 0.0:
                delta_k = 0.0
            else:
                delta_k = -dv * local / t_model - dv * field[i]
            s = -delta_k / t_ad
            if alpha > 0.0:
                dv2 = d2 + (v - target[i]) ** 2 - (cur - target[i]) ** 2
                s -= alpha * (math.sqrt(max(dv2, 0.0)) - math.sqrt(d2))
            if k == 0:
                s0 = s
                delta0 = delta_k
            else:
                s1 = s
                delta1 = delta_k
            if s > best:
                best = s
        e0 = math.exp(s0 - best)
        e1 = math.exp(s1 - best)
        total = e0 + e1
        u = rng.random() * total
        if u < e0:
            v = -1.0
            delta_k = delta0
        else:
            v = 1.0
            delta_k = delta1
        if v != cur:
            d2 += (v - target[i]) ** 2 - (cur - target[i]) ** 2
            sigma[i] = v
            energy += delta_k
            if energy > max_energy:
                max_energy = energy
            if rec_cap > 0:
                if rec_n < rec_cap:
                    rec_i[rec_n] = i
                    rec_v[rec_n] = v
                    rec_e[rec_n] = energy
                    rec_n += 1
                else:
                    rec_n = -1 - rec_n  # overflow marker, recording abandoned
                    rec_cap = 0
    return d2, energy, max_energy, rec_n


@njit(cache=True, nogil=True)
def spin_ad_trial(couplings, field, t_model, start, target, e0, t_ad, alpha,
                  delta, m_limit, max_iters, rng, rec_i, rec_v, rec_e):
    """Attraction-diffusion trial on a spin model.

    Returns (success, iterations, best_distance, max_energy, sigma, rec_n).
    rec_n < 0 flags that the flip record overflowed its buffer.
    """
    n = start.shape[0]
    sigma = start.astype(np.float64)
    tgt = target.astype(np.float64)
    d2 = 0.0
    for i in range(n):
        dd = sigma[i] - tgt[i]
        d2 += dd * dd
    d1 = math.sqrt(d2)
    d_best = d1
    m = 0
    iters = 0
    energy = e0
    max_energy = e0
    rec_n = 0
    while d1 > delta and m < m_limit and iters < max_iters:
        d2, energy, max_energy, rec_n = _sweep(
            couplings, field, t_model, sigma, tgt, alpha, t_ad, d2, energy,
            max_energy, rng, rec_i, rec_v, rec_e, rec_n)
        if rec_n < 0:
            rec_i = rec_i[:0]
            rec_v = rec_v[:0]
            rec_e = rec_e[:0]
        d1 = math.sqrt(d2)
        iters += 1
        if d1 >= d_best:
            m += 1
        else:
            m = 0
            d_best = d1
    success = d1 <= delta
    return success, iters, d_best, max_energy, sigma, rec_n


@njit(cache=True, nogil=True)
def spin_gibbs_chain(couplings, field, t_model, start, e0, t_ad, sweeps, rng,
                     visit_hist, energies):
    """Unmagnetized Gibbs chain; optionally histograms visited states.

    visit_hist, when non-empty, has length 2^n and is indexed by the spin
    bitmask after every sweep.  energies, when non-empty, receives the
    per-sweep raw energy.
    """
    n = start.shape[0]
    sigma = start.astype(np.float64)
    tgt = np.zeros(n)
    energy = e0
    max_energy = e0
    d2 = 0.0
    track_hist = visit_hist.shape[0] > 0
    track_energy = energies.shape[0] > 0
    rec_i = np.empty(0, dtype=np.int64)
    rec_v = np.empty(0, dtype=np.float64)
    rec_e = np.empty(0, dtype=np.float64)
    for sweep in range(sweeps):
        d2, energy, max_energy, _ = _sweep(
            couplings, field, t_model, sigma, tgt, 0.0, t_ad, d2, energy,
            max_energy, rng, rec_i, rec_v, rec_e, 0)
        if track_hist:
            idx = 0
            for i in range(n):
                if sigma[i] > 0.0:
                    idx |= 1 << i
            visit_hist[idx] += 1
        if track_energy:
            energies[sweep] = energy
    return sigma, energy


@njit(cache=True, nogil=True)
def _gmm_energy_grad(means, precisions, log_norms, x, grad_out):
    """Mixture negative-log-density energy and gradient at x."""
    k = means.shape[0]
    d = means.shape[1]
    logs = np.empty(k)
    for c in range(k):
        quad = 0.0
        for i in range(d):
            row = 0.0
            for j in range(d):
                row += precisions[c, i, j] * (x[j] - means[c, j])
            quad += (x[i] - means[c, i]) * row
        logs[c] = log_norms[c] - 0.5 * quad
    m = logs[0]
    for c in range(1, k):
        if logs[c] > m:
            m = logs[c]
    total = 0.0
    for c in range(k):
        logs[c] = math.exp(logs[c] - m)
        total += logs[c]
    for i in range(d):
        grad_out[i] = 0.0
    for c in range(k):
        w = logs[c] / total
        for i in range(d):
            row = 0.0
            for j in range(d):
                row += precisions[c, i, j] * (x[j] - means[c, j])
            grad_out[i] += w * row
    return -(m + math.log(total))


@njit(cache=True, nogil=True)
def gmm_langevin_ad_trial(means, precisions, log_norms, start, target, e0, t_ad,
                          alpha, eps, delta, m_limit, max_iters, rng, path_out,
                          path_e_out):
    """Langevin attraction-diffusion trial on a Gaussian-mixture energy.

    Same control flow as the generic trial loop; the path buffers, when
    non-empty, receive every visited state.  Returns (success, iterations,
    best_distance, max_energy, x, n_path).
    """
    d = start.shape[0]
    x = start.copy()
    grad = np.empty(d)
    drift = np.empty(d)
    _gmm_energy_grad(means, precisions, log_norms, x, grad)
    d2 = 0.0
    for i in range(d):
        dd = x[i] - target[i]
        d2 += dd * dd
    d1 = math.sqrt(d2)
    d_best = d1
    m = 0
    iters = 0
    max_energy = e0
    cap = path_out.shape[0]
    n_path = 0
    half_eps2 = 0.5 * eps * eps
    while d1 > delta and m < m_limit and iters < max_iters:
        for i in range(d):
            drift[i] = grad[i] / t_ad
        if alpha > 0.0:
            norm = 0.0
            for i in range(d):
                norm += (x[i] - target[i]) ** 2
            norm = math.sqrt(norm)
            if norm >= 1e-12:
                for i in range(d):
                    drift[i] += alpha * (x[i] - target[i]) / norm
        for i in range(d):
            x[i] = x[i] - half_eps2 * drift[i] + eps * rng.standard_normal()
        energy = _gmm_energy_grad(means, precisions, log_norms, x, grad)
        if energy > max_energy:
            max_energy = energy
        if n_path < cap:
            for i in range(d):
                path_out[n_path, i] = x[i]
            path_e_out[n_path] = energy
            n_path += 1
        d1 = 0.0
        for i in range(d):
            d1 += (x[i] - target[i]) ** 2
        d1 = math.sqrt(d1)
        iters += 1
        if d1 >= d_best:
            m += 1
        else:
            m = 0
            d_best = d1
    success = d1 <= delta
    return success, iters, d_best, max_energy, x, n_path


@njit(cache=True, nogil=True)
def spin_greedy_descent(couplings, field, t_model, start, e0):
    """Best-improvement single-flip descent to a 1-flip-stable state."""
    n = start.shape[0]
    sigma = start.astype(np.float64)
    energy = e0
    moves = 0
    while True:
        best_delta = 0.0
        best_i = -1
        for i in range(n):
            local = np.dot(couplings[i], sigma)
            dv = -2.0 * sigma[i]
            delta = -dv * local / t_model - dv * field[i]
            if delta < best_delta:
                best_delta = delta
                best_i = i
        if best_i < 0:
            break
        sigma[best_i] = -sigma[best_i]
        energy += best_delta
        moves += 1
    return sigma, energy, moves

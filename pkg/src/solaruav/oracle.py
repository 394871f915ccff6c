"""Independent near-global verifier for tiny instances.

Scans UAV positions on a 3-D grid; at each position the assignment is
fixed by the best effective gain per subcarrier and the powers by
closed-form water-filling.  The best grid point is a certified lower
bound on the global optimum of the original problem and converges to it
as the grid pitches shrink.  Deliberately unscalable: its only job is
to cross-check the iterative solver on desk-size instances.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import solar
from .channel import Instance
from .sca import Solution
from .subproblem import InfeasibleError


def waterfilling(gains: np.ndarray, budget: float) -> np.ndarray:
    """Optimal powers p_i = max(0, mu - 1/g_i) under a sum budget.

    The water level mu is found by bisection until the allocated total
    matches the budget to 1e-10 absolute.
    """
    g = np.asarray(gains, dtype=float)
    if np.any(g <= 0):
        raise ValueError("effective gains must be strictly positive")
    if budget < 0:
        raise ValueError("power budget must be nonnegative")
    if budget == 0.0:
        return np.zeros_like(g)
    inv = 1.0 / g
    lo = float(inv.min())
    hi = float(inv.max()) + budget
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        total = float(np.sum(np.maximum(0.0, mu - inv)))
        if abs(total - budget) <= 1e-10:
            break
        if total > budget:
            hi = mu
        else:
            lo = mu
    return np.maximum(0.0, mu - inv)


def _waterfilling_batch(gains: np.ndarray, budget: float) -> np.ndarray:
    """Vectorized water-filling over rows of a (n_points, N_F) gain array."""
    inv = 1.0 / gains
    lo = inv.min(axis=1)
    hi = inv.max(axis=1) + budget
    for _ in range(60):
        mu = 0.5 * (lo + hi)
        total = np.sum(np.maximum(0.0, mu[:, None] - inv), axis=1)
        over = total > budget
        hi = np.where(over, mu, hi)
        lo = np.where(over, lo, mu)
    mu = 0.5 * (lo + hi)
    return np.maximum(0.0, mu[:, None] - inv)


def best_gain_assignment(inst: Instance, r: np.ndarray) -> np.ndarray:
    """One-hot assignment of each subcarrier to the best-effective-gain user."""
    r = np.asarray(r, dtype=float)
    d2 = np.sum((r[None, :] - inst.users) ** 2, axis=1)
    eff = inst.h_gain / d2[:, None]
    winners = np.argmax(eff, axis=0)  # ties to the lowest user index
    s = np.zeros_like(inst.h_gain, dtype=int)
    s[winners, np.arange(inst.sys.n_subcarriers)] = 1
    return s


def _budget_at(inst: Instance, z: float) -> float:
    return min(inst.sys.p_max, solar.solar_power(z, inst.solar) - inst.sys.p_uav)


def grid_search_oracle(
    inst: Instance,
    grid_pitch: float,
    z_pitch: float,
    exhaustive: bool = False,
) -> Solution:
    """Exhaustive position scan with per-position assignment + water-filling.

    exhaustive=True additionally enumerates every subcarrier assignment
    at each position (only sensible for K <= 2, N_F <= 4) and keeps the
    best, which empirically validates the best-gain assignment rule.
    """
    sys = inst.sys
    radius = sys.cell_radius
    axis = np.arange(-radius, radius + 0.5 * grid_pitch, grid_pitch)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    keep = xx**2 + yy**2 <= radius**2 + 1e-9
    xs, ys = xx[keep], yy[keep]
    z_values = np.arange(sys.z_min, sys.z_max + 0.5 * z_pitch, z_pitch)
    z_values = np.minimum(z_values, sys.z_max)

    h = inst.h_gain
    k_users, n_f = h.shape
    best_obj = -math.inf
    best = None
    any_feasible = False
    for z in z_values:
        budget = _budget_at(inst, float(z))
        if budget <= 0:
            continue
        any_feasible = True
        d2 = (
            (xs[:, None] - inst.users[None, :, 0]) ** 2
            + (ys[:, None] - inst.users[None, :, 1]) ** 2
            + z**2
        )  # (n_pts, K)
        eff = h[None, :, :] / d2[:, :, None]  # (n_pts, K, N_F)
        winners = np.argmax(eff, axis=1)  # (n_pts, N_F)
        g_best = np.take_along_axis(eff, winners[:, None, :], axis=1)[:, 0, :]
        powers = _waterfilling_batch(g_best, budget)
        obj = np.sum(np.log2(1.0 + g_best * powers), axis=1)
        j = int(np.argmax(obj))  # first maximum: lexicographically smallest point
        if obj[j] > best_obj:
            best_obj = float(obj[j])
            best = (float(xs[j]), float(ys[j]), float(z), winners[j], powers[j], budget)
        if exhaustive:
            cand = _exhaustive_best(inst, xs, ys, float(z), budget)
            if cand is not None and cand[0] > best_obj:
                best_obj, best = cand[0], cand[1]
    if not any_feasible:
        raise InfeasibleError(
            "C1 infeasible: no altitude on the grid sustains the hover power"
        )

    x, y, z, winners, powers, budget = best
    r = np.array([x, y, z])
    s = np.zeros((k_users, n_f), dtype=int)
    p = np.zeros((k_users, n_f))
    cols = np.arange(n_f)
    s[winners, cols] = 1
    p[winners, cols] = powers
    theta = np.sum((r[None, :] - inst.users) ** 2, axis=1)
    return Solution(
        s=s,
        p=p,
        r=r,
        theta=theta,
        objective_relaxed=best_obj,
        objective_original=best_obj,
        trace=[],
        status="oracle",
        iterations=0,
        p_tilde=p.copy(),
    )


def _exhaustive_best(inst: Instance, xs, ys, z: float, budget: float):
    """Best objective over every assignment at every (x, y) for one altitude."""
    h = inst.h_gain
    k_users, n_f = h.shape
    best_obj, best = -math.inf, None
    for j in range(xs.size):
        r = np.array([xs[j], ys[j], z])
        d2 = np.sum((r[None, :] - inst.users) ** 2, axis=1)
        eff = h / d2[:, None]
        for combo in itertools.product(range(k_users), repeat=n_f):
            g = eff[list(combo), np.arange(n_f)]
            p = waterfilling(g, budget)
            obj = float(np.sum(np.log2(1.0 + g * p)))
            if obj > best_obj:
                best_obj = obj
                best = (
                    float(xs[j]),
                    float(ys[j]),
                    z,
                    np.array(combo),
                    p,
                    budget,
                )
    if best is None:
        return None
    return best_obj, best


def oracle_objective_at(inst: Instance, r: np.ndarray) -> float:
    """Best-gain assignment + water-filling objective at a fixed position."""
    r = np.asarray(r, dtype=float)
    budget = _budget_at(inst, float(r[2]))
    if budget <= 0:
        raise InfeasibleError(f"C1 infeasible at altitude {r[2]:.4g} m")
    d2 = np.sum((r[None, :] - inst.users) ** 2, axis=1)
    eff = inst.h_gain / d2[:, None]
    g = eff.max(axis=0)
    p = waterfilling(g, budget)
    return float(np.sum(np.log2(1.0 + g * p)))

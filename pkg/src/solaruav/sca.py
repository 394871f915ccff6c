"""Outer successive-approximation loop for the joint design problem.

Each outer iteration rebuilds the concave surrogate around the current
iterate, solves it per feasible altitude branch, keeps the candidate
with the best relaxed objective, and stops once the relative objective
change drops below tolerance.  The binary subcarrier assignment is then
recovered from the relaxed powers (a subcarrier goes to the user
carrying essentially all of its power).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import solar, subproblem
from .channel import Instance
from .solar import AltitudeBranch
from .subproblem import (
    InfeasibleError,
    Iterate,
    STATUS_INFEASIBLE,
    build_subproblem,
    relaxed_objective,
    solve_subproblem,
)


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and budgets of the iterative solver."""

    rel_obj_tol: float = 1e-6
    max_outer_iter: int = 100
    power_threshold_frac: float = 1e-9
    kkt_tol: float = 1e-6
    max_newton: int = 500
    barrier_t0: float = 1.0
    barrier_mu: float = 30.0
    comp_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.max_outer_iter < 1:
            raise ValueError("max_outer_iter must be >= 1")
        for name in ("rel_obj_tol", "power_threshold_frac", "kkt_tol", "comp_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Solution:
    """Final design: binary assignment, powers, position, objectives."""

    s: np.ndarray
    p: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    objective_relaxed: float
    objective_original: float
    trace: list = field(default_factory=list)
    status: str = "converged"
    iterations: int = 0
    p_tilde: np.ndarray = None


def feasible_branches(inst: Instance) -> list[AltitudeBranch]:
    """Altitude branches on which hovering is sustainable somewhere.

    Every branch expression increases with altitude, so it suffices to
    check the upper endpoint of each branch interval.
    """
    out = []
    for b in solar.altitude_branches(inst.solar, inst.sys.z_min, inst.sys.z_max):
        if solar.solar_power(b.z_interval[1], inst.solar) > inst.sys.p_uav:
            out.append(b)
    return out


def initialize(inst: Instance, options: SolverOptions) -> Iterate:
    """Strictly feasible starting iterate.

    UAV starts above the user centroid at the midpoint of the highest
    sustainable branch; powers split 90% of the admissible budget
    uniformly; auxiliaries start tight at the squared distances.
    """
    branches = feasible_branches(inst)
    if not branches:
        raise InfeasibleError(
            "C1 infeasible: harvested power "
            f"{solar.solar_power(inst.sys.z_max, inst.solar):.4g} W at z_max="
            f"{inst.sys.z_max:.4g} m cannot cover hover power {inst.sys.p_uav:.4g} W"
        )
    branch = branches[0]
    lo, hi = branch.z_interval
    z0 = 0.5 * (lo + hi)
    centroid = inst.users[:, :2].mean(axis=0)
    r0 = np.array([centroid[0], centroid[1], z0])
    theta0 = np.sum((r0[None, :] - inst.users) ** 2, axis=1)
    budget = min(inst.sys.p_max, solar.solar_power(z0, inst.solar) - inst.sys.p_uav)
    if budget <= 0:
        # Midpoint of the branch may still be too low inside a cloud.
        z0 = hi
        r0[2] = z0
        theta0 = np.sum((r0[None, :] - inst.users) ** 2, axis=1)
        budget = min(inst.sys.p_max, solar.solar_power(z0, inst.solar) - inst.sys.p_uav)
    k, n_f = inst.h_gain.shape
    p0 = np.full((k, n_f), 0.9 * budget / (k * n_f))
    return Iterate(p_tilde=p0, r=r0, theta=theta0, branch=branch)


def _run_loop(inst, options, it, branches, fix_xy, mask):
    """The core ascent loop; returns (iterate, objective, trace, status, iters)."""
    obj = relaxed_objective(inst.h_gain, it.p_tilde, it.theta, mask=mask)
    trace = [obj]
    status = "max_iter"
    iterations = 0
    for j in range(options.max_outer_iter):
        iterations = j + 1
        best_it, best_obj = None, -math.inf
        for b in branches:
            spec = build_subproblem(inst, it, options, branch=b, fix_xy=fix_xy, mask=mask)
            if spec.infeasible:
                continue
            try:
                sub = solve_subproblem(spec)
            except subproblem.SubproblemError as exc:
                raise subproblem.SubproblemError(
                    f"outer iteration {j + 1}, branch {b.label}: {exc}"
                ) from exc
            if sub.status == STATUS_INFEASIBLE:
                continue
            cand_obj = relaxed_objective(
                inst.h_gain, sub.iterate.p_tilde, sub.iterate.theta, mask=mask
            )
            if cand_obj > best_obj:
                best_it, best_obj = sub.iterate, cand_obj
        if best_it is None:
            raise InfeasibleError(
                f"no feasible branch subproblem at outer iteration {j + 1} (C1)"
            )
        if best_obj < obj - 1e-8:
            # Numerical non-ascent: keep the previous iterate and stop.
            status = "converged"
            break
        it = best_it
        trace.append(best_obj)
        rel_change = abs(best_obj - obj) / max(1.0, abs(obj))
        obj = best_obj
        if rel_change < options.rel_obj_tol:
            status = "converged"
            break
    return it, obj, trace, status, iterations


def _waterfill_exact(gains: np.ndarray, budget: float) -> np.ndarray:
    """Sort-based exact water-filling, used only to build restart iterates."""
    inv = 1.0 / gains
    order = np.argsort(inv)
    inv_sorted = inv[order]
    n = gains.size
    active = n
    for m in range(1, n + 1):
        mu = (budget + inv_sorted[:m].sum()) / m
        if m == n or mu <= inv_sorted[m]:
            active = m
            break
    mu = (budget + inv_sorted[:active].sum()) / active
    p = np.zeros(n)
    p[order[:active]] = mu - inv_sorted[:active]
    return p


def _promise_at(inst, r, mask, budget):
    """Achievable relaxed value at a fixed position: per-subcarrier winner
    (restricted to the mask) plus exact water-filling."""
    d2 = np.sum((np.asarray(r)[None, :] - inst.users) ** 2, axis=1)
    eff = inst.h_gain / d2[:, None]
    if mask is not None:
        eff = np.where(mask, eff, 0.0)
    winners = np.argmax(eff, axis=0)
    cols = np.arange(inst.sys.n_subcarriers)
    g = eff[winners, cols]
    ok = g > 0
    if not np.any(ok):
        return -math.inf, None
    p = np.zeros_like(g)
    p[ok] = _waterfill_exact(g[ok], budget)
    value = float(np.sum(np.log2(1.0 + g * p)))
    p_tilde = np.zeros_like(inst.h_gain)
    p_tilde[winners, cols] = p
    return value, p_tilde


def _restart_candidate(inst, options, best_it, best_obj, mask):
    """Iterate seeded at the most promising user position, if it beats the
    converged value; None otherwise.  Counters local optima in (x, y)."""
    z = float(best_it.r[2])
    budget = 0.999 * min(
        inst.sys.p_max, solar.solar_power(z, inst.solar) - inst.sys.p_uav
    )
    if budget <= 0:
        return None
    best_cand, best_val = None, best_obj * (1.0 + 1e-7) + 1e-9
    for k in range(inst.n_users):
        r = np.array([inst.users[k, 0], inst.users[k, 1], z])
        val, p_tilde = _promise_at(inst, r, mask, budget)
        if val > best_val:
            theta = np.sum((r[None, :] - inst.users) ** 2, axis=1)
            best_cand = Iterate(
                p_tilde=p_tilde, r=r, theta=theta, branch=best_it.branch
            )
            best_val = val
    return best_cand


def sca_solve(
    inst: Instance,
    options: Optional[SolverOptions] = None,
    fix_xy: Optional[tuple[float, float]] = None,
    mask: Optional[np.ndarray] = None,
    init: Optional[Iterate] = None,
) -> Solution:
    """Run the full iterative algorithm and recover the final assignment.

    fix_xy pins the horizontal position, mask restricts the allowed
    user/subcarrier pairs, init overrides the default starting iterate
    (used for warm restarts).  When the horizontal position is free, the
    converged point is cross-checked against water-filling values at the
    user positions and the loop restarts from any position that promises
    a better objective, keeping the best run.
    """
    if options is None:
        options = SolverOptions()
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
    it = initialize(inst, options) if init is None else init
    if mask is not None:
        it = Iterate(
            p_tilde=np.where(mask, it.p_tilde, 0.0),
            r=it.r,
            theta=it.theta,
            branch=it.branch,
        )
    if fix_xy is not None:
        r = it.r.copy()
        r[0], r[1] = fix_xy
        theta = np.sum((r[None, :] - inst.users) ** 2, axis=1)
        it = Iterate(p_tilde=it.p_tilde, r=r, theta=theta, branch=it.branch)

    branches = feasible_branches(inst)
    it, obj, trace, status, iterations = _run_loop(
        inst, options, it, branches, fix_xy, mask
    )
    if fix_xy is None and init is None:
        for _ in range(2):
            cand = _restart_candidate(inst, options, it, obj, mask)
            if cand is None:
                break
            res = _run_loop(inst, options, cand, branches, fix_xy, mask)
            if res[1] <= obj:
                break
            it, obj, trace, status, iterations = res

    s, p = recover_assignment(it.p_tilde, options, inst.sys.p_max)
    obj_orig = evaluate_original(inst, s, p, it.r)
    return Solution(
        s=s,
        p=p,
        r=it.r.copy(),
        theta=it.theta.copy(),
        objective_relaxed=obj,
        objective_original=obj_orig,
        trace=trace,
        status=status,
        iterations=iterations,
        p_tilde=it.p_tilde.copy(),
    )


def recover_assignment(
    p_tilde: np.ndarray, options: SolverOptions, p_max: float
) -> tuple[np.ndarray, np.ndarray]:
    """Binary assignment from relaxed powers.

    Per subcarrier, the user with the largest relaxed power wins (ties to
    the lowest index) and receives the whole column's power; columns
    whose largest entry is below the zero threshold stay unassigned.
    """
    p_tilde = np.asarray(p_tilde, dtype=float)
    if np.any(p_tilde < 0):
        raise ValueError("relaxed powers must be nonnegative")
    k, n_f = p_tilde.shape
    s = np.zeros((k, n_f), dtype=int)
    p = np.zeros((k, n_f))
    threshold = options.power_threshold_frac * p_max
    winners = np.argmax(p_tilde, axis=0)  # argmax takes the lowest index on ties
    for i in range(n_f):
        w = winners[i]
        if p_tilde[w, i] > threshold:
            s[w, i] = 1
            p[w, i] = p_tilde[:, i].sum()
    return s, p


def constraint_report(
    inst: Instance, s: np.ndarray, p: np.ndarray, r: np.ndarray, rel_tol: float = 1e-6
) -> list[str]:
    """Violated constraints of the original design problem, empty if none."""
    s = np.asarray(s)
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    sys = inst.sys
    problems = []
    if not np.all((s == 0) | (s == 1)):
        problems.append("C5: assignment entries must be binary")
    if np.any(s.sum(axis=0) > 1):
        problems.append("C6: some subcarrier is assigned to multiple users")
    if np.any(p < -rel_tol * sys.p_max):
        problems.append("C2: negative transmit power")
    total = float((s * p).sum())
    if total > sys.p_max * (1.0 + rel_tol):
        problems.append(
            f"C3: total power {total:.6g} W exceeds P_max {sys.p_max:.6g} W"
        )
    avail = solar.solar_power(float(r[2]), inst.solar)
    if total + sys.p_uav > avail * (1.0 + rel_tol):
        problems.append(
            f"C1: transmit {total:.6g} W plus hover {sys.p_uav:.6g} W exceeds "
            f"harvested {avail:.6g} W"
        )
    if not (sys.z_min * (1.0 - rel_tol) <= r[2] <= sys.z_max * (1.0 + rel_tol)):
        problems.append(f"C4: altitude {r[2]:.6g} m outside [{sys.z_min}, {sys.z_max}]")
    return problems


def evaluate_original(inst: Instance, s, p, r) -> float:
    """Sum throughput of the original problem at a binary design.

    Validates the constraints first, then sums the interference-free
    per-subcarrier rates of the assigned pairs.
    """
    problems = constraint_report(inst, s, p, r)
    if problems:
        raise ValueError("constraint violation: " + "; ".join(problems))
    s = np.asarray(s)
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    d2 = np.sum((r[None, :] - inst.users) ** 2, axis=1)
    snr = inst.h_gain * np.maximum(p, 0.0) / d2[:, None]
    return float(np.sum(s * np.log2(1.0 + snr)))

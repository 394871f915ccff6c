"""One convex inner problem of the successive approximation loop.

For a fixed linearization point and a fixed altitude branch, the
nonconvex parts of the relaxed sum-throughput problem (the coupling
function G over relaxed powers and squared-distance auxiliaries, and
the harvested-power curve) are replaced by global concave/affine
underestimators that are tight at the linearization point.  The
resulting concave maximization is solved by a log-barrier interior
method with analytic gradients and Hessians, and the result is
certified through a KKT residual.

All quantities are linear-scale: powers in watts, distances in meters,
rates in bits/s/Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import nnls

from . import solar
from .channel import Instance
from .solar import AltitudeBranch

LN2 = math.log(2.0)

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max_iter"
STATUS_INFEASIBLE = "infeasible"


class SubproblemError(RuntimeError):
    """Raised when a subproblem is malformed or cannot be started."""


class InfeasibleError(SubproblemError):
    """Raised when the instance admits no feasible point; names the constraint."""


@dataclass
class Iterate:
    """State carried between outer iterations.

    p_tilde is the full (K, N_F) relaxed power matrix (structural zeros
    where a scheme masks out user/subcarrier pairs), r the UAV position
    (x, y, z), theta the per-user squared-distance auxiliaries.
    """

    p_tilde: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    branch: AltitudeBranch

    def __post_init__(self):
        self.p_tilde = np.asarray(self.p_tilde, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if np.any(self.p_tilde < 0):
            raise SubproblemError("relaxed powers must be nonnegative")
        if np.any(self.theta <= 0):
            raise SubproblemError("squared-distance auxiliaries must be positive")


def g_value(p_tilde, theta, h_gain, mask=None) -> float:
    """Coupling function G = -sum log2(interference + theta) over active pairs.

    Convex in (p_tilde, theta); the interference seen by user k on
    subcarrier i is h_gain[k, i] times the power of the co-channel users.
    """
    p = np.asarray(p_tilde, dtype=float)
    th = np.asarray(theta, dtype=float)
    h = np.asarray(h_gain, dtype=float)
    v = h * (p.sum(axis=0)[None, :] - p) + th[:, None]
    if mask is None:
        if np.any(v <= 0):
            raise SubproblemError("nonpositive log argument in coupling function")
        return -np.sum(np.log2(v))
    m = np.asarray(mask, dtype=bool)
    if np.any(v[m] <= 0):
        raise SubproblemError("nonpositive log argument in coupling function")
    return -np.sum(np.log2(v[m]))


def g_gradients(p_tilde, theta, h_gain, mask=None):
    """Analytic gradients of G with respect to (p_tilde, theta).

    Returns (gp, gtheta) with gp of shape (K, N_F) and gtheta of shape
    (K,); entries of gp at masked-out pairs are not meaningful.
    """
    p = np.asarray(p_tilde, dtype=float)
    th = np.asarray(theta, dtype=float)
    h = np.asarray(h_gain, dtype=float)
    v = h * (p.sum(axis=0)[None, :] - p) + th[:, None]
    w = 1.0 / (LN2 * v)
    if mask is not None:
        w = w * np.asarray(mask, dtype=float)
    col = (h * w).sum(axis=0)
    gp = -(col[None, :] - h * w)
    gtheta = -w.sum(axis=1)
    return gp, gtheta


def relaxed_objective(h_gain, p_tilde, theta, mask=None) -> float:
    """Sum throughput of the relaxed problem with interference coupling.

    Per active pair: log2(total + theta) - log2(interference + theta),
    which equals log2(1 + SNR-with-interference).  Pairs with zero power
    contribute exactly zero.
    """
    p = np.asarray(p_tilde, dtype=float)
    th = np.asarray(theta, dtype=float)
    h = np.asarray(h_gain, dtype=float)
    tot = h * p.sum(axis=0)[None, :] + th[:, None]
    v = tot - h * p
    terms = np.log2(tot) - np.log2(v)
    if mask is not None:
        terms = terms * np.asarray(mask, dtype=float)
    return float(np.sum(terms))


@dataclass
class SubproblemSpec:
    """Assembled convex subproblem: variables, surrogate, constraints.

    Variable vector layout: [active powers..., active thetas...,
    free position coordinates (subset of x, y, z)].
    """

    inst: Instance
    branch: AltitudeBranch
    options: object
    # Linearization point (full-size arrays) and branch-clipped tangent altitude.
    p_lin: np.ndarray = None
    theta_lin: np.ndarray = None
    r_lin: np.ndarray = None
    z_ref: float = 0.0
    g0: float = 0.0
    grad_p: np.ndarray = None
    grad_theta: np.ndarray = None
    mask: np.ndarray = None
    # Active-variable bookkeeping.
    pair_k: np.ndarray = None
    pair_i: np.ndarray = None
    users_active: np.ndarray = None
    fix_x: Optional[float] = None
    fix_y: Optional[float] = None
    fix_z: Optional[float] = None
    z_lo: float = 0.0
    z_hi: float = 0.0
    theta_cap: float = 0.0
    infeasible: bool = False
    infeasible_reason: str = ""
    # Internal assembly (term matrix, affine surrogate part, slots).
    A: np.ndarray = field(default=None, repr=False)
    c_aff: np.ndarray = field(default=None, repr=False)
    f_const: float = 0.0
    idx_x: Optional[int] = None
    idx_y: Optional[int] = None
    idx_z: Optional[int] = None
    n_p: int = 0
    n_u: int = 0
    n_var: int = 0
    cons_scale: np.ndarray = field(default=None, repr=False)

    @property
    def n_cons(self) -> int:
        n = self.n_p + 1 + 1 + 2 * self.n_u  # p >= 0, sum cap, budget, C7, theta cap
        if self.idx_z is not None:
            n += 2
        return n


@dataclass
class SubSolution:
    """Solver output: full-size iterate, surrogate value, KKT certificate."""

    iterate: Iterate
    objective: float
    kkt_residual: float
    status: str
    newton_iters: int = 0


def g_underestimator(p_tilde, theta, spec: SubproblemSpec) -> float:
    """Affine global underestimator of G, tangent at the linearization point."""
    p = np.asarray(p_tilde, dtype=float)
    th = np.asarray(theta, dtype=float)
    dgp = spec.grad_p * spec.mask
    return float(
        spec.g0
        + np.sum(dgp * (p - spec.p_lin))
        + np.sum(spec.grad_theta * (th - spec.theta_lin))
    )


def _underestimator_max(
    branch: AltitudeBranch, z_ref: float, p: solar.SolarParams
) -> tuple[float, float]:
    """(argmax_z, max value) of the branch underestimator over its interval.

    Each branch expression is concave in z, so the maximum is at an
    interval endpoint or at the unique stationary altitude.
    """
    lo, hi = branch.z_interval
    candidates = [lo, hi]
    if branch.label == solar.IN_CLOUD:
        # Stationary point of the tangent-minus-exponential expression.
        m_ref = p.a_const * p.c1 * math.exp(p.beta_c * z_ref)
        k = p.beta_c - 1.0 / p.delta
        coef = p.b_const * p.c1 * k
        if coef > 0 and m_ref * p.beta_c > 0:
            arg = m_ref * p.beta_c / coef
            if arg > 0:
                z_star = math.log(arg) / k
                if lo < z_star < hi:
                    candidates.append(z_star)
    best_z, best_v = lo, -math.inf
    for z in candidates:
        v, _, _ = solar.underestimator_derivs(z, z_ref, branch, p)
        if v > best_v:
            best_z, best_v = z, v
    return best_z, best_v


def build_subproblem(
    inst: Instance,
    iterate: Iterate,
    options,
    branch: Optional[AltitudeBranch] = None,
    fix_xy: Optional[tuple[float, float]] = None,
    fix_z: Optional[float] = None,
    mask: Optional[np.ndarray] = None,
) -> SubproblemSpec:
    """Assemble the concave surrogate problem around the given iterate.

    branch defaults to the iterate's branch; fix_xy pins the horizontal
    position (baseline scheme 1), fix_z the altitude; mask restricts the
    optimizable user/subcarrier pairs (baseline scheme 2).
    """
    if branch is None:
        branch = iterate.branch
    k_users, n_f = inst.h_gain.shape
    if mask is None:
        mask = np.ones((k_users, n_f), dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)

    spec = SubproblemSpec(inst=inst, branch=branch, options=options)
    spec.mask = mask
    spec.p_lin = np.where(mask, iterate.p_tilde, 0.0)
    spec.theta_lin = iterate.theta.copy()
    spec.r_lin = iterate.r.copy()

    lo, hi = branch.z_interval
    spec.z_lo, spec.z_hi = lo, hi
    spec.z_ref = min(max(iterate.r[2], lo), hi)
    spec.theta_cap = (2.0 * inst.sys.cell_radius) ** 2 + inst.sys.z_max**2

    spec.g0 = g_value(spec.p_lin, spec.theta_lin, inst.h_gain, mask=mask)
    spec.grad_p, spec.grad_theta = g_gradients(
        spec.p_lin, spec.theta_lin, inst.h_gain, mask=mask
    )
    if not (np.all(np.isfinite(spec.grad_p)) and np.all(np.isfinite(spec.grad_theta))):
        raise SubproblemError("non-finite surrogate gradient at linearization point")

    pair_k, pair_i = np.nonzero(mask)
    spec.pair_k, spec.pair_i = pair_k, pair_i
    spec.users_active = np.unique(pair_k)
    spec.n_p = pair_k.size
    spec.n_u = spec.users_active.size

    if fix_xy is not None:
        spec.fix_x, spec.fix_y = float(fix_xy[0]), float(fix_xy[1])
    if fix_z is not None:
        spec.fix_z = float(fix_z)
    elif hi - lo < 1e-9:
        spec.fix_z = 0.5 * (lo + hi)

    # Variable slots.
    n = spec.n_p + spec.n_u
    if spec.fix_x is None:
        spec.idx_x = n
        n += 1
    if spec.fix_y is None:
        spec.idx_y = n
        n += 1
    if spec.fix_z is None:
        spec.idx_z = n
        n += 1
    spec.n_var = n

    # Branch feasibility: the concave underestimator must exceed the
    # hover power somewhere on the branch interval.
    _, best_power = _underestimator_max(branch, spec.z_ref, inst.solar)
    if spec.fix_z is not None:
        best_power, _, _ = solar.underestimator_derivs(
            min(max(spec.fix_z, lo), hi), spec.z_ref, branch, inst.solar
        )
    if best_power <= inst.sys.p_uav:
        spec.infeasible = True
        spec.infeasible_reason = (
            f"branch {branch.label}: harvested power bound "
            f"{best_power:.4g} W never exceeds hover power {inst.sys.p_uav:.4g} W (C1)"
        )
        return spec

    # Objective term matrix: one row per active pair (k, i); columns are
    # all active powers on subcarrier i (coefficient H[k, i]) plus theta_k.
    user_slot = {int(u): spec.n_p + j for j, u in enumerate(spec.users_active)}
    A = np.zeros((spec.n_p, n))
    h = inst.h_gain
    for t in range(spec.n_p):
        k, i = int(pair_k[t]), int(pair_i[t])
        A[t, np.nonzero(pair_i == i)[0]] = h[k, i]
        A[t, user_slot[k]] = 1.0
    spec.A = A

    # Affine surrogate part (gradient of G frozen at the linearization point).
    c_aff = np.zeros(n)
    gp_active = (spec.grad_p * mask)[pair_k, pair_i]
    c_aff[: spec.n_p] = gp_active
    gth_active = spec.grad_theta[spec.users_active]
    c_aff[spec.n_p : spec.n_p + spec.n_u] = gth_active
    spec.c_aff = c_aff
    spec.f_const = float(
        spec.g0
        - np.dot(gp_active, spec.p_lin[pair_k, pair_i])
        - np.dot(gth_active, spec.theta_lin[spec.users_active]),
    )

    # Characteristic constraint scales for the normalized KKT residual.
    scales = [inst.sys.p_max] * spec.n_p + [inst.sys.p_max, inst.sys.p_max]
    if spec.idx_z is not None:
        zs = max(hi - lo, 1.0)
        scales += [zs, zs]
    scales += [spec.theta_cap] * spec.n_u  # C7
    scales += [spec.theta_cap] * spec.n_u  # theta cap
    spec.cons_scale = np.array(scales)
    return spec


def _position(spec: SubproblemSpec, x: np.ndarray) -> tuple[float, float, float]:
    px = x[spec.idx_x] if spec.idx_x is not None else spec.fix_x
    py = x[spec.idx_y] if spec.idx_y is not None else spec.fix_y
    pz = x[spec.idx_z] if spec.idx_z is not None else spec.fix_z
    return float(px), float(py), float(pz)


def _cons_values(spec: SubproblemSpec, x: np.ndarray) -> np.ndarray:
    """Constraint slacks c_j(x) >= 0, in a fixed documented order."""
    inst = spec.inst
    px, py, pz = _position(spec, x)
    p = x[: spec.n_p]
    th = x[spec.n_p : spec.n_p + spec.n_u]
    psum = p.sum()
    pz_clip = min(max(pz, spec.z_lo), spec.z_hi)
    pbar, _, _ = solar.underestimator_derivs(pz_clip, spec.z_ref, spec.branch, inst.solar)
    out = [p, [inst.sys.p_max - psum, pbar - inst.sys.p_uav - psum]]
    if spec.idx_z is not None:
        out.append([pz - spec.z_lo, spec.z_hi - pz])
    users = inst.users[spec.users_active]
    d2 = (px - users[:, 0]) ** 2 + (py - users[:, 1]) ** 2 + pz**2
    out.append(th - d2)
    out.append(spec.theta_cap - th)
    return np.concatenate([np.atleast_1d(np.asarray(o, dtype=float)) for o in out])


def _f_grad(spec: SubproblemSpec, x: np.ndarray):
    """Minimization objective -surrogate and its gradient."""
    u = spec.A @ x
    if np.any(u <= 0):
        return math.inf, None
    f = -np.sum(np.log(u)) / LN2 - float(np.dot(spec.c_aff, x)) - spec.f_const
    g = -(spec.A.T @ (1.0 / u)) / LN2 - spec.c_aff
    return f, g


def surrogate_value(spec: SubproblemSpec, x: np.ndarray) -> float:
    """Surrogate objective (maximization sense) at a variable vector."""
    f, _ = _f_grad(spec, x)
    return -f


def _grad_hess(spec: SubproblemSpec, x: np.ndarray, t: float):
    """phi = f + (1/t) * barrier, with analytic gradient and Hessian."""
    inst = spec.inst
    n = spec.n_var
    u = spec.A @ x
    f = -np.sum(np.log(u)) / LN2 - float(np.dot(spec.c_aff, x)) - spec.f_const
    g = -(spec.A.T @ (1.0 / u)) / LN2 - spec.c_aff
    H = (spec.A * (1.0 / u**2)[:, None]).T @ spec.A / LN2

    inv_t = 1.0 / t
    p = x[: spec.n_p]
    th = x[spec.n_p : spec.n_p + spec.n_u]
    px, py, pz = _position(spec, x)
    barrier = 0.0

    # p >= 0
    barrier -= np.sum(np.log(p))
    g[: spec.n_p] -= inv_t / p
    diag = np.zeros(n)
    diag[: spec.n_p] += 1.0 / p**2

    # sum p <= P_max
    psum = p.sum()
    c_s = inst.sys.p_max - psum
    barrier -= math.log(c_s)
    g[: spec.n_p] += inv_t / c_s
    pblock = np.s_[: spec.n_p]
    H[pblock, pblock] += inv_t / c_s**2

    # harvested-power budget
    pbar, pbar_d1, pbar_d2 = solar.underestimator_derivs(
        pz, spec.z_ref, spec.branch, inst.solar
    )
    c_b = pbar - inst.sys.p_uav - psum
    barrier -= math.log(c_b)
    g[: spec.n_p] += inv_t / c_b
    grad_cb = np.zeros(n)
    grad_cb[: spec.n_p] = -1.0
    if spec.idx_z is not None:
        grad_cb[spec.idx_z] = pbar_d1
        g[spec.idx_z] -= inv_t * pbar_d1 / c_b
        diag[spec.idx_z] += -pbar_d2 / c_b  # -d2/c, d2 <= 0 on every branch
    H += (inv_t / c_b**2) * np.outer(grad_cb, grad_cb)

    # altitude box
    if spec.idx_z is not None:
        c_zl = pz - spec.z_lo
        c_zh = spec.z_hi - pz
        barrier -= math.log(c_zl) + math.log(c_zh)
        g[spec.idx_z] += inv_t * (-1.0 / c_zl + 1.0 / c_zh)
        diag[spec.idx_z] += 1.0 / c_zl**2 + 1.0 / c_zh**2

    # C7: theta_k >= squared distance
    users = inst.users[spec.users_active]
    dx = px - users[:, 0]
    dy = py - users[:, 1]
    d2 = dx**2 + dy**2 + pz**2
    c7 = th - d2
    barrier -= np.sum(np.log(c7))
    th_slots = spec.n_p + np.arange(spec.n_u)
    g[th_slots] -= inv_t / c7
    for j in range(spec.n_u):
        gc = np.zeros(n)
        gc[th_slots[j]] = 1.0
        if spec.idx_x is not None:
            gc[spec.idx_x] = -2.0 * dx[j]
            g[spec.idx_x] += inv_t * 2.0 * dx[j] / c7[j]
            diag[spec.idx_x] += 2.0 / c7[j]
        if spec.idx_y is not None:
            gc[spec.idx_y] = -2.0 * dy[j]
            g[spec.idx_y] += inv_t * 2.0 * dy[j] / c7[j]
            diag[spec.idx_y] += 2.0 / c7[j]
        if spec.idx_z is not None:
            gc[spec.idx_z] = -2.0 * pz
            g[spec.idx_z] += inv_t * 2.0 * pz / c7[j]
            diag[spec.idx_z] += 2.0 / c7[j]
        H += (inv_t / c7[j] ** 2) * np.outer(gc, gc)

    # theta cap
    c_cap = spec.theta_cap - th
    barrier -= np.sum(np.log(c_cap))
    g[th_slots] += inv_t / c_cap
    diag[th_slots] += 1.0 / c_cap**2

    H[np.diag_indices(n)] += inv_t * diag
    phi = f + inv_t * barrier
    return phi, f, g, H


def _phi_value(spec: SubproblemSpec, x: np.ndarray, t: float):
    """Barrier objective value; (inf, False) outside the strict interior."""
    c = _cons_values(spec, x)
    if np.any(c <= 0):
        return math.inf, False
    f, _ = _f_grad(spec, x)
    if not math.isfinite(f):
        return math.inf, False
    return f - np.sum(np.log(c)) / t, True


def _scaling(spec: SubproblemSpec) -> np.ndarray:
    """Variable scales used to condition the Newton systems."""
    d = np.ones(spec.n_var)
    d[: spec.n_p] = max(spec.inst.sys.p_max, 1.0)
    d[spec.n_p : spec.n_p + spec.n_u] = spec.theta_cap
    for idx in (spec.idx_x, spec.idx_y, spec.idx_z):
        if idx is not None:
            d[idx] = max(spec.inst.sys.cell_radius, spec.inst.sys.z_max)
    return d


def _newton_center(spec, x, t, d, budget):
    """Damped Newton to the central point for barrier parameter t."""
    phi, ok = _phi_value(spec, x, t)
    if not ok:
        raise SubproblemError("Newton started at an infeasible point")
    iters = 0
    converged = False
    while iters < budget:
        _, _, g, H = _grad_hess(spec, x, t)
        Hs = H * d[:, None] * d[None, :]
        gs = g * d
        ridge = 0.0
        for _ in range(12):
            try:
                L = np.linalg.cholesky(Hs + ridge * np.eye(spec.n_var))
                break
            except np.linalg.LinAlgError:
                ridge = max(ridge * 10.0, 1e-12)
        else:
            raise SubproblemError("Hessian factorization failed")
        ds = -np.linalg.solve(L.T, np.linalg.solve(L, gs))
        step = ds * d
        dec = -float(np.dot(gs, ds))
        iters += 1
        if dec / 2.0 <= 1e-13 * (1.0 + abs(phi)):
            converged = True
            break
        alpha = 1.0
        gdotstep = float(np.dot(g, step))
        improved = False
        for _ in range(60):
            phi_new, ok = _phi_value(spec, x + alpha * step, t)
            if ok and phi_new <= phi + 0.25 * alpha * gdotstep:
                x = x + alpha * step
                phi = phi_new
                improved = True
                break
            alpha *= 0.5
        if not improved:
            converged = True  # at the numerical floor for this t
            break
    return x, iters, converged


def _strict_start(spec: SubproblemSpec) -> Optional[np.ndarray]:
    """Strictly feasible start near the linearization point, or None."""
    inst = spec.inst
    lo, hi = spec.z_lo, spec.z_hi
    p_lin = spec.p_lin[spec.pair_k, spec.pair_i]
    th_lin = spec.theta_lin[spec.users_active]

    if spec.fix_z is not None:
        z0 = spec.fix_z
    else:
        eps_z = max(1e-6 * (hi - lo), 1e-9)
        z_best, _ = _underestimator_max(spec.branch, spec.z_ref, inst.solar)
        z0 = min(max(spec.z_ref, lo + eps_z), hi - eps_z)
        budget_ref, _, _ = solar.underestimator_derivs(z0, spec.z_ref, spec.branch, inst.solar)
        if budget_ref - inst.sys.p_uav <= max(1.25 * p_lin.sum(), 1e-9 * inst.sys.p_max):
            z0 = min(max(z_best, lo + eps_z), hi - eps_z)
    pbar0, _, _ = solar.underestimator_derivs(
        min(max(z0, lo), hi), spec.z_ref, spec.branch, inst.solar
    )
    budget0 = min(inst.sys.p_max, pbar0 - inst.sys.p_uav)
    if budget0 <= 1e-12 * max(1.0, inst.sys.p_uav):
        return None

    eps_p = min(1e-12 * inst.sys.p_max, 1e-3 * budget0 / max(spec.n_p, 1))
    p0 = np.maximum(p_lin, eps_p)
    s = p0.sum()
    if s > 0.9 * budget0:
        p0 *= 0.9 * budget0 / s

    px = spec.fix_x if spec.fix_x is not None else spec.r_lin[0]
    py = spec.fix_y if spec.fix_y is not None else spec.r_lin[1]
    users = inst.users[spec.users_active]
    d2 = (px - users[:, 0]) ** 2 + (py - users[:, 1]) ** 2 + z0**2
    th0 = np.maximum(th_lin, d2 + 1e-6 * np.maximum(d2, 1.0))
    th0 = np.minimum(th0, spec.theta_cap * (1.0 - 1e-9))
    if np.any(th0 <= d2):
        return None

    x = np.empty(spec.n_var)
    x[: spec.n_p] = p0
    x[spec.n_p : spec.n_p + spec.n_u] = th0
    if spec.idx_x is not None:
        x[spec.idx_x] = px
    if spec.idx_y is not None:
        x[spec.idx_y] = py
    if spec.idx_z is not None:
        x[spec.idx_z] = z0
    c = _cons_values(spec, x)
    if np.any(c <= 0):
        return None
    return x


def _assemble_full(spec: SubproblemSpec, x: np.ndarray) -> Iterate:
    """Expand the variable vector back to a full-size iterate."""
    inst = spec.inst
    k_users, n_f = inst.h_gain.shape
    p = np.zeros((k_users, n_f))
    p[spec.pair_k, spec.pair_i] = np.maximum(x[: spec.n_p], 0.0)
    px, py, pz = _position(spec, x)
    r = np.array([px, py, pz])
    theta = np.sum((r[None, :] - inst.users) ** 2, axis=1)
    theta_active = x[spec.n_p : spec.n_p + spec.n_u]
    theta[spec.users_active] = theta_active
    return Iterate(p_tilde=p, r=r, theta=theta, branch=spec.branch)


def solve_subproblem(spec: SubproblemSpec) -> SubSolution:
    """Solve the assembled concave subproblem by the log-barrier method.

    Deterministic for fixed inputs.  Returns status 'optimal' when the
    normalized KKT residual meets options.kkt_tol, 'max_iter' when the
    Newton budget runs out, 'infeasible' when no strictly feasible start
    exists.
    """
    if spec.infeasible:
        raise SubproblemError(f"subproblem flagged infeasible: {spec.infeasible_reason}")
    opts = spec.options
    x = _strict_start(spec)
    if x is None:
        it = Iterate(
            p_tilde=spec.p_lin.copy(),
            r=spec.r_lin.copy(),
            theta=np.maximum(spec.theta_lin, 1e-12),
            branch=spec.branch,
        )
        return SubSolution(it, -math.inf, math.inf, STATUS_INFEASIBLE)

    d = _scaling(spec)
    m = spec.n_cons
    t = getattr(opts, "barrier_t0", 1.0)
    mu = getattr(opts, "barrier_mu", 30.0)
    comp_tol = getattr(opts, "comp_tol", 1e-8)
    budget = getattr(opts, "max_newton", 500)
    used = 0
    status = STATUS_OPTIMAL
    while True:
        x, iters, converged = _newton_center(spec, x, t, d, budget - used)
        used += iters
        if m / t <= comp_tol:
            if not converged:
                status = STATUS_MAX_ITER
            break
        if used >= budget:
            status = STATUS_MAX_ITER
            break
        t *= mu

    sol_it = _assemble_full(spec, x)
    resid = kkt_residual_vector(spec, x)
    if status == STATUS_OPTIMAL and resid > getattr(opts, "kkt_tol", 1e-6):
        status = STATUS_MAX_ITER
    return SubSolution(sol_it, surrogate_value(spec, x), resid, status, used)


def _variable_vector(spec: SubproblemSpec, iterate: Iterate) -> np.ndarray:
    x = np.empty(spec.n_var)
    x[: spec.n_p] = iterate.p_tilde[spec.pair_k, spec.pair_i]
    x[spec.n_p : spec.n_p + spec.n_u] = iterate.theta[spec.users_active]
    if spec.idx_x is not None:
        x[spec.idx_x] = iterate.r[0]
    if spec.idx_y is not None:
        x[spec.idx_y] = iterate.r[1]
    if spec.idx_z is not None:
        x[spec.idx_z] = iterate.r[2]
    return x


def _cons_jacobian(spec: SubproblemSpec, x: np.ndarray) -> np.ndarray:
    """Dense Jacobian of the constraint slacks, rows matching _cons_values."""
    inst = spec.inst
    n = spec.n_var
    px, py, pz = _position(spec, x)
    rows = []
    for j in range(spec.n_p):
        r = np.zeros(n)
        r[j] = 1.0
        rows.append(r)
    r = np.zeros(n)
    r[: spec.n_p] = -1.0
    rows.append(r)  # P_max - sum
    r = np.zeros(n)
    r[: spec.n_p] = -1.0
    if spec.idx_z is not None:
        _, d1, _ = solar.underestimator_derivs(
            min(max(pz, spec.z_lo), spec.z_hi), spec.z_ref, spec.branch, inst.solar
        )
        r[spec.idx_z] = d1
    rows.append(r)  # budget
    if spec.idx_z is not None:
        r = np.zeros(n)
        r[spec.idx_z] = 1.0
        rows.append(r)
        r = np.zeros(n)
        r[spec.idx_z] = -1.0
        rows.append(r)
    users = inst.users[spec.users_active]
    for j in range(spec.n_u):
        r = np.zeros(n)
        r[spec.n_p + j] = 1.0
        if spec.idx_x is not None:
            r[spec.idx_x] = -2.0 * (px - users[j, 0])
        if spec.idx_y is not None:
            r[spec.idx_y] = -2.0 * (py - users[j, 1])
        if spec.idx_z is not None:
            r[spec.idx_z] = -2.0 * pz
        rows.append(r)
    for j in range(spec.n_u):
        r = np.zeros(n)
        r[spec.n_p + j] = -1.0
        rows.append(r)
    return np.vstack(rows)


def kkt_residual_vector(spec: SubproblemSpec, x: np.ndarray) -> float:
    """Normalized KKT residual of a variable vector for this subproblem.

    Multipliers are recovered by a nonnegative least-squares fit of the
    stationarity and complementary-slackness conditions; the residual
    adds scaled primal-feasibility violations.  Zero for an exact KKT
    point of the concave subproblem.
    """
    c = _cons_values(spec, x)
    J = _cons_jacobian(spec, x)
    f, g = _f_grad(spec, x)
    if g is None:
        return math.inf
    d = _scaling(spec)
    # Stationarity in scaled variables keeps the fit well conditioned.
    stacked = np.vstack([J.T * d[:, None], np.diag(np.maximum(c, 0.0) / spec.cons_scale)])
    target = np.concatenate([g * d, np.zeros(spec.n_cons)])
    lam, _ = nnls(stacked, target, maxiter=10 * stacked.shape[1])
    res = stacked @ lam - target
    gnorm = max(1.0, float(np.linalg.norm(g * d)))
    stat_comp = float(np.linalg.norm(res)) / gnorm
    feas = float(np.sum(np.maximum(0.0, -c) / spec.cons_scale))
    return stat_comp + feas


def kkt_residual(solution: SubSolution, spec: SubproblemSpec) -> float:
    """Normalized KKT residual of a candidate solution (see kkt_residual_vector)."""
    return kkt_residual_vector(spec, _variable_vector(spec, solution.iterate))

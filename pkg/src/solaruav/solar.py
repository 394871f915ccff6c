"""Piecewise solar output power model for a cloud-covered service area.

The electrical output of the panels depends on altitude through two
effects: atmospheric transmittance (improves with altitude) and cloud
absorption (solar light is attenuated over the in-cloud path length).
The resulting power curve has three branches: above the cloud layer,
inside it, and below it.  The in-cloud branch is non-concave, so the
optimizer works with a per-branch global underestimator that is tangent
at the current linearization altitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

ABOVE_CLOUD = "above_cloud"
IN_CLOUD = "in_cloud"
BELOW_CLOUD = "below_cloud"


class SolarModelError(ValueError):
    """Domain error in the solar power model (bad altitude or branch)."""


@dataclass(frozen=True)
class SolarParams:
    """Constants of the solar harvesting model.

    alpha, beta, delta parameterize atmospheric transmittance; beta_c is
    the cloud absorption coefficient (per meter); l_low/l_up bound the
    cloud layer; eta, s_area, g_rad are panel efficiency, panel area in
    m^2, and average solar radiation in W/m^2.
    """

    alpha: float = 0.8978
    beta: float = 0.2804
    delta: float = 8000.0
    beta_c: float = 0.01
    l_low: float = 700.0
    l_up: float = 1400.0
    eta: float = 0.4
    s_area: float = 1.0
    g_rad: float = 1367.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise SolarModelError(f"alpha must be in (0, 1], got {self.alpha}")
        if not (0.0 <= self.beta < self.alpha):
            raise SolarModelError(f"beta must be in [0, alpha), got {self.beta}")
        if self.delta <= 0.0:
            raise SolarModelError(f"delta must be positive, got {self.delta}")
        if self.beta_c < 0.0:
            raise SolarModelError(f"beta_c must be nonnegative, got {self.beta_c}")
        if not (0.0 <= self.l_low <= self.l_up):
            raise SolarModelError(
                f"cloud boundaries need 0 <= l_low <= l_up, got {self.l_low}, {self.l_up}"
            )
        if not (0.0 < self.eta <= 1.0):
            raise SolarModelError(f"eta must be in (0, 1], got {self.eta}")
        if self.s_area <= 0.0:
            raise SolarModelError(f"s_area must be positive, got {self.s_area}")
        if self.g_rad <= 0.0:
            raise SolarModelError(f"g_rad must be positive, got {self.g_rad}")

    # Derived constants of the reduced (precomputed-constant) form.
    @property
    def a_const(self) -> float:
        return self.eta * self.s_area * self.g_rad * self.alpha

    @property
    def b_const(self) -> float:
        return self.eta * self.s_area * self.g_rad * self.beta

    @property
    def c1(self) -> float:
        return math.exp(-self.beta_c * self.l_up)

    @property
    def c2(self) -> float:
        return math.exp(-self.beta_c * (self.l_up - self.l_low))


@dataclass(frozen=True)
class AltitudeBranch:
    """One altitude regime of the piecewise solar model.

    z_interval is the closed intersection of the branch's natural
    interval with the admissible altitude box; an empty intersection is
    never constructed (callers get None instead).
    """

    label: str
    z_interval: tuple[float, float]

    def __post_init__(self):
        if self.label not in (ABOVE_CLOUD, IN_CLOUD, BELOW_CLOUD):
            raise SolarModelError(f"unknown branch label {self.label!r}")
        lo, hi = self.z_interval
        if lo > hi:
            raise SolarModelError(f"inverted branch interval [{lo}, {hi}]")

    def contains(self, z: float, tol: float = 1e-9) -> bool:
        lo, hi = self.z_interval
        return lo - tol <= z <= hi + tol


def branch_label(z: float, p: SolarParams) -> str:
    """Branch membership convention: z = l_up is above-cloud, z = l_low in-cloud."""
    if z < 0.0:
        raise SolarModelError(f"altitude must be nonnegative, got {z}")
    if z >= p.l_up:
        return ABOVE_CLOUD
    if z >= p.l_low:
        return IN_CLOUD
    return BELOW_CLOUD


def altitude_branches(p: SolarParams, z_min: float, z_max: float) -> list[AltitudeBranch]:
    """Branches intersected with [z_min, z_max], highest altitude first.

    Branches whose intersection is empty are omitted.
    """
    if z_min > z_max:
        raise SolarModelError(f"need z_min <= z_max, got {z_min} > {z_max}")
    natural = [
        (ABOVE_CLOUD, p.l_up, math.inf),
        (IN_CLOUD, p.l_low, p.l_up),
        (BELOW_CLOUD, 0.0, p.l_low),
    ]
    out = []
    for label, lo, hi in natural:
        a, b = max(lo, z_min), min(hi, z_max)
        if a <= b:
            out.append(AltitudeBranch(label, (a, b)))
    return out


def branch_for(z: float, p: SolarParams, z_min: float, z_max: float) -> Optional[AltitudeBranch]:
    """The branch containing altitude z, or None if z is outside the box."""
    for b in altitude_branches(p, z_min, z_max):
        if branch_label(z, p) == b.label and b.contains(z):
            return b
    return None


def transmittance(z: float, p: SolarParams) -> float:
    """Atmospheric transmittance at altitude z (meters), in (alpha - beta, alpha)."""
    if z < 0.0:
        raise SolarModelError(f"altitude must be nonnegative, got {z}")
    return p.alpha - p.beta * math.exp(-z / p.delta)


def cloud_attenuation(d_cloud: float, p: SolarParams) -> float:
    """Fraction of solar intensity surviving an in-cloud path of d_cloud meters."""
    if d_cloud < 0.0:
        raise SolarModelError(f"cloud path length must be nonnegative, got {d_cloud}")
    return math.exp(-p.beta_c * d_cloud)


def _cloud_path(z: float, p: SolarParams) -> float:
    """In-cloud path length of vertically incident light for a panel at z."""
    label = branch_label(z, p)
    if label == ABOVE_CLOUD:
        return 0.0
    if label == IN_CLOUD:
        return p.l_up - z
    return p.l_up - p.l_low


def solar_power(z: float, p: SolarParams) -> float:
    """Electrical panel output power (W) at altitude z, product form."""
    return p.eta * p.s_area * p.g_rad * transmittance(z, p) * cloud_attenuation(_cloud_path(z, p), p)


def solar_power_reduced(z: float, p: SolarParams) -> float:
    """Panel output power via the precomputed constants A, B, C1, C2, M(z).

    Algebraically identical to solar_power; kept separate so the
    equivalence can be tested.
    """
    label = branch_label(z, p)
    if label == ABOVE_CLOUD:
        return p.a_const - p.b_const * math.exp(-z / p.delta)
    if label == IN_CLOUD:
        m_z = p.a_const * p.c1 * math.exp(p.beta_c * z)
        return m_z - p.b_const * p.c1 * math.exp((p.beta_c - 1.0 / p.delta) * z)
    return p.a_const * p.c2 - p.b_const * p.c2 * math.exp(-z / p.delta)


def solar_power_max(p: SolarParams) -> float:
    """Upper bound eta * S * G * alpha on the panel output at any altitude."""
    return p.a_const


def solar_power_underestimator(
    z: float, z_ref: float, branch: AltitudeBranch, p: SolarParams
) -> float:
    """Concave global underestimator of solar_power on the given branch.

    The above- and below-cloud branch expressions are already concave
    and are returned exactly.  The in-cloud branch replaces the convex
    term M(z) = A*C1*exp(beta_c*z) with its tangent at z_ref, which
    under-estimates the branch everywhere and is tight at z = z_ref.
    """
    if not branch.contains(z):
        raise SolarModelError(f"z={z} outside branch interval {branch.z_interval}")
    if not branch.contains(z_ref):
        raise SolarModelError(f"z_ref={z_ref} outside branch interval {branch.z_interval}")
    val, _, _ = underestimator_derivs(z, z_ref, branch, p)
    return val


def underestimator_derivs(
    z: float, z_ref: float, branch: AltitudeBranch, p: SolarParams
) -> tuple[float, float, float]:
    """Value and first/second z-derivatives of the branch underestimator.

    Used by the interior-point solver, which needs the curvature of the
    harvested-power constraint.
    """
    if branch.label == ABOVE_CLOUD:
        e = math.exp(-z / p.delta)
        val = p.a_const - p.b_const * e
        d1 = (p.b_const / p.delta) * e
        d2 = -(p.b_const / p.delta**2) * e
        return val, d1, d2
    if branch.label == BELOW_CLOUD:
        e = math.exp(-z / p.delta)
        val = p.c2 * (p.a_const - p.b_const * e)
        d1 = p.c2 * (p.b_const / p.delta) * e
        d2 = -p.c2 * (p.b_const / p.delta**2) * e
        return val, d1, d2
    # In-cloud: tangent of M(z) at z_ref minus the (concave-friendly) exp term.
    m_ref = p.a_const * p.c1 * math.exp(p.beta_c * z_ref)
    m_lin = m_ref + m_ref * p.beta_c * (z - z_ref)
    m_lin_d1 = m_ref * p.beta_c
    k = p.beta_c - 1.0 / p.delta
    e = p.b_const * p.c1 * math.exp(k * z)
    val = m_lin - e
    d1 = m_lin_d1 - k * e
    d2 = -k * k * e
    return val, d1, d2

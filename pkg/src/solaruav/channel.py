"""Air-to-ground channel model and scenario generation.

Users are dropped uniformly in a disk around the origin; small-scale
fading is Rician with unit mean power.  All channel randomness of one
scheduling slot is collapsed into the normalized gain matrix
H[k, i] = pathgain_const * |h_k_i|^2 / noise_power, so that the SNR of
user k on subcarrier i is H[k, i] * p / dist(uav, user_k)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .solar import SolarParams

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact


class ChannelModelError(ValueError):
    """Domain error in the channel model."""


@dataclass(frozen=True)
class SystemParams:
    """System-level constants of one deployment (all linear units, watts/Hz/m)."""

    f0: float = 2.0e9
    n_subcarriers: int = 64
    subcarrier_bw: float = 78e3
    noise_power: float = 1e-14  # -110 dBm
    p_max: float = 10.0
    p_uav: float = 200.0
    z_min: float = 100.0
    z_max: float = 1500.0
    cell_radius: float = 1500.0
    rician_k_db: float = 3.0

    def __post_init__(self):
        positive = {
            "f0": self.f0,
            "n_subcarriers": self.n_subcarriers,
            "subcarrier_bw": self.subcarrier_bw,
            "noise_power": self.noise_power,
            "p_max": self.p_max,
            "p_uav": self.p_uav,
            "z_min": self.z_min,
            "z_max": self.z_max,
            "cell_radius": self.cell_radius,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ChannelModelError(f"{name} must be positive, got {value}")
        if self.z_min >= self.z_max:
            raise ChannelModelError(
                f"need z_min < z_max, got {self.z_min} >= {self.z_max}"
            )


@dataclass(frozen=True)
class Instance:
    """One scheduling slot: constants, user drop, and fading realization.

    users is a (K, 3) array of ground positions with z = 0; h_gain is the
    (K, N_F) matrix of normalized channel constants.
    """

    sys: SystemParams
    solar: SolarParams
    users: np.ndarray
    h_gain: np.ndarray

    def __post_init__(self):
        users = np.asarray(self.users, dtype=float)
        h_gain = np.asarray(self.h_gain, dtype=float)
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "h_gain", h_gain)
        if users.ndim != 2 or users.shape[1] != 3 or users.shape[0] < 1:
            raise ChannelModelError(f"users must be (K, 3) with K >= 1, got {users.shape}")
        if np.any(users[:, 2] != 0.0):
            raise ChannelModelError("user z-coordinates must be exactly 0")
        if h_gain.shape != (users.shape[0], self.sys.n_subcarriers):
            raise ChannelModelError(
                f"h_gain shape {h_gain.shape} does not match "
                f"(K={users.shape[0]}, N_F={self.sys.n_subcarriers})"
            )
        if np.any(h_gain <= 0.0):
            raise ChannelModelError("all channel constants must be strictly positive")

    @property
    def n_users(self) -> int:
        return self.users.shape[0]

    @property
    def n_subcarriers(self) -> int:
        return self.sys.n_subcarriers


def path_gain_constant(f0: float) -> float:
    """Free-space reference gain (c / (4 pi f0))^2."""
    if f0 <= 0:
        raise ChannelModelError(f"carrier frequency must be positive, got {f0}")
    return (SPEED_OF_LIGHT / (4.0 * math.pi * f0)) ** 2


def sample_users(rng: np.random.Generator, k: int, radius: float) -> np.ndarray:
    """Draw k user positions uniformly over the disk of given radius, z = 0."""
    if k < 1:
        raise ChannelModelError(f"need at least one user, got k={k}")
    if radius <= 0:
        raise ChannelModelError(f"cell radius must be positive, got {radius}")
    # Inverse-CDF radial sampling: P(R <= r) = (r/radius)^2.
    r = radius * np.sqrt(rng.uniform(size=k))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=k)
    pos = np.zeros((k, 3))
    pos[:, 0] = r * np.cos(phi)
    pos[:, 1] = r * np.sin(phi)
    return pos


def sample_fading(
    rng: np.random.Generator, k: int, n_f: int, rician_k_db: float
) -> np.ndarray:
    """Draw i.i.d. squared Rician envelopes |h|^2, normalized to E[|h|^2] = 1.

    The linear K-factor kappa = 10^(rician_k_db/10) splits unit power
    between a deterministic LoS component kappa/(kappa+1) and a diffuse
    complex Gaussian component of variance 1/(kappa+1).
    """
    if k < 1 or n_f < 1:
        raise ChannelModelError("user and subcarrier counts must be >= 1")
    kappa = 10.0 ** (rician_k_db / 10.0)
    los = math.sqrt(kappa / (kappa + 1.0))
    sigma = math.sqrt(1.0 / (2.0 * (kappa + 1.0)))  # per real dimension
    re = los + sigma * rng.standard_normal((k, n_f))
    im = sigma * rng.standard_normal((k, n_f))
    return re**2 + im**2


def rate_per_subcarrier(
    p: float, h_gain_entry: float, r: np.ndarray, r_k: np.ndarray
) -> float:
    """Interference-free spectral efficiency log2(1 + H p / dist^2) in bits/s/Hz."""
    if p < 0:
        raise ChannelModelError(f"transmit power must be nonnegative, got {p}")
    d2 = float(np.sum((np.asarray(r, dtype=float) - np.asarray(r_k, dtype=float)) ** 2))
    if d2 <= 0.0:
        raise ChannelModelError("transmitter and receiver positions coincide")
    return math.log2(1.0 + h_gain_entry * p / d2)


def make_instance(
    rng: np.random.Generator,
    sys: SystemParams,
    solar: SolarParams,
    k: int,
) -> Instance:
    """Draw one slot: user placement plus fading, assembled into H[k, i]."""
    users = sample_users(rng, k, sys.cell_radius)
    fading = sample_fading(rng, k, sys.n_subcarriers, sys.rician_k_db)
    h_gain = path_gain_constant(sys.f0) * fading / sys.noise_power
    return Instance(sys=sys, solar=solar, users=users, h_gain=h_gain)

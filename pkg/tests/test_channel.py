"""Tests for the air-to-ground channel and instance sampling."""

import math

import numpy as np
import pytest

from solaruav.channel import (
    ChannelModelError,
    Instance,
    SystemParams,
    make_instance,
    path_gain_constant,
    rate_per_subcarrier,
    sample_fading,
    sample_users,
)
from solaruav.solar import SolarParams


class TestPathGainConstant:
    def test_two_ghz_value(self):
        # (c / (4 pi f0))^2 at the default carrier
        assert path_gain_constant(2e9) == pytest.approx(1.4228584142858625e-4, rel=1e-12)

    def test_quadratic_in_wavelength(self):
        assert path_gain_constant(1e9) == pytest.approx(4 * path_gain_constant(2e9), rel=1e-12)

    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(ChannelModelError):
            path_gain_constant(0.0)


class TestSampleUsers:
    def test_inside_disk_on_ground(self):
        rng = np.random.default_rng(0)
        users = sample_users(rng, 500, 1500.0)
        assert users.shape == (500, 3)
        assert np.all(users[:, 2] == 0.0)
        assert np.all(np.hypot(users[:, 0], users[:, 1]) <= 1500.0 + 1e-9)

    def test_uniform_over_area_not_radius(self):
        # Uniform-in-area means median radius R/sqrt(2), not R/2.
        rng = np.random.default_rng(1)
        users = sample_users(rng, 20000, 1000.0)
        radii = np.hypot(users[:, 0], users[:, 1])
        assert np.median(radii) == pytest.approx(1000.0 / math.sqrt(2), rel=0.02)

    def test_deterministic_under_seed(self):
        a = sample_users(np.random.default_rng(42), 10, 1500.0)
        b = sample_users(np.random.default_rng(42), 10, 1500.0)
        np.testing.assert_array_equal(a, b)


class TestSampleFading:
    def test_unit_mean_power(self):
        rng = np.random.default_rng(2)
        h2 = sample_fading(rng, 100, 1000, rician_k_db=3.0)
        assert h2.mean() == pytest.approx(1.0, rel=0.01)

    def test_strictly_positive(self):
        rng = np.random.default_rng(3)
        assert np.all(sample_fading(rng, 50, 64, 3.0) > 0)

    def test_large_k_concentrates_near_one(self):
        rng = np.random.default_rng(4)
        h2 = sample_fading(rng, 100, 100, rician_k_db=40.0)
        assert h2.std() < 0.05

    def test_rejects_empty_dimensions(self):
        with pytest.raises(ChannelModelError):
            sample_fading(np.random.default_rng(0), 0, 4, 3.0)


class TestRatePerSubcarrier:
    def test_hand_value(self):
        # gain/d^2 * p = 1 -> exactly one bit
        r = np.array([0.0, 0.0, 100.0])
        r_k = np.zeros(3)
        rate = rate_per_subcarrier(1.0, 1e4, r, r_k)
        assert rate == pytest.approx(1.0, rel=1e-12)

    def test_zero_power_zero_rate(self):
        assert rate_per_subcarrier(0.0, 1e4, np.array([0, 0, 100.0]), np.zeros(3)) == 0.0

    def test_rejects_negative_power(self):
        with pytest.raises(ChannelModelError):
            rate_per_subcarrier(-1.0, 1e4, np.array([0, 0, 100.0]), np.zeros(3))

    def test_rejects_coincident_positions(self):
        with pytest.raises(ChannelModelError):
            rate_per_subcarrier(1.0, 1e4, np.zeros(3), np.zeros(3))


class TestInstance:
    def test_make_instance_shapes(self):
        inst = make_instance(
            np.random.default_rng(0), SystemParams(n_subcarriers=8), SolarParams(), 3
        )
        assert inst.n_users == 3
        assert inst.n_subcarriers == 8
        assert inst.users.shape == (3, 3)
        assert inst.h_gain.shape == (3, 8)
        assert np.all(inst.h_gain > 0)

    def test_h_gain_magnitude(self):
        # path gain / noise power ~ 1.4e-4 / 1e-14 = 1.4e10 before fading
        inst = make_instance(
            np.random.default_rng(0), SystemParams(n_subcarriers=64), SolarParams(), 2
        )
        assert 1e9 < np.median(inst.h_gain) < 1e11

    def test_rejects_wrong_shapes(self):
        sys = SystemParams(n_subcarriers=4)
        with pytest.raises(ChannelModelError):
            Instance(
                sys=sys,
                solar=SolarParams(),
                users=np.zeros((2, 3)),
                h_gain=np.ones((2, 5)),
            )

    def test_rejects_users_off_ground(self):
        sys = SystemParams(n_subcarriers=4)
        users = np.array([[0.0, 0.0, 5.0], [1.0, 1.0, 0.0]])
        with pytest.raises(ChannelModelError):
            Instance(sys=sys, solar=SolarParams(), users=users, h_gain=np.ones((2, 4)))


class TestSystemParams:
    def test_defaults_are_self_consistent(self):
        sys = SystemParams()
        assert sys.z_min < sys.z_max
        assert sys.p_max > 0 and sys.p_uav > 0

    def test_rejects_inverted_altitude_box(self):
        with pytest.raises(ChannelModelError):
            SystemParams(z_min=2000.0, z_max=1500.0)

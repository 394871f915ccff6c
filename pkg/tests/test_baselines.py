"""Tests for the two restricted comparison schemes."""

import numpy as np
import pytest

from solaruav.baselines import baseline1_fixed_xy, baseline2_random_assignment
from solaruav.channel import SystemParams, make_instance
from solaruav.sca import SolverOptions, constraint_report, sca_solve
from solaruav.solar import SolarParams


def _instance(seed=0, k=3, n_f=8):
    rng = np.random.default_rng(seed)
    return make_instance(rng, SystemParams(n_subcarriers=n_f), SolarParams(), k)


class TestBaseline1:
    def test_uav_stays_at_cell_center(self):
        inst = _instance(seed=0)
        sol = baseline1_fixed_xy(inst, SolverOptions(seed=0))
        assert sol.r[0] == 0.0 and sol.r[1] == 0.0

    def test_altitude_still_optimized(self):
        inst = _instance(seed=1)
        sol = baseline1_fixed_xy(inst, SolverOptions(seed=1))
        assert inst.sys.z_min <= sol.r[2] <= inst.sys.z_max

    def test_feasible_and_dominated_by_proposed(self):
        for seed in range(5):
            inst = _instance(seed=seed)
            opts = SolverOptions(seed=seed)
            b1 = baseline1_fixed_xy(inst, opts)
            full = sca_solve(inst, opts)
            assert constraint_report(inst, b1.s, b1.p, b1.r) == []
            assert full.objective_original >= b1.objective_original * (1 - 1e-6)


class TestBaseline2:
    def test_one_user_per_subcarrier(self):
        inst = _instance(seed=2)
        sol = baseline2_random_assignment(inst, SolverOptions(seed=2), np.random.default_rng(7))
        assert np.all(sol.s.sum(axis=0) <= 1)
        # every powered column respects the pre-drawn assignment
        powered = sol.p.sum(axis=0) > 1e-9 * inst.sys.p_max
        assert np.all(sol.s.sum(axis=0)[powered] == 1)

    def test_assignment_follows_supplied_rng(self):
        inst = _instance(seed=3)
        a = baseline2_random_assignment(inst, SolverOptions(seed=3), np.random.default_rng(11))
        b = baseline2_random_assignment(inst, SolverOptions(seed=3), np.random.default_rng(11))
        np.testing.assert_array_equal(a.s, b.s)
        np.testing.assert_array_equal(a.p, b.p)

    def test_feasible_and_dominated_by_proposed(self):
        for seed in range(5):
            inst = _instance(seed=seed)
            opts = SolverOptions(seed=seed)
            b2 = baseline2_random_assignment(inst, opts, np.random.default_rng(seed))
            full = sca_solve(inst, opts)
            assert constraint_report(inst, b2.s, b2.p, b2.r) == []
            assert full.objective_original >= b2.objective_original * (1 - 1e-6)

    def test_position_is_still_jointly_optimized(self):
        # Random assignment restricts the powers, not the placement.
        inst = _instance(seed=4)
        sol = baseline2_random_assignment(inst, SolverOptions(seed=4), np.random.default_rng(4))
        assert not (sol.r[0] == 0.0 and sol.r[1] == 0.0)

"""Tests for the water-filling / grid-search verifier."""

import numpy as np
import pytest

from solaruav.channel import SystemParams, make_instance
from solaruav.oracle import (
    best_gain_assignment,
    grid_search_oracle,
    oracle_objective_at,
    waterfilling,
)
from solaruav.sca import constraint_report
from solaruav.solar import SolarParams
from solaruav.subproblem import InfeasibleError


def _instance(seed=0, k=2, n_f=4, **sys_kw):
    rng = np.random.default_rng(seed)
    sys_kw.setdefault("n_subcarriers", n_f)
    return make_instance(rng, SystemParams(**sys_kw), SolarParams(), k)


class TestWaterfilling:
    def test_hand_case(self):
        p = waterfilling(np.array([1.0, 4.0]), 1.0)
        np.testing.assert_allclose(p, [0.125, 0.875], atol=1e-9)

    def test_common_water_level(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            g = rng.uniform(0.1, 10.0, 6)
            budget = float(rng.uniform(0.1, 5.0))
            p = waterfilling(g, budget)
            assert p.sum() == pytest.approx(budget, abs=1e-8)
            levels = p + 1.0 / g
            active = p > 1e-9
            if active.sum() > 1:
                mu = levels[active]
                assert mu.max() - mu.min() <= 1e-8 * mu.max()
            # inactive channels sit above the water level
            if active.any() and (~active).any():
                assert (1.0 / g[~active]).min() >= levels[active].max() - 1e-8

    def test_zero_budget(self):
        np.testing.assert_array_equal(waterfilling(np.array([1.0, 2.0]), 0.0), [0.0, 0.0])

    def test_large_budget_floods_all_channels(self):
        p = waterfilling(np.array([1.0, 2.0, 4.0]), 100.0)
        assert np.all(p > 0)

    def test_rejects_nonpositive_gain(self):
        with pytest.raises(ValueError):
            waterfilling(np.array([0.0, 1.0]), 1.0)

    def test_beats_uniform_allocation(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            g = rng.uniform(0.1, 10.0, 5)
            budget = 2.0
            p = waterfilling(g, budget)
            obj = np.sum(np.log2(1 + g * p))
            uniform = np.sum(np.log2(1 + g * budget / 5))
            assert obj >= uniform - 1e-10


class TestBestGainAssignment:
    def test_each_subcarrier_to_best_effective_gain(self):
        inst = _instance(seed=2, k=3, n_f=6)
        r = np.array([100.0, -50.0, 1450.0])
        s = best_gain_assignment(inst, r)
        assert np.all(s.sum(axis=0) == 1)
        d2 = np.sum((r[None, :] - inst.users) ** 2, axis=1)
        eff = inst.h_gain / d2[:, None]
        for i in range(6):
            k = int(np.argmax(s[:, i]))
            assert eff[k, i] == eff[:, i].max()


class TestGridSearchOracle:
    def test_solution_is_feasible(self):
        inst = _instance(seed=3)
        sol = grid_search_oracle(inst, 250.0, 50.0)
        assert constraint_report(inst, sol.s, sol.p, sol.r) == []
        assert sol.status == "oracle"

    def test_refining_the_grid_never_hurts(self):
        inst = _instance(seed=4)
        coarse = grid_search_oracle(inst, 500.0, 100.0)
        fine = grid_search_oracle(inst, 250.0, 50.0)
        assert fine.objective_original >= coarse.objective_original - 1e-12

    def test_exhaustive_assignment_matches_best_gain_rule(self):
        # Enumerating every assignment should not beat the best-gain rule.
        inst = _instance(seed=5, k=2, n_f=3)
        plain = grid_search_oracle(inst, 750.0, 100.0)
        exhaustive = grid_search_oracle(inst, 750.0, 100.0, exhaustive=True)
        assert exhaustive.objective_original == pytest.approx(
            plain.objective_original, rel=1e-12
        )

    def test_deterministic(self):
        inst = _instance(seed=6)
        a = grid_search_oracle(inst, 500.0, 100.0)
        b = grid_search_oracle(inst, 500.0, 100.0)
        np.testing.assert_array_equal(a.r, b.r)
        assert a.objective_original == b.objective_original

    def test_infeasible_hover_raises(self):
        inst = _instance(seed=7, z_min=100.0, z_max=600.0)
        with pytest.raises(InfeasibleError, match="C1"):
            grid_search_oracle(inst, 500.0, 100.0)


class TestOracleObjectiveAt:
    def test_matches_grid_point_value(self):
        inst = _instance(seed=8)
        sol = grid_search_oracle(inst, 500.0, 100.0)
        assert oracle_objective_at(inst, sol.r) == pytest.approx(
            sol.objective_original, rel=1e-9
        )

    def test_raises_below_sustainable_altitude(self):
        inst = _instance(seed=9)
        with pytest.raises(InfeasibleError):
            oracle_objective_at(inst, np.array([0.0, 0.0, 400.0]))

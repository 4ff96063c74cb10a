import numpy as np
import pytest

from aginsim.world import WorldState, make_scenario
from aginsim.channel import associate_and_rate
from aginsim.power import (
    RotorcraftParams,
    energy_efficiency,
    propulsion_power,
    total_power,
)

HOVER_POWER = 79.86 + 88.63  # profile + induced terms at v=0


def hover_state(num_uavs=4, num_users=6, speed=0.0):
    cfg = make_scenario("suburban", {"num_uavs": num_uavs, "num_users": num_users})
    state = WorldState(
        t=0,
        uav_pos=np.column_stack([
            np.linspace(200, 800, num_uavs),
            np.linspace(200, 800, num_uavs),
            np.full(num_uavs, 100.0)]),
        uav_vel=np.zeros((num_uavs, 3)),
        alive=np.ones(num_uavs, dtype=bool),
        user_pos=np.random.default_rng(0).uniform(0, 1000, size=(num_users, 2)),
    )
    state.uav_vel[:, 0] = speed
    table = associate_and_rate(state, cfg, cfg.channel_profile)
    return cfg, state, table


class TestPropulsionPower:
    def test_hover_value(self):
        assert propulsion_power(0.0, RotorcraftParams()) == pytest.approx(
            168.49, rel=1e-6)

    def test_cubic_parasite_dominates(self):
        params = RotorcraftParams()
        ratio = propulsion_power(4000.0, params) / propulsion_power(2000.0, params)
        assert ratio == pytest.approx(8.0, rel=1e-3)

    def test_derivative_matches_symbolic(self):
        # Symbolic differentiation (sympy) is the oracle; a central finite
        # difference of the implementation must match it at v=15.
        import sympy as sp

        v = sp.Symbol("v", positive=True)
        p = RotorcraftParams()
        expr = (p.p_blade * (1 + 3 * v ** 2 / p.u_tip ** 2)
                + p.p_induced * sp.sqrt(sp.sqrt(1 + v ** 4 / (4 * p.v_induced ** 4))
                                        - v ** 2 / (2 * p.v_induced ** 2))
                + sp.Rational(1, 2) * p.d_fuse * p.rho * p.solidity * p.disc_area * v ** 3)
        symbolic = float(sp.diff(expr, v).subs(v, 15.0))
        h = 1e-4
        fd = (propulsion_power(15.0 + h, p) - propulsion_power(15.0 - h, p)) / (2 * h)
        assert abs(fd - symbolic) / abs(symbolic) < 1e-4

    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            propulsion_power(-1.0, RotorcraftParams())

    def test_power_curve_dips_then_rises(self):
        # Standard rotorcraft curve: a minimum exists at some v* > 0.
        params = RotorcraftParams()
        grid = np.arange(0.0, 30.0 + 1e-9, 0.1)
        values = np.array([propulsion_power(v, params) for v in grid])
        assert np.all(np.isfinite(values))
        v_star = grid[int(np.argmin(values))]
        assert v_star > 0.0
        assert values.min() < propulsion_power(0.0, params)

    def test_param_validation(self):
        bad = RotorcraftParams(rho=-1.0)
        with pytest.raises(ValueError):
            bad.validate()


class TestTotalPower:
    def test_four_hovering_uavs(self):
        cfg, state, table = hover_state(4)
        total = total_power(state, table, RotorcraftParams(), cfg)
        assert total == pytest.approx(4 * (HOVER_POWER + 5.0) + 20.0, rel=1e-6)
        assert total == pytest.approx(713.96, abs=0.01)

    def test_failure_drops_exactly_one_share(self):
        cfg, state, table = hover_state(4)
        before = total_power(state, table, RotorcraftParams(), cfg)
        state.alive[2] = False
        state.uav_vel[2] = 0.0
        after = total_power(state, table, RotorcraftParams(), cfg)
        assert before - after == pytest.approx(HOVER_POWER + 5.0, rel=1e-9)

    def test_all_failed_leaves_gbs_only(self):
        cfg, state, table = hover_state(3)
        state.alive[:] = False
        assert total_power(state, table, RotorcraftParams(), cfg) == pytest.approx(20.0)

    def test_overspeed_is_caller_bug(self):
        cfg, state, table = hover_state(2, speed=31.0)
        with pytest.raises(ValueError, match="exceeds v_max"):
            total_power(state, table, RotorcraftParams(), cfg)

    def test_strictly_decreases_per_failure(self):
        cfg, state, table = hover_state(4, speed=10.0)
        params = RotorcraftParams()
        previous = total_power(state, table, params, cfg)
        for k in range(4):
            state.alive[k] = False
            state.uav_vel[k] = 0.0
            current = total_power(state, table, params, cfg)
            assert current < previous
            previous = current


class TestEnergyEfficiency:
    def test_zero_rate(self):
        assert energy_efficiency(0.0, 714.0) == 0.0

    def test_hand_division(self):
        assert energy_efficiency(100e6, 714.0) == pytest.approx(1.4006e5, rel=1e-4)

    def test_homogeneity(self):
        assert energy_efficiency(2 * 5e6, 2 * 300.0) == energy_efficiency(5e6, 300.0)

    def test_nonpositive_power_rejected(self):
        with pytest.raises(ValueError):
            energy_efficiency(1e6, 0.0)

import numpy as np
import pytest

from aginsim.world import (
    GBS_ID,
    ScenarioConfig,
    WorldState,
    active_set,
    apply_failure,
    make_scenario,
    pick_random_failure,
    spawn_rngs,
)


def blank_state(num_uavs=4, num_users=8):
    return WorldState(
        t=0,
        uav_pos=np.zeros((num_uavs, 3)),
        uav_vel=np.ones((num_uavs, 3)),
        alive=np.ones(num_uavs, dtype=bool),
        user_pos=np.zeros((num_users, 2)),
    )


class TestMakeScenario:
    def test_crowded_urban_profile(self):
        cfg = make_scenario("crowded_urban", {})
        assert cfg.channel_profile.a == 12.08
        assert cfg.channel_profile.b == 0.11
        assert cfg.channel_profile.eta_nlos == 23.0
        assert cfg.mobility_kind == "rpgm"

    def test_suburban_with_desk_overrides(self):
        cfg = make_scenario("suburban", {"num_uavs": 2, "num_users": 30})
        assert cfg.channel_profile.a == 9.61
        assert cfg.channel_profile.b == 0.16
        assert cfg.num_uavs == 2
        assert cfg.num_users == 30

    def test_rural_profile(self):
        cfg = make_scenario("rural", {})
        assert cfg.channel_profile.a == 4.88
        assert cfg.channel_profile.b == 0.43
        assert cfg.mobility_kind == "gauss_markov"

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError, match="unknown scenario"):
            make_scenario("dense_megacity", {})

    def test_unknown_override_key_rejected(self):
        with pytest.raises(ValueError, match="unknown scenario config key"):
            make_scenario("rural", {"num_uav": 3})

    def test_dotted_override(self):
        cfg = make_scenario("rural", {"channel_profile.a": 5.0})
        assert cfg.channel_profile.a == 5.0

    def test_invariant_violation_rejected(self):
        with pytest.raises(ValueError):
            make_scenario("rural", {"altitude_corridor": (120.0, 80.0)})
        with pytest.raises(ValueError):
            make_scenario("rural", {"bandwidth": -1.0})

    def test_failure_time_bounds(self):
        with pytest.raises(ValueError, match="failure time"):
            make_scenario("rural", {"failure_schedule": [(300, "random")],
                                    "episode_len": 200})
        cfg = make_scenario("rural", {"failure_schedule": [(100, 1)]})
        assert cfg.failure_schedule == [(100, 1)]

    def test_gbs_defaults_to_center(self):
        cfg = make_scenario("rural", {"area_side_m": 600.0})
        assert cfg.gbs_position == (300.0, 300.0, 0.0)


class TestConfigSerialization:
    def test_round_trip(self):
        cfg = make_scenario("crowded_urban", {"num_users": 50})
        clone = ScenarioConfig.from_dict(cfg.to_dict())
        assert clone.to_dict() == cfg.to_dict()

    def test_unknown_key_fails_fast(self):
        data = make_scenario("rural", {}).to_dict()
        data["beam_count"] = 3
        with pytest.raises(ValueError, match="unknown scenario config keys"):
            ScenarioConfig.from_dict(data)

    def test_unknown_nested_key_fails_fast(self):
        data = make_scenario("rural", {}).to_dict()
        data["mobility"]["sneaky"] = 1.0
        with pytest.raises(ValueError, match="unknown MobilityParams keys"):
            ScenarioConfig.from_dict(data)


class TestActiveSet:
    def test_all_alive(self):
        state = blank_state(4)
        assert active_set(state) == [0, 1, 2, 3, GBS_ID]

    def test_single_removal(self):
        state = blank_state(4)
        state.alive[2] = False
        assert active_set(state) == [0, 1, 3, GBS_ID]

    def test_gbs_persistent(self):
        state = blank_state(4)
        state.alive[:] = False
        assert active_set(state) == [GBS_ID]

    def test_ordering_deterministic(self):
        state = blank_state(5)
        state.alive[:] = [True, False, True, False, True]
        assert active_set(state) == [0, 2, 4, GBS_ID]


class TestApplyFailure:
    def test_failure_clears_velocity_and_flag(self):
        state = blank_state()
        apply_failure(state, 1)
        assert not state.alive[1]
        assert np.all(state.uav_vel[1] == 0.0)
        assert GBS_ID in active_set(state) and 1 not in active_set(state)

    def test_double_failure_rejected(self):
        state = blank_state()
        apply_failure(state, 1)
        with pytest.raises(ValueError, match="already failed"):
            apply_failure(state, 1)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            apply_failure(blank_state(), 9)

    def test_no_resurrection_monotone(self):
        state = blank_state()
        history = [state.alive.copy()]
        for k in (3, 0, 2):
            apply_failure(state, k)
            history.append(state.alive.copy())
        for before, after in zip(history, history[1:]):
            assert np.all(after <= before)

    def test_last_uav_failure_leaves_gbs(self):
        state = blank_state(1)
        apply_failure(state, 0)
        assert active_set(state) == [GBS_ID]


class TestRandomFailure:
    def test_uniform_over_alive(self):
        # Chi-square over 10k draws against the uniform null; threshold is
        # the 99.9% quantile of chi2 with 3 dof.
        state = blank_state(4)
        _, failure_rng = spawn_rngs(123)
        counts = np.zeros(4)
        for _ in range(10_000):
            counts[pick_random_failure(state, failure_rng)] += 1
        expected = 10_000 / 4
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        assert chi2 < 16.27

    def test_only_alive_candidates(self):
        state = blank_state(4)
        state.alive[:] = [False, True, False, True]
        _, failure_rng = spawn_rngs(5)
        draws = {pick_random_failure(state, failure_rng) for _ in range(200)}
        assert draws <= {1, 3}

    def test_failure_stream_independent_of_physics(self):
        physics_a, failure_a = spawn_rngs(77)
        physics_b, failure_b = spawn_rngs(77)
        # Consuming the failure stream leaves the physics stream untouched.
        state = blank_state(4)
        for _ in range(9):
            pick_random_failure(state, failure_a)
        assert physics_a.normal() == physics_b.normal()
        assert failure_b.integers(100) is not None

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aginsim.world import GBS_ID, WorldState, make_scenario
from aginsim.channel import LinkTable
from aginsim.metrics import (
    STEP_CSV_COLUMNS,
    RewardWeights,
    handoff_count,
    jain_index,
    step_metrics,
)


class TestJainIndex:
    def test_equal_shares(self):
        assert jain_index([5.0, 5.0, 5.0, 5.0]) == pytest.approx(1.0, abs=1e-9)

    def test_single_nonzero(self):
        assert jain_index([1.0, 0.0, 0.0, 0.0]) == pytest.approx(0.25, abs=1e-9)

    def test_hand_computation(self):
        assert jain_index([1.0, 2.0, 3.0, 4.0]) == pytest.approx(100.0 / 120.0,
                                                                 abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            jain_index([])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            jain_index([1.0, -0.5])

    @given(st.lists(st.floats(0.0, 1e6), min_size=1, max_size=20),
           st.floats(1.0, 100.0))
    @settings(max_examples=200, deadline=None)
    def test_scale_invariance(self, values, scale):
        # The eps-induced drift bound needs a non-degenerate sum of squares;
        # below that the stabilizer dominates by design.
        if sum(v * v for v in values) < 1.0:
            values = values + [1.0]
        before = jain_index(values)
        after = jain_index([scale * v for v in values])
        assert after == pytest.approx(before, abs=1e-9)


class TestHandoffCount:
    def test_identical_zero(self):
        prev = np.array([0, 1, GBS_ID, 2])
        assert handoff_count(prev, prev.copy()) == 0

    def test_all_change(self):
        prev = np.zeros(9, dtype=np.int64)
        curr = np.ones(9, dtype=np.int64)
        assert handoff_count(prev, curr) == 9

    def test_failure_forced_reassignments_counted(self):
        # 12 users served by node 1 forced onto other nodes: all 12 count.
        prev = np.array([1] * 12 + [0] * 5 + [GBS_ID] * 3)
        curr = np.array([0] * 6 + [GBS_ID] * 6 + [0] * 5 + [GBS_ID] * 3)
        assert handoff_count(prev, curr) == 12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            handoff_count(np.zeros(3), np.zeros(4))


def make_fixture(num_uavs=4, num_users=8, loads=None, rates=None,
                 prev_assoc=None, alive=None):
    cfg = make_scenario("suburban", {"num_uavs": num_uavs,
                                     "num_users": num_users})
    if loads is None:
        assoc = np.array([k % num_uavs for k in range(num_users)], dtype=np.int64)
    else:
        assoc = np.concatenate([
            np.full(count, node, dtype=np.int64)
            for node, count in loads.items()])
    if rates is None:
        rates = np.full(num_users, 2.0 * cfg.r_th)
    state = WorldState(
        t=3,
        uav_pos=np.zeros((num_uavs, 3)),
        uav_vel=np.zeros((num_uavs, 3)),
        alive=np.ones(num_uavs, dtype=bool) if alive is None else alive,
        user_pos=np.zeros((num_users, 2)),
        association=assoc,
        prev_association=assoc.copy() if prev_assoc is None else prev_assoc,
    )
    load_map = {int(n): int(np.sum(assoc == n)) for n in set(assoc)}
    for k in range(num_uavs):
        load_map.setdefault(k, 0)
    load_map.setdefault(GBS_ID, 0)
    table = LinkTable(node_ids=list(range(num_uavs)) + [GBS_ID],
                      gains=np.ones((num_uavs + 1, num_users)),
                      tx_watts=np.ones(num_uavs + 1),
                      assoc=assoc, sinr=np.ones(num_users),
                      rate=np.asarray(rates, dtype=float), loads=load_map)
    return cfg, state, table


class TestStepMetrics:
    def test_saturated_qos(self):
        # Equal rates above threshold, equal loads, no handoffs, EE above the
        # normalizer: every normalized KPI is 1 and U_QoS = 3.9.
        cfg, state, table = make_fixture()
        weights = RewardWeights()
        m = step_metrics(table, state, total_power_w=1e-3, weights=weights,
                         config=cfg)
        assert m.u_qos == pytest.approx(3.9, abs=1e-9)
        assert m.utility == pytest.approx(3.9, abs=1e-9)
        assert m.c_cov == 1.0 and m.handoffs == 0

    def test_zero_rates_floor(self):
        # The exact floor: zero rates with no aerial load fairness to earn
        # (all UAVs down, GBS holding every user at rate 0).
        alive = np.zeros(4, dtype=bool)
        cfg, state, table = make_fixture(rates=np.zeros(8),
                                         loads={GBS_ID: 8}, alive=alive)
        prev = state.prev_association.copy()
        prev[:2] = 0
        state.prev_association = prev
        weights = RewardWeights()
        m = step_metrics(table, state, total_power_w=100.0, weights=weights,
                         config=cfg)
        assert m.u_qos == pytest.approx(0.0, abs=1e-9)
        assert m.handoffs == 2
        assert m.utility == pytest.approx(-weights.lambda_ho * 2 / 8)

    def test_load_fairness_fixture(self):
        cfg, state, table = make_fixture(
            num_uavs=4, num_users=140,
            loads={0: 30, 1: 30, 2: 40, 3: 40})
        weights = RewardWeights()
        m = step_metrics(table, state, total_power_w=700.0, weights=weights,
                         config=cfg)
        assert m.jfi_load == pytest.approx(0.98, abs=1e-6)

    def test_dead_uav_excluded_from_load_fairness(self):
        # Loads {0: 4, 1: 4} with UAV 2 and 3 dead: fairness over alive only.
        alive = np.array([True, True, False, False])
        cfg, state, table = make_fixture(num_uavs=4, num_users=8,
                                         loads={0: 4, 1: 4}, alive=alive)
        m = step_metrics(table, state, 100.0, RewardWeights(), cfg)
        assert m.jfi_load == pytest.approx(1.0, abs=1e-6)
        assert m.active_uav_count == 2

    def test_no_alive_uavs_defines_zero_load_fairness(self):
        alive = np.zeros(4, dtype=bool)
        cfg, state, table = make_fixture(num_uavs=4, num_users=8,
                                         loads={GBS_ID: 8}, alive=alive)
        m = step_metrics(table, state, 20.0, RewardWeights(), cfg)
        assert m.jfi_load == 0.0
        assert m.active_uav_count == 0

    def test_utility_slope_per_handoff(self):
        cfg, state, table = make_fixture(num_users=8)
        weights = RewardWeights()
        utilities = []
        base_prev = state.association.copy()
        for flips in range(4):
            prev = base_prev.copy()
            for i in range(flips):
                prev[i] = GBS_ID if prev[i] != GBS_ID else 0
            state.prev_association = prev
            m = step_metrics(table, state, 1e-3, weights, cfg)
            utilities.append(m.utility)
        diffs = np.diff(utilities)
        assert np.allclose(diffs, -weights.lambda_ho / 8)

    def test_raw_handoff_mode(self):
        cfg, state, table = make_fixture(num_users=8)
        prev = state.association.copy()
        prev[:3] = GBS_ID
        state.prev_association = prev
        raw = RewardWeights(normalize_handoffs=False)
        m = step_metrics(table, state, 1e-3, raw, cfg)
        assert m.utility == pytest.approx(m.u_qos - raw.lambda_ho * 3)

    def test_all_fields_finite_and_csv_row_order(self):
        cfg, state, table = make_fixture()
        m = step_metrics(table, state, 300.0, RewardWeights(), cfg)
        row = m.csv_row()
        assert len(row) == len(STEP_CSV_COLUMNS)
        assert all(np.isfinite(v) for v in row)

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            RewardWeights(lambda_cov=-1.0).validate()

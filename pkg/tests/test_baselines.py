import numpy as np
import pytest

from aginsim.world import make_scenario
from aginsim.env import HOVER_ACTION, CoverageEnv
from aginsim import nn
from aginsim.baselines import (
    KmeansController,
    flatten_ego_graphs,
    init_mlp_critic_params,
    mlp_critic_backward,
    mlp_critic_forward,
    mlp_critic_input_dim,
    kmeans_policy,
)


def make_params(rng, num_uavs=3, entity_dim=5):
    params = nn.ParameterSet()
    init_mlp_critic_params(params, rng, num_uavs, entity_dim,
                           hidden1=8, hidden2=4)
    return params


def make_batch(rng, n=4, num_uavs=3, entity_dim=5):
    return nn.EgoGraphBatch(
        ego=rng.normal(size=(n, entity_dim)),
        neigh=rng.normal(size=(n, num_uavs - 1, entity_dim)),
        gbs=rng.normal(size=(n, entity_dim)),
        mask=np.ones((n, num_uavs - 1)))


class TestMlpCritic:
    def test_input_width(self):
        assert mlp_critic_input_dim(4, 14) == 70

    def test_permuting_rows_changes_output(self):
        rng = np.random.default_rng(0)
        params = make_params(rng)
        batch = make_batch(rng)
        base, _ = mlp_critic_forward(params, batch)
        swapped = nn.EgoGraphBatch(ego=batch.ego,
                                   neigh=batch.neigh[:, ::-1],
                                   gbs=batch.gbs, mask=batch.mask)
        values, _ = mlp_critic_forward(params, swapped)
        assert not np.allclose(values, base)

    def test_zero_filled_dead_slots_finite(self):
        rng = np.random.default_rng(1)
        params = make_params(rng)
        batch = make_batch(rng)
        batch.neigh[:, 0] = 0.0
        batch.mask[:, 0] = 0.0
        values, _ = mlp_critic_forward(params, batch)
        assert np.all(np.isfinite(values))

    def test_identical_inputs_identical_outputs(self):
        rng = np.random.default_rng(2)
        params = make_params(rng)
        batch = make_batch(rng)
        v1, _ = mlp_critic_forward(params, batch)
        v2, _ = mlp_critic_forward(params, batch)
        assert np.array_equal(v1, v2)

    def test_flatten_order(self):
        rng = np.random.default_rng(3)
        batch = make_batch(rng, n=1)
        flat = flatten_ego_graphs(batch)
        assert np.array_equal(flat[0, :5], batch.ego[0])
        assert np.array_equal(flat[0, 5:10], batch.neigh[0, 0])
        assert np.array_equal(flat[0, -5:], batch.gbs[0])

    def test_width_mismatch_rejected(self):
        rng = np.random.default_rng(4)
        params = make_params(rng, num_uavs=3)
        batch = make_batch(rng, num_uavs=4)
        with pytest.raises(ValueError, match="width"):
            mlp_critic_forward(params, batch)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(5)
        params = make_params(rng)
        batch = make_batch(rng, n=3)
        probe = rng.normal(size=3)
        _, cache = mlp_critic_forward(params, batch)
        grads = mlp_critic_backward(params, cache, probe)

        def loss():
            v, _ = mlp_critic_forward(params, batch)
            return float(np.sum(v * probe))

        h = 1e-6
        for name in params.names():
            w = params[name]
            fd = np.zeros_like(w)
            it = np.nditer(w, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                orig = w[i]
                w[i] = orig + h
                up = loss()
                w[i] = orig - h
                down = loss()
                w[i] = orig
                fd[i] = (up - down) / (2 * h)
            err = np.linalg.norm(fd - grads[name]) / (np.linalg.norm(fd) + 1e-12)
            assert err < 1e-4, name


class TestKmeansPolicy:
    def desk_env(self, **overrides):
        base = {"num_uavs": 2, "num_users": 12, "episode_len": 20}
        base.update(overrides)
        cfg = make_scenario("suburban", base)
        return cfg, CoverageEnv(cfg, mech_noise_std=0.0)

    def test_hover_when_over_centroid(self):
        cfg, env = self.desk_env()
        env.reset(0)
        state = env.state
        # Put every user in one tight knot under UAV 0 and far from UAV 1.
        state.user_pos[:6] = [200.0, 200.0]
        state.user_pos[6:] = [800.0, 800.0]
        state.uav_pos[0] = [200.0, 200.0, 100.0]
        state.uav_pos[1] = [800.0, 800.0, 100.0]
        state.uav_vel[:] = 0.0
        actions = kmeans_policy(state, cfg)
        assert actions == {0: HOVER_ACTION, 1: HOVER_ACTION}

    def test_k_follows_alive_count(self):
        cfg, env = self.desk_env(num_uavs=4, num_users=40)
        env.reset(1)
        state = env.state
        actions = kmeans_policy(state, cfg)
        assert sorted(actions) == [0, 1, 2, 3]
        state.alive[2] = False
        actions = kmeans_policy(state, cfg)
        assert sorted(actions) == [0, 1, 3]

    def test_deterministic_given_state(self):
        cfg, env = self.desk_env()
        env.reset(5)
        a1 = kmeans_policy(env.state, cfg)
        a2 = kmeans_policy(env.state, cfg)
        assert a1 == a2

    def test_converges_over_stationary_cluster(self):
        # A single stationary knot of users: the controller steers the UAV
        # overhead within a bounded number of steps.
        cfg, env = self.desk_env(num_uavs=1, num_users=8, episode_len=60)
        env.reset(2)
        env.state.user_pos[:] = [700.0, 300.0]
        env.state.group_centers[:] = [700.0, 300.0]
        env.state.group_waypoints[:] = [700.0, 300.0]
        env.state.user_offsets[:] = 0.0
        env.state.uav_pos[0] = [200.0, 800.0, 100.0]
        ctrl = KmeansController(cfg, seed=0)
        for _ in range(50):
            actions = ctrl.act(env.state)
            env.step(actions)
            # Hold the users still regardless of the mobility model.
            env.state.user_pos[:] = [700.0, 300.0]
            env.state.group_centers[:] = [700.0, 300.0]
            env.state.group_waypoints[:] = [700.0, 300.0]
            env.state.user_offsets[:] = 0.0
        horizontal = np.linalg.norm(env.state.uav_pos[0, :2] - [700.0, 300.0])
        assert horizontal < 30.0

    def test_no_alive_uav_rejected(self):
        cfg, env = self.desk_env()
        env.reset(0)
        env.state.alive[:] = False
        with pytest.raises(ValueError):
            kmeans_policy(env.state, cfg)

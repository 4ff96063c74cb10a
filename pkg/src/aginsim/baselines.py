"""Comparison controllers: the MLP-critic ablation and the geometric policy.

The MLP critic consumes the exact same ego-graph rows as the attention
critic, flattened in their canonical stored order, so the only difference
between the two pipelines is the aggregation architecture. The geometric
controller re-clusters users every step and steers each UAV toward its
matched centroid at cruise altitude.
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import numpy as np

from .world import ScenarioConfig, WorldState
from .mobility import lloyd_kmeans
from .env import HOVER_ACTION, action_targets
from .nn import EgoGraphBatch, ParameterSet, mlp_backward, mlp_forward, mlp_init

MLP_CRITIC_LAYERS = ["mlpc.l1", "mlpc.l2", "mlpc.l3"]


def mlp_critic_input_dim(num_uavs: int, entity_dim: int) -> int:
    # ego + (K_U - 1) neighbor slots + GBS row, each entity_dim wide
    return (num_uavs + 1) * entity_dim


def init_mlp_critic_params(params: ParameterSet, rng: np.random.Generator,
                           num_uavs: int, entity_dim: int,
                           hidden1: int = 256, hidden2: int = 128) -> None:
    width = mlp_critic_input_dim(num_uavs, entity_dim)
    mlp_init(params, rng, MLP_CRITIC_LAYERS, [width, hidden1, hidden2, 1])


def flatten_ego_graphs(batch: EgoGraphBatch) -> np.ndarray:
    """Fixed-order flat feature vector per sample: ego, neighbor slots in
    stored order (dead slots already zero-filled), GBS row last."""
    n = batch.size
    return np.concatenate(
        [batch.ego, batch.neigh.reshape(n, -1), batch.gbs], axis=1)


def mlp_critic_forward(params: ParameterSet, batch: EgoGraphBatch
                       ) -> Tuple[np.ndarray, dict]:
    flat = flatten_ego_graphs(batch)
    expected = params[MLP_CRITIC_LAYERS[0] + ".w"].shape[0]
    if flat.shape[1] != expected:
        raise ValueError(
            f"flat feature width {flat.shape[1]} does not match critic input {expected}")
    value, caches = mlp_forward(params, MLP_CRITIC_LAYERS, flat)
    return value[:, 0], {"mlp": caches}


def mlp_critic_backward(params: ParameterSet, cache: dict,
                        dvalue: np.ndarray) -> Dict[str, np.ndarray]:
    grads, _ = mlp_backward(params, MLP_CRITIC_LAYERS, cache["mlp"],
                            np.asarray(dvalue, dtype=np.float64)[:, None])
    return grads


class KmeansController:
    """Geometric coverage policy: chase per-step K-Means centroids.

    Every step, users are re-clustered with K equal to the alive-UAV count;
    clusters are matched to UAVs greedily by ascending pair distance, and
    each UAV picks the discrete action whose resulting velocity (accounting
    for inertia) best advances it toward its centroid at cruise altitude.
    Fully deterministic given (state, seed): randomness only seeds degenerate
    re-clustering when there are fewer users than UAVs.
    """

    def __init__(self, config: ScenarioConfig, beta: float = 0.6,
                 v_z_max: float = 5.0, seed: int = 0):
        self.config = config
        self.beta = beta
        self.targets = action_targets(config.v_max_uav, v_z_max)
        self.rng = np.random.default_rng(seed)

    def act(self, state: WorldState) -> Dict[int, int]:
        return kmeans_policy(state, self.config, targets=self.targets,
                             beta=self.beta, rng=self.rng)


def kmeans_policy(state: WorldState, config: ScenarioConfig,
                  targets: Optional[np.ndarray] = None, beta: float = 0.6,
                  v_z_max: float = 5.0,
                  rng: Optional[np.random.Generator] = None) -> Dict[int, int]:
    """One action per alive UAV steering toward its matched user centroid."""
    alive = [int(k) for k in np.flatnonzero(state.alive)]
    if not alive:
        raise ValueError("kmeans policy needs at least one alive UAV")
    if targets is None:
        targets = action_targets(config.v_max_uav, v_z_max)
    k = len(alive)
    uav_xy = state.uav_pos[alive][:, :2]
    if state.user_pos.shape[0] >= k:
        centers, _ = lloyd_kmeans(state.user_pos, k, rng=rng, init=uav_xy)
    else:
        centers = np.repeat(state.user_pos.mean(axis=0, keepdims=True), k, axis=0)

    # Greedy nearest matching over all (uav, centroid) pairs.
    dists = np.linalg.norm(uav_xy[:, None, :] - centers[None, :, :], axis=2)
    order = sorted(((dists[i, j], i, j) for i in range(k) for j in range(k)))
    uav_for, center_for = {}, {}
    for _, i, j in order:
        if i in uav_for or j in center_for:
            continue
        uav_for[i] = j
        center_for[j] = i

    cruise_z = 0.5 * (config.h_min + config.h_max)
    actions: Dict[int, int] = {}
    for i, uav in enumerate(alive):
        goal = np.array([centers[uav_for[i], 0], centers[uav_for[i], 1], cruise_z])
        pos, vel = state.uav_pos[uav], state.uav_vel[uav]
        best, best_dist = HOVER_ACTION, np.inf
        for a in range(targets.shape[0]):
            v_next = beta * vel + (1.0 - beta) * targets[a]
            dist = float(np.linalg.norm(pos + v_next * config.dt - goal))
            if dist < best_dist - 1e-12:
                best, best_dist = a, dist
        actions[uav] = best
    return actions

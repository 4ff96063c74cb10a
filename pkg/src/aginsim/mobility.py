"""Ground-user initialization and motion models, plus UAV start placement.

Two user dynamics are supported: group mobility (members ride a moving
cluster center with a bounded individual offset) for the clustered urban and
suburban classes, and Gauss-Markov velocity dynamics for the sparse rural
class.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from .world import (
    MOBILITY_GAUSS_MARKOV,
    MOBILITY_RPGM,
    ScenarioConfig,
    WorldState,
)


def lloyd_kmeans(points: np.ndarray, k: int,
                 rng: Optional[np.random.Generator] = None,
                 init: Optional[np.ndarray] = None,
                 max_iter: int = 50) -> Tuple[np.ndarray, np.ndarray]:
    """Plain Lloyd's K-Means with seeded init and deterministic tie-breaks.

    Centroids start from `init` when given, otherwise from k distinct sample
    points drawn with `rng`. Ties in the nearest-centroid assignment go to
    the lowest centroid index (np.argmin). Empty clusters are re-seeded at
    the point farthest from its assigned centroid, with bounded retries.
    """
    n = points.shape[0]
    if k <= 0 or k > n:
        raise ValueError(f"need 0 < k <= n, got k={k}, n={n}")
    if init is not None:
        centroids = np.asarray(init, dtype=float).copy()
        if centroids.shape != (k, points.shape[1]):
            raise ValueError(f"init centroids must be ({k}, {points.shape[1]})")
    elif rng is not None:
        centroids = points[rng.choice(n, size=k, replace=False)].astype(float).copy()
    else:
        raise ValueError("either rng or init centroids required")
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(d2, axis=1)
        for j in range(k):
            members = points[new_assign == j]
            if members.shape[0] == 0:
                # Re-seed at the worst-covered point.
                worst = int(np.argmax(np.min(d2, axis=1)))
                centroids[j] = points[worst]
                new_assign[worst] = j
            else:
                centroids[j] = members.mean(axis=0)
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign
    return centroids, assign


def init_users(config: ScenarioConfig, rng: np.random.Generator
               ) -> Tuple[np.ndarray, Optional[np.ndarray], Optional[np.ndarray], Optional[int]]:
    """Initial user layout.

    Clustered scenarios: K-Means over provisional uniform points into
    num_uavs+1 clusters; the cluster whose centroid is closest to the GBS is
    the GBS cluster; each user is drawn around its cluster centroid with std
    sigma_c and clipped to the area. Rural: i.i.d. uniform positions.

    Returns (user_pos, cluster_centers | None, user_group | None,
    gbs_cluster | None).
    """
    side = config.area_side_m
    m = config.num_users
    if config.mobility_kind == MOBILITY_GAUSS_MARKOV:
        return rng.uniform(0.0, side, size=(m, 2)), None, None, None

    provisional = rng.uniform(0.0, side, size=(m, 2))
    k = config.num_uavs + 1
    centers, assign = lloyd_kmeans(provisional, k, rng)
    gbs_xy = np.asarray(config.gbs_position[:2], dtype=float)
    gbs_cluster = int(np.argmin(np.sum((centers - gbs_xy) ** 2, axis=1)))
    pos = centers[assign] + rng.normal(0.0, config.mobility.sigma_c, size=(m, 2))
    np.clip(pos, 0.0, side, out=pos)
    return pos, centers, assign.astype(np.int64), gbs_cluster


def init_uavs(config: ScenarioConfig, cluster_centers: Optional[np.ndarray],
              gbs_cluster: Optional[int]) -> np.ndarray:
    """UAV start positions at mid-corridor altitude.

    Clustered: UAV k hovers above the k-th non-GBS cluster centroid.
    Rural: UAVs sit on a centered grid spanning the area.
    """
    k_u = config.num_uavs
    z = 0.5 * (config.h_min + config.h_max)
    pos = np.zeros((k_u, 3), dtype=float)
    pos[:, 2] = z
    if cluster_centers is not None:
        uav_clusters = [j for j in range(cluster_centers.shape[0]) if j != gbs_cluster]
        if len(uav_clusters) < k_u:
            raise ValueError("fewer non-GBS clusters than UAVs")
        for k in range(k_u):
            pos[k, :2] = cluster_centers[uav_clusters[k]]
    else:
        side = config.area_side_m
        cols = math.ceil(math.sqrt(k_u))
        rows = math.ceil(k_u / cols)
        for k in range(k_u):
            xi, yi = divmod(k, cols)
            pos[k, 0] = side * (xi + 1) / (rows + 1)
            pos[k, 1] = side * (yi + 1) / (cols + 1)
    return pos


def uav_cluster_map(config: ScenarioConfig, user_group: Optional[np.ndarray],
                    gbs_cluster: Optional[int]) -> Optional[np.ndarray]:
    """Cluster id served by each UAV at start (clustered scenarios), else None."""
    if user_group is None:
        return None
    k = config.num_uavs + 1
    return np.array([j for j in range(k) if j != gbs_cluster], dtype=np.int64)


def sample_mean_velocities(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Asymptotic mean velocity per user: uniform heading, speed U(0, v_max_user)."""
    m = config.num_users
    heading = rng.uniform(0.0, 2.0 * math.pi, size=m)
    speed = rng.uniform(0.0, config.v_max_user, size=m)
    return np.stack([speed * np.cos(heading), speed * np.sin(heading)], axis=1)


def _clamp_speed(vel: np.ndarray, v_max: float) -> np.ndarray:
    speed = np.linalg.norm(vel, axis=1)
    over = speed > v_max
    if np.any(over):
        vel[over] *= (v_max / speed[over])[:, None]
    return vel


def step_gauss_markov(state: WorldState, config: ScenarioConfig,
                      rng: np.random.Generator) -> None:
    """Advance user velocities/positions one step under Gauss-Markov dynamics.

    v(t+1) = alpha*v(t) + (1-alpha)*v_mean + sqrt(1-alpha^2)*noise, speed
    clamped to v_max_user; positions reflect at the area boundary.
    """
    alpha = config.mobility.alpha_gm
    noise = rng.normal(0.0, config.mobility.noise_scale, size=state.user_vel.shape)
    state.user_vel = (alpha * state.user_vel
                      + (1.0 - alpha) * state.user_mean_vel
                      + math.sqrt(max(0.0, 1.0 - alpha * alpha)) * noise)
    _clamp_speed(state.user_vel, config.v_max_user)
    state.user_pos = state.user_pos + state.user_vel * config.dt
    _reflect(state.user_pos, state.user_vel, config.area_side_m)


def _reflect(pos: np.ndarray, vel: np.ndarray, side: float) -> None:
    for axis in range(2):
        low = pos[:, axis] < 0.0
        pos[low, axis] = -pos[low, axis]
        vel[low, axis] = -vel[low, axis]
        high = pos[:, axis] > side
        pos[high, axis] = 2.0 * side - pos[high, axis]
        vel[high, axis] = -vel[high, axis]
    # A pathological step larger than the box could still be outside; clip.
    np.clip(pos, 0.0, side, out=pos)


def step_rpgm(state: WorldState, config: ScenarioConfig,
              rng: np.random.Generator) -> None:
    """Advance group centers toward waypoints and walk member offsets.

    Centers move at group_speed, landing exactly on the waypoint when within
    one step, then draw a fresh uniform waypoint. Offsets take a bounded
    random-walk step and are norm-clamped to deviation_radius; positions are
    recomposed as center + offset and clipped to the area.
    """
    side = config.area_side_m
    mob = config.mobility
    step_len = config.group_speed * config.dt
    centers = state.group_centers
    waypoints = state.group_waypoints
    for j in range(centers.shape[0]):
        delta = waypoints[j] - centers[j]
        dist = float(np.linalg.norm(delta))
        if dist <= max(step_len, mob.waypoint_tolerance):
            centers[j] = waypoints[j]
            waypoints[j] = rng.uniform(0.0, side, size=2)
        else:
            centers[j] += delta * (step_len / dist)

    walk = rng.uniform(-1.0, 1.0, size=state.user_offsets.shape) * mob.offset_step * config.dt
    offsets = state.user_offsets + walk
    norm = np.linalg.norm(offsets, axis=1)
    over = norm > mob.deviation_radius
    if np.any(over):
        offsets[over] *= (mob.deviation_radius / norm[over])[:, None]
    state.user_offsets = offsets
    state.user_pos = centers[state.user_group] + offsets
    np.clip(state.user_pos, 0.0, side, out=state.user_pos)


def step_users(state: WorldState, config: ScenarioConfig,
               rng: np.random.Generator) -> None:
    """Dispatch to the configured user mobility model."""
    if config.mobility_kind == MOBILITY_RPGM:
        step_rpgm(state, config, rng)
    elif config.mobility_kind == MOBILITY_GAUSS_MARKOV:
        step_gauss_markov(state, config, rng)
    else:
        raise ValueError(f"unknown mobility kind {config.mobility_kind!r}")

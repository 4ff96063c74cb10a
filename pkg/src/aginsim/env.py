"""DEC-POMDP coverage environment: observations, action kinematics,
constraint enforcement, failure scheduling, and reward emission.

One environment instance owns one WorldState and two RNG streams (physics,
failure). Identical (config, seed, action sequence) give identical
trajectories and metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .world import (
    GBS_ID,
    ScenarioConfig,
    WorldState,
    active_set,
    apply_failure,
    pick_random_failure,
    spawn_rngs,
)
from . import mobility
from .channel import LinkTable, associate_and_rate, draw_shadowing
from .metrics import RewardWeights, step_metrics
from .power import RotorcraftParams, total_power

NUM_ACTIONS = 27
HOVER_ACTION = 13  # (0,0,0) in the {-1,0,+1}^3 grid

ENTITY_DIM = 14  # rel pos (3) + vel (3) + altitude + gbs flag + user summary (6)
SUMMARY_DIM = 6


def action_directions() -> np.ndarray:
    """The 27-entry direction grid over {-1,0,+1}^3, index-ordered."""
    grid = np.array([[ix, iy, iz]
                     for ix in (-1, 0, 1)
                     for iy in (-1, 0, 1)
                     for iz in (-1, 0, 1)], dtype=float)
    return grid


def action_targets(v_max: float, v_z_max: float) -> np.ndarray:
    """Target velocity per action: horizontal axes scale to v_max, vertical to
    v_z_max, then the whole vector is capped to norm v_max."""
    dirs = action_directions()
    targets = dirs * np.array([v_max, v_max, v_z_max])
    norms = np.linalg.norm(targets, axis=1)
    over = norms > v_max
    targets[over] *= (v_max / norms[over])[:, None]
    return targets


@dataclass
class Observation:
    """Ego-centric per-agent observation (all components in [-1, 1])."""

    self_state: np.ndarray     # (4,) corridor-normalized altitude + velocity/v_max
    gbs_offset: np.ndarray     # (3,) (p_gbs - p_k)/area_side
    neighbor_feats: np.ndarray  # (K_U-1, 6) relative position/area, velocity/v_max
    neighbor_mask: np.ndarray  # (K_U-1,) 1.0 when slot holds a live in-range UAV
    user_summary: np.ndarray   # (6,) load fraction, centroid offsets, uncovered frac

    def flat(self) -> np.ndarray:
        parts = [self.self_state, self.gbs_offset]
        for j in range(self.neighbor_feats.shape[0]):
            parts.append(self.neighbor_feats[j])
            parts.append(self.neighbor_mask[j:j + 1])
        parts.append(self.user_summary)
        return np.concatenate(parts)


def obs_dim(num_uavs: int) -> int:
    return 4 + 3 + 7 * (num_uavs - 1) + SUMMARY_DIM


@dataclass
class StateSnapshot:
    """Frozen global state for one step, as seen by the centralized critic."""

    t: int
    uav_pos: np.ndarray
    uav_vel: np.ndarray
    alive: np.ndarray
    user_pos: np.ndarray
    association: np.ndarray
    summaries: np.ndarray   # (K_U+1, 6) per-node user summaries, GBS last

    def to_json(self) -> dict:
        return {
            "t": int(self.t),
            "uav_pos": self.uav_pos.tolist(),
            "uav_vel": self.uav_vel.tolist(),
            "alive": [bool(a) for a in self.alive],
            "user_pos": self.user_pos.tolist(),
            "association": self.association.tolist(),
            "summaries": self.summaries.tolist(),
        }


@dataclass
class Transition:
    """One stored environment step for rollout buffers and replay traces."""

    t: int
    observations: Dict[int, np.ndarray]
    actions: Dict[int, int]
    log_probs: Dict[int, float]
    reward: float
    alive_mask: np.ndarray
    snapshot: StateSnapshot
    done: bool

    def to_json_line(self) -> str:
        return json.dumps({
            "t": int(self.t),
            "observations": {str(k): v.tolist() for k, v in self.observations.items()},
            "actions": {str(k): int(a) for k, a in self.actions.items()},
            "log_probs": {str(k): float(lp) for k, lp in self.log_probs.items()},
            "reward": float(self.reward),
            "alive_mask": [bool(a) for a in self.alive_mask],
            "snapshot": self.snapshot.to_json(),
            "done": bool(self.done),
        })


def _altitude_norm(z: float, config: ScenarioConfig) -> float:
    """Map the flight corridor to [-1, 1]; clipped for off-corridor nodes (GBS)."""
    span = config.h_max - config.h_min
    return float(np.clip(2.0 * (z - config.h_min) / span - 1.0, -1.0, 1.0))


def node_user_summary(node_xy: np.ndarray, served_mask: np.ndarray,
                      state: WorldState, covered: np.ndarray,
                      config: ScenarioConfig) -> np.ndarray:
    """Fixed-width user summary for a node: [load fraction, served-centroid
    offset (2), in-range centroid offset (2), uncovered-in-range fraction],
    offsets relative to the node and normalized by the area side."""
    side = config.area_side_m
    m = state.user_pos.shape[0]
    out = np.zeros(SUMMARY_DIM, dtype=float)
    out[0] = served_mask.sum() / m
    if np.any(served_mask):
        out[1:3] = (state.user_pos[served_mask].mean(axis=0) - node_xy) / side
    horiz = np.linalg.norm(state.user_pos - node_xy, axis=1)
    in_range = horiz <= config.r_sense
    if np.any(in_range):
        out[3:5] = (state.user_pos[in_range].mean(axis=0) - node_xy) / side
        out[5] = np.mean(~covered[in_range])
    return out


def node_summaries(state: WorldState, link_table: LinkTable,
                   config: ScenarioConfig) -> np.ndarray:
    """User summaries for every node slot (UAVs in index order, GBS last);
    dead UAV rows are zero."""
    covered = link_table.rate >= config.r_th
    rows = np.zeros((config.num_uavs + 1, SUMMARY_DIM), dtype=float)
    for k in range(config.num_uavs):
        if not state.alive[k]:
            continue
        rows[k] = node_user_summary(state.uav_pos[k, :2], link_table.assoc == k,
                                    state, covered, config)
    gbs_xy = np.asarray(config.gbs_position[:2], dtype=float)
    rows[-1] = node_user_summary(gbs_xy, link_table.assoc == GBS_ID,
                                 state, covered, config)
    return rows


def build_observation(state: WorldState, link_table: LinkTable, agent: int,
                      config: ScenarioConfig,
                      summaries: Optional[np.ndarray] = None) -> Observation:
    """Assemble one agent's ego-centric observation (canonical neighbor order)."""
    k = int(agent)
    if not state.alive[k]:
        raise ValueError(f"cannot observe for dead agent {k}")
    if summaries is None:
        summaries = node_summaries(state, link_table, config)
    side = config.area_side_m
    v_max = config.v_max_uav
    pos_k = state.uav_pos[k]

    self_state = np.concatenate([[_altitude_norm(pos_k[2], config)],
                                 state.uav_vel[k] / v_max])
    gbs_offset = (np.asarray(config.gbs_position, dtype=float) - pos_k) / side

    slots = [j for j in range(config.num_uavs) if j != k]
    feats = np.zeros((len(slots), 6), dtype=float)
    mask = np.zeros(len(slots), dtype=float)
    for i, j in enumerate(slots):
        if not state.alive[j]:
            continue
        rel = state.uav_pos[j] - pos_k
        if np.linalg.norm(rel) > config.r_comm:
            continue
        feats[i, :3] = rel / side
        feats[i, 3:] = state.uav_vel[j] / v_max
        mask[i] = 1.0
    return Observation(self_state=self_state, gbs_offset=gbs_offset,
                       neighbor_feats=feats, neighbor_mask=mask,
                       user_summary=summaries[k].copy())


def build_ego_graph(snapshot: StateSnapshot, agent: int,
                    config: ScenarioConfig) -> tuple:
    """Critic-side entity rows for one agent's ego graph.

    Returns (ego_row, neighbor_rows, gbs_row, neighbor_mask). Every row is
    ENTITY_DIM wide: relative position/area, velocity/v_max, corridor-mapped
    altitude, a GBS type flag, and the entity's own user summary. Masked
    neighbor slots (dead or out of range) are zero rows.
    """
    k = int(agent)
    if not snapshot.alive[k]:
        raise ValueError(f"cannot build ego graph for dead agent {k}")
    side = config.area_side_m
    v_max = config.v_max_uav
    pos_k = snapshot.uav_pos[k]

    def entity_row(rel, vel, z, is_gbs, summary):
        row = np.zeros(ENTITY_DIM, dtype=float)
        row[0:3] = rel / side
        row[3:6] = vel / v_max
        row[6] = _altitude_norm(z, config)
        row[7] = is_gbs
        row[8:] = summary
        return row

    ego = entity_row(np.zeros(3), snapshot.uav_vel[k], pos_k[2], 0.0,
                     snapshot.summaries[k])
    slots = [j for j in range(config.num_uavs) if j != k]
    neigh = np.zeros((len(slots), ENTITY_DIM), dtype=float)
    mask = np.zeros(len(slots), dtype=float)
    for i, j in enumerate(slots):
        if not snapshot.alive[j]:
            continue
        rel = snapshot.uav_pos[j] - pos_k
        if np.linalg.norm(rel) > config.r_comm:
            continue
        neigh[i] = entity_row(rel, snapshot.uav_vel[j], snapshot.uav_pos[j, 2],
                              0.0, snapshot.summaries[j])
        mask[i] = 1.0
    gbs_pos = np.asarray(config.gbs_position, dtype=float)
    gbs = entity_row(gbs_pos - pos_k, np.zeros(3), gbs_pos[2], 1.0,
                     snapshot.summaries[-1])
    return ego, neigh, gbs, mask


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma^t * r_t over a finite reward sequence."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    total = 0.0
    for t, r in enumerate(rewards):
        total += (gamma ** t) * float(r)
    return total


class CoverageEnv:
    """Gym-style environment over one scenario; deterministic given a seed."""

    def __init__(self, config: ScenarioConfig,
                 weights: Optional[RewardWeights] = None,
                 rotorcraft: Optional[RotorcraftParams] = None,
                 beta: float = 0.6, mech_noise_std: float = 0.1,
                 v_z_max: float = 5.0):
        config.validate()
        self.config = config
        self.weights = weights if weights is not None else RewardWeights()
        self.weights.validate()
        self.rotorcraft = rotorcraft if rotorcraft is not None else RotorcraftParams()
        self.rotorcraft.validate()
        self.beta = beta
        self.mech_noise_std = mech_noise_std
        self.v_z_max = v_z_max
        self.targets = action_targets(config.v_max_uav, v_z_max)
        self.state: Optional[WorldState] = None
        self.link_table: Optional[LinkTable] = None
        self.last_snapshot: Optional[StateSnapshot] = None
        self.last_observations: Optional[Dict[int, np.ndarray]] = None
        self._physics_rng: Optional[np.random.Generator] = None
        self._failure_rng: Optional[np.random.Generator] = None
        self._shadow_db: Optional[np.ndarray] = None
        self._failures_by_time: Dict[int, list] = {}

    @property
    def obs_dim(self) -> int:
        return obs_dim(self.config.num_uavs)

    def reset(self, seed: Optional[int] = None) -> Dict[int, np.ndarray]:
        cfg = self.config
        if seed is None:
            seed = cfg.rng_seed
        self._physics_rng, self._failure_rng = spawn_rngs(seed)
        rng = self._physics_rng

        user_pos, centers, user_group, gbs_cluster = mobility.init_users(cfg, rng)
        uav_pos = mobility.init_uavs(cfg, centers, gbs_cluster)
        self._enforce_spawn_separation(uav_pos)
        state = WorldState(
            t=0,
            uav_pos=uav_pos,
            uav_vel=np.zeros((cfg.num_uavs, 3), dtype=float),
            alive=np.ones(cfg.num_uavs, dtype=bool),
            user_pos=user_pos,
        )
        if cfg.mobility_kind == mobility.MOBILITY_GAUSS_MARKOV:
            state.user_vel = np.zeros((cfg.num_users, 2), dtype=float)
            state.user_mean_vel = mobility.sample_mean_velocities(cfg, rng)
        else:
            state.group_centers = centers.copy()
            state.group_waypoints = rng.uniform(0.0, cfg.area_side_m,
                                                size=centers.shape)
            state.user_group = user_group
            state.user_offsets = user_pos - centers[user_group]
        self._shadow_db = draw_shadowing(cfg.channel_profile, cfg.num_users, rng)

        self._failures_by_time = {}
        for t, uav in cfg.failure_schedule:
            self._failures_by_time.setdefault(int(t), []).append(uav)
        self.state = state
        self._apply_scheduled_failures(0)

        self.link_table = associate_and_rate(state, cfg, cfg.channel_profile,
                                             self._shadow_db)
        state.association = self.link_table.assoc.copy()
        state.prev_association = self.link_table.assoc.copy()
        summaries = node_summaries(state, self.link_table, cfg)
        self.last_snapshot = self._snapshot(summaries)
        self.last_observations = self._observations(summaries)
        return self.last_observations

    def step(self, actions: Dict[int, int]):
        """Advance one step. Returns (observations, reward, metrics, done)."""
        cfg = self.config
        state = self.state
        if state is None:
            raise RuntimeError("reset() must be called before step()")
        alive_ids = [int(k) for k in np.flatnonzero(state.alive)]
        if sorted(int(k) for k in actions) != alive_ids:
            raise ValueError(
                f"need exactly one action per alive agent {alive_ids}, "
                f"got keys {sorted(int(k) for k in actions)}")
        for k, a in actions.items():
            if not 0 <= int(a) < NUM_ACTIONS:
                raise ValueError(f"action index {a} for agent {k} out of range")

        old_pos = state.uav_pos.copy()
        # Velocity update with inertia and mechanical noise, then speed cap.
        for k in alive_ids:
            target = self.targets[int(actions[k])]
            noise = self._physics_rng.normal(0.0, self.mech_noise_std, size=3)
            v = self.beta * state.uav_vel[k] + (1.0 - self.beta) * target + noise
            speed = float(np.linalg.norm(v))
            if speed > cfg.v_max_uav:
                v *= cfg.v_max_uav / speed
            state.uav_vel[k] = v

        # Position integration with area/corridor clamping; a clamped axis
        # zeroes that velocity component (the wall stops it).
        for k in alive_ids:
            raw = state.uav_pos[k] + state.uav_vel[k] * cfg.dt
            clamped = raw.copy()
            clamped[0] = np.clip(raw[0], 0.0, cfg.area_side_m)
            clamped[1] = np.clip(raw[1], 0.0, cfg.area_side_m)
            clamped[2] = np.clip(raw[2], cfg.h_min, cfg.h_max)
            blocked = clamped != raw
            state.uav_vel[k][blocked] = 0.0
            state.uav_pos[k] = clamped

        self._project_safety(old_pos, alive_ids)

        new_t = state.t + 1
        self._apply_scheduled_failures(new_t)
        mobility.step_users(state, cfg, self._physics_rng)
        state.t = new_t

        state.prev_association = state.association.copy()
        self.link_table = associate_and_rate(state, cfg, cfg.channel_profile,
                                             self._shadow_db)
        state.association = self.link_table.assoc.copy()

        power_w = total_power(state, self.link_table, self.rotorcraft, cfg)
        metrics = step_metrics(self.link_table, state, power_w, self.weights, cfg)
        reward = metrics.utility
        done = new_t >= cfg.episode_len

        summaries = node_summaries(state, self.link_table, cfg)
        self.last_snapshot = self._snapshot(summaries)
        self.last_observations = self._observations(summaries)
        return self.last_observations, reward, metrics, done

    # -- internals ---------------------------------------------------------

    def _observations(self, summaries: np.ndarray) -> Dict[int, np.ndarray]:
        return {
            int(k): build_observation(self.state, self.link_table, int(k),
                                      self.config, summaries).flat()
            for k in np.flatnonzero(self.state.alive)
        }

    def _snapshot(self, summaries: np.ndarray) -> StateSnapshot:
        s = self.state
        return StateSnapshot(
            t=s.t, uav_pos=s.uav_pos.copy(), uav_vel=s.uav_vel.copy(),
            alive=s.alive.copy(), user_pos=s.user_pos.copy(),
            association=s.association.copy()
            if s.association is not None else np.zeros(0, dtype=np.int64),
            summaries=summaries)

    def _apply_scheduled_failures(self, t: int) -> None:
        for selector in self._failures_by_time.get(t, []):
            if selector == "random":
                k = pick_random_failure(self.state, self._failure_rng)
            else:
                k = int(selector)
            apply_failure(self.state, k)

    def _enforce_spawn_separation(self, uav_pos: np.ndarray) -> None:
        """Deterministically repair spawn positions closer than d_safe."""
        cfg = self.config
        gbs = np.asarray(cfg.gbs_position, dtype=float)
        anchors = [gbs]
        for k in range(uav_pos.shape[0]):
            for _ in range(64):
                offender = None
                for other in anchors:
                    if np.linalg.norm(uav_pos[k] - other) < cfg.d_safe:
                        offender = other
                        break
                if offender is None:
                    break
                away = uav_pos[k] - offender
                norm = float(np.linalg.norm(away))
                if norm < 1e-9:
                    away, norm = np.array([1.0, 0.0, 0.0]), 1.0
                uav_pos[k] = offender + away * ((cfg.d_safe + 1.0) / norm)
                uav_pos[k, 0] = np.clip(uav_pos[k, 0], 0.0, cfg.area_side_m)
                uav_pos[k, 1] = np.clip(uav_pos[k, 1], 0.0, cfg.area_side_m)
                uav_pos[k, 2] = np.clip(uav_pos[k, 2], cfg.h_min, cfg.h_max)
            anchors.append(uav_pos[k])

    def _project_safety(self, old_pos: np.ndarray, alive_ids: list) -> None:
        """Hold rule for the pairwise separation constraint.

        While any active pair (including UAV-GBS) would end the step closer
        than d_safe, the higher-indexed mover of the first violating pair
        reverts to its pre-step position with velocity zeroed. Terminates
        because every iteration retires one mover, and pre-step positions
        are pairwise feasible by induction.
        """
        cfg = self.config
        state = self.state
        gbs = np.asarray(cfg.gbs_position, dtype=float)

        def moved(k: int) -> bool:
            return not np.array_equal(state.uav_pos[k], old_pos[k])

        for _ in range(len(alive_ids) + 2):
            violation = None
            for i_idx, i in enumerate(alive_ids):
                if np.linalg.norm(state.uav_pos[i] - gbs) < cfg.d_safe:
                    violation = (i, None)
                    break
                for j in alive_ids[i_idx + 1:]:
                    if np.linalg.norm(state.uav_pos[i] - state.uav_pos[j]) < cfg.d_safe:
                        violation = (i, j)
                        break
                if violation:
                    break
            if violation is None:
                return
            i, j = violation
            if j is None:
                holder = i  # the GBS never moves
            elif moved(j):
                holder = j
            else:
                holder = i
            state.uav_pos[holder] = old_pos[holder].copy()
            state.uav_vel[holder] = 0.0
        else:
            raise RuntimeError("safety projection failed to converge")

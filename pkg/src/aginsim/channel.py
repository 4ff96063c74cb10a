"""Propagation, antenna gain, interference, association, and rate math.

All SINR arithmetic is carried out in the linear domain at f64. Helpers for
dBm/dB/W conversions live here so every module shares one convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .world import GBS_ID, ChannelProfile, ScenarioConfig, WorldState, active_set

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0.0:
        raise ValueError("power must be positive")
    return 10.0 * np.log10(watts) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def free_space_path_loss_db(distance_m, freq_hz: float):
    """20*log10(4*pi*f*d/c) in dB."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("free-space path loss needs distance > 0")
    return 20.0 * np.log10(4.0 * np.pi * freq_hz * d / SPEED_OF_LIGHT)


def los_probability(elevation_deg, a: float, b: float):
    """LoS probability as a sigmoid of the elevation angle, clamped to [0,1]."""
    theta = np.asarray(elevation_deg, dtype=float)
    p = 1.0 / (1.0 + a * np.exp(-b * (theta - a)))
    return np.clip(p, 0.0, 1.0)


def a2g_path_loss_db(uav_pos: np.ndarray, user_pos_2d: np.ndarray,
                     profile: ChannelProfile, freq_hz: float):
    """Mean air-to-ground path loss: free-space term plus LoS-weighted excess.

    uav_pos is (..., 3); user_pos_2d is (..., 2) ground coordinates.
    """
    uav_pos = np.asarray(uav_pos, dtype=float)
    user_pos_2d = np.asarray(user_pos_2d, dtype=float)
    horiz = np.linalg.norm(uav_pos[..., :2] - user_pos_2d, axis=-1)
    height = uav_pos[..., 2]
    dist = np.hypot(horiz, height)
    if np.any(dist <= 0.0):
        raise ValueError("co-located UAV and user")
    elevation = np.degrees(np.arctan2(height, horiz))
    p_los = los_probability(elevation, profile.a, profile.b)
    excess = p_los * profile.eta_los + (1.0 - p_los) * profile.eta_nlos
    return free_space_path_loss_db(dist, freq_hz) + excess


def terrestrial_path_loss_db(gbs_pos: np.ndarray, user_pos_2d: np.ndarray,
                             profile: ChannelProfile,
                             rng: Optional[np.random.Generator] = None,
                             shadow_db=None):
    """Log-distance terrestrial path loss with optional shadow fading.

    Shadowing is slow: episode code draws it once per user (see
    draw_shadowing) and passes the frozen values via shadow_db. Passing an
    rng instead draws fresh N(0, shadow_sigma^2) samples. Distances below
    the reference distance clamp to it.
    """
    gbs_pos = np.asarray(gbs_pos, dtype=float)
    user_pos_2d = np.asarray(user_pos_2d, dtype=float)
    horiz = np.linalg.norm(gbs_pos[:2] - user_pos_2d, axis=-1)
    dist = np.hypot(horiz, gbs_pos[2])
    dist = np.maximum(dist, profile.d0)
    pl = profile.pl_d0 + 10.0 * profile.kappa * np.log10(dist / profile.d0)
    if shadow_db is not None:
        pl = pl + np.asarray(shadow_db, dtype=float)
    elif rng is not None:
        pl = pl + rng.normal(0.0, profile.shadow_sigma, size=np.shape(pl))
    return pl


def draw_shadowing(profile: ChannelProfile, num_users: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Per-(user, episode) shadow fading samples, held fixed within an episode."""
    return rng.normal(0.0, profile.shadow_sigma, size=num_users)


def antenna_gain(off_axis_deg, theta_b_deg: float, g_main: float, g_side: float):
    """Flat-top directional gain: main lobe inside the beamwidth (inclusive)."""
    phi = np.abs(np.asarray(off_axis_deg, dtype=float))
    return np.where(phi <= theta_b_deg, g_main, g_side)


@dataclass
class LinkTable:
    """Per-step link bookkeeping over the active node set.

    node_ids orders rows: alive UAV indices ascending, then GBS_ID.
    gains[i, m] is the effective linear gain from active node i to user m
    (antenna gain times linear path loss); tx_watts[i] the node's access
    transmit power. assoc/sinr/rate are per user; loads maps node id to its
    served-user count.
    """

    node_ids: list
    gains: np.ndarray
    tx_watts: np.ndarray
    assoc: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray
    loads: dict = field(default_factory=dict)

    def load_of(self, node_id: int) -> int:
        return int(self.loads.get(int(node_id), 0))


def effective_gains(state: WorldState, config: ScenarioConfig,
                    profile: ChannelProfile,
                    gbs_shadow_db: Optional[np.ndarray] = None) -> tuple:
    """Linear effective gains and transmit powers for every active node.

    UAV rows use the air-to-ground loss and the flat-top antenna (off-axis
    angle measured from the vertical boresight); the GBS row uses the
    terrestrial loss with unit antenna gain.
    """
    nodes = active_set(state)
    m = state.user_pos.shape[0]
    gains = np.zeros((len(nodes), m), dtype=float)
    tx = np.zeros(len(nodes), dtype=float)
    p_uav_w = dbm_to_watts(config.p_tx)
    p_gbs_w = dbm_to_watts(profile.gbs_tx_dbm)
    for i, node in enumerate(nodes):
        if node == GBS_ID:
            pl = terrestrial_path_loss_db(
                np.asarray(config.gbs_position, dtype=float), state.user_pos,
                profile, shadow_db=gbs_shadow_db)
            gains[i] = db_to_linear(-pl)
            tx[i] = p_gbs_w
        else:
            pos = state.uav_pos[node]
            pl = a2g_path_loss_db(pos, state.user_pos, profile, config.carrier_freq)
            horiz = np.linalg.norm(pos[:2] - state.user_pos, axis=1)
            off_axis = np.degrees(np.arctan2(horiz, pos[2]))
            g = antenna_gain(off_axis, profile.theta_b_deg, profile.g_main, profile.g_side)
            gains[i] = g * db_to_linear(-pl)
            tx[i] = p_uav_w
    return nodes, gains, tx


def associate_and_rate(state: WorldState, config: ScenarioConfig,
                       profile: ChannelProfile,
                       gbs_shadow_db: Optional[np.ndarray] = None) -> LinkTable:
    """Max-RSSI association, SINR, and equal-share rates for every user.

    SINR numerator is the serving link's received power; the denominator is
    thermal noise plus every OTHER active UAV's received power plus the GBS
    term (or, for GBS-served users, all active UAVs). Failed nodes appear
    nowhere. Rates share the band equally among the serving node's users.
    """
    nodes, gains, tx = effective_gains(state, config, profile, gbs_shadow_db)
    rx = tx[:, None] * gains                       # (n_nodes, M) received power, W
    assoc_rows = np.argmax(rx, axis=0)
    node_arr = np.array(nodes, dtype=np.int64)
    assoc = node_arr[assoc_rows]

    noise_w = dbm_to_watts(config.noise_psd) * config.bandwidth
    total_rx = rx.sum(axis=0)
    m = rx.shape[1]
    serving = rx[assoc_rows, np.arange(m)]
    # Total minus serving = interference from all other active nodes; the GBS
    # term is inside for UAV-served users and excluded (being the server) for
    # GBS-served users, matching the symmetric formulation.
    interference = total_rx - serving
    sinr = serving / (noise_w + interference)

    loads = {int(node): int(np.sum(assoc == node)) for node in nodes}
    load_per_user = np.array([loads[int(a)] for a in assoc], dtype=float)
    rate = (config.bandwidth / load_per_user) * np.log2(1.0 + sinr)
    return LinkTable(node_ids=nodes, gains=gains, tx_watts=tx, assoc=assoc,
                     sinr=sinr, rate=rate, loads=loads)

"""Scenario configuration, physical constants, and global network state.

Node id convention used across the package: UAVs are 0..num_uavs-1, the
ground base station is GBS_ID (-1). Association arrays hold these ids.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, fields as dc_fields
from typing import Optional

import numpy as np

GBS_ID = -1

MOBILITY_RPGM = "rpgm"
MOBILITY_GAUSS_MARKOV = "gauss_markov"


@dataclass
class ChannelProfile:
    """Propagation constants for one environment class.

    a/b parameterize the elevation-angle LoS sigmoid; eta_* are the excess
    path losses (dB) mixed by the LoS probability; kappa/pl_d0/d0/shadow_sigma
    define the terrestrial log-distance model. Antenna and GBS access-link
    constants ride along because they are per-environment channel knobs.
    Gains are stored linear.
    """

    a: float = 9.61
    b: float = 0.16
    eta_los: float = 0.5
    eta_nlos: float = 21.0
    kappa: float = 3.5
    pl_d0: float = 38.46
    d0: float = 1.0
    shadow_sigma: float = 8.0
    theta_b_deg: float = 45.0
    g_main: float = 10.0
    g_side: float = 0.1
    gbs_tx_dbm: float = 40.0

    def validate(self) -> None:
        if not (self.eta_nlos >= self.eta_los >= 0.0):
            raise ValueError(
                f"need eta_nlos >= eta_los >= 0, got {self.eta_los}, {self.eta_nlos}")
        if self.kappa < 2.0:
            raise ValueError(f"kappa must be >= 2, got {self.kappa}")
        if self.shadow_sigma < 0.0:
            raise ValueError("shadow_sigma must be >= 0")
        if self.d0 <= 0.0 or self.theta_b_deg <= 0.0:
            raise ValueError("d0 and theta_b_deg must be positive")


@dataclass
class MobilityParams:
    """Per-scenario mobility constants (keys under 'mobility' in config files)."""

    alpha_gm: float = 0.8          # Gauss-Markov memory, in [0, 1]
    noise_scale: float = 1.5       # m/s, Gauss-Markov process noise std
    sigma_c: float = 80.0          # m, cluster std for clustered init
    deviation_radius: float = 50.0  # m, max member offset from group center
    offset_step: float = 1.5       # m/s, member random-walk step bound
    waypoint_tolerance: float = 1.0  # m, group-center arrival radius

    def validate(self) -> None:
        if not (0.0 <= self.alpha_gm <= 1.0):
            raise ValueError(f"alpha_gm must be in [0,1], got {self.alpha_gm}")
        if self.sigma_c < 0.0 or self.deviation_radius < 0.0:
            raise ValueError("sigma_c and deviation_radius must be >= 0")
        if self.noise_scale < 0.0 or self.offset_step < 0.0:
            raise ValueError("noise_scale and offset_step must be >= 0")
        if self.waypoint_tolerance <= 0.0:
            raise ValueError("waypoint_tolerance must be positive")


# Named environment classes: LoS sigmoid constants, excess losses, mobility kind.
SCENARIO_PROFILES = {
    "crowded_urban": {
        "channel": {"a": 12.08, "b": 0.11, "eta_los": 1.0, "eta_nlos": 23.0},
        "mobility_kind": MOBILITY_RPGM,
    },
    "suburban": {
        "channel": {"a": 9.61, "b": 0.16, "eta_los": 0.5, "eta_nlos": 21.0},
        "mobility_kind": MOBILITY_RPGM,
    },
    "rural": {
        "channel": {"a": 4.88, "b": 0.43, "eta_los": 0.1, "eta_nlos": 15.0},
        "mobility_kind": MOBILITY_GAUSS_MARKOV,
    },
}


@dataclass
class ScenarioConfig:
    """Full scenario description; field names are the canonical config keys."""

    area_side_m: float = 1000.0
    num_uavs: int = 4
    num_users: int = 140
    gbs_position: tuple = (500.0, 500.0, 0.0)
    altitude_corridor: tuple = (80.0, 120.0)
    v_max_uav: float = 30.0
    v_max_user: float = 15.0
    group_speed: float = 10.0
    d_safe: float = 10.0
    carrier_freq: float = 2.0e9    # Hz
    bandwidth: float = 20.0e6      # Hz
    p_tx: float = 23.0             # dBm, UAV access transmit power
    p_gbs: float = 20.0            # W, GBS circuitry consumption
    p_comm: float = 5.0            # W, per-UAV comms consumption
    noise_psd: float = -174.0      # dBm/Hz
    channel_profile: ChannelProfile = field(default_factory=ChannelProfile)
    mobility_kind: str = MOBILITY_RPGM
    mobility: MobilityParams = field(default_factory=MobilityParams)
    r_comm: float = 1500.0         # m, inter-UAV coordination range
    r_th: float = 0.5e6            # bits/s, coverage rate threshold
    r_sense: float = 500.0         # m, user-summary sensing radius
    failure_schedule: list = field(default_factory=list)
    dt: float = 1.0                # s
    episode_len: int = 200         # steps per episode
    rng_seed: int = 0

    def validate(self) -> None:
        h_min, h_max = self.altitude_corridor
        if not h_min < h_max:
            raise ValueError(f"altitude corridor must satisfy H_min < H_max, got {self.altitude_corridor}")
        positive = {
            "area_side_m": self.area_side_m, "num_uavs": self.num_uavs,
            "num_users": self.num_users, "v_max_uav": self.v_max_uav,
            "v_max_user": self.v_max_user, "group_speed": self.group_speed,
            "d_safe": self.d_safe, "carrier_freq": self.carrier_freq,
            "bandwidth": self.bandwidth, "p_gbs": self.p_gbs,
            "p_comm": self.p_comm, "r_comm": self.r_comm, "r_th": self.r_th,
            "r_sense": self.r_sense, "dt": self.dt, "episode_len": self.episode_len,
        }
        for key, value in positive.items():
            if value <= 0:
                raise ValueError(f"{key} must be strictly positive, got {value}")
        if self.mobility_kind not in (MOBILITY_RPGM, MOBILITY_GAUSS_MARKOV):
            raise ValueError(f"unknown mobility_kind {self.mobility_kind!r}")
        if len(self.gbs_position) != 3:
            raise ValueError("gbs_position must be a 3D point")
        for entry in self.failure_schedule:
            t, uav = _check_failure_entry(entry)
            if not 0 <= t < self.episode_len:
                raise ValueError(f"failure time {t} outside [0, {self.episode_len})")
            if uav != "random" and not 0 <= uav < self.num_uavs:
                raise ValueError(f"failure uav index {uav} out of range")
        self.channel_profile.validate()
        self.mobility.validate()

    @property
    def h_min(self) -> float:
        return float(self.altitude_corridor[0])

    @property
    def h_max(self) -> float:
        return float(self.altitude_corridor[1])

    def to_dict(self) -> dict:
        out = {}
        for f in dc_fields(self):
            value = getattr(self, f.name)
            if f.name == "channel_profile":
                out[f.name] = dict(vars(value))
            elif f.name == "mobility":
                out[f.name] = dict(vars(value))
            elif f.name in ("gbs_position", "altitude_corridor"):
                out[f.name] = list(value)
            elif f.name == "failure_schedule":
                out[f.name] = [list(_check_failure_entry(e)) for e in value]
            else:
                out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dc_fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "channel_profile" in kwargs:
            kwargs["channel_profile"] = _sub_from_dict(ChannelProfile, kwargs["channel_profile"])
        if "mobility" in kwargs:
            kwargs["mobility"] = _sub_from_dict(MobilityParams, kwargs["mobility"])
        if "gbs_position" in kwargs:
            kwargs["gbs_position"] = tuple(float(x) for x in kwargs["gbs_position"])
        if "altitude_corridor" in kwargs:
            kwargs["altitude_corridor"] = tuple(float(x) for x in kwargs["altitude_corridor"])
        if "failure_schedule" in kwargs:
            kwargs["failure_schedule"] = [
                tuple(_check_failure_entry(e)) for e in kwargs["failure_schedule"]]
        cfg = cls(**coerce_field_types(cls, kwargs))
        cfg.validate()
        return cfg


def coerce_field_types(klass, data: dict) -> dict:
    """Cast scalar values to their dataclass field types (YAML parsers hand
    back strings for literals like 8.0e6). Raises on uncastable values."""
    hints = {f.name: f.type for f in dc_fields(klass)}
    out = {}
    for key, value in data.items():
        hint = hints.get(key)
        try:
            if hint == "float" and value is not None:
                out[key] = float(value)
            elif hint == "int" and value is not None:
                out[key] = int(value)
            else:
                out[key] = value
        except (TypeError, ValueError):
            raise ValueError(
                f"{klass.__name__}.{key} expects {hint}, got {value!r}") from None
    return out


def _sub_from_dict(klass, data):
    if isinstance(data, klass):
        return data
    known = {f.name for f in dc_fields(klass)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {klass.__name__} keys: {sorted(unknown)}")
    return klass(**coerce_field_types(klass, data))


def _check_failure_entry(entry) -> tuple:
    try:
        t, uav = entry
    except (TypeError, ValueError):
        raise ValueError(f"failure_schedule entries must be (time, uav) pairs, got {entry!r}")
    t = int(t)
    if uav != "random":
        uav = int(uav)
    return t, uav


def make_scenario(name: str, overrides: Optional[dict] = None) -> ScenarioConfig:
    """Build a named scenario config, merged with per-key overrides.

    Overrides use the canonical field names; nested fields accept either a
    nested dict or a dotted key ("channel_profile.a"). Unknown keys raise.
    """
    if name not in SCENARIO_PROFILES:
        raise ValueError(
            f"unknown scenario {name!r}; expected one of {sorted(SCENARIO_PROFILES)}")
    profile = SCENARIO_PROFILES[name]
    cfg = ScenarioConfig(
        channel_profile=ChannelProfile(**profile["channel"]),
        mobility_kind=profile["mobility_kind"],
    )
    if overrides:
        _apply_overrides(cfg, overrides)
    # GBS defaults to the area center unless explicitly placed.
    if overrides is None or not _mentions(overrides, "gbs_position"):
        half = cfg.area_side_m / 2.0
        cfg.gbs_position = (half, half, 0.0)
    cfg.validate()
    return cfg


def _mentions(overrides: dict, key: str) -> bool:
    return any(k == key or str(k).startswith(key + ".") for k in overrides)


def _set_coerced(target, key: str, value) -> None:
    coerced = coerce_field_types(type(target), {key: value})
    setattr(target, key, coerced[key])


def _apply_overrides(cfg: ScenarioConfig, overrides: dict) -> None:
    known = {f.name for f in dc_fields(ScenarioConfig)}
    for raw_key, value in overrides.items():
        key = str(raw_key)
        head, _, rest = key.partition(".")
        if head not in known:
            raise ValueError(f"unknown scenario config key: {key!r}")
        if rest:
            target = getattr(cfg, head)
            if not hasattr(target, rest):
                raise ValueError(f"unknown scenario config key: {key!r}")
            _set_coerced(target, rest, value)
        elif isinstance(value, dict) and head in ("channel_profile", "mobility"):
            target = getattr(cfg, head)
            for sub_key, sub_value in value.items():
                if not hasattr(target, sub_key):
                    raise ValueError(f"unknown scenario config key: {head}.{sub_key}")
                _set_coerced(target, sub_key, sub_value)
        elif head == "gbs_position" or head == "altitude_corridor":
            setattr(cfg, head, tuple(float(x) for x in value))
        elif head == "failure_schedule":
            setattr(cfg, head, [tuple(_check_failure_entry(e)) for e in value])
        else:
            _set_coerced(cfg, head, value)


@dataclass
class WorldState:
    """Mutable global network state shared by all simulation modules."""

    t: int
    uav_pos: np.ndarray        # (K_U, 3) m
    uav_vel: np.ndarray        # (K_U, 3) m/s
    alive: np.ndarray          # (K_U,) bool survival flags
    user_pos: np.ndarray       # (M, 2) m
    user_vel: Optional[np.ndarray] = None      # (M, 2) m/s, Gauss-Markov only
    user_mean_vel: Optional[np.ndarray] = None  # (M, 2) m/s, Gauss-Markov only
    group_centers: Optional[np.ndarray] = None  # (K_U+1, 2), RPGM only
    group_waypoints: Optional[np.ndarray] = None  # (K_U+1, 2), RPGM only
    user_offsets: Optional[np.ndarray] = None   # (M, 2), RPGM only
    user_group: Optional[np.ndarray] = None     # (M,) int cluster id, clustered init
    association: Optional[np.ndarray] = None    # (M,) serving node id
    prev_association: Optional[np.ndarray] = None

    def copy(self) -> "WorldState":
        return copy.deepcopy(self)

    @property
    def num_uavs(self) -> int:
        return int(self.alive.shape[0])


def active_set(state: WorldState) -> list:
    """Ids of serving nodes: alive UAVs in ascending index order, then the GBS."""
    ids = [int(k) for k in np.flatnonzero(state.alive)]
    ids.append(GBS_ID)
    return ids


def apply_failure(state: WorldState, uav_index: int) -> WorldState:
    """Mark a UAV as failed: locomotion and transmission cease immediately.

    Users it served keep their stale association until the next association
    pass recomputes serving nodes over the reduced active set.
    """
    k = int(uav_index)
    if not 0 <= k < state.num_uavs:
        raise ValueError(f"uav index {k} out of range")
    if not state.alive[k]:
        raise ValueError(f"uav {k} has already failed")
    state.alive[k] = False
    state.uav_vel[k] = 0.0
    return state


def pick_random_failure(state: WorldState, failure_rng: np.random.Generator) -> int:
    """Uniformly choose one alive UAV from the dedicated failure RNG stream."""
    alive_ids = np.flatnonzero(state.alive)
    if alive_ids.size == 0:
        raise ValueError("no alive UAV to fail")
    return int(alive_ids[failure_rng.integers(alive_ids.size)])


def spawn_rngs(seed: int) -> tuple:
    """Derive the (physics, failure) RNG pair from one scenario seed.

    The failure stream is separate so failure/no-failure runs share identical
    physics randomness (paired comparisons).
    """
    physics_ss, failure_ss = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(physics_ss), np.random.default_rng(failure_ss)

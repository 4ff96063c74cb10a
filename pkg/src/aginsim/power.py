"""Rotary-wing propulsion power, total network power, and energy efficiency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import ScenarioConfig, WorldState
from .channel import LinkTable


@dataclass
class RotorcraftParams:
    """Rotorcraft power-model constants (canonical small-UAV values)."""

    p_blade: float = 79.86   # W, blade profile power in hover
    p_induced: float = 88.63  # W, induced power in hover
    u_tip: float = 120.0     # m/s, rotor blade tip speed
    v_induced: float = 4.03  # m/s, mean rotor induced velocity in hover
    d_fuse: float = 0.6      # fuselage drag ratio
    rho: float = 1.225       # kg/m^3, air density
    solidity: float = 0.05   # rotor solidity
    disc_area: float = 0.503  # m^2, rotor disc area

    def validate(self) -> None:
        for name, value in vars(self).items():
            if value <= 0.0:
                raise ValueError(f"rotorcraft param {name} must be positive, got {value}")


def propulsion_power(speed_mps: float, params: RotorcraftParams) -> float:
    """Propulsion power at a given scalar speed: profile + induced + parasite.

    The induced term's inner expression is mathematically positive for all
    speeds but can round below zero at extreme v; it is guarded with max(.,0).
    """
    v = float(speed_mps)
    if v < 0.0:
        raise ValueError(f"speed must be >= 0, got {v}")
    profile = params.p_blade * (1.0 + 3.0 * v * v / (params.u_tip ** 2))
    inner = np.sqrt(1.0 + v ** 4 / (4.0 * params.v_induced ** 4)) \
        - v * v / (2.0 * params.v_induced ** 2)
    induced = params.p_induced * np.sqrt(max(inner, 0.0))
    parasite = 0.5 * params.d_fuse * params.rho * params.solidity * params.disc_area * v ** 3
    return float(profile + induced + parasite)


def total_power(state: WorldState, link_table: LinkTable,
                rotorcraft: RotorcraftParams, config: ScenarioConfig) -> float:
    """Network power: propulsion + comms over alive UAVs, plus GBS circuitry.

    A speed above v_max_uav indicates an upstream constraint bug and raises
    rather than clamping.
    """
    total = config.p_gbs
    for k in range(state.num_uavs):
        if not state.alive[k]:
            continue
        speed = float(np.linalg.norm(state.uav_vel[k]))
        if speed > config.v_max_uav + 1e-9:
            raise ValueError(
                f"uav {k} speed {speed:.3f} exceeds v_max {config.v_max_uav}")
        total += propulsion_power(speed, rotorcraft) + config.p_comm
    return float(total)


def energy_efficiency(r_sum_bps: float, total_power_w: float) -> float:
    """Delivered bits per Joule."""
    if total_power_w <= 0.0:
        raise ValueError(f"total power must be positive, got {total_power_w}")
    return float(r_sum_bps) / float(total_power_w)

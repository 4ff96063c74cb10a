"""Per-step KPIs and the composite utility used as the shared reward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import ScenarioConfig, WorldState
from .channel import LinkTable

# Step-metrics CSV contract: exact column order.
STEP_CSV_COLUMNS = [
    "t", "r_sum", "e_eff", "c_cov", "r_min", "jfi_rate", "jfi_load",
    "handoffs", "utility", "active_uav_count",
]


@dataclass
class RewardWeights:
    """Utility weights and normalizers.

    normalize_handoffs divides the handoff count by the user count inside the
    utility (the raw count is still reported); flip it off to test the
    raw-count reading.
    """

    lambda_cov: float = 2.0
    lambda_ee: float = 0.1
    lambda_jr: float = 0.5
    lambda_jl: float = 0.8
    lambda_min: float = 0.5
    lambda_ho: float = 0.1
    e_ref: float = 1.5e5       # bits/J normalizer for energy efficiency
    eps: float = 1e-9
    normalize_handoffs: bool = True

    def validate(self) -> None:
        for name in ("lambda_cov", "lambda_ee", "lambda_jr", "lambda_jl",
                     "lambda_min", "lambda_ho"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.e_ref <= 0.0 or self.eps <= 0.0:
            raise ValueError("e_ref and eps must be positive")


@dataclass
class StepMetrics:
    t: int
    r_sum: float            # bits/s
    e_eff: float            # bits/J
    c_cov: float            # [0, 1]
    r_min: float            # bits/s
    jfi_rate: float         # [0, 1]
    jfi_load: float         # [0, 1]
    handoffs: int           # raw switch count
    utility: float
    u_qos: float
    active_uav_count: int

    def csv_row(self) -> list:
        return [self.t, self.r_sum, self.e_eff, self.c_cov, self.r_min,
                self.jfi_rate, self.jfi_load, self.handoffs, self.utility,
                self.active_uav_count]


def jain_index(values, eps: float = 1e-9) -> float:
    """Jain's fairness index with a stabilizing eps in the denominator."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("jain_index needs a non-empty input")
    if np.any(x < 0.0):
        raise ValueError("jain_index needs non-negative values")
    total = x.sum()
    return float(total * total / (x.size * np.sum(x * x) + eps))


def handoff_count(prev_assoc: np.ndarray, curr_assoc: np.ndarray) -> int:
    """Number of users whose serving node changed between consecutive steps."""
    prev = np.asarray(prev_assoc)
    curr = np.asarray(curr_assoc)
    if prev.shape != curr.shape:
        raise ValueError(f"association length mismatch: {prev.shape} vs {curr.shape}")
    return int(np.sum(prev != curr))


def step_metrics(link_table: LinkTable, state: WorldState, total_power_w: float,
                 weights: RewardWeights, config: ScenarioConfig) -> StepMetrics:
    """Compute all KPIs for one step and compose the utility.

    Load fairness is taken over alive UAVs only (0.0 when no UAV is alive);
    the handoff count compares the state's current and previous association
    vectors (0 at t=0 where they coincide by construction).
    """
    rates = link_table.rate
    r_sum = float(rates.sum())
    e_eff = r_sum / total_power_w
    covered = rates >= config.r_th
    c_cov = float(np.mean(covered))
    r_min = float(rates.min())
    jfi_rate = jain_index(rates, weights.eps)

    alive_uavs = [int(k) for k in np.flatnonzero(state.alive)]
    if alive_uavs:
        loads = [link_table.load_of(k) for k in alive_uavs]
        jfi_load = jain_index(loads, weights.eps)
    else:
        jfi_load = 0.0

    handoffs = handoff_count(state.prev_association, state.association)

    e_norm = min(e_eff / weights.e_ref, 1.0)
    r_min_norm = min(r_min / config.r_th, 1.0)
    u_qos = (weights.lambda_ee * e_norm
             + weights.lambda_jr * jfi_rate
             + weights.lambda_jl * jfi_load
             + weights.lambda_cov * c_cov
             + weights.lambda_min * r_min_norm)
    ho_term = handoffs / config.num_users if weights.normalize_handoffs else float(handoffs)
    utility = u_qos - weights.lambda_ho * ho_term

    return StepMetrics(
        t=state.t, r_sum=r_sum, e_eff=e_eff, c_cov=c_cov, r_min=r_min,
        jfi_rate=jfi_rate, jfi_load=jfi_load, handoffs=handoffs,
        utility=utility, u_qos=u_qos, active_uav_count=len(alive_uavs))

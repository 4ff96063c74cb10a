"""Training loop: rollout collection, GAE, PPO-clip updates with entropy
bonus, Huber critic regression under random observation shuffling, and
linear annealing of entropy weight and learning rates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields as dc_fields
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .world import ScenarioConfig, coerce_field_types
from .env import ENTITY_DIM, CoverageEnv, build_ego_graph
from .metrics import RewardWeights
from .power import RotorcraftParams
from . import nn
from . import baselines

CONTROLLER_TAG = "tag_mappo"
CONTROLLER_MLP = "mlp_mappo"
CONTROLLER_KMEANS = "kmeans"
CONTROLLERS = (CONTROLLER_TAG, CONTROLLER_MLP, CONTROLLER_KMEANS)

TRAIN_CSV_COLUMNS = [
    "episode", "mean_reward", "c_cov", "handoffs", "e_eff", "jfi_rate",
    "actor_loss", "critic_loss", "entropy", "beta_ent",
]


@dataclass
class TrainConfig:
    actor_lr: float = 1e-4
    critic_lr: float = 5e-4
    gamma: float = 0.99
    gae_tau: float = 0.95
    ppo_epochs: int = 10
    batch_size: int = 256
    clip_eps: float = 0.2
    huber_delta: float = 2.0
    entropy_start: float = 0.10
    entropy_end: float = 0.01
    episodes: int = 300
    num_envs: int = 1
    seed: int = 0
    grad_clip: float = 0.5
    lr_floor_frac: float = 0.1   # learning rates anneal linearly to this fraction
    checkpoint_every: int = 0    # 0: final checkpoint only
    optimizer: str = "adam"      # "adam" | "sgd" (both use the exact gradients)

    def validate(self) -> None:
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0,1), got {self.gamma}")
        if not 0.0 <= self.gae_tau < 1.0:
            raise ValueError(f"gae_tau must be in [0,1), got {self.gae_tau}")
        if self.clip_eps <= 0.0:
            raise ValueError("clip_eps must be positive")
        if self.huber_delta <= 0.0:
            raise ValueError("huber_delta must be positive")
        if self.episodes <= 0 or self.num_envs <= 0 or self.batch_size <= 0:
            raise ValueError("episodes, num_envs, batch_size must be positive")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in dc_fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        cfg = cls(**coerce_field_types(cls, data))
        cfg.validate()
        return cfg


@dataclass
class RolloutBuffer:
    """Flat per-(env, step, agent) transition storage for one update.

    Samples are appended in (step, env, agent-index) order. A stream is one
    agent's transition sequence within one env; it ends at the agent's
    failure step or at episode end, and advantages never bootstrap across
    that boundary.
    """

    obs: List[np.ndarray] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    logp_old: List[float] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    stream: List[Tuple[int, int]] = field(default_factory=list)  # (env, agent)
    step_t: List[int] = field(default_factory=list)
    ego: List[np.ndarray] = field(default_factory=list)
    neigh: List[np.ndarray] = field(default_factory=list)
    gbs: List[np.ndarray] = field(default_factory=list)
    mask: List[np.ndarray] = field(default_factory=list)
    values: Optional[np.ndarray] = None
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def add(self, env_idx: int, agent: int, t: int, obs: np.ndarray, action: int,
            logp: float, reward: float, ego_graph: tuple) -> None:
        ego, neigh, gbs, mask = ego_graph
        self.obs.append(obs)
        self.actions.append(int(action))
        self.logp_old.append(float(logp))
        self.rewards.append(float(reward))
        self.stream.append((int(env_idx), int(agent)))
        self.step_t.append(int(t))
        self.ego.append(ego)
        self.neigh.append(neigh)
        self.gbs.append(gbs)
        self.mask.append(mask)

    def __len__(self) -> int:
        return len(self.actions)

    def ego_graph_batch(self, indices=None) -> nn.EgoGraphBatch:
        sel = range(len(self)) if indices is None else indices
        return nn.EgoGraphBatch(
            ego=np.stack([self.ego[i] for i in sel]),
            neigh=np.stack([self.neigh[i] for i in sel]),
            gbs=np.stack([self.gbs[i] for i in sel]),
            mask=np.stack([self.mask[i] for i in sel]))

    def obs_matrix(self, indices=None) -> np.ndarray:
        sel = range(len(self)) if indices is None else indices
        return np.stack([self.obs[i] for i in sel])

    def stream_indices(self) -> Dict[Tuple[int, int], List[int]]:
        streams: Dict[Tuple[int, int], List[int]] = {}
        for i, key in enumerate(self.stream):
            streams.setdefault(key, []).append(i)
        return streams


def actor_policy(params: nn.ParameterSet) -> Callable:
    """Sampling policy over the shared actor for rollout collection."""

    def policy(env: CoverageEnv, observations: Dict[int, np.ndarray],
               rng: np.random.Generator) -> Tuple[Dict[int, int], Dict[int, float]]:
        actions: Dict[int, int] = {}
        logps: Dict[int, float] = {}
        for k in sorted(observations):
            logits, _ = nn.actor_forward(params, observations[k][None, :])
            probs, logp, _ = nn.policy_stats(logits)
            a = nn.sample_categorical(probs[0], rng)
            actions[k] = a
            logps[k] = float(logp[0, a])
        return actions, logps

    return policy


def kmeans_rollout_policy(controller: baselines.KmeansController) -> Callable:
    def policy(env: CoverageEnv, observations, rng):
        actions = controller.act(env.state)
        return actions, {k: 0.0 for k in actions}
    return policy


def collect_rollout(envs: List[CoverageEnv], policy: Callable,
                    action_rngs: List[np.random.Generator],
                    steps: Optional[int] = None) -> Tuple[RolloutBuffer, dict]:
    """Roll every env forward, storing per-agent transitions and ego graphs.

    Envs must be freshly reset. Scheduled failures shrink the acting agent
    set mid-episode; each dead agent's stream simply stops receiving samples.
    Returns the buffer plus per-episode aggregate stats.
    """
    buffer = RolloutBuffer()
    stats = {"reward_sum": 0.0, "reward_steps": 0, "c_cov_sum": 0.0,
             "handoffs_total": 0.0, "e_eff_sum": 0.0, "jfi_rate_sum": 0.0}
    for e, env in enumerate(envs):
        if env.last_observations is None:
            raise RuntimeError("collect_rollout requires reset envs")
        horizon = env.config.episode_len if steps is None else steps
        observations = env.last_observations
        for _ in range(horizon):
            snapshot = env.last_snapshot
            actions, logps = policy(env, observations, action_rngs[e])
            next_obs, reward, metrics, done = env.step(actions)
            for k in sorted(actions):
                graph = build_ego_graph(snapshot, k, env.config)
                buffer.add(e, k, snapshot.t, observations[k], actions[k],
                           logps[k], reward, graph)
            stats["reward_sum"] += reward
            stats["reward_steps"] += 1
            stats["c_cov_sum"] += metrics.c_cov
            stats["handoffs_total"] += metrics.handoffs
            stats["e_eff_sum"] += metrics.e_eff
            stats["jfi_rate_sum"] += metrics.jfi_rate
            observations = next_obs
            if done:
                break
    return buffer, stats


def evaluate_values(params: nn.ParameterSet, buffer: RolloutBuffer,
                    critic_kind: str) -> np.ndarray:
    """Critic values over the whole buffer in canonical (unshuffled) order."""
    batch = buffer.ego_graph_batch()
    if critic_kind == CONTROLLER_MLP:
        values, _ = baselines.mlp_critic_forward(params, batch)
    else:
        values, _ = nn.critic_forward(params, batch)
    return values


def compute_gae(buffer: RolloutBuffer, gamma: float, tau: float) -> None:
    """Recursive GAE per agent stream; terminal (and death) bootstrap is 0."""
    if buffer.values is None:
        raise ValueError("buffer.values must be computed before GAE")
    n = len(buffer)
    adv = np.zeros(n, dtype=float)
    values = buffer.values
    for indices in buffer.stream_indices().values():
        last_adv = 0.0
        for pos in range(len(indices) - 1, -1, -1):
            i = indices[pos]
            next_v = values[indices[pos + 1]] if pos + 1 < len(indices) else 0.0
            delta = buffer.rewards[i] + gamma * next_v - values[i]
            last_adv = delta + gamma * tau * last_adv
            adv[i] = last_adv
    buffer.advantages = adv
    buffer.returns = adv + values


def huber_loss_and_grad(error: np.ndarray, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Pointwise Huber value and d(loss)/d(error)."""
    abs_e = np.abs(error)
    quad = abs_e <= delta
    loss = np.where(quad, 0.5 * error * error, delta * (abs_e - 0.5 * delta))
    grad = np.where(quad, error, delta * np.sign(error))
    return loss, grad


def anneal(cfg: TrainConfig, episode: int) -> Tuple[float, float, float]:
    """Linear schedules over the training run: entropy weight and both
    learning rates (down to lr_floor_frac of their initial values)."""
    if not 0 <= episode <= cfg.episodes:
        raise ValueError(f"episode {episode} outside [0, {cfg.episodes}]")
    frac = episode / cfg.episodes
    beta = cfg.entropy_start + (cfg.entropy_end - cfg.entropy_start) * frac
    lr_scale = 1.0 - (1.0 - cfg.lr_floor_frac) * frac
    return beta, cfg.actor_lr * lr_scale, cfg.critic_lr * lr_scale


def ppo_update(buffer: RolloutBuffer, params: nn.ParameterSet, cfg: TrainConfig,
               rng: np.random.Generator, beta_ent: float,
               lr_actor: Optional[float] = None, lr_critic: Optional[float] = None,
               critic_kind: str = CONTROLLER_TAG, ros: bool = True,
               opt_actor: Optional[nn.AdamState] = None,
               opt_critic: Optional[nn.AdamState] = None) -> dict:
    """Clipped-surrogate actor and Huber critic updates over minibatches.

    Advantages are normalized over the whole update batch. For each epoch and
    minibatch, the critic's neighbor rows are re-shuffled per sample (when
    ros is on) before the value recomputation; the actor sees only its stored
    observations. Gradient descent with a global norm clip; pass AdamState
    pairs for adaptive steps, otherwise plain SGD.
    """
    if buffer.advantages is None or buffer.returns is None:
        raise ValueError("advantages must be computed before ppo_update")
    n = len(buffer)
    lr_a = cfg.actor_lr if lr_actor is None else lr_actor
    lr_c = cfg.critic_lr if lr_critic is None else lr_critic

    adv = buffer.advantages.copy()
    std = adv.std()
    adv = (adv - adv.mean()) / (std if std > 1e-12 else 1.0)
    returns = buffer.returns
    logp_old = np.array(buffer.logp_old)
    actions = np.array(buffer.actions)
    all_obs = buffer.obs_matrix()

    stats = {"actor_loss": [], "critic_loss": [], "entropy": []}
    for _ in range(cfg.ppo_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            mb = order[start:start + cfg.batch_size]
            b = mb.size

            # -- actor: PPO-clip with entropy bonus
            logits, caches = nn.actor_forward(params, all_obs[mb])
            probs, logp_all, entropy = nn.policy_stats(logits)
            lp_new = logp_all[np.arange(b), actions[mb]]
            ratio = np.exp(lp_new - logp_old[mb])
            a_mb = adv[mb]
            unclipped = ratio * a_mb
            clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a_mb
            use_unclipped = unclipped <= clipped
            surrogate = np.where(use_unclipped, unclipped, clipped)
            actor_loss = -float(surrogate.mean()) - beta_ent * float(entropy.mean())

            dlp = np.where(use_unclipped, -unclipped, 0.0) / b
            onehot = np.zeros_like(probs)
            onehot[np.arange(b), actions[mb]] = 1.0
            dlogits = dlp[:, None] * (onehot - probs)
            dlogits += (beta_ent / b) * probs * (logp_all + entropy[:, None])
            actor_grads = nn.actor_backward(params, caches, dlogits)
            nn.clip_gradients(actor_grads, cfg.grad_clip)

            # -- critic: Huber regression onto fixed returns
            graph = buffer.ego_graph_batch(mb)
            if ros:
                graph = graph.ros_shuffled(rng)
            if critic_kind == CONTROLLER_MLP:
                values, cache = baselines.mlp_critic_forward(params, graph)
            else:
                values, cache = nn.critic_forward(params, graph)
            error = returns[mb] - values
            losses, dloss_de = huber_loss_and_grad(error, cfg.huber_delta)
            critic_loss = float(losses.mean())
            dvalue = -dloss_de / b
            if critic_kind == CONTROLLER_MLP:
                critic_grads = baselines.mlp_critic_backward(params, cache, dvalue)
            else:
                critic_grads = nn.critic_backward(params, cache, dvalue)
            nn.clip_gradients(critic_grads, cfg.grad_clip)

            if not (np.isfinite(actor_loss) and np.isfinite(critic_loss)):
                raise RuntimeError(
                    "non-finite loss: actor={}, critic={}, |adv|max={}".format(
                        actor_loss, critic_loss, float(np.abs(a_mb).max())))

            if opt_actor is not None:
                opt_actor.step(params, actor_grads, lr_a)
            else:
                nn.sgd_step(params, actor_grads, lr_a)
            if opt_critic is not None:
                opt_critic.step(params, critic_grads, lr_c)
            else:
                nn.sgd_step(params, critic_grads, lr_c)

            stats["actor_loss"].append(actor_loss)
            stats["critic_loss"].append(critic_loss)
            stats["entropy"].append(float(entropy.mean()))
    return {key: float(np.mean(vals)) for key, vals in stats.items()}


def init_controller_params(controller: str, rng: np.random.Generator,
                           obs_dim: int, num_uavs: int,
                           entity_dim: int) -> nn.ParameterSet:
    params = nn.ParameterSet()
    if controller == CONTROLLER_KMEANS:
        return params
    nn.init_actor_params(params, rng, obs_dim)
    if controller == CONTROLLER_MLP:
        baselines.init_mlp_critic_params(params, rng, num_uavs, entity_dim)
    else:
        nn.init_critic_params(params, rng, entity_dim)
    return params


def episode_env_seed(run_seed: int, episode: int, env_idx: int) -> int:
    """Stable scalar seed for (run, episode, env); feeds CoverageEnv.reset."""
    ss = np.random.SeedSequence([int(run_seed), int(episode), int(env_idx)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def action_rng_for(env_seed: int) -> np.random.Generator:
    """Policy-sampling stream derived from the env seed, so identically
    seeded envs collect identical trajectories."""
    return np.random.default_rng(np.random.SeedSequence([int(env_seed), 7]))


def train_run(scenario: ScenarioConfig, train_cfg: TrainConfig, controller: str,
              csv_path: str, checkpoint_path: Optional[str] = None,
              weights: Optional[RewardWeights] = None,
              rotorcraft: Optional[RotorcraftParams] = None,
              cfg_hash: str = "", log: Optional[Callable[[str], None]] = None
              ) -> nn.ParameterSet:
    """Full training for one run seed; writes one CSV row per episode."""
    if controller not in CONTROLLERS:
        raise ValueError(f"unknown controller {controller!r}")
    train_cfg.validate()
    scenario.validate()

    envs = [CoverageEnv(scenario, weights=weights, rotorcraft=rotorcraft)
            for _ in range(train_cfg.num_envs)]
    init_rng = np.random.default_rng(np.random.SeedSequence([train_cfg.seed, 11]))
    params = init_controller_params(controller, init_rng, envs[0].obs_dim,
                                    scenario.num_uavs, ENTITY_DIM)
    update_rng = np.random.default_rng(np.random.SeedSequence([train_cfg.seed, 13]))
    kmeans_ctrl = None
    if controller == CONTROLLER_KMEANS:
        kmeans_ctrl = baselines.KmeansController(scenario, seed=train_cfg.seed)
    opt_actor = opt_critic = None
    if train_cfg.optimizer == "adam":
        opt_actor, opt_critic = nn.AdamState(), nn.AdamState()

    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAIN_CSV_COLUMNS)
        for episode in range(train_cfg.episodes):
            action_rngs = []
            for e, env in enumerate(envs):
                env_seed = episode_env_seed(train_cfg.seed, episode, e)
                env.reset(env_seed)
                action_rngs.append(action_rng_for(env_seed))

            if controller == CONTROLLER_KMEANS:
                policy = kmeans_rollout_policy(kmeans_ctrl)
            else:
                policy = actor_policy(params)
            buffer, stats = collect_rollout(envs, policy, action_rngs)

            beta_ent, lr_a, lr_c = anneal(train_cfg, episode)
            if controller == CONTROLLER_KMEANS:
                update_stats = {"actor_loss": 0.0, "critic_loss": 0.0, "entropy": 0.0}
            else:
                buffer.values = evaluate_values(params, buffer, controller)
                compute_gae(buffer, train_cfg.gamma, train_cfg.gae_tau)
                update_stats = ppo_update(
                    buffer, params, train_cfg, update_rng, beta_ent,
                    lr_actor=lr_a, lr_critic=lr_c, critic_kind=controller,
                    ros=(controller == CONTROLLER_TAG),
                    opt_actor=opt_actor, opt_critic=opt_critic)

            steps = max(stats["reward_steps"], 1)
            row = [episode,
                   stats["reward_sum"] / steps,
                   stats["c_cov_sum"] / steps,
                   stats["handoffs_total"] / train_cfg.num_envs,
                   stats["e_eff_sum"] / steps,
                   stats["jfi_rate_sum"] / steps,
                   update_stats["actor_loss"],
                   update_stats["critic_loss"],
                   update_stats["entropy"],
                   beta_ent]
            writer.writerow([_fmt(v) for v in row])
            if log is not None and (episode % 20 == 0 or episode == train_cfg.episodes - 1):
                log(f"episode {episode}: reward {row[1]:.4f} c_cov {row[2]:.3f}")

            if (checkpoint_path and train_cfg.checkpoint_every
                    and (episode + 1) % train_cfg.checkpoint_every == 0
                    and controller != CONTROLLER_KMEANS):
                nn.save_checkpoint(checkpoint_path, params, train_cfg.seed, cfg_hash)

    if checkpoint_path and controller != CONTROLLER_KMEANS:
        nn.save_checkpoint(checkpoint_path, params, train_cfg.seed, cfg_hash)
    return params


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)

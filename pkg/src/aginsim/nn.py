"""Dense-network math with exact hand-derived gradients (f64 numpy).

Two networks live here: the shared actor (MLP encoder + categorical policy
head) and the topology-aware attention critic. The critic embeds every
entity of an agent's ego graph with a shared encoder, attends from the ego
embedding over neighbor + GBS embeddings with masked scaled dot-product
attention, and fuses an ego skip path with the attended context before the
value head. Random observation shuffling permutes neighbor rows jointly
with their mask so the critic cannot key on slot order.
"""

from __future__ import annotations

import json
import hashlib
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

D_MODEL = 128
D_ATTN = 64
ACTOR_HIDDEN = 128
HEAD_HIDDEN = 128


class ParameterSet:
    """Ordered, named f64 tensors with checkpoint serialization."""

    def __init__(self):
        self._tensors: Dict[str, np.ndarray] = {}

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        arr = np.ascontiguousarray(value, dtype=np.float64)
        self._tensors[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def names(self) -> List[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def copy(self) -> "ParameterSet":
        out = ParameterSet()
        for name, arr in self._tensors.items():
            out[name] = arr.copy()
        return out

    def zeros_like(self) -> "ParameterSet":
        out = ParameterSet()
        for name, arr in self._tensors.items():
            out[name] = np.zeros_like(arr)
        return out

    def add_scaled(self, other: "ParameterSet", scale: float) -> None:
        for name, arr in other.items():
            self._tensors[name] += scale * arr

    def global_norm(self, prefix: str = "") -> float:
        total = 0.0
        for name, arr in self._tensors.items():
            if name.startswith(prefix):
                total += float(np.sum(arr * arr))
        return float(np.sqrt(total))

    def assert_finite(self) -> None:
        for name, arr in self._tensors.items():
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite values in tensor {name}")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


# -- generic affine/tanh stack ----------------------------------------------

def mlp_init(params: ParameterSet, rng: np.random.Generator,
             layers: List[str], sizes: List[int]) -> None:
    for i, name in enumerate(layers):
        params[name + ".w"] = glorot_uniform(rng, sizes[i], sizes[i + 1])
        params[name + ".b"] = np.zeros(sizes[i + 1])


def mlp_forward(params: ParameterSet, layers: List[str], x: np.ndarray,
                final_linear: bool = True) -> Tuple[np.ndarray, list]:
    """Affine-tanh stack; the last layer is linear unless final_linear=False.

    Returns the output and per-layer caches for the backward pass.
    """
    h = np.asarray(x, dtype=np.float64)
    if h.ndim != 2:
        raise ValueError(f"mlp_forward expects a 2D batch, got shape {h.shape}")
    caches = []
    last = len(layers) - 1
    for i, name in enumerate(layers):
        w = params[name + ".w"]
        if h.shape[1] != w.shape[0]:
            raise ValueError(
                f"shape mismatch at layer {name}: input {h.shape[1]} vs {w.shape[0]}")
        z = h @ w + params[name + ".b"]
        if i == last and final_linear:
            caches.append((h, None))
            h = z
        else:
            a = np.tanh(z)
            caches.append((h, a))
            h = a
    return h, caches


def mlp_backward(params: ParameterSet, layers: List[str], caches: list,
                 dout: np.ndarray) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Gradients for every layer tensor plus the gradient w.r.t. the input."""
    grads: Dict[str, np.ndarray] = {}
    dh = np.asarray(dout, dtype=np.float64)
    for i in reversed(range(len(layers))):
        x, a = caches[i]
        dz = dh if a is None else dh * (1.0 - a * a)
        grads[layers[i] + ".w"] = x.T @ dz
        grads[layers[i] + ".b"] = dz.sum(axis=0)
        dh = dz @ params[layers[i] + ".w"].T
    return grads, dh


# -- actor -------------------------------------------------------------------

ACTOR_LAYERS = ["actor.enc1", "actor.enc2", "actor.head"]


def init_actor_params(params: ParameterSet, rng: np.random.Generator,
                      obs_dim: int, num_actions: int = 27,
                      hidden: int = ACTOR_HIDDEN) -> None:
    mlp_init(params, rng, ACTOR_LAYERS, [obs_dim, hidden, hidden, num_actions])


def actor_forward(params: ParameterSet, obs: np.ndarray) -> Tuple[np.ndarray, list]:
    """Observation batch -> action logits (+ caches)."""
    return mlp_forward(params, ACTOR_LAYERS, obs)


def actor_backward(params: ParameterSet, caches: list,
                   dlogits: np.ndarray) -> Dict[str, np.ndarray]:
    grads, _ = mlp_backward(params, ACTOR_LAYERS, caches, dlogits)
    return grads


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def policy_stats(logits: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(probs, log-probs, entropy) of the categorical policy per row."""
    logp = log_softmax(logits)
    probs = np.exp(logp)
    entropy = -np.sum(probs * logp, axis=-1)
    return probs, logp, entropy


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; robust to f64 rounding in the tail."""
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(np.searchsorted(cdf, u, side="right").clip(0, probs.size - 1))


# -- random observation shuffling ---------------------------------------------

def ros_shuffle(neighbor_rows: np.ndarray, mask: np.ndarray,
                rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform permutation applied jointly to neighbor rows and their mask.

    The ego row never passes through here; it stays fixed as the attention
    anchor.
    """
    perm = rng.permutation(neighbor_rows.shape[0])
    return neighbor_rows[perm], mask[perm]


# -- topology-aware attention critic ------------------------------------------

CRITIC_HEAD_LAYERS = ["critic.head1", "critic.head2"]


@dataclass
class EgoGraphBatch:
    """Batched ego graphs: ego/neighbor/GBS entity rows plus neighbor mask."""

    ego: np.ndarray    # (N, F)
    neigh: np.ndarray  # (N, J, F), masked rows zeroed
    gbs: np.ndarray    # (N, F)
    mask: np.ndarray   # (N, J) 1.0 for live in-range neighbor slots

    def __post_init__(self):
        n = self.ego.shape[0]
        if self.neigh.shape[0] != n or self.gbs.shape[0] != n or self.mask.shape[0] != n:
            raise ValueError("inconsistent batch dimension in ego graph batch")
        if self.neigh.shape[:2] != self.mask.shape:
            raise ValueError("neighbor/mask shape mismatch")

    @property
    def size(self) -> int:
        return self.ego.shape[0]

    def ros_shuffled(self, rng: np.random.Generator) -> "EgoGraphBatch":
        """Per-sample joint permutation of neighbor rows and mask."""
        neigh = self.neigh.copy()
        mask = self.mask.copy()
        for n in range(self.size):
            neigh[n], mask[n] = ros_shuffle(neigh[n], mask[n], rng)
        return EgoGraphBatch(ego=self.ego, neigh=neigh, gbs=self.gbs, mask=mask)


def init_critic_params(params: ParameterSet, rng: np.random.Generator,
                       entity_dim: int, d_model: int = D_MODEL,
                       d_attn: int = D_ATTN, head_hidden: int = HEAD_HIDDEN) -> None:
    params["critic.enc.w"] = glorot_uniform(rng, entity_dim, d_model)
    params["critic.enc.b"] = np.zeros(d_model)
    params["critic.wq"] = glorot_uniform(rng, d_model, d_attn)
    params["critic.wk"] = glorot_uniform(rng, d_model, d_attn)
    params["critic.wv"] = glorot_uniform(rng, d_model, d_model)
    params["critic.wself"] = glorot_uniform(rng, d_model, d_model)
    mlp_init(params, rng, CRITIC_HEAD_LAYERS, [2 * d_model, head_hidden, 1])


def masked_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row softmax with masked entries excluded; all-masked rows give zeros."""
    neg = np.where(mask > 0.0, scores, -np.inf)
    row_max = np.max(neg, axis=-1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    expd = np.exp(neg - row_max)
    denom = expd.sum(axis=-1, keepdims=True)
    return np.where(denom > 0.0, expd / np.where(denom > 0.0, denom, 1.0), 0.0)


def attention_forward(params: ParameterSet, ego_h: np.ndarray,
                      neigh_h: np.ndarray, mask: np.ndarray
                      ) -> Tuple[np.ndarray, np.ndarray, dict]:
    """Masked scaled dot-product attention from the ego embedding.

    ego_h: (N, D); neigh_h: (N, J, D); mask: (N, J). Returns the attended
    context (N, D), weights (N, J), and a cache for the backward pass.
    """
    if not (np.all(np.isfinite(ego_h)) and np.all(np.isfinite(neigh_h))):
        raise FloatingPointError("non-finite attention inputs")
    wq, wk, wv = params["critic.wq"], params["critic.wk"], params["critic.wv"]
    d_attn = wq.shape[1]
    q = ego_h @ wq                       # (N, d_attn)
    keys = neigh_h @ wk                  # (N, J, d_attn)
    vals = neigh_h @ wv                  # (N, J, D)
    scores = np.einsum("nd,njd->nj", q, keys) / np.sqrt(d_attn)
    alpha = masked_softmax(scores, mask)
    context = np.einsum("nj,njd->nd", alpha, vals)
    cache = {"ego_h": ego_h, "neigh_h": neigh_h, "mask": mask, "q": q,
             "keys": keys, "vals": vals, "alpha": alpha, "d_attn": d_attn}
    return context, alpha, cache


def attention_backward(params: ParameterSet, cache: dict, dcontext: np.ndarray
                       ) -> Tuple[Dict[str, np.ndarray], np.ndarray, np.ndarray]:
    """Gradients of the attention block.

    Returns (weight grads, d_ego_h, d_neigh_h). Masked slots receive exactly
    zero gradient because their attention weight is identically zero and
    their score never enters the softmax.
    """
    wq, wk, wv = params["critic.wq"], params["critic.wk"], params["critic.wv"]
    ego_h, neigh_h = cache["ego_h"], cache["neigh_h"]
    q, keys, vals, alpha = cache["q"], cache["keys"], cache["vals"], cache["alpha"]
    scale = 1.0 / np.sqrt(cache["d_attn"])

    dalpha = np.einsum("nd,njd->nj", dcontext, vals)
    dvals = alpha[:, :, None] * dcontext[:, None, :]
    # Softmax rows: ds_j = a_j * (dalpha_j - sum_i a_i dalpha_i).
    inner = np.sum(alpha * dalpha, axis=-1, keepdims=True)
    dscores = alpha * (dalpha - inner)
    dq = np.einsum("nj,njd->nd", dscores, keys) * scale
    dkeys = dscores[:, :, None] * q[:, None, :] * scale

    grads = {
        "critic.wq": ego_h.T @ dq,
        "critic.wk": np.einsum("njf,njd->fd", neigh_h, dkeys),
        "critic.wv": np.einsum("njf,njd->fd", neigh_h, dvals),
    }
    d_ego_h = dq @ wq.T
    d_neigh_h = dkeys @ wk.T + dvals @ wv.T
    return grads, d_ego_h, d_neigh_h


def critic_forward(params: ParameterSet, batch: EgoGraphBatch
                   ) -> Tuple[np.ndarray, dict]:
    """Per-sample value estimates from the ego-graph batch.

    The GBS anchor row joins the neighbor set with a fixed mask of 1 before
    attention; the ego embedding takes the skip path and is concatenated
    with the attended context ahead of the value head.
    """
    n, j, f = batch.neigh.shape
    enc_w, enc_b = params["critic.enc.w"], params["critic.enc.b"]
    if f != enc_w.shape[0]:
        raise ValueError(f"entity width {f} does not match encoder {enc_w.shape[0]}")

    entities = np.concatenate([batch.neigh, batch.gbs[:, None, :]], axis=1)
    full_mask = np.concatenate([batch.mask, np.ones((n, 1))], axis=1)
    h_ego = np.tanh(batch.ego @ enc_w + enc_b)                    # (N, D)
    h_ent = np.tanh(entities @ enc_w + enc_b)                     # (N, J+1, D)

    context, alpha, attn_cache = attention_forward(params, h_ego, h_ent, full_mask)
    self_path = h_ego @ params["critic.wself"]
    fused = np.concatenate([self_path, context], axis=1)
    value, head_caches = mlp_forward(params, CRITIC_HEAD_LAYERS, fused)
    cache = {"batch": batch, "entities": entities, "h_ego": h_ego,
             "h_ent": h_ent, "attn": attn_cache, "alpha": alpha,
             "head": head_caches, "fused": fused}
    return value[:, 0], cache


def critic_backward(params: ParameterSet, cache: dict,
                    dvalue: np.ndarray) -> Dict[str, np.ndarray]:
    """Exact reverse-mode gradients for every critic tensor."""
    batch: EgoGraphBatch = cache["batch"]
    h_ego, h_ent = cache["h_ego"], cache["h_ent"]
    d_model = h_ego.shape[1]

    dfused_grads, dfused = mlp_backward(params, CRITIC_HEAD_LAYERS, cache["head"],
                                        np.asarray(dvalue, dtype=np.float64)[:, None])
    d_self = dfused[:, :d_model]
    d_context = dfused[:, d_model:]

    grads = dict(dfused_grads)
    grads["critic.wself"] = h_ego.T @ d_self
    d_h_ego = d_self @ params["critic.wself"].T

    attn_grads, d_h_ego_attn, d_h_ent = attention_backward(params, cache["attn"],
                                                           d_context)
    for name, g in attn_grads.items():
        grads[name] = grads.get(name, 0.0) + g
    d_h_ego = d_h_ego + d_h_ego_attn

    dz_ego = d_h_ego * (1.0 - h_ego * h_ego)
    dz_ent = d_h_ent * (1.0 - h_ent * h_ent)
    grads["critic.enc.w"] = (batch.ego.T @ dz_ego
                             + np.einsum("njf,njd->fd", cache["entities"], dz_ent))
    grads["critic.enc.b"] = dz_ego.sum(axis=0) + dz_ent.sum(axis=(0, 1))
    return grads


# -- gradient utilities --------------------------------------------------------

def clip_gradients(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    """Scale the whole gradient dict to a global norm of at most max_norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.asarray(g) ** 2))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * scale
    return norm


def sgd_step(params: ParameterSet, grads: Dict[str, np.ndarray], lr: float) -> None:
    for name, g in grads.items():
        params[name][...] = params[name] - lr * g


class AdamState:
    """Per-tensor Adam moments; deterministic and restricted to one prefix.

    lr=0 performs a bit-identical no-op on the parameters (moments still
    advance), matching the zero-rate invariant of the update ops.
    """

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: ParameterSet, grads: Dict[str, np.ndarray],
             lr: float) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            params[name][...] = params[name] - lr * m_hat / (np.sqrt(v_hat) + self.eps)


# -- checkpointing --------------------------------------------------------------

CHECKPOINT_FORMAT = "aginsim-params-v1"


def config_hash(config_dict: dict) -> str:
    blob = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_checkpoint(path: str, params: ParameterSet, seed: int,
                    cfg_hash: str) -> None:
    """Single-file checkpoint: one JSON manifest line + little-endian f64 blob."""
    tensors = []
    offset = 0
    payload = []
    for name, arr in params.items():
        data = np.ascontiguousarray(arr, dtype="<f8")
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        payload.append(data.tobytes())
        offset += data.nbytes
    manifest = {"format": CHECKPOINT_FORMAT, "seed": int(seed),
                "config_hash": cfg_hash, "total_bytes": offset,
                "tensors": tensors}
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for chunk in payload:
            fh.write(chunk)


def load_checkpoint(path: str) -> Tuple[ParameterSet, dict]:
    """Load and strictly validate a checkpoint written by save_checkpoint."""
    with open(path, "rb") as fh:
        header = fh.readline()
        blob = fh.read()
    manifest = json.loads(header.decode("utf-8"))
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unrecognized checkpoint format in {path}")
    if len(blob) != manifest["total_bytes"]:
        raise ValueError(
            f"payload size {len(blob)} does not match manifest {manifest['total_bytes']}")
    params = ParameterSet()
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * 8
        if end > len(blob):
            raise ValueError(f"tensor {entry['name']} overruns the payload")
        arr = np.frombuffer(blob[start:end], dtype="<f8").reshape(shape)
        params[entry["name"]] = arr.copy()
    params.assert_finite()
    return params, manifest

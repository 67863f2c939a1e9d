"""Two-layer tanh actor-critic in numpy with hand-written gradients."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..simulator.kinematics import N_ACTIONS
from .base import Policy

CHECKPOINT_FORMAT = "aeronav-ac"
CHECKPOINT_VERSION = 1
PARAM_NAMES = ("w1", "b1", "w_pi", "b_pi", "w_v", "b_v")


@dataclass
class ActorCriticParams:
    w1: np.ndarray
    b1: np.ndarray
    w_pi: np.ndarray
    b_pi: np.ndarray
    w_v: np.ndarray
    b_v: np.ndarray
    lr: float = 3e-3
    discount: float = 0.7
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    memory_alpha: float = 0.8
    seed: int = 0
    role: str = "explore"
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, obs_dim: int, hidden: int = 64, seed: int = 0, **kw) -> "ActorCriticParams":
        """``obs_dim`` is the bundle length; the network sees bundle + memory."""
        rng = np.random.default_rng(seed)
        d_in = 2 * obs_dim
        return cls(
            w1=rng.standard_normal((hidden, d_in)) / np.sqrt(d_in),
            b1=np.zeros(hidden),
            w_pi=rng.standard_normal((N_ACTIONS, hidden)) * 0.01,
            b_pi=np.zeros(N_ACTIONS),
            w_v=rng.standard_normal((1, hidden)) * 0.01,
            b_v=np.zeros(1),
            seed=seed, **kw)

    @property
    def obs_dim(self) -> int:
        return self.w1.shape[1] // 2

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def copy(self) -> "ActorCriticParams":
        p = ActorCriticParams(**{n: a.copy() for n, a in self.arrays().items()}, lr=self.lr,
                              discount=self.discount, entropy_coef=self.entropy_coef,
                              value_coef=self.value_coef, memory_alpha=self.memory_alpha,
                              seed=self.seed, role=self.role, meta=dict(self.meta))
        return p

    def hyper(self) -> dict:
        return {"lr": self.lr, "discount": self.discount, "entropy_coef": self.entropy_coef,
                "value_coef": self.value_coef, "memory_alpha": self.memory_alpha, "seed": self.seed,
                "role": self.role}

    def config_hash(self) -> str:
        blob = json.dumps({"hyper": self.hyper(), "shapes": {n: a.shape for n, a in self.arrays().items()}},
                          sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays().values())


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def masked_logits(logits: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    if mask is None:
        return logits
    return np.where(mask, logits, -np.inf)


def forward(params: ActorCriticParams, x: np.ndarray, mask: np.ndarray | None = None):
    """Batch forward pass. Returns (probs, values, cache)."""
    x = np.atleast_2d(x)
    pre = x @ params.w1.T + params.b1
    h = np.tanh(pre)
    logits = masked_logits(h @ params.w_pi.T + params.b_pi, mask)
    probs = softmax(logits)
    values = (h @ params.w_v.T + params.b_v)[:, 0]
    return probs, values, (x, h)


def loss_and_grads(params: ActorCriticParams, x: np.ndarray, actions: np.ndarray, returns: np.ndarray,
                   advantages: np.ndarray, mask: np.ndarray | None = None):
    """Mean advantage actor-critic loss over a batch and its exact gradient.

    loss = mean(-A * log pi(a|s) - c_H * H(pi(s)) + c_V * 0.5 * (R - V(s))^2)
    with the advantages A treated as constants.
    """
    probs, values, (x, h) = forward(params, x, mask)
    n = len(actions)
    idx = np.arange(n)
    with np.errstate(divide="ignore"):
        logp = np.log(probs)
    safe_logp = np.where(probs > 0, logp, 0.0)
    entropy = -(probs * safe_logp).sum(axis=1)
    logp_a = logp[idx, actions]
    td = returns - values
    loss = float(np.mean(-advantages * logp_a - params.entropy_coef * entropy
                         + params.value_coef * 0.5 * td ** 2))

    onehot = np.zeros_like(probs)
    onehot[idx, actions] = 1.0
    # d/dlogits of -A log pi_a  and of -c_H * H
    g_logits = advantages[:, None] * (probs - onehot)
    g_logits += params.entropy_coef * probs * (safe_logp + entropy[:, None])
    g_logits /= n
    g_values = -params.value_coef * td / n

    grads = {
        "w_pi": g_logits.T @ h,
        "b_pi": g_logits.sum(axis=0),
        "w_v": (g_values[:, None] * h).sum(axis=0, keepdims=True),
        "b_v": np.array([g_values.sum()]),
    }
    g_h = g_logits @ params.w_pi + g_values[:, None] * params.w_v
    g_pre = g_h * (1.0 - h ** 2)
    grads["w1"] = g_pre.T @ x
    grads["b1"] = g_pre.sum(axis=0)
    return loss, grads


class Adam:
    def __init__(self, params: ActorCriticParams, lr: float, b1: float = 0.9, b2: float = 0.999,
                 eps: float = 1e-8, clip_norm: float = 5.0):
        self.lr, self.b1, self.b2, self.eps, self.clip_norm = lr, b1, b2, eps, clip_norm
        self.m = {n: np.zeros_like(a) for n, a in params.arrays().items()}
        self.v = {n: np.zeros_like(a) for n, a in params.arrays().items()}
        self.t = 0

    def update(self, params: ActorCriticParams, grads: dict[str, np.ndarray]) -> None:
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        scale = min(1.0, self.clip_norm / norm) if norm > 0 else 1.0
        self.t += 1
        for name in PARAM_NAMES:
            g = grads[name] * scale
            self.m[name] = self.b1 * self.m[name] + (1 - self.b1) * g
            self.v[name] = self.b2 * self.v[name] + (1 - self.b2) * g * g
            m_hat = self.m[name] / (1 - self.b1 ** self.t)
            v_hat = self.v[name] / (1 - self.b2 ** self.t)
            arr = getattr(params, name)
            arr -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class ActorCriticPolicy(Policy):
    """Learned policy; memory is an exponential moving average of past bundles."""

    def __init__(self, params: ActorCriticParams, action_mask: np.ndarray | None = None):
        self.params = params
        self.action_mask = action_mask
        self.name = f"trained-{params.role}"

    def reset(self):
        return np.zeros(self.params.obs_dim)

    def features(self, bundle, memory):
        x = bundle.to_vector() if hasattr(bundle, "to_vector") else np.asarray(bundle, dtype=float)
        if memory is None:
            memory = np.zeros_like(x)
        a = self.params.memory_alpha
        new_mem = a * memory + (1.0 - a) * x
        return np.concatenate([x, new_mem]), new_mem

    def act(self, bundle, memory=None):
        inp, mem = self.features(bundle, memory)
        probs, _, _ = forward(self.params, inp, self.action_mask)
        return probs[0], mem

    def value(self, bundle, memory=None) -> float:
        inp, _ = self.features(bundle, memory)
        return float(forward(self.params, inp, self.action_mask)[1][0])


def save_checkpoint(params: ActorCriticParams, path) -> None:
    header = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "hyper": params.hyper(),
              "config_hash": params.config_hash(), "meta": params.meta}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **params.arrays())


def load_checkpoint(path) -> ActorCriticParams:
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            arrays = {n: data[n].copy() for n in PARAM_NAMES}
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read checkpoint {path}: {exc}") from exc
    if header.get("format") != CHECKPOINT_FORMAT or header.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"{path} is not a version {CHECKPOINT_VERSION} checkpoint")
    params = ActorCriticParams(**arrays, **header["hyper"], meta=header.get("meta", {}))
    if params.config_hash() != header["config_hash"]:
        raise ConfigError(f"checkpoint {path} config hash mismatch")
    return params

"""Agents for the trend-point MDP: PPO (default), DQN and A2C.

Everything is hand-written on top of :mod:`dtfnet.nn`. All agents talk to an
environment exposing ``reset() -> state``, ``step(a) -> (state, reward,
done)`` and ``state_dim``, so tests can swap in toy environments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .._kernels import gae_kernel
from ..core import ConfigError, RunConfig, as_rng, atomic_write_text
from ..nn import AdamState, Mlp, adam_step, log_softmax, mlp_backward, mlp_forward, softmax_logits
from .env import TrendEnv, state_dim

ConfigInvalid = ConfigError

AGENTS = ("PPO", "DQN", "A2C")
MAX_GRAD_NORM = 0.5


@dataclass(frozen=True)
class PpoConfig:
    clip_ratio: float = 0.2
    gae_lambda: float = 0.95
    epochs_per_update: int = 4
    minibatch: int = 64
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    rollout_len: int = 256

    def __post_init__(self):
        if not 0 < self.clip_ratio < 1:
            raise ConfigInvalid("clip_ratio must lie in (0, 1)")
        if not 0 < self.gae_lambda <= 1:
            raise ConfigInvalid("gae_lambda must lie in (0, 1]")
        if min(self.epochs_per_update, self.minibatch, self.rollout_len) < 1:
            raise ConfigInvalid("epochs_per_update, minibatch and rollout_len must be positive")


@dataclass
class PolicyModel:
    """Networks of one agent plus the state layout they were trained on.

    ``nets`` holds ``actor``/``critic`` (PPO), ``shared`` (A2C, two logits
    then one value) or ``q`` (DQN).
    """

    kind: str
    nets: dict
    window: int
    d_model: int

    @classmethod
    def create(cls, kind: str, cfg: RunConfig, rng, hidden: int | None = None) -> "PolicyModel":
        kind = kind.upper()
        if kind not in AGENTS:
            raise ConfigInvalid(f"unknown agent {kind!r}; choose from {AGENTS}")
        rng = as_rng(rng)
        width = cfg.hidden if hidden is None else hidden
        dim = state_dim(cfg)
        if kind == "PPO":
            nets = {
                "actor": Mlp.init([dim, width, width, 2], rng.split("actor"), out_scale=0.01),
                "critic": Mlp.init([dim, width, width, 1], rng.split("critic")),
            }
        elif kind == "A2C":
            nets = {"shared": Mlp.init([dim, width, width, 3], rng.split("shared"), out_scale=0.01)}
        else:
            nets = {"q": Mlp.init([dim, width, width, 2], rng.split("q"), out_scale=0.01)}
        return cls(kind, nets, cfg.window, cfg.d_model)

    @classmethod
    def constant(cls, action: int, cfg: RunConfig) -> "PolicyModel":
        """A policy that always prefers ``action`` (for tests and baselines)."""
        net = Mlp.zeros([state_dim(cfg), 1, 2])
        net.biases[-1][:] = [10.0, -10.0] if action == 0 else [-10.0, 10.0]
        critic = Mlp.zeros([state_dim(cfg), 1, 1])
        return cls("PPO", {"actor": net, "critic": critic}, cfg.window, cfg.d_model)

    def _head(self):
        return {"PPO": "actor", "A2C": "shared", "DQN": "q"}[self.kind]

    def logits(self, states):
        out = self.nets[self._head()](states)
        return out[..., :2]

    def probs(self, states):
        return softmax_logits(self.logits(states))

    def value(self, states):
        if self.kind == "PPO":
            return self.nets["critic"](states)[..., 0]
        if self.kind == "A2C":
            return self.nets["shared"](states)[..., 2]
        return np.max(self.nets["q"](states), axis=-1)

    def greedy(self, state) -> int:
        return int(np.argmax(self.logits(state)))

    def copy(self) -> "PolicyModel":
        return PolicyModel(self.kind, {k: v.copy() for k, v in self.nets.items()}, self.window, self.d_model)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "window": self.window,
            "d_model": self.d_model,
            "nets": {k: v.to_dict() for k, v in self.nets.items()},
        }

    @classmethod
    def from_dict(cls, doc) -> "PolicyModel":
        nets = {k: Mlp.from_dict(v) for k, v in doc["nets"].items()}
        return cls(doc["kind"], nets, int(doc["window"]), int(doc["d_model"]))

    def save(self, path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "PolicyModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class TrainResult:
    """A trained policy and its per-episode reward history.

    ``episode_rewards`` is the mean reward over the rewarded steps of each
    finished episode (episodes without reward steps are skipped), which makes
    episodes of different lengths comparable. ``episode_returns`` is the plain
    sum.
    """

    policy: PolicyModel
    episode_rewards: list = field(default_factory=list)
    episode_returns: list = field(default_factory=list)
    steps: int = 0


class _EpisodeLog:
    def __init__(self):
        self.total = 0.0
        self.count = 0
        self.result_rewards = []
        self.result_returns = []

    def record(self, reward: float, done: bool) -> None:
        self.total += reward
        if reward != 0.0:
            self.count += 1
        if done:
            self.result_returns.append(self.total)
            if self.count:
                self.result_rewards.append(self.total / self.count)
            self.total, self.count = 0.0, 0


def _resolve(series, cfg, phi, rng, env, total_steps):
    rng = as_rng(cfg.seed if rng is None else rng)
    if env is None:
        if phi is None:
            raise ConfigInvalid("a frozen forecaster phi is required to build the environment")
        env = TrendEnv(series, phi, cfg, rng.split("env"))
    if total_steps is None:
        n = getattr(env, "n_points", None)
        total_steps = cfg.rl_steps if n is None else min(cfg.rl_steps, cfg.episodes_max * n)
    return rng, env, int(total_steps)


def ppo_loss(logits, actions, logp_old, advantages, clip_ratio: float, entropy_coef: float = 0.0):
    """Clipped surrogate loss and its gradient with respect to ``logits``.

    ``loss = -mean(min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)) - c * mean(H)``.
    Where the clipped branch is selected the policy term contributes no
    gradient.

    Returns
    -------
    loss : float
    grad : ndarray, same shape as ``logits``
    """
    logits = np.asarray(logits, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.int64)
    adv = np.asarray(advantages, dtype=np.float64)
    b = logits.shape[0]
    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    rows = np.arange(b)
    logp = logp_all[rows, actions]
    ratio = np.exp(logp - np.asarray(logp_old, dtype=np.float64))
    clipped = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio)
    unclipped_obj = ratio * adv
    clipped_obj = clipped * adv
    entropy = -np.sum(probs * logp_all, axis=1)
    loss = -np.mean(np.minimum(unclipped_obj, clipped_obj)) - entropy_coef * np.mean(entropy)

    active = unclipped_obj <= clipped_obj
    onehot = np.zeros_like(logits)
    onehot[rows, actions] = 1.0
    coef = np.where(active, -adv * ratio, 0.0) / b
    grad = coef[:, None] * (onehot - probs)
    grad += entropy_coef * probs * (logp_all + entropy[:, None]) / b
    return float(loss), grad


def ppo_train(series, cfg: RunConfig, ppo: PpoConfig | None = None, phi=None, rng=None, env=None, total_steps: int | None = None) -> TrainResult:
    """Proximal policy optimisation with GAE on separate actor and critic nets.

    Actions are sampled during training; the returned policy is used greedily
    for extraction. ``total_steps`` defaults to ``min(rl_steps,
    episodes_max * N)``.
    """
    if cfg.agent.upper() != "PPO":
        raise ConfigInvalid(f"ppo_train called with agent {cfg.agent!r}")
    ppo = ppo or PpoConfig()
    rng, env, total = _resolve(series, cfg, phi, rng, env, total_steps)
    policy = PolicyModel.create("PPO", cfg, rng.split("init"))
    actor, critic = policy.nets["actor"], policy.nets["critic"]
    opt_a, opt_c = AdamState.for_model(actor), AdamState.for_model(critic)
    act_rng, mb_rng = rng.split("act"), rng.split("minibatch")
    log = _EpisodeLog()
    lr = cfg.learning_rate_agent

    dim = env.state_dim
    state = env.reset()
    steps = 0
    while steps < total:
        n = min(ppo.rollout_len, total - steps)
        states = np.empty((n, dim))
        actions = np.empty(n, dtype=np.int64)
        logps = np.empty(n)
        values = np.empty(n)
        rewards = np.empty(n)
        dones = np.empty(n)
        for k in range(n):
            logits = actor(state)
            lp = log_softmax(logits)
            a = int(act_rng.random() < np.exp(lp[1]))
            states[k] = state
            actions[k] = a
            logps[k] = lp[a]
            values[k] = critic(state)[0]
            state, r, done = env.step(a)
            rewards[k] = r
            dones[k] = float(done)
            log.record(r, done)
            if done:
                state = env.reset()
        steps += n
        last_value = 0.0 if dones[-1] else float(critic(state)[0])
        adv = gae_kernel(rewards, values, dones, last_value, cfg.gamma, ppo.gae_lambda)
        returns = adv + values
        for _ in range(ppo.epochs_per_update):
            order = mb_rng.permutation(n)
            for lo in range(0, n, ppo.minibatch):
                idx = order[lo : lo + ppo.minibatch]
                mb_adv = adv[idx]
                if idx.size > 1:
                    mb_adv = (mb_adv - mb_adv.mean()) / (mb_adv.std() + 1e-8)
                out, cache = mlp_forward(actor, states[idx])
                _, g_logits = ppo_loss(out, actions[idx], logps[idx], mb_adv, ppo.clip_ratio, ppo.entropy_coef)
                grads, _ = mlp_backward(actor, cache, g_logits)
                adam_step(actor, grads, opt_a, lr, MAX_GRAD_NORM)
                v, cache = mlp_forward(critic, states[idx])
                g_v = 2.0 * ppo.value_coef * (v[:, 0] - returns[idx]) / idx.size
                grads, _ = mlp_backward(critic, cache, g_v[:, None])
                adam_step(critic, grads, opt_c, lr, MAX_GRAD_NORM)
    return TrainResult(policy, log.result_rewards, log.result_returns, steps)


class ReplayBuffer:
    """Fixed-capacity ring buffer; once full the oldest transition is overwritten."""

    def __init__(self, capacity: int, dim: int):
        if capacity < 1:
            raise ConfigInvalid("replay capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, dim))
        self.next_states = np.zeros((capacity, dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self.pos = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, s, a, r, s2, done) -> None:
        i = self.pos
        self.states[i], self.actions[i], self.rewards[i] = s, a, r
        self.next_states[i], self.dones[i] = s2, float(done)
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng, batch: int):
        idx = rng.integers(0, self.size, size=batch)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.dones[idx]


@dataclass(frozen=True)
class DqnConfig:
    capacity: int = 10000
    batch: int = 64
    warmup: int = 256
    target_sync: int = 250
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5


def sync_target(online: Mlp, target: Mlp) -> None:
    target.load_from(online)


def _dqn_train(env, cfg, rng, total, dqn: DqnConfig, log) -> PolicyModel:
    policy = PolicyModel.create("DQN", cfg, rng.split("init"))
    q = policy.nets["q"]
    target = q.copy()
    opt = AdamState.for_model(q)
    buf = ReplayBuffer(dqn.capacity, env.state_dim)
    act_rng, mb_rng = rng.split("act"), rng.split("replay")
    decay = max(1, int(dqn.eps_fraction * total))
    state = env.reset()
    for step in range(total):
        eps = dqn.eps_start + (dqn.eps_end - dqn.eps_start) * min(1.0, step / decay)
        if act_rng.random() < eps:
            a = int(act_rng.integers(0, 2))
        else:
            a = int(np.argmax(q(state)))
        nxt, r, done = env.step(a)
        buf.add(state, a, r, nxt, done)
        log.record(r, done)
        state = env.reset() if done else nxt
        if len(buf) >= min(dqn.warmup, dqn.capacity):
            s, acts, rs, s2, ds = buf.sample(mb_rng, dqn.batch)
            y = rs + cfg.gamma * (1.0 - ds) * np.max(target(s2), axis=1)
            out, cache = mlp_forward(q, s)
            rows = np.arange(len(acts))
            g = np.zeros_like(out)
            g[rows, acts] = 2.0 * (out[rows, acts] - y) / len(acts)
            grads, _ = mlp_backward(q, cache, g)
            adam_step(q, grads, opt, cfg.learning_rate_agent, 10.0)
        if (step + 1) % dqn.target_sync == 0:
            sync_target(q, target)
    return policy


def _a2c_train(env, cfg, rng, total, n_steps, value_coef, entropy_coef, log) -> PolicyModel:
    policy = PolicyModel.create("A2C", cfg, rng.split("init"))
    net = policy.nets["shared"]
    opt = AdamState.for_model(net)
    act_rng = rng.split("act")
    state = env.reset()
    steps = 0
    while steps < total:
        n = min(n_steps, total - steps)
        states = np.empty((n, env.state_dim))
        actions = np.empty(n, dtype=np.int64)
        rewards = np.empty(n)
        dones = np.empty(n)
        for k in range(n):
            out = net(state)
            a = int(act_rng.random() < softmax_logits(out[:2])[1])
            states[k], actions[k] = state, a
            state, r, done = env.step(a)
            rewards[k], dones[k] = r, float(done)
            log.record(r, done)
            if done:
                state = env.reset()
        steps += n
        out, cache = mlp_forward(net, states)
        values = out[:, 2]
        last_value = 0.0 if dones[-1] else float(net(state)[2])
        # GAE with lambda = 1 is exactly the bootstrapped n-step advantage
        adv = gae_kernel(rewards, values.copy(), dones, last_value, cfg.gamma, 1.0)
        returns = adv + values
        logp_all = log_softmax(out[:, :2])
        probs = np.exp(logp_all)
        rows = np.arange(n)
        onehot = np.zeros((n, 2))
        onehot[rows, actions] = 1.0
        entropy = -np.sum(probs * logp_all, axis=1)
        g = np.zeros_like(out)
        g[:, :2] = -adv[:, None] * (onehot - probs) / n
        g[:, :2] += entropy_coef * probs * (logp_all + entropy[:, None]) / n
        g[:, 2] = 2.0 * value_coef * (values - returns) / n
        grads, _ = mlp_backward(net, cache, g)
        adam_step(net, grads, opt, cfg.learning_rate_agent, MAX_GRAD_NORM)
    return policy


def alt_agent_train(series, cfg: RunConfig, phi=None, rng=None, env=None, total_steps: int | None = None,
                    dqn: DqnConfig | None = None, n_steps: int = 16) -> TrainResult:
    """Train the DQN or A2C variant selected by ``cfg.agent``."""
    kind = cfg.agent.upper()
    if kind not in ("DQN", "A2C"):
        raise ConfigInvalid(f"alt_agent_train needs agent DQN or A2C, got {cfg.agent!r}")
    rng, env, total = _resolve(series, cfg, phi, rng, env, total_steps)
    log = _EpisodeLog()
    if kind == "DQN":
        policy = _dqn_train(env, cfg, rng, total, dqn or DqnConfig(), log)
    else:
        ppo = PpoConfig()
        policy = _a2c_train(env, cfg, rng, total, n_steps, ppo.value_coef, ppo.entropy_coef, log)
    return TrainResult(policy, log.result_rewards, log.result_returns, total)


def train_agent(series, cfg: RunConfig, phi=None, rng=None, ppo: PpoConfig | None = None, env=None,
                total_steps: int | None = None) -> TrainResult:
    """Dispatch on ``cfg.agent``."""
    if cfg.agent.upper() == "PPO":
        return ppo_train(series, cfg, ppo, phi, rng, env, total_steps)
    return alt_agent_train(series, cfg, phi, rng, env, total_steps)

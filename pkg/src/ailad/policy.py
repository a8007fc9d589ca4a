"""Latent-conditioned actor-critic trained from end-of-episode rewards.

The actor sees ``concat(observation, z)`` and outputs a masked softmax over the
action catalog; the critic sees the same input. A fresh ``z`` is drawn for every
episode and held fixed for its whole length. Updates are off-policy: stored
episodes keep their behavior log-probabilities and are corrected with truncated
importance weights, while their terminal reward is rewritten whenever the
reward model changes.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from . import env as E
from . import nn
from .density import DensityModel, MetricBuffer, log_density
from .discriminator import Discriminator, reward as d_reward
from .summarize import M, summarize


class UnlabeledTrajectory(ValueError):
    pass


@dataclass
class Trajectory:
    obs: np.ndarray          # (T, obs_dim)
    masks: np.ndarray        # (T, N_ACTIONS) bool
    actions: np.ndarray      # (T,)
    logp: np.ndarray         # (T,) behavior log-probabilities
    z: np.ndarray            # (M,)
    log: E.EventLog
    metrics: np.ndarray      # raw metric vector
    episode_id: int = 0
    level_id: int = 0
    metrics_n: Optional[np.ndarray] = None
    reward: Optional[float] = None

    def __len__(self):
        return len(self.actions)


@dataclass
class PolicyParams:
    actor_spec: nn.MlpSpec
    actor: np.ndarray
    critic_spec: nn.MlpSpec
    critic: np.ndarray
    actor_opt: nn.AdamState
    critic_opt: nn.AdamState
    latent_dim: int = M


def make_policy(obs_dim: int, rng: np.random.Generator, hidden=(64, 64), actor_lr: float = 3e-4,
                critic_lr: float = 1e-3, latent_dim: int = M) -> PolicyParams:
    n_in = obs_dim + latent_dim
    a_spec = nn.MlpSpec(widths=(n_in, *hidden, E.N_ACTIONS), head="masked_softmax", out_scale=0.01)
    c_spec = nn.MlpSpec(widths=(n_in, *hidden, 1), head="linear", out_scale=0.01)
    return PolicyParams(
        actor_spec=a_spec,
        actor=nn.init_params(a_spec, rng),
        critic_spec=c_spec,
        critic=nn.init_params(c_spec, rng),
        actor_opt=nn.AdamState.fresh(a_spec.n_params, actor_lr),
        critic_opt=nn.AdamState.fresh(c_spec.n_params, critic_lr),
        latent_dim=latent_dim,
    )


def sample_latent(rng: np.random.Generator, dim: int = M, enabled: bool = True) -> np.ndarray:
    return rng.standard_normal(dim) if enabled else np.zeros(dim)


def act(pp: PolicyParams, obs, z, mask, rng: np.random.Generator):
    """Sample an action from pi(.|obs, z). Returns ``(action, log_prob)``."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise nn.EmptyMask("no legal action")
    flat = obs.flat() if isinstance(obs, E.Observation) else np.asarray(obs, dtype=float)
    x = np.concatenate([flat, z])
    logits = nn.forward_logits(pp.actor_spec, pp.actor, x)
    logp = nn.masked_log_softmax(logits, mask)
    legal = np.flatnonzero(mask)
    if len(legal) == 1:
        return int(legal[0]), 0.0
    p = np.exp(logp[legal])
    a = int(legal[min(int(np.searchsorted(np.cumsum(p), rng.random() * p.sum())), len(legal) - 1)])
    return a, float(logp[a])


def collect_episode(level: E.LevelSpec, pp: PolicyParams, rng: np.random.Generator,
                    z: Optional[np.ndarray] = None, latent: bool = True,
                    episode_id: int = 0) -> Trajectory:
    """Play one full episode with a per-episode latent."""
    if z is None:
        z = sample_latent(rng, pp.latent_dim, latent)
    state, obs, mask = E.reset(level)
    obs_rows, masks, actions, logps = [], [], [], []
    while not state.done:
        flat = obs.flat()
        a, lp = act(pp, flat, z, mask, rng)
        obs_rows.append(flat)
        masks.append(mask)
        actions.append(a)
        logps.append(lp)
        state, obs, mask, _, _ = E.step(state, a)
    return Trajectory(
        obs=np.array(obs_rows),
        masks=np.array(masks, dtype=bool),
        actions=np.array(actions, dtype=int),
        logp=np.array(logps),
        z=np.asarray(z, dtype=float).copy(),
        log=state.log,
        metrics=summarize(state.log),
        episode_id=episode_id,
        level_id=level.index,
    )


class ReplayBuffer:
    """FIFO buffer of whole episodes; their normalized metrics also go to ``metric_buffer``."""

    def __init__(self, capacity: int = 512, metric_buffer: Optional[MetricBuffer] = None):
        self.capacity = capacity
        self.items: deque = deque(maxlen=capacity)
        self.metric_buffer = metric_buffer if metric_buffer is not None else MetricBuffer()

    def __len__(self):
        return len(self.items)

    def add(self, traj: Trajectory, metrics_n: np.ndarray) -> None:
        traj.metrics_n = np.asarray(metrics_n, dtype=float)
        self.items.append(traj)
        self.metric_buffer.add(traj.metrics_n)

    def sample(self, n: int, rng: np.random.Generator, n_recent: int = 1) -> list:
        """The ``n_recent`` newest episodes plus uniform picks from the rest."""
        items = list(self.items)
        recent = items[-n_recent:] if n_recent else []
        rest = items[:len(items) - len(recent)]
        k = min(max(n - len(recent), 0), len(rest))
        picks = [rest[i] for i in rng.choice(len(rest), size=k, replace=False)] if k else []
        return recent + picks


LogQ = Union[DensityModel, float]


def fill_in(density: LogQ, x: np.ndarray) -> np.ndarray:
    if isinstance(density, DensityModel):
        return np.asarray(log_density(density, x), dtype=float).reshape(len(x))
    return np.full(len(x), float(density))


def relabel_rewards(buffer: ReplayBuffer, d: Discriminator, density: LogQ) -> int:
    """Recompute every stored episode's terminal reward with the current reward model."""
    if not len(buffer):
        return 0
    x = np.array([t.metrics_n for t in buffer.items])
    r = d_reward(d, x, fill_in(density, x))
    for t, v in zip(buffer.items, r):
        t.reward = float(v)
    return len(buffer.items)


@dataclass(frozen=True)
class UpdateConfig:
    gamma: float = 0.99
    entropy_coef: float = 0.01
    c_clip: float = 10.0
    max_grad_norm: Optional[float] = 10.0


def _batch_arrays(pp: PolicyParams, batch: list, gamma: float):
    xs, ms, acts, beh, ret = [], [], [], [], []
    for t in batch:
        if t.reward is None:
            raise UnlabeledTrajectory(f"episode {t.episode_id} has no reward")
        T = len(t)
        xs.append(np.hstack([t.obs, np.broadcast_to(t.z, (T, len(t.z)))]))
        ms.append(t.masks)
        acts.append(t.actions)
        beh.append(t.logp)
        ret.append(t.reward * gamma ** np.arange(T - 1, -1, -1, dtype=float))
    return (np.vstack(xs), np.vstack(ms), np.concatenate(acts), np.concatenate(beh),
            np.concatenate(ret))


def actor_gradient(pp: PolicyParams, x, masks, actions, weights, advantages, entropy_coef):
    """Gradient of mean(-w * A * log pi(a)) - beta * mean(H) w.r.t. the actor params.

    Returns ``(GradRecord, log pi(a), entropy)``.
    """
    n = len(actions)
    rows = np.arange(n)
    out = {}

    def loss_fn(logits):
        logp = nn.masked_log_softmax(logits, masks)
        p = np.exp(logp)
        safe_logp = np.where(masks, logp, 0.0)
        ent = -(p * safe_logp).sum(axis=1)
        g = (-weights * advantages / n)[:, None] * (-p)
        g[rows, actions] += -weights * advantages / n
        g += (entropy_coef / n) * p * (safe_logp + ent[:, None])
        out["logp_a"], out["ent"] = logp[rows, actions], ent
        loss = np.mean(-weights * advantages * logp[rows, actions]) - entropy_coef * ent.mean()
        return loss, g

    rec = nn.value_and_grad(pp.actor_spec, pp.actor, x, loss_fn, masks)
    return rec, out["logp_a"], out["ent"]


def update_policy(pp: PolicyParams, batch: list, config: UpdateConfig = UpdateConfig()):
    """One actor step and one critic step on a batch of labeled episodes."""
    x, masks, actions, beh, G = _batch_arrays(pp, batch, config.gamma)
    v = nn.forward_logits(pp.critic_spec, pp.critic, x)[:, 0]
    adv = G - v
    logits = nn.forward_logits(pp.actor_spec, pp.actor, x)
    cur = nn.masked_log_softmax(logits, masks)[np.arange(len(actions)), actions]
    w = np.minimum(np.exp(cur - beh), config.c_clip)
    a_rec, _, ent = actor_gradient(pp, x, masks, actions, w, adv, config.entropy_coef)
    n = len(actions)
    c_loss = float(np.mean(adv ** 2))
    c_rec = nn.value_and_grad(pp.critic_spec, pp.critic, x, lambda v_: (c_loss, (-2.0 * adv / n)[:, None]))
    actor, a_opt = nn.optimizer_step(pp.actor, a_rec, pp.actor_opt, config.max_grad_norm)
    critic, c_opt = nn.optimizer_step(pp.critic, c_rec, pp.critic_opt, config.max_grad_norm)
    new = replace(pp, actor=actor, critic=critic, actor_opt=a_opt, critic_opt=c_opt)
    diag = {
        "entropy": float(ent.mean()),
        "advantage": float(adv.mean()),
        "importance_weight": float(w.mean()),
        "actor_loss": a_rec.loss,
        "critic_loss": c_loss,
        "steps": int(n),
    }
    return new, diag

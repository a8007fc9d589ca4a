"""Reward learner over normalized metric vectors.

With the density correction the classifier output is

    D(m) = exp(f(m)) / (exp(f(m)) + q(m)) = logistic(f(m) - log q(m))

where ``q`` is the agent's metric density (or a constant stand-in), and the
reward ``log D - log(1 - D)`` collapses to ``f(m) - log q(m)``. The
``plain_sigmoid`` ablation drops ``q`` and uses ``D = logistic(f(m))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.stats import norm, rankdata

from . import nn
from .summarize import M, NormalizationStats, denormalize

D_CLAMP = 1e-7
REWARD_CLAMP = 20.0
NEGATIVE_STD = 3.0


class EmptySet(ValueError):
    pass


@dataclass
class Discriminator:
    f_spec: nn.MlpSpec
    f_params: np.ndarray
    opt: nn.AdamState
    fill_in_mode: str = "estimated"  # "constant" or "estimated"
    fill_in_c: float = 0.3
    plain_sigmoid: bool = False

    def copy(self) -> "Discriminator":
        return replace(self, f_params=self.f_params.copy(),
                       opt=replace(self.opt, m=self.opt.m.copy(), v=self.opt.v.copy()))

    def constant_log_q(self) -> float:
        return float(np.log(self.fill_in_c))


def make_discriminator(rng: np.random.Generator, hidden=(64, 64), lr: float = 1e-3,
                       plain_sigmoid: bool = False, c: float = 0.3) -> Discriminator:
    if c <= 0:
        raise ValueError("fill-in constant must be positive")
    spec = nn.MlpSpec(widths=(M, *hidden, 1), head="linear")
    params = nn.init_params(spec, rng)
    return Discriminator(f_spec=spec, f_params=params, opt=nn.AdamState.fresh(spec.n_params, lr),
                         fill_in_c=c, plain_sigmoid=plain_sigmoid)


def f_value(d: Discriminator, m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    out = nn.forward(d.f_spec, d.f_params, m)
    return out[..., 0]


def _logit(d: Discriminator, f, log_q):
    if d.plain_sigmoid:
        return np.asarray(f, dtype=float)
    return np.asarray(f, dtype=float) - log_q


def d_output(d: Discriminator, m, log_q) -> np.ndarray:
    """Probability that ``m`` came from the experts, clamped to [1e-7, 1 - 1e-7]."""
    s = _logit(d, f_value(d, m), log_q)
    return np.clip(nn.sigmoid(s), D_CLAMP, 1.0 - D_CLAMP)


def reward(d: Discriminator, m, log_q, clamp: bool = True) -> np.ndarray:
    """``log D - log(1 - D)``, evaluated in logit space and clamped to +/-20."""
    r = _logit(d, f_value(d, m), log_q)
    return np.clip(r, -REWARD_CLAMP, REWARD_CLAMP) if clamp else r


def _bce_and_grad(d: Discriminator, x, log_q, y):
    """Class-balanced mean binary cross-entropy and its parameter gradient."""
    n_pos = max((y > 0.5).sum(), 1)
    n_neg = max((y <= 0.5).sum(), 1)
    w = np.where(y > 0.5, 0.5 / n_pos, 0.5 / n_neg)

    def loss_fn(f):
        s = _logit(d, f[:, 0], log_q)
        loss_i = np.where(y > 0.5, np.logaddexp(0.0, -s), np.logaddexp(0.0, s))
        # ds/df = 1 in both modes
        return float((w * loss_i).sum()), (w * (nn.sigmoid(s) - y))[:, None]

    rec = nn.value_and_grad(d.f_spec, d.f_params, x, loss_fn)
    return rec.loss, rec


def _stack(expert, negatives, log_q_expert, log_q_neg):
    xe = np.asarray(expert, dtype=float).reshape(-1, M)
    xn = np.asarray(negatives, dtype=float).reshape(-1, M)
    if len(xe) == 0 or len(xn) == 0:
        raise EmptySet("both expert and negative sets must be nonempty")
    lq = np.concatenate([np.broadcast_to(np.asarray(log_q_expert, dtype=float), (len(xe),)),
                         np.broadcast_to(np.asarray(log_q_neg, dtype=float), (len(xn),))])
    x = np.concatenate([xe, xn])
    y = np.concatenate([np.ones(len(xe)), np.zeros(len(xn))])
    return x, lq, y


def pretrain(d: Discriminator, expert, negatives, c: float = 0.3, steps: int = 2000,
             log_q_expert=None, log_q_negatives=None, rng: Optional[np.random.Generator] = None,
             batch_size: int = 256, log_every: int = 0):
    """BCE training with a filled-in agent density.

    The fill-in defaults to the constant ``c``; per-point log densities can be
    supplied instead (the "real fill-in" variant). Each step draws a balanced
    minibatch of ``batch_size`` points (full batch when ``rng`` is None).
    Returns ``(discriminator, history)``; history holds ``{"step", "loss",
    "auc"}`` records on the full set every ``log_every`` steps (none when 0).
    """
    if c <= 0:
        raise ValueError("fill-in constant must be positive")
    lqe = np.log(c) if log_q_expert is None else log_q_expert
    lqn = np.log(c) if log_q_negatives is None else log_q_negatives
    x, lq, y = _stack(expert, negatives, lqe, lqn)
    pos = np.flatnonzero(y > 0.5)
    neg = np.flatnonzero(y <= 0.5)
    half = batch_size // 2
    d = d.copy()
    d.fill_in_c = c
    history = []
    for step in range(steps):
        if log_every and step % log_every == 0:
            s = _logit(d, f_value(d, x), lq)
            history.append({"step": step, "loss": _bce_and_grad(d, x, lq, y)[0],
                            "auc": auc(s[y > 0.5], s[y <= 0.5])})
        if rng is None:
            idx = slice(None)
        else:
            idx = np.concatenate([rng.choice(pos, size=min(half, len(pos)), replace=False),
                                  rng.choice(neg, size=min(half, len(neg)), replace=False)])
        _, rec = _bce_and_grad(d, x[idx], lq[idx], y[idx])
        d.f_params, d.opt = nn.optimizer_step(d.f_params, rec, d.opt)
    return d, history


def update(d: Discriminator, expert_batch, agent_batch, expert_log_q, agent_log_q):
    """Exactly one optimizer step separating expert from agent metrics.

    Returns ``(new_discriminator, post_step_loss)``.
    """
    x, lq, y = _stack(expert_batch, agent_batch, expert_log_q, agent_log_q)
    d = d.copy()
    _, rec = _bce_and_grad(d, x, lq, y)
    d.f_params, d.opt = nn.optimizer_step(d.f_params, rec, d.opt)
    loss, _ = _bce_and_grad(d, x, lq, y)
    return d, loss


def synthesize_negatives(stats: NormalizationStats, n: int, rng: np.random.Generator,
                         std: float = NEGATIVE_STD) -> np.ndarray:
    """Broad normal samples in normalized space, truncated to nonnegative raw counts."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lower = _lower_bounds(stats)
    out = rng.normal(0.0, std, size=(n, M))
    bad = out < lower
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = out < lower
    return out


def _lower_bounds(stats: NormalizationStats) -> np.ndarray:
    return (0.0 - stats.mean) / stats.std


def negative_log_density(stats: NormalizationStats, m, std: float = NEGATIVE_STD) -> np.ndarray:
    """Exact log density of :func:`synthesize_negatives`' distribution."""
    m = np.asarray(m, dtype=float)
    lower = _lower_bounds(stats)
    per_dim = norm.logpdf(m, scale=std) - norm.logsf(lower, scale=std)
    per_dim = np.where(m >= lower, per_dim, -np.inf)
    return per_dim.sum(axis=-1)


def auc(pos, neg) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic."""
    pos = np.asarray(pos, dtype=float)
    neg = np.asarray(neg, dtype=float)
    r = rankdata(np.concatenate([pos, neg]))
    return float((r[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2) / (len(pos) * len(neg)))

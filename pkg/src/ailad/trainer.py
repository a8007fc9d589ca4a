"""Adversarial training loop over aggregated episode metrics, plus the ablation suite.

Run directory layout::

    config.snapshot      every RunConfig field, written before training starts
    expert.csv           learner-facing expert metrics (level, split, 7 metrics)
    expert_styles.csv    hidden style label per expert row
    expert_extended.csv  extended metrics of the expert episodes (reporting only)
    stats.json           frozen normalization statistics
    pretrain_log.jsonl   discriminator pre-training curve
    train_log.jsonl      one record per outer iteration
    checkpoints/         actor, critic and discriminator blobs + manifests
    eval/                jsd.csv, averages.csv, summary.json
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import density as dens
from . import discriminator as disc
from . import env as E
from . import evaluation as ev
from . import nn
from .config import ConfigInvalid, RunConfig
from .experts import gen_experts, levels_for
from .policy import (PolicyParams, ReplayBuffer, Trajectory, UpdateConfig, collect_episode, fill_in,
                     make_policy, relabel_rewards, sample_latent, update_policy)
from .summarize import EXTENDED_NAMES, METRIC_NAMES, ExpertDataset, NormalizationStats, fit_normalizer, normalize

log = logging.getLogger(__name__)

STREAMS = ("policy_init", "disc_init", "negatives", "collect", "coin", "batch", "levels", "eval")

ABLATIONS = {
    "No z": dict(no_latent=True),
    "Real Fill In": dict(real_fill_in=True),
    "No Pre-Train": dict(no_pretrain=True),
    "D_E=0": dict(d_epochs=0.0),
    "D_E=1": dict(d_epochs=1.0),
    "No GAN-GCL Corr": dict(plain_sigmoid=True),
    "AILAD": dict(),
}


class RunFailed(RuntimeError):
    def __init__(self, step: int, cause: BaseException):
        super().__init__(f"run aborted at iteration {step}: {cause!r}")
        self.step = step
        self.cause = cause


@dataclass
class RunArtifacts:
    run_dir: Optional[Path]
    config: RunConfig
    report: Optional[ev.EvalReport]
    env_steps: int
    iterations: int
    d_updates: int
    expert_hash: str
    summary: dict = field(default_factory=dict)
    policy: Optional[PolicyParams] = field(default=None, repr=False)
    discriminator: Optional[disc.Discriminator] = field(default=None, repr=False)
    history: list = field(default_factory=list, repr=False)


def rng_streams(seed: int) -> dict:
    kids = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(k) for name, k in zip(STREAMS, kids)}


def update_config(cfg: RunConfig) -> UpdateConfig:
    return UpdateConfig(gamma=cfg.gamma, entropy_coef=cfg.entropy_coef, c_clip=cfg.c_clip,
                        max_grad_norm=cfg.max_grad_norm)


def initial_policy(cfg: RunConfig, levels: dict) -> PolicyParams:
    """The untrained policy a run with this seed starts from."""
    obs_dim = E.obs_size(levels["train"][0])
    rng = rng_streams(cfg.seed)["policy_init"]
    return make_policy(obs_dim, rng, hidden=(cfg.hidden, cfg.hidden), actor_lr=cfg.actor_lr,
                       critic_lr=cfg.critic_lr, latent_dim=cfg.latent_dim)


# --------------------------------------------------------------------------
# Expert data and run directories
# --------------------------------------------------------------------------


def prepare_experts(cfg: RunConfig, run_dir: Optional[Path] = None, expert: Optional[ExpertDataset] = None):
    """Load ``expert.csv`` from the run directory, or generate and write it."""
    ext = None
    if expert is None and run_dir is not None and (run_dir / "expert.csv").exists():
        expert = ExpertDataset.load(run_dir / "expert.csv")
    if expert is None:
        expert, ext = gen_experts(cfg)
    if run_dir is not None:
        write_expert_files(run_dir, expert, ext)
    return expert


def write_expert_files(run_dir: Path, expert: ExpertDataset, ext: Optional[list] = None) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "expert.csv").write_text(expert.to_csv())
    if expert.styles is not None:
        (run_dir / "expert_styles.csv").write_text(expert.styles_csv())
    if ext is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EXTENDED_NAMES)
        for e in ext:
            w.writerow([repr(float(e[n])) for n in EXTENDED_NAMES])
        (run_dir / "expert_extended.csv").write_text(buf.getvalue())


def expert_averages(expert: ExpertDataset, ext: list) -> dict:
    """The expert 'Players' averages column from the expert rows and their extended metrics."""
    out = {}
    for split in ev.SPLITS:
        keep = expert.splits == split
        rows = [e for e, k in zip(ext, keep) if k]
        out[split] = ev.average_report(expert.metrics[keep], rows)
    return out


def load_expert_extended(run_dir: Path) -> Optional[list]:
    p = run_dir / "expert_extended.csv"
    if not p.exists():
        return None
    rows = list(csv.DictReader(io.StringIO(p.read_text())))
    return [{k: float(v) for k, v in r.items()} for r in rows]


class JsonlLog:
    def __init__(self, path: Optional[Path]):
        self._fh = open(path, "w") if path is not None else None

    def write(self, rec: dict) -> None:
        if self._fh is not None:
            self._fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


# --------------------------------------------------------------------------
# Shared loop
# --------------------------------------------------------------------------

# label(buffer, newest_traj, iteration, record) assigns rewards before the policy step
LabelHook = Callable[[ReplayBuffer, Trajectory, int, dict], None]


def actor_lr_at(cfg: RunConfig, steps: int) -> float:
    """Linear interpolation from ``actor_lr`` to ``actor_lr * lr_anneal`` over the step budget."""
    frac = min(steps / cfg.step_budget, 1.0) if cfg.step_budget > 0 else 1.0
    return cfg.actor_lr * (1.0 - frac * (1.0 - cfg.lr_anneal))


def training_loop(cfg: RunConfig, pp: PolicyParams, levels: list, stats: NormalizationStats,
                  rngs: dict, label: LabelHook, train_log: JsonlLog):
    """Collect one episode per iteration until K iterations or the step budget.

    Returns ``(policy, env_steps, iterations, history)``.
    """
    buffer = ReplayBuffer(cfg.replay_capacity, dens.MetricBuffer(cfg.metric_window, len(METRIC_NAMES)))
    ucfg = update_config(cfg)
    steps = 0
    history = []
    k = 0
    for k in range(1, cfg.K + 1):
        if steps >= cfg.step_budget:
            k -= 1
            break
        try:
            level = levels[int(rngs["levels"].integers(len(levels)))]
            z = sample_latent(rngs["collect"], cfg.latent_dim, enabled=not cfg.no_latent)
            traj = collect_episode(level, pp, rngs["collect"], z=z, episode_id=k)
            steps += len(traj)
            buffer.add(traj, normalize(traj.metrics, stats))
            rec = {"iteration": k, "env_steps": steps, "level": level.index,
                   "z": [float(v) for v in z], "metrics": [float(v) for v in traj.metrics]}
            label(buffer, traj, k, rec)
            batch = buffer.sample(cfg.batch_episodes, rngs["batch"], n_recent=cfg.recent_episodes)
            pp.actor_opt.lr = actor_lr_at(cfg, steps)
            pp, diag = update_policy(pp, batch, ucfg)
        except Exception as exc:
            raise RunFailed(k, exc) from exc
        rec["reward"] = traj.reward
        rec.update({f"pi_{key}": val for key, val in diag.items()})
        train_log.write(rec)
        history.append(rec)
    return pp, steps, k, history


# --------------------------------------------------------------------------
# AILAD
# --------------------------------------------------------------------------


def pretrain_discriminator(cfg: RunConfig, d: disc.Discriminator, expert_n: np.ndarray,
                           stats: NormalizationStats, rng: np.random.Generator):
    negatives = disc.synthesize_negatives(stats, cfg.pretrain_negatives, rng)
    kw = {}
    if cfg.real_fill_in:
        kw = dict(log_q_expert=disc.negative_log_density(stats, expert_n),
                  log_q_negatives=disc.negative_log_density(stats, negatives))
    return disc.pretrain(d, expert_n, negatives, c=cfg.pretrain_c, steps=cfg.pretrain_steps,
                         rng=rng, log_every=100, **kw)


def run(cfg: RunConfig, run_dir=None, expert: Optional[ExpertDataset] = None,
        evaluate: bool = True, with_baseline: bool = False) -> RunArtifacts:
    """Full pipeline for one configuration. ``run_dir=None`` keeps everything in memory."""
    if cfg.algorithm == "carmi":
        from .carmi import train_carmi
        return train_carmi(cfg, run_dir=run_dir, expert=expert, evaluate=evaluate,
                           with_baseline=with_baseline)
    cfg.validate()
    run_dir = Path(run_dir) if run_dir is not None else None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        cfg.save(run_dir / "config.snapshot")
    expert = prepare_experts(cfg, run_dir, expert)
    levels = levels_for(cfg)
    train_expert = expert.subset("train").metrics
    stats = fit_normalizer(train_expert)
    expert_n = normalize(train_expert, stats)
    rngs = rng_streams(cfg.seed)
    # consume the policy_init stream exactly like initial_policy does
    pp = make_policy(E.obs_size(levels["train"][0]), rngs["policy_init"], hidden=(cfg.hidden, cfg.hidden),
                     actor_lr=cfg.actor_lr, critic_lr=cfg.critic_lr, latent_dim=cfg.latent_dim)
    d = disc.make_discriminator(rngs["disc_init"], hidden=(cfg.disc_hidden, cfg.disc_hidden),
                                lr=cfg.disc_lr, plain_sigmoid=cfg.plain_sigmoid, c=cfg.pretrain_c)
    d.fill_in_mode = "constant" if cfg.fill_in_mode == "constant" else "estimated"
    pre_hist = []
    if cfg.do_pretrain:
        d, pre_hist = pretrain_discriminator(cfg, d, expert_n, stats, rngs["negatives"])
    if run_dir is not None:
        stats.save(run_dir / "stats.json")
        with open(run_dir / "pretrain_log.jsonl", "w") as fh:
            for r in pre_hist:
                fh.write(json.dumps(r, sort_keys=True) + "\n")

    state = {"d": d, "updates": 0}
    const_log_q = float(np.log(cfg.pretrain_c))

    def label(buffer: ReplayBuffer, traj: Trajectory, k: int, rec: dict) -> None:
        mb = buffer.metric_buffer
        if cfg.fill_in_mode != "constant" and len(mb) >= cfg.density_min:
            q = dens.fit(mb, kind="kde" if cfg.fill_in_mode == "kde" else "gaussian",
                         n_min=cfg.density_min)
        else:
            q = const_log_q
        coin = float(rngs["coin"].random())
        rec["d_update"] = coin < cfg.d_epochs
        if coin < cfg.d_epochs:
            held = mb.contents()
            if cfg.d_agent_sample == "window" and len(held) > cfg.d_batch:
                recent = held[np.sort(rngs["batch"].choice(len(held), size=cfg.d_batch, replace=False))]
            else:
                recent = held[-cfg.d_batch:]
            idx = rngs["batch"].choice(len(expert_n), size=min(cfg.d_batch, len(expert_n)), replace=False)
            eb = expert_n[idx]
            state["d"], loss = disc.update(state["d"], eb, recent, fill_in(q, eb), fill_in(q, recent))
            state["updates"] += 1
            rec["d_loss"] = loss
        relabel_rewards(buffer, state["d"], q)

    train_log = JsonlLog(run_dir / "train_log.jsonl" if run_dir is not None else None)
    try:
        pp, steps, iters, history = training_loop(cfg, pp, levels["train"], stats, rngs, label, train_log)
    finally:
        train_log.close()
    d = state["d"]

    if run_dir is not None:
        ck = run_dir / "checkpoints"
        ck.mkdir(exist_ok=True)
        nn.save_checkpoint(ck / "actor.ckpt", pp.actor_spec, pp.actor)
        nn.save_checkpoint(ck / "critic.ckpt", pp.critic_spec, pp.critic)
        nn.save_checkpoint(ck / "discriminator.ckpt", d.f_spec, d.f_params)

    art = RunArtifacts(run_dir=run_dir, config=cfg, report=None, env_steps=steps, iterations=iters,
                       d_updates=state["updates"], expert_hash=expert.content_hash(), policy=pp,
                       discriminator=d, history=history)
    if evaluate:
        finish_evaluation(art, expert, stats, levels, with_baseline)
    return art


def evaluate_policy(cfg: RunConfig, pp: PolicyParams, expert: ExpertDataset, stats: NormalizationStats,
                    levels: dict, latent: Optional[bool] = None) -> ev.EvalReport:
    latent = (not cfg.no_latent) if latent is None else latent
    runner = ev.policy_runner(pp, latent=latent)
    return ev.evaluate_agent(runner, levels, cfg.eval_episodes, expert, stats,
                             ev.JsdConfig(cfg.jsd_bins, cfg.jsd_alpha), seed=cfg.seed + 10_000)


def finish_evaluation(art: RunArtifacts, expert: ExpertDataset, stats: NormalizationStats,
                      levels: dict, with_baseline: bool) -> None:
    cfg = art.config
    art.report = evaluate_policy(cfg, art.policy, expert, stats, levels)
    summary = {
        "algorithm": cfg.algorithm,
        "seed": cfg.seed,
        "env_steps": art.env_steps,
        "iterations": art.iterations,
        "d_updates": art.d_updates,
        "expert_hash": art.expert_hash,
        "config": cfg.to_text(),
        "report": art.report.to_dict(),
    }
    if with_baseline:
        base = evaluate_policy(cfg, initial_policy(cfg, levels), expert, stats, levels)
        summary["untrained"] = base.to_dict()
    art.summary = summary
    if art.run_dir is not None:
        out = art.run_dir / "eval"
        out.mkdir(exist_ok=True)
        (out / "jsd.csv").write_text(ev.jsd_table_csv({cfg.algorithm.upper(): art.report}))
        (out / "averages.csv").write_text(ev.absolute_table_csv({cfg.algorithm.upper(): art.report.averages}))
        (out / "summary.json").write_text(ev.summary_json(summary))


def load_policy(run_dir: Path, cfg: RunConfig) -> PolicyParams:
    """Rebuild a trained policy from ``checkpoints/`` (optimizer state is not stored)."""
    ck = Path(run_dir) / "checkpoints"
    a_spec, actor = nn.load_checkpoint(ck / "actor.ckpt")
    c_spec, critic = nn.load_checkpoint(ck / "critic.ckpt")
    return PolicyParams(a_spec, actor, c_spec, critic, nn.AdamState.fresh(a_spec.n_params, cfg.actor_lr),
                        nn.AdamState.fresh(c_spec.n_params, cfg.critic_lr), latent_dim=cfg.latent_dim)


def reevaluate(run_dir, with_baseline: bool = False) -> RunArtifacts:
    """Evaluate a finished run directory again from its snapshot, stats and checkpoints."""
    run_dir = Path(run_dir)
    cfg = RunConfig.load(run_dir / "config.snapshot")
    expert = ExpertDataset.load(run_dir / "expert.csv")
    stats = NormalizationStats.load(run_dir / "stats.json")
    prev = json.loads((run_dir / "eval" / "summary.json").read_text()) if (run_dir / "eval" / "summary.json").exists() else {}
    art = RunArtifacts(run_dir=run_dir, config=cfg, report=None, env_steps=prev.get("env_steps", 0),
                       iterations=prev.get("iterations", 0), d_updates=prev.get("d_updates", 0),
                       expert_hash=expert.content_hash(), policy=load_policy(run_dir, cfg))
    finish_evaluation(art, expert, stats, levels_for(cfg), with_baseline)
    return art


# --------------------------------------------------------------------------
# Ablations
# --------------------------------------------------------------------------


def ablation_configs(base: RunConfig) -> dict:
    base = base.replace(algorithm="ailad")
    return {name: base.replace(**kw) for name, kw in ABLATIONS.items()}


def run_ablation_suite(base: RunConfig, root=None, expert: Optional[ExpertDataset] = None,
                       columns=None) -> dict:
    """Run every ablation column on the same expert data and seed.

    Returns ``{column: RunArtifacts or RunFailed}``; a failing column does not
    stop the others. Writes ``ablation_jsd.csv`` and ``ablation_summary.json``
    under ``root`` when given.
    """
    root = Path(root) if root is not None else None
    if expert is None:
        expert = prepare_experts(base, root)
    cfgs = ablation_configs(base)
    out = {}
    for name in (columns or cfgs):
        sub = root / _slug(name) if root is not None else None
        try:
            out[name] = run(cfgs[name], sub, expert=expert)
        except (RunFailed, ConfigInvalid) as exc:
            log.error("ablation %s failed: %s", name, exc)
            out[name] = exc
    if root is not None:
        ok = {n: a.report for n, a in out.items() if isinstance(a, RunArtifacts)}
        (root / "ablation_jsd.csv").write_text(ev.jsd_table_csv(ok))
        (root / "ablation_summary.json").write_text(ev.summary_json({
            "expert_hash": expert.content_hash(),
            "columns": {n: (a.summary if isinstance(a, RunArtifacts) else {"error": str(a)})
                        for n, a in out.items()},
        }))
    return out


def _slug(name: str) -> str:
    return "".join(c.lower() if c.isalnum() else "_" for c in name).strip("_")

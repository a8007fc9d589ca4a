"""Run configuration and its flat ``key = value`` text format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .summarize import M


class ConfigInvalid(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # identity
    algorithm: str = "ailad"          # ailad | carmi
    seed: int = 0
    # outer loop
    K: int = 1_000_000
    step_budget: int = 50_000
    d_epochs: float = 0.5
    # policy optimisation
    gamma: float = 0.99
    entropy_coef: float = 0.01
    c_clip: float = 10.0
    max_grad_norm: float = 10.0
    actor_lr: float = 3e-4
    lr_anneal: float = 0.1            # actor lr at the end of the budget, as a fraction of actor_lr
    critic_lr: float = 1e-3
    hidden: int = 64
    batch_episodes: int = 8
    recent_episodes: int = 1
    replay_capacity: int = 512
    latent_dim: int = M
    # reward learner
    disc_hidden: int = 32
    disc_lr: float = 3e-4
    d_batch: int = 64
    d_agent_sample: str = "window"    # recent | window: agent half of a reward-model batch
    pretrain: bool = True
    pretrain_c: float = 0.3
    pretrain_steps: int = 750
    pretrain_negatives: int = 2000
    fill_in_mode: str = "kde"         # kde | gaussian | constant
    metric_window: int = 256
    density_min: int = 32
    # ablations
    no_latent: bool = False
    real_fill_in: bool = False
    no_pretrain: bool = False
    plain_sigmoid: bool = False
    # baseline
    carmi_lambda: float = 1.0
    # data and levels
    level_seed: int = 7
    expert_seed: int = 1234
    styles: int = 3
    episodes_per_style_per_level: int = 8
    test_episodes_per_style: int = 24
    train_levels: str = "1-8"
    test_levels: str = "9"
    # evaluation
    eval_episodes: int = 200
    jsd_bins: int = 20
    jsd_alpha: float = 1e-3
    workers: int = 1

    def validate(self) -> "RunConfig":
        if not 0.0 <= self.d_epochs <= 1.0:
            raise ConfigInvalid("d_epochs must lie in [0, 1]")
        if not 0.0 <= self.lr_anneal <= 1.0:
            raise ConfigInvalid("lr_anneal must lie in [0, 1]")
        if self.K < 1:
            raise ConfigInvalid("K must be >= 1")
        if self.latent_dim != M:
            raise ConfigInvalid(f"latent_dim must equal the metric count {M}")
        if self.algorithm not in ("ailad", "carmi"):
            raise ConfigInvalid(f"unknown algorithm {self.algorithm!r}")
        if self.fill_in_mode not in ("kde", "gaussian", "constant"):
            raise ConfigInvalid(f"unknown fill_in_mode {self.fill_in_mode!r}")
        if self.d_agent_sample not in ("recent", "window"):
            raise ConfigInvalid(f"unknown d_agent_sample {self.d_agent_sample!r}")
        if self.pretrain_c <= 0:
            raise ConfigInvalid("pretrain_c must be positive")
        if self.styles < 2:
            raise ConfigInvalid("at least 2 expert styles are required")
        if self.workers < 1:
            raise ConfigInvalid("workers must be >= 1")
        if set(level_range(self.train_levels)) & set(level_range(self.test_levels)):
            raise ConfigInvalid("train and test levels overlap")
        return self

    @property
    def do_pretrain(self) -> bool:
        return self.pretrain and not self.no_pretrain

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    def to_text(self) -> str:
        lines = [f"{f.name} = {_render(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, overrides=()) -> "RunConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ConfigInvalid(f"line {lineno}: expected 'key = value'")
            values[key.strip()] = val.strip()
        for item in overrides:
            key, sep, val = item.partition("=")
            if not sep:
                raise ConfigInvalid(f"override {item!r}: expected key=value")
            values[key.strip()] = val.strip()
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        unknown = sorted(set(values) - set(types))
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {', '.join(unknown)}")
        kw = {k: _parse(k, types[k], v) for k, v in values.items()}
        return cls(**kw).validate()

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path, overrides=()) -> "RunConfig":
        return cls.from_text(Path(path).read_text(), overrides)


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(key: str, typ, raw):
    if not isinstance(raw, str):
        return raw
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if typ == "int":
            return int(raw.replace("_", ""))
        if typ == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigInvalid(f"{key}: cannot parse {raw!r} as {typ}") from None


def level_range(spec: str) -> list:
    """'1-8' -> [1..8]; '9' -> [9]; '1,3,5-6' -> [1, 3, 5, 6]."""
    out = []
    for part in spec.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out

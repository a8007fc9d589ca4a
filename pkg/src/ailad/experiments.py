"""Multi-seed studies shared by the experiment scripts and the acceptance suite."""
from __future__ import annotations

import hashlib
import logging
import time
from pathlib import Path
from typing import Optional

from . import trainer as T
from .config import RunConfig
from .summarize import ExpertDataset

log = logging.getLogger(__name__)

# column name -> RunConfig overrides
STUDY_COLUMNS = {
    "AILAD": dict(),
    "CARMI": dict(algorithm="carmi"),
    **{name: kw for name, kw in T.ABLATIONS.items() if name != "AILAD"},
}


def study(base: RunConfig, seeds, columns=None, expert: Optional[ExpertDataset] = None,
          root=None) -> dict:
    """Train every column on every seed against the same expert data.

    Returns ``{"seeds": [...], "columns": {name: [per-seed record]}}``. Each
    record holds the train/test "All" JSD, the per-metric train JSD and
    variances, and wall time. The AILAD column also carries the untrained
    policy's scores for its seed.
    """
    columns = list(columns or STUDY_COLUMNS)
    if expert is None:
        expert = T.prepare_experts(base, None)
    out = {"seeds": list(seeds), "expert_hash": expert.content_hash(), "columns": {}}
    for name in columns:
        recs = []
        for seed in seeds:
            cfg = base.replace(seed=seed, **STUDY_COLUMNS[name])
            run_dir = Path(root) / T._slug(name) / f"seed{seed}" if root is not None else None
            t0 = time.perf_counter()
            art = T.run(cfg, run_dir, expert=expert, with_baseline=(name == "AILAD"))
            seconds = time.perf_counter() - t0
            rep = art.summary["report"]
            rec = {
                "seed": seed,
                "train_all": rep["jsd"]["train"]["All"],
                "test_all": rep["jsd"]["test"]["All"],
                "train_jsd": rep["jsd"]["train"],
                "variances": rep["variances"]["train"],
                "env_steps": art.env_steps,
                "seconds": seconds,
            }
            if "untrained" in art.summary:
                rec["untrained_train_all"] = art.summary["untrained"]["jsd"]["train"]["All"]
                rec["untrained_test_all"] = art.summary["untrained"]["jsd"]["test"]["All"]
            log.info("%s seed %d: train %.4f test %.4f (%.0fs)", name, seed, rec["train_all"],
                     rec["test_all"], seconds)
            recs.append(rec)
        out["columns"][name] = recs
    return out


def source_fingerprint() -> str:
    """Hash of the package sources; cached study results are only reused when it matches."""
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def count(xs) -> int:
    return sum(bool(x) for x in xs)

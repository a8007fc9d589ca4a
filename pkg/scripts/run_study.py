#!/usr/bin/env python3
"""Multi-seed comparison of AILAD, CARMI and the ablation columns.

    python3 scripts/run_study.py --seeds 0,1,2,3,4 --out runs/study
    python3 scripts/run_study.py --columns AILAD,CARMI --seeds 0,1 step_budget=20000

Writes ``study.json`` (per-seed records) and ``study.csv`` (one row per seed,
one column per agent, train and test "All" JSD) under ``--out``.
"""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ailad import experiments as X
from ailad.config import RunConfig


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--columns", default=",".join(X.STUDY_COLUMNS))
    p.add_argument("--out", type=Path, default=Path("runs/study"))
    p.add_argument("--keep-runs", action="store_true", help="also write every run directory")
    p.add_argument("overrides", nargs="*", metavar="key=value")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cols = [c.strip() for c in args.columns.split(",")]
    unknown = [c for c in cols if c not in X.STUDY_COLUMNS]
    if unknown:
        p.error(f"unknown columns: {', '.join(unknown)}")
    seeds = [int(s) for s in args.seeds.split(",")]
    cfg = RunConfig.from_text("", args.overrides)
    args.out.mkdir(parents=True, exist_ok=True)
    res = X.study(cfg, seeds, cols, root=args.out / "runs" if args.keep_runs else None)
    (args.out / "study.json").write_text(json.dumps(res, indent=1, sort_keys=True))

    with open(args.out / "study.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["split", "seed"] + cols + (["Untrained"] if "AILAD" in cols else []))
        for split in ("train", "test"):
            for i, seed in enumerate(seeds):
                row = [res["columns"][c][i][f"{split}_all"] for c in cols]
                if "AILAD" in cols:
                    row.append(res["columns"]["AILAD"][i][f"untrained_{split}_all"])
                w.writerow([split, seed] + [repr(float(v)) for v in row])

    for c in cols:
        tr = np.mean([r["train_all"] for r in res["columns"][c]])
        te = np.mean([r["test_all"] for r in res["columns"][c]])
        print(f"{c:>16}  train {tr:.4f}  test {te:.4f}")
    if "AILAD" in cols:
        u = np.mean([r["untrained_train_all"] for r in res["columns"]["AILAD"]])
        print(f"{'untrained':>16}  train {u:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

    ailad gen-experts --run-dir runs/data
    ailad train --run-dir runs/ailad0 --seed 0 step_budget=50000
    ailad train-carmi --run-dir runs/carmi0 --seed 0
    ailad ablate --run-dir runs/ablate0
    ailad evaluate --run-dir runs/ailad0
    ailad report runs/ailad0 runs/carmi0 --out runs/report

Every subcommand accepts ``--config FILE`` and trailing ``key=value``
overrides of any RunConfig field. Usage errors exit with 2, runtime
failures with 1.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import evaluation as ev
from . import trainer as T
from .config import ConfigInvalid, RunConfig
from .experts import gen_experts
from .summarize import ExpertDataset

log = logging.getLogger("ailad")

COMMANDS = ("gen-experts", "train", "train-carmi", "ablate", "evaluate", "report")


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ailad", description="Adversarial imitation from aggregated episode metrics.")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp, run_dir=True):
        sp.add_argument("--config", type=Path, help="flat 'key = value' config file")
        if run_dir:
            sp.add_argument("--run-dir", type=Path, default=None,
                            help="output directory (default: $RUN_DIR, else runs/<command>)")
        sp.add_argument("--seed", type=int, default=None, help="shorthand for seed=N")
        sp.add_argument("-v", "--verbose", action="store_true")
        sp.add_argument("overrides", nargs="*", metavar="key=value")

    sp = sub.add_parser("gen-experts", help="roll out the scripted expert styles")
    common(sp)
    sp.add_argument("--styles", type=int, default=None)
    sp.add_argument("--episodes-per-style-per-level", type=int, default=None)

    for name, text in (("train", "train an AILAD agent"), ("train-carmi", "train the CARMI baseline")):
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.add_argument("--baseline", action="store_true", help="also evaluate the untrained policy")

    sp = sub.add_parser("ablate", help="run the seven ablation columns")
    common(sp)
    sp.add_argument("--columns", default=None, help="comma-separated subset of: " + ", ".join(T.ABLATIONS))

    sp = sub.add_parser("evaluate", help="re-evaluate a finished run directory")
    common(sp)
    sp.add_argument("--baseline", action="store_true")

    sp = sub.add_parser("report", help="merge evaluation summaries into comparison tables")
    sp.add_argument("runs", nargs="+", type=Path, help="run directories (train, train-carmi or ablate)")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> RunConfig:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    text = args.config.read_text() if args.config else ""
    return RunConfig.from_text(text, overrides)


def resolve_run_dir(args) -> Path:
    if args.run_dir is not None:
        return args.run_dir
    env = os.environ.get("RUN_DIR")
    return Path(env) if env else Path("runs") / args.command


def cmd_gen_experts(args) -> int:
    cfg = load_config(args)
    run_dir = resolve_run_dir(args)
    data, ext = gen_experts(cfg, styles=args.styles,
                            episodes_per_style_per_level=args.episodes_per_style_per_level)
    T.write_expert_files(run_dir, data, ext)
    cfg.save(run_dir / "config.snapshot")
    counts = {s: int((data.splits == s).sum()) for s in ev.SPLITS}
    print(f"wrote {len(data)} expert rows ({counts['train']} train, {counts['test']} test) to {run_dir}")
    return 0


def _existing_expert(run_dir: Path):
    p = run_dir / "expert.csv"
    return ExpertDataset.load(p) if p.exists() else None


def cmd_train(args, algorithm: str) -> int:
    cfg = load_config(args).replace(algorithm=algorithm)
    run_dir = resolve_run_dir(args)
    art = T.run(cfg, run_dir, expert=_existing_expert(run_dir), with_baseline=args.baseline)
    jsd = art.report.jsd
    print(f"{algorithm}: {art.env_steps} env steps, {art.iterations} episodes; "
          f"JSD All train {jsd['train']['All']:.4f} test {jsd['test']['All']:.4f}")
    return 0


def cmd_ablate(args) -> int:
    cfg = load_config(args)
    run_dir = resolve_run_dir(args)
    cols = None
    if args.columns:
        cols = [c.strip() for c in args.columns.split(",")]
        bad = [c for c in cols if c not in T.ABLATIONS]
        if bad:
            raise UsageError(f"unknown ablation columns: {', '.join(bad)}")
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg.save(run_dir / "config.snapshot")
    out = T.run_ablation_suite(cfg, run_dir, expert=_existing_expert(run_dir), columns=cols)
    failed = [n for n, a in out.items() if not isinstance(a, T.RunArtifacts)]
    print((run_dir / "ablation_jsd.csv").read_text(), end="")
    if failed:
        print(f"failed columns: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_evaluate(args) -> int:
    run_dir = resolve_run_dir(args)
    if not (run_dir / "checkpoints" / "actor.ckpt").exists():
        raise UsageError(f"{run_dir} has no checkpoints; train first")
    if args.overrides or args.config or args.seed is not None:
        raise UsageError("evaluate reads its configuration from the run directory's snapshot")
    art = T.reevaluate(run_dir, with_baseline=args.baseline)
    print(f"JSD All train {art.report.jsd['train']['All']:.4f} test {art.report.jsd['test']['All']:.4f}")
    return 0


def collect_columns(paths) -> tuple:
    """``({column: report dict}, expert run dir or None)`` from train or ablate directories."""
    cols, expert_dir = {}, None
    for p in paths:
        if (p / "ablation_summary.json").exists():
            data = json.loads((p / "ablation_summary.json").read_text())
            order = list(T.ABLATIONS)
            names = sorted(data["columns"], key=lambda n: order.index(n) if n in order else len(order))
            for name in names:
                summ = data["columns"][name]
                if "report" in summ:
                    cols[name] = summ["report"]
        elif (p / "eval" / "summary.json").exists():
            summ = json.loads((p / "eval" / "summary.json").read_text())
            name = summ["algorithm"].upper()
            if name in cols:
                name = f"{name} ({p.name})"
            cols[name] = summ["report"]
        else:
            raise UsageError(f"{p} holds no evaluation summary")
        if expert_dir is None and (p / "expert_extended.csv").exists():
            expert_dir = p
    return cols, expert_dir


def cmd_report(args) -> int:
    cols, expert_dir = collect_columns(args.runs)
    args.out.mkdir(parents=True, exist_ok=True)
    avgs = {}
    if expert_dir is not None:
        expert = ExpertDataset.load(expert_dir / "expert.csv")
        avgs["Players"] = T.expert_averages(expert, T.load_expert_extended(expert_dir))
    avgs.update({n: r["averages"] for n, r in cols.items()})
    (args.out / "jsd.csv").write_text(ev.jsd_table_csv({n: r["jsd"] for n, r in cols.items()}))
    (args.out / "averages.csv").write_text(ev.absolute_table_csv(avgs))
    (args.out / "report.json").write_text(ev.summary_json({"columns": cols}))
    print((args.out / "jsd.csv").read_text(), end="")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "gen-experts": cmd_gen_experts,
        "train": lambda a: cmd_train(a, "ailad"),
        "train-carmi": lambda a: cmd_train(a, "carmi"),
        "ablate": cmd_ablate,
        "evaluate": cmd_evaluate,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (UsageError, ConfigInvalid) as exc:
        parser.print_usage(sys.stderr)
        print(f"ailad: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to exit 1
        log.debug("failure", exc_info=True)
        print(f"ailad: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

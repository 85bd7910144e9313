"""Command-line entry point.

    paga skip [--model paga|gcn|gat] [--trials N] [--seed S] [--out DIR] [--check] ...
    paga ablation {phi_form,edge_features,capacity} [--seeds 0,1,...] [--out DIR] [--check]
    paga validate-graph PATH
    paga make-graph {didactic,lanes} --out PATH [--seed S] ...

Exit codes: 0 success, 1 acceptance failure (--check), 2 usage, 3 I/O.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "skip"
    graph: str | None = None
    experiment: str | None = None
    model: str | None = None
    seed: int = 0
    seeds: list[int] | None = None
    trials: int = 100
    out: str = "paga-out"
    jobs: int = 1
    check: bool = False
    # hyperparameters; defaults are the didactic settings
    lam: int = 2
    n_head: int = 1
    c_e: int = 1
    phi_kind: str = "concatenation"
    gamma: float | None = None
    depth: int = 2
    lr: float = 0.01
    epochs: int = 50
    batch_size: int = 128
    extra: dict = field(default_factory=dict)


CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)} - {"command", "extra"}

# flag dest -> RunConfig field
FLAG_FIELDS = {
    "graph": "graph", "model": "model", "seed": "seed", "seeds": "seeds", "trials": "trials",
    "out": "out", "jobs": "jobs", "check": "check", "lam": "lam", "heads": "n_head", "ce": "c_e",
    "phi": "phi_kind", "gamma": "gamma", "depth": "depth", "lr": "lr", "epochs": "epochs",
    "batch_size": "batch_size",
}


def _seed_list(text: str) -> list[int]:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("seed list is empty")
    try:
        return [int(t) for t in items]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of RunConfig values; flags take precedence")
    p.add_argument("--seed", type=int, default=None, help="base seed (default: $PAGA_SEED or 0)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="worker processes")
    p.add_argument("--check", action="store_true", default=None,
                   help="exit 1 unless the acceptance thresholds are met")
    p.add_argument("--lambda", dest="lam", type=int, default=None)
    p.add_argument("--heads", type=int, default=None)
    p.add_argument("--ce", type=int, default=None)
    p.add_argument("--phi", choices=["lstm", "sum", "concat", "recurrent", "summation",
                                     "concatenation"], default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--graph", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paga", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("skip", help="skip-interaction experiment (PAGA vs GCN)")
    _add_common(p)
    p.add_argument("--model", choices=["paga", "gcn", "gat"], default=None,
                   help="run one model kind (default: paga and gcn)")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--depth", type=int, default=None, help="GCN/GAT layers")
    p.add_argument("--batch-size", type=int, default=None)

    p = sub.add_parser("ablation", help="ablation sweep on synthetic lane graphs")
    p.add_argument("experiment", choices=["phi_form", "edge_features", "capacity"])
    _add_common(p)
    p.add_argument("--seeds", type=_seed_list, default=None, help="comma-separated seeds")
    p.add_argument("--trials", type=int, default=None, help="number of seeds if --seeds absent")

    p = sub.add_parser("validate-graph", help="check a graph JSON file")
    p.add_argument("path", nargs="?")
    p.add_argument("--graph", default=None)

    p = sub.add_parser("make-graph", help="write a graph JSON file")
    p.add_argument("kind", choices=["didactic", "lanes"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--chains", type=int, default=3)
    p.add_argument("--length", type=int, default=8)
    p.add_argument("--lateral", type=float, default=0.5)
    p.add_argument("--forks", type=float, default=0.0)
    return parser


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: malformed JSON at line {exc.lineno}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path}: expected a JSON object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise UsageError(f"config {path}: unknown key {unknown[0]!r}")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    env_seed = os.environ.get("PAGA_SEED")
    if env_seed is not None:
        try:
            cfg.seed = int(env_seed)
        except ValueError:
            raise UsageError(f"PAGA_SEED must be an integer, got {env_seed!r}") from None
    if getattr(args, "config", None):
        for k, v in load_config_file(args.config).items():
            setattr(cfg, k, v)
    for flag, name in FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, name, value)
    if args.command == "ablation":
        cfg.experiment = args.experiment
    if cfg.seeds is not None and len(cfg.seeds) == 0:
        raise UsageError("seed list is empty")
    for name in ("trials", "jobs", "epochs", "lam", "n_head", "c_e", "depth", "batch_size"):
        if getattr(cfg, name) < 1:
            raise UsageError(f"{name} must be >= 1")
    return cfg


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-test"
    probe.write_text("")
    probe.unlink()
    effective = {k: v for k, v in dataclasses.asdict(cfg).items() if k != "extra"}
    (out / "config.json").write_text(json.dumps(effective, indent=1, sort_keys=True) + "\n")
    return out


def cmd_skip(cfg: RunConfig) -> int:
    from .experiments import checks, reporting
    from .experiments.skip import TrainConfig, run_trials

    out = _prepare_out(cfg)
    train_cfg = TrainConfig(epochs=cfg.epochs, lr=cfg.lr, batch_size=cfg.batch_size,
                            gcn_depth=cfg.depth, n_head=cfg.n_head, phi_kind=cfg.phi_kind,
                            gamma=cfg.gamma, lam=cfg.lam, c_e=cfg.c_e)
    kinds = [cfg.model] if cfg.model else ["paga", "gcn"]
    summaries = []
    for kind in kinds:
        s = run_trials(kind, cfg.trials, cfg.seed, train_cfg, jobs=cfg.jobs)
        summaries.append(s)
        reporting.write_loss_curves(s, out / f"loss_curves_{kind}.csv")
        reporting.write_trials(s, out / f"trials_{kind}.csv")
    reporting.write_summary(summaries, out / "summary.csv")
    text = reporting.comparison_text(summaries)
    (out / "comparison.txt").write_text(text)
    print(text, end="")
    if not cfg.check:
        return EXIT_OK
    results = []
    for s in summaries:
        if s.kind == "paga":
            results += checks.check_paga(s)
        elif s.kind == "gcn":
            results += checks.check_gcn(s)
    for c in results:
        print(c.line())
    return EXIT_OK if all(c.passed for c in results) else EXIT_CHECK


def cmd_ablation(cfg: RunConfig) -> int:
    from dataclasses import replace

    from .experiments import checks, reporting
    from .experiments.ablation import AblationTask, run_ablation

    out = _prepare_out(cfg)
    seeds = cfg.seeds if cfg.seeds is not None else list(range(cfg.seed, cfg.seed + min(cfg.trials, 10)))
    task = AblationTask()
    overrides = {k: v for k, v in cfg.extra.items() if k in ("c_e", "n_head", "phi_kind")}
    if overrides:
        task = replace(task, base=replace(task.base, **overrides))
    rows = run_ablation(cfg.experiment, seeds, task, jobs=cfg.jobs)
    reporting.write_ablation(rows, out / f"ablation_{cfg.experiment}.csv")
    for r in rows:
        print(f"{r.variant:<16} {r.mean:.4e} +- {r.std:.4e}")
    if not cfg.check:
        return EXIT_OK
    results = checks.check_ablation(cfg.experiment, rows)
    for c in results:
        print(c.line())
    return EXIT_OK if all(c.passed for c in results) else EXIT_CHECK


def cmd_validate_graph(path) -> int:
    from .graph import validate_graph_file

    if not Path(path).is_file():
        print(f"error: no such file {path}", file=sys.stderr)
        return EXIT_IO
    report = validate_graph_file(path)
    print(report)
    return EXIT_OK if report == "valid" else EXIT_CHECK


def cmd_make_graph(args, seed: int) -> int:
    from .experiments.lanes import LaneGraphConfig, gen_lane_graph
    from .graph import didactic_graph, save_graph

    if args.kind == "didactic":
        g = didactic_graph()
    else:
        g = gen_lane_graph(LaneGraphConfig(num_chains=args.chains, chain_length=args.length,
                                           lateral_prob=args.lateral, fork_rate=args.forks,
                                           seed=seed))
    save_graph(g, args.out)
    print(f"wrote {g.num_vertices} vertices, {g.num_edges} edges to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        if args.command == "validate-graph":
            path = args.path or args.graph
            if not path:
                raise UsageError("validate-graph needs a path")
            return cmd_validate_graph(path)
        if args.command == "make-graph":
            seed = args.seed if args.seed is not None else int(os.environ.get("PAGA_SEED", 0))
            return cmd_make_graph(args, seed)
        cfg = resolve_config(args)
        if args.command == "ablation":
            # hyperparameter flags given explicitly override the ablation base model
            explicit = {"c_e": args.ce, "n_head": args.heads, "phi_kind": args.phi}
            cfg.extra = {k: v for k, v in explicit.items() if v is not None}
            return cmd_ablation(cfg)
        return cmd_skip(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

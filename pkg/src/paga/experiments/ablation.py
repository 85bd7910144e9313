"""Order-sensitive regression on lane graphs and the three ablation sweeps.

Task: two input channels per lane segment, two output channels.

* channel 0 sums x0 over every ``[sequential, lateral-left]`` path
  (the left neighbour of a successor),
* channel 1 sums x1 over every ``[lateral-right, sequential]`` path
  (the successor of a right neighbour).

The two targets share path multisets with their reversed orderings, so a
permutation-invariant extractor cannot separate them; they also need two
different attention patterns (one head is not enough) and a left/right
distinction that only the spatial edge features carry.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tape, Tensor
from ..graph import HeteroGraph, enumerate_paths
from ..layers import PagaConfig, PagaModel, PathBatch
from ..optim import AdamState, adam_step
from .lanes import LATERAL, SEQUENTIAL, LaneGraphConfig, gen_lane_graph, lateral_side

ABLATIONS = ("phi_form", "edge_features", "capacity")


def _kind(g: HeteroGraph, e: int) -> str:
    if g.edge_types[e] == SEQUENTIAL:
        return "S"
    return "L" if lateral_side(g, e) > 0 else "R"


def task_operators(g: HeteroGraph) -> np.ndarray:
    """(2, V, V) path-count matrices for the two output channels."""
    n = g.num_vertices
    ops = np.zeros((2, n, n))
    wanted = {("S", "L"): 0, ("R", "S"): 1}
    for u in range(n):
        for v, paths in enumerate_paths(g, u, 2).entries.items():
            for p in paths:
                if len(p) == 2:
                    ch = wanted.get(tuple(_kind(g, e) for e in p.edges))
                    if ch is not None:
                        ops[ch, u, v] += 1.0
    return ops


def task_targets(ops: np.ndarray, x: np.ndarray) -> np.ndarray:
    """x: (B, V, 2) -> y: (B, V, 2)."""
    return np.stack([x[..., 0] @ ops[0].T, x[..., 1] @ ops[1].T], axis=-1)


@dataclass(frozen=True)
class AblationTask:
    graph: LaneGraphConfig = LaneGraphConfig(num_chains=3, chain_length=6, lateral_prob=0.5,
                                             fork_rate=0.15)
    train_graphs: int = 4
    eval_graphs: int = 2
    batch: int = 16
    steps: int = 300
    lr: float = 0.01
    eval_examples: int = 64
    base: PagaConfig = PagaConfig(lam=2, c_e=32, n_head=8, phi_kind="recurrent", c_x=2, c_y=2,
                                  lstm_hidden=16, nonlinear=True)


@dataclass(frozen=True)
class _Prepared:
    graph: HeteroGraph
    paths: PathBatch
    ops: np.ndarray


def _prepare(task: AblationTask, seed: int, count: int, offset: int) -> list[_Prepared]:
    out = []
    for k in range(count):
        g = gen_lane_graph(replace(task.graph, seed=seed * 1000 + offset + k))
        out.append(_Prepared(g, PathBatch.build(g, task.base.lam), task_operators(g)))
    return out


def train_eval(cfg: PagaConfig, task: AblationTask, seed: int) -> float:
    """Train one PAGA layer on the task; eval MSE on held-out graphs."""
    rng = np.random.default_rng(seed)
    train = _prepare(task, seed, task.train_graphs, 0)
    held = _prepare(task, seed, task.eval_graphs, 500)
    model = PagaModel(train[0].graph, cfg, rng, num_types=2, paths=train[0].paths)
    params = model.params
    state = AdamState(lr=task.lr)
    for step in range(task.steps):
        item = train[step % len(train)]
        x = rng.standard_normal((task.batch, item.graph.num_vertices, cfg.c_x))
        y = task_targets(item.ops, x)
        with Tape() as tape:
            loss = ad.mse_loss(model(Tensor(x), item.graph, item.paths), Tensor(y))
        if not np.isfinite(loss.value):
            return float("nan")
        adam_step(params, tape.gradient(loss, params), state)
    errs = []
    eval_rng = np.random.default_rng(10_000 + seed)
    for item in held:
        x = eval_rng.standard_normal((task.eval_examples, item.graph.num_vertices, cfg.c_x))
        pred = model(Tensor(x), item.graph, item.paths).value
        errs.append(np.mean((pred - task_targets(item.ops, x)) ** 2))
    return float(np.mean(errs))


def variants(ablation: str, base: PagaConfig) -> dict[str, PagaConfig]:
    if ablation == "phi_form":
        return {name: replace(base, phi_kind=name)
                for name in ("recurrent", "summation", "concatenation")}
    if ablation == "capacity":
        return {f"ce={ce},heads={h}": replace(base, c_e=ce, n_head=h)
                for ce, h in ((32, 1), (1, 8), (32, 8))}
    if ablation == "edge_features":
        return {
            "none": replace(base, use_edge_type=False, use_spatial=False),
            "type": replace(base, use_edge_type=True, use_spatial=False),
            "spatial": replace(base, use_edge_type=False, use_spatial=True),
            "type+spatial": replace(base, use_edge_type=True, use_spatial=True),
        }
    raise ValueError(f"unknown ablation {ablation!r}; expected one of {ABLATIONS}")


@dataclass(frozen=True)
class AblationRow:
    variant: str
    mean: float
    std: float
    errors: tuple[float, ...]


def run_ablation(ablation: str, seeds, task: AblationTask = AblationTask(),
                 jobs: int = 1) -> list[AblationRow]:
    seeds = sorted(seeds)
    if not seeds:
        raise ValueError("run_ablation needs at least one seed")
    configs = variants(ablation, task.base)
    work = [(cfg, task, s) for cfg in configs.values() for s in seeds]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            errs = list(pool.map(_train_eval_args, work))
    else:
        errs = [_train_eval_args(w) for w in work]
    rows = []
    for k, name in enumerate(configs):
        e = np.array(errs[k * len(seeds):(k + 1) * len(seeds)])
        finite = e[np.isfinite(e)]
        rows.append(AblationRow(name, float(finite.mean()) if len(finite) else float("nan"),
                                float(finite.std()) if len(finite) else float("nan"),
                                tuple(float(v) for v in e)))
    return rows


def _train_eval_args(args) -> float:
    return train_eval(*args)

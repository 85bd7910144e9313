"""Synthetic lane graphs: parallel chains of lane segments along +x.

Sequential edges join consecutive segments of a chain; lateral edges join
side-by-side segments of adjacent chains (both directions, same type).  Fork
injection adds diagonal sequential edges (i, j) -> (i +/- 1, j + 1), which
make the source a fork and the target a merge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import Edge, HeteroGraph, build_graph

SEQUENTIAL = 0
LATERAL = 1


@dataclass(frozen=True)
class LaneGraphConfig:
    num_chains: int = 3
    chain_length: int = 8
    lateral_prob: float = 0.5
    fork_rate: float = 0.0
    seed: int = 0
    lane_width: float = 1.0
    spacing: float = 1.0
    jitter: float = 0.05

    def __post_init__(self):
        if self.num_chains < 1 or self.chain_length < 1:
            raise ValueError("need at least one chain of at least one segment")
        for name in ("lateral_prob", "fork_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def vertex_id(cfg: LaneGraphConfig, chain: int, pos: int) -> int:
    return chain * cfg.chain_length + pos


def gen_lane_graph(cfg: LaneGraphConfig) -> HeteroGraph:
    """Vertex features are (x, y, dir_x, dir_y); edge features are
    (dx, dy, source dir_x, source dir_y, target dir_x, target dir_y)."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.num_chains * cfg.chain_length
    chain, pos = np.divmod(np.arange(n), cfg.chain_length)
    xy = np.stack([pos * cfg.spacing, chain * cfg.lane_width], axis=1)
    xy = xy + cfg.jitter * rng.standard_normal((n, 2))
    heading = cfg.jitter * rng.standard_normal(n)
    direction = np.stack([np.cos(heading), np.sin(heading)], axis=1)
    feats = np.concatenate([xy, direction], axis=1)

    pairs: list[tuple[int, int, int]] = []
    for i in range(cfg.num_chains):
        for j in range(cfg.chain_length - 1):
            pairs.append((vertex_id(cfg, i, j), vertex_id(cfg, i, j + 1), SEQUENTIAL))
    for i in range(cfg.num_chains - 1):
        for j in range(cfg.chain_length):
            if rng.random() < cfg.lateral_prob:
                a, b = vertex_id(cfg, i, j), vertex_id(cfg, i + 1, j)
                pairs.append((a, b, LATERAL))
                pairs.append((b, a, LATERAL))

    candidates = [(i, j, d) for i in range(cfg.num_chains) for j in range(cfg.chain_length - 1)
                  for d in (-1, 1) if 0 <= i + d < cfg.num_chains]
    forks = [c for c in candidates if rng.random() < cfg.fork_rate]
    if cfg.fork_rate > 0 and not forks and candidates:
        forks = [candidates[int(rng.integers(len(candidates)))]]
    for i, j, d in forks:
        pairs.append((vertex_id(cfg, i, j), vertex_id(cfg, i + d, j + 1), SEQUENTIAL))

    edges = []
    for s, t, kind in pairs:
        raw = np.concatenate([xy[t] - xy[s], direction[s], direction[t]])
        edges.append(Edge(s, t, kind, tuple(raw)))
    return build_graph(n, feats, edges)


def lateral_side(g: HeteroGraph, e: int) -> int:
    """+1 if lateral edge ``e`` moves to the left (increasing y), -1 otherwise."""
    dy = g.edge_features[e, 1]
    return 1 if dy > 0 else -1

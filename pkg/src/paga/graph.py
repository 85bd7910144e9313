"""Heterogeneous directed multigraphs in compressed row storage, and bounded-length
simple-path enumeration over them.

Edge ids are dense and implicit in the order of ``HeteroGraph.edges``.  Both the
outgoing and incoming adjacency are kept as CSR offset/column arrays whose
columns are edge ids (not vertex ids), so parallel edges of different types
stay distinguishable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Iterable, Sequence

import numpy as np

# Reserved label for self-loop edges; the only type allowed to have source == target.
SELF_TYPE = -1


class GraphError(ValueError):
    """Raised when a graph violates one of its structural invariants."""

    def __init__(self, message: str, *, edge: int | None = None, vertex: int | None = None):
        super().__init__(message)
        self.edge = edge
        self.vertex = vertex


class ShapeError(GraphError):
    pass


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    edge_type: int = 0
    feature: tuple[float, ...] = ()
    id: int = -1


@dataclass(frozen=True)
class CSR:
    """Row offsets plus the edge ids of each row, in ascending edge-id order."""

    offsets: np.ndarray
    columns: np.ndarray

    def row(self, u: int) -> np.ndarray:
        return self.columns[self.offsets[u] : self.offsets[u + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)


def _csr(keys: np.ndarray, n: int) -> CSR:
    order = np.argsort(keys, kind="stable").astype(np.int64)
    counts = np.bincount(keys, minlength=n) if len(keys) else np.zeros(n, dtype=np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return CSR(offsets, order)


@dataclass(frozen=True, eq=False)
class HeteroGraph:
    num_vertices: int
    vertex_features: np.ndarray
    edges: tuple[Edge, ...]
    out_index: CSR
    in_index: CSR
    sources: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    edge_types: np.ndarray = field(repr=False)
    edge_features: np.ndarray = field(repr=False)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def raw_edge_width(self) -> int:
        return self.edge_features.shape[1]

    @property
    def num_edge_types(self) -> int:
        """Number of non-reserved edge types, assuming labels 0..k-1."""
        typed = self.edge_types[self.edge_types != SELF_TYPE]
        return int(typed.max()) + 1 if len(typed) else 0

    def neighbors(self, u: int) -> list[int]:
        """1-ring of ``u``: distinct targets of its out-edges, sorted."""
        return sorted({int(self.targets[e]) for e in self.out_index.row(_check_vertex(self, u))})


def build_graph(num_vertices: int, vertex_features, edges: Iterable[Edge | Sequence]) -> HeteroGraph:
    """Validate inputs and build both CSR indices.

    ``edges`` may hold ``Edge`` objects or ``(source, target, type[, feature])``
    tuples; ids are reassigned to list order.
    """
    if num_vertices < 0:
        raise GraphError(f"num_vertices must be non-negative, got {num_vertices}")
    try:
        x = np.asarray(vertex_features, dtype=np.float64)
    except ValueError as exc:
        raise ShapeError(f"ragged vertex feature matrix: {exc}") from None
    if x.ndim == 1 and x.size == 0:
        x = x.reshape(num_vertices, 0)
    if x.ndim != 2:
        raise ShapeError(f"vertex features must be a matrix, got shape {x.shape}")
    if x.shape[0] != num_vertices:
        raise ShapeError(f"vertex feature rows {x.shape[0]} != num_vertices {num_vertices}")

    built: list[Edge] = []
    for i, e in enumerate(edges):
        if not isinstance(e, Edge):
            e = Edge(int(e[0]), int(e[1]), int(e[2]) if len(e) > 2 else 0,
                     tuple(e[3]) if len(e) > 3 else ())
        built.append(Edge(int(e.source), int(e.target), int(e.edge_type),
                          tuple(float(v) for v in e.feature), i))

    widths = {len(e.feature) for e in built}
    if len(widths) > 1:
        raise ShapeError(f"edge features have mixed widths {sorted(widths)}")
    width = widths.pop() if widths else 0
    for e in built:
        for end in (e.source, e.target):
            if not 0 <= end < num_vertices:
                raise GraphError(f"edge {e.id}: endpoint {end} out of range [0, {num_vertices})",
                                 edge=e.id)
        if e.source == e.target and e.edge_type != SELF_TYPE:
            raise GraphError(f"edge {e.id}: self-loop on vertex {e.source} must use the SELF type",
                             edge=e.id, vertex=e.source)
        if e.edge_type < SELF_TYPE:
            raise GraphError(f"edge {e.id}: invalid edge type {e.edge_type}", edge=e.id)

    src = np.array([e.source for e in built], dtype=np.int64)
    dst = np.array([e.target for e in built], dtype=np.int64)
    types = np.array([e.edge_type for e in built], dtype=np.int64)
    feats = np.array([e.feature for e in built], dtype=np.float64).reshape(len(built), width)
    for arr in (x, src, dst, types, feats):
        arr.setflags(write=False)
    return HeteroGraph(num_vertices, x, tuple(built), _csr(src, num_vertices),
                       _csr(dst, num_vertices), src, dst, types, feats)


def _check_vertex(g: HeteroGraph, u: int) -> int:
    if not 0 <= u < g.num_vertices:
        raise IndexError(f"vertex {u} out of range [0, {g.num_vertices})")
    return int(u)


def out_edges(g: HeteroGraph, u: int) -> list[Edge]:
    return [g.edges[e] for e in g.out_index.row(_check_vertex(g, u))]


def in_edges(g: HeteroGraph, u: int) -> list[Edge]:
    return [g.edges[e] for e in g.in_index.row(_check_vertex(g, u))]


# --- paths -------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Path:
    edges: tuple[int, ...]

    def __post_init__(self):
        if len(self.edges) < 1:
            raise ValueError("a path has at least one edge")

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class PathIndex:
    """All simple paths of length 1..lam leaving ``source``, keyed by target."""

    source: int
    lam: int
    entries: dict[int, tuple[Path, ...]]

    def targets(self) -> set[int]:
        return set(self.entries)

    def paths(self) -> list[Path]:
        return sorted(p for ps in self.entries.values() for p in ps)

    def __len__(self) -> int:
        return sum(len(ps) for ps in self.entries.values())


def enumerate_paths(g: HeteroGraph, u: int, lam: int) -> PathIndex:
    """Depth-first enumeration of simple paths from ``u`` with at most ``lam`` edges.

    Out-edges are expanded in ascending id order, so each target's list comes
    out lexicographically sorted by edge-id sequence.
    """
    if lam < 1:
        raise ValueError(f"lambda must be >= 1, got {lam}")
    u = _check_vertex(g, u)
    entries: dict[int, list[Path]] = {}
    offsets, cols = g.out_index.offsets, g.out_index.columns
    targets = g.targets
    on_path = [False] * g.num_vertices
    on_path[u] = True
    trail: list[int] = []

    def visit(w: int) -> None:
        for e in cols[offsets[w] : offsets[w + 1]]:
            v = int(targets[e])
            if on_path[v]:
                continue
            trail.append(int(e))
            entries.setdefault(v, []).append(Path(tuple(trail)))
            if len(trail) < lam:
                on_path[v] = True
                visit(v)
                on_path[v] = False
            trail.pop()

    visit(u)
    return PathIndex(u, lam, {v: tuple(ps) for v, ps in sorted(entries.items())})


def enumerate_all(g: HeteroGraph, lam: int) -> list[PathIndex]:
    return [enumerate_paths(g, u, lam) for u in range(g.num_vertices)]


def lambda_ring(g: HeteroGraph, u: int, lam: int) -> set[int]:
    return enumerate_paths(g, u, lam).targets()


def path_is_valid(g: HeteroGraph, p: Path) -> bool:
    """Chaining and simplicity check against ``g``."""
    if any(not 0 <= e < g.num_edges for e in p.edges):
        return False
    seen = {int(g.sources[p.edges[0]])}
    for i, e in enumerate(p.edges):
        if i and g.sources[e] != g.targets[p.edges[i - 1]]:
            return False
        v = int(g.targets[e])
        if v in seen:
            return False
        seen.add(v)
    return True


# --- validation and JSON ----------------------------------------------------

def check_graph(g: HeteroGraph) -> str | None:
    """Return a description of the first violated invariant, or None."""
    for name, csr, ends in (("out", g.out_index, g.sources), ("in", g.in_index, g.targets)):
        if len(csr.offsets) != g.num_vertices + 1 or csr.offsets[0] != 0:
            return f"{name}_index: offsets must have {g.num_vertices + 1} entries starting at 0"
        if np.any(np.diff(csr.offsets) < 0):
            v = int(np.argmax(np.diff(csr.offsets) < 0))
            return f"{name}_index: offsets decrease at vertex {v}"
        if csr.offsets[-1] != g.num_edges or len(csr.columns) != g.num_edges:
            return f"{name}_index: references {len(csr.columns)} edges, graph has {g.num_edges}"
        counts = np.bincount(csr.columns, minlength=g.num_edges) if g.num_edges else []
        for e, c in enumerate(counts):
            if c != 1:
                return f"{name}_index: edge {e} referenced {c} times"
        for v in range(g.num_vertices):
            row = csr.row(v)
            bad = row[ends[row] != v]
            if len(bad):
                return f"{name}_index: edge {int(bad[0])} filed under vertex {v}"
            if np.any(np.diff(row) <= 0):
                return f"{name}_index: row of vertex {v} not in ascending edge order"
    return None


def graph_to_dict(g: HeteroGraph, *, include_csr: bool = True) -> dict:
    d = {
        "num_vertices": g.num_vertices,
        "vertex_features": g.vertex_features.tolist(),
        "edges": [{"source": e.source, "target": e.target, "type": e.edge_type,
                   "feature": list(e.feature)} for e in g.edges],
    }
    if include_csr:
        d["csr"] = {
            "out_offsets": g.out_index.offsets.tolist(),
            "out_edges": g.out_index.columns.tolist(),
            "in_offsets": g.in_index.offsets.tolist(),
            "in_edges": g.in_index.columns.tolist(),
        }
    return d


def graph_from_dict(d: dict) -> HeteroGraph:
    """Parse the JSON graph layout; a stored ``csr`` block must match the rebuilt one."""
    for key in ("num_vertices", "edges"):
        if key not in d:
            raise GraphError(f"missing field '{key}'")
    n = d["num_vertices"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise GraphError(f"field 'num_vertices' must be an integer, got {n!r}")
    feats = d.get("vertex_features", [[] for _ in range(n)])
    edges = []
    for i, e in enumerate(d["edges"]):
        try:
            edges.append(Edge(e["source"], e["target"], e.get("type", 0), tuple(e.get("feature", ()))))
        except (KeyError, TypeError) as exc:
            raise GraphError(f"edge {i}: malformed entry ({exc})", edge=i) from None
    g = build_graph(n, feats, edges)
    csr = d.get("csr")
    if csr is not None:
        for name, index in (("out", g.out_index), ("in", g.in_index)):
            offsets = csr.get(f"{name}_offsets")
            cols = csr.get(f"{name}_edges")
            if offsets is None or cols is None:
                raise GraphError(f"csr: missing {name}_offsets/{name}_edges")
            if list(offsets) != index.offsets.tolist():
                v = _first_diff(offsets, index.offsets.tolist())
                raise GraphError(f"csr: {name}_offsets disagree with edge list at vertex {v}",
                                 vertex=v)
            if list(cols) != index.columns.tolist():
                k = _first_diff(cols, index.columns.tolist())
                e = index.columns.tolist()[k] if k < g.num_edges else None
                raise GraphError(f"csr: {name}_edges disagree with edge list at position {k}",
                                 edge=e)
    return g


def _first_diff(a: Sequence, b: Sequence) -> int:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return min(len(a), len(b))


def save_graph(g: HeteroGraph, path) -> None:
    FsPath(path).write_text(json.dumps(graph_to_dict(g), indent=1) + "\n")


def load_graph(path) -> HeteroGraph:
    text = FsPath(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(d, dict):
        raise GraphError("top-level JSON value must be an object")
    return graph_from_dict(d)


def validate_graph_file(path) -> str:
    """``"valid"`` or a one-line description of the first problem found."""
    try:
        g = load_graph(path)
    except GraphError as exc:
        return str(exc)
    return check_graph(g) or "valid"


def didactic_graph() -> HeteroGraph:
    """Three vertices a, b, c with edges a->b (type 0) and b->c (type 1)."""
    return build_graph(3, np.zeros((3, 1)), [Edge(0, 1, 0), Edge(1, 2, 1)])

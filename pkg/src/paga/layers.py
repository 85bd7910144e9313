"""Path-aware graph attention plus GCN and GAT baselines.

Attention gates for a vertex pair (u, v) are the sum, over every simple path
u -> v of at most ``lam`` edges, of a learned function of the path's edge
feature sequence.  Gates are raw (no softmax).  The diagonal carries a
learned per-head self gate instead of a synthetic self-loop path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ContractError, ShapeError, Tensor
from .graph import SELF_TYPE, HeteroGraph, Path, PathIndex, enumerate_all, path_is_valid
from .optim import uniform_weight, zeros

PHI_ALIASES = {
    "recurrent": "recurrent", "lstm": "recurrent",
    "summation": "summation", "sum": "summation",
    "concatenation": "concatenation", "concat": "concatenation",
}


@dataclass(frozen=True)
class PagaConfig:
    lam: int = 2
    c_e: int = 1
    n_head: int = 1
    phi_kind: str = "concatenation"
    gamma: float | None = None
    c_x: int = 1
    c_y: int = 1
    lstm_hidden: int = 1
    # tanh hidden layer in the summation/concatenation extractors
    nonlinear: bool = False
    use_edge_type: bool = True
    use_spatial: bool = True

    def __post_init__(self):
        if self.lam < 1:
            raise ValueError(f"lam must be >= 1, got {self.lam}")
        if self.n_head < 1:
            raise ValueError(f"n_head must be >= 1, got {self.n_head}")
        if self.c_e < 1 or self.lstm_hidden < 1:
            raise ValueError("c_e and lstm_hidden must be >= 1")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.phi_kind not in PHI_ALIASES:
            raise ValueError(f"unknown phi kind {self.phi_kind!r}")
        object.__setattr__(self, "phi_kind", PHI_ALIASES[self.phi_kind])


# --- edge features -------------------------------------------------------------

class EdgeTypeEmbedding:
    """Per-edge feature vectors of width ``c_e``.

    The vector of an edge is its type row from ``table`` plus a learned linear
    projection of the raw (spatial) edge feature.  The last table row is
    reserved for ``SELF_TYPE``.  Either part can be switched off.
    """

    def __init__(self, num_types: int, c_e: int, raw_width: int, rng: np.random.Generator,
                 *, use_type: bool = True, use_raw: bool = True):
        self.num_types = num_types
        self.c_e = c_e
        self.use_type = use_type
        self.use_raw = use_raw and raw_width > 0
        self.params: dict[str, Tensor] = {}
        if self.use_type:
            # embedding rows behave like a weight with fan_in 1
            self.params["table"] = Tensor(rng.uniform(-1.0, 1.0, size=(num_types + 1, c_e)))
        if self.use_raw:
            self.params["raw_proj"] = uniform_weight(rng, raw_width, c_e)

    def rows(self, types) -> np.ndarray:
        types = np.asarray(types, dtype=np.int64)
        if np.any(types >= self.num_types):
            raise ValueError(f"edge type {int(types.max())} not covered by a {self.num_types}-type table")
        return np.where(types == SELF_TYPE, self.num_types, types)

    def encode(self, g: HeteroGraph) -> Tensor:
        """Feature matrix of shape (num_edges, c_e) for every edge of ``g``."""
        parts = []
        if self.use_type:
            parts.append(ad.take(self.params["table"], self.rows(g.edge_types)))
        if self.use_raw:
            if g.raw_edge_width != self.params["raw_proj"].shape[0]:
                raise ShapeError(f"raw edge width {g.raw_edge_width} != "
                                 f"{self.params['raw_proj'].shape[0]}")
            parts.append(ad.matmul(Tensor(g.edge_features), self.params["raw_proj"]))
        if not parts:
            return Tensor(np.zeros((g.num_edges, self.c_e)))
        out = parts[0]
        for p in parts[1:]:
            out = ad.add(out, p)
        return out


def edge_feature_sequence(g: HeteroGraph, p: Path, embed: EdgeTypeEmbedding) -> list[np.ndarray]:
    if not path_is_valid(g, p):
        raise ContractError(f"path {p.edges} is not a valid simple path of this graph")
    feats = embed.encode(g).value
    return [feats[e].copy() for e in p.edges]


# --- path feature extractors ---------------------------------------------------

class PhiExtractor:
    """Maps a batch of edge-feature sequences (n, length, c_e) to gates (n, n_head)."""

    kind: str

    def __init__(self, cfg: PagaConfig):
        self.cfg = cfg
        self.params: dict[str, Tensor] = {}

    def __call__(self, seq: Tensor) -> Tensor:
        raise NotImplementedError

    def _head(self, h: Tensor) -> Tensor:
        return ad.add(ad.matmul(h, self.params["head_w"]), self.params["head_b"])


def lstm_cell(params: Mapping[str, Tensor], x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM step; gate blocks of ``w_x``/``w_h``/``b`` are ordered i, f, g, o."""
    n = h.shape[-1]
    z = ad.add(ad.add(ad.matmul(x, params["w_x"]), ad.matmul(h, params["w_h"])), params["b"])
    i = ad.sigmoid(ad.slice_last(z, 0, n))
    f = ad.sigmoid(ad.slice_last(z, n, 2 * n))
    gg = ad.tanh(ad.slice_last(z, 2 * n, 3 * n))
    o = ad.sigmoid(ad.slice_last(z, 3 * n, 4 * n))
    c_new = ad.add(ad.mul(f, c), ad.mul(i, gg))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new


class RecurrentPhi(PhiExtractor):
    kind = "recurrent"

    def __init__(self, cfg: PagaConfig, rng: np.random.Generator):
        super().__init__(cfg)
        hid = cfg.lstm_hidden
        self.params.update({
            "lstm/w_x": uniform_weight(rng, cfg.c_e, 4 * hid),
            "lstm/w_h": uniform_weight(rng, hid, 4 * hid),
            "lstm/b": zeros(4 * hid),
            "head_w": uniform_weight(rng, hid, cfg.n_head),
            "head_b": zeros(cfg.n_head),
        })

    def __call__(self, seq: Tensor) -> Tensor:
        n, length, _ = seq.shape
        hid = self.cfg.lstm_hidden
        cell = {k.split("/", 1)[1]: v for k, v in self.params.items() if k.startswith("lstm/")}
        h = Tensor(np.zeros((n, hid)))
        c = Tensor(np.zeros((n, hid)))
        steps = ad.transpose(seq, (1, 0, 2))
        for t in range(length):
            h, c = lstm_cell(cell, ad.index(steps, t), h, c)
        return self._head(h)


class SummationPhi(PhiExtractor):
    kind = "summation"

    def __init__(self, cfg: PagaConfig, rng: np.random.Generator):
        super().__init__(cfg)
        width = cfg.lstm_hidden if cfg.nonlinear else cfg.c_e
        if cfg.nonlinear:
            self.params["edge_w"] = uniform_weight(rng, cfg.c_e, width)
            self.params["edge_b"] = zeros(width)
        self.params["head_w"] = uniform_weight(rng, width, cfg.n_head)
        self.params["head_b"] = zeros(cfg.n_head)

    def __call__(self, seq: Tensor) -> Tensor:
        if self.cfg.nonlinear:
            seq = ad.tanh(ad.add(ad.matmul(seq, self.params["edge_w"]), self.params["edge_b"]))
        return self._head(ad.reduce_sum(seq, axis=1))


class ConcatenationPhi(PhiExtractor):
    kind = "concatenation"

    def __init__(self, cfg: PagaConfig, rng: np.random.Generator):
        super().__init__(cfg)
        width = cfg.lam * cfg.c_e
        if cfg.nonlinear:
            self.params["hidden_w"] = uniform_weight(rng, width, cfg.lstm_hidden)
            self.params["hidden_b"] = zeros(cfg.lstm_hidden)
            width = cfg.lstm_hidden
        self.params["head_w"] = uniform_weight(rng, width, cfg.n_head)
        self.params["head_b"] = zeros(cfg.n_head)

    def __call__(self, seq: Tensor) -> Tensor:
        n, length, c_e = seq.shape
        flat = ad.reshape(seq, (n, length * c_e))
        if length < self.cfg.lam:
            flat = ad.concat([flat, Tensor(np.zeros((n, (self.cfg.lam - length) * c_e)))])
        if self.cfg.nonlinear:
            flat = ad.tanh(ad.add(ad.matmul(flat, self.params["hidden_w"]), self.params["hidden_b"]))
        return self._head(flat)


def make_phi(cfg: PagaConfig, rng: np.random.Generator) -> PhiExtractor:
    cls = {"recurrent": RecurrentPhi, "summation": SummationPhi,
           "concatenation": ConcatenationPhi}[cfg.phi_kind]
    return cls(cfg, rng)


def phi_apply(phi: PhiExtractor, seq: Sequence) -> np.ndarray:
    """Gate vector (n_head,) for a single edge-feature sequence."""
    if len(seq) == 0:
        raise ContractError("empty path: self attention comes from the self gate, not phi")
    if len(seq) > phi.cfg.lam:
        raise ContractError(f"path of length {len(seq)} exceeds lam={phi.cfg.lam}")
    arr = np.asarray(seq, dtype=np.float64)[None]
    return phi(Tensor(arr)).value[0]


# --- attention -------------------------------------------------------------------

@dataclass(frozen=True)
class PathBatch:
    """Every path of a graph grouped by length: flat (u*V + v) slots and edge ids."""

    lam: int
    num_vertices: int
    by_length: dict[int, tuple[np.ndarray, np.ndarray]]

    @classmethod
    def from_indexes(cls, indexes: Sequence[PathIndex], num_vertices: int) -> "PathBatch":
        lams = {ix.lam for ix in indexes}
        if len(lams) > 1:
            raise ContractError(f"path indexes built with different lambdas {sorted(lams)}")
        lam = lams.pop() if lams else 1
        slots: dict[int, list[int]] = {}
        edges: dict[int, list[tuple[int, ...]]] = {}
        for ix in indexes:
            for v, paths in ix.entries.items():
                for p in paths:
                    slots.setdefault(len(p), []).append(ix.source * num_vertices + v)
                    edges.setdefault(len(p), []).append(p.edges)
        by_length = {l: (np.array(slots[l], dtype=np.int64), np.array(edges[l], dtype=np.int64))
                     for l in sorted(slots)}
        return cls(lam, num_vertices, by_length)

    @classmethod
    def build(cls, g: HeteroGraph, lam: int) -> "PathBatch":
        return cls.from_indexes(enumerate_all(g, lam), g.num_vertices)


def compute_psi(g: HeteroGraph, index, phi: PhiExtractor, embed: EdgeTypeEmbedding,
                cfg: PagaConfig, self_gate: Tensor | None = None) -> Tensor:
    """Attention tensor of shape (n_head, V, V).

    ``index`` is a ``PathBatch`` or a per-vertex list of ``PathIndex``.
    """
    n = g.num_vertices
    if not isinstance(index, PathBatch):
        index = PathBatch.from_indexes(index, n)
    if index.by_length and index.lam != cfg.lam:
        raise ContractError(f"path index built with lam={index.lam}, config has lam={cfg.lam}")
    if index.by_length and index.num_vertices != n:
        raise ContractError("path index belongs to a graph of a different size")
    h = cfg.n_head
    feats = embed.encode(g) if index.by_length else None
    psi = Tensor(np.zeros((n * n, h)))
    for length, (slots, edge_ids) in index.by_length.items():
        seq = ad.reshape(ad.take(feats, edge_ids.reshape(-1)), (len(slots), length, -1))
        gates = phi(seq)
        if cfg.gamma is not None:
            gates = ad.scale(gates, cfg.gamma ** length)
        psi = ad.add(psi, ad.scatter_add(gates, slots, n * n))
    if self_gate is not None:
        diag = np.arange(n) * (n + 1)
        rows = ad.take(ad.reshape(self_gate, (1, h)), np.zeros(n, dtype=np.int64))
        psi = ad.add(psi, ad.scatter_add(rows, diag, n * n))
    return ad.transpose(ad.reshape(psi, (n, n, h)), (2, 0, 1))


def paga_forward(psi, x, weight, bias=None) -> Tensor:
    """``y_h = psi_h @ x`` per head, heads concatenated then mixed by ``weight``.

    ``psi`` is (H, V, V); ``x`` is (V, C) or (B, V, C); ``weight`` is (H*C, C_y).
    """
    psi, x, weight = ad.as_tensor(psi), ad.as_tensor(x), ad.as_tensor(weight)
    squeeze = x.value.ndim == 2
    if squeeze:
        x = ad.reshape(x, (1,) + x.shape)
    h, n, n2 = psi.shape
    b, nv, c = x.shape
    if n != n2 or nv != n:
        raise ShapeError(f"paga_forward: psi {psi.shape} does not match features {x.shape}")
    if weight.shape[0] != h * c:
        raise ShapeError(f"paga_forward: combiner expects {weight.shape[0]} inputs, heads give {h * c}")
    mixed = ad.matmul(ad.reshape(psi, (h * n, n)), x)  # (B, H*V, C)
    mixed = ad.reshape(ad.transpose(ad.reshape(mixed, (b, h, n, c)), (0, 2, 1, 3)), (b, n, h * c))
    y = ad.matmul(mixed, weight)
    if bias is not None:
        y = ad.add(y, bias)
    return ad.reshape(y, y.shape[1:]) if squeeze else y


class PagaModel:
    """Single PAGA layer bound to one graph: edge encoder, phi, self gate, combiner."""

    def __init__(self, g: HeteroGraph, cfg: PagaConfig, rng: np.random.Generator,
                 *, num_types: int | None = None, paths: PathBatch | None = None):
        self.g = g
        self.cfg = cfg
        types = g.num_edge_types if num_types is None else num_types
        self.embed = EdgeTypeEmbedding(types, cfg.c_e, g.raw_edge_width, rng,
                                       use_type=cfg.use_edge_type, use_raw=cfg.use_spatial)
        self.phi = make_phi(cfg, rng)
        self.self_gate = Tensor(rng.uniform(-1.0, 1.0, size=cfg.n_head))
        self.combiner = uniform_weight(rng, cfg.n_head * cfg.c_x, cfg.c_y)
        self.combiner_b = zeros(cfg.c_y)
        self.paths = paths if paths is not None else PathBatch.build(g, cfg.lam)

    @property
    def params(self) -> dict[str, Tensor]:
        out = {f"embed/{k}": v for k, v in self.embed.params.items()}
        out.update({f"phi/{k}": v for k, v in self.phi.params.items()})
        out.update({"self_gate": self.self_gate, "combiner/weight": self.combiner,
                    "combiner/bias": self.combiner_b})
        return out

    def psi(self, g: HeteroGraph | None = None, paths: PathBatch | None = None) -> Tensor:
        if g is None:
            g, paths = self.g, self.paths
        elif paths is None:
            paths = PathBatch.build(g, self.cfg.lam)
        return compute_psi(g, paths, self.phi, self.embed, self.cfg, self.self_gate)

    def __call__(self, x, g: HeteroGraph | None = None, paths: PathBatch | None = None) -> Tensor:
        return paga_forward(self.psi(g, paths), x, self.combiner, self.combiner_b)


# --- GCN ---------------------------------------------------------------------------

def gcn_laplacian(g: HeteroGraph) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` with A the binary, symmetrized adjacency."""
    n = g.num_vertices
    a = np.zeros((n, n))
    a[g.sources, g.targets] = 1.0
    a = np.maximum(a, a.T)
    np.fill_diagonal(a, 1.0)
    d = 1.0 / np.sqrt(a.sum(axis=1))
    return d[:, None] * a * d[None, :]


@dataclass
class GcnLayer:
    weight: Tensor
    self_weight: Tensor | None = None
    bias: Tensor | None = None


def gcn_forward(lap, x, layers: Sequence[GcnLayer], activation=None) -> Tensor:
    """``h <- L h W (+ h W_self) (+ b)`` per layer; ``activation`` between layers only."""
    lap = ad.as_tensor(lap)
    h = ad.as_tensor(x)
    for k, layer in enumerate(layers):
        if h.shape[-1] != layer.weight.shape[0]:
            raise ShapeError(f"gcn layer {k}: input width {h.shape[-1]} != {layer.weight.shape[0]}")
        out = ad.matmul(lap, ad.matmul(h, layer.weight))
        if layer.self_weight is not None:
            out = ad.add(out, ad.matmul(h, layer.self_weight))
        if layer.bias is not None:
            out = ad.add(out, layer.bias)
        if activation is not None and k < len(layers) - 1:
            out = activation(out)
        h = out
    return h


class GcnModel:
    """Stack of GCN layers; ``self_weight`` adds a separate linear term for the vertex itself."""

    def __init__(self, g: HeteroGraph, widths: Sequence[int], rng: np.random.Generator,
                 *, self_weight: bool = True, bias: bool = True):
        self.lap = gcn_laplacian(g)
        self.layers = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            self.layers.append(GcnLayer(
                uniform_weight(rng, fan_in, fan_out),
                uniform_weight(rng, fan_in, fan_out) if self_weight else None,
                zeros(fan_out) if bias else None,
            ))

    @property
    def params(self) -> dict[str, Tensor]:
        out = {}
        for k, layer in enumerate(self.layers):
            out[f"gcn{k}/weight"] = layer.weight
            if layer.self_weight is not None:
                out[f"gcn{k}/self_weight"] = layer.self_weight
            if layer.bias is not None:
                out[f"gcn{k}/bias"] = layer.bias
        return out

    def __call__(self, x) -> Tensor:
        return gcn_forward(self.lap, x, self.layers)


# --- GAT ---------------------------------------------------------------------------

def gat_mask(g: HeteroGraph) -> np.ndarray:
    """Row u marks the 1-ring of u plus u itself."""
    mask = np.eye(g.num_vertices, dtype=bool)
    mask[g.sources, g.targets] = True
    return mask


@dataclass
class GatLayer:
    weight: Tensor  # (C_in, H*F)
    att_src: Tensor  # (H, F), scores the attending vertex u
    att_dst: Tensor  # (H, F), scores the attended vertex v
    bias: Tensor | None = None

    @property
    def n_head(self) -> int:
        return self.att_src.shape[0]


def gat_attention(layer: GatLayer, z: Tensor, mask: np.ndarray, head: int) -> Tensor:
    """Normalized attention (B, V, V) of one head from mapped features ``z`` (B, V, H*F)."""
    f = layer.att_src.shape[1]
    zh = ad.slice_last(z, head * f, (head + 1) * f)
    a_src = ad.reshape(ad.index(layer.att_src, head), (f, 1))
    a_dst = ad.reshape(ad.index(layer.att_dst, head), (f, 1))
    s_src = ad.matmul(zh, a_src)
    s_dst = ad.matmul(zh, a_dst)
    b, n, _ = s_src.shape
    scores = ad.outer_add(ad.reshape(s_src, (b, n)), ad.reshape(s_dst, (b, n)))
    return ad.masked_softmax(ad.leaky_relu(scores, 0.2), mask)


def gat_forward(g: HeteroGraph, x, layers: Sequence[GatLayer], activation=None) -> Tensor:
    mask = gat_mask(g)
    h = ad.as_tensor(x)
    squeeze = h.value.ndim == 2
    if squeeze:
        h = ad.reshape(h, (1,) + h.shape)
    for k, layer in enumerate(layers):
        if h.shape[-1] != layer.weight.shape[0]:
            raise ShapeError(f"gat layer {k}: input width {h.shape[-1]} != {layer.weight.shape[0]}")
        z = ad.matmul(h, layer.weight)
        f = layer.att_src.shape[1]
        heads = []
        for hd in range(layer.n_head):
            alpha = gat_attention(layer, z, mask, hd)
            heads.append(ad.matmul(alpha, ad.slice_last(z, hd * f, (hd + 1) * f)))
        out = heads[0] if len(heads) == 1 else ad.concat(heads)
        if layer.bias is not None:
            out = ad.add(out, layer.bias)
        if activation is not None and k < len(layers) - 1:
            out = activation(out)
        h = out
    return ad.reshape(h, h.shape[1:]) if squeeze else h


class GatModel:
    def __init__(self, g: HeteroGraph, widths: Sequence[int], n_head: int, rng: np.random.Generator):
        self.g = g
        self.layers = []
        fan_in = widths[0]
        for k, fan_out in enumerate(widths[1:]):
            # hidden layers concatenate heads; the output layer uses one head
            heads = n_head if k < len(widths) - 2 else 1
            self.layers.append(GatLayer(
                uniform_weight(rng, fan_in, heads * fan_out),
                Tensor(rng.uniform(-1, 1, size=(heads, fan_out)) / np.sqrt(fan_out)),
                Tensor(rng.uniform(-1, 1, size=(heads, fan_out)) / np.sqrt(fan_out)),
                zeros(heads * fan_out),
            ))
            fan_in = heads * fan_out

    @property
    def params(self) -> dict[str, Tensor]:
        out = {}
        for k, layer in enumerate(self.layers):
            out.update({f"gat{k}/weight": layer.weight, f"gat{k}/att_src": layer.att_src,
                        f"gat{k}/att_dst": layer.att_dst})
            if layer.bias is not None:
                out[f"gat{k}/bias"] = layer.bias
        return out

    def __call__(self, x) -> Tensor:
        return gat_forward(self.g, x, self.layers)

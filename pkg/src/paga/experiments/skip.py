"""The three-vertex skip-interaction task: y(a) = x(c), y(b) = x(b), y(c) = x(c).

Graph a -> b -> c.  A path-aware model can put all of a's attention on c
while leaving b untouched; a linear GCN, whose propagation operator is a
polynomial in a symmetric matrix, cannot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tape, Tensor
from ..graph import didactic_graph
from ..layers import GatModel, GcnModel, PagaConfig, PagaModel, gcn_laplacian
from ..optim import AdamState, adam_step

VERTICES = ("a", "b", "c")
MODEL_KINDS = ("paga", "gcn", "gat")


@dataclass(frozen=True)
class SkipDatasetConfig:
    n_train: int = 4500
    n_eval: int = 500
    seed: int = 0
    # x(b), x(c) ~ N(0, scale^2); x(a) is always 0
    scale: float = 1.0


@dataclass(frozen=True)
class SkipDataset:
    x_train: np.ndarray  # (n, 3, 1)
    y_train: np.ndarray
    x_eval: np.ndarray
    y_eval: np.ndarray


def target_psi() -> np.ndarray:
    return np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def skip_labels(x: np.ndarray) -> np.ndarray:
    y = np.empty_like(x)
    y[:, 0] = x[:, 2]
    y[:, 1] = x[:, 1]
    y[:, 2] = x[:, 2]
    return y


def gen_skip_dataset(cfg: SkipDatasetConfig = SkipDatasetConfig()) -> SkipDataset:
    rng = np.random.default_rng(cfg.seed)

    def draw(n):
        x = np.zeros((n, 3, 1))
        x[:, 1:, 0] = cfg.scale * rng.standard_normal((n, 2))
        return x

    xt, xe = draw(cfg.n_train), draw(cfg.n_eval)
    return SkipDataset(xt, skip_labels(xt), xe, skip_labels(xe))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    lr: float = 0.01
    batch_size: int = 128
    gcn_depth: int = 2
    n_head: int = 1
    phi_kind: str = "concatenation"
    gamma: float | None = None
    lam: int = 2
    c_e: int = 1


@dataclass
class TrialResult:
    kind: str
    seed: int
    train_loss: list[float]  # full training-set MSE after each epoch
    eval_loss: list[float]
    eval_mse: float
    vertex_mse: tuple[float, float, float]
    failed: bool = False
    # least-squares floors of the linear GCN family on this trial's data (gcn only)
    floor_train: float | None = None
    floor_eval: float | None = None

    @property
    def final_train_loss(self) -> float:
        return self.train_loss[-1] if self.train_loss else math.nan


def build_model(kind: str, cfg: TrainConfig, rng: np.random.Generator):
    g = didactic_graph()
    if kind == "paga":
        pcfg = PagaConfig(lam=cfg.lam, c_e=cfg.c_e, n_head=cfg.n_head, phi_kind=cfg.phi_kind,
                          gamma=cfg.gamma, c_x=1, c_y=1, lstm_hidden=1)
        return PagaModel(g, pcfg, rng)
    if kind == "gcn":
        # no biases: keeps the model inside the least-squares oracle's family
        return GcnModel(g, [1] * (cfg.gcn_depth + 1), rng, bias=False)
    if kind == "gat":
        return GatModel(g, [1] * (cfg.gcn_depth + 1), cfg.n_head, rng)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def _mse(model, x, y) -> tuple[float, np.ndarray]:
    pred = model(Tensor(x)).value
    per_vertex = ((pred - y) ** 2).mean(axis=(0, 2))
    return float(per_vertex.mean()), per_vertex


def train_skip(kind: str, data: SkipDataset, cfg: TrainConfig = TrainConfig(), seed: int = 0) -> TrialResult:
    """Minibatch Adam on MSE; a non-finite loss ends the trial and marks it failed."""
    rng = np.random.default_rng(seed)
    model = build_model(kind, cfg, rng)
    params = model.params
    state = AdamState(lr=cfg.lr)
    n = len(data.x_train)
    train_curve: list[float] = []
    eval_curve: list[float] = []
    failed = False
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            with Tape() as tape:
                loss = ad.mse_loss(model(Tensor(data.x_train[batch])), Tensor(data.y_train[batch]))
            if not np.isfinite(loss.value):
                failed = True
                break
            adam_step(params, tape.gradient(loss, params), state)
        if failed:
            break
        train_curve.append(_mse(model, data.x_train, data.y_train)[0])
        eval_curve.append(_mse(model, data.x_eval, data.y_eval)[0])
        if not (np.isfinite(train_curve[-1]) and np.isfinite(eval_curve[-1])):
            failed = True
            break
    eval_mse, per_vertex = _mse(model, data.x_eval, data.y_eval)
    if not np.isfinite(eval_mse):
        failed = True
    return TrialResult(kind, seed, train_curve, eval_curve, eval_mse,
                       tuple(float(v) for v in per_vertex), failed)


def linear_gcn_oracle(data: SkipDataset, depth: int, target: str = "skip", split: str = "train") -> float:
    """Least-squares floor of y over the features {L^k x : 0 <= k <= depth}.

    Coefficients are shared by all vertices, matching a linear GCN of scalar
    width whose layers may mix self and propagated terms.  ``target="laplacian"``
    swaps the labels for ``L x`` (a target inside the model class).
    """
    lap = gcn_laplacian(didactic_graph())
    if split not in ("train", "eval"):
        raise ValueError(f"unknown split {split!r}")
    x = (data.x_train if split == "train" else data.x_eval)[..., 0]
    if target == "skip":
        y = (data.y_train if split == "train" else data.y_eval)[..., 0]
    elif target == "laplacian":
        y = x @ lap.T
    else:
        raise ValueError(f"unknown oracle target {target!r}")
    feats = []
    power = np.eye(3)
    for _ in range(depth + 1):
        feats.append((x @ power.T).reshape(-1))
        power = lap @ power
    design = np.stack(feats, axis=1)
    coef = np.linalg.pinv(design) @ y.reshape(-1)
    resid = y.reshape(-1) - design @ coef
    return float(np.mean(resid ** 2))


@dataclass
class TrialSummary:
    kind: str
    num_trials: int
    num_failed: int
    mean_final_loss: float
    std_final_loss: float
    min_final_loss: float
    max_final_loss: float
    mean_eval_mse: float
    vertex_mse: tuple[float, float, float]
    mean_floor: float | None = None
    trials: list[TrialResult] = field(repr=False, default_factory=list)

    def count_below(self, threshold: float) -> int:
        return sum(1 for t in self.trials if not t.failed and t.eval_mse < threshold)


def summarize(kind: str, trials: list[TrialResult]) -> TrialSummary:
    trials = sorted(trials, key=lambda t: t.seed)
    ok = [t for t in trials if not t.failed]
    finals = np.array([t.final_train_loss for t in ok])
    evals = np.array([t.eval_mse for t in ok])
    verts = np.array([t.vertex_mse for t in ok]).reshape(-1, 3)
    floors = np.array([t.floor_train for t in ok if t.floor_train is not None])

    def stat(fn, arr):
        return float(fn(arr)) if len(arr) else math.nan

    return TrialSummary(
        kind, len(trials), len(trials) - len(ok),
        stat(np.mean, finals), stat(np.std, finals), stat(np.min, finals), stat(np.max, finals),
        stat(np.mean, evals),
        tuple(float(v) for v in verts.mean(axis=0)) if len(ok) else (math.nan,) * 3,
        stat(np.mean, floors) if len(floors) else None,
        trials,
    )


def _trial(args):
    kind, cfg, data_cfg, seed = args
    data = gen_skip_dataset(data_cfg)
    result = train_skip(kind, data, cfg, seed)
    if kind == "gcn":
        result.floor_train = linear_gcn_oracle(data, cfg.gcn_depth)
        result.floor_eval = linear_gcn_oracle(data, cfg.gcn_depth, split="eval")
    return result


def trial_seeds(n_trials: int, base_seed: int) -> list[int]:
    return [base_seed + i for i in range(n_trials)]


def run_trials(kind: str, n_trials: int = 100, base_seed: int = 0, cfg: TrainConfig = TrainConfig(),
               jobs: int = 1) -> TrialSummary:
    """Independent trials; trial ``i`` uses seed ``base_seed + i`` for both data and model."""
    work = [(kind, cfg, SkipDatasetConfig(seed=s), s) for s in trial_seeds(n_trials, base_seed)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial, work))
    else:
        results = [_trial(w) for w in work]
    return summarize(kind, results)

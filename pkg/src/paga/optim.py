"""Adam with bias correction, parameter initialization and JSON snapshots."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .autodiff import Tensor


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: AdamState) -> None:
    """Update ``params`` in place and advance ``state`` by one step."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name!r} has shape {g.shape}, parameter {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        m = state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        p.value -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)


def uniform_weight(rng: np.random.Generator, fan_in: int, fan_out: int, name: str | None = None) -> Tensor:
    s = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-s, s, size=(fan_in, fan_out)), name)


def zeros(*shape: int, name: str | None = None) -> Tensor:
    return Tensor(np.zeros(shape), name)


def snapshot(params: Mapping[str, Tensor]) -> dict:
    """``{name: {"shape": [...], "values": [...]}}`` with row-major values."""
    return {k: {"shape": list(p.shape), "values": p.values.tolist()} for k, p in sorted(params.items())}


def restore(params: Mapping[str, Tensor], snap: Mapping[str, dict]) -> None:
    for k, p in params.items():
        entry = snap[k]
        if list(entry["shape"]) != list(p.shape):
            raise ValueError(f"snapshot shape {entry['shape']} for {k!r} != {list(p.shape)}")
        p.value[...] = np.asarray(entry["values"], dtype=np.float64).reshape(p.shape)


def save_snapshot(params: Mapping[str, Tensor], path) -> None:
    Path(path).write_text(json.dumps(snapshot(params), indent=1) + "\n")


def load_snapshot(params: Mapping[str, Tensor], path) -> None:
    restore(params, json.loads(Path(path).read_text()))

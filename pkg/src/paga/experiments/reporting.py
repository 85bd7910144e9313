"""CSV exports.  Floats are written with ``repr`` so reruns give identical bytes."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

from .ablation import AblationRow
from .skip import VERTICES, TrialSummary


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def _write(path: Path, header: list[str], rows: Iterable[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_loss_curves(summary: TrialSummary, path) -> None:
    """One row per (trial, epoch): training-set loss and eval-set loss."""
    rows = ([t.seed, epoch, loss, ev]
            for t in summary.trials
            for epoch, (loss, ev) in enumerate(zip(t.train_loss, t.eval_loss), start=1))
    _write(Path(path), ["trial", "epoch", "loss", "eval_loss"], rows)


def write_trials(summary: TrialSummary, path) -> None:
    header = ["trial", "failed", "final_loss", "eval_mse"] + [f"mse_{v}" for v in VERTICES] \
        + ["floor_train", "floor_eval"]
    rows = ([t.seed, int(t.failed), t.final_train_loss, t.eval_mse, *t.vertex_mse,
             t.floor_train, t.floor_eval] for t in summary.trials)
    _write(Path(path), header, rows)


SUMMARY_HEADER = ["model", "trials", "failed", "mean_final_loss", "std_final_loss",
                  "min_final_loss", "max_final_loss", "mean_eval_mse", "mse_a", "mse_b", "mse_c",
                  "trials_eval_below_1e-3", "oracle_floor"]


def summary_row(s: TrialSummary) -> list:
    return [s.kind, s.num_trials, s.num_failed, s.mean_final_loss, s.std_final_loss,
            s.min_final_loss, s.max_final_loss, s.mean_eval_mse, *s.vertex_mse,
            s.count_below(1e-3), s.mean_floor]


def write_summary(summaries: list[TrialSummary], path) -> None:
    _write(Path(path), SUMMARY_HEADER, (summary_row(s) for s in summaries))


def comparison_text(summaries: list[TrialSummary]) -> str:
    lines = ["model  trials  mean final loss  mean eval MSE  MSE(a)     MSE(b)     MSE(c)"]
    for s in summaries:
        a, b, c = s.vertex_mse
        lines.append(f"{s.kind:<6} {s.num_trials:>6}  {s.mean_final_loss:>15.3e}  "
                     f"{s.mean_eval_mse:>13.3e}  {a:.3e}  {b:.3e}  {c:.3e}")
        if s.mean_floor is not None:
            lines.append(f"       linear GCN least-squares floor: {s.mean_floor:.4f}")
    return "\n".join(lines) + "\n"


def write_ablation(rows: list[AblationRow], path) -> None:
    _write(Path(path), ["variant", "mean", "std", "seeds"],
           ([r.variant, r.mean, r.std, len(r.errors)] for r in rows))

"""Pass/fail thresholds for the skip experiment and ablation orderings.

The CLI ``--check`` flag and the acceptance tests both go through these
functions, so the thresholds live in exactly one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .ablation import AblationRow
from .skip import TrialSummary

PAGA_EVAL_THRESHOLD = 1e-3
PAGA_MIN_FRACTION = 0.95
GCN_LOSS_RANGE = (0.02, 0.08)
GCN_VERTEX_A_RANGE = (0.05, 0.15)
GCN_FLOOR_MARGIN = 0.02
GCN_FLOOR_SLACK = 1e-6
ABLATION_STD_GAP = 2.0


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def check_paga(summary: TrialSummary) -> list[Check]:
    needed = math.ceil(PAGA_MIN_FRACTION * summary.num_trials)
    hits = summary.count_below(PAGA_EVAL_THRESHOLD)
    return [Check("paga convergence", hits >= needed,
                  f"{hits}/{summary.num_trials} trials with eval MSE < {PAGA_EVAL_THRESHOLD:g} "
                  f"(need {needed})")]


def check_gcn(summary: TrialSummary) -> list[Check]:
    lo, hi = GCN_LOSS_RANGE
    alo, ahi = GCN_VERTEX_A_RANGE
    loss = summary.mean_final_loss
    mse_a = summary.vertex_mse[0]
    floor = summary.mean_floor
    ok_trials = [t for t in summary.trials if not t.failed]
    below = [t.seed for t in ok_trials
             if t.floor_train is not None and t.final_train_loss < t.floor_train - GCN_FLOOR_SLACK
             or t.floor_eval is not None and t.eval_mse < t.floor_eval - GCN_FLOOR_SLACK]
    checks = [
        Check("gcn mean final loss", lo <= loss <= hi, f"{loss:.4f} in [{lo}, {hi}]"),
        Check("gcn mean MSE on vertex a", alo <= mse_a <= ahi, f"{mse_a:.4f} in [{alo}, {ahi}]"),
    ]
    if floor is None:
        checks.append(Check("gcn vs oracle floor", False, "no oracle floor recorded"))
    else:
        checks.append(Check("gcn vs oracle floor", loss - floor <= GCN_FLOOR_MARGIN,
                            f"mean loss {loss:.4f} - floor {floor:.4f} = {loss - floor:.4f} "
                            f"<= {GCN_FLOOR_MARGIN}"))
        checks.append(Check("gcn never below floor", not below,
                            f"{len(below)} trials below floor by > {GCN_FLOOR_SLACK:g}"))
    return checks


def pooled_std(a: AblationRow, b: AblationRow) -> float:
    return math.sqrt((a.std ** 2 + b.std ** 2) / 2.0)


def check_ablation(ablation: str, rows: list[AblationRow]) -> list[Check]:
    by = {r.variant: r for r in rows}
    if ablation == "phi_form":
        rec, summ = by["recurrent"], by["summation"]
        gap = summ.mean - rec.mean
        need = ABLATION_STD_GAP * pooled_std(rec, summ)
        return [Check("recurrent phi beats summation", gap > need,
                      f"gap {gap:.4g} > {ABLATION_STD_GAP:g} x pooled std = {need:.4g}")]
    if ablation == "capacity":
        full = by["ce=32,heads=8"]
        return [Check(f"ce=32,heads=8 beats {name}", full.mean < by[name].mean,
                      f"{full.mean:.4g} < {by[name].mean:.4g}")
                for name in ("ce=1,heads=8", "ce=32,heads=1")]
    if ablation == "edge_features":
        none = by["none"]
        others = [r for r in rows if r.variant != "none"]
        worst_other = max(r.mean for r in others)
        return [Check("no edge features is worst", none.mean > worst_other,
                      f"{none.mean:.4g} > {worst_other:.4g}")]
    raise ValueError(f"unknown ablation {ablation!r}")

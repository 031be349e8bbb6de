"""Frame-level accuracy reporting.

Two views of the same confusion data: a global accuracy over every frame
pooled across videos, and per-stage accuracies (recall of each gold stage).
Stages that never occur in the gold labels are left out of the per-stage
table rather than reported as zero. The global number is the count-weighted
mean of the per-stage numbers, a useful cross-check when stage durations are
as skewed as they are here.
"""

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class EvalReport:
    global_accuracy: float
    per_stage: dict
    mean_per_stage: float
    counts: dict

    def to_dict(self):
        return {
            "global": self.global_accuracy,
            "per_stage": {str(k): v for k, v in self.per_stage.items()},
            "mean_per_stage": self.mean_per_stage,
            "counts": {str(k): v for k, v in self.counts.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc):
        return cls(
            global_accuracy=float(doc["global"]),
            per_stage={int(k): float(v) for k, v in doc["per_stage"].items()},
            mean_per_stage=float(doc["mean_per_stage"]),
            counts={int(k): int(v) for k, v in doc["counts"].items()},
        )


def evaluate(predictions, golds):
    """Score predicted label sequences against gold ones.

    Both arguments map video id to a 1-based label sequence. Ids must match
    exactly and lengths must agree per video.
    """
    missing = sorted(set(golds) - set(predictions))
    if missing:
        raise ValueError(f"no prediction for video {missing[0]}")
    extra = sorted(set(predictions) - set(golds))
    if extra:
        raise ValueError(f"prediction for unknown video {extra[0]}")
    if not golds:
        raise ValueError("nothing to evaluate")
    hits, totals = {}, {}
    for vid, gold in golds.items():
        gold = np.asarray(gold, dtype=np.int64)
        pred = np.asarray(predictions[vid], dtype=np.int64)
        if pred.shape != gold.shape:
            raise ValueError(
                f"video {vid}: {pred.shape[0]} predictions for {gold.shape[0]} frames"
            )
        for stage in np.unique(gold):
            at = gold == stage
            hits[stage] = hits.get(stage, 0) + int((pred[at] == stage).sum())
            totals[stage] = totals.get(stage, 0) + int(at.sum())
    stages = sorted(totals)
    per_stage = {int(s): hits[s] / totals[s] for s in stages}
    counts = {int(s): totals[s] for s in stages}
    total = sum(totals.values())
    return EvalReport(
        global_accuracy=sum(hits.values()) / total,
        per_stage=per_stage,
        mean_per_stage=float(np.mean(list(per_stage.values()))),
        counts=counts,
    )


def aggregate_seeds(reports):
    """Mean and sample std (ddof=1) of each metric across repeated runs.

    Returns {"global": (mean, std), "mean_per_stage": (mean, std),
    "per_stage": {stage: (mean, std)}}. A single report gets std 0. Stages
    are aggregated over the reports that include them.
    """
    if not reports:
        raise ValueError("no reports to aggregate")

    def stat(values):
        values = np.asarray(values, dtype=np.float64)
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        return float(values.mean()), std

    stages = sorted({s for r in reports for s in r.per_stage})
    return {
        "global": stat([r.global_accuracy for r in reports]),
        "mean_per_stage": stat([r.mean_per_stage for r in reports]),
        "per_stage": {
            s: stat([r.per_stage[s] for r in reports if s in r.per_stage])
            for s in stages
        },
    }


def format_report(report, title="results"):
    """Plain-text table of one report, percentages without deviations."""
    stages = sorted(report.per_stage)
    header = ["Global", "Per-Stage"] + [str(s) for s in stages]
    row = [f"{100 * report.global_accuracy:.1f}", f"{100 * report.mean_per_stage:.1f}"]
    row += [f"{100 * report.per_stage[s]:.1f}" for s in stages]
    widths = [max(len(h), len(v)) for h, v in zip(header, row)]
    lines = [
        title,
        "  ".join(h.rjust(w) for h, w in zip(header, widths)),
        "  ".join(v.rjust(w) for v, w in zip(row, widths)),
    ]
    return "\n".join(lines) + "\n"


def format_table(aggregated, title="results"):
    """Plain-text table of aggregated scores, percentages as mean±std."""

    def cell(pair):
        mean, std = pair
        return f"{100 * mean:.1f}±{100 * std:.1f}"

    stages = sorted(aggregated["per_stage"])
    header = ["Global", "Per-Stage"] + [str(s) for s in stages]
    row = [cell(aggregated["global"]), cell(aggregated["mean_per_stage"])]
    row += [cell(aggregated["per_stage"][s]) for s in stages]
    widths = [max(len(h), len(v)) for h, v in zip(header, row)]
    lines = [
        title,
        "  ".join(h.rjust(w) for h, w in zip(header, widths)),
        "  ".join(v.rjust(w) for v, w in zip(row, widths)),
    ]
    return "\n".join(lines) + "\n"

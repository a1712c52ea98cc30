"""Detection metrics, ROC/AUC and the model memory estimate.

Zero-division conventions are explicit: an undefined precision or recall
is reported as 0.0 and the condition is recorded in the report flags.
Macro F1 averages the anomaly-class and normal-class F1 scores; when the
truth vector contains a single class the macro value falls back to the
anomaly-class F1 and a flag records it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import DataError
from .gon import TrainConfig
from .neural import Discriminator

BYTES_PER_FLOAT = 8
REPORT_CSV_HEADER = "dataset,p,r,f1,f1_macro,auc,mem_bytes,f1_per_gb,train_s,test_s"


@dataclass
class ClassificationMetrics:
    precision: float
    recall: float
    f1_anomaly: float
    f1_macro: float
    tp: int
    fp: int
    tn: int
    fn: int
    flags: tuple[str, ...] = ()


def _f1(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if (p + r) > 0.0 else 0.0


def confusion_metrics(pred, truth) -> ClassificationMetrics:
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise DataError(f"prediction/truth shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise DataError("empty prediction vector")

    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    tn = int(np.sum(~pred & ~truth))
    fn = int(np.sum(~pred & truth))

    flags = []
    if tp + fp == 0:
        flags.append("precision-undefined")
        precision = 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        flags.append("recall-undefined")
        recall = 0.0
    else:
        recall = tp / (tp + fn)
    f1_anomaly = _f1(precision, recall)

    if truth.all() or not truth.any():
        warnings.warn(
            "truth contains a single class; macro F1 falls back to the "
            "anomaly-class F1",
            stacklevel=2,
        )
        flags.append("single-class-truth")
        f1_macro = f1_anomaly
    else:
        p_n = tn / (tn + fn) if (tn + fn) > 0 else 0.0
        r_n = tn / (tn + fp) if (tn + fp) > 0 else 0.0
        f1_macro = 0.5 * (f1_anomaly + _f1(p_n, r_n))

    return ClassificationMetrics(
        precision, recall, f1_anomaly, f1_macro, tp, fp, tn, fn, tuple(flags)
    )


def roc_auc(scores, truth) -> float:
    """Probability that a random anomaly outscores a random normal point,
    ties counted one half (the rank-statistic formulation)."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=bool)
    if scores.shape != truth.shape or scores.ndim != 1:
        raise DataError("scores/truth shape mismatch")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC/AUC needs both classes present in the truth vector")

    # tie-averaged ranks (1-based)
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    cum = np.cumsum(counts)
    avg_rank = cum - (counts - 1) / 2.0
    ranks = avg_rank[inverse]
    rank_sum_pos = float(ranks[truth].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def param_count(layer_sizes) -> int:
    return backend.param_count(layer_sizes)


def gan_mirror_param_count(layer_sizes) -> int:
    """Parameter count of the matched two-network GAN: the same
    discriminator plus a generator with the mirrored layer plan."""
    sizes = tuple(layer_sizes)
    return param_count(sizes) + param_count(sizes[::-1])


def memory_estimate(disc: Discriminator, train_config: TrainConfig) -> int:
    """Deterministic working-set estimate in bytes:

        8 * (params + 2*params Adam moments
             + batch * 2 * sum(hidden and output widths)   # acts + pre-acts
             + batch * input_dim)                          # input batch
    """
    sizes = disc.layer_sizes
    p = param_count(sizes)
    m = train_config.batch_size
    act_footprint = m * 2 * sum(sizes[1:])
    input_footprint = m * sizes[0]
    return BYTES_PER_FLOAT * (p + 2 * p + act_footprint + input_footprint)


@dataclass
class DetectionReport:
    dataset: str
    precision: float
    recall: float
    f1_anomaly: float
    f1_macro: float
    roc_auc: float
    tp: int
    fp: int
    tn: int
    fn: int
    memory_bytes: int
    train_seconds: float
    test_seconds: float
    f1_per_gb: float = field(init=False)
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        self.f1_per_gb = self.f1_macro / (self.memory_bytes / 2**30)


def build_report(
    dataset: str,
    metrics: ClassificationMetrics,
    auc: float,
    memory_bytes: int,
    train_seconds: float,
    test_seconds: float,
    extra_flags: tuple[str, ...] = (),
) -> DetectionReport:
    return DetectionReport(
        dataset=dataset,
        precision=metrics.precision,
        recall=metrics.recall,
        f1_anomaly=metrics.f1_anomaly,
        f1_macro=metrics.f1_macro,
        roc_auc=auc,
        tp=metrics.tp,
        fp=metrics.fp,
        tn=metrics.tn,
        fn=metrics.fn,
        memory_bytes=memory_bytes,
        train_seconds=train_seconds,
        test_seconds=test_seconds,
        flags=tuple(metrics.flags) + tuple(extra_flags),
    )


def report_text(report: DetectionReport) -> str:
    """Flat key=value block, one field per line."""
    lines = [
        f"dataset={report.dataset}",
        f"precision={report.precision!r}",
        f"recall={report.recall!r}",
        f"f1_anomaly={report.f1_anomaly!r}",
        f"f1_macro={report.f1_macro!r}",
        f"roc_auc={report.roc_auc!r}",
        f"tp={report.tp}",
        f"fp={report.fp}",
        f"tn={report.tn}",
        f"fn={report.fn}",
        f"memory_bytes={report.memory_bytes}",
        f"f1_per_gb={report.f1_per_gb!r}",
        f"train_seconds={report.train_seconds!r}",
        f"test_seconds={report.test_seconds!r}",
        f"flags={','.join(report.flags)}",
    ]
    return "\n".join(lines) + "\n"


def report_csv(report: DetectionReport) -> str:
    """Header plus one data row, fixed column order."""
    row = ",".join(
        [
            report.dataset,
            repr(report.precision),
            repr(report.recall),
            repr(report.f1_anomaly),
            repr(report.f1_macro),
            repr(report.roc_auc),
            str(report.memory_bytes),
            repr(report.f1_per_gb),
            repr(report.train_seconds),
            repr(report.test_seconds),
        ]
    )
    return REPORT_CSV_HEADER + "\n" + row + "\n"

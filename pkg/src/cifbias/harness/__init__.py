"""Metrics, experiment orchestration, and the command-line interface."""

from cifbias.harness.metrics import (EvalReport, align, bcer, bcer_counts, cer,
                                     score_split, span_union)

__all__ = [
    "EvalReport",
    "align",
    "bcer",
    "bcer_counts",
    "cer",
    "score_split",
    "span_union",
]

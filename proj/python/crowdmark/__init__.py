"""Crowd damage-mark aggregation, footprint extraction and detection metrics.

Thin wrapper over the C++ core. Label matrices are integer arrays with -1 for
unseen cells and 0..3 for empty, minor, significant and catastrophic.
"""

from ._crowdmark import (
    LABELS,
    DomainError,
    Error,
    InvalidParameter,
    IoError,
    ValidationError,
    build_matrix,
    classification_f1,
    coco_ap,
    dawid_skene_em,
    digamma,
    extract_footprints,
    ibcc_vb,
    iou,
    majority_vote,
    run_cli,
    simulate,
    voc_metrics,
)

__all__ = [
    "LABELS",
    "DomainError",
    "Error",
    "InvalidParameter",
    "IoError",
    "ValidationError",
    "build_matrix",
    "classification_f1",
    "coco_ap",
    "dawid_skene_em",
    "digamma",
    "extract_footprints",
    "ibcc_vb",
    "iou",
    "majority_vote",
    "run_cli",
    "simulate",
    "voc_metrics",
]

__version__ = "0.1.0"

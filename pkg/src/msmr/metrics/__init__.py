from .pose import (
    Alignment,
    AlignmentError,
    EvalReport,
    aligned,
    aligned_f_score,
    evaluate_sample,
    f_score,
    mean_error_mm,
    pa_mpjpe,
    pa_mpvpe,
    pck_auc,
    pck_thresholds,
    procrustes_align,
)
from .visibility import (
    BUCKETS,
    BucketRow,
    UndefinedVisibilityError,
    bucket_of,
    bucket_report,
    format_report,
    visibility_ratio,
)

__all__ = [
    "BUCKETS",
    "Alignment",
    "AlignmentError",
    "BucketRow",
    "EvalReport",
    "UndefinedVisibilityError",
    "aligned",
    "aligned_f_score",
    "bucket_of",
    "bucket_report",
    "evaluate_sample",
    "f_score",
    "format_report",
    "mean_error_mm",
    "pa_mpjpe",
    "pa_mpvpe",
    "pck_auc",
    "pck_thresholds",
    "procrustes_align",
    "visibility_ratio",
]

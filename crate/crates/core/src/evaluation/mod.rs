//! Loop-closure scoring against ground-truth poses: confusion counts,
//! precision/recall, ROC/AUC and curve files.
//!
//! Zero-denominator conventions: precision is 1 when nothing was accepted,
//! recall is 0 when there is nothing to find.

mod emit;
mod metrics;

pub use emit::{emit_curves, svg_polyline, Curve, CurvePoints, SummaryRecord};
pub use metrics::{
    classify, pr_curve, DEFAULT_D_THRESH, precision_recall, recall_at_full_precision, roc_auc, roc_curve, ConfusionCounts, GroundTruth,
    PrPoint, RocPoint,
};

//! Per-class metrics, per-jujube grading and latency benchmarking.

mod bench;
mod grade;
mod metrics;
mod predict;

pub use bench::{
    benchmark, benchmark_with, budget_verdict, BenchReport, BUDGET_MS_PER_IMAGE, MIN_ITERATIONS,
    MIN_WARMUP,
};
pub use grade::{
    aggregate, grade_all, grade_jujube, jujube_accuracy, severity_argmax, verdicts_csv,
    AggregationRule, JujubeVerdict,
};
pub use metrics::ConfusionMatrix;
pub use predict::{
    argmax, evaluate, predict_classes, predict_logits, predict_probs, EvalReport, EVAL_BATCH,
};

//! Hypothesis tests and violation criteria.

mod criteria;
mod intersection;
mod normal;
mod wilcoxon;

use thiserror::Error;

use crate::metrics::MetricError;

pub use criteria::{
    check_alpha, effect_alternative, htc, hvc, pvc_verdicts, wvc, Criterion, HtcOutcome,
    PvcOutcome, Verdict, HTC_REL_TOL,
};
pub use intersection::{intersection_rate, intersection_rate_in, traverse_segment};
pub use normal::{
    mean_std, normal_cdf, normal_sf, z_test, z_test_with, Alternative, SourceBaseline,
    ZTestOptions, ZTestOutcome,
};
pub use wilcoxon::{midranks, wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_MAX_N};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("samples have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty sample")]
    Empty,
    #[error("sample contains non-finite values")]
    NonFinite,
    #[error("need at least 2 source runs, got {0}")]
    TooFewRuns(usize),
    #[error("region of interest is empty")]
    EmptyRoi,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

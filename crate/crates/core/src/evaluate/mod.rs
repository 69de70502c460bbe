//! Point estimates, Monte Carlo metrics, decoding accuracy, probability-scale
//! heterogeneity and posterior predictive checks.

mod decoding;
mod estimate;
mod metrics;
mod ppc;

pub use decoding::{
    adhoc_tpm_variance, decoding_metrics, decoding_metrics_per_individual, ConfusionMatrix, DecodingMetrics, F1Average,
};
pub use estimate::{
    align_to_truth, individual_estimates, map_estimate, map_iteration, median, quantile_sorted, reported_scalars,
    truth_scalars, EstimateSummary, Estimator,
};
pub use metrics::{mc_metrics, McReport, ParamMetrics};
pub use ppc::{posterior_predictive, summary_statistics, PpcReport, SeriesPpc, DEFAULT_R_REP, STATISTICS};

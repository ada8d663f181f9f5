//! Bias-aware mixture fitting: entropic risk matching and block-maxima tail
//! matching, plus the one-dimensional Wasserstein distance they rely on.

mod evt;
mod risk_match;
mod wasserstein;

pub use evt::{fit_gmm_evt, fit_gmm_evt_blocks, EvtFit, EVT_STD_FLOOR};
pub use risk_match::{
    default_bins, fit_gmm_risk_match, matching_objective, MatchFit, MatchParams, RiskMatchConfig,
    StepDecay, TraceRow,
};
pub use wasserstein::{bin_risks, w2_1d, w2_1d_grad, RiskDistribution};

//! Estimation and hypothesis testing for the Monte Carlo experiments.

mod hypothesis;
mod interval;
mod survival;
mod uniformity;

pub use hypothesis::{
    chi_square_gof, chi_square_two_sample, dominance_test, equivalence_test, ks_uniform, kolmogorov_quantile,
    CappedSample, StatsError, TestReport, Verdict,
};
pub use interval::wilson_interval;
pub use survival::{
    bracket, contradicts, estimate_survival, monotonicity_violations, sweep, Bracket, Process, SurvivalPoint,
    SweepResult,
};
pub use uniformity::{reconstruct, uniformity_test, Reconstruction, UniformityResult};

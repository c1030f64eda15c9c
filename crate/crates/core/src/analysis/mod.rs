//! Parameter algebra for `R(g) = λ/g²` and the statistics engine used by
//! every law check.

mod params;
mod stats;
mod subordinator;

pub use params::{lambda_params, lamperti_exponent, lamperti_root, LambdaParams, LampertiRoot, Regime};
pub use stats::{
    ks_critical, ks_critical_two_sample, ks_distance, ks_two_sample, mean, mean_stderr, median,
    pearson, quantile_sorted, tail_exponent_fit, EmpiricalSample, SampleMeta, TailFit,
};
pub use subordinator::{subordinator_scaling_check, SubordinatorReport};

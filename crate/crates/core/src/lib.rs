//! Spinlabor statistics for information erasure with a spin reservoir.
//!
//! A one-bit spin memory is erased by repeatedly coupling it to fresh
//! ancilla spins through CNOT operations and letting the memory-ancilla
//! block equilibrate with a polarized spin reservoir. Each CNOT costs one
//! quantum of angular momentum (spinlabor) when the memory is up, so the
//! total cost is a discrete random variable. This crate computes its exact
//! distribution, the exponentiated-average equality it satisfies, bounds on
//! the probability of undercutting the `ln2/g` cost bound, and a Monte Carlo
//! simulator that checks all of it independently.
//!
//! The exact routines are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which every tolerance in the test suite assumes.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distribution;
pub mod error;
pub mod fluctuation;
pub mod montecarlo;
pub mod scalar;
pub mod spin;

pub use distribution::{
    bernoulli_increments, closed_form_full_half, closed_form_pm, pmf_after_m_cycles,
    pmf_after_m_cycles_with, pmf_exp_average, pmf_full_erasure, Cycles, Recurrence,
};
pub use error::{Error, Result};
pub use fluctuation::{
    bound_a, bound_b, decay_limit_study, decay_trend, jarzynski_lhs, jarzynski_rhs,
    partial_exp_averages, ratio_term, semi_analytic_fit, violation_curve, violation_probability,
    DecayRow, DecayTrend,
};
pub use montecarlo::{
    ledger_check, sample_reservoir_up_count, simulate_ensemble, simulate_ensemble_with,
    simulate_trajectory, EnsembleSummary, LedgerReport, StopRule, TrajectoryRecord,
};
pub use scalar::Scalar;
pub use spin::{
    alpha_from_gamma, gamma_from_alpha, mean_spinlabor, q_up, spintherm_from_spinlabor,
    variance_spinlabor, vb_bound, FirstLawLedger,
};

pub type ErasureParams = spin::ErasureParams<f64>;
pub type SpinlaborPmf = distribution::SpinlaborPmf<f64>;
pub type ViolationCurve = fluctuation::ViolationCurve<f64>;
pub type SemiAnalyticFit = fluctuation::SemiAnalyticFit<f64>;

pub type ErasureParamsF32 = spin::ErasureParams<f32>;
pub type SpinlaborPmfF32 = distribution::SpinlaborPmf<f32>;

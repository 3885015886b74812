//! Exact spinlabor probability mass functions.
//!
//! Each CNOT costs one quantum if the memory is up and nothing otherwise, and
//! equilibration decorrelates successive cycles. The total cost after `m`
//! cycles is therefore a sum of independent Bernoulli increments
//! `[p, q_up(1), ..., q_up(m-1)]`, i.e. a Poisson-binomial law, which is
//! built here by repeated two-point convolution.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;
use crate::spin::{self, geometric_tail, q_up_unchecked, ErasureParams, DEFAULT_TAIL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cycles {
    Finite(usize),
    /// Full erasure, truncated after `cycles` CNOTs by the geometric tail rule.
    Converged { cycles: usize },
}

/// Which cycle probability advances the cost recurrence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Recurrence {
    /// `P_{m+1}(n) = (1 - q_up(m)) P_m(n) + q_up(m) P_m(n-1)`.
    #[default]
    Corrected,
    /// The index-shifted step using `q_up(m+1)`. Kept for comparison only; it
    /// does not reproduce the closed form or the mean cost.
    Printed,
}

/// Probability of a total cost of `q` quanta, `q = 0, 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinlaborPmf<T> {
    g: T,
    p_init: T,
    cycles: Cycles,
    probs: Vec<T>,
    tail_bound: T,
}

impl<T: Scalar> SpinlaborPmf<T> {
    /// Wraps an arbitrary mass function, e.g. an empirical one.
    pub fn from_probs(g: T, p_init: T, cycles: Cycles, probs: Vec<T>, tail_bound: T) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Precondition("empty probability vector".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !(**p >= T::zero())) {
            return Err(domain("probability", bad.as_f64(), ">= 0"));
        }
        Ok(Self {
            g,
            p_init,
            cycles,
            probs,
            tail_bound,
        })
    }

    pub fn g(&self) -> T {
        self.g
    }

    pub fn p_init(&self) -> T {
        self.p_init
    }

    pub fn cycles(&self) -> Cycles {
        self.cycles
    }

    pub fn is_converged(&self) -> bool {
        matches!(self.cycles, Cycles::Converged { .. })
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    /// Probability of cost `q`; zero outside the stored support.
    pub fn prob(&self, q: usize) -> T {
        self.probs.get(q).copied().unwrap_or_else(T::zero)
    }

    pub fn tail_bound(&self) -> T {
        self.tail_bound
    }

    pub fn total(&self) -> T {
        self.probs.iter().fold(T::zero(), |acc, &p| acc + p)
    }

    pub fn mean(&self) -> T {
        self.probs
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (q, &p)| acc + T::from_count(q) * p)
    }

    pub fn variance(&self) -> T {
        let mean = self.mean();
        self.probs.iter().enumerate().fold(T::zero(), |acc, (q, &p)| {
            let d = T::from_count(q) - mean;
            acc + d * d * p
        })
    }

    /// Checks non-negativity and `Σ ∈ [1 - tail_bound, 1 + 1e-12]`.
    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.probs.iter().find(|p| !(**p >= T::zero())) {
            return Err(Error::Precondition(format!("negative probability {bad}")));
        }
        let total = self.total();
        let slack = T::lit(1e-12);
        if total > T::one() + slack || total < T::one() - self.tail_bound - slack {
            return Err(Error::Precondition(format!(
                "mass {total} outside [1 - {}, 1 + 1e-12]",
                self.tail_bound
            )));
        }
        Ok(())
    }
}

/// Independent per-CNOT cost probabilities for `m` cycles: `[p, q_up(1), ..., q_up(m-1)]`.
pub fn bernoulli_increments<T: Scalar>(params: &ErasureParams<T>, m: usize) -> Result<Vec<T>> {
    increments(params, m, Recurrence::Corrected)
}

fn increments<T: Scalar>(params: &ErasureParams<T>, m: usize, variant: Recurrence) -> Result<Vec<T>> {
    if m < 1 {
        return Err(domain("m", m as f64, ">= 1"));
    }
    let shift = match variant {
        Recurrence::Corrected => 0,
        Recurrence::Printed => 1,
    };
    let g = params.g();
    Ok(std::iter::once(params.p_init())
        .chain((1..m).map(|k| q_up_unchecked(k + shift, g)))
        .collect())
}

/// Poisson-binomial mass function of a sum of independent Bernoulli variables.
pub fn convolve_bernoulli<T: Scalar>(increments: &[T]) -> Vec<T> {
    let mut probs = Vec::with_capacity(increments.len() + 1);
    probs.push(T::one());
    for &x in increments {
        let stay = T::one() - x;
        probs.push(T::zero());
        for n in (1..probs.len()).rev() {
            probs[n] = stay * probs[n] + x * probs[n - 1];
        }
        probs[0] = stay * probs[0];
    }
    probs
}

pub fn pmf_after_m_cycles<T: Scalar>(params: &ErasureParams<T>, m: usize) -> Result<SpinlaborPmf<T>> {
    pmf_after_m_cycles_with(params, m, Recurrence::Corrected)
}

pub fn pmf_after_m_cycles_with<T: Scalar>(
    params: &ErasureParams<T>,
    m: usize,
    variant: Recurrence,
) -> Result<SpinlaborPmf<T>> {
    let incs = increments(params, m, variant)?;
    Ok(SpinlaborPmf {
        g: params.g(),
        p_init: params.p_init(),
        cycles: Cycles::Finite(m),
        probs: convolve_bernoulli(&incs),
        tail_bound: T::zero(),
    })
}

/// Full-erasure spinlabor law.
///
/// Runs the recurrence through cycle `m* + 1`, where `m*` is the tail-rule
/// cutoff, then drops trailing entries below `tail_tol * 1e-2`. The reported
/// `tail_bound` covers both the analytic tail and the dropped mass.
pub fn pmf_full_erasure<T: Scalar>(params: &ErasureParams<T>) -> Result<SpinlaborPmf<T>> {
    let cutoff = params.cutoff()?;
    let cycles = cutoff + 1;
    let mut probs = convolve_bernoulli(&increments(params, cycles, Recurrence::Corrected)?);
    let floor = params.tail_tol() * T::lit(1e-2);
    let mut dropped = T::zero();
    while probs.len() > 1 && probs[probs.len() - 1] < floor {
        dropped = dropped + probs.pop().unwrap_or_else(T::zero);
    }
    Ok(SpinlaborPmf {
        g: params.g(),
        p_init: params.p_init(),
        cycles: Cycles::Converged { cycles },
        probs,
        tail_bound: geometric_tail(params.g(), cutoff) + dropped,
    })
}

/// `1 - r^k` for `r = e^(-g)`.
fn one_minus_rpow<T: Scalar>(g: T, k: usize) -> T {
    -(-(T::from_count(k)) * g).exp_m1()
}

/// Closed-form `P_m(q)` for general initial probability `p`.
///
/// The `q >= 1` branch is factored so the vanishing `r^(q+1) - r^(m+1)` at
/// `q = m` cancels analytically:
///
/// `P_m(q) = Π_{j<q} (r^(j+1) - r^(m+1))/(1 - r^j) · [(1-p)(r^(q+1) - r^(m+1)) + p(1 - r^q)]/(1 - r^q) / Π_{k=2}^m (1 + r^k)`
///
/// and `P_m(0) = (1-p) / Π_{k=2}^m (1 + r^k)`.
pub fn closed_form_pm<T: Scalar>(params: &ErasureParams<T>, m: usize, q: usize) -> Result<T> {
    params.require_converging()?;
    if m < 1 {
        return Err(domain("m", m as f64, ">= 1"));
    }
    if q > m {
        return Ok(T::zero());
    }
    let g = params.g();
    let p = params.p_init();
    let rpow = |k: usize| (-(T::from_count(k)) * g).exp();
    let norm = (2..=m).fold(T::zero(), |acc, k| acc + rpow(k).ln_1p());

    if q == 0 {
        return Ok((T::one() - p) * (-norm).exp());
    }
    // r^(j+1) - r^(m+1) = r^(j+1) (1 - r^(m-j))
    let gap = |j: usize| rpow(j + 1) * one_minus_rpow(g, m - j);
    let log_prefix = (1..q).fold(T::zero(), |acc, j| {
        acc + gap(j).ln() - one_minus_rpow(g, j).ln()
    });
    let last = ((T::one() - p) * gap(q) + p * one_minus_rpow(g, q)) / one_minus_rpow(g, q);
    Ok((log_prefix - norm).exp() * last)
}

/// `ln Π_{k>=2} (1 + r^k)`, truncated by the geometric tail rule.
fn log_infinite_product<T: Scalar>(g: T, tail_tol: T) -> Result<T> {
    let cutoff = spin::tail_cutoff(g, tail_tol)?;
    Ok((2..=cutoff + 1).fold(T::zero(), |acc, k| {
        acc + (-(T::from_count(k)) * g).exp().ln_1p()
    }))
}

/// Closed-form full-erasure `P_∞(q)` at `p = 1/2`.
///
/// `P_∞(0) = 1/(2Π)` and `P_∞(q) = Π_{j=1}^q r^j/(1 - r^j) · (1 - r^q(1-r))/(2r Π)`
/// with `Π = Π_{k>=2}(1 + r^k)`; the factor 1/2 makes the law sum to one.
pub fn closed_form_full_half<T: Scalar>(g: T, q: usize) -> Result<T> {
    if !(g > T::zero()) {
        return Err(domain("g", g.as_f64(), "> 0"));
    }
    let log_norm = log_infinite_product(g, T::lit(DEFAULT_TAIL_TOL))? + T::LN_2();
    if q == 0 {
        return Ok((-log_norm).exp());
    }
    let log_terms = (1..=q).fold(T::zero(), |acc, j| {
        acc - T::from_count(j) * g - one_minus_rpow(g, j).ln()
    });
    let r = (-g).exp();
    let rq = (-(T::from_count(q)) * g).exp();
    let tail_factor = (T::one() - rq * (T::one() - r)) / r;
    Ok((log_terms - log_norm).exp() * tail_factor)
}

/// `Σ_q P(q) e^(-g q)`.
pub fn pmf_exp_average<T: Scalar>(pmf: &SpinlaborPmf<T>, g: T) -> T {
    pmf.probs()
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (q, &p)| acc + p * (-(T::from_count(q)) * g).exp())
}

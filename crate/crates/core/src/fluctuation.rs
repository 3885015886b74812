//! Fluctuations of the erasure cost below the `ln2/g` bound.
//!
//! Covers the exponentiated-spinlabor equality, the probability of violating
//! the bound by `ε`, its two exponential bounds `A e^(-gε)` and `B e^(-gε)`,
//! and the semi-analytic fit `C e^(-aε)` at the special inverse temperatures
//! `g = ln2/b`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{pmf_exp_average, pmf_full_erasure, SpinlaborPmf};
use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;
use crate::spin::ErasureParams;

/// Slack added to `ln2/g - ε` so integer boundaries at `g = ln2/b` are inclusive.
pub const BOUNDARY_SLACK: f64 = 1e-12;

/// Default ε resolution in quanta.
pub const DEFAULT_EPS_STEP: f64 = 0.1;

/// `(1 + e^(-g)) / (2 (1 + e^(-2g)))`.
pub fn jarzynski_rhs<T: Scalar>(g: T) -> T {
    let r = (-g).exp();
    (T::one() + r) / (T::lit(2.0) * (T::one() + r * r))
}

fn require_half<T: Scalar>(p: T) -> Result<()> {
    if (p - T::lit(0.5)).abs() > T::epsilon() {
        return Err(Error::Precondition(format!("requires p_init = 1/2, got {p}")));
    }
    Ok(())
}

fn require_converged<T: Scalar>(pmf: &SpinlaborPmf<T>) -> Result<()> {
    if !pmf.is_converged() {
        return Err(Error::Precondition(
            "requires a converged full-erasure distribution".into(),
        ));
    }
    Ok(())
}

/// `<e^(-g L_s)>` over a converged full-erasure law with `p_init = 1/2`.
pub fn jarzynski_lhs<T: Scalar>(pmf: &SpinlaborPmf<T>) -> Result<T> {
    require_converged(pmf)?;
    require_half(pmf.p_init())?;
    Ok(pmf_exp_average(pmf, pmf.g()))
}

/// Exponential averages of the first CNOT and of the remaining cycles.
///
/// The first is `(1 - p) + p r`; the second is the product of the per-cycle
/// factors `(1 - q_up(m)) + q_up(m) r`, which telescopes to `1/(1 + r^2)`.
pub fn partial_exp_averages<T: Scalar>(params: &ErasureParams<T>) -> Result<(T, T)> {
    require_half(params.p_init())?;
    let r = params.r();
    let p = params.p_init();
    let first = (T::one() - p) + p * r;
    let rest = crate::spin::converged_increments(params)?
        .into_iter()
        .fold(T::one(), |acc, q| acc * ((T::one() - q) + q * r));
    Ok((first, rest))
}

/// `A = (1 + e^(-g)) / (1 + e^(-2g))`, twice the exponentiated average.
pub fn bound_a<T: Scalar>(g: T) -> Result<T> {
    if !(g > T::zero()) {
        return Err(domain("g", g.as_f64(), "> 0"));
    }
    Ok(T::lit(2.0) * jarzynski_rhs(g))
}

fn violation_threshold<T: Scalar>(g: T, epsilon: T) -> T {
    T::LN_2() / g - epsilon + T::lit(BOUNDARY_SLACK)
}

/// `B = 2 Σ_{q <= ln2/g} P(q) e^(-g q)`.
pub fn bound_b<T: Scalar>(pmf: &SpinlaborPmf<T>) -> Result<T> {
    require_converged(pmf)?;
    let g = pmf.g();
    let limit = violation_threshold(g, T::zero());
    Ok(pmf
        .probs()
        .iter()
        .enumerate()
        .take_while(|(q, _)| T::from_count(*q) <= limit)
        .fold(T::zero(), |acc, (q, &p)| acc + p * (-(T::from_count(q)) * g).exp())
        * T::lit(2.0))
}

/// `Pr(L_s <= ln2/g - ε)`.
pub fn violation_probability<T: Scalar>(pmf: &SpinlaborPmf<T>, epsilon: T) -> Result<T> {
    require_converged(pmf)?;
    if !(epsilon >= T::zero()) {
        return Err(domain("epsilon", epsilon.as_f64(), ">= 0"));
    }
    let limit = violation_threshold(pmf.g(), epsilon);
    Ok(pmf
        .probs()
        .iter()
        .enumerate()
        .take_while(|(q, _)| T::from_count(*q) <= limit)
        .fold(T::zero(), |acc, (_, &p)| acc + p))
}

/// Returns `b` when `g = ln2/b` for a positive integer `b`.
pub fn special_b<T: Scalar>(g: T) -> Option<u32> {
    if !(g > T::zero()) {
        return None;
    }
    let b = T::LN_2() / g;
    let rounded = b.round();
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) * rounded.max(T::one());
    if rounded >= T::one() && (b - rounded).abs() <= tol {
        rounded.to_u32()
    } else {
        None
    }
}

/// Exponential `C e^(-aε)` matched to the violation probability at `ε = 0` and `ε = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiAnalyticFit<T> {
    pub b: u32,
    pub g: T,
    pub amplitude_c: T,
    pub decay_a: T,
    /// `Pr(0)/P_∞(b)` from the distribution.
    pub ratio_from_pmf: T,
    /// The same ratio from the closed-form ratio products.
    pub ratio_from_terms: T,
}

impl<T: Scalar> SemiAnalyticFit<T> {
    pub fn eval(&self, epsilon: T) -> T {
        self.amplitude_c * (-self.decay_a * epsilon).exp()
    }

    /// `C e^(-√g ε)`, the limiting-rate form of the fit.
    pub fn eval_sqrt_rate(&self, epsilon: T) -> T {
        self.amplitude_c * (-self.g.sqrt() * epsilon).exp()
    }
}

/// `P_∞(b - n) / P_∞(b)` at `g = ln2/b`, where `r^b = 1/2`.
pub fn ratio_term<T: Scalar>(b: u32, n: u32) -> Result<T> {
    if b < 1 {
        return Err(domain("b", b as f64, ">= 1"));
    }
    if n > b {
        return Err(domain("n", n as f64, "in [0, b]"));
    }
    if n == 0 {
        return Ok(T::one());
    }
    let two = T::lit(2.0);
    let r = two.powf(-T::one() / T::from_count(b as usize));
    let prefix = (1..n).fold(T::one(), |acc, j| acc * (two * r.powi(j as i32) - T::one()));
    let last = if n < b {
        (two - r.powi(-(n as i32)) * (T::one() - r)) / (T::one() + r)
    } else {
        two * r / (T::one() + r)
    };
    Ok(prefix * last)
}

fn fit_from_pmf<T: Scalar>(b: u32, pmf: &SpinlaborPmf<T>) -> Result<SemiAnalyticFit<T>> {
    let amplitude_c = violation_probability(pmf, T::zero())?;
    let at_bound = pmf.prob(b as usize);
    let ratio_from_pmf = amplitude_c / at_bound;
    let mut ratio_from_terms = T::zero();
    for n in 0..=b {
        ratio_from_terms = ratio_from_terms + ratio_term::<T>(b, n)?;
    }
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(1e4));
    if ((ratio_from_pmf - ratio_from_terms) / ratio_from_terms).abs() > tol {
        return Err(Error::Precondition(format!(
            "ratio routes disagree at b = {b}: {ratio_from_pmf} vs {ratio_from_terms}"
        )));
    }
    let decay_a = -(-ratio_from_pmf.recip()).ln_1p();
    Ok(SemiAnalyticFit {
        b,
        g: pmf.g(),
        amplitude_c,
        decay_a,
        ratio_from_pmf,
        ratio_from_terms,
    })
}

/// Fits `C e^(-aε)` at `g = ln2/b`, `p_init = 1/2`.
pub fn semi_analytic_fit<T: Scalar>(b: u32) -> Result<SemiAnalyticFit<T>> {
    if b < 1 {
        return Err(domain("b", b as f64, ">= 1"));
    }
    let g = T::LN_2() / T::from_count(b as usize);
    let params = ErasureParams::from_gamma(g, T::lit(0.5))?;
    fit_from_pmf(b, &pmf_full_erasure(&params)?)
}

/// Violation probability and its bounds tabulated over an ε grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationCurve<T> {
    pub g: T,
    pub epsilons: Vec<T>,
    pub pr_violation: Vec<T>,
    pub bound_a: Vec<T>,
    pub bound_b: Vec<T>,
    /// `C e^(-aε)`; present only at `g = ln2/b`.
    pub bound_semi: Option<Vec<T>>,
    /// `C e^(-√g ε)` with `C = Pr(0)`.
    pub bound_sqrt: Vec<T>,
    pub fit: Option<SemiAnalyticFit<T>>,
}

/// ε grid `0, step, 2 step, ..., <= eps_max`.
pub fn eps_grid<T: Scalar>(eps_max: T, eps_step: T) -> Result<Vec<T>> {
    if !(eps_step > T::zero()) || !eps_step.is_finite() {
        return Err(domain("eps_step", eps_step.as_f64(), "> 0"));
    }
    if !(eps_max >= T::zero()) || !eps_max.is_finite() {
        return Err(domain("eps_max", eps_max.as_f64(), ">= 0"));
    }
    let count = (eps_max / eps_step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    Ok((0..=count).map(|k| T::from_count(k) * eps_step).collect())
}

/// Upper end of the default ε grid, `ceil(ln2/g) + 2`.
pub fn default_eps_max<T: Scalar>(g: T) -> T {
    (T::LN_2() / g).ceil() + T::lit(2.0)
}

pub fn violation_curve<T: Scalar>(
    params: &ErasureParams<T>,
    eps_max: T,
    eps_step: T,
) -> Result<ViolationCurve<T>> {
    require_half(params.p_init())?;
    let pmf = pmf_full_erasure(params)?;
    let g = params.g();
    let epsilons = eps_grid(eps_max, eps_step)?;
    let a = bound_a(g)?;
    let b = bound_b(&pmf)?;
    let fit = match special_b(g) {
        Some(nb) => Some(fit_from_pmf(nb, &pmf)?),
        None => None,
    };
    let c = violation_probability(&pmf, T::zero())?;
    let mut pr_violation = Vec::with_capacity(epsilons.len());
    for &eps in &epsilons {
        pr_violation.push(violation_probability(&pmf, eps)?);
    }
    let decay = |eps: T| (-g * eps).exp();
    let curve = ViolationCurve {
        g,
        bound_a: epsilons.iter().map(|&e| a * decay(e)).collect(),
        bound_b: epsilons.iter().map(|&e| b * decay(e)).collect(),
        bound_semi: fit.map(|f| epsilons.iter().map(|&e| f.eval(e)).collect()),
        bound_sqrt: epsilons.iter().map(|&e| c * (-g.sqrt() * e).exp()).collect(),
        epsilons,
        pr_violation,
        fit,
    };
    Ok(curve)
}

impl<T: Scalar> ViolationCurve<T> {
    /// Checks range, monotonicity and `Pr ≤ B-bound ≤ A-bound` on every row.
    pub fn validate(&self) -> Result<()> {
        for (i, &pr) in self.pr_violation.iter().enumerate() {
            let eps = self.epsilons[i];
            if !(pr >= T::zero() && pr <= T::one()) {
                return Err(Error::Precondition(format!("Pr({eps}) = {pr} outside [0, 1]")));
            }
            if i > 0 && pr > self.pr_violation[i - 1] {
                return Err(Error::Precondition(format!("Pr increases at ε = {eps}")));
            }
            if !(pr <= self.bound_b[i] && self.bound_b[i] <= self.bound_a[i]) {
                return Err(Error::Precondition(format!(
                    "bound chain broken at ε = {eps}: {pr} <= {} <= {}",
                    self.bound_b[i], self.bound_a[i]
                )));
            }
        }
        Ok(())
    }

    /// Grid points `ε > 1` where the fitted exponential falls below `Pr(ε)`.
    pub fn semi_bound_counterexamples(&self) -> Vec<T> {
        let Some(semi) = &self.bound_semi else {
            return Vec::new();
        };
        self.rows_where(|i| self.epsilons[i] > T::one() && semi[i] < self.pr_violation[i])
    }

    /// Grid points `ε > 0` where `C e^(-√g ε)` falls below `Pr(ε)`.
    pub fn sqrt_bound_counterexamples(&self) -> Vec<T> {
        self.rows_where(|i| self.epsilons[i] > T::zero() && self.bound_sqrt[i] < self.pr_violation[i])
    }

    fn rows_where(&self, pred: impl Fn(usize) -> bool) -> Vec<T> {
        (0..self.epsilons.len())
            .filter(|&i| pred(i))
            .map(|i| self.epsilons[i])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow<T> {
    pub b: u32,
    pub g: T,
    pub decay_a: T,
    pub a_squared: T,
}

impl<T: Scalar> DecayRow<T> {
    /// `a^2 / g`, which would be 1 if `a = √g`.
    pub fn ratio(&self) -> T {
        self.a_squared / self.g
    }
}

/// Decay rate of the fit for each `b`, in input order.
pub fn decay_limit_study<T: Scalar>(b_list: &[u32]) -> Result<Vec<DecayRow<T>>> {
    b_list
        .par_iter()
        .map(|&b| {
            let fit = semi_analytic_fit::<T>(b)?;
            Ok(DecayRow {
                b,
                g: fit.g,
                decay_a: fit.decay_a,
                a_squared: fit.decay_a * fit.decay_a,
            })
        })
        .collect()
}

/// Trend of `a^2/g` across a decay study sorted by increasing `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTrend {
    pub ratios: Vec<f64>,
    /// `a^2/g` strictly increases along the rows.
    pub increasing: bool,
    /// `|1 - a^2/g|` strictly decreases along the rows.
    pub approaching_one: bool,
    pub final_gap: f64,
}

pub fn decay_trend<T: Scalar>(rows: &[DecayRow<T>]) -> DecayTrend {
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio().as_f64()).collect();
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let approaching_one = ratios
        .windows(2)
        .all(|w| (1.0 - w[1]).abs() < (1.0 - w[0]).abs());
    let final_gap = ratios.last().map_or(f64::NAN, |r| (1.0 - r).abs());
    DecayTrend {
        ratios,
        increasing,
        approaching_one,
        final_gap,
    }
}

//! Units, protocol parameters and equilibrium quantities of the spin-reservoir
//! erasure protocol.
//!
//! Angular momentum is measured in quanta of ħ (ħ = 1). The reservoir enters
//! only through the dimensionless inverse spin temperature `g = γħ`; the
//! reservoir polarization `alpha` and `r = e^(-g)` are derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::{logistic_neg, Scalar};

pub const DEFAULT_TAIL_TOL: f64 = 1e-14;

/// Largest cycle count the geometric tail rule may request.
pub const MAX_CYCLES: usize = 2_000_000;

/// Protocol configuration.
///
/// `g` and `alpha` are stored together and always agree; any finite `g` is
/// accepted here, and operations that need the full-erasure limit reject
/// `g <= 0` themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErasureParams<T> {
    g: T,
    alpha: T,
    p_init: T,
    tail_tol: T,
}

impl<T: Scalar> ErasureParams<T> {
    pub fn from_gamma(g: T, p_init: T) -> Result<Self> {
        let alpha = alpha_from_gamma(g)?;
        Self::validated(g, alpha, p_init, T::lit(DEFAULT_TAIL_TOL))
    }

    pub fn from_alpha(alpha: T, p_init: T) -> Result<Self> {
        let g = gamma_from_alpha(alpha)?;
        Self::validated(g, alpha, p_init, T::lit(DEFAULT_TAIL_TOL))
    }

    pub fn with_tail_tol(self, tail_tol: T) -> Result<Self> {
        Self::validated(self.g, self.alpha, self.p_init, tail_tol)
    }

    fn validated(g: T, alpha: T, p_init: T, tail_tol: T) -> Result<Self> {
        if !(p_init >= T::zero() && p_init <= T::one()) {
            return Err(domain("p_init", p_init.as_f64(), "[0, 1]"));
        }
        if !(tail_tol > T::zero() && tail_tol <= T::lit(1e-6)) {
            return Err(domain("tail_tol", tail_tol.as_f64(), "(0, 1e-6]"));
        }
        Ok(Self {
            g,
            alpha,
            p_init,
            tail_tol,
        })
    }

    pub fn g(&self) -> T {
        self.g
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn p_init(&self) -> T {
        self.p_init
    }

    pub fn tail_tol(&self) -> T {
        self.tail_tol
    }

    /// `r = e^(-g)`.
    pub fn r(&self) -> T {
        (-self.g).exp()
    }

    pub(crate) fn require_converging(&self) -> Result<()> {
        if self.g > T::zero() {
            Ok(())
        } else {
            Err(Error::NonConvergent { g: self.g.as_f64() })
        }
    }

    /// Number of cycle increments `q_up(1..=m*)` kept by the tail rule.
    pub fn cutoff(&self) -> Result<usize> {
        self.require_converging()?;
        tail_cutoff(self.g, self.tail_tol)
    }
}

/// `g = ln((1 - alpha)/alpha)`.
pub fn gamma_from_alpha<T: Scalar>(alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(domain("alpha", alpha.as_f64(), "(0, 1)"));
    }
    // ln(1-a) - ln(a) keeps the antisymmetry under a -> 1-a exact
    Ok((-alpha).ln_1p() - alpha.ln())
}

/// `alpha = 1/(1 + e^g)`.
pub fn alpha_from_gamma<T: Scalar>(g: T) -> Result<T> {
    if !g.is_finite() {
        return Err(domain("g", g.as_f64(), "finite"));
    }
    Ok(logistic_neg(g))
}

/// Probability that the memory (and its aligned ancilla block) is up after
/// the equilibration of cycle `m`: `r^(m+1)/(1 + r^(m+1))`.
pub fn q_up<T: Scalar>(m: usize, g: T) -> Result<T> {
    if m < 1 {
        return Err(domain("m", m as f64, ">= 1"));
    }
    if !(g > T::zero()) || !g.is_finite() {
        return Err(domain("g", g.as_f64(), "finite and > 0"));
    }
    Ok(q_up_unchecked(m, g))
}

/// `q_up` for any finite `g`, used by finite-cycle computations.
pub(crate) fn q_up_unchecked<T: Scalar>(m: usize, g: T) -> T {
    logistic_neg(T::from_count(m + 1) * g)
}

/// Erasure cost lower bound `ln2/g` in quanta.
pub fn vb_bound<T: Scalar>(g: T) -> Result<T> {
    if !(g > T::zero()) {
        return Err(domain("g", g.as_f64(), "> 0"));
    }
    Ok(T::LN_2() / g)
}

/// Analytic bound `Σ_{k>m} r^(k+1) = r^(m+2)/(1-r)` on the cycle terms dropped
/// after cycle `m`.
pub fn geometric_tail<T: Scalar>(g: T, m: usize) -> T {
    (-(T::from_count(m + 2)) * g).exp() / -(-g).exp_m1()
}

/// First `m >= 0` with `geometric_tail(g, m) < tail_tol`.
pub fn tail_cutoff<T: Scalar>(g: T, tail_tol: T) -> Result<usize> {
    if !(g > T::zero()) {
        return Err(Error::NonConvergent { g: g.as_f64() });
    }
    // r^(m+2) < tol (1-r)  <=>  (m+2) g > -ln(tol (1-r))
    let target = -(tail_tol * -(-g).exp_m1()).ln();
    let guess = (target / g - T::lit(2.0)).floor().max(T::zero());
    let guess = guess.to_usize().unwrap_or(usize::MAX);
    if guess > MAX_CYCLES {
        return Err(Error::Precondition(format!(
            "g = {g} needs more than {MAX_CYCLES} cycles to reach the tail tolerance"
        )));
    }
    let mut m = guess.saturating_sub(2);
    while geometric_tail(g, m) >= tail_tol {
        m += 1;
    }
    Ok(m)
}

/// Cycle increments `q_up(1..=m*)` kept by the tail rule.
pub(crate) fn converged_increments<T: Scalar>(params: &ErasureParams<T>) -> Result<Vec<T>> {
    let cutoff = params.cutoff()?;
    Ok((1..=cutoff).map(|m| q_up_unchecked(m, params.g())).collect())
}

/// Mean full-erasure spinlabor `p + Σ_m q_up(m)`.
pub fn mean_spinlabor<T: Scalar>(params: &ErasureParams<T>) -> Result<T> {
    let terms = converged_increments(params)?;
    Ok(terms.into_iter().fold(params.p_init(), |acc, q| acc + q))
}

/// Variance of the full-erasure spinlabor; increments are independent Bernoulli.
pub fn variance_spinlabor<T: Scalar>(params: &ErasureParams<T>) -> Result<T> {
    let p = params.p_init();
    let terms = converged_increments(params)?;
    Ok(terms
        .into_iter()
        .fold(p * (T::one() - p), |acc, q| acc + q * (T::one() - q)))
}

/// Spintherm exchanged by the memory-ancilla system for a given spinlabor.
///
/// Returns `-(spinlabor + p_init)`; at `p_init = 1/2` this is `-Q_s = L_s + 1/2`.
pub fn spintherm_from_spinlabor<T: Scalar>(spinlabor: T, p_init: T) -> T {
    -(spinlabor + p_init)
}

/// Per-trajectory first-law bookkeeping in half-quanta of ħ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FirstLawLedger {
    pub spinlabor_halfquanta: i64,
    pub spintherm_halfquanta: i64,
    pub delta_jz_memory_ancilla_halfquanta: i64,
}

impl FirstLawLedger {
    /// `ΔJ_z = L_s + Q_s` in exact integer arithmetic.
    pub fn is_balanced(&self) -> bool {
        self.delta_jz_memory_ancilla_halfquanta
            == self.spinlabor_halfquanta + self.spintherm_halfquanta
    }

    pub fn spinlabor_quanta(&self) -> f64 {
        self.spinlabor_halfquanta as f64 / 2.0
    }

    pub fn spintherm_quanta(&self) -> f64 {
        self.spintherm_halfquanta as f64 / 2.0
    }

    pub fn delta_jz_quanta(&self) -> f64 {
        self.delta_jz_memory_ancilla_halfquanta as f64 / 2.0
    }
}

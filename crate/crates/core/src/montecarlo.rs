//! Stochastic simulation of the erasure protocol.
//!
//! A trajectory draws the initial memory spin, then for each cycle `m`
//! applies the CNOT (one quantum of spinlabor if the memory is up) and
//! resamples the aligned memory-ancilla block of `m + 1` spins: up with
//! probability `q_up(m)`. The reservoir is treated as infinite, so `g` does
//! not drift.
//!
//! Randomness: substream `i` of a run with master seed `s` is a ChaCha8
//! generator keyed by four consecutive SplitMix64 outputs started at the
//! `(i + 1)`-th SplitMix64 output of `s`. Results depend only on
//! `(params, stop rule, seeds)`, never on thread count or scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;
use crate::spin::{alpha_from_gamma, q_up_unchecked, ErasureParams, FirstLawLedger, MAX_CYCLES};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `index` under `master_seed`.
pub fn substream_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64_mix(master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Generator for one trajectory, keyed by four SplitMix64 outputs of `seed`.
pub fn trajectory_rng(seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&substream_seed(seed, k as u64).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform draw in `[0, 1)` with 53 random bits.
fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn bernoulli(rng: &mut impl RngCore, p: f64) -> bool {
    uniform(rng) < p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    fn from_up(up: bool) -> Self {
        if up {
            Spin::Up
        } else {
            Spin::Down
        }
    }

    pub fn is_up(self) -> bool {
        self == Spin::Up
    }

    /// `J_z` in half-quanta: `+1` up, `-1` down.
    pub fn jz_halfquanta(self) -> i64 {
        if self.is_up() {
            1
        } else {
            -1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleOutcome {
    pub cnot_cost_quanta: u8,
    pub pre_equilibration: Spin,
    pub post_equilibration: Spin,
}

/// When a trajectory stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopRule {
    MaxCycles(usize),
    /// Stop after the first cycle whose `q_up(m)` falls below the threshold.
    QUpBelow(f64),
}

impl StopRule {
    pub fn default_for<T: Scalar>(params: &ErasureParams<T>) -> Self {
        StopRule::QUpBelow(params.tail_tol().as_f64())
    }

    /// Resolves the rule to a cycle count.
    pub fn cycles(&self, g: f64) -> Result<usize> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::Config(format!("simulation requires finite g > 0, got {g}")));
        }
        let cycles = match *self {
            StopRule::MaxCycles(n) => n,
            StopRule::QUpBelow(t) => {
                if !(t > 0.0 && t < 0.5) {
                    return Err(Error::Config(format!(
                        "q_up threshold {t} is outside (0, 1/2) and never stops"
                    )));
                }
                // q_up(m) < t  <=>  (m + 1) g > ln((1 - t)/t)
                let need = ((1.0 - t) / t).ln() / g - 1.0;
                let mut m = (need.max(1.0).floor() as usize).max(1);
                if m > MAX_CYCLES {
                    return Err(Error::Config(format!(
                        "stop rule needs more than {MAX_CYCLES} cycles at g = {g}"
                    )));
                }
                while q_up_unchecked(m, g) >= t {
                    m += 1;
                }
                while m > 1 && q_up_unchecked(m - 1, g) < t {
                    m -= 1;
                }
                m
            }
        };
        if cycles == 0 || cycles > MAX_CYCLES {
            return Err(Error::Config(format!(
                "cycle count {cycles} outside [1, {MAX_CYCLES}]"
            )));
        }
        Ok(cycles)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub cycles_run: usize,
    pub initial_spin: Spin,
    pub per_cycle: Vec<CycleOutcome>,
    pub ledger: FirstLawLedger,
}

impl TrajectoryRecord {
    pub fn spinlabor_quanta(&self) -> u64 {
        self.per_cycle.iter().map(|c| c.cnot_cost_quanta as u64).sum()
    }

    pub fn final_spin(&self) -> Spin {
        self.per_cycle
            .last()
            .map_or(self.initial_spin, |c| c.post_equilibration)
    }

    /// The memory ended up; the run was cut before erasure completed.
    pub fn unfinished(&self) -> bool {
        self.final_spin().is_up()
    }
}

/// Protocol inputs in the form the sampler consumes.
struct Schedule {
    p_init: f64,
    q_up: Vec<f64>,
}

impl Schedule {
    fn new<T: Scalar>(params: &ErasureParams<T>, stop: StopRule) -> Result<Self> {
        let g = params.g().as_f64();
        let cycles = stop.cycles(g)?;
        Ok(Self {
            p_init: params.p_init().as_f64(),
            q_up: (1..=cycles).map(|m| q_up_unchecked(m, g)).collect(),
        })
    }

    /// Runs one trajectory, reporting each cycle; returns (initial, final, ledger).
    fn walk(&self, rng: &mut impl RngCore, mut visit: impl FnMut(CycleOutcome)) -> (Spin, Spin, FirstLawLedger) {
        let initial = Spin::from_up(bernoulli(rng, self.p_init));
        let mut spin = initial;
        let mut labor = 0i64;
        let mut therm = 0i64;
        for (idx, &q) in self.q_up.iter().enumerate() {
            let block = idx as i64 + 2;
            let cost = u8::from(spin.is_up());
            labor += 2 * cost as i64;
            let post = Spin::from_up(bernoulli(rng, q));
            therm += block * (post.jz_halfquanta() - spin.jz_halfquanta());
            visit(CycleOutcome {
                cnot_cost_quanta: cost,
                pre_equilibration: spin,
                post_equilibration: post,
            });
            spin = post;
        }
        // all ancillas start down; at the end the whole block is aligned with the memory
        let ancillas = self.q_up.len() as i64;
        let jz_before = initial.jz_halfquanta() - ancillas;
        let jz_after = (ancillas + 1) * spin.jz_halfquanta();
        let ledger = FirstLawLedger {
            spinlabor_halfquanta: labor,
            spintherm_halfquanta: therm,
            delta_jz_memory_ancilla_halfquanta: jz_after - jz_before,
        };
        (initial, spin, ledger)
    }
}

pub fn simulate_trajectory<T: Scalar>(
    params: &ErasureParams<T>,
    seed: u64,
    stop: StopRule,
) -> Result<TrajectoryRecord> {
    let schedule = Schedule::new(params, stop)?;
    let mut per_cycle = Vec::with_capacity(schedule.q_up.len());
    let mut rng = trajectory_rng(seed);
    let (initial_spin, _, ledger) = schedule.walk(&mut rng, |c| per_cycle.push(c));
    Ok(TrajectoryRecord {
        seed,
        cycles_run: per_cycle.len(),
        initial_spin,
        per_cycle,
        ledger,
    })
}

/// Exact integer accumulator; merging is commutative and associative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Tally {
    n: u64,
    counts: Vec<u64>,
    labor: (i128, i128),
    therm: (i128, i128),
    delta_jz: (i128, i128),
    unfinished: u64,
    unbalanced: u64,
}

impl Tally {
    fn add(mut self, final_spin: Spin, ledger: &FirstLawLedger) -> Self {
        let q = (ledger.spinlabor_halfquanta / 2) as usize;
        if self.counts.len() <= q {
            self.counts.resize(q + 1, 0);
        }
        self.counts[q] += 1;
        self.n += 1;
        let push = |acc: &mut (i128, i128), x: i64| {
            acc.0 += x as i128;
            acc.1 += (x as i128) * (x as i128);
        };
        push(&mut self.labor, ledger.spinlabor_halfquanta);
        push(&mut self.therm, ledger.spintherm_halfquanta);
        push(&mut self.delta_jz, ledger.delta_jz_memory_ancilla_halfquanta);
        self.unfinished += u64::from(final_spin.is_up());
        self.unbalanced += u64::from(!ledger.is_balanced());
        self
    }

    fn merge(mut self, other: Self) -> Self {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n += other.n;
        for (a, b) in [
            (&mut self.labor, other.labor),
            (&mut self.therm, other.therm),
            (&mut self.delta_jz, other.delta_jz),
        ] {
            a.0 += b.0;
            a.1 += b.1;
        }
        self.unfinished += other.unfinished;
        self.unbalanced += other.unbalanced;
        self
    }
}

/// Sample mean and standard error in quanta from half-quanta sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    fn from_halfquanta(n: u64, (sum, sum_sq): (i128, i128)) -> Self {
        let nf = n as f64;
        let mean = sum as f64 / nf / 2.0;
        if n < 2 {
            return Self { mean, std_error: 0.0 };
        }
        // n Σx² - (Σx)² is exact in integers
        let spread = (n as i128) * sum_sq - sum * sum;
        let var = spread as f64 / (nf * (nf - 1.0)) / 4.0;
        Self {
            mean,
            std_error: (var / nf).sqrt(),
        }
    }

    /// `|mean - target|` in standard errors; zero-width estimates must match exactly.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.mean - target).abs();
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_samples: u64,
    pub g: f64,
    pub p_init: f64,
    pub cycles: usize,
    pub master_seed: u64,
    /// Trajectory counts by total spinlabor in quanta.
    pub counts: Vec<u64>,
    pub spinlabor: Estimate,
    pub spintherm: Estimate,
    pub delta_jz: Estimate,
    pub unfinished: u64,
    pub unbalanced_ledgers: u64,
}

impl EnsembleSummary {
    /// `n_q / n` for each cost `q`.
    pub fn empirical_pmf(&self) -> Vec<f64> {
        let n = self.n_samples as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn frequency(&self, q: usize) -> f64 {
        self.counts.get(q).map_or(0.0, |&c| c as f64 / self.n_samples as f64)
    }

    /// Empirical `<e^(-g L_s)>` with its standard error.
    pub fn exp_average(&self) -> Estimate {
        let n = self.n_samples as f64;
        let weights: Vec<f64> = (0..self.counts.len()).map(|q| (-self.g * q as f64).exp()).collect();
        let mean = self.counts.iter().zip(&weights).map(|(&c, w)| c as f64 * w).sum::<f64>() / n;
        if self.n_samples < 2 {
            return Estimate { mean, std_error: 0.0 };
        }
        let ss = self
            .counts
            .iter()
            .zip(&weights)
            .map(|(&c, w)| c as f64 * (w - mean) * (w - mean))
            .sum::<f64>();
        Estimate {
            mean,
            std_error: (ss / (n - 1.0) / n).sqrt(),
        }
    }
}

pub fn simulate_ensemble<T: Scalar>(
    params: &ErasureParams<T>,
    n_samples: u64,
    master_seed: u64,
) -> Result<EnsembleSummary> {
    simulate_ensemble_with(params, n_samples, master_seed, StopRule::default_for(params))
}

pub fn simulate_ensemble_with<T: Scalar>(
    params: &ErasureParams<T>,
    n_samples: u64,
    master_seed: u64,
    stop: StopRule,
) -> Result<EnsembleSummary> {
    if n_samples < 1 {
        return Err(domain("n_samples", 0.0, ">= 1"));
    }
    let schedule = Schedule::new(params, stop)?;
    let tally = (0..n_samples)
        .into_par_iter()
        .fold(Tally::default, |acc, i| {
            let mut rng = trajectory_rng(substream_seed(master_seed, i));
            let (_, final_spin, ledger) = schedule.walk(&mut rng, |_| {});
            acc.add(final_spin, &ledger)
        })
        .reduce(Tally::default, Tally::merge);
    Ok(EnsembleSummary {
        n_samples,
        g: params.g().as_f64(),
        p_init: params.p_init().as_f64(),
        cycles: schedule.q_up.len(),
        master_seed,
        spinlabor: Estimate::from_halfquanta(tally.n, tally.labor),
        spintherm: Estimate::from_halfquanta(tally.n, tally.therm),
        delta_jz: Estimate::from_halfquanta(tally.n, tally.delta_jz),
        counts: tally.counts,
        unfinished: tally.unfinished,
        unbalanced_ledgers: tally.unbalanced,
    })
}

/// Number of up spins in an `n_spins` reservoir at inverse spin temperature `g`.
///
/// The count is `Binomial(n_spins, alpha)` with `alpha = 1/(1 + e^g)`.
pub fn sample_reservoir_up_count<T: Scalar>(n_spins: u64, g: T, seed: u64) -> Result<u64> {
    Ok(sample_reservoir_up_counts(n_spins, g, seed, 1)?[0])
}

/// `draws` independent reservoir samples from one seeded stream.
pub fn sample_reservoir_up_counts<T: Scalar>(n_spins: u64, g: T, seed: u64, draws: usize) -> Result<Vec<u64>> {
    if n_spins < 1 {
        return Err(domain("n_spins", 0.0, ">= 1"));
    }
    let alpha = alpha_from_gamma(g)?.as_f64();
    let law = Binomial::new(n_spins, alpha)
        .map_err(|e| Error::Precondition(format!("binomial({n_spins}, {alpha}): {e}")))?;
    let mut rng = trajectory_rng(seed);
    Ok((0..draws).map(|_| law.sample(&mut rng)).collect())
}

/// Reservoir `J_z` in quanta for `n_up` of `n_spins` spins up.
pub fn reservoir_jz(n_up: u64, n_spins: u64) -> f64 {
    n_up as f64 - n_spins as f64 / 2.0
}

/// Outcome of the ensemble first-law checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    /// Mean `ΔJ_z` of the memory-ancilla system; expected `-p_init`.
    pub delta_jz: Estimate,
    pub delta_jz_z: f64,
    /// Mean `(-Q_s) - L_s`; expected `p_init`.
    pub spintherm_excess: Estimate,
    pub spintherm_excess_z: f64,
    pub unbalanced_ledgers: u64,
    pub unfinished: u64,
    pub passed: bool,
}

/// z-score limit used by the ensemble checks.
pub const Z_LIMIT: f64 = 4.0;

pub fn ledger_check(ensemble: &EnsembleSummary) -> LedgerReport {
    let p = ensemble.p_init;
    let delta_jz = ensemble.delta_jz;
    // per trajectory (-Q) - L = -ΔJ_z when the ledger balances
    let spintherm_excess = Estimate {
        mean: -ensemble.spintherm.mean - ensemble.spinlabor.mean,
        std_error: delta_jz.std_error,
    };
    let delta_jz_z = delta_jz.z_score(-p);
    let spintherm_excess_z = spintherm_excess.z_score(p);
    LedgerReport {
        delta_jz,
        delta_jz_z,
        spintherm_excess,
        spintherm_excess_z,
        unbalanced_ledgers: ensemble.unbalanced_ledgers,
        unfinished: ensemble.unfinished,
        passed: ensemble.unbalanced_ledgers == 0
            && delta_jz_z <= Z_LIMIT
            && spintherm_excess_z <= Z_LIMIT,
    }
}

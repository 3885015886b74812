//! Subcommand bodies. Each returns a [`Rendered`] result that has already
//! passed the relevant internal checks.

use serde_json::{json, Value};
use spinlabor::fluctuation::{default_eps_max, DecayRow};
use spinlabor::montecarlo::StopRule;
use spinlabor::{
    decay_limit_study, decay_trend, jarzynski_lhs, jarzynski_rhs, ledger_check, partial_exp_averages,
    pmf_after_m_cycles_with, pmf_full_erasure, semi_analytic_fit, simulate_ensemble_with,
    violation_curve, vb_bound, Cycles, ErasureParams, Recurrence, SpinlaborPmf, ViolationCurve,
};

use crate::config::{CommandKind, CycleMode, Figure, Format, GammaSource, RunConfig, DEFAULT_B_LIST};
use crate::output::{Cell, Rendered, Table};
use crate::CliError;

pub fn run(config: &RunConfig) -> Result<Rendered, CliError> {
    match config.command {
        CommandKind::Pmf => pmf(config),
        CommandKind::Simulate => simulate(config),
        CommandKind::Bounds => bounds(config),
        CommandKind::Jarzynski => jarzynski(config),
        CommandKind::Semianalytic => semianalytic(config),
        CommandKind::Figures => figures(config),
    }
}

/// Core errors at this stage come from parameter combinations the config
/// check cannot see (e.g. `--full` at g <= 0, or p_init != 1/2 for bounds).
fn invalid(context: &str) -> impl Fn(spinlabor::Error) -> CliError + '_ {
    move |e| CliError::invalid(format!("{context}: {e}"))
}

fn check(what: &str) -> impl Fn(spinlabor::Error) -> CliError + '_ {
    move |e| CliError::Check(format!("{what}: {e}"))
}

fn exact_pmf(config: &RunConfig, params: &ErasureParams) -> Result<SpinlaborPmf, CliError> {
    let variant = if config.printed_recurrence {
        Recurrence::Printed
    } else {
        Recurrence::Corrected
    };
    let pmf = match config.cycles {
        CycleMode::Finite(m) => {
            pmf_after_m_cycles_with(params, m, variant).map_err(invalid("--cycles"))?
        }
        CycleMode::Full => {
            if config.printed_recurrence {
                return Err(CliError::invalid("--printed-recurrence requires --cycles"));
            }
            pmf_full_erasure(params).map_err(invalid("--full needs --gamma > 0 (or --alpha < 1/2)"))?
        }
    };
    pmf.validate().map_err(check("distribution"))?;
    Ok(pmf)
}

fn cycles_json(cycles: Cycles) -> (usize, bool) {
    match cycles {
        Cycles::Finite(m) => (m, false),
        Cycles::Converged { cycles } => (cycles, true),
    }
}

fn pmf(config: &RunConfig) -> Result<Rendered, CliError> {
    let params = config.params()?;
    let pmf = exact_pmf(config, &params)?;
    Ok(match config.format {
        Format::Csv => {
            let mut t = Table::new(&["q", "probability"]);
            for (q, &p) in pmf.probs().iter().enumerate() {
                t.push(vec![q.into(), p.into()]);
            }
            Rendered::Csv(t)
        }
        Format::Json => {
            let (cycles, converged) = cycles_json(pmf.cycles());
            Rendered::Json(json!({
                "gamma": params.g(),
                "alpha": params.alpha(),
                "p_init": params.p_init(),
                "cycles": cycles,
                "converged": converged,
                "tail_bound": pmf.tail_bound(),
                "mean": pmf.mean(),
                "variance": pmf.variance(),
                "vb_bound": vb_bound(params.g()).ok(),
                "probability": pmf.probs(),
            }))
        }
    })
}

fn simulate(config: &RunConfig) -> Result<Rendered, CliError> {
    let params = config.params()?;
    let stop = match config.cycles {
        CycleMode::Finite(n) => StopRule::MaxCycles(n),
        CycleMode::Full => StopRule::default_for(&params),
    };
    let summary = simulate_ensemble_with(&params, config.n_samples, config.master_seed, stop)
        .map_err(invalid("--gamma/--alpha/--cycles"))?;
    if summary.unbalanced_ledgers > 0 {
        return Err(CliError::Check(format!(
            "{} trajectories broke the first-law ledger",
            summary.unbalanced_ledgers
        )));
    }
    let exact = pmf_after_m_cycles_with(&params, summary.cycles, Recurrence::Corrected)
        .map_err(check("exact distribution"))?;
    exact.validate().map_err(check("exact distribution"))?;
    Ok(match config.format {
        Format::Csv => {
            let mut t = Table::new(&["q", "frequency", "exact_probability"]);
            for q in 0..summary.counts.len().max(exact.probs().len()) {
                t.push(vec![q.into(), summary.frequency(q).into(), exact.prob(q).into()]);
            }
            Rendered::Csv(t)
        }
        Format::Json => {
            let report = ledger_check(&summary);
            Rendered::Json(json!({
                "summary": summary,
                "ledger": report,
                "exp_average": summary.exp_average(),
                "exact_mean": exact.mean(),
                "exact_probability": exact.probs(),
            }))
        }
    })
}

fn curve_for(config: &RunConfig, params: &ErasureParams) -> Result<ViolationCurve, CliError> {
    let eps_max = config.eps_max.unwrap_or_else(|| default_eps_max(params.g()));
    let curve = violation_curve(params, eps_max, config.eps_step)
        .map_err(invalid("bounds need --p-init 0.5 and --gamma > 0"))?;
    curve.validate().map_err(check("violation curve"))?;
    Ok(curve)
}

fn bounds(config: &RunConfig) -> Result<Rendered, CliError> {
    let params = config.params()?;
    let curve = curve_for(config, &params)?;
    Ok(match config.format {
        Format::Csv => {
            let mut t = Table::new(&["epsilon", "pr_violation", "bound_a", "bound_b", "bound_semi"]);
            for i in 0..curve.epsilons.len() {
                t.push(vec![
                    curve.epsilons[i].into(),
                    curve.pr_violation[i].into(),
                    curve.bound_a[i].into(),
                    curve.bound_b[i].into(),
                    curve.bound_semi.as_ref().map(|s| s[i]).into(),
                ]);
            }
            Rendered::Csv(t)
        }
        Format::Json => Rendered::Json(json!({ "curve": curve })),
    })
}

fn jarzynski(config: &RunConfig) -> Result<Rendered, CliError> {
    let params = config.params()?;
    if config.cycles != CycleMode::Full {
        return Err(CliError::invalid("jarzynski runs to full erasure; drop --cycles"));
    }
    let pmf = exact_pmf(config, &params)?;
    let lhs = jarzynski_lhs(&pmf).map_err(invalid("--p-init must be 0.5"))?;
    let rhs = jarzynski_rhs(params.g());
    let (first, rest) = partial_exp_averages(&params).map_err(invalid("--p-init"))?;
    let abs_diff = (lhs - rhs).abs();
    Ok(match config.format {
        Format::Csv => {
            let mut t = Table::new(&["gamma", "lhs", "rhs", "abs_diff"]);
            t.push(vec![params.g().into(), lhs.into(), rhs.into(), abs_diff.into()]);
            Rendered::Csv(t)
        }
        Format::Json => Rendered::Json(json!({
            "gamma": params.g(),
            "alpha": params.alpha(),
            "lhs": lhs,
            "rhs": rhs,
            "abs_diff": abs_diff,
            "first_cnot_factor": first,
            "remaining_cycles_factor": rest,
            "tail_bound": pmf.tail_bound(),
        })),
    })
}

fn b_list(config: &RunConfig) -> Vec<u32> {
    if config.b_list.is_empty() {
        DEFAULT_B_LIST.to_vec()
    } else {
        config.b_list.clone()
    }
}

fn decay_table(rows: &[DecayRow<f64>], with_ratio: bool) -> Table {
    let mut t = if with_ratio {
        Table::new(&["b", "gamma", "a", "a_squared", "a_squared_over_gamma"])
    } else {
        Table::new(&["b", "gamma", "a", "a_squared"])
    };
    for r in rows {
        let mut row: Vec<Cell> = vec![r.b.into(), r.g.into(), r.decay_a.into(), r.a_squared.into()];
        if with_ratio {
            row.push(r.ratio().into());
        }
        t.push(row);
    }
    t
}

fn semianalytic(config: &RunConfig) -> Result<Rendered, CliError> {
    let bs = b_list(config);
    Ok(match config.format {
        Format::Csv => {
            let rows = decay_limit_study::<f64>(&bs).map_err(check("decay study"))?;
            Rendered::Csv(decay_table(&rows, false))
        }
        Format::Json => {
            let fits = bs
                .iter()
                .map(|&b| semi_analytic_fit::<f64>(b))
                .collect::<Result<Vec<_>, _>>()
                .map_err(check("semi-analytic fit"))?;
            let rows: Vec<Value> = fits
                .iter()
                .map(|f| {
                    json!({
                        "b": f.b,
                        "gamma": f.g,
                        "c": f.amplitude_c,
                        "a": f.decay_a,
                        "a_squared": f.decay_a * f.decay_a,
                        "a_squared_over_gamma": f.decay_a * f.decay_a / f.g,
                        "ratio_from_pmf": f.ratio_from_pmf,
                        "ratio_from_terms": f.ratio_from_terms,
                    })
                })
                .collect();
            Rendered::Json(json!({ "rows": rows }))
        }
    })
}

fn figures(config: &RunConfig) -> Result<Rendered, CliError> {
    let fig = config.fig.ok_or_else(|| CliError::invalid("--fig is required"))?;
    if fig == Figure::Supp {
        let rows = decay_limit_study::<f64>(&b_list(config)).map_err(check("decay study"))?;
        return Ok(match config.format {
            Format::Csv => Rendered::Csv(decay_table(&rows, true)),
            Format::Json => {
                let trend = decay_trend(&rows);
                Rendered::Json(json!({
                    "figure": "supp",
                    "rows": rows,
                    "a_squared_over_gamma": trend.ratios,
                }))
            }
        });
    }
    let alphas = if config.alphas.is_empty() {
        fig.default_alphas()
    } else {
        config.alphas.clone()
    };
    let distributions = matches!(fig, Figure::OneA | Figure::TwoA);
    let mut table = if distributions {
        Table::new(&["alpha", "gamma", "vb_bound", "q", "probability"])
    } else {
        Table::new(&[
            "alpha",
            "gamma",
            "epsilon",
            "pr_violation",
            "bound_a",
            "bound_b",
            "bound_semi",
            "bound_sqrt",
        ])
    };
    let mut series = Vec::new();
    for &alpha in &alphas {
        let params = config.params_for(GammaSource::Alpha(alpha))?;
        let g = params.g();
        if distributions {
            let pmf = pmf_full_erasure(&params).map_err(invalid("--alphas must be < 0.5"))?;
            pmf.validate().map_err(check("distribution"))?;
            let vb = vb_bound(g).map_err(invalid("--alphas"))?;
            for (q, &p) in pmf.probs().iter().enumerate() {
                table.push(vec![alpha.into(), g.into(), vb.into(), q.into(), p.into()]);
            }
            series.push(json!({
                "alpha": alpha,
                "gamma": g,
                "vb_bound": vb,
                "probability": pmf.probs(),
            }));
        } else {
            let curve = curve_for(config, &params)?;
            for i in 0..curve.epsilons.len() {
                table.push(vec![
                    alpha.into(),
                    g.into(),
                    curve.epsilons[i].into(),
                    curve.pr_violation[i].into(),
                    curve.bound_a[i].into(),
                    curve.bound_b[i].into(),
                    curve.bound_semi.as_ref().map(|s| s[i]).into(),
                    curve.bound_sqrt[i].into(),
                ]);
            }
            series.push(json!({ "alpha": alpha, "curve": curve }));
        }
    }
    Ok(match config.format {
        Format::Csv => Rendered::Csv(table),
        Format::Json => Rendered::Json(json!({
            "figure": figure_name(fig),
            "series": series,
        })),
    })
}

fn figure_name(fig: Figure) -> &'static str {
    match fig {
        Figure::OneA => "1a",
        Figure::OneB => "1b",
        Figure::TwoA => "2a",
        Figure::TwoB => "2b",
        Figure::Supp => "supp",
    }
}

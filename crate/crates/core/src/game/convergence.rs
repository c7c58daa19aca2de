//! Gap between a strategy's payoff against the block responder and
//! `v(0, 0)`, as the block length `δ` shrinks.

use serde::Serialize;

use super::{simulate_paths, DiscreteResponder, Estimate, GameConfig, GameEstimate, Payoff, Strategy};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::value::ValueOracle;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub delta: f64,
    pub block_steps: usize,
    pub estimate: GameEstimate,
    /// `payoff − v(0, 0)` from the control-variate estimate when enabled.
    pub gap: Estimate,
    /// Standard error of the paired difference with the previous row.
    pub step_std_err: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub v00: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log gap` against `log δ` over positive gaps.
    pub slope: Option<f64>,
    /// `max gap/√δ`.
    pub sqrt_constant: f64,
    /// Each gap at most the previous one plus three paired standard errors.
    pub non_increasing: bool,
}

fn block_steps(delta: f64, dt: f64) -> Result<usize> {
    let per_unit = (1.0 / delta).round();
    let blocks = (delta / dt).round();
    if !(delta > 0.0) || (per_unit * delta - 1.0).abs() > 1e-9 || blocks < 1.0 || (blocks * dt - delta).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "delta = {delta} must divide 1 and be a multiple of dt = {dt}"
        )));
    }
    Ok(blocks as usize)
}

/// Plays `strategies` against the block responder for every `δ` in
/// `deltas` (decreasing), all on the same Brownian paths.
pub fn lower_bound_gap<O, SF, S>(
    f: &ScalarField,
    oracle: &O,
    v00: f64,
    strategies: SF,
    deltas: &[f64],
    cfg: &GameConfig,
    control_variate: bool,
) -> Result<ConvergenceTable>
where
    O: ValueOracle,
    SF: Fn(u64) -> S + Sync + Send,
    S: Strategy,
{
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("deltas must be strictly decreasing".into()));
    }
    let payoff = Payoff::new(f.clone());
    let cv: Option<&dyn ValueOracle> = if control_variate { Some(oracle) } else { None };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(deltas.len());
    let mut previous: Option<Vec<f64>> = None;
    let mut non_increasing = true;
    for &delta in deltas {
        let bs = block_steps(delta, cfg.dt)?;
        let out = simulate_paths(&payoff, &strategies, |_| DiscreteResponder::new(oracle, bs), cfg, cv)?;
        let estimate = GameEstimate::from_outcomes(&out, cfg.dt, control_variate)?;
        let samples: Vec<f64> = out.iter().map(|o| o.payoff - o.martingale).collect();
        let best = estimate.best();
        let gap = Estimate {
            mean: best.mean - v00,
            std_err: best.std_err,
        };
        let step_std_err = previous.as_ref().map(|prev| {
            Estimate::from_samples(samples.iter().zip(prev).map(|(a, b)| a - b)).std_err
        });
        if let (Some(se), Some(last)) = (step_std_err, rows.last()) {
            if gap.mean > last.gap.mean + 3.0 * se {
                non_increasing = false;
            }
        }
        previous = Some(samples);
        rows.push(ConvergenceRow {
            delta,
            block_steps: bs,
            estimate,
            gap,
            step_std_err,
        });
    }
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.gap.mean > 0.0).map(|r| (r.delta.ln(), r.gap.mean.ln())).collect();
    let slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let sqrt_constant = rows.iter().map(|r| r.gap.mean / r.delta.sqrt()).fold(0.0, f64::max);
    Ok(ConvergenceTable {
        v00,
        rows,
        slope,
        sqrt_constant,
        non_increasing,
    })
}

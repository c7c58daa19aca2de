//! Three games on one probability space: `f` driven by `W`, `g` by `W̃`,
//! and `h` by `W̄ = λW + μW̃`, with `⟨W, W̃⟩_t = ρt` chosen so that `W̄` is
//! again standard. All three face the same responder `β = −∇v_h(X_h)`.

use std::sync::Arc;

use serde::Serialize;

use super::{map_paths, Estimate, GameConfig, GameEstimate, PathOutcome};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::gaussian::{admissible_correlation, correlated_increments_into};
use crate::means::MeanSpec;
use crate::quadrature::{Neumaier, QuadratureRule};
use crate::rng::RngStream;
use crate::value::{TabulatedValue, ValueFunction, ValueOracle};

#[derive(Debug, Clone, Serialize)]
pub struct CoupledReport {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    /// Strategy constants `c` for `f`, `g`.
    pub c: [f64; 2],
    /// `v(0, 0)` for `f`, `g`, `h`.
    pub values: [f64; 3],
    pub estimates: [GameEstimate; 3],
    /// Per-path `P_h − λP_f − μP_g`.
    pub combination: Estimate,
    /// Largest `λP_f + μP_g − P_h` over paths.
    pub max_pathwise_violation: f64,
}

fn oracle(f: &ScalarField, rule: &QuadratureRule, dt: f64) -> Result<(Arc<dyn ValueOracle>, ValueFunction)> {
    let (lo, hi) = f.range();
    let spec = MeanSpec::phi().with_interval(lo.min(-8.0), hi.max(8.0))?;
    let vf = ValueFunction::new(f.clone(), spec, rule)?;
    let o: Arc<dyn ValueOracle> =
        if vf.dim() == 1 { Arc::new(TabulatedValue::build(&vf, dt)?) } else { Arc::new(vf.clone()) };
    Ok((o, vf))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn coupled_payoffs(
    fields: &[ScalarField],
    lambda: f64,
    mu: f64,
    cfg: &GameConfig,
    rule: &QuadratureRule,
) -> Result<CoupledReport> {
    let rho = admissible_correlation(lambda, mu)?;
    let [f, g, h] = fields else {
        return Err(Error::Precondition(format!("coupled games need three fields, got {}", fields.len())));
    };
    let n = f.dim();
    if g.dim() != n || h.dim() != n || cfg.dim != n {
        return Err(Error::Dimension {
            dim: n,
            reason: "coupled fields must share one dimension",
        });
    }
    let steps = cfg.steps()?;
    let dt = 1.0 / steps as f64;
    let (of, vf) = oracle(f, rule, dt)?;
    let (og, vg) = oracle(g, rule, dt)?;
    let (oh, vh) = oracle(h, rule, dt)?;
    let cf = cfg.c.unwrap_or_else(|| vf.default_c());
    let cg = cfg.c.unwrap_or_else(|| vg.default_c());
    let zero = vec![0.0; n];
    let values = [vf.value(0.0, &zero), vg.value(0.0, &zero), vh.value(0.0, &zero)];

    let seed = cfg.seed;
    let outcomes: Vec<[PathOutcome; 3]> = map_paths(cfg.paths, |p| {
        let mut rng = RngStream::new(seed, p).generator();
        let (mut xf, mut xg, mut xh) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let (mut gf, mut gg, mut beta) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let (mut af, mut ag, mut ah) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let (mut dw, mut dwt) = (vec![0.0; n], vec![0.0; n]);
        let mut run = [Neumaier::default(), Neumaier::default(), Neumaier::default()];
        let mut d = 1.0;
        for k in 0..steps {
            let t = k as f64 * dt;
            for i in 0..n {
                xh[i] = lambda * xf[i] + mu * xg[i];
            }
            oh.value_and_grad(t, &xh, &mut beta);
            beta.iter_mut().for_each(|b| *b = -*b);
            let v1 = of.value_and_grad(t, &xf, &mut gf);
            let v2 = og.value_and_grad(t, &xg, &mut gg);
            for i in 0..n {
                af[i] = (cf - v1) * gf[i] + cf * beta[i];
                ag[i] = (cg - v2) * gg[i] + cg * beta[i];
                ah[i] = lambda * af[i] + mu * ag[i];
            }
            run[0].add(d * dot(&af, &beta) * dt);
            run[1].add(d * dot(&ag, &beta) * dt);
            run[2].add(d * dot(&ah, &beta) * dt);
            correlated_increments_into(rho, dt, &mut rng, &mut dw, &mut dwt);
            for i in 0..n {
                xf[i] += af[i] * dt + dw[i];
                xg[i] += ag[i] * dt + dwt[i];
            }
            d *= (-0.5 * dot(&beta, &beta) * dt).exp();
        }
        for i in 0..n {
            xh[i] = lambda * xf[i] + mu * xg[i];
        }
        let terminal = [f.value(&xf), g.value(&xg), h.value(&xh)];
        let mut out = [PathOutcome::default(); 3];
        for j in 0..3 {
            run[j].add(d * terminal[j]);
            out[j] = PathOutcome {
                payoff: run[j].sum(),
                discount: d,
                martingale: 0.0,
            };
        }
        out
    });

    let column = |j: usize| -> Result<GameEstimate> {
        let col: Vec<PathOutcome> = outcomes.iter().map(|o| o[j]).collect();
        GameEstimate::from_outcomes(&col, dt, false)
    };
    let estimates = [column(0)?, column(1)?, column(2)?];
    let combination =
        Estimate::from_samples(outcomes.iter().map(|o| o[2].payoff - lambda * o[0].payoff - mu * o[1].payoff));
    let max_pathwise_violation = outcomes
        .iter()
        .map(|o| lambda * o[0].payoff + mu * o[1].payoff - o[2].payoff)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CoupledReport {
        lambda,
        mu,
        rho,
        c: [cf, cg],
        values,
        estimates,
        combination,
        max_pathwise_violation,
    })
}

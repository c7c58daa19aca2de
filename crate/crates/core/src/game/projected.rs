//! The projected game `J_f^{B,c}`: terminal `f(BW₁ + ∫Bα + ½Φ⁻¹(c)∫Bβ)`,
//! running cost `⟨B*Bα, β⟩`, for a co-isometry `B: ℝⁿ → ℝᵐ` and `f ≤ 0`.
//!
//! Adding `q = Φ⁻¹(c)` to `f` turns it into the plain game for `q + f∘B`
//! with strategy `α + (q/2)β`, so its value is
//! `Φ⁻¹(∫Φ(q + f)dγ_m) − q = Φ_c⁻¹(∫Φ_c(f)dγ_m)`.

use std::sync::Arc;

use serde::Serialize;

use super::{simulate_paths, Control, GameConfig, GameEstimate, GradientChase, OptimalStrategy, Payoff, Strategy};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::gaussian::PhiCTransform;
use crate::means::MeanSpec;
use crate::quadrature::QuadratureRule;
use crate::value::{ProjectedValue, TabulatedValue, ValueFunction, ValueOracle};

/// `BB* = I_m` within `1e-12`.
pub fn check_coisometry(matrix: &[f64], rows: usize) -> Result<()> {
    if rows == 0 || matrix.len() % rows != 0 || matrix.len() / rows < rows {
        return Err(Error::FrameInvalid(format!(
            "a {rows}-row co-isometry needs at least {rows} columns (got {} entries)",
            matrix.len()
        )));
    }
    let n = matrix.len() / rows;
    for i in 0..rows {
        for j in 0..rows {
            let d: f64 = (0..n).map(|k| matrix[i * n + k] * matrix[j * n + k]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (d - want).abs() > 1e-12 {
                return Err(Error::FrameInvalid(format!("(BB*)[{i}][{j}] = {d}, expected {want}")));
            }
        }
    }
    Ok(())
}

fn projected_payoff(f: &ScalarField, matrix: &[f64], rows: usize, c: f64) -> Result<(Payoff, PhiCTransform)> {
    check_coisometry(matrix, rows)?;
    if f.dim() != rows {
        return Err(Error::Dimension {
            dim: f.dim(),
            reason: "field dimension must equal the number of rows of B",
        });
    }
    if f.range().1 > 0.0 {
        return Err(Error::Precondition(format!("projected game needs f <= 0, declared sup {}", f.range().1)));
    }
    let tr = PhiCTransform::new(c)?;
    Ok((
        Payoff {
            f: f.clone(),
            projection: Some((matrix.to_vec(), rows)),
            shift: 0.5 * tr.shift(),
        },
        tr,
    ))
}

/// Monte Carlo estimate of `J_f^{B,c}[α, β]`.
pub fn payoff_j_projected<SF, S, CF, C>(
    f: &ScalarField,
    matrix: &[f64],
    rows: usize,
    c: f64,
    strategies: SF,
    controls: CF,
    cfg: &GameConfig,
    cv: Option<&dyn ValueOracle>,
) -> Result<GameEstimate>
where
    SF: Fn(u64) -> S + Sync + Send,
    S: Strategy,
    CF: Fn(u64) -> C + Sync + Send,
    C: Control,
{
    let (payoff, _) = projected_payoff(f, matrix, rows, c)?;
    let out = simulate_paths(&payoff, strategies, controls, cfg, cv)?;
    GameEstimate::from_outcomes(&out, cfg.dt, cv.is_some())
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectedRun {
    pub c: f64,
    /// `Φ⁻¹(c)`.
    pub q: f64,
    pub estimate: GameEstimate,
    /// `Φ_c⁻¹(∫Φ_c(f)dγ_m)` by quadrature.
    pub target: f64,
}

/// The projected game under its optimal pair `α = (q/2 − w)∇(w∘B)`,
/// `β = −∇(w∘B)`, where `w` is the value function of `q + f`.
pub fn projected_optimal(
    f: &ScalarField,
    matrix: &[f64],
    rows: usize,
    c: f64,
    cfg: &GameConfig,
    rule: &QuadratureRule,
) -> Result<ProjectedRun> {
    let (payoff, tr) = projected_payoff(f, matrix, rows, c)?;
    let q = tr.shift();
    let g = ScalarField::affine(1.0, q, f.clone());
    let (lo, hi) = g.range();
    let spec = MeanSpec::phi().with_interval(lo.min(-8.0), hi.max(8.0))?;
    let w = ValueFunction::new(g, spec, rule)?;
    let target = w.value(0.0, &vec![0.0; rows]) - q;
    let inner: Arc<dyn ValueOracle> =
        if rows == 1 { Arc::new(TabulatedValue::build(&w, cfg.dt)?) } else { Arc::new(w) };
    let oracle = ProjectedValue::new(inner, matrix.to_vec(), rows)?;
    let out = simulate_paths(
        &payoff,
        |_| OptimalStrategy::with_beta_coefficient(&oracle, 0.5 * q, 0.0),
        |_| GradientChase::new(&oracle, 1.0),
        cfg,
        Some(&oracle),
    )?;
    Ok(ProjectedRun {
        c,
        q,
        estimate: GameEstimate::from_outcomes(&out, cfg.dt, true)?,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ZeroControl, ZeroStrategy};
    use crate::gaussian::phi;

    #[test]
    fn frame_condition_is_enforced() {
        assert!(check_coisometry(&[1.0, 0.0], 1).is_ok());
        assert!(check_coisometry(&[1.0, 1.0], 1).is_err());
        let f = ScalarField::constant(-0.2, 1).unwrap();
        let cfg = GameConfig::new(2).with_paths(10).with_dt(0.1);
        assert!(payoff_j_projected(&f, &[2.0, 0.0], 1, 0.5, |_| ZeroStrategy, |_| ZeroControl, &cfg, None).is_err());
        let pos = ScalarField::constant(0.2, 1).unwrap();
        assert!(payoff_j_projected(&pos, &[1.0, 0.0], 1, 0.5, |_| ZeroStrategy, |_| ZeroControl, &cfg, None).is_err());
    }

    #[test]
    fn constant_field_is_exact() {
        let f = ScalarField::constant(-0.2, 1).unwrap();
        let cfg = GameConfig::new(2).with_paths(50).with_dt(0.05);
        let run = projected_optimal(&f, &[1.0, 0.0], 1, 0.3, &cfg, &QuadratureRule::gauss_hermite(16).unwrap()).unwrap();
        assert!((run.estimate.mean + 0.2).abs() < 1e-12);
        assert!((run.target + 0.2).abs() < 1e-12);
        let zero = ScalarField::constant(0.0, 2).unwrap();
        let id = [1.0, 0.0, 0.0, 1.0];
        let run = projected_optimal(&zero, &id, 2, 0.7, &cfg, &QuadratureRule::gauss_hermite(8).unwrap()).unwrap();
        assert!(run.estimate.mean.abs() < 1e-12);
    }

    #[test]
    fn optimal_run_reaches_the_phi_c_mean() {
        let f = ScalarField::erf_ramp(0.0, 1.0, -1.0, -0.1, 1).unwrap();
        let s = 0.5f64.sqrt();
        let cfg = GameConfig::new(2).with_paths(4000).with_dt(1.0 / 200.0).with_seed(3);
        let c = 0.4;
        let run = projected_optimal(&f, &[s, s], 1, c, &cfg, &QuadratureRule::gauss_hermite(64).unwrap()).unwrap();
        let tr = PhiCTransform::new(c).unwrap();
        let mean = QuadratureRule::gauss_hermite(96)
            .unwrap()
            .integrate(|x| phi(f.value(x) + tr.shift()) / c)
            .unwrap();
        let oracle = tr.inv_finite(mean);
        assert!((run.target - oracle).abs() < 1e-10);
        let adj = run.estimate.adjusted.unwrap();
        assert!((adj.mean - oracle).abs() < 3.0 * adj.std_err + 2e-3, "{adj:?} vs {oracle}");
        assert!(run.estimate.raw().within(oracle, 3.0, 2e-3));
    }
}

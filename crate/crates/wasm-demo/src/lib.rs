//! Browser bindings for `www/index.html`: a value-function curve, an
//! Ehrhard check on the line and a small game simulation.

use wasm_bindgen::prelude::*;

use ehrhard_core::fieldspec;
use ehrhard_core::game::{payoff_j_cv, DiscreteResponder, GameConfig, OptimalStrategy};
use ehrhard_core::inequality::{verify_ehrhard, Verdict};
use ehrhard_core::quadrature::QuadratureRule;
use ehrhard_core::value::{TabulatedValue, ValueFunction};

fn js(e: ehrhard_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn phi_value(spec: &str, order: usize) -> Result<ValueFunction, ehrhard_core::Error> {
    let f = fieldspec::parse(spec)?;
    ValueFunction::phi(f, &QuadratureRule::gauss_hermite(order)?)
}

/// `[x₀, v(t, x₀), f(x₀), x₁, …]` on `points` nodes of `[−4, 4]`.
#[wasm_bindgen]
pub fn value_curve(spec: &str, t: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let vf = phi_value(spec, 64).map_err(js)?;
    if vf.dim() != 1 {
        return Err(JsError::new("the curve needs a one-dimensional field"));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(JsError::new("t must lie in [0, 1]"));
    }
    let n = points.clamp(2, 2001);
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let x = -4.0 + 8.0 * i as f64 / (n - 1) as f64;
        out.extend([x, vf.value(t, &[x]), vf.field().value(&[x])]);
    }
    Ok(out)
}

/// `[lhs, rhs, slack, verdict]` for `λΦ⁻¹(∫f) + (1 − λ)Φ⁻¹(∫g) ≤ Φ⁻¹(∫h)`
/// with the smallest admissible `h`; verdict 0 is a pass.
#[wasm_bindgen]
pub fn ehrhard_check(f: &str, g: &str, lambda: f64) -> Result<Vec<f64>, JsError> {
    let f = fieldspec::parse(f).map_err(js)?;
    let g = fieldspec::parse(g).map_err(js)?;
    let rule = QuadratureRule::composite(60, 8, 10.0).map_err(js)?;
    let r = verify_ehrhard(&f, &g, lambda, &rule).map_err(js)?;
    let verdict = match r.verdict {
        Verdict::Pass => 0.0,
        Verdict::HypothesisFail => 1.0,
        Verdict::InequalityFail => 2.0,
    };
    Ok(vec![r.lhs, r.rhs, r.slack, verdict])
}

/// `[v(0, 0), mean, std_err]` of the optimal strategy against the
/// per-step responder.
#[wasm_bindgen]
pub fn play_game(spec: &str, paths: usize, dt: f64, seed: u64) -> Result<Vec<f64>, JsError> {
    let vf = phi_value(spec, 48).map_err(js)?;
    if vf.dim() != 1 {
        return Err(JsError::new("the game demo needs a one-dimensional field"));
    }
    let cfg = GameConfig::new(1).with_dt(dt).with_paths(paths.clamp(1, 20_000)).with_seed(seed);
    let table = TabulatedValue::build(&vf, dt).map_err(js)?;
    let c = vf.default_c();
    let est = payoff_j_cv(
        vf.field(),
        |_| OptimalStrategy::new(&table, c),
        |_| DiscreteResponder::new(&table, 1),
        &cfg,
        Some(&table),
    )
    .map_err(js)?;
    let best = est.best();
    Ok(vec![vf.value(0.0, &[0.0]), best.mean, best.std_err])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_starts_at_the_left_edge() {
        let c = value_curve("linear(a=0.3,b=1)", 0.5, 5).unwrap();
        assert_eq!(c.len(), 15);
        assert_eq!(c[0], -4.0);
        assert_eq!(c[12], 4.0);
        // v(t, x) = (0.3 + x)/√(1 + (1 − t)) for the unclipped part.
        assert!((c[7] - 0.3 / 1.5f64.sqrt()).abs() < 1e-6, "{}", c[7]);
    }

    #[test]
    fn game_matches_the_value() {
        let r = play_game("erf_ramp(0,1,0.1,0.9)", 400, 0.02, 1).unwrap();
        assert!((r[1] - r[0]).abs() < 0.02, "{r:?}");
    }
}

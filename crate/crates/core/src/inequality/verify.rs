use serde::Serialize;
use serde_json::{Map, Value};

use super::{minimal_h, minimal_h_for, LinearConstraint, ProjectionFrame, Transform};
use crate::error::{Error, Result};
use crate::field::{Kind, ScalarField};
use crate::game::map_paths;
use crate::gaussian::admissible_correlation;
use crate::quadrature::{Neumaier, QuadratureRule, RuleKind, MAX_TENSOR_DIM};

pub const AUDIT_SAMPLES: usize = 4096;
pub const AUDIT_TOLERANCE: f64 = 1e-9;
pub const SLACK_TOLERANCE: f64 = 1e-8;
const AUDIT_BOX: f64 = 5.0;
const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    /// The hypothesis audit found a tuple the candidate `h` does not cover.
    HypothesisFail,
    InequalityFail,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisAudit {
    pub samples: usize,
    /// Largest `T⁻¹(Σcᵢ T(fᵢ(xᵢ))) − h(Σcᵢ Bᵢ*xᵢ)` seen.
    pub max_violation: f64,
    pub worst_tuple: Option<Vec<f64>>,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralEstimate {
    pub label: String,
    pub dim: usize,
    pub value: f64,
    /// Difference with the same integral at half the resolution.
    pub error: f64,
    pub points_per_axis: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub inequality: String,
    pub transform: Transform,
    pub parameters: Map<String, Value>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    /// Integration errors carried through `T`.
    pub slack_error: f64,
    pub tolerance: f64,
    pub integrals: Vec<IntegralEstimate>,
    pub audit: HypothesisAudit,
    pub verdict: Verdict,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn integral(&self, label: &str) -> Option<&IntegralEstimate> {
        self.integrals.iter().find(|i| i.label == label)
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut r, mut f) = (0.0, 1.0 / base as f64);
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f /= base as f64;
    }
    r
}

/// Halton points in `[−5, 5]^N`, then the origin, the corners and the
/// axis points of the box.
fn audit_tuples(dim: usize, samples: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (1..=samples as u64)
        .map(|i| {
            (0..dim)
                .map(|k| AUDIT_BOX * (2.0 * radical_inverse(i, PRIMES[k % PRIMES.len()]) - 1.0))
                .collect()
        })
        .collect();
    out.push(vec![0.0; dim]);
    if dim <= 10 {
        for mask in 0..1u32 << dim {
            out.push((0..dim).map(|k| if mask >> k & 1 == 1 { AUDIT_BOX } else { -AUDIT_BOX }).collect());
        }
    }
    for k in 0..dim {
        for s in [-AUDIT_BOX, AUDIT_BOX] {
            let mut p = vec![0.0; dim];
            p[k] = s;
            out.push(p);
        }
    }
    out
}

/// Checks `h(Σcᵢ Bᵢ*xᵢ) ≥ T⁻¹(Σcᵢ T(fᵢ(xᵢ)))` on quasi-random and extreme
/// tuples, in the value scale of `h`.
pub fn audit_hypothesis(
    fields: &[ScalarField],
    constraint: &LinearConstraint,
    h: &ScalarField,
    transform: Transform,
    samples: usize,
) -> HypothesisAudit {
    let tuples = audit_tuples(constraint.tuple_dim(), samples);
    let offsets = constraint.offsets();
    let violations = map_paths(tuples.len(), |i| {
        let z = &tuples[i as usize];
        let mut s = 0.0;
        for (j, f) in fields.iter().enumerate() {
            let c = constraint.coefficients[j];
            if c != 0.0 {
                s += c * transform.of_field(f, &z[offsets[j]..offsets[j] + constraint.dims[j]]);
            }
        }
        let mut x = vec![0.0; constraint.n];
        constraint.combine(z, &mut x);
        transform.inverse(s) - h.value(&x)
    });
    let (worst, max_violation) = violations
        .iter()
        .enumerate()
        .fold((None, f64::NEG_INFINITY), |(w, m), (i, &v)| if v > m { (Some(i), v) } else { (w, m) });
    HypothesisAudit {
        samples: tuples.len(),
        max_violation,
        worst_tuple: worst.map(|i| tuples[i].clone()),
        tolerance: AUDIT_TOLERANCE,
        passed: max_violation <= AUDIT_TOLERANCE,
    }
}

fn coarser(rule: &QuadratureRule) -> Result<QuadratureRule> {
    match rule.kind() {
        RuleKind::GaussHermite => QuadratureRule::gauss_hermite((rule.order() / 2).max(1)),
        RuleKind::CompositeLegendre {
            panels,
            per_panel,
            half_width,
        } => QuadratureRule::composite((panels / 2).max(1), per_panel, half_width),
    }
}

/// Tensor quadrature with parallel evaluation and an ordered sum.
fn tensor_sum(rule: &QuadratureRule, f: &ScalarField) -> Result<f64> {
    let dim = f.dim();
    if dim > MAX_TENSOR_DIM {
        return Err(Error::Dimension {
            dim,
            reason: "inequality integrals use tensor quadrature only",
        });
    }
    let (nodes, weights) = (rule.nodes(), rule.weights());
    let m = nodes.len();
    let terms = map_paths(m.pow(dim as u32), |idx| {
        let (mut idx, mut w) = (idx as usize, 1.0);
        let mut p = vec![0.0; dim];
        for slot in p.iter_mut() {
            *slot = nodes[idx % m];
            w *= weights[idx % m];
            idx /= m;
        }
        w * f.value(&p)
    });
    let mut acc = Neumaier::default();
    terms.iter().for_each(|&t| acc.add(t));
    Ok(acc.sum())
}

fn integrate(label: &str, f: &ScalarField, rule: &QuadratureRule) -> Result<IntegralEstimate> {
    let value = tensor_sum(rule, f)?;
    let error = (value - tensor_sum(&coarser(rule)?, f)?).abs();
    Ok(IntegralEstimate {
        label: label.to_string(),
        dim: f.dim(),
        value,
        error,
        points_per_axis: rule.order(),
    })
}

fn propagated(t: Transform, i: &IntegralEstimate) -> f64 {
    let base = t.forward(i.value);
    let up = t.forward((i.value + i.error).min(1.0)) - base;
    let down = base - t.forward((i.value - i.error).max(0.0));
    let e = up.abs().max(down.abs());
    if e.is_finite() {
        e
    } else {
        f64::INFINITY
    }
}

/// Compares `Σcᵢ T(∫fᵢ dγ_{nᵢ})` with `T(∫h dγₙ)` and audits the
/// pointwise hypothesis for the given `h`.
pub fn verify_tuple(
    inequality: &str,
    fields: &[ScalarField],
    constraint: &LinearConstraint,
    h: &ScalarField,
    transform: Transform,
    rule: &QuadratureRule,
    audit_samples: usize,
) -> Result<InequalityReport> {
    if fields.len() != constraint.k() || h.dim() != constraint.n {
        return Err(Error::Precondition(format!(
            "{} fields and h on R^{} do not fit a {}-term constraint on R^{}",
            fields.len(),
            h.dim(),
            constraint.k(),
            constraint.n
        )));
    }
    let audit = audit_hypothesis(fields, constraint, h, transform, audit_samples);
    let mut integrals = Vec::with_capacity(fields.len() + 1);
    let (mut lhs, mut err) = (Neumaier::default(), 0.0);
    for (i, f) in fields.iter().enumerate() {
        let est = integrate(&format!("f{}", i + 1), f, rule)?;
        let c = constraint.coefficients[i];
        if c != 0.0 {
            lhs.add(c * transform.forward(est.value));
            err += c * propagated(transform, &est);
        }
        integrals.push(est);
    }
    let hi = integrate("h", h, rule)?;
    let rhs = transform.forward(hi.value);
    err += propagated(transform, &hi);
    integrals.push(hi);
    let lhs = lhs.sum();
    let slack = if lhs == f64::NEG_INFINITY { f64::INFINITY } else { rhs - lhs };
    let verdict = if !audit.passed {
        Verdict::HypothesisFail
    } else if slack >= -SLACK_TOLERANCE {
        Verdict::Pass
    } else {
        Verdict::InequalityFail
    };
    let mut parameters = Map::new();
    parameters.insert("coefficients".into(), serde_json::to_value(&constraint.coefficients).expect("finite"));
    parameters.insert("points_per_axis".into(), rule.order().into());
    parameters.insert("audit_samples".into(), audit_samples.into());
    Ok(InequalityReport {
        inequality: inequality.to_string(),
        transform,
        parameters,
        lhs,
        rhs,
        slack,
        slack_error: err,
        tolerance: SLACK_TOLERANCE,
        integrals,
        audit,
        verdict,
    })
}

fn strictly_inside(f: &ScalarField) -> Result<()> {
    let (lo, hi) = f.range();
    // Φ∘u keeps its Φ⁻¹ values exact even where Φ(u) rounds to 0 or 1.
    let tail_exact = matches!(f.kind, Kind::PhiOf(_));
    if !(tail_exact || lo > 0.0 && hi < 1.0) {
        return Err(Error::Range {
            lo,
            hi,
            allowed_lo: 0.0,
            allowed_hi: 1.0,
        });
    }
    if f.dim() != 1 {
        return Err(Error::Dimension {
            dim: f.dim(),
            reason: "two-set inequalities are checked on the line",
        });
    }
    Ok(())
}

/// `λΦ⁻¹(∫f) + (1 − λ)Φ⁻¹(∫g) ≤ Φ⁻¹(∫h)` for the minimal `h`.
pub fn verify_ehrhard(f: &ScalarField, g: &ScalarField, lambda: f64, rule: &QuadratureRule) -> Result<InequalityReport> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain {
            what: "Ehrhard lambda",
            value: lambda,
        });
    }
    two_set("ehrhard", f, g, lambda, 1.0 - lambda, None, rule)
}

/// [`verify_ehrhard`] for a given `h`, audited against the hypothesis.
pub fn verify_ehrhard_with(
    f: &ScalarField,
    g: &ScalarField,
    h: &ScalarField,
    lambda: f64,
    rule: &QuadratureRule,
) -> Result<InequalityReport> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain {
            what: "Ehrhard lambda",
            value: lambda,
        });
    }
    two_set("ehrhard", f, g, lambda, 1.0 - lambda, Some(h), rule)
}

/// Smoothed indicator of `{x ≤ a}`: `Φ(u)` with `u = (a − x)/σ` smoothly
/// clipped to `[−1.5/σ, 0.5/σ]`. The floor sits three times deeper than
/// the cap so that, for `λ ∈ (1/4, 3/4)`, pairing one factor's plateau with
/// the other's floor never beats the halfspace value.
pub fn smoothed_halfspace(a: f64, sigma: f64) -> Result<ScalarField> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain {
            what: "halfspace smoothing",
            value: sigma,
        });
    }
    Ok(ScalarField::phi_of(ScalarField::linear(a / sigma, -1.0 / sigma, -1.5 / sigma, 0.5 / sigma, 1)?))
}

/// `λΦ⁻¹(∫f) + μΦ⁻¹(∫g) ≤ Φ⁻¹(∫h)` for admissible `(λ, μ)`.
pub fn verify_borell(
    f: &ScalarField,
    g: &ScalarField,
    lambda: f64,
    mu: f64,
    rule: &QuadratureRule,
) -> Result<InequalityReport> {
    admissible_correlation(lambda, mu)?;
    two_set("borell", f, g, lambda, mu, None, rule)
}

/// [`verify_borell`] for a given `h`.
pub fn verify_borell_with(
    f: &ScalarField,
    g: &ScalarField,
    h: &ScalarField,
    lambda: f64,
    mu: f64,
    rule: &QuadratureRule,
) -> Result<InequalityReport> {
    admissible_correlation(lambda, mu)?;
    two_set("borell", f, g, lambda, mu, Some(h), rule)
}

fn two_set(
    name: &str,
    f: &ScalarField,
    g: &ScalarField,
    lambda: f64,
    mu: f64,
    h: Option<&ScalarField>,
    rule: &QuadratureRule,
) -> Result<InequalityReport> {
    strictly_inside(f)?;
    strictly_inside(g)?;
    let constraint = LinearConstraint::two(lambda, mu)?;
    let fields = [f.clone(), g.clone()];
    let h = match h {
        Some(h) => {
            strictly_inside(h)?;
            h.clone()
        }
        None => minimal_h_for(&fields, &constraint, Transform::PhiInv)?,
    };
    let mut r = verify_tuple(name, &fields, &constraint, &h, Transform::PhiInv, rule, AUDIT_SAMPLES)?;
    r.parameters.insert("lambda".into(), lambda.into());
    r.parameters.insert("mu".into(), mu.into());
    Ok(r)
}

/// `Σλᵢ Φ_c⁻¹(∫fᵢ dγ_{nᵢ}) ≤ Φ_c⁻¹(∫h dγₙ)` for the minimal `h`.
pub fn verify_gbl(frame: &ProjectionFrame, fields: &[ScalarField], c: f64, rule: &QuadratureRule) -> Result<InequalityReport> {
    let t = Transform::phi_c(c)?;
    let h = minimal_h(fields, frame, t)?;
    let mut r = verify_tuple("gbl", fields, frame.constraint(), &h, t, rule, AUDIT_SAMPLES)?;
    r.parameters.insert("c".into(), c.into());
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gh(m: usize) -> QuadratureRule {
        QuadratureRule::gauss_hermite(m).unwrap()
    }

    fn ramp(center: f64, sigma: f64) -> ScalarField {
        ScalarField::erf_ramp(center, sigma, 0.02, 0.97, 1).unwrap()
    }

    #[test]
    fn parallel_halfspaces_close_the_gap() {
        let rule = QuadratureRule::composite(200, 8, 10.0).unwrap();
        let mut last = f64::INFINITY;
        for sigma in [0.2, 0.1, 0.05] {
            let f = smoothed_halfspace(0.3, sigma).unwrap();
            let g = smoothed_halfspace(-0.6, sigma).unwrap();
            let r = verify_ehrhard(&f, &g, 0.5, &rule).unwrap();
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
            assert!(r.slack.abs() < last, "sigma {sigma}: {} after {last}", r.slack);
            last = r.slack.abs();
        }
        assert!(last < 1e-9);
    }

    #[test]
    fn halton_points_fill_the_box() {
        let pts = audit_tuples(2, 1000);
        assert_eq!(pts.len(), 1000 + 1 + 4 + 4);
        let mean: f64 = pts[..1000].iter().map(|p| p[0]).sum::<f64>() / 1000.0;
        assert!(mean.abs() < 0.05);
        assert!(pts.iter().all(|p| p.iter().all(|v| v.abs() <= AUDIT_BOX)));
        assert_eq!(radical_inverse(6, 2), 0.375);
    }

    #[test]
    fn identical_sets_hold_with_equality_for_h_equal_f() {
        let f = ramp(0.4, 0.8);
        let c = LinearConstraint::two(0.3, 0.7).unwrap();
        let r = verify_tuple("ehrhard", &[f.clone(), f.clone()], &c, &f, Transform::PhiInv, &gh(64), 512).unwrap();
        // h = f is admissible only when Φ⁻¹∘f is concave, which this ramp is not.
        assert!(r.slack.abs() < 1e-10);
        let minimal = verify_ehrhard(&f, &f, 0.3, &gh(64)).unwrap();
        assert!(minimal.passed(), "{minimal:?}");
        for x in [-2.0, 0.0, 1.0] {
            assert!(minimal_h_for(&[f.clone(), f.clone()], &c, Transform::PhiInv).unwrap().value(&[x]) >= f.value(&[x]));
        }
    }

    #[test]
    fn undersized_h_fails_the_audit_not_the_inequality() {
        let f = ramp(0.0, 1.0);
        let g = ramp(1.0, 0.5);
        let c = LinearConstraint::two(0.5, 0.5).unwrap();
        let small = ScalarField::affine(0.5, 0.0, ScalarField::mix(0.5, f.clone(), g.clone()).unwrap());
        let r = verify_tuple("ehrhard", &[f, g], &c, &small, Transform::PhiInv, &gh(32), 256).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisFail);
        assert!(r.audit.max_violation > 0.1);
        assert!(r.audit.worst_tuple.is_some());
    }

    #[test]
    fn borell_coefficients() {
        let f = ramp(-0.3, 0.6);
        let g = ramp(0.5, 0.9);
        let r = verify_borell(&f, &g, 1.0, 1.0, &gh(64)).unwrap();
        assert!(r.passed(), "{r:?}");
        let mono = verify_borell(&f, &g, 1.0, 0.0, &gh(64)).unwrap();
        assert!(mono.passed());
        assert!(mono.integral("h").unwrap().value >= mono.integral("f1").unwrap().value - 1e-12);
        for (l, m, cond) in [(2.0, 0.5, "|lambda - mu| <= 1"), (0.4, 0.4, "lambda + mu >= 1")] {
            match verify_borell(&f, &g, l, m, &gh(16)) {
                Err(Error::Admissibility { condition, .. }) => assert_eq!(condition, cond),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn log_scale_passes_where_phi_scale_passes() {
        let f = ramp(-0.5, 0.7);
        let g = ScalarField::bump(0.8, 1.0, 0.1, 0.9, 1).unwrap();
        let lam = 0.3;
        let c = LinearConstraint::two(lam, 1.0 - lam).unwrap();
        let fields = [f, g];
        let h = minimal_h_for(&fields, &c, Transform::PhiInv).unwrap();
        let phi_r = verify_tuple("ehrhard", &fields, &c, &h, Transform::PhiInv, &gh(64), 1024).unwrap();
        let log_r = verify_tuple("ehrhard", &fields, &c, &h, Transform::Log, &gh(64), 1024).unwrap();
        assert!(phi_r.passed() && log_r.passed(), "{phi_r:?} {log_r:?}");
    }

    #[test]
    fn gbl_on_the_three_direction_frame() {
        let frame = ProjectionFrame::three_directions();
        let fields = vec![
            ScalarField::erf_ramp(0.2, 0.8, 0.05, 1.0, 1).unwrap(),
            ScalarField::bump(-0.4, 1.1, 0.2, 0.95, 1).unwrap(),
            ScalarField::logistic(0.5, 0.6, 0.9, 0.1, 1).unwrap(),
        ];
        for c in [0.1, 0.5, 0.9] {
            let r = verify_gbl(&frame, &fields, c, &gh(32)).unwrap();
            assert!(r.passed(), "c={c}: {r:?}");
            // Any larger h only helps.
            let h = minimal_h(&fields, &frame, Transform::phi_c(c).unwrap()).unwrap();
            let one = ScalarField::constant(1.0, 2).unwrap();
            let bigger = ScalarField::mix(0.8, h, one).unwrap();
            let r2 = verify_tuple("gbl", &fields, frame.constraint(), &bigger, Transform::phi_c(c).unwrap(), &gh(32), 256)
                .unwrap();
            assert!(r2.slack >= r.slack);
        }
    }

    #[test]
    fn orthogonal_frame_reproduces_products() {
        let frame = ProjectionFrame::orthogonal(2).unwrap();
        let a = ScalarField::logistic(0.3, 0.01, 1e-9, 1.0, 1).unwrap();
        let b = ScalarField::logistic(-0.8, 0.01, 1e-9, 1.0, 1).unwrap();
        let rule = QuadratureRule::composite(120, 6, 8.0).unwrap();
        let r = verify_gbl(&frame, &[a, b], 0.5, &rule).unwrap();
        let p = r.integral("f1").unwrap().value * r.integral("f2").unwrap().value;
        assert!((r.integral("h").unwrap().value - p).abs() < 1e-3, "{r:?}");
        assert!(r.passed());
    }
}

//! `𝔐_F` by quadrature, the Bellman residual, and Monte Carlo payoffs of
//! the stochastic representations: `K_f` for convex `𝔐_F`, its two-control
//! form for `x eˣ`, and the three-control game for `1 − e^{−x²/2}`.

use serde::Serialize;

use super::{hlp_check, r_closed_form, MeanSpec};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::game::{GameConfig, GameEstimate, Payoff, PathOutcome, Control, Strategy};
use crate::gaussian::Extended;
use crate::quadrature::{Neumaier, QuadratureRule};
use crate::rng::RngStream;
use crate::value::{pde_residual, ValueFunction, ValueOracle};

/// `𝔐_F(f) = F⁻¹(∫F(f)dγₙ)` by tensor quadrature (`n ≤ 3`).
pub fn generalized_mean(spec: &MeanSpec, f: &ScalarField, rule: &QuadratureRule) -> Result<f64> {
    let vf = ValueFunction::new(f.clone(), spec.clone(), rule)?;
    Ok(vf.value(0.0, &vec![0.0; f.dim()]))
}

/// `|∂ₜv + ½Δv + ½(F″(v)/F′(v))‖∇v‖²|` at `(t, x)`.
pub fn bellman_residual(spec: &MeanSpec, f: &ScalarField, t: f64, x: &[f64], rule: &QuadratureRule) -> Result<f64> {
    let vf = ValueFunction::new(f.clone(), spec.clone(), rule)?;
    pde_residual(&vf, t, x)
}

/// Controls of `K_f`: writes `α_k` and returns the scalar `β_k`.
pub trait KControls: Send {
    fn act(&mut self, k: usize, t: f64, x: &[f64], alpha: &mut [f64]) -> f64;
}

/// Constant `(α, β)`.
#[derive(Debug, Clone)]
pub struct KConstant {
    pub alpha: Vec<f64>,
    pub beta: f64,
}

impl KControls for KConstant {
    fn act(&mut self, _: usize, _: f64, _: &[f64], alpha: &mut [f64]) -> f64 {
        alpha.copy_from_slice(&self.alpha);
        self.beta
    }
}

/// `α* = (F″/F′)(v)∇v`, `β* = F′F‴/F″²(v) − 1`, with `v` kept `1e-3` inside
/// `I` so the drift stays bounded.
pub struct KOptimal<'a, O: ?Sized> {
    oracle: &'a O,
    spec: MeanSpec,
}

impl<'a, O: ValueOracle + ?Sized> KOptimal<'a, O> {
    pub fn new(oracle: &'a O, spec: MeanSpec) -> Self {
        Self { oracle, spec }
    }
}

const BOUNDARY_MARGIN: f64 = 1e-3;

fn inside(spec: &MeanSpec, v: f64) -> f64 {
    let (lo, hi) = spec.interval();
    v.clamp(lo + BOUNDARY_MARGIN, hi - BOUNDARY_MARGIN)
}

impl<O: ValueOracle + ?Sized> KControls for KOptimal<'_, O> {
    fn act(&mut self, _: usize, t: f64, x: &[f64], alpha: &mut [f64]) -> f64 {
        let v = inside(&self.spec, self.oracle.value_and_grad(t, x, alpha));
        let r = self.spec.ratio(v);
        alpha.iter_mut().for_each(|a| *a *= r);
        self.spec.beta_star(v)
    }
}

/// Shared path loop: `payoff = G_N f(X_N) − Σ G_k cost_k dt` with
/// `G_{k+1} = G_k e^{growth_k dt}` and `dX = α dt + dW`.
fn k_path<St>(
    f: &ScalarField,
    steps: usize,
    stream: RngStream,
    cv: Option<&dyn ValueOracle>,
    mut step: St,
) -> Result<PathOutcome>
where
    St: FnMut(usize, f64, &[f64], &mut [f64]) -> Result<(f64, f64)>,
{
    let n = f.dim();
    let dt = 1.0 / steps as f64;
    let mut rng = stream.generator();
    let (mut x, mut alpha, mut dw, mut grad) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut cost, mut mart) = (Neumaier::default(), Neumaier::default());
    let mut g = 1.0;
    for k in 0..steps {
        let t = k as f64 * dt;
        let (growth, c) = step(k, t, &x, &mut alpha)?;
        cost.add(g * c * dt);
        crate::game::normals(&mut rng, dt.sqrt(), &mut dw);
        if let Some(o) = cv {
            o.value_and_grad(t, &x, &mut grad);
            mart.add(g * grad.iter().zip(&dw).map(|(a, b)| a * b).sum::<f64>());
        }
        for i in 0..n {
            x[i] += alpha[i] * dt + dw[i];
        }
        g *= (growth * dt).exp();
    }
    Ok(PathOutcome {
        payoff: g * f.value(&x) - cost.sum(),
        discount: g,
        martingale: mart.sum(),
    })
}

fn run_paths<F>(cfg: &GameConfig, path: F) -> Result<GameEstimate>
where
    F: Fn(u64) -> Result<PathOutcome> + Sync + Send,
{
    let results = crate::game::map_paths(cfg.paths, path);
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        out.push(r?);
    }
    Ok(out)
        .and_then(|o: Vec<PathOutcome>| GameEstimate::from_outcomes(&o, cfg.dt, false).map(|e| (e, o)))
        .map(|(mut e, o)| {
            if o.iter().any(|p| p.martingale != 0.0) {
                e = GameEstimate::from_outcomes(&o, cfg.dt, true).expect("finite payoffs");
            }
            e
        })
}

fn check_k_inputs(spec: &MeanSpec, f: &ScalarField, cfg: &GameConfig) -> Result<usize> {
    let verdict = hlp_check(spec);
    if !verdict.convex {
        return Err(Error::NotConvex {
            name: spec.name(),
            witness: verdict.witness.unwrap_or_default(),
        });
    }
    let (lo, hi) = f.range();
    let (ilo, ihi) = spec.interval();
    if lo < ilo || hi > ihi {
        return Err(Error::Range {
            lo,
            hi,
            allowed_lo: ilo,
            allowed_hi: ihi,
        });
    }
    if f.dim() != cfg.dim {
        return Err(Error::Dimension {
            dim: cfg.dim,
            reason: "game dimension differs from the field",
        });
    }
    cfg.steps()
}

/// Monte Carlo estimate of
/// `K_f[α, β] = E[e^{½∫β‖α‖²} f(W₁ + ∫α) − ½∫e^{½∫₀ᵗβ‖α‖²} R(β)‖α‖² dt]`.
/// A step with `R(β) = +∞` is rejected.
pub fn payoff_k<CF, C>(
    spec: &MeanSpec,
    f: &ScalarField,
    controls: CF,
    cfg: &GameConfig,
    cv: Option<&dyn ValueOracle>,
) -> Result<GameEstimate>
where
    CF: Fn(u64) -> C + Sync + Send,
    C: KControls,
{
    let steps = check_k_inputs(spec, f, cfg)?;
    let seed = cfg.seed;
    run_paths(cfg, |p| {
        let mut ctl = controls(p);
        let mut last: Option<(f64, f64)> = None;
        k_path(f, steps, RngStream::new(seed, p), cv, |k, t, x, alpha| {
            let beta = ctl.act(k, t, x, alpha);
            let r = match last {
                Some((b, r)) if b == beta => r,
                _ => match r_closed_form(spec, beta)? {
                    Extended::Finite(r) => r,
                    _ => return Err(Error::InfiniteConjugate { step: k, beta }),
                },
            };
            last = Some((beta, r));
            let a2: f64 = alpha.iter().map(|a| a * a).sum();
            Ok((0.5 * beta * a2, 0.5 * r * a2))
        })
    })
}

/// Controls `(α, η)` of the `x eˣ` representation.
pub trait EtaControls: Send {
    fn act(&mut self, k: usize, t: f64, x: &[f64], alpha: &mut [f64], eta: &mut [f64]);
}

/// `α* = (2 + v)/(1 + v)∇v`, `η* = ∇v/(1 + v)`.
pub struct XExpEtaOptimal<'a, O: ?Sized> {
    oracle: &'a O,
    spec: MeanSpec,
}

impl<'a, O: ValueOracle + ?Sized> XExpEtaOptimal<'a, O> {
    pub fn new(oracle: &'a O, spec: MeanSpec) -> Self {
        Self { oracle, spec }
    }
}

impl<O: ValueOracle + ?Sized> EtaControls for XExpEtaOptimal<'_, O> {
    fn act(&mut self, _: usize, t: f64, x: &[f64], alpha: &mut [f64], eta: &mut [f64]) {
        let v = inside(&self.spec, self.oracle.value_and_grad(t, x, alpha));
        for (a, e) in alpha.iter_mut().zip(eta.iter_mut()) {
            *e = *a / (1.0 + v);
            *a *= (2.0 + v) / (1.0 + v);
        }
    }
}

/// `E[e^{−½∫‖η‖²} f(W₁ + ∫α) − ½∫e^{−½∫₀ᵗ‖η‖²}(‖η‖² + ‖α − η‖²)dt]`,
/// whose supremum is `W(∫f eᶠ dγₙ)` for `f` with values in `[0, C]`.
pub fn payoff_k_xexp_eta<CF, C>(
    spec: &MeanSpec,
    f: &ScalarField,
    controls: CF,
    cfg: &GameConfig,
    cv: Option<&dyn ValueOracle>,
) -> Result<GameEstimate>
where
    CF: Fn(u64) -> C + Sync + Send,
    C: EtaControls,
{
    if !matches!(spec.kind(), super::MeanKind::XExp(_)) {
        return Err(Error::Precondition(format!("eta form is specific to xexp, got {}", spec.name())));
    }
    let steps = check_k_inputs(spec, f, cfg)?;
    let seed = cfg.seed;
    let n = f.dim();
    run_paths(cfg, |p| {
        let mut ctl = controls(p);
        let mut eta = vec![0.0; n];
        k_path(f, steps, RngStream::new(seed, p), cv, |k, t, x, alpha| {
            ctl.act(k, t, x, alpha, &mut eta);
            let e2: f64 = eta.iter().map(|e| e * e).sum();
            let d2: f64 = alpha.iter().zip(&eta).map(|(a, e)| (a - e) * (a - e)).sum();
            Ok((-0.5 * e2, 0.5 * (e2 + d2)))
        })
    })
}

/// Runs `α` and the auxiliary drift `α̃` side by side: `α̃` is whatever
/// the second strategy writes as its own `α`.
struct Split<A, T> {
    alpha: A,
    tilde: T,
    scratch: Vec<f64>,
}

impl<A: Strategy, T: Strategy> Strategy for Split<A, T> {
    fn act(&mut self, k: usize, t: f64, x: &[f64], beta: &[f64], alpha: &mut [f64], alpha_tilde: &mut [f64]) {
        self.alpha.act(k, t, x, beta, alpha, &mut self.scratch);
        self.tilde.act(k, t, x, beta, alpha_tilde, &mut self.scratch);
    }
}

/// The optimal auxiliary drift `α̃ = ∇v/v` of the `1 − e^{−x²/2}` game.
pub struct NonconvexTilde<'a, O: ?Sized> {
    oracle: &'a O,
}

impl<'a, O: ValueOracle + ?Sized> NonconvexTilde<'a, O> {
    pub fn new(oracle: &'a O) -> Self {
        Self { oracle }
    }
}

impl<O: ValueOracle + ?Sized> Strategy for NonconvexTilde<'_, O> {
    fn act(&mut self, _: usize, t: f64, x: &[f64], _: &[f64], alpha: &mut [f64], _: &mut [f64]) {
        let v = self.oracle.value_and_grad(t, x, alpha);
        alpha.iter_mut().for_each(|a| *a /= v);
    }
}

/// Payoff of the three-control game with discount `e^{−½∫(‖α̃‖² + ‖β‖²)}`
/// and drift `α + α̃`. With `α̃ ≡ 0` this is exactly the `Φ` game.
pub fn payoff_nonconvex_example<AF, A, TF, T, CF, C>(
    f: &ScalarField,
    alpha: AF,
    alpha_tilde: TF,
    beta: CF,
    cfg: &GameConfig,
    cv: Option<&dyn ValueOracle>,
) -> Result<GameEstimate>
where
    AF: Fn(u64) -> A + Sync + Send,
    A: Strategy,
    TF: Fn(u64) -> T + Sync + Send,
    T: Strategy,
    CF: Fn(u64) -> C + Sync + Send,
    C: Control,
{
    if f.range().0 < 0.0 {
        return Err(Error::Precondition(format!("field must be non-negative, declared inf {}", f.range().0)));
    }
    let n = f.dim();
    let payoff = Payoff::new(f.clone());
    let out = crate::game::simulate_paths(
        &payoff,
        |p| Split {
            alpha: alpha(p),
            tilde: alpha_tilde(p),
            scratch: vec![0.0; n],
        },
        beta,
        cfg,
        cv,
    )?;
    GameEstimate::from_outcomes(&out, cfg.dt, cv.is_some())
}

/// `√(−2 log ∫e^{−f²/2}dγₙ)` by direct quadrature.
pub fn nonconvex_optimal_value(f: &ScalarField, rule: &QuadratureRule) -> Result<f64> {
    let rule = rule.clone().with_dim(f.dim());
    let m = rule.integrate(|x| {
        let v = f.value(x);
        (-0.5 * v * v).exp()
    })?;
    Ok((-2.0 * m.ln()).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityWitness {
    pub first: usize,
    pub second: usize,
    pub lambda: f64,
    /// `𝔐(λf + (1 − λ)g) − λ𝔐(f) − (1 − λ)𝔐(g)`.
    pub excess: f64,
}

/// Searches pairs of `fields` and `lambdas` for a violation of convexity of
/// `𝔐_F` larger than `1e-6`; returns the largest one found.
pub fn find_convexity_violation(
    spec: &MeanSpec,
    fields: &[ScalarField],
    lambdas: &[f64],
    rule: &QuadratureRule,
) -> Result<Option<ConvexityWitness>> {
    let means: Vec<f64> = fields.iter().map(|f| generalized_mean(spec, f, rule)).collect::<Result<_>>()?;
    let mut best: Option<ConvexityWitness> = None;
    for i in 0..fields.len() {
        for j in 0..fields.len() {
            if i == j || fields[i].dim() != fields[j].dim() {
                continue;
            }
            for &l in lambdas {
                let mix = ScalarField::mix(l, fields[i].clone(), fields[j].clone())?;
                let excess = generalized_mean(spec, &mix, rule)? - l * means[i] - (1.0 - l) * means[j];
                if excess > 1e-6 && best.as_ref().is_none_or(|b| excess > b.excess) {
                    best = Some(ConvexityWitness {
                        first: i,
                        second: j,
                        lambda: l,
                        excess,
                    });
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GradientChase, OptimalStrategy, ZeroStrategy};
    use crate::gaussian::lambert_w;
    use crate::value::TabulatedValue;

    fn gh(m: usize) -> QuadratureRule {
        QuadratureRule::gauss_hermite(m).unwrap()
    }

    #[test]
    fn generalized_means_of_simple_fields() {
        let k = ScalarField::constant(0.7, 1).unwrap();
        for spec in [MeanSpec::exp(), MeanSpec::power(2.0).unwrap(), MeanSpec::phi(), MeanSpec::gauss_tail()] {
            assert!((generalized_mean(&spec, &k, &gh(16)).unwrap() - 0.7).abs() < 1e-12, "{}", spec.name());
        }
        // ∫eˣ dγ₁ = e^{1/2}.
        let mut last = f64::INFINITY;
        for clip in [2.0, 4.0, 8.0] {
            let f = ScalarField::linear(0.0, 1.0, -clip, clip, 1).unwrap();
            let spec = MeanSpec::exp().with_interval(-clip, clip).unwrap();
            let dev = (generalized_mean(&spec, &f, &gh(128)).unwrap() - 0.5).abs();
            assert!(dev < last);
            last = dev;
        }
        assert!(last < 1e-8);
        let f = ScalarField::linear(0.0, 1.0, -12.0, 12.0, 1).unwrap();
        assert!(generalized_mean(&MeanSpec::exp(), &f, &gh(16)).is_err());
    }

    #[test]
    fn bellman_residual_for_exp_linear() {
        let spec = MeanSpec::exp().with_interval(-9.0, 9.0).unwrap();
        let f = ScalarField::linear(0.2, 0.5, -8.0, 8.0, 1).unwrap();
        for &(t, x) in &[(0.1, -1.0), (0.5, 0.0), (0.9, 2.0)] {
            let r = bellman_residual(&spec, &f, t, &[x], &gh(64)).unwrap();
            assert!(r < 1e-6, "{r}");
        }
        let vf = ValueFunction::new(f, spec, &gh(64)).unwrap();
        let want = 0.2 + 0.5 * 0.3 + 0.5 * 0.25 * 0.6;
        assert!((vf.value(0.4, &[0.3]) - want).abs() < 1e-10);
    }

    #[test]
    fn zero_drift_gives_the_plain_mean() {
        let spec = MeanSpec::power(2.0).unwrap();
        let f = ScalarField::erf_ramp(0.0, 1.0, 0.5, 2.0, 1).unwrap();
        let cfg = GameConfig::new(1).with_dt(0.05).with_paths(20_000).with_seed(2);
        let est = payoff_k(&spec, &f, |_| KConstant { alpha: vec![0.0], beta: -1.0 }, &cfg, None).unwrap();
        let exact = gh(64).integrate(|x| f.value(x)).unwrap();
        assert!(est.raw().within(exact, 3.0, 0.0));
        let bad = payoff_k(&spec, &f, |_| KConstant { alpha: vec![0.1], beta: 0.3 }, &cfg, None);
        assert!(matches!(bad, Err(Error::InfiniteConjugate { step: 0, .. })));
        assert!(payoff_k(&MeanSpec::phi(), &f, |_| KConstant { alpha: vec![0.0], beta: 0.0 }, &cfg, None).is_err());
    }

    #[test]
    fn exp_representation_is_the_boue_dupuis_form() {
        let spec = MeanSpec::exp();
        let f = ScalarField::linear(0.1, 0.6, -8.0, 8.0, 1).unwrap();
        let vf = ValueFunction::new(f.clone(), spec.clone(), &gh(64)).unwrap();
        let cfg = GameConfig::new(1).with_dt(0.01).with_paths(4000).with_seed(8);
        let table = TabulatedValue::build(&vf, cfg.dt).unwrap();
        let est = payoff_k(&spec, &f, |_| KOptimal::new(&table, spec.clone()), &cfg, None).unwrap();
        let target = 0.1 + 0.5 * 0.36;
        assert!(est.raw().within(target, 3.0, 1e-3), "{est:?}");
        // With α* = ∇v = b constant the payoff is deterministic up to W₁.
        assert!(est.std_err < 0.02);
    }

    #[test]
    fn xexp_eta_form_reaches_lambert_value() {
        let spec = MeanSpec::xexp(3.0).unwrap();
        let f = ScalarField::erf_ramp(0.0, 1.0, 0.2, 1.5, 1).unwrap();
        let target = lambert_w(gh(96).integrate(|x| f.value(x) * f.value(x).exp()).unwrap()).unwrap();
        let vf = ValueFunction::new(f.clone(), spec.clone(), &gh(64)).unwrap();
        assert!((vf.value(0.0, &[0.0]) - target).abs() < 1e-10);
        let cfg = GameConfig::new(1).with_dt(0.01).with_paths(4000).with_seed(6);
        let table = TabulatedValue::build(&vf, cfg.dt).unwrap();
        let est = payoff_k_xexp_eta(&spec, &f, |_| XExpEtaOptimal::new(&table, spec.clone()), &cfg, Some(&table)).unwrap();
        let adj = est.adjusted.unwrap();
        assert!((adj.mean - target).abs() < 3.0 * adj.std_err + 2e-3, "{adj:?} vs {target}");
        let k = payoff_k(&spec, &f, |_| KOptimal::new(&table, spec.clone()), &cfg, Some(&table)).unwrap();
        assert!((k.adjusted.unwrap().mean - target).abs() < 3.0 * k.adjusted.unwrap().std_err + 2e-3);
    }

    #[test]
    fn nonconvex_game_reduces_to_the_phi_game() {
        let f = ScalarField::bump(0.0, 1.0, 0.2, 1.0, 1).unwrap();
        let vf = ValueFunction::phi(f.clone(), &gh(32)).unwrap();
        let cfg = GameConfig::new(1).with_dt(0.02).with_paths(300).with_seed(1);
        let c = vf.default_c();
        let a = crate::game::payoff_j(&f, |_| OptimalStrategy::new(&vf, c), |_| GradientChase::new(&vf, 1.0), &cfg).unwrap();
        let b = payoff_nonconvex_example(
            &f,
            |_| OptimalStrategy::new(&vf, c),
            |_| ZeroStrategy,
            |_| GradientChase::new(&vf, 1.0),
            &cfg,
            None,
        )
        .unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        let neg = ScalarField::constant(-0.1, 1).unwrap();
        assert!(payoff_nonconvex_example(&neg, |_| ZeroStrategy, |_| ZeroStrategy, |_| GradientChase::new(&vf, 1.0), &cfg, None).is_err());
        let k = ScalarField::constant(0.8, 1).unwrap();
        assert!((nonconvex_optimal_value(&k, &gh(8)).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn phi_mean_is_not_convex() {
        let battery = vec![
            ScalarField::erf_ramp(0.0, 0.5, -3.0, 3.0, 1).unwrap(),
            ScalarField::erf_ramp(1.0, 0.5, -2.0, 0.5, 1).unwrap(),
            ScalarField::constant(-2.0, 1).unwrap(),
            ScalarField::bump(0.0, 0.5, -3.0, 2.0, 1).unwrap(),
        ];
        let l = [0.25, 0.5, 0.75];
        let w = find_convexity_violation(&MeanSpec::phi(), &battery, &l, &gh(64)).unwrap();
        assert!(w.is_some());
        let pos: Vec<ScalarField> = battery.iter().map(|f| ScalarField::affine(0.5, 2.5, f.clone())).collect();
        let exp = MeanSpec::exp();
        assert!(find_convexity_violation(&exp, &pos, &l, &gh(64)).unwrap().is_none());
    }
}

//! Monte Carlo simulation of the game
//!
//! `J_f[α, β] = E[∫ D_t⟨α_t, β_t⟩dt + D_1 f(W₁ + ∫α dt)]`, `D_t = e^{−½∫‖β‖²}`,
//!
//! on a uniform Euler grid. Within a step the control `β_k` is chosen first
//! from the state `X_k`, then the strategy answers with `α_k` having seen
//! `β_k`. Each path draws from its own [`RngStream`] and results are reduced
//! in path order, so estimates do not depend on the thread count.

mod audit;
mod convergence;
mod coupled;
mod projected;
mod strategies;

pub use audit::{audit_causality, audit_causality_with, AuditReport};
pub use convergence::{lower_bound_gap, ConvergenceRow, ConvergenceTable};
pub use coupled::{coupled_payoffs, CoupledReport};
pub use projected::{check_coisometry, payoff_j_projected, projected_optimal, ProjectedRun};
pub use strategies::{
    adversary_battery, strategy_battery, BangBang, ConstantControl, ConstantStrategy, Control, ControlFactory,
    DiscreteResponder, GradientChase, OptimalStrategy, ReplayControl, ScaledGradient, Sinusoid, Strategy,
    StrategyFactory, Telegraph, ZeroControl, ZeroStrategy,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::quadrature::Neumaier;
use crate::rng::{PathRng, RngStream};
use crate::value::ValueOracle;

pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GameConfig {
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub dim: usize,
    /// Constant of the optimal strategy; `None` picks the default from `f`.
    pub c: Option<f64>,
}

impl GameConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            dt: DEFAULT_DT,
            paths: 10_000,
            seed: 0,
            dim,
            c: None,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_paths(mut self, paths: usize) -> Self {
        self.paths = paths;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = Some(c);
        self
    }

    /// Number of Euler steps; errors unless `dt·steps = 1`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(Error::Domain {
                what: "time step dt",
                value: self.dt,
            });
        }
        let steps = (1.0 / self.dt).round();
        if (steps * self.dt - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("dt = {} does not divide 1", self.dt)));
        }
        if self.paths == 0 || self.dim == 0 {
            return Err(Error::Precondition("need at least one path and one dimension".into()));
        }
        Ok(steps as usize)
    }
}

/// Per-path result of one simulated game.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathOutcome {
    pub payoff: f64,
    /// `D_1`.
    pub discount: f64,
    /// `Σ D_k⟨∇v(t_k, X_k), ΔW_k⟩`, zero without a control-variate oracle.
    pub martingale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_samples(xs: impl Iterator<Item = f64> + Clone) -> Self {
        let mut s = Neumaier::default();
        let mut n = 0usize;
        for x in xs.clone() {
            s.add(x);
            n += 1;
        }
        let mean = s.sum() / n as f64;
        let mut q = Neumaier::default();
        for x in xs {
            q.add((x - mean) * (x - mean));
        }
        let var = if n > 1 { q.sum() / (n - 1) as f64 } else { 0.0 };
        Self {
            mean,
            std_err: (var / n as f64).sqrt(),
        }
    }

    pub fn within(&self, target: f64, sigmas: f64, floor: f64) -> bool {
        (self.mean - target).abs() <= (sigmas * self.std_err).max(floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub paths: usize,
    pub dt: f64,
    /// Mean of `D_1 = e^{−½∫‖β‖²}`.
    pub discount_mean: f64,
    /// Payoff minus the martingale term of the value function along the
    /// path; same expectation up to discretization, much smaller variance.
    pub adjusted: Option<Estimate>,
}

impl GameEstimate {
    pub fn from_outcomes(outcomes: &[PathOutcome], dt: f64, with_cv: bool) -> Result<Self> {
        if outcomes.iter().any(|o| !o.payoff.is_finite()) {
            return Err(Error::NonFinite("payoff"));
        }
        let raw = Estimate::from_samples(outcomes.iter().map(|o| o.payoff));
        let disc = Estimate::from_samples(outcomes.iter().map(|o| o.discount));
        let adjusted = with_cv.then(|| Estimate::from_samples(outcomes.iter().map(|o| o.payoff - o.martingale)));
        Ok(Self {
            mean: raw.mean,
            std_err: raw.std_err,
            paths: outcomes.len(),
            dt,
            discount_mean: disc.mean,
            adjusted,
        })
    }

    pub fn raw(&self) -> Estimate {
        Estimate {
            mean: self.mean,
            std_err: self.std_err,
        }
    }

    /// The control-variate estimate when present, else the raw one.
    pub fn best(&self) -> Estimate {
        self.adjusted.unwrap_or_else(|| self.raw())
    }
}

/// Terminal map and running-cost geometry of the game.
#[derive(Debug, Clone)]
pub struct Payoff {
    pub(crate) f: ScalarField,
    /// Row-major `m × n` co-isometry `B`: terminal `f(B·X₁)`, running
    /// `⟨Bα, Bβ⟩`.
    pub(crate) projection: Option<(Vec<f64>, usize)>,
    /// Extra drift `shift·β` (the `Φ⁻¹(c)/2` term of the projected game).
    pub(crate) shift: f64,
}

impl Payoff {
    pub fn new(f: ScalarField) -> Self {
        Self {
            f,
            projection: None,
            shift: 0.0,
        }
    }

    pub fn field(&self) -> &ScalarField {
        &self.f
    }

    fn state_dim(&self) -> usize {
        match &self.projection {
            Some((m, rows)) => m.len() / rows,
            None => self.f.dim(),
        }
    }
}

pub(crate) fn normals(rng: &mut PathRng, sd: f64, out: &mut [f64]) {
    for o in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *o = sd * z;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_into(matrix: &[f64], rows: usize, x: &[f64], out: &mut [f64]) {
    let n = matrix.len() / rows;
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        *o = dot(&matrix[r * n..(r + 1) * n], x);
    }
}

/// Run `paths` independent work units in path order.
pub(crate) fn map_paths<T, F>(paths: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..paths as u64).into_par_iter().map(work).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..paths as u64).map(work).collect()
    }
}

/// One path of the game; exposed for replay audits and custom drivers.
pub fn play_path<S: Strategy + ?Sized, C: Control + ?Sized>(
    payoff: &Payoff,
    strategy: &mut S,
    control: &mut C,
    steps: usize,
    stream: RngStream,
    cv: Option<&dyn ValueOracle>,
    mut record: Option<&mut Vec<f64>>,
) -> PathOutcome {
    let n = payoff.state_dim();
    let dt = 1.0 / steps as f64;
    let sd = dt.sqrt();
    let mut rng = stream.generator();
    let mut y = vec![0.0; n];
    let (mut alpha, mut tilde, mut beta, mut dw, mut grad) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut ba, mut bb) = match &payoff.projection {
        Some((_, rows)) => (vec![0.0; *rows], vec![0.0; *rows]),
        None => (Vec::new(), Vec::new()),
    };
    let mut running = Neumaier::default();
    let mut mart = Neumaier::default();
    let mut d = 1.0;
    for k in 0..steps {
        let t = k as f64 * dt;
        control.act(k, t, &y, &mut beta);
        strategy.act(k, t, &y, &beta, &mut alpha, &mut tilde);
        if let Some(r) = record.as_deref_mut() {
            r.extend_from_slice(&alpha);
        }
        let ab = match &payoff.projection {
            Some((m, rows)) => {
                project_into(m, *rows, &alpha, &mut ba);
                project_into(m, *rows, &beta, &mut bb);
                dot(&ba, &bb)
            }
            None => dot(&alpha, &beta),
        };
        running.add(d * ab * dt);
        normals(&mut rng, sd, &mut dw);
        if let Some(o) = cv {
            o.value_and_grad(t, &y, &mut grad);
            mart.add(d * dot(&grad, &dw));
        }
        let a2 = dot(&tilde, &tilde);
        let b2 = dot(&beta, &beta);
        for i in 0..n {
            let mut drift = alpha[i] + tilde[i];
            if payoff.shift != 0.0 {
                drift += payoff.shift * beta[i];
            }
            y[i] += drift * dt + dw[i];
        }
        d *= (-0.5 * (a2 + b2) * dt).exp();
    }
    let terminal = match &payoff.projection {
        Some((m, rows)) => {
            let mut z = vec![0.0; *rows];
            project_into(m, *rows, &y, &mut z);
            payoff.f.value(&z)
        }
        None => payoff.f.value(&y),
    };
    running.add(d * terminal);
    PathOutcome {
        payoff: running.sum(),
        discount: d,
        martingale: mart.sum(),
    }
}

/// Per-path outcomes of `payoff` under freshly made strategies and controls.
pub fn simulate_paths<SF, S, CF, C>(
    payoff: &Payoff,
    strategies: SF,
    controls: CF,
    cfg: &GameConfig,
    cv: Option<&dyn ValueOracle>,
) -> Result<Vec<PathOutcome>>
where
    SF: Fn(u64) -> S + Sync + Send,
    S: Strategy,
    CF: Fn(u64) -> C + Sync + Send,
    C: Control,
{
    let steps = cfg.steps()?;
    if payoff.state_dim() != cfg.dim {
        return Err(Error::Dimension {
            dim: cfg.dim,
            reason: "game dimension differs from the payoff state",
        });
    }
    let seed = cfg.seed;
    Ok(map_paths(cfg.paths, |p| {
        let mut s = strategies(p);
        let mut c = controls(p);
        play_path(payoff, &mut s, &mut c, steps, RngStream::new(seed, p), cv, None)
    }))
}

/// Monte Carlo estimate of `J_f[α, β]`.
pub fn payoff_j<SF, S, CF, C>(f: &ScalarField, strategies: SF, controls: CF, cfg: &GameConfig) -> Result<GameEstimate>
where
    SF: Fn(u64) -> S + Sync + Send,
    S: Strategy,
    CF: Fn(u64) -> C + Sync + Send,
    C: Control,
{
    payoff_j_cv(f, strategies, controls, cfg, None)
}

/// [`payoff_j`] with the value function's martingale as control variate.
pub fn payoff_j_cv<SF, S, CF, C>(
    f: &ScalarField,
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
    let payoff = Payoff::new(f.clone());
    let out = simulate_paths(&payoff, strategies, controls, cfg, cv)?;
    GameEstimate::from_outcomes(&out, cfg.dt, cv.is_some())
}

//! Strategies (`α`, answering the current control) and controls (`β`), the
//! closed-form optimal pair, the block responder, and the fixed heuristic
//! batteries used to probe both bounds.

use std::f64::consts::PI;

use rand::Rng;

use crate::rng::{PathRng, RngStream};
use crate::value::ValueOracle;

/// A causal map from the opponent's control to `α`. Instances carry
/// per-path state and are made fresh for every path.
pub trait Strategy: Send {
    /// Writes `α_k` (and optionally the auxiliary drift `α̃_k`, zero unless
    /// set) given the state `X_k` and the current control `β_k`.
    fn act(&mut self, k: usize, t: f64, x: &[f64], beta: &[f64], alpha: &mut [f64], alpha_tilde: &mut [f64]);
}

/// A progressively generated control: `β_k` from the path up to step `k`.
pub trait Control: Send {
    fn act(&mut self, k: usize, t: f64, x: &[f64], beta: &mut [f64]);
}

impl<S: Strategy + ?Sized> Strategy for Box<S> {
    fn act(&mut self, k: usize, t: f64, x: &[f64], beta: &[f64], alpha: &mut [f64], alpha_tilde: &mut [f64]) {
        (**self).act(k, t, x, beta, alpha, alpha_tilde)
    }
}

impl<C: Control + ?Sized> Control for Box<C> {
    fn act(&mut self, k: usize, t: f64, x: &[f64], beta: &mut [f64]) {
        (**self).act(k, t, x, beta)
    }
}

pub type StrategyFactory<'a> = Box<dyn Fn(u64) -> Box<dyn Strategy + 'a> + Sync + Send + 'a>;
pub type ControlFactory<'a> = Box<dyn Fn(u64) -> Box<dyn Control + 'a> + Sync + Send + 'a>;

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroStrategy;

impl Strategy for ZeroStrategy {
    fn act(&mut self, _: usize, _: f64, _: &[f64], _: &[f64], alpha: &mut [f64], _: &mut [f64]) {
        alpha.iter_mut().for_each(|a| *a = 0.0);
    }
}

#[derive(Debug, Clone)]
pub struct ConstantStrategy(Vec<f64>);

impl ConstantStrategy {
    pub fn new(a: Vec<f64>) -> Self {
        Self(a)
    }
}

impl Strategy for ConstantStrategy {
    fn act(&mut self, _: usize, _: f64, _: &[f64], _: &[f64], alpha: &mut [f64], _: &mut [f64]) {
        alpha.copy_from_slice(&self.0);
    }
}

/// `α̃* = (c − v)∇v + κβ` at the current state. With `κ = c` this is the
/// optimal strategy of the game; the projected game uses `κ = c − shift`.
pub struct OptimalStrategy<'a, O: ?Sized> {
    oracle: &'a O,
    c: f64,
    kappa: f64,
    grad: Vec<f64>,
}

impl<'a, O: ValueOracle + ?Sized> OptimalStrategy<'a, O> {
    pub fn new(oracle: &'a O, c: f64) -> Self {
        Self::with_beta_coefficient(oracle, c, c)
    }

    pub fn with_beta_coefficient(oracle: &'a O, c: f64, kappa: f64) -> Self {
        Self {
            oracle,
            c,
            kappa,
            grad: vec![0.0; oracle.dim()],
        }
    }
}

impl<O: ValueOracle + ?Sized> Strategy for OptimalStrategy<'_, O> {
    fn act(&mut self, _: usize, t: f64, x: &[f64], beta: &[f64], alpha: &mut [f64], _: &mut [f64]) {
        let v = self.oracle.value_and_grad(t, x, &mut self.grad);
        for ((a, g), b) in alpha.iter_mut().zip(&self.grad).zip(beta) {
            *a = (self.c - v) * g + self.kappa * b;
        }
    }
}

/// `α = κ∇v + λβ`, a heuristic family for the lower-bound battery.
pub struct ScaledGradient<'a, O: ?Sized> {
    oracle: &'a O,
    kappa: f64,
    lambda: f64,
    grad: Vec<f64>,
}

impl<'a, O: ValueOracle + ?Sized> ScaledGradient<'a, O> {
    pub fn new(oracle: &'a O, kappa: f64, lambda: f64) -> Self {
        Self {
            oracle,
            kappa,
            lambda,
            grad: vec![0.0; oracle.dim()],
        }
    }
}

impl<O: ValueOracle + ?Sized> Strategy for ScaledGradient<'_, O> {
    fn act(&mut self, _: usize, t: f64, x: &[f64], beta: &[f64], alpha: &mut [f64], _: &mut [f64]) {
        self.oracle.value_and_grad(t, x, &mut self.grad);
        for ((a, g), b) in alpha.iter_mut().zip(&self.grad).zip(beta) {
            *a = self.kappa * g + self.lambda * b;
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroControl;

impl Control for ZeroControl {
    fn act(&mut self, _: usize, _: f64, _: &[f64], beta: &mut [f64]) {
        beta.iter_mut().for_each(|b| *b = 0.0);
    }
}

#[derive(Debug, Clone)]
pub struct ConstantControl(Vec<f64>);

impl ConstantControl {
    pub fn new(b: Vec<f64>) -> Self {
        Self(b)
    }
}

impl Control for ConstantControl {
    fn act(&mut self, _: usize, _: f64, _: &[f64], beta: &mut [f64]) {
        beta.copy_from_slice(&self.0);
    }
}

/// Open-loop replay of a recorded control sequence (row per step).
#[derive(Debug, Clone)]
pub struct ReplayControl {
    seq: Vec<f64>,
}

impl ReplayControl {
    pub fn new(seq: Vec<f64>) -> Self {
        Self { seq }
    }
}

impl Control for ReplayControl {
    fn act(&mut self, k: usize, _: f64, _: &[f64], beta: &mut [f64]) {
        let n = beta.len();
        beta.copy_from_slice(&self.seq[k * n..(k + 1) * n]);
    }
}

/// `β_t = amp·sin(2π·freq·t + phase)` in every coordinate.
#[derive(Debug, Clone)]
pub struct Sinusoid {
    amp: f64,
    freq: f64,
    phase: f64,
}

impl Sinusoid {
    pub fn new(amp: f64, freq: f64, phase: f64) -> Self {
        Self { amp, freq, phase }
    }
}

impl Control for Sinusoid {
    fn act(&mut self, _: usize, t: f64, _: &[f64], beta: &mut [f64]) {
        let b = self.amp * (2.0 * PI * self.freq * t + self.phase).sin();
        beta.iter_mut().for_each(|x| *x = b);
    }
}

/// `β = −κ∇v(t, X_t)`; `κ = 1` is the per-step responder.
pub struct GradientChase<'a, O: ?Sized> {
    oracle: &'a O,
    kappa: f64,
}

impl<'a, O: ValueOracle + ?Sized> GradientChase<'a, O> {
    pub fn new(oracle: &'a O, kappa: f64) -> Self {
        Self { oracle, kappa }
    }
}

impl<O: ValueOracle + ?Sized> Control for GradientChase<'_, O> {
    fn act(&mut self, _: usize, t: f64, x: &[f64], beta: &mut [f64]) {
        self.oracle.value_and_grad(t, x, beta);
        beta.iter_mut().for_each(|b| *b *= -self.kappa);
    }
}

/// `±amp` in every coordinate, switching sign every `period` of time.
#[derive(Debug, Clone)]
pub struct BangBang {
    amp: f64,
    period: f64,
}

impl BangBang {
    pub fn new(amp: f64, period: f64) -> Self {
        Self { amp, period }
    }
}

impl Control for BangBang {
    fn act(&mut self, _: usize, t: f64, _: &[f64], beta: &mut [f64]) {
        let s = if ((t / self.period).floor() as i64) % 2 == 0 { 1.0 } else { -1.0 };
        beta.iter_mut().for_each(|b| *b = s * self.amp);
    }
}

/// `±amp` flipping at the jumps of a Poisson clock with the given rate,
/// driven by its own stream.
#[derive(Debug, Clone)]
pub struct Telegraph {
    amp: f64,
    flip_prob: f64,
    sign: f64,
    rng: PathRng,
}

impl Telegraph {
    pub fn new(amp: f64, rate: f64, dt: f64, stream: RngStream) -> Self {
        Self {
            amp,
            flip_prob: 1.0 - (-rate * dt).exp(),
            sign: 1.0,
            rng: stream.generator(),
        }
    }
}

impl Control for Telegraph {
    fn act(&mut self, _: usize, _: f64, _: &[f64], beta: &mut [f64]) {
        if self.rng.random::<f64>() < self.flip_prob {
            self.sign = -self.sign;
        }
        beta.iter_mut().for_each(|b| *b = self.sign * self.amp);
    }
}

/// `β ≡ −∇v(kδ, X_{kδ})` on each block `[kδ, (k+1)δ)`; the first block
/// uses `X_0 = 0`.
pub struct DiscreteResponder<'a, O: ?Sized> {
    oracle: &'a O,
    block_steps: usize,
    held: Vec<f64>,
}

impl<'a, O: ValueOracle + ?Sized> DiscreteResponder<'a, O> {
    pub fn new(oracle: &'a O, block_steps: usize) -> Self {
        Self {
            oracle,
            block_steps: block_steps.max(1),
            held: vec![0.0; oracle.dim()],
        }
    }
}

impl<O: ValueOracle + ?Sized> Control for DiscreteResponder<'_, O> {
    fn act(&mut self, k: usize, t: f64, x: &[f64], beta: &mut [f64]) {
        if k % self.block_steps == 0 {
            self.oracle.value_and_grad(t, x, &mut self.held);
            self.held.iter_mut().for_each(|b| *b = -*b);
        }
        beta.copy_from_slice(&self.held);
    }
}

/// The fixed adversary battery (20 controls): constants, sinusoids,
/// gradient chasing at several gains, bang-bang and a random telegraph.
pub fn adversary_battery<'a, O: ValueOracle + ?Sized>(
    oracle: &'a O,
    dim: usize,
    dt: f64,
    seed: u64,
) -> Vec<(String, ControlFactory<'a>)> {
    let mut out: Vec<(String, ControlFactory<'a>)> = Vec::new();
    for b in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        out.push((format!("constant({b})"), Box::new(move |_| Box::new(ConstantControl::new(vec![b; dim])))));
    }
    for (amp, freq, phase) in [(0.5, 1.0, 0.0), (1.0, 2.0, 0.0), (1.0, 0.5, PI / 2.0), (2.0, 3.0, 1.0)] {
        out.push((
            format!("sinusoid(amp={amp},freq={freq},phase={phase:.3})"),
            Box::new(move |_| Box::new(Sinusoid::new(amp, freq, phase))),
        ));
    }
    for kappa in [0.5, 1.0, 1.5, 2.0, -1.0] {
        out.push((
            format!("gradient_chase(kappa={kappa})"),
            Box::new(move |_| Box::new(GradientChase::new(oracle, kappa))),
        ));
    }
    for (amp, period) in [(0.5, 0.25), (1.0, 0.5), (1.5, 0.1), (1.0, 1.0 / 3.0)] {
        out.push((
            format!("bang_bang(amp={amp},period={period:.4})"),
            Box::new(move |_| Box::new(BangBang::new(amp, period))),
        ));
    }
    for (amp, rate) in [(1.0, 4.0), (0.5, 20.0)] {
        out.push((
            format!("telegraph(amp={amp},rate={rate})"),
            Box::new(move |p| Box::new(Telegraph::new(amp, rate, dt, RngStream::new(seed, p).child(0x7e1e)))),
        ));
    }
    out
}

/// Heuristic strategies for the lower-bound battery.
pub fn strategy_battery<'a, O: ValueOracle + ?Sized>(oracle: &'a O, dim: usize) -> Vec<(String, StrategyFactory<'a>)> {
    let mut out: Vec<(String, StrategyFactory<'a>)> = Vec::new();
    out.push(("zero".into(), Box::new(|_| Box::new(ZeroStrategy))));
    for a in [-0.5, 0.5] {
        out.push((format!("constant({a})"), Box::new(move |_| Box::new(ConstantStrategy::new(vec![a; dim])))));
    }
    for (kappa, lambda) in [(0.5, 0.0), (1.0, 0.0), (1.0, 0.5), (-0.5, 1.0), (2.0, -0.5)] {
        out.push((
            format!("scaled_gradient(kappa={kappa},lambda={lambda})"),
            Box::new(move |_| Box::new(ScaledGradient::new(oracle, kappa, lambda))),
        ));
    }
    out
}

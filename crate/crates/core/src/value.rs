//! The value function `v(t, x) = F⁻¹(E[F(f(x + W₁₋ₜ))])` of the game, its
//! gradient, and the nonlinear heat equation it solves.
//!
//! Expectations are finite sums over a fixed set of Gaussian points: the
//! tensor quadrature rule for `n ≤ 3`, or a frozen Monte Carlo sample
//! otherwise, so `v` is a smooth deterministic function in both cases.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ScalarField, Smoothness};
use crate::gaussian::{phi, phi_density, phi_inv_clamped};
use crate::means::MeanSpec;
use crate::quadrature::{IntegralMethod, Neumaier, QuadratureRule, MAX_TENSOR_DIM};
use crate::rng::RngStream;

/// Finite-difference step in `t` and `x`.
pub const H_FD: f64 = 1e-4;
/// `pde_residual` refuses `t > 1 − T_MARGIN`.
pub const T_MARGIN: f64 = 1e-3;

/// Anything that can answer `v(t, x)` and `∇v(t, x)` for the game engine.
pub trait ValueOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, x: &[f64]) -> f64;
    /// Writes `∇v(t, x)` into `grad` and returns `v(t, x)`.
    fn value_and_grad(&self, t: f64, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<O: ValueOracle + ?Sized> ValueOracle for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        (**self).value(t, x)
    }

    fn value_and_grad(&self, t: f64, x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).value_and_grad(t, x, grad)
    }
}

#[derive(Debug)]
pub struct ValueFunction {
    f: ScalarField,
    spec: MeanSpec,
    dim: usize,
    /// Flattened Gaussian points, `dim` coordinates each.
    points: Arc<Vec<f64>>,
    weights: Arc<Vec<f64>>,
    method: IntegralMethod,
    h_fd: f64,
    saturated: AtomicBool,
}

impl Clone for ValueFunction {
    fn clone(&self) -> Self {
        Self {
            f: self.f.clone(),
            spec: self.spec.clone(),
            dim: self.dim,
            points: Arc::clone(&self.points),
            weights: Arc::clone(&self.weights),
            method: self.method,
            h_fd: self.h_fd,
            saturated: AtomicBool::new(self.saturated.load(Ordering::Relaxed)),
        }
    }
}

fn check_field(f: &ScalarField, spec: &MeanSpec) -> Result<()> {
    if f.smoothness() == Smoothness::Measurable {
        return Err(Error::Precondition(
            "value functions need a continuous field; mollify measurable fields first".into(),
        ));
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
    Ok(())
}

impl ValueFunction {
    /// Quadrature-backed value function; `n ≤ 3`.
    pub fn new(f: ScalarField, spec: MeanSpec, rule: &QuadratureRule) -> Result<Self> {
        check_field(&f, &spec)?;
        let dim = f.dim();
        if dim == 0 || dim > MAX_TENSOR_DIM {
            return Err(Error::Dimension {
                dim,
                reason: "quadrature mode supports 1..=3 dimensions; enable the Monte Carlo fallback",
            });
        }
        let (nodes, w) = (rule.nodes(), rule.weights());
        let m = nodes.len();
        let total = m.pow(dim as u32);
        let mut points = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut wt = 1.0;
            for _ in 0..dim {
                points.push(nodes[idx % m]);
                wt *= w[idx % m];
                idx /= m;
            }
            weights.push(wt);
        }
        Ok(Self {
            f,
            spec,
            dim,
            points: Arc::new(points),
            weights: Arc::new(weights),
            method: IntegralMethod::Quadrature {
                points_per_axis: rule.order(),
            },
            h_fd: H_FD,
            saturated: AtomicBool::new(false),
        })
    }

    /// `F = Φ` with the given rule.
    pub fn phi(f: ScalarField, rule: &QuadratureRule) -> Result<Self> {
        Self::new(f, MeanSpec::phi(), rule)
    }

    /// Any dimension, expectations over `samples` frozen normal draws.
    pub fn with_monte_carlo(f: ScalarField, spec: MeanSpec, samples: usize, stream: RngStream) -> Result<Self> {
        check_field(&f, &spec)?;
        if samples < 2 {
            return Err(Error::Precondition("Monte Carlo fallback needs at least 2 samples".into()));
        }
        let dim = f.dim();
        let mut rng = stream.generator();
        let points: Vec<f64> = (0..samples * dim).map(|_| rng.sample(StandardNormal)).collect();
        Ok(Self {
            f,
            spec,
            dim,
            points: Arc::new(points),
            weights: Arc::new(vec![1.0 / samples as f64; samples]),
            method: IntegralMethod::MonteCarlo { samples },
            h_fd: H_FD,
            saturated: AtomicBool::new(false),
        })
    }

    pub fn with_h_fd(mut self, h: f64) -> Self {
        self.h_fd = h;
        self
    }

    pub fn field(&self) -> &ScalarField {
        &self.f
    }

    pub fn spec(&self) -> &MeanSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn method(&self) -> IntegralMethod {
        self.method
    }

    pub fn h_fd(&self) -> f64 {
        self.h_fd
    }

    /// Whether any `Φ⁻¹` evaluation so far hit the clamp.
    pub fn saturated(&self) -> bool {
        self.saturated.load(Ordering::Relaxed)
    }

    /// Sampled `sup f` over the Gaussian points spread ×2, and the origin.
    pub fn sampled_sup(&self) -> f64 {
        let mut best = self.f.value(&vec![0.0; self.dim]);
        for p in self.points.chunks_exact(self.dim) {
            let y: Vec<f64> = p.iter().map(|z| 2.0 * z).collect();
            best = best.max(self.f.value(&y));
        }
        best
    }

    /// Smallest `c` the optimal strategy accepts: half the larger of the
    /// declared and sampled sup, plus a margin of 0.01.
    pub fn default_c(&self) -> f64 {
        0.5 * self.f.range().1.max(self.sampled_sup()) + 0.01
    }

    fn for_each_point<G: FnMut(&[f64], f64)>(&self, t: f64, x: &[f64], mut g: G) {
        let s = (1.0 - t).max(0.0).sqrt();
        let mut buf = [0.0; MAX_TENSOR_DIM];
        let mut heap;
        let y: &mut [f64] = if self.dim <= MAX_TENSOR_DIM {
            &mut buf[..self.dim]
        } else {
            heap = vec![0.0; self.dim];
            &mut heap
        };
        for (p, &w) in self.points.chunks_exact(self.dim).zip(self.weights.iter()) {
            for ((yi, xi), zi) in y.iter_mut().zip(x).zip(p) {
                *yi = xi + s * zi;
            }
            g(y, w);
        }
    }

    /// `u(t, x) = E[F(f(x + W₁₋ₜ))]`.
    pub fn u(&self, t: f64, x: &[f64]) -> f64 {
        if t >= 1.0 {
            return self.spec.f(self.f.value(x));
        }
        let mut acc = Neumaier::default();
        self.for_each_point(t, x, |y, w| acc.add(w * self.spec.f(self.f.value(y))));
        acc.sum()
    }

    fn invert(&self, lower: f64, upper: f64) -> f64 {
        if self.spec.is_phi() {
            let c = if lower <= 0.5 {
                phi_inv_clamped(lower)
            } else {
                let c = phi_inv_clamped(upper);
                crate::gaussian::Clamped {
                    value: -c.value,
                    ..c
                }
            };
            if c.saturated {
                self.saturated.store(true, Ordering::Relaxed);
            }
            c.value
        } else {
            self.spec.inv(lower)
        }
    }

    /// `v(t, x)`; for `F = Φ` the complementary sum is inverted on the
    /// upper half so both tails keep relative accuracy.
    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        if t >= 1.0 {
            return self.f.value(x);
        }
        if self.spec.is_phi() {
            let (mut lo, mut up) = (Neumaier::default(), Neumaier::default());
            self.for_each_point(t, x, |y, w| {
                let fy = self.f.value(y);
                lo.add(w * phi(fy));
                up.add(w * phi(-fy));
            });
            self.invert(lo.sum(), up.sum())
        } else {
            self.invert(self.u(t, x), 0.0)
        }
    }

    /// Central-difference gradient with step `h_fd`.
    pub fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let h = self.h_fd;
        let mut p = x.to_vec();
        for i in 0..self.dim {
            p[i] = x[i] + h;
            let up = self.value(t, &p);
            p[i] = x[i] - h;
            let dn = self.value(t, &p);
            p[i] = x[i];
            out[i] = (up - dn) / (2.0 * h);
        }
    }

    /// `∇v = E[F′(f)∇f] / F′(v)` in one pass; returns `v`.
    pub fn gradient_chain(&self, t: f64, x: &[f64], out: &mut [f64]) -> f64 {
        if t >= 1.0 {
            self.f.gradient(x, out);
            return self.f.value(x);
        }
        let n = self.dim;
        let mut acc = vec![Neumaier::default(); n];
        let (mut lo, mut up) = (Neumaier::default(), Neumaier::default());
        let mut gf = vec![0.0; n];
        let phi_spec = self.spec.is_phi();
        self.for_each_point(t, x, |y, w| {
            let fy = self.f.value(y);
            self.f.gradient(y, &mut gf);
            let d1 = if phi_spec {
                lo.add(w * phi(fy));
                up.add(w * phi(-fy));
                phi_density(fy)
            } else {
                lo.add(w * self.spec.f(fy));
                self.spec.d1(fy)
            };
            for (a, g) in acc.iter_mut().zip(&gf) {
                a.add(w * d1 * g);
            }
        });
        let v = self.invert(lo.sum(), up.sum());
        let fv = self.spec.d1(v);
        for (o, a) in out.iter_mut().zip(&acc) {
            *o = a.sum() / fv;
        }
        v
    }

    /// `(v, ∂ₓv, ∂ₓₓv)` for one-dimensional fields, by the chain rule.
    pub fn jet1(&self, t: f64, x: f64) -> Result<(f64, f64, f64)> {
        if self.dim != 1 {
            return Err(Error::Dimension {
                dim: self.dim,
                reason: "jets are one-dimensional",
            });
        }
        if t >= 1.0 {
            return Ok(self.f.jet1(x));
        }
        let (mut lo, mut up, mut ux, mut uxx) =
            (Neumaier::default(), Neumaier::default(), Neumaier::default(), Neumaier::default());
        let phi_spec = self.spec.is_phi();
        self.for_each_point(t, &[x], |y, w| {
            let (fy, d, d2) = self.f.jet1(y[0]);
            let [f0, f1, f2, _] = if phi_spec {
                let p = phi_density(fy);
                up.add(w * phi(-fy));
                [phi(fy), p, -fy * p, 0.0]
            } else {
                self.spec.derivs(fy)
            };
            lo.add(w * f0);
            ux.add(w * f1 * d);
            uxx.add(w * (f2 * d * d + f1 * d2));
        });
        let v = self.invert(lo.sum(), up.sum());
        let fv = self.spec.d1(v);
        let vx = ux.sum() / fv;
        let vxx = uxx.sum() / fv - self.spec.ratio(v) * vx * vx;
        Ok((v, vx, vxx))
    }
}

impl ValueOracle for ValueFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        ValueFunction::value(self, t, x)
    }

    fn value_and_grad(&self, t: f64, x: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient_chain(t, x, grad)
    }
}

/// `|∂ₜv + ½Δv + ½(F″(v)/F′(v))‖∇v‖²|` by central differences.
pub fn pde_residual(vf: &ValueFunction, t: f64, x: &[f64]) -> Result<f64> {
    if !(0.0..=1.0 - T_MARGIN).contains(&t) {
        return Err(Error::Precondition(format!(
            "t = {t} outside [0, {}] (finite differences need t away from 1)",
            1.0 - T_MARGIN
        )));
    }
    if x.len() != vf.dim() {
        return Err(Error::Dimension {
            dim: x.len(),
            reason: "point dimension differs from the field",
        });
    }
    let h = vf.h_fd();
    let v0 = vf.value(t, x);
    let dt = (vf.value(t + h, x) - vf.value(t - h, x)) / (2.0 * h);
    let mut p = x.to_vec();
    let (mut lap, mut grad2) = (0.0, 0.0);
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let up = vf.value(t, &p);
        p[i] = x[i] - h;
        let dn = vf.value(t, &p);
        p[i] = x[i];
        lap += (up - 2.0 * v0 + dn) / (h * h);
        let g = (up - dn) / (2.0 * h);
        grad2 += g * g;
    }
    Ok((dt + 0.5 * lap + 0.5 * vf.spec().ratio(v0) * grad2).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualScan {
    pub points: usize,
    pub max: f64,
    pub at_t: f64,
    pub at_x: f64,
}

/// Largest [`pde_residual`] over the grid `ts × xs` (one-dimensional fields
/// only).
pub fn residual_scan(vf: &ValueFunction, ts: &[f64], xs: &[f64]) -> Result<ResidualScan> {
    let mut scan = ResidualScan {
        points: 0,
        max: 0.0,
        at_t: f64::NAN,
        at_x: f64::NAN,
    };
    for &t in ts {
        for &x in xs {
            let r = pde_residual(vf, t, &[x])?;
            scan.points += 1;
            if !(r <= scan.max) {
                scan.max = r;
                scan.at_t = t;
                scan.at_x = x;
            }
        }
    }
    Ok(scan)
}

/// `H(a, b) = ⟨a + cb, ∇v + b⟩ − ½v‖b‖²`.
pub fn saddle_objective(a: &[f64], b: &[f64], grad_v: &[f64], v: f64, c: f64) -> f64 {
    let mut inner = 0.0;
    let mut b2 = 0.0;
    for ((ai, bi), gi) in a.iter().zip(b).zip(grad_v) {
        inner += (ai + c * bi) * (gi + bi);
        b2 += bi * bi;
    }
    inner - 0.5 * v * b2
}

#[derive(Debug, Clone, Serialize)]
pub struct SaddleWitness {
    pub t: f64,
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `H(a, b*)`, `H(a*, b*)`, `H(a*, b)`.
    pub h: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct SaddleReport {
    pub c: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub violations: usize,
    pub max_violation: f64,
    pub witness: Option<SaddleWitness>,
}

impl SaddleReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples `t ∈ [0, 1 − T_MARGIN]`, `x ∈ [−4, 4]ⁿ` and `a, b ~ N(0, 4I)` and
/// checks `H(a, b*) ≤ H(a*, b*) ≤ H(a*, b)` to `1e-12`. Every tenth draw
/// uses `b = 0`.
pub fn verify_saddle(vf: &ValueFunction, c: f64, samples: usize, stream: RngStream) -> Result<SaddleReport> {
    let sup = vf.sampled_sup();
    if 2.0 * c < sup {
        return Err(Error::Precondition(format!("2c = {} is below the sampled sup f = {sup}", 2.0 * c)));
    }
    let tolerance = 1e-12;
    let n = vf.dim();
    let mut rng = stream.generator();
    let (mut x, mut a, mut b, mut g) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut report = SaddleReport {
        c,
        samples,
        tolerance,
        violations: 0,
        max_violation: 0.0,
        witness: None,
    };
    for k in 0..samples {
        let t = rng.random_range(0.0..=1.0 - T_MARGIN);
        for i in 0..n {
            x[i] = rng.random_range(-4.0..=4.0);
            a[i] = 2.0 * rng.sample::<f64, _>(StandardNormal);
            b[i] = if k % 10 == 9 { 0.0 } else { 2.0 * rng.sample::<f64, _>(StandardNormal) };
        }
        let v = vf.gradient_chain(t, &x, &mut g);
        let b_star: Vec<f64> = g.iter().map(|gi| -gi).collect();
        let a_star: Vec<f64> = g.iter().map(|gi| (c - v) * gi).collect();
        let h = [
            saddle_objective(&a, &b_star, &g, v, c),
            saddle_objective(&a_star, &b_star, &g, v, c),
            saddle_objective(&a_star, &b, &g, v, c),
        ];
        let gap = (h[0] - h[1]).max(h[1] - h[2]);
        if gap > report.max_violation {
            report.max_violation = gap;
        }
        if gap > tolerance {
            report.violations += 1;
            if report.witness.is_none() {
                report.witness = Some(SaddleWitness {
                    t,
                    x: x.clone(),
                    a: a.clone(),
                    b: b.clone(),
                    h,
                });
            }
        }
    }
    Ok(report)
}

/// One-dimensional `v` tabulated on the time steps `k·dt` of a game and a
/// uniform `x` grid, with cubic Hermite interpolation of `v` and `∂ₓv`.
/// Queries off the table fall back to exact evaluation.
#[derive(Debug, Clone)]
pub struct TabulatedValue {
    exact: ValueFunction,
    dt: f64,
    steps: usize,
    x0: f64,
    dx: f64,
    nx: usize,
    /// `[v, v_x, v_xx]` per node, slice-major.
    data: Vec<[f64; 3]>,
}

pub const TABLE_HALF_WIDTH: f64 = 10.0;
pub const TABLE_SPACING: f64 = 0.05;

impl TabulatedValue {
    pub fn build(vf: &ValueFunction, dt: f64) -> Result<Self> {
        if vf.dim() != 1 {
            return Err(Error::Dimension {
                dim: vf.dim(),
                reason: "tabulation is one-dimensional",
            });
        }
        let steps = (1.0 / dt).round() as usize;
        if steps == 0 || ((steps as f64) * dt - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("dt = {dt} does not divide 1")));
        }
        let nx = (2.0 * TABLE_HALF_WIDTH / TABLE_SPACING).round() as usize + 1;
        let x0 = -TABLE_HALF_WIDTH;
        let slice = |k: usize| -> Vec<[f64; 3]> {
            let t = k as f64 * dt;
            (0..nx)
                .map(|i| {
                    let (v, d, d2) = vf.jet1(t, x0 + i as f64 * TABLE_SPACING).expect("one-dimensional");
                    [v, d, d2]
                })
                .collect()
        };
        #[cfg(feature = "parallel")]
        let slices: Vec<Vec<[f64; 3]>> = {
            use rayon::prelude::*;
            (0..=steps).into_par_iter().map(slice).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let slices: Vec<Vec<[f64; 3]>> = (0..=steps).map(slice).collect();
        Ok(Self {
            exact: vf.clone(),
            dt,
            steps,
            x0,
            dx: TABLE_SPACING,
            nx,
            data: slices.into_iter().flatten().collect(),
        })
    }

    pub fn exact(&self) -> &ValueFunction {
        &self.exact
    }

    fn locate(&self, t: f64, x: f64) -> Option<(usize, usize, f64)> {
        let k = (t / self.dt).round();
        if k < 0.0 || k as usize > self.steps || (t - k * self.dt).abs() > 1e-12 {
            return None;
        }
        let s = (x - self.x0) / self.dx;
        if !(s >= 0.0 && s < (self.nx - 1) as f64) {
            return None;
        }
        let i = s.floor() as usize;
        Some((k as usize, i, s - i as f64))
    }

    fn hermite(y0: f64, d0: f64, y1: f64, d1: f64, s: f64, h: f64) -> (f64, f64) {
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let ds = (6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * h * d0 + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * h * d1;
        (value, ds / h)
    }
}

impl ValueOracle for TabulatedValue {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        match self.locate(t, x[0]) {
            Some((k, i, s)) => {
                let a = self.data[k * self.nx + i];
                let b = self.data[k * self.nx + i + 1];
                Self::hermite(a[0], a[1], b[0], b[1], s, self.dx).0
            }
            None => self.exact.value(t, x),
        }
    }

    fn value_and_grad(&self, t: f64, x: &[f64], grad: &mut [f64]) -> f64 {
        match self.locate(t, x[0]) {
            Some((k, i, s)) => {
                let a = self.data[k * self.nx + i];
                let b = self.data[k * self.nx + i + 1];
                let (v, _) = Self::hermite(a[0], a[1], b[0], b[1], s, self.dx);
                grad[0] = Self::hermite(a[1], a[2], b[1], b[2], s, self.dx).0;
                v
            }
            None => self.exact.gradient_chain(t, x, grad),
        }
    }
}

/// `x ↦ w(t, Bx)` for a value oracle `w` on ℝᵐ and a row-major `m × n`
/// matrix `B`; the gradient is `Bᵀ∇w`.
pub struct ProjectedValue<O> {
    inner: O,
    matrix: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl<O: ValueOracle> ProjectedValue<O> {
    pub fn new(inner: O, matrix: Vec<f64>, rows: usize) -> Result<Self> {
        if rows != inner.dim() || rows == 0 || matrix.len() % rows != 0 {
            return Err(Error::Dimension {
                dim: rows,
                reason: "projection rows must match the inner dimension",
            });
        }
        let cols = matrix.len() / rows;
        Ok(Self {
            inner,
            matrix,
            rows,
            cols,
        })
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.matrix[r * self.cols..(r + 1) * self.cols].iter().zip(x).map(|(m, v)| m * v).sum())
            .collect()
    }
}

impl<O: ValueOracle> ValueOracle for ProjectedValue<O> {
    fn dim(&self) -> usize {
        self.cols
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.inner.value(t, &self.project(x))
    }

    fn value_and_grad(&self, t: f64, x: &[f64], grad: &mut [f64]) -> f64 {
        let y = self.project(x);
        let mut gy = vec![0.0; self.rows];
        let v = self.inner.value_and_grad(t, &y, &mut gy);
        for (j, g) in grad.iter_mut().enumerate().take(self.cols) {
            *g = (0..self.rows).map(|r| self.matrix[r * self.cols + j] * gy[r]).sum();
        }
        v
    }
}

impl<O: ValueOracle + ?Sized> ValueOracle for Arc<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        (**self).value(t, x)
    }

    fn value_and_grad(&self, t: f64, x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).value_and_grad(t, x, grad)
    }
}

//! Quadrature against the standard Gaussian measure `γₙ`.
//!
//! Two one-dimensional families are provided, both normalised so that the
//! weights integrate against `γ₁`:
//!
//! * Gauss–Hermite (probabilists' normalisation), exact for polynomials of
//!   degree `2·order − 1`; the default for smooth integrands.
//! * Composite Gauss–Legendre on `[−L, L]` with the Gaussian density folded
//!   into the weights; used for integrands with sharp transitions (smoothed
//!   indicators) that a global polynomial rule cannot resolve.
//!
//! Rules tensorize up to [`MAX_TENSOR_DIM`]; above that, callers fall back to
//! Monte Carlo through [`gaussian_expectation`].

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::phi_density;
use crate::rng::RngStream;

pub const DEFAULT_ORDER: usize = 64;
pub const MAX_TENSOR_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RuleKind {
    GaussHermite,
    CompositeLegendre {
        panels: usize,
        per_panel: usize,
        half_width: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    kind: RuleKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
}

impl QuadratureRule {
    /// Gauss–Hermite rule with `order` nodes per axis, dimension 1.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Precondition("quadrature order must be positive".into()));
        }
        let (x, w) = hermite_physicists(order);
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let nodes = x.iter().map(|z| z * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().map(|v| v * inv_sqrt_pi).collect();
        Ok(Self {
            kind: RuleKind::GaussHermite,
            nodes,
            weights,
            dim: 1,
        })
    }

    /// Composite Gauss–Legendre rule on `[−half_width, half_width]`.
    pub fn composite(panels: usize, per_panel: usize, half_width: f64) -> Result<Self> {
        if panels == 0 || per_panel == 0 || !(half_width > 0.0) {
            return Err(Error::Precondition("composite rule needs positive sizes".into()));
        }
        let (gx, gw) = gauss_legendre(per_panel);
        let h = 2.0 * half_width / panels as f64;
        let mut nodes = Vec::with_capacity(panels * per_panel);
        let mut weights = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            let a = -half_width + p as f64 * h;
            let mid = a + 0.5 * h;
            for (x, w) in gx.iter().zip(&gw) {
                let z = mid + 0.5 * h * x;
                nodes.push(z);
                weights.push(0.5 * h * w * phi_density(z));
            }
        }
        Ok(Self {
            kind: RuleKind::CompositeLegendre {
                panels,
                per_panel,
                half_width,
            },
            nodes,
            weights,
            dim: 1,
        })
    }

    /// Default fine composite rule: 400 panels of 10 points on `[−10, 10]`.
    pub fn composite_default() -> Self {
        Self::composite(400, 10, 10.0).expect("static parameters")
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim.max(1);
        self
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    /// Nodes per axis.
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total number of tensor points.
    pub fn points(&self) -> usize {
        self.nodes.len().pow(self.dim as u32)
    }

    /// `∫ g(center + scale·z) dγ_dim(z)` by tensor quadrature.
    pub fn integrate_shifted<F>(&self, center: &[f64], scale: f64, mut g: F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let dim = center.len();
        if dim == 0 || dim > MAX_TENSOR_DIM {
            return Err(Error::Dimension {
                dim,
                reason: "tensor quadrature supports 1..=3 dimensions",
            });
        }
        let m = self.nodes.len();
        let mut point = center.to_vec();
        let mut acc = Neumaier::default();
        match dim {
            1 => {
                for (z, w) in self.nodes.iter().zip(&self.weights) {
                    point[0] = center[0] + scale * z;
                    acc.add(w * g(&point));
                }
            }
            _ => {
                let mut idx = vec![0usize; dim];
                loop {
                    let mut w = 1.0;
                    for (k, &i) in idx.iter().enumerate() {
                        point[k] = center[k] + scale * self.nodes[i];
                        w *= self.weights[i];
                    }
                    acc.add(w * g(&point));
                    let mut k = 0;
                    loop {
                        idx[k] += 1;
                        if idx[k] < m {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                        if k == dim {
                            return Ok(acc.sum());
                        }
                    }
                }
            }
        }
        Ok(acc.sum())
    }

    /// `∫ g dγ_dim` using this rule's own dimension.
    pub fn integrate<F>(&self, g: F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let zero = vec![0.0; self.dim];
        self.integrate_shifted(&zero, 1.0, g)
    }
}

/// How a Gaussian expectation was computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IntegralMethod {
    Quadrature { points_per_axis: usize },
    MonteCarlo { samples: usize },
}

/// A Gaussian expectation with its accuracy metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    /// Monte Carlo standard error; `None` for quadrature.
    pub std_err: Option<f64>,
    pub method: IntegralMethod,
}

/// `∫ g dγ_dim`: tensor quadrature for `dim ≤ 3`, otherwise Monte Carlo
/// with `mc_samples` draws from `stream` (an error if no fallback is given).
pub fn gaussian_expectation<F>(
    rule: &QuadratureRule,
    dim: usize,
    mut g: F,
    fallback: Option<(RngStream, usize)>,
) -> Result<Integral>
where
    F: FnMut(&[f64]) -> f64,
{
    if dim <= MAX_TENSOR_DIM {
        let zero = vec![0.0; dim];
        let value = rule.integrate_shifted(&zero, 1.0, g)?;
        return Ok(Integral {
            value,
            std_err: None,
            method: IntegralMethod::Quadrature {
                points_per_axis: rule.order(),
            },
        });
    }
    let Some((stream, samples)) = fallback else {
        return Err(Error::Dimension {
            dim,
            reason: "Monte Carlo fallback not enabled",
        });
    };
    let mut rng = stream.generator();
    let mut z = vec![0.0; dim];
    let (mut s, mut s2) = (Neumaier::default(), Neumaier::default());
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let y = g(&z);
        s.add(y);
        s2.add(y * y);
    }
    let n = samples as f64;
    let mean = s.sum() / n;
    let var = (s2.sum() / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(Integral {
        value: mean,
        std_err: Some((var / n).sqrt()),
        method: IntegralMethod::MonteCarlo { samples },
    })
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Physicists' Gauss–Hermite nodes and weights (weight `e^{−x²}`), by
/// Newton iteration on the orthonormal Hermite recurrence.
fn hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    // Ascending order.
    x.reverse();
    w.reverse();
    (x, w)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

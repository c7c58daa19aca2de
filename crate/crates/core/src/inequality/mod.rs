//! Function forms of Gaussian Brunn–Minkowski type inequalities, checked
//! numerically on constructed tuples: Ehrhard, Borell's two-coefficient
//! version, and the `Φ_c` reverse Brascamp–Lieb inequality.
//!
//! Every check has two independent halves. The hypothesis audit samples
//! tuples and compares `h` with the transformed combination directly; the
//! inequality half only integrates.

mod envelope;
mod limits;
mod regularize;
mod verify;

use nalgebra::DMatrix;
use serde::Serialize;

pub use envelope::{minimal_h, minimal_h_for, ENVELOPE_POINTS};
pub use limits::{limit_recovery, LimitRow, LimitTable, UpperLimit};
pub use regularize::{lipschitz_lower_approx, sup_convolution, REGULARIZATION_GRID};
pub use verify::{
    audit_hypothesis, smoothed_halfspace, verify_borell, verify_borell_with, verify_ehrhard, verify_ehrhard_with, verify_gbl, verify_tuple, HypothesisAudit, IntegralEstimate,
    InequalityReport, Verdict, AUDIT_SAMPLES, AUDIT_TOLERANCE, SLACK_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::gaussian::{phi, phi_inv_clamped, Extended, PhiCTransform};

/// The scale on which the hypothesis is linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Log,
    PhiInv,
    PhiC { c: f64 },
}

impl Transform {
    pub fn phi_c(c: f64) -> Result<Self> {
        PhiCTransform::new(c)?;
        Ok(Transform::PhiC { c })
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Transform::Log),
            "phi_inv" | "phi" => Ok(Transform::PhiInv),
            _ => match s.strip_prefix("phi_c:").map(str::parse::<f64>) {
                Some(Ok(c)) => Self::phi_c(c),
                _ => Err(Error::Parse {
                    offset: 0,
                    message: format!("unknown transform '{s}' (log, phi_inv, phi_c:<c>)"),
                }),
            },
        }
    }

    fn phi_c_map(c: f64) -> PhiCTransform {
        PhiCTransform::new(c).expect("validated at construction")
    }

    /// `T(x)` for `x ∈ [0, 1]`; `T(0) = −∞` for `log` and `Φ_c⁻¹`.
    pub fn forward(&self, x: f64) -> f64 {
        match *self {
            Transform::Log => x.ln(),
            Transform::PhiInv => phi_inv_clamped(x).value,
            Transform::PhiC { c } => match Self::phi_c_map(c).inv(x.clamp(0.0, 1.0)) {
                Ok(Extended::Finite(v)) => v,
                Ok(Extended::PosInfinity) => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
        }
    }

    /// `T(f(x))`, read from the unrounded inner field when `f = Φ∘u`
    /// and `T = Φ⁻¹`.
    pub fn of_field(&self, f: &ScalarField, x: &[f64]) -> f64 {
        match self {
            Transform::PhiInv => f.phi_inv_value(x),
            _ => self.forward(f.value(x)),
        }
    }

    /// `(T(lo), T(hi))` for the declared range of `f`.
    pub fn of_range(&self, f: &ScalarField) -> (f64, f64) {
        match self {
            Transform::PhiInv => f.phi_inv_range(),
            _ => (self.forward(f.range().0), self.forward(f.range().1)),
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            Transform::Log => y.exp(),
            Transform::PhiInv => phi(y),
            Transform::PhiC { c } => {
                if y == f64::NEG_INFINITY {
                    0.0
                } else {
                    Self::phi_c_map(c).forward(y)
                }
            }
        }
    }
}

/// `Σ cᵢ Bᵢ* xᵢ = x` with `Bᵢ` row-major `nᵢ × n` matrices. Unlike a
/// [`ProjectionFrame`] the coefficients need not resolve the identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub coefficients: Vec<f64>,
    pub maps: Vec<Vec<f64>>,
    pub dims: Vec<usize>,
    pub n: usize,
}

impl LinearConstraint {
    pub fn new(coefficients: Vec<f64>, maps: Vec<Vec<f64>>, dims: Vec<usize>, n: usize) -> Result<Self> {
        let k = coefficients.len();
        if k == 0 || maps.len() != k || dims.len() != k || n == 0 {
            return Err(Error::FrameInvalid(format!(
                "{k} coefficients, {} maps and {} dimensions do not describe one tuple",
                maps.len(),
                dims.len()
            )));
        }
        for (i, (m, &d)) in maps.iter().zip(&dims).enumerate() {
            if d == 0 || m.len() != d * n {
                return Err(Error::FrameInvalid(format!("map {i} has {} entries, expected {d}x{n}", m.len())));
            }
            if !(coefficients[i] >= 0.0 && coefficients[i].is_finite()) {
                return Err(Error::FrameInvalid(format!("coefficient {i} = {} must be non-negative", coefficients[i])));
            }
        }
        Ok(Self {
            coefficients,
            maps,
            dims,
            n,
        })
    }

    /// `λx + μy = z` on the line.
    pub fn two(lambda: f64, mu: f64) -> Result<Self> {
        Self::new(vec![lambda, mu], vec![vec![1.0], vec![1.0]], vec![1, 1], 1)
    }

    pub fn k(&self) -> usize {
        self.coefficients.len()
    }

    /// Total dimension `Σnᵢ` of a tuple.
    pub fn tuple_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Offsets of each block in a concatenated tuple.
    pub fn offsets(&self) -> Vec<usize> {
        self.dims
            .iter()
            .scan(0, |acc, d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect()
    }

    /// The `n × Σnᵢ` matrix `[c₁B₁* | ⋯ | c_kB_k*]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.tuple_dim());
        for ((b, &d), (&c, off)) in self.maps.iter().zip(&self.dims).zip(self.coefficients.iter().zip(self.offsets())) {
            for r in 0..d {
                for j in 0..self.n {
                    m[(j, off + r)] = c * b[r * self.n + j];
                }
            }
        }
        m
    }

    /// `Σ cᵢ Bᵢ* zᵢ` for a concatenated tuple `z`.
    pub fn combine(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let offsets = self.offsets();
        for i in 0..self.k() {
            let (b, d, c) = (&self.maps[i], self.dims[i], self.coefficients[i]);
            for r in 0..d {
                let zr = c * z[offsets[i] + r];
                for (j, o) in out.iter_mut().enumerate() {
                    *o += b[r * self.n + j] * zr;
                }
            }
        }
    }
}

/// A geometric Brascamp–Lieb datum: `Σλᵢ Bᵢ*Bᵢ = I_n` and `BᵢBᵢ* = I_{nᵢ}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionFrame {
    constraint: LinearConstraint,
}

pub const FRAME_TOLERANCE: f64 = 1e-12;

impl ProjectionFrame {
    pub fn new(lambdas: Vec<f64>, maps: Vec<Vec<f64>>, dims: Vec<usize>, n: usize) -> Result<Self> {
        let constraint = LinearConstraint::new(lambdas, maps, dims, n)?;
        let mut sum = DMatrix::<f64>::zeros(n, n);
        for ((b, &d), &l) in constraint.maps.iter().zip(&constraint.dims).zip(&constraint.coefficients) {
            let bm = DMatrix::from_row_slice(d, n, b);
            let gram = &bm * bm.transpose();
            let dev = (gram - DMatrix::<f64>::identity(d, d)).abs().max();
            if dev > FRAME_TOLERANCE {
                return Err(Error::FrameInvalid(format!("B B* differs from the identity by {dev:e}")));
            }
            sum += bm.transpose() * bm * l;
        }
        let dev = (sum - DMatrix::<f64>::identity(n, n)).abs().max();
        if dev > FRAME_TOLERANCE {
            return Err(Error::FrameInvalid(format!(
                "sum of lambda_i B_i* B_i differs from the identity by {dev:e}"
            )));
        }
        Ok(Self { constraint })
    }

    /// Rank-one frame `Bᵢ = (cos θᵢ, sin θᵢ)` in the plane.
    pub fn planar(angles_deg: &[f64], lambdas: &[f64]) -> Result<Self> {
        let maps = angles_deg
            .iter()
            .map(|a| {
                let t = a.to_radians();
                vec![t.cos(), t.sin()]
            })
            .collect();
        Self::new(lambdas.to_vec(), maps, vec![1; angles_deg.len()], 2)
    }

    /// Three directions at 0°, 60°, 120° with `λᵢ = 2/3`.
    pub fn three_directions() -> Self {
        Self::planar(&[0.0, 60.0, 120.0], &[2.0 / 3.0; 3]).expect("static frame")
    }

    /// Coordinate axes of ℝⁿ with unit weights.
    pub fn orthogonal(n: usize) -> Result<Self> {
        let maps = (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row
            })
            .collect();
        Self::new(vec![1.0; n], maps, vec![1; n], n)
    }

    /// Text form: first line `k n`, then per factor a line `nᵢ λᵢ`
    /// followed by `nᵢ` rows of `n` numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let base = text.as_ptr() as usize;
        let mut tokens = text.split_whitespace().map(|t| (t.as_ptr() as usize - base, t));
        let mut next = |what: &str| -> Result<f64> {
            let (i, t) = tokens.next().ok_or_else(|| Error::Parse {
                offset: text.len(),
                message: format!("frame file ended while reading {what}"),
            })?;
            t.parse::<f64>().map_err(|_| Error::Parse {
                offset: i,
                message: format!("'{t}' is not a number ({what})"),
            })
        };
        let count = |v: f64, what: &str| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::FrameInvalid(format!("{what} must be a positive integer, got {v}")))
            }
        };
        let k = count(next("k")?, "k")?;
        let n = count(next("n")?, "n")?;
        let (mut lambdas, mut maps, mut dims) = (vec![], vec![], vec![]);
        for _ in 0..k {
            let d = count(next("n_i")?, "n_i")?;
            lambdas.push(next("lambda_i")?);
            let mut m = Vec::with_capacity(d * n);
            for _ in 0..d * n {
                m.push(next("matrix entry")?);
            }
            dims.push(d);
            maps.push(m);
        }
        Self::new(lambdas, maps, dims, n)
    }

    pub fn render(&self) -> String {
        let c = &self.constraint;
        let mut s = format!("{} {}\n", c.k(), c.n);
        for i in 0..c.k() {
            s.push_str(&format!("{} {:?}\n", c.dims[i], c.coefficients[i]));
            for row in c.maps[i].chunks(c.n) {
                let r: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                s.push_str(&r.join(" "));
                s.push('\n');
            }
        }
        s
    }

    pub fn constraint(&self) -> &LinearConstraint {
        &self.constraint
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.constraint.coefficients
    }
}

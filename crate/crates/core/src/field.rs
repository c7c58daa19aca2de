//! Bounded scalar fields on ℝⁿ with range and regularity metadata.
//!
//! A [`ScalarField`] is a small expression tree. The named constructors
//! mirror the field grammar in [`crate::fieldspec`]; `custom` wraps an
//! arbitrary closure (envelopes, regularizations) and falls back to finite
//! differences for derivatives.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{phi, phi_density, phi_inv_clamped};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    /// Infinitely differentiable with bounded derivatives.
    SmoothBounded,
    Lipschitz,
    /// Only measurable (e.g. indicators); refused by value functions.
    Measurable,
}

type Closure = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub(crate) enum Kind {
    Const(f64),
    /// `a + b·x₀`, smoothly clipped into `(clip_lo, clip_hi)`.
    Linear {
        a: f64,
        b: f64,
        clip_lo: f64,
        clip_hi: f64,
        width: f64,
    },
    /// `lo + (hi − lo)·Φ((x₀ − center)/sigma)`.
    ErfRamp {
        center: f64,
        sigma: f64,
        lo: f64,
        hi: f64,
    },
    /// `lo + (hi − lo)·σ((x₀ − center)/sigma)` with the logistic σ.
    Logistic {
        center: f64,
        sigma: f64,
        lo: f64,
        hi: f64,
    },
    /// `lo + (hi − lo)·exp(−|x − center·1|²/(2 width²))`.
    Bump {
        center: f64,
        width: f64,
        lo: f64,
        hi: f64,
    },
    /// `hi` on `x₀ ≤ at`, `lo` elsewhere (upper semicontinuous).
    Step { at: f64, lo: f64, hi: f64 },
    /// `f(x_head)·g(x_tail)`.
    Product(Arc<ScalarField>, Arc<ScalarField>),
    /// `w·f + (1 − w)·g`.
    Mix(f64, Arc<ScalarField>, Arc<ScalarField>),
    /// `scale·f + shift`.
    Affine {
        scale: f64,
        shift: f64,
        inner: Arc<ScalarField>,
    },
    /// `Φ(f)`; keeps `f` so that `Φ⁻¹` of the value is exact in the tails.
    PhiOf(Arc<ScalarField>),
    /// `f(Bx)` for a row-major `m × n` matrix `B`.
    Projected {
        inner: Arc<ScalarField>,
        matrix: Arc<Vec<f64>>,
        rows: usize,
    },
    Custom {
        name: String,
        eval: Closure,
    },
}

/// A bounded real-valued function on ℝⁿ.
#[derive(Clone)]
pub struct ScalarField {
    pub(crate) kind: Kind,
    dim: usize,
    lo: f64,
    hi: f64,
    lipschitz: Option<f64>,
    smoothness: Smoothness,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.kind {
            Kind::Custom { name, .. } => format!("custom({name})"),
            _ => crate::fieldspec::render(self).unwrap_or_else(|| "field".into()),
        };
        f.debug_struct("ScalarField")
            .field("spec", &name)
            .field("dim", &self.dim)
            .field("range", &(self.lo, self.hi))
            .field("lipschitz", &self.lipschitz)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Precondition(format!("invalid field range [{lo}, {hi}]")));
    }
    Ok(())
}

fn positive(what: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain { what, value: v });
    }
    Ok(())
}

impl ScalarField {
    fn make(kind: Kind, dim: usize, lo: f64, hi: f64, lipschitz: Option<f64>, smoothness: Smoothness) -> Self {
        Self {
            kind,
            dim,
            lo,
            hi,
            lipschitz,
            smoothness,
        }
    }

    pub fn constant(v: f64, dim: usize) -> Result<Self> {
        check_interval(v, v)?;
        Ok(Self::make(Kind::Const(v), dim.max(1), v, v, Some(0.0), Smoothness::SmoothBounded))
    }

    pub fn linear(a: f64, b: f64, clip_lo: f64, clip_hi: f64, dim: usize) -> Result<Self> {
        check_interval(clip_lo, clip_hi)?;
        if clip_lo == clip_hi || !a.is_finite() || !b.is_finite() {
            return Err(Error::Precondition("linear field needs clip_lo < clip_hi".into()));
        }
        let width = (0.05f64).min((clip_hi - clip_lo) / 20.0);
        Ok(Self::make(
            Kind::Linear {
                a,
                b,
                clip_lo,
                clip_hi,
                width,
            },
            dim.max(1),
            clip_lo,
            clip_hi,
            Some(b.abs()),
            Smoothness::SmoothBounded,
        ))
    }

    pub fn erf_ramp(center: f64, sigma: f64, lo: f64, hi: f64, dim: usize) -> Result<Self> {
        check_interval(lo, hi)?;
        positive("erf_ramp sigma", sigma)?;
        let lip = (hi - lo).abs() * phi_density(0.0) / sigma;
        Ok(Self::make(
            Kind::ErfRamp {
                center,
                sigma,
                lo,
                hi,
            },
            dim.max(1),
            lo,
            hi,
            Some(lip),
            Smoothness::SmoothBounded,
        ))
    }

    /// Decreasing ramps are obtained with `lo > hi`; the declared range is
    /// always sorted.
    pub fn logistic(center: f64, sigma: f64, lo: f64, hi: f64, dim: usize) -> Result<Self> {
        positive("logistic sigma", sigma)?;
        let (a, b) = (lo.min(hi), lo.max(hi));
        check_interval(a, b)?;
        Ok(Self::make(
            Kind::Logistic {
                center,
                sigma,
                lo,
                hi,
            },
            dim.max(1),
            a,
            b,
            Some((hi - lo).abs() / (4.0 * sigma)),
            Smoothness::SmoothBounded,
        ))
    }

    pub fn bump(center: f64, width: f64, lo: f64, hi: f64, dim: usize) -> Result<Self> {
        positive("bump width", width)?;
        let (a, b) = (lo.min(hi), lo.max(hi));
        check_interval(a, b)?;
        let lip = (hi - lo).abs() * (-0.5f64).exp() / width;
        Ok(Self::make(
            Kind::Bump {
                center,
                width,
                lo,
                hi,
            },
            dim.max(1),
            a,
            b,
            Some(lip),
            Smoothness::SmoothBounded,
        ))
    }

    pub fn step(at: f64, lo: f64, hi: f64, dim: usize) -> Result<Self> {
        let (a, b) = (lo.min(hi), lo.max(hi));
        check_interval(a, b)?;
        Ok(Self::make(Kind::Step { at, lo, hi }, dim.max(1), a, b, None, Smoothness::Measurable))
    }

    /// `(x, y) ↦ f(x)·g(y)` on ℝ^{n_f + n_g}.
    pub fn product(f: ScalarField, g: ScalarField) -> Self {
        let corners = [f.lo * g.lo, f.lo * g.hi, f.hi * g.lo, f.hi * g.hi];
        let lo = corners.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sup_f = f.lo.abs().max(f.hi.abs());
        let sup_g = g.lo.abs().max(g.hi.abs());
        let lip = match (f.lipschitz, g.lipschitz) {
            (Some(a), Some(b)) => Some(a * sup_g + b * sup_f),
            _ => None,
        };
        let smooth = f.smoothness.max_with(g.smoothness);
        let dim = f.dim + g.dim;
        Self::make(Kind::Product(Arc::new(f), Arc::new(g)), dim, lo, hi, lip, smooth)
    }

    /// `w·f + (1 − w)·g` for `w ∈ [0, 1]`.
    pub fn mix(w: f64, f: ScalarField, g: ScalarField) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Domain { what: "mix weight", value: w });
        }
        if f.dim != g.dim {
            return Err(Error::Precondition("mixed fields must share a dimension".into()));
        }
        let lo = w * f.lo + (1.0 - w) * g.lo;
        let hi = w * f.hi + (1.0 - w) * g.hi;
        let lip = match (f.lipschitz, g.lipschitz) {
            (Some(a), Some(b)) => Some(w * a + (1.0 - w) * b),
            _ => None,
        };
        let smooth = f.smoothness.max_with(g.smoothness);
        let dim = f.dim;
        Ok(Self::make(Kind::Mix(w, Arc::new(f), Arc::new(g)), dim, lo, hi, lip, smooth))
    }

    /// `scale·f + shift`.
    pub fn affine(scale: f64, shift: f64, f: ScalarField) -> Self {
        let (a, b) = (scale * f.lo + shift, scale * f.hi + shift);
        let lip = f.lipschitz.map(|l| l * scale.abs());
        let (dim, smooth) = (f.dim, f.smoothness);
        Self::make(
            Kind::Affine {
                scale,
                shift,
                inner: Arc::new(f),
            },
            dim,
            a.min(b),
            a.max(b),
            lip,
            smooth,
        )
    }

    /// `x ↦ f(Bx)` for a row-major `rows × n` matrix; `f` lives on ℝ^rows.
    /// `Φ(f)`. Values in the far tails round to 0 or 1, but
    /// [`ScalarField::phi_inv_value`] still returns `f` itself.
    pub fn phi_of(f: ScalarField) -> Self {
        let lip = f.lipschitz.map(|l| l * phi_density(0.0));
        let (dim, smooth) = (f.dim, f.smoothness);
        let (lo, hi) = (phi(f.lo), phi(f.hi));
        Self::make(Kind::PhiOf(Arc::new(f)), dim, lo, hi, lip, smooth)
    }

    /// `Φ⁻¹(f(x))`, exact for [`ScalarField::phi_of`] and clamped at
    /// `±Φ⁻¹(1 − 1e-15)` otherwise.
    pub fn phi_inv_value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::PhiOf(inner) => inner.value(x),
            _ => phi_inv_clamped(self.value(x)).value,
        }
    }

    /// Range in `Φ⁻¹` scale, with the same convention as
    /// [`ScalarField::phi_inv_value`].
    pub fn phi_inv_range(&self) -> (f64, f64) {
        match &self.kind {
            Kind::PhiOf(inner) => inner.range(),
            _ => (phi_inv_clamped(self.lo).value, phi_inv_clamped(self.hi).value),
        }
    }

    pub fn projected(f: ScalarField, matrix: Vec<f64>, rows: usize) -> Result<Self> {
        if rows != f.dim || rows == 0 || matrix.len() % rows != 0 {
            return Err(Error::Precondition(format!(
                "projection with {} entries and {rows} rows does not match a field on R^{}",
                matrix.len(),
                f.dim
            )));
        }
        let n = matrix.len() / rows;
        let op_norm = {
            // Frobenius norm bounds the operator norm.
            matrix.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let (lo, hi, smooth) = (f.lo, f.hi, f.smoothness);
        let lip = f.lipschitz.map(|l| l * op_norm);
        Ok(Self::make(
            Kind::Projected {
                inner: Arc::new(f),
                matrix: Arc::new(matrix),
                rows,
            },
            n,
            lo,
            hi,
            lip,
            smooth,
        ))
    }

    /// Arbitrary closure with caller-declared metadata.
    pub fn custom<F>(
        name: impl Into<String>,
        dim: usize,
        range: (f64, f64),
        lipschitz: Option<f64>,
        smoothness: Smoothness,
        eval: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        check_interval(range.0, range.1)?;
        Ok(Self::make(
            Kind::Custom {
                name: name.into(),
                eval: Arc::new(eval),
            },
            dim.max(1),
            range.0,
            range.1,
            lipschitz,
            smoothness,
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, Kind::Const(_))
    }

    /// Override the declared regularity (e.g. after mollification).
    pub fn with_smoothness(mut self, s: Smoothness) -> Self {
        self.smoothness = s;
        self
    }

    /// Same field viewed on ℝ^dim (extra coordinates ignored).
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        let min = self.min_dim();
        if dim < min {
            return Err(Error::Dimension {
                dim,
                reason: "field reads more coordinates than requested",
            });
        }
        self.dim = dim;
        Ok(self)
    }

    fn min_dim(&self) -> usize {
        match &self.kind {
            Kind::Product(f, g) => f.dim + g.dim,
            Kind::Mix(_, f, g) => f.dim.max(g.dim),
            Kind::Projected { matrix, rows, .. } => matrix.len() / rows,
            Kind::Custom { .. } | Kind::Bump { .. } => self.dim,
            Kind::Affine { inner, .. } | Kind::PhiOf(inner) => inner.min_dim(),
            _ => 1,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Const(v) => *v,
            Kind::Linear {
                a,
                b,
                clip_lo,
                clip_hi,
                width,
            } => {
                let y = a + b * x[0];
                (clip_lo + width * softplus((y - clip_lo) / width) - width * softplus((y - clip_hi) / width))
                    .clamp(*clip_lo, *clip_hi)
            }
            Kind::ErfRamp { center, sigma, lo, hi } => {
                (lo + (hi - lo) * phi((x[0] - center) / sigma)).clamp(self.lo, self.hi)
            }
            Kind::Logistic { center, sigma, lo, hi } => {
                (lo + (hi - lo) * sigmoid((x[0] - center) / sigma)).clamp(self.lo, self.hi)
            }
            Kind::Bump { center, width, lo, hi } => {
                let r2: f64 = x[..self.dim].iter().map(|v| (v - center).powi(2)).sum();
                (lo + (hi - lo) * (-0.5 * r2 / (width * width)).exp()).clamp(self.lo, self.hi)
            }
            Kind::Step { at, lo, hi } => {
                if x[0] <= *at {
                    *hi
                } else {
                    *lo
                }
            }
            Kind::Product(f, g) => f.value(&x[..f.dim]) * g.value(&x[f.dim..f.dim + g.dim]),
            Kind::Mix(w, f, g) => w * f.value(x) + (1.0 - w) * g.value(x),
            Kind::Affine { scale, shift, inner } => scale * inner.value(x) + shift,
            Kind::PhiOf(inner) => phi(inner.value(x)),
            Kind::Projected { inner, matrix, rows } => {
                let n = matrix.len() / rows;
                let mut y = [0.0; 8];
                let mut heap;
                let y: &mut [f64] = if *rows <= 8 {
                    &mut y[..*rows]
                } else {
                    heap = vec![0.0; *rows];
                    &mut heap
                };
                for (r, yr) in y.iter_mut().enumerate() {
                    *yr = matrix[r * n..(r + 1) * n].iter().zip(x).map(|(m, v)| m * v).sum();
                }
                inner.value(y)
            }
            Kind::Custom { eval, .. } => eval(&x[..self.dim]),
        }
    }

    /// Gradient into `out` (length `dim`). Closures use central differences.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = 0.0;
        }
        match &self.kind {
            Kind::Const(_) | Kind::Step { .. } => {}
            Kind::Linear { .. } | Kind::ErfRamp { .. } | Kind::Logistic { .. } => {
                out[0] = self.jet1(x[0]).1;
            }
            Kind::Bump { center, width, lo, hi } => {
                let w2 = width * width;
                let r2: f64 = x[..self.dim].iter().map(|v| (v - center).powi(2)).sum();
                let e = (hi - lo) * (-0.5 * r2 / w2).exp();
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -e * (v - center) / w2;
                }
            }
            Kind::Product(f, g) => {
                let (xf, xg) = (&x[..f.dim], &x[f.dim..f.dim + g.dim]);
                let (vf, vg) = (f.value(xf), g.value(xg));
                let (of, og) = out.split_at_mut(f.dim);
                f.gradient(xf, of);
                g.gradient(xg, &mut og[..g.dim]);
                of.iter_mut().for_each(|o| *o *= vg);
                og[..g.dim].iter_mut().for_each(|o| *o *= vf);
            }
            Kind::Mix(w, f, g) => {
                let mut tmp = vec![0.0; out.len()];
                f.gradient(x, out);
                g.gradient(x, &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o = w * *o + (1.0 - w) * t;
                }
            }
            Kind::Affine { scale, inner, .. } => {
                inner.gradient(x, out);
                out.iter_mut().for_each(|o| *o *= scale);
            }
            Kind::PhiOf(inner) => {
                inner.gradient(x, out);
                let p = phi_density(inner.value(x));
                out.iter_mut().for_each(|o| *o *= p);
            }
            Kind::Projected { inner, matrix, rows } => {
                let n = matrix.len() / rows;
                let y: Vec<f64> = (0..*rows)
                    .map(|r| matrix[r * n..(r + 1) * n].iter().zip(x).map(|(m, v)| m * v).sum())
                    .collect();
                let mut gy = vec![0.0; *rows];
                inner.gradient(&y, &mut gy);
                for (j, o) in out.iter_mut().enumerate().take(n) {
                    *o = (0..*rows).map(|r| matrix[r * n + j] * gy[r]).sum();
                }
            }
            Kind::Custom { .. } => {
                let h = 1e-6;
                let mut p = x[..self.dim].to_vec();
                for i in 0..self.dim {
                    let xi = p[i];
                    p[i] = xi + h;
                    let up = self.value(&p);
                    p[i] = xi - h;
                    let dn = self.value(&p);
                    p[i] = xi;
                    out[i] = (up - dn) / (2.0 * h);
                }
            }
        }
    }

    /// `(f, f′, f″)` along the first coordinate, other coordinates held at 0.
    /// Exact for the named one-dimensional kinds.
    pub fn jet1(&self, x: f64) -> (f64, f64, f64) {
        match &self.kind {
            Kind::Const(v) => (*v, 0.0, 0.0),
            Kind::Step { .. } => (self.value(&self.point(x)), 0.0, 0.0),
            Kind::Linear {
                a,
                b,
                clip_lo,
                clip_hi,
                width,
            } => {
                let y = a + b * x;
                let (u, w) = ((y - clip_lo) / width, (y - clip_hi) / width);
                let v = (clip_lo + width * softplus(u) - width * softplus(w)).clamp(*clip_lo, *clip_hi);
                let d = b * (sigmoid(u) - sigmoid(w));
                let ds = |s: f64| s * (1.0 - s);
                let d2 = b * b / width * (ds(sigmoid(u)) - ds(sigmoid(w)));
                (v, d, d2)
            }
            Kind::ErfRamp { center, sigma, lo, hi } => {
                let z = (x - center) / sigma;
                let p = phi_density(z);
                (lo + (hi - lo) * phi(z), (hi - lo) * p / sigma, -(hi - lo) * z * p / (sigma * sigma))
            }
            Kind::Logistic { center, sigma, lo, hi } => {
                let s = sigmoid((x - center) / sigma);
                let d = s * (1.0 - s);
                (
                    lo + (hi - lo) * s,
                    (hi - lo) * d / sigma,
                    (hi - lo) * d * (1.0 - 2.0 * s) / (sigma * sigma),
                )
            }
            Kind::Bump { center, width, lo, hi } if self.dim == 1 => {
                let w2 = width * width;
                let z = x - center;
                let e = (hi - lo) * (-0.5 * z * z / w2).exp();
                (lo + e, -e * z / w2, e * (z * z / w2 - 1.0) / w2)
            }
            Kind::Affine { scale, shift, inner } if self.dim == 1 => {
                let (v, d, d2) = inner.jet1(x);
                (scale * v + shift, scale * d, scale * d2)
            }
            Kind::PhiOf(inner) if self.dim == 1 => {
                let (u, d, d2) = inner.jet1(x);
                let p = phi_density(u);
                (phi(u), p * d, p * (d2 - u * d * d))
            }
            Kind::Mix(w, f, g) if self.dim == 1 => {
                let (a, b) = (f.jet1(x), g.jet1(x));
                (w * a.0 + (1.0 - w) * b.0, w * a.1 + (1.0 - w) * b.1, w * a.2 + (1.0 - w) * b.2)
            }
            _ => {
                let h = 1e-4;
                let f0 = self.value(&self.point(x));
                let fp = self.value(&self.point(x + h));
                let fm = self.value(&self.point(x - h));
                (f0, (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
            }
        }
    }

    fn point(&self, x0: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        p[0] = x0;
        p
    }

    /// Largest value over the tensor nodes of `rule` (spread ×2) and the
    /// origin, combined with the declared upper bound by the caller.
    pub fn sampled_sup(&self, rule: &QuadratureRule) -> f64 {
        let mut best = self.value(&vec![0.0; self.dim]);
        let dim = self.dim.min(3);
        let mut p = vec![0.0; self.dim];
        let nodes = rule.nodes();
        let m = nodes.len();
        let total = m.pow(dim as u32);
        for mut idx in 0..total {
            for slot in p.iter_mut().take(dim) {
                *slot = 2.0 * nodes[idx % m];
                idx /= m;
            }
            best = best.max(self.value(&p));
        }
        best
    }

    /// Largest observed violation of the declared range over `points`.
    pub fn range_violation<'a>(&self, points: impl IntoIterator<Item = &'a [f64]>) -> f64 {
        points
            .into_iter()
            .map(|p| {
                let v = self.value(p);
                (self.lo - v).max(v - self.hi).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Largest observed excess `|f(x) − f(y)| − L‖x − y‖` over `pairs`, or
    /// `None` without a declared bound.
    pub fn lipschitz_violation<'a>(
        &self,
        pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>,
    ) -> Option<f64> {
        let l = self.lipschitz?;
        Some(
            pairs
                .into_iter()
                .map(|(x, y)| {
                    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    ((self.value(x) - self.value(y)).abs() - l * d).max(0.0)
                })
                .fold(0.0, f64::max),
        )
    }
}

impl Smoothness {
    fn max_with(self, other: Smoothness) -> Smoothness {
        use Smoothness::*;
        match (self, other) {
            (Measurable, _) | (_, Measurable) => Measurable,
            (Lipschitz, _) | (_, Lipschitz) => Lipschitz,
            _ => SmoothBounded,
        }
    }
}

//! The smallest admissible `h`:
//! `T(h(x)) = sup { Σ cᵢ T(fᵢ(xᵢ)) : Σ cᵢ Bᵢ*xᵢ = x }`.
//!
//! The constraint slice through `x` is `z₀(x) + ker M` with `z₀ = M⁺x`
//! orthogonal to the kernel. For one free direction the sup is found on a
//! grid of [`ENVELOPE_POINTS`] points, refined by halving the spacing until
//! it moves less than `1e-6`, then polished by golden section around the
//! best node.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{LinearConstraint, ProjectionFrame, Transform};
use crate::error::{Error, Result};
use crate::field::{ScalarField, Smoothness};

pub const ENVELOPE_POINTS: usize = 401;
const HALF_WIDTH: f64 = 6.0;
const REFINE_TOL: f64 = 1e-6;
const MAX_POINTS: usize = 6401;
const GOLDEN_ITERS: usize = 60;

struct Envelope {
    fields: Vec<ScalarField>,
    constraint: LinearConstraint,
    offsets: Vec<usize>,
    transform: Transform,
    pinv: DMatrix<f64>,
    null: Option<Vec<f64>>,
    half_width: f64,
}

impl Envelope {
    fn objective(&self, z: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, f) in self.fields.iter().enumerate() {
            let c = self.constraint.coefficients[i];
            if c == 0.0 {
                continue;
            }
            let block = &z[self.offsets[i]..self.offsets[i] + self.constraint.dims[i]];
            s += c * self.transform.of_field(f, block);
        }
        s
    }

    fn sup(&self, x: &[f64]) -> f64 {
        let z0 = &self.pinv * DVector::from_column_slice(x);
        let Some(v) = &self.null else {
            return self.objective(z0.as_slice());
        };
        let mut z = vec![0.0; z0.len()];
        let mut at = |t: f64| {
            for (k, zk) in z.iter_mut().enumerate() {
                *zk = z0[k] + t * v[k];
            }
            self.objective(&z)
        };
        let w = self.half_width;
        let mut m = ENVELOPE_POINTS;
        let mut values: Vec<f64> = (0..m).map(|i| at(-w + 2.0 * w * i as f64 / (m - 1) as f64)).collect();
        let argmax = |vals: &[f64]| {
            vals.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &y)| if y > best.1 { (i, y) } else { best })
        };
        let mut best = argmax(&values);
        while 2 * m - 1 <= MAX_POINTS {
            let m2 = 2 * m - 1;
            let mut refined = Vec::with_capacity(m2);
            for i in 0..m {
                refined.push(values[i]);
                if i + 1 < m {
                    refined.push(at(-w + 2.0 * w * (2 * i + 1) as f64 / (m2 - 1) as f64));
                }
            }
            let next = argmax(&refined);
            let moved = (next.1 - best.1).abs();
            values = refined;
            m = m2;
            best = next;
            if moved < REFINE_TOL || !best.1.is_finite() {
                break;
            }
        }
        if !best.1.is_finite() {
            return best.1;
        }
        let h = 2.0 * w / (m - 1) as f64;
        let t_best = -w + h * best.0 as f64;
        let (mut a, mut b) = (t_best - h, t_best + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fd) = (at(c), at(d));
        let mut top = best.1.max(fc).max(fd);
        for _ in 0..GOLDEN_ITERS {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = at(c);
                top = top.max(fc);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = at(d);
                top = top.max(fd);
            }
        }
        top
    }
}

/// Null space of `m` and its pseudo-inverse, or the reason the slice
/// cannot be searched.
fn slice_geometry(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Option<Vec<f64>>)> {
    let (n, big_n) = m.shape();
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-12 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < n {
        return Err(Error::Precondition(format!(
            "constraint slice is empty for generic x (rank {rank} < {n})"
        )));
    }
    let pinv = svd.pseudo_inverse(tol).map_err(|e| Error::Precondition(e.to_string()))?;
    match big_n - rank {
        0 => Ok((pinv, None)),
        1 => {
            let p = DMatrix::<f64>::identity(big_n, big_n) - &pinv * m;
            let col = (0..big_n)
                .max_by(|&i, &j| p.column(i).norm().total_cmp(&p.column(j).norm()))
                .expect("non-empty");
            let mut v: Vec<f64> = p.column(col).iter().copied().collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let sign = v.iter().find(|x| x.abs() > 1e-12).map_or(1.0, |x| x.signum());
            v.iter_mut().for_each(|x| *x *= sign / norm);
            Ok((pinv, Some(v)))
        }
        d => Err(Error::Dimension {
            dim: d,
            reason: "envelope search supports at most one free direction",
        }),
    }
}

/// [`minimal_h_for`] on a validated frame.
pub fn minimal_h(fields: &[ScalarField], frame: &ProjectionFrame, transform: Transform) -> Result<ScalarField> {
    minimal_h_for(fields, frame.constraint(), transform)
}

/// Smallest `h` with `T(h(Σcᵢ Bᵢ*xᵢ)) ≥ Σcᵢ T(fᵢ(xᵢ))`, up to the accuracy
/// of the slice search.
pub fn minimal_h_for(fields: &[ScalarField], constraint: &LinearConstraint, transform: Transform) -> Result<ScalarField> {
    if fields.len() != constraint.k() {
        return Err(Error::Precondition(format!(
            "{} fields for a {}-term constraint",
            fields.len(),
            constraint.k()
        )));
    }
    for (i, f) in fields.iter().enumerate() {
        if f.dim() != constraint.dims[i] {
            return Err(Error::Dimension {
                dim: f.dim(),
                reason: "field dimension differs from its factor",
            });
        }
        let (lo, hi) = f.range();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::Range {
                lo,
                hi,
                allowed_lo: 0.0,
                allowed_hi: 1.0,
            });
        }
    }
    let (pinv, null) = slice_geometry(&constraint.matrix())?;
    let half_width = HALF_WIDTH * (constraint.tuple_dim() as f64).sqrt();
    let bound = |pick: fn((f64, f64)) -> f64| {
        let s: f64 = fields
            .iter()
            .zip(&constraint.coefficients)
            .filter(|(_, &c)| c != 0.0)
            .map(|(f, &c)| c * pick(transform.of_range(f)))
            .sum();
        transform.inverse(s).clamp(0.0, 1.0)
    };
    let (lo, hi) = (bound(|r| r.0), bound(|r| r.1));
    let env = Arc::new(Envelope {
        fields: fields.to_vec(),
        offsets: constraint.offsets(),
        constraint: constraint.clone(),
        transform,
        pinv,
        null,
        half_width,
    });
    ScalarField::custom("envelope", constraint.n, (lo.min(hi), hi.max(lo)), None, Smoothness::Lipschitz, move |x| {
        env.transform.inverse(env.sup(x))
    })
}

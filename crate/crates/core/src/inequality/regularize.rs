//! Lipschitz regularizations on the line, computed as envelopes of cones
//! anchored on a fixed grid. Every output is exactly Lipschitz with the
//! requested constant; the comparison with `f` is exact on grid nodes.

use std::sync::Arc;

use super::Transform;
use crate::error::{Error, Result};
use crate::field::{ScalarField, Smoothness};

/// `(half_width, points)` of the anchor grid.
pub const REGULARIZATION_GRID: (f64, usize) = (10.0, 4001);

fn anchors() -> Vec<f64> {
    let (w, m) = REGULARIZATION_GRID;
    (0..m).map(|i| -w + 2.0 * w * i as f64 / (m - 1) as f64).collect()
}

fn line_only(f: &ScalarField) -> Result<()> {
    if f.dim() != 1 {
        return Err(Error::Dimension {
            dim: f.dim(),
            reason: "regularizations are implemented on the line",
        });
    }
    Ok(())
}

/// `T(fˢ(x)) = sup_y {T(f(y)) − |x − y|/s}`.
pub fn sup_convolution(f: &ScalarField, s: f64, transform: Transform) -> Result<ScalarField> {
    line_only(f)?;
    if !(s > 0.0) {
        return Err(Error::Domain { what: "sup-convolution scale", value: s });
    }
    let ys = anchors();
    let ts: Vec<f64> = ys.iter().map(|&y| transform.forward(f.value(&[y]))).collect();
    let data = Arc::new((ys, ts));
    let (lo, hi) = f.range();
    ScalarField::custom("sup_convolution", 1, (lo, hi), None, Smoothness::Lipschitz, move |x| {
        let (ys, ts) = &*data;
        let best = ys.iter().zip(ts).map(|(y, t)| t - (x[0] - y).abs() / s).fold(f64::NEG_INFINITY, f64::max);
        transform.inverse(best)
    })
}

/// `f_k(x) = inf_y {f(y) + k|x − y|}`.
pub fn lipschitz_lower_approx(f: &ScalarField, k: f64) -> Result<ScalarField> {
    line_only(f)?;
    if !(k > 0.0) {
        return Err(Error::Domain { what: "Lipschitz constant", value: k });
    }
    let ys = anchors();
    let vs: Vec<f64> = ys.iter().map(|&y| f.value(&[y])).collect();
    let data = Arc::new((ys, vs));
    let (lo, hi) = f.range();
    ScalarField::custom("lipschitz_lower", 1, (lo, hi), Some(k), Smoothness::Lipschitz, move |x| {
        let (ys, vs) = &*data;
        ys.iter().zip(vs).map(|(y, v)| v + k * (x[0] - y).abs()).fold(f64::INFINITY, f64::min)
    })
}

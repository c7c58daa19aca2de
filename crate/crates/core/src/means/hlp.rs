use serde::Serialize;

use super::MeanSpec;

/// Outcome of the Hardy–Littlewood–Pólya convexity test: `𝔐_F` is convex
/// iff `F` is convex and `F′/F″` is concave.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HlpVerdict {
    pub convex: bool,
    /// `F″ ≡ 0` on the grid: `F` is affine and `𝔐_F` is the mean itself.
    pub linear: bool,
    pub witness: Option<String>,
    pub witness_x: Option<f64>,
}

const GRID: usize = 801;

/// Grid test of `F″ > 0` and midpoint concavity of `F′/F″` over all grid
/// pairs with a grid midpoint.
pub fn hlp_check(spec: &MeanSpec) -> HlpVerdict {
    let (lo, hi) = spec.interval();
    let xs: Vec<f64> = (0..GRID).map(|i| lo + (hi - lo) * i as f64 / (GRID - 1) as f64).collect();
    let d: Vec<[f64; 4]> = xs.iter().map(|&x| spec.derivs(x)).collect();

    let flat = d.iter().all(|v| v[2].abs() <= 1e-12 * (1.0 + v[1].abs()));
    if flat {
        return HlpVerdict {
            convex: true,
            linear: true,
            witness: None,
            witness_x: None,
        };
    }
    if let Some(i) = d.iter().position(|v| !(v[2] > 0.0)) {
        return HlpVerdict {
            convex: false,
            linear: false,
            witness: Some(format!("F''({}) = {:e} <= 0", xs[i], d[i][2])),
            witness_x: Some(xs[i]),
        };
    }
    let g: Vec<f64> = d.iter().map(|v| v[1] / v[2]).collect();
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-10 * scale;
    for i in 0..GRID {
        for j in (i + 2..GRID).step_by(2) {
            let m = (i + j) / 2;
            let gap = 0.5 * (g[i] + g[j]) - g[m];
            if gap > tol {
                return HlpVerdict {
                    convex: false,
                    linear: false,
                    witness: Some(format!(
                        "F'/F'' not concave: midpoint {} of [{}, {}] falls {:e} below the chord",
                        xs[m], xs[i], xs[j], gap
                    )),
                    witness_x: Some(xs[m]),
                };
            }
        }
    }
    HlpVerdict {
        convex: true,
        linear: false,
        witness: None,
        witness_x: None,
    }
}

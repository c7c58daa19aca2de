//! `R = (−F′/F″)*`, i.e. `R(b) = sup_v {v·b + F′(v)/F″(v)}`.
//!
//! The supremum runs over the domain on which the closed form of `F′/F″`
//! stays concave (all of ℝ for `eˣ` and `xᵖ`, `(−2, ∞)` for `x eˣ`, the
//! interval `I` otherwise). Infinite ends are truncated at `±TRUNCATION`;
//! a maximizer sitting on a truncated end with the objective still rising
//! outward faster than `SLOPE_TOL` is reported as `+∞`.

use serde::Serialize;

use super::{hlp_check, MeanKind, MeanSpec};
use crate::error::{Error, Result};
use crate::gaussian::Extended;

pub const TRUNCATION: f64 = 1e8;
pub const SLOPE_TOL: f64 = 1e-6;
const V_POINTS: usize = 10_000;

#[derive(Debug, Clone, Serialize)]
pub struct ConjugateTable {
    pub b: Vec<f64>,
    pub r: Vec<Extended>,
    /// Maximizing `v` for finite entries.
    pub argmax: Vec<Option<f64>>,
    /// Smallest and largest grid `b` with finite `R(b)`.
    pub effective_domain: Option<(f64, f64)>,
}

impl ConjugateTable {
    pub fn finite(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.b.iter().zip(&self.r).filter_map(|(&b, r)| r.finite().map(|v| (b, v)))
    }
}

fn v_grid(lo: f64, hi: f64) -> Vec<f64> {
    let half = V_POINTS / 2;
    let logspace = |n: usize| -> Vec<f64> {
        (0..n).map(|i| 10f64.powf(-8.0 + 16.0 * i as f64 / (n - 1) as f64)).collect()
    };
    match (lo.is_finite(), hi.is_finite()) {
        (false, false) => {
            let pos = logspace(half);
            let mut v: Vec<f64> = pos.iter().rev().map(|p| -p).collect();
            v.push(0.0);
            v.extend(pos);
            v
        }
        (true, false) => logspace(V_POINTS).into_iter().map(|p| lo + p).collect(),
        (false, true) => logspace(V_POINTS).into_iter().rev().map(|p| hi - p).collect(),
        (true, true) => (0..V_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / (V_POINTS - 1) as f64)
            .collect(),
    }
}

fn golden_max<F: Fn(f64) -> f64>(g: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    [a, b, x].into_iter().fold(x, |best, y| if g(y) > g(best) { y } else { best })
}

/// Tabulate `R` on `b_grid`. Rejects specs failing [`hlp_check`].
pub fn fenchel_r(spec: &MeanSpec, b_grid: &[f64]) -> Result<ConjugateTable> {
    let verdict = hlp_check(spec);
    if !verdict.convex {
        return Err(Error::NotConvex {
            name: spec.name(),
            witness: verdict.witness.unwrap_or_default(),
        });
    }
    let (dlo, dhi) = spec.conjugate_domain();
    let grid = v_grid(dlo, dhi);
    let gv: Vec<f64> = grid.iter().map(|&v| spec.slope_ratio(v)).collect();
    let mut r = Vec::with_capacity(b_grid.len());
    let mut argmax = Vec::with_capacity(b_grid.len());
    for &b in b_grid {
        let (ext, arg) = conjugate_at(spec, b, &grid, &gv, (dlo, dhi));
        r.push(ext);
        argmax.push(arg);
    }
    let finite_b: Vec<f64> = b_grid.iter().zip(&r).filter(|(_, e)| e.is_finite()).map(|(&b, _)| b).collect();
    let effective_domain = finite_b.first().map(|&a| (a, *finite_b.last().expect("non-empty")));
    Ok(ConjugateTable {
        b: b_grid.to_vec(),
        r,
        argmax,
        effective_domain,
    })
}

fn conjugate_at(spec: &MeanSpec, b: f64, grid: &[f64], gv: &[f64], domain: (f64, f64)) -> (Extended, Option<f64>) {
    let obj = |v: f64| v * b + spec.slope_ratio(v);
    let (mut best, mut best_i) = (f64::NEG_INFINITY, 0);
    for (i, (&v, &g)) in grid.iter().zip(gv).enumerate() {
        let o = v * b + g;
        if o > best {
            best = o;
            best_i = i;
        }
    }
    let last = grid.len() - 1;
    let slope = |v: f64| {
        let h = 1e-6 * v.abs().max(1.0);
        (obj(v + h) - obj(v - h)) / (2.0 * h)
    };
    if best_i == last && !domain.1.is_finite() && slope(grid[last]) > SLOPE_TOL {
        return (Extended::PosInfinity, None);
    }
    if best_i == 0 && !domain.0.is_finite() && slope(grid[0]) < -SLOPE_TOL {
        return (Extended::PosInfinity, None);
    }
    let a = grid[best_i.saturating_sub(1)];
    let c = grid[(best_i + 1).min(last)];
    let v = golden_max(obj, a, c);
    let value = obj(v).max(best);
    (Extended::Finite(value), Some(v))
}

/// `R(b)` in closed form for `eˣ`, `xᵖ` and `x eˣ`; other specs go through
/// the numerical conjugate. Exact point masses are matched within `1e-9`.
pub fn r_closed_form(spec: &MeanSpec, b: f64) -> Result<Extended> {
    Ok(match spec.kind() {
        MeanKind::Exp => {
            if b.abs() <= 1e-9 {
                Extended::Finite(1.0)
            } else {
                Extended::PosInfinity
            }
        }
        MeanKind::Power(p) => {
            if (b + 1.0 / (p - 1.0)).abs() <= 1e-9 {
                Extended::Finite(0.0)
            } else {
                Extended::PosInfinity
            }
        }
        MeanKind::XExp(_) => {
            if b <= 0.0 {
                Extended::Finite(-2.0 * (-b).sqrt() - 2.0 * b + 1.0)
            } else {
                Extended::PosInfinity
            }
        }
        _ => fenchel_r(spec, &[b])?.r[0],
    })
}

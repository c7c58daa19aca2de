//! Endpoints of the `Φ_c` family: `√(−2 ln c)·Φ_c⁻¹(x) → ln x` as `c ↓ 0`,
//! and `Φ_c⁻¹(x) + Φ⁻¹(c) = Φ⁻¹(cx) → Φ⁻¹(x)` as `c ↑ 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{phi_inv, Extended, PhiCTransform};

#[derive(Debug, Clone, Serialize)]
pub struct LimitRow {
    pub c: f64,
    pub value: f64,
    /// `√(−2 ln c)·Φ_c⁻¹(x)`.
    pub scaled: f64,
    /// `scaled / ln x`; absent at `x = 1` where both vanish.
    pub ratio: Option<f64>,
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UpperLimit {
    pub c: f64,
    pub value: f64,
    /// `|Φ_c⁻¹(x) − (Φ⁻¹(cx) − Φ⁻¹(c))|`, zero up to rounding.
    pub definition_gap: f64,
    /// `|Φ⁻¹(cx) − Φ⁻¹(x)|`: the shift-free form against the Ehrhard scale.
    pub ehrhard_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitTable {
    pub x: f64,
    pub rows: Vec<LimitRow>,
    /// Deviations strictly decrease along the list.
    pub strictly_decreasing: bool,
    pub upper: Option<UpperLimit>,
}

fn finite(e: Extended) -> Result<f64> {
    e.finite().ok_or(Error::NonFinite("Phi_c inverse"))
}

/// Tabulates the `c ↓ 0` ratio for each `c` in `c_list` (decreasing), plus
/// the `c ↑ 1` check at `upper_c` when given.
pub fn limit_recovery(c_list: &[f64], x: f64, upper_c: Option<f64>) -> Result<LimitTable> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::Domain { what: "limit argument x", value: x });
    }
    if c_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("c values must be strictly decreasing".into()));
    }
    let mut rows = Vec::with_capacity(c_list.len());
    for &c in c_list {
        let value = finite(PhiCTransform::new(c)?.inv(x)?)?;
        let scaled = (-2.0 * c.ln()).sqrt() * value;
        let ratio = (x < 1.0).then(|| scaled / x.ln());
        rows.push(LimitRow {
            c,
            value,
            scaled,
            ratio,
            deviation: ratio.map(|r| (r - 1.0).abs()),
        });
    }
    let devs: Vec<f64> = rows.iter().filter_map(|r| r.deviation).collect();
    let strictly_decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    let upper = upper_c
        .map(|c| -> Result<UpperLimit> {
            let value = finite(PhiCTransform::new(c)?.inv(x)?)?;
            let shifted = phi_inv(c * x)?;
            Ok(UpperLimit {
                c,
                value,
                definition_gap: (value - (shifted - phi_inv(c)?)).abs(),
                ehrhard_gap: if x < 1.0 { (shifted - phi_inv(x)?).abs() } else { 0.0 },
            })
        })
        .transpose()?;
    Ok(LimitTable {
        x,
        rows,
        strictly_decreasing,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_approaches_one() {
        let t = limit_recovery(&[1e-4, 1e-8, 1e-12], 0.5, Some(0.999)).unwrap();
        assert!(t.strictly_decreasing);
        // Independent route: Φ⁻¹(cx) − Φ⁻¹(c) for tiny c via the tail
        // expansion x ↦ −√(−2 ln x − ln(−2π ln x)) is too crude, so compare
        // with the closed value of the asymptote instead.
        let last = t.rows.last().unwrap();
        assert!(last.deviation.unwrap() <= 0.15);
        let u = t.upper.unwrap();
        assert!(u.definition_gap < 1e-12);
        assert!(u.ehrhard_gap < 1e-2);
        let one = limit_recovery(&[1e-4], 1.0, None).unwrap();
        assert_eq!(one.rows[0].value, 0.0);
        assert!(one.rows[0].ratio.is_none());
        assert!(limit_recovery(&[1e-8, 1e-4], 0.5, None).is_err());
    }
}

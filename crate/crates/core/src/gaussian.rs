//! Gaussian primitives: the standard normal CDF and its inverse, the
//! `Φ_c` family, correlated Brownian increments and the Lambert W function.
//!
//! `Φ` is evaluated through `erfc` on the lower tail and reflected, so that
//! `phi(-x) + phi(x) == 1` up to one rounding and relative accuracy is kept
//! deep in the left tail. `Φ⁻¹` uses Wichura's AS241 rational approximations
//! followed by one Halley step against [`phi`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Probabilities below this (or above `1 - EPS_CLIP`) are saturated by
/// [`phi_inv_clamped`].
pub const EPS_CLIP: f64 = 1e-15;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Real number extended with the two infinities, used wherever a value can
/// legitimately be `±∞` and must not leak into arithmetic silently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extended {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }
}

/// Standard normal density.
#[inline]
pub fn phi_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// `Φ(-|x|)`, the lower tail, evaluated without cancellation.
#[inline]
fn lower_tail(ax: f64) -> f64 {
    if ax <= 1.0 {
        0.5 - 0.5 * libm::erf(ax * FRAC_1_SQRT_2)
    } else {
        0.5 * libm::erfc(ax * FRAC_1_SQRT_2)
    }
}

/// Standard normal CDF `Φ(x) = γ₁((-∞, x])`.
#[inline]
pub fn phi(x: f64) -> f64 {
    let t = lower_tail(x.abs());
    if x < 0.0 {
        t
    } else {
        1.0 - t
    }
}

/// Upper tail `1 - Φ(x) = Φ(-x)` without cancellation.
#[inline]
pub fn phi_upper(x: f64) -> f64 {
    phi(-x)
}

/// Standard normal quantile. Rejects `p ∉ (0, 1)`.
pub fn phi_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            what: "phi_inv probability",
            value: p,
        });
    }
    Ok(quantile(p))
}

/// Result of a clamped quantile evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub saturated: bool,
}

/// Quantile with inputs clamped to `[EPS_CLIP, 1 - EPS_CLIP]`; `saturated`
/// records whether clamping happened. NaN input is clamped to the median and
/// flagged.
pub fn phi_inv_clamped(p: f64) -> Clamped {
    if p.is_nan() {
        return Clamped {
            value: 0.0,
            saturated: true,
        };
    }
    let q = p.clamp(EPS_CLIP, 1.0 - EPS_CLIP);
    Clamped {
        value: quantile(q),
        saturated: q != p,
    }
}

#[rustfmt::skip]
#[allow(unused_parens)]
fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4) * r + 4.592_195_393_154_987e4) * r
            + 1.373_169_376_550_946e4) * r + 1.971_590_950_306_551_3e3) * r
            + 1.331_416_678_917_843_8e2) * r + 3.387_132_872_796_366_5);
        let den = (((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4) * r + 2.121_379_430_158_659_7e4) * r
            + 5.394_196_021_424_751e3) * r + 6.871_870_074_920_579e2) * r
            + 4.231_333_070_160_091e1) * r + 1.0);
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        let num = (((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1) * r + 1.270_458_252_452_368_4) * r
            + 3.647_848_324_763_204_5) * r + 5.769_497_221_460_691) * r
            + 4.630_337_846_156_546) * r + 1.423_437_110_749_683_5);
        let den = (((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2) * r + 1.481_039_764_274_800_8e-1) * r
            + 6.897_673_349_851e-1) * r + 1.676_384_830_183_803_8) * r
            + 2.053_191_626_637_759) * r + 1.0);
        num / den
    } else {
        r -= 5.0;
        let num = (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3) * r + 2.653_218_952_657_612_4e-2) * r
            + 2.965_605_718_285_048_7e-1) * r + 1.784_826_539_917_291_3) * r
            + 5.463_784_911_164_114) * r + 6.657_904_643_501_103);
        let den = (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5) * r + 7.868_691_311_456_133e-4) * r
            + 1.487_536_129_085_061_5e-2) * r + 1.369_298_809_227_358e-1) * r
            + 5.998_322_065_558_879e-1) * r + 1.0);
        num / den
    };
    if q < 0.0 { -x } else { x }
}

fn quantile(p: f64) -> f64 {
    let x = as241(p);
    // One Halley step, measured on whichever tail is represented exactly.
    let err = if p < 0.5 {
        phi(x) - p
    } else {
        (1.0 - p) - phi_upper(x)
    };
    let u = err * SQRT_2PI * (0.5 * x * x).exp();
    if !u.is_finite() {
        return x;
    }
    x - u / (1.0 + 0.5 * x * u)
}

/// The map `x ↦ Φ⁻¹(cx) − Φ⁻¹(c)` on `(0, 1]` and its inverse
/// `y ↦ Φ(y + Φ⁻¹(c)) / c` on `(-∞, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiCTransform {
    c: f64,
    shift: f64,
}

impl PhiCTransform {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::Domain {
                what: "Phi_c parameter c",
                value: c,
            });
        }
        Ok(Self {
            c,
            shift: quantile(c),
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `Φ⁻¹(c)`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `Φ_c⁻¹(x)`; `x = 0` yields the `-∞` sentinel.
    pub fn inv(&self, x: f64) -> Result<Extended> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain {
                what: "Phi_c argument",
                value: x,
            });
        }
        if x == 0.0 {
            return Ok(Extended::NegInfinity);
        }
        if x == 1.0 {
            return Ok(Extended::Finite(0.0));
        }
        let cx = self.c * x;
        if cx < f64::MIN_POSITIVE {
            return Ok(Extended::NegInfinity);
        }
        Ok(Extended::Finite(quantile(cx) - self.shift))
    }

    /// `Φ_c⁻¹(x)` for `x ∈ (0, 1]`, panicking on the sentinel. Intended for
    /// fields already validated to be bounded away from zero.
    pub fn inv_finite(&self, x: f64) -> f64 {
        match self.inv(x) {
            Ok(Extended::Finite(v)) => v,
            other => panic!("Phi_c^-1({x}) is not finite: {other:?}"),
        }
    }

    /// `Φ_c(y) = Φ(y + Φ⁻¹(c)) / c`, defined for `y ≤ 0` (values above 0
    /// are clamped to 1).
    pub fn forward(&self, y: f64) -> f64 {
        if y >= 0.0 {
            return 1.0;
        }
        (phi(y + self.shift) / self.c).min(1.0)
    }
}

/// Correlation that makes `λW + μW̃` a standard Brownian motion, or the
/// violated admissibility condition. When `λμ = 0` the correlation is
/// irrelevant and 0 is returned.
pub fn admissible_correlation(lambda: f64, mu: f64) -> Result<f64> {
    let err = |condition| Error::Admissibility {
        lambda,
        mu,
        condition,
    };
    if !(lambda >= 0.0 && mu >= 0.0) {
        return Err(err("lambda >= 0 and mu >= 0"));
    }
    if lambda + mu < 1.0 - 1e-12 {
        return Err(err("lambda + mu >= 1"));
    }
    if (lambda - mu).abs() > 1.0 + 1e-12 {
        return Err(err("|lambda - mu| <= 1"));
    }
    if lambda * mu == 0.0 {
        return Ok(0.0);
    }
    Ok(((1.0 - lambda * lambda - mu * mu) / (2.0 * lambda * mu)).clamp(-1.0, 1.0))
}

/// One step of two `dim`-dimensional Brownian motions with componentwise
/// correlation `rho`, written into the supplied buffers.
pub fn correlated_increments_into<R: Rng + ?Sized>(
    rho: f64,
    dt: f64,
    rng: &mut R,
    dw: &mut [f64],
    dw_tilde: &mut [f64],
) {
    let s = dt.sqrt();
    let orth = (1.0 - rho * rho).max(0.0).sqrt();
    for (a, b) in dw.iter_mut().zip(dw_tilde.iter_mut()) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        *a = s * z1;
        *b = s * (rho * z1 + orth * z2);
    }
}

/// Jointly Gaussian increments `(ΔW, ΔW̃)`, each `N(0, dt·I)`, with
/// componentwise correlation `rho`.
pub fn correlated_increments<R: Rng + ?Sized>(
    rho: f64,
    dt: f64,
    dim: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::Domain {
            what: "correlation rho",
            value: rho,
        });
    }
    if !(dt > 0.0) {
        return Err(Error::Domain {
            what: "time step",
            value: dt,
        });
    }
    let mut dw = vec![0.0; dim];
    let mut dwt = vec![0.0; dim];
    correlated_increments_into(rho, dt, rng, &mut dw, &mut dwt);
    Ok((dw, dwt))
}

/// Principal branch of the Lambert W function on `[0, ∞)`.
pub fn lambert_w(y: f64) -> Result<f64> {
    if !(y >= 0.0) || y.is_infinite() {
        return Err(Error::Domain {
            what: "lambert_w argument",
            value: y,
        });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut w = if y < 3.0 {
        (1.0 + y).ln() * 0.8
    } else {
        let l = y.ln();
        l - l.ln().max(0.0)
    };
    for _ in 0..100 {
        let ew = w.exp();
        let g = w * ew - y;
        let denom = ew * (w + 1.0) - (w + 2.0) * g / (2.0 * w + 2.0);
        let next = w - g / denom;
        if (next - w).abs() <= 1e-16 * next.abs().max(1.0) {
            return Ok(next);
        }
        w = next;
    }
    Ok(w)
}

/// `√(2π)` exposed for density bookkeeping elsewhere.
pub fn sqrt_two_pi() -> f64 {
    (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    /// Independent oracle: Φ from the alternating Taylor series of erf,
    /// summed in extended steps; accurate for |x| ≤ 3.
    fn phi_series(x: f64) -> f64 {
        let z = x / 2f64.sqrt();
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0;
        while term.abs() > 1e-18 {
            n += 1.0;
            term *= -z * z / n;
            sum += term / (2.0 * n + 1.0);
        }
        0.5 + sum / PI.sqrt()
    }

    #[test]
    fn phi_at_zero_and_symmetry() {
        assert_eq!(phi(0.0), 0.5);
        for &x in &[0.1, 0.7, 1.0, 1.3, 2.5, 5.0, 9.0, 30.0] {
            assert!((phi(x) + phi(-x) - 1.0).abs() <= 1e-15, "x = {x}");
        }
    }

    #[test]
    fn phi_matches_series_oracle() {
        // Bisection on the series oracle gives the 95% quantile.
        let (mut lo, mut hi) = (1.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi_series(mid) < 0.95 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((lo - 1.644_853_626_951_472_2).abs() < 1e-13);
        assert!((phi(1.644_853_626_951_472_2) - 0.95).abs() < 1e-15);
        for i in -30..=30 {
            let x = i as f64 / 10.0;
            assert!((phi(x) - phi_series(x)).abs() < 1e-14, "x = {x}");
        }
    }

    #[test]
    fn phi_inv_examples() {
        assert_eq!(phi_inv(0.5).unwrap(), 0.0);
        assert!((phi_inv(phi(2.0)).unwrap() - 2.0).abs() < 1e-12);
        assert!((phi_inv(0.001_349_898_031_630_093_3).unwrap() + 3.0).abs() < 1e-9);
        assert!(phi_inv(0.0).is_err());
        assert!(phi_inv(1.0).is_err());
        assert!(phi_inv(f64::NAN).is_err());
    }

    #[test]
    fn clamped_quantile_flags_saturation() {
        let c = phi_inv_clamped(0.0);
        assert!(c.saturated);
        assert!((c.value - quantile(EPS_CLIP)).abs() < 1e-12);
        let c = phi_inv_clamped(0.3);
        assert!(!c.saturated);
        assert_eq!(c.value, phi_inv(0.3).unwrap());
        assert!(phi_inv_clamped(1.0).saturated);
    }

    #[test]
    fn quantile_round_trip_probability_side() {
        let mut p = 1e-10;
        while p < 1.0 - 1e-10 {
            let back = phi(phi_inv(p).unwrap());
            assert!((back - p).abs() <= 1e-12 * p.max(1e-4), "p = {p}");
            p *= 1.37;
            if p > 0.5 {
                // walk the upper half symmetrically
                let mut q = 0.5;
                while q > 1e-10 {
                    let pp = 1.0 - q;
                    let back = phi(phi_inv(pp).unwrap());
                    assert!((back - pp).abs() <= 1e-12, "p = {pp}");
                    q /= 1.41;
                }
                break;
            }
        }
    }

    #[test]
    fn quantile_round_trip_real_side() {
        // On x ≤ 0 the probability is represented with full relative accuracy.
        // For x > 0, 1 - Φ(x) loses bits once Φ(x) is rounded near 1, so the
        // reachable accuracy is limited by the conditioning eps / φ(x); the
        // reflected route recovers x exactly.
        for i in 0..=1600 {
            let x = -8.0 + i as f64 * 0.01;
            let direct = phi_inv(phi(x)).unwrap_or(f64::INFINITY);
            let reflected = -phi_inv(phi(-x)).unwrap_or(f64::INFINITY);
            let (exact, other) = if x <= 0.0 { (direct, reflected) } else { (reflected, direct) };
            assert!((exact - x).abs() < 1e-12, "x = {x}");
            let cond = f64::EPSILON / phi_density(x);
            assert!(!other.is_finite() || (other - x).abs() < 1e-12 + cond, "x = {x}: {other}");
        }
    }

    #[test]
    fn phi_c_examples() {
        let t = PhiCTransform::new(0.3).unwrap();
        assert_eq!(t.inv(1.0).unwrap(), Extended::Finite(0.0));
        assert_eq!(t.inv(0.0).unwrap(), Extended::NegInfinity);
        let half = PhiCTransform::new(0.5).unwrap();
        let v = half.inv(0.5).unwrap().finite().unwrap();
        assert!((v - phi_inv(0.25).unwrap()).abs() < 1e-15);
        let tiny = PhiCTransform::new(1e-8).unwrap();
        let y = tiny.inv(0.5).unwrap().finite().unwrap();
        let ratio = y * (-2.0 * 1e-8f64.ln()).sqrt() / 0.5f64.ln();
        assert!((ratio - 1.0).abs() < 0.15, "ratio {ratio}");
        assert!(PhiCTransform::new(0.0).is_err());
        assert!(PhiCTransform::new(1.0).is_err());
        assert!(t.inv(1.5).is_err());
    }

    #[test]
    fn phi_c_round_trip_and_monotone() {
        for &c in &[1e-12, 1e-6, 0.1, 0.5, 0.9, 0.999] {
            let t = PhiCTransform::new(c).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=1000 {
                let x = 1e-6 + (1.0 - 1e-6) * i as f64 / 1000.0;
                let y = t.inv_finite(x);
                assert!(y > prev, "c = {c}, x = {x}");
                assert!(y <= 0.0);
                if x < 1.0 {
                    assert!(y < 0.0);
                }
                prev = y;
                assert!((t.forward(y) - x).abs() < 1e-10, "c = {c}, x = {x}");
            }
        }
    }

    #[test]
    fn admissibility() {
        assert_eq!(admissible_correlation(0.5, 0.5).unwrap(), 1.0);
        assert!((admissible_correlation(1.0, 1.0).unwrap() + 0.5).abs() < 1e-15);
        assert!(matches!(
            admissible_correlation(2.0, 0.5),
            Err(Error::Admissibility {
                condition: "|lambda - mu| <= 1",
                ..
            })
        ));
        assert!(matches!(
            admissible_correlation(0.4, 0.4),
            Err(Error::Admissibility {
                condition: "lambda + mu >= 1",
                ..
            })
        ));
        assert_eq!(admissible_correlation(1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn increments_identical_at_full_correlation() {
        let mut rng = RngStream::new(3, 0).generator();
        for _ in 0..100 {
            let (a, b) = correlated_increments(1.0, 0.01, 3, &mut rng).unwrap();
            assert_eq!(a, b);
        }
        assert!(correlated_increments(1.5, 0.01, 1, &mut rng).is_err());
    }

    #[test]
    fn increments_uncorrelated_at_zero() {
        let mut rng = RngStream::new(11, 4).generator();
        let n = 1_000_000;
        let dt = 1.0;
        let mut cross = 0.0;
        for _ in 0..n {
            let (a, b) = correlated_increments(0.0, dt, 1, &mut rng).unwrap();
            cross += a[0] * b[0];
        }
        let corr = cross / n as f64;
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn combined_process_is_standard_brownian() {
        // λ = μ = 1 ⇒ ρ = -1/2, and W + W̃ must have per-step variance dt.
        for &(lam, mu) in &[(1.0, 1.0), (0.5, 0.5), (0.8, 0.6), (1.5, 0.9)] {
            let rho = admissible_correlation(lam, mu).unwrap();
            let mut rng = RngStream::new(5, 1).generator();
            let dt = 1e-3;
            let n = 100_000;
            let dim = 2;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let (a, b) = correlated_increments(rho, dt, dim, &mut rng).unwrap();
                let sq: f64 = a
                    .iter()
                    .zip(&b)
                    .map(|(x, y)| (lam * x + mu * y).powi(2))
                    .sum();
                sum += sq;
                sum_sq += sq * sq;
            }
            let mean = sum / n as f64;
            let var = sum_sq / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            let target = dim as f64 * dt;
            assert!((mean - target).abs() < 3.0 * se, "{lam},{mu}: {mean} vs {target}");
        }
    }

    #[test]
    fn lambert_w_examples() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert!((lambert_w(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-14);
        let y = 2.0 * std::f64::consts::E.powi(2);
        assert!((lambert_w(y).unwrap() - 2.0).abs() < 1e-12);
        for &y in &[1e-12, 1e-3, 0.5, 1.0, 10.0, 1e3, 1e8] {
            let w = lambert_w(y).unwrap();
            assert!((w * w.exp() - y).abs() <= 1e-12 * y.max(1.0), "y = {y}");
        }
        assert!(lambert_w(-0.1).is_err());
    }
}

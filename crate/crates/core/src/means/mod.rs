//! Generalized means `𝔐_F(f) = F⁻¹(∫F(f) dγₙ)` for strictly increasing `F`.

mod conjugate;
mod hlp;
mod representation;

pub use conjugate::{fenchel_r, r_closed_form, ConjugateTable, SLOPE_TOL, TRUNCATION};
pub use hlp::{hlp_check, HlpVerdict};
pub use representation::{
    bellman_residual, find_convexity_violation, generalized_mean, nonconvex_optimal_value, payoff_k, payoff_k_xexp_eta,
    payoff_nonconvex_example, ConvexityWitness, EtaControls, KConstant, KControls, KOptimal, NonconvexTilde,
    XExpEtaOptimal,
};

use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::gaussian::{lambert_w, phi, phi_density, phi_inv, phi_inv_clamped};

type Derivs = dyn Fn(f64) -> [f64; 4] + Send + Sync;

#[derive(Clone)]
pub enum MeanKind {
    Exp,
    Power(f64),
    /// `x eˣ` on `[0, C]`.
    XExp(f64),
    /// `1 − e^{−x²/2}`.
    GaussTail,
    Phi,
    /// User supplied `x ↦ [F, F′, F″, F‴]`.
    Custom { name: String, derivs: Arc<Derivs> },
}

/// A generalized-mean datum: `F` with three derivatives on `I = [lo, hi]`.
#[derive(Clone)]
pub struct MeanSpec {
    kind: MeanKind,
    lo: f64,
    hi: f64,
}

impl fmt::Debug for MeanSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MeanSpec({} on [{}, {}])", self.name(), self.lo, self.hi)
    }
}

impl Serialize for MeanSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl MeanSpec {
    pub fn exp() -> Self {
        Self {
            kind: MeanKind::Exp,
            lo: -10.0,
            hi: 10.0,
        }
    }

    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Domain {
                what: "power exponent (needs p > 1)",
                value: p,
            });
        }
        Ok(Self {
            kind: MeanKind::Power(p),
            lo: 0.1,
            hi: 10.0,
        })
    }

    pub fn xexp(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain {
                what: "xexp interval end C",
                value: c,
            });
        }
        Ok(Self {
            kind: MeanKind::XExp(c),
            lo: 0.0,
            hi: c,
        })
    }

    pub fn gauss_tail() -> Self {
        Self {
            kind: MeanKind::GaussTail,
            lo: 0.05,
            hi: 6.0,
        }
    }

    pub fn phi() -> Self {
        Self {
            kind: MeanKind::Phi,
            lo: -8.0,
            hi: 8.0,
        }
    }

    pub fn custom<D>(name: impl Into<String>, lo: f64, hi: f64, derivs: D) -> Result<Self>
    where
        D: Fn(f64) -> [f64; 4] + Send + Sync + 'static,
    {
        let spec = Self {
            kind: MeanKind::Custom {
                name: name.into(),
                derivs: Arc::new(derivs),
            },
            lo,
            hi,
        };
        spec.with_interval(lo, hi)
    }

    /// Registry lookup: `exp`, `power:p`, `xexp:C`, `gauss_tail`, `phi`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::Parse {
                offset: head.len(),
                message: format!("'{head}' needs a parameter, e.g. {head}:2"),
            })?;
            a.trim().parse::<f64>().map_err(|_| Error::Parse {
                offset: head.len() + 1,
                message: format!("invalid parameter '{a}'"),
            })
        };
        let no_arg = |spec: MeanSpec| -> Result<MeanSpec> {
            match arg {
                Some(_) => Err(Error::Parse {
                    offset: head.len(),
                    message: format!("'{head}' takes no parameter"),
                }),
                None => Ok(spec),
            }
        };
        match head {
            "exp" => no_arg(Self::exp()),
            "phi" => no_arg(Self::phi()),
            "gauss_tail" => no_arg(Self::gauss_tail()),
            "power" => Self::power(number(arg)?),
            "xexp" => Self::xexp(number(arg)?),
            other => Err(Error::Parse {
                offset: 0,
                message: format!("unknown mean '{other}' (known: exp, power:p, xexp:C, gauss_tail, phi)"),
            }),
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            MeanKind::Exp => "exp".into(),
            MeanKind::Power(p) => format!("power:{p}"),
            MeanKind::XExp(c) => format!("xexp:{c}"),
            MeanKind::GaussTail => "gauss_tail".into(),
            MeanKind::Phi => "phi".into(),
            MeanKind::Custom { name, .. } => name.clone(),
        }
    }

    pub fn kind(&self) -> &MeanKind {
        &self.kind
    }

    pub fn is_phi(&self) -> bool {
        matches!(self.kind, MeanKind::Phi)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Restrict or widen `I`; checks `F′ > 0` and `F⁻¹ ∘ F = id` on a grid.
    pub fn with_interval(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Precondition(format!("invalid interval [{lo}, {hi}]")));
        }
        let natural = match self.kind {
            MeanKind::Power(_) => (0.0, f64::INFINITY),
            MeanKind::XExp(_) => (-1.0, f64::INFINITY),
            MeanKind::GaussTail => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        };
        if lo < natural.0 || hi > natural.1 {
            return Err(Error::Range {
                lo,
                hi,
                allowed_lo: natural.0,
                allowed_hi: natural.1,
            });
        }
        self.lo = lo;
        self.hi = hi;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = 1000;
        for i in 0..=n {
            let x = self.lo + (self.hi - self.lo) * i as f64 / n as f64;
            let [_, d1, _, _] = self.derivs(x);
            // F′ may vanish at an endpoint only.
            if !(d1 > 0.0) && i != 0 && i != n {
                return Err(Error::Precondition(format!("{}: F' = {d1} at {x}", self.name())));
            }
            let back = self.inv(self.f(x));
            if (back - x).abs() > self.round_trip_tolerance(x) {
                return Err(Error::Precondition(format!(
                    "{}: inverse round trip failed at {x} (got {back})",
                    self.name()
                )));
            }
        }
        Ok(())
    }

    /// Attainable accuracy of `F⁻¹(F(x))`: `1e-10` relative plus the
    /// conditioning `ε·F(x)/F′(x)` of inverting a rounded `F(x)`.
    pub fn round_trip_tolerance(&self, x: f64) -> f64 {
        let [fx, d1, _, _] = self.derivs(x);
        1e-10 * x.abs().max(1.0) + 4.0 * f64::EPSILON * fx.abs() / d1
    }

    pub fn f(&self, x: f64) -> f64 {
        match &self.kind {
            MeanKind::Exp => x.exp(),
            MeanKind::Power(p) => x.powf(*p),
            MeanKind::XExp(_) => x * x.exp(),
            MeanKind::GaussTail => -(-0.5 * x * x).exp_m1(),
            MeanKind::Phi => phi(x),
            MeanKind::Custom { derivs, .. } => derivs(x)[0],
        }
    }

    /// `[F, F′, F″, F‴]` at `x`.
    pub fn derivs(&self, x: f64) -> [f64; 4] {
        match &self.kind {
            MeanKind::Exp => {
                let e = x.exp();
                [e; 4]
            }
            MeanKind::Power(p) => {
                let p = *p;
                let a = x.powf(p - 3.0);
                [x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0), p * (p - 1.0) * (p - 2.0) * a]
            }
            MeanKind::XExp(_) => {
                let e = x.exp();
                [x * e, (1.0 + x) * e, (2.0 + x) * e, (3.0 + x) * e]
            }
            MeanKind::GaussTail => {
                let e = (-0.5 * x * x).exp();
                [-(-0.5 * x * x).exp_m1(), x * e, (1.0 - x * x) * e, (x * x * x - 3.0 * x) * e]
            }
            MeanKind::Phi => {
                let d = phi_density(x);
                [phi(x), d, -x * d, (x * x - 1.0) * d]
            }
            MeanKind::Custom { derivs, .. } => derivs(x),
        }
    }

    /// `F′(x)`.
    pub fn d1(&self, x: f64) -> f64 {
        match &self.kind {
            MeanKind::Phi => phi_density(x),
            _ => self.derivs(x)[1],
        }
    }

    /// `F″(v)/F′(v)`, exact where a closed form exists (`−v` for `Φ`).
    pub fn ratio(&self, v: f64) -> f64 {
        match &self.kind {
            MeanKind::Exp => 1.0,
            MeanKind::Power(p) => (p - 1.0) / v,
            MeanKind::XExp(_) => (2.0 + v) / (1.0 + v),
            MeanKind::GaussTail => 1.0 / v - v,
            MeanKind::Phi => -v,
            MeanKind::Custom { derivs, .. } => {
                let d = derivs(v);
                d[2] / d[1]
            }
        }
    }

    /// `F′(v)/F″(v)`, the function whose concavity the HLP criterion tests.
    pub fn slope_ratio(&self, v: f64) -> f64 {
        match &self.kind {
            MeanKind::Exp => 1.0,
            MeanKind::Power(p) => v / (p - 1.0),
            MeanKind::XExp(_) => (1.0 + v) / (2.0 + v),
            MeanKind::GaussTail => v / (1.0 - v * v),
            MeanKind::Phi => -1.0 / v,
            MeanKind::Custom { derivs, .. } => {
                let d = derivs(v);
                d[1] / d[2]
            }
        }
    }

    /// Optimal scalar control `F′F‴/F″² − 1`, closed form where known.
    pub fn beta_star(&self, v: f64) -> f64 {
        match &self.kind {
            MeanKind::Exp => 0.0,
            MeanKind::Power(p) => -1.0 / (p - 1.0),
            MeanKind::XExp(_) => -1.0 / ((2.0 + v) * (2.0 + v)),
            _ => {
                let d = self.derivs(v);
                d[1] * d[3] / (d[2] * d[2]) - 1.0
            }
        }
    }

    /// `F⁻¹(y)`; closed form for the registry entries, bracketed Newton
    /// otherwise. Values outside `F(I)` are clamped for custom specs.
    pub fn inv(&self, y: f64) -> f64 {
        match &self.kind {
            MeanKind::Exp => y.ln(),
            MeanKind::Power(p) => y.powf(1.0 / p),
            MeanKind::XExp(_) => lambert_w(y.max(0.0)).unwrap_or(f64::NAN),
            MeanKind::GaussTail => (-2.0 * (-y).ln_1p()).sqrt(),
            MeanKind::Phi => phi_inv(y).unwrap_or_else(|_| phi_inv_clamped(y).value),
            MeanKind::Custom { .. } => self.bracketed_inverse(y),
        }
    }

    fn bracketed_inverse(&self, y: f64) -> f64 {
        let (mut a, mut b) = (self.lo, self.hi);
        if y <= self.f(a) {
            return a;
        }
        if y >= self.f(b) {
            return b;
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let [fx, d1, _, _] = self.derivs(x);
            let r = fx - y;
            if r == 0.0 {
                return x;
            }
            if r > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let newton = x - r / d1;
            let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - x).abs() <= 1e-16 * x.abs().max(1.0) {
                return next;
            }
            x = next;
        }
        x
    }

    /// Domain on which `F′/F″` is extended when conjugating.
    pub fn conjugate_domain(&self) -> (f64, f64) {
        match self.kind {
            MeanKind::Exp | MeanKind::Power(_) => (f64::NEG_INFINITY, f64::INFINITY),
            MeanKind::XExp(_) => (-2.0, f64::INFINITY),
            _ => (self.lo, self.hi),
        }
    }
}

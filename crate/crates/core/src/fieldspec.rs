//! Text grammar for scalar fields.
//!
//! ```text
//! spec    := name '(' body ')'
//! body    := params | params? ';' spec (';' spec)*
//! params  := param (',' param)*
//! param   := key '=' number | number
//! ```
//!
//! Registry (positional order in brackets, `dim` accepted everywhere):
//! `const[v]`, `linear[a,b,clip_lo,clip_hi]`, `erf_ramp[center,sigma,lo,hi]`,
//! `logistic[center,sigma,lo,hi]`, `bump[center,width,lo,hi]`,
//! `step[at,lo,hi]`, `product(f;g)`, `mix(w;f;g)`, `affine(scale,shift;f)`,
//! `phi(f)` for `Φ∘f`.
//! Rendering is canonical (all keys, shortest round-trip numbers), so
//! `render(parse(s))` is a fixed point of `parse ∘ render`.

use crate::error::{Error, Result};
use crate::field::{Kind, ScalarField};

struct Entry {
    name: &'static str,
    keys: &'static [&'static str],
    defaults: &'static [Option<f64>],
    children: usize,
}

const REGISTRY: &[Entry] = &[
    Entry {
        name: "const",
        keys: &["v"],
        defaults: &[None],
        children: 0,
    },
    Entry {
        name: "linear",
        keys: &["a", "b", "clip_lo", "clip_hi"],
        defaults: &[Some(0.0), Some(1.0), Some(-8.0), Some(8.0)],
        children: 0,
    },
    Entry {
        name: "erf_ramp",
        keys: &["center", "sigma", "lo", "hi"],
        defaults: &[Some(0.0), Some(1.0), Some(0.0), Some(1.0)],
        children: 0,
    },
    Entry {
        name: "logistic",
        keys: &["center", "sigma", "lo", "hi"],
        defaults: &[Some(0.0), Some(1.0), Some(0.0), Some(1.0)],
        children: 0,
    },
    Entry {
        name: "bump",
        keys: &["center", "width", "lo", "hi"],
        defaults: &[Some(0.0), Some(1.0), Some(0.0), Some(1.0)],
        children: 0,
    },
    Entry {
        name: "step",
        keys: &["at", "lo", "hi"],
        defaults: &[Some(0.0), Some(0.0), Some(1.0)],
        children: 0,
    },
    Entry {
        name: "product",
        keys: &[],
        defaults: &[],
        children: 2,
    },
    Entry {
        name: "mix",
        keys: &["w"],
        defaults: &[None],
        children: 2,
    },
    Entry {
        name: "affine",
        keys: &["scale", "shift"],
        defaults: &[Some(1.0), Some(0.0)],
        children: 1,
    },
    Entry {
        name: "phi",
        keys: &[],
        defaults: &[],
        children: 1,
    },
];

/// Parse a field specification string.
pub fn parse(s: &str) -> Result<ScalarField> {
    let mut p = Parser { src: s, pos: 0 };
    let f = p.spec()?;
    p.skip_ws();
    if p.pos != s.len() {
        return Err(p.err("trailing input after field specification"));
    }
    Ok(f)
}

/// Canonical text for fields built from registry constructors; `None` for
/// closures and projections.
pub fn render(f: &ScalarField) -> Option<String> {
    let dim_suffix = |d: usize, base: usize| {
        if d != base {
            format!(",dim={d}")
        } else {
            String::new()
        }
    };
    let s = match &f.kind {
        Kind::Const(v) => format!("const(v={}{})", num(*v), dim_suffix(f.dim(), 1)),
        Kind::Linear {
            a,
            b,
            clip_lo,
            clip_hi,
            ..
        } => format!(
            "linear(a={},b={},clip_lo={},clip_hi={}{})",
            num(*a),
            num(*b),
            num(*clip_lo),
            num(*clip_hi),
            dim_suffix(f.dim(), 1)
        ),
        Kind::ErfRamp { center, sigma, lo, hi } => format!(
            "erf_ramp(center={},sigma={},lo={},hi={}{})",
            num(*center),
            num(*sigma),
            num(*lo),
            num(*hi),
            dim_suffix(f.dim(), 1)
        ),
        Kind::Logistic { center, sigma, lo, hi } => format!(
            "logistic(center={},sigma={},lo={},hi={}{})",
            num(*center),
            num(*sigma),
            num(*lo),
            num(*hi),
            dim_suffix(f.dim(), 1)
        ),
        Kind::Bump { center, width, lo, hi } => format!(
            "bump(center={},width={},lo={},hi={}{})",
            num(*center),
            num(*width),
            num(*lo),
            num(*hi),
            dim_suffix(f.dim(), 1)
        ),
        Kind::Step { at, lo, hi } => format!(
            "step(at={},lo={},hi={}{})",
            num(*at),
            num(*lo),
            num(*hi),
            dim_suffix(f.dim(), 1)
        ),
        Kind::Product(a, b) => format!(
            "product({};{}{})",
            render(a)?,
            render(b)?,
            if f.dim() != a.dim() + b.dim() {
                format!(";dim={}", f.dim())
            } else {
                String::new()
            }
        ),
        Kind::Mix(w, a, b) => format!(
            "mix(w={}{};{};{})",
            num(*w),
            dim_suffix(f.dim(), a.dim()),
            render(a)?,
            render(b)?
        ),
        Kind::Affine { scale, shift, inner } => format!(
            "affine(scale={},shift={}{};{})",
            num(*scale),
            num(*shift),
            dim_suffix(f.dim(), inner.dim()),
            render(inner)?
        ),
        Kind::PhiOf(inner) => {
            let d = if f.dim() != inner.dim() { format!("dim={};", f.dim()) } else { String::new() };
            format!("phi({d}{})", render(inner)?)
        }
        Kind::Projected { .. } | Kind::Custom { .. } => return None,
    };
    Some(s)
}

fn num(v: f64) -> String {
    // `{:?}` is the shortest string that round-trips.
    format!("{v:?}")
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        self.err_at(self.pos, msg)
    }

    fn err_at(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            offset,
            message: msg.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let r = self.rest();
        self.pos += r.len() - r.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(d) if d == c => {
                self.pos += 1;
                Ok(())
            }
            Some(d) => Err(self.err(format!("expected '{c}', found '{d}'"))),
            None => Err(self.err(format!("expected '{c}', found end of input"))),
        }
    }

    fn ident(&mut self) -> Result<(usize, &'a str)> {
        self.skip_ws();
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.err("expected identifier"));
        }
        self.pos += len;
        Ok((start, &self.src[start..start + len]))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E')))
            .unwrap_or(self.rest().len());
        let text = &self.src[start..start + len];
        let v: f64 = text
            .parse()
            .map_err(|_| self.err_at(start, format!("invalid number '{text}'")))?;
        if !v.is_finite() {
            return Err(self.err_at(start, "number must be finite"));
        }
        self.pos += len;
        Ok(v)
    }

    fn at_spec(&mut self) -> bool {
        // A child spec is an identifier followed by '('.
        self.skip_ws();
        let r = self.rest();
        let len = r
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(r.len());
        len > 0 && r[len..].trim_start().starts_with('(')
    }

    fn spec(&mut self) -> Result<ScalarField> {
        let (name_at, name) = self.ident()?;
        let entry = REGISTRY.iter().find(|e| e.name == name).ok_or_else(|| {
            let known: Vec<_> = REGISTRY.iter().map(|e| e.name).collect();
            self.err_at(name_at, format!("unknown field '{name}' (known: {})", known.join(", ")))
        })?;
        self.expect('(')?;
        let mut values: Vec<Option<f64>> = vec![None; entry.keys.len()];
        let mut dim: Option<usize> = None;
        let mut children = Vec::new();
        let mut positional = 0usize;
        let mut first = true;
        loop {
            match self.peek() {
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                None => return Err(self.err("unterminated field specification")),
                _ => {}
            }
            if !first {
                match self.peek() {
                    Some(',') | Some(';') => self.pos += 1,
                    _ => return Err(self.err("expected ',', ';' or ')'")),
                }
            }
            first = false;
            if self.at_spec() {
                children.push(self.spec()?);
                continue;
            }
            let save = self.pos;
            let key = if self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
                let (key_at, key) = self.ident()?;
                self.expect('=')?;
                Some((key_at, key))
            } else {
                self.pos = save;
                None
            };
            let value_at = {
                self.skip_ws();
                self.pos
            };
            let v = self.number()?;
            match key {
                Some((_, "dim")) => {
                    if v < 1.0 || v.fract() != 0.0 || v > 64.0 {
                        return Err(self.err_at(value_at, "dim must be a positive integer"));
                    }
                    if dim.replace(v as usize).is_some() {
                        return Err(self.err_at(value_at, "duplicate key 'dim'"));
                    }
                }
                Some((key_at, k)) => {
                    let slot = entry.keys.iter().position(|&e| e == k).ok_or_else(|| {
                        self.err_at(
                            key_at,
                            format!("unknown key '{k}' for {name} (expected {})", entry.keys.join(", ")),
                        )
                    })?;
                    if values[slot].replace(v).is_some() {
                        return Err(self.err_at(key_at, format!("duplicate key '{k}'")));
                    }
                }
                None => {
                    while positional < values.len() && values[positional].is_some() {
                        positional += 1;
                    }
                    if positional >= values.len() {
                        return Err(self.err_at(value_at, format!("too many arguments for {name}")));
                    }
                    values[positional] = Some(v);
                }
            }
        }
        if children.len() != entry.children {
            return Err(self.err_at(
                name_at,
                format!("{name} takes {} nested field(s), got {}", entry.children, children.len()),
            ));
        }
        let mut p = [0.0; 4];
        for (i, key) in entry.keys.iter().enumerate() {
            p[i] = values[i]
                .or(entry.defaults[i])
                .ok_or_else(|| self.err_at(name_at, format!("{name} requires '{key}'")))?;
        }
        let d = dim.unwrap_or(1);
        let located = |e: Error| match e {
            Error::Parse { .. } => e,
            other => Error::Parse {
                offset: name_at,
                message: other.to_string(),
            },
        };
        let field = match name {
            "const" => ScalarField::constant(p[0], d),
            "linear" => ScalarField::linear(p[0], p[1], p[2], p[3], d),
            "erf_ramp" => ScalarField::erf_ramp(p[0], p[1], p[2], p[3], d),
            "logistic" => ScalarField::logistic(p[0], p[1], p[2], p[3], d),
            "bump" => ScalarField::bump(p[0], p[1], p[2], p[3], d),
            "step" => ScalarField::step(p[0], p[1], p[2], d),
            "product" => {
                let g = children.pop().expect("two children");
                let f = children.pop().expect("two children");
                let prod = ScalarField::product(f, g);
                match dim {
                    Some(d) => prod.with_dim(d),
                    None => Ok(prod),
                }
            }
            "mix" => {
                let g = children.pop().expect("two children");
                let f = children.pop().expect("two children");
                ScalarField::mix(p[0], f, g).and_then(|m| match dim {
                    Some(d) => m.with_dim(d),
                    None => Ok(m),
                })
            }
            "affine" => {
                let f = children.pop().expect("one child");
                let a = ScalarField::affine(p[0], p[1], f);
                match dim {
                    Some(d) => a.with_dim(d),
                    None => Ok(a),
                }
            }
            "phi" => {
                let f = ScalarField::phi_of(children.pop().expect("one child"));
                match dim {
                    Some(d) => f.with_dim(d),
                    None => Ok(f),
                }
            }
            _ => unreachable!("registry and dispatch agree"),
        };
        field.map_err(located)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Smoothness;

    #[test]
    fn parses_registry_examples() {
        let c = parse("const(0.5)").unwrap();
        assert_eq!(c.range(), (0.5, 0.5));
        assert_eq!(c.value(&[3.0]), 0.5);

        let r = parse("erf_ramp(center=0,sigma=0.1,lo=0.1,hi=0.9)").unwrap();
        assert_eq!(r.range(), (0.1, 0.9));
        assert!(r.value(&[-1.0]) < r.value(&[0.0]) && r.value(&[0.0]) < r.value(&[1.0]));

        let p = parse("product(erf_ramp(center=0,sigma=0.5,lo=0.1,hi=0.9);const(0.5))").unwrap();
        assert_eq!(p.dim(), 2);
        assert!((p.value(&[0.2, 7.0]) - 0.5 * r_value(0.2)).abs() < 1e-16);

        let l = parse("linear(a=0.3,b=1,clip_lo=0.05,clip_hi=0.95)").unwrap();
        assert_eq!(l.range(), (0.05, 0.95));
        assert_eq!(l.smoothness(), Smoothness::SmoothBounded);
    }

    fn r_value(x: f64) -> f64 {
        ScalarField::erf_ramp(0.0, 0.5, 0.1, 0.9, 1).unwrap().value(&[x])
    }

    #[test]
    fn positional_and_keyword_arguments_agree() {
        let a = parse("bump(0.3, 0.8, -0.5, 0.8)").unwrap();
        let b = parse("bump(lo=-0.5, center=0.3, hi=0.8, width=0.8)").unwrap();
        assert_eq!(render(&a), render(&b));
        let d = parse("bump(0, 1, 0, 1, dim=2)").unwrap();
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn render_parse_is_idempotent() {
        for s in [
            "const(0.5)",
            "linear(a=0.3,b=1,clip_lo=0.05,clip_hi=0.95)",
            "erf_ramp(center=0,sigma=0.1,lo=0.1,hi=0.9)",
            "bump(0.1,0.3,0,1,dim=3)",
            "logistic(center=1e-3,sigma=0.2,lo=0.9,hi=0.1)",
            "product(erf_ramp(0,1,0.1,0.9);product(const(0.5);bump()))",
            "mix(w=0.25;linear(1,2);linear(1,-2))",
            "affine(-1,0.2;step(at=0.1))",
            "phi(linear(a=0.5,b=-4,clip_lo=-20,clip_hi=5))",
            "phi(dim=2;bump(0.1,1,-1,1))",
            "  const ( v = 1e-3 ) ",
        ] {
            let once = render(&parse(s).unwrap()).unwrap();
            let twice = render(&parse(&once).unwrap()).unwrap();
            assert_eq!(once, twice, "{s}");
        }
    }

    #[test]
    fn errors_carry_offsets() {
        let e = parse("bump(center=0,wdth=1)").unwrap_err();
        assert!(matches!(e, Error::Parse { offset: 14, .. }), "{e:?}");
        let e = parse("nope(1)").unwrap_err();
        assert!(matches!(e, Error::Parse { offset: 0, .. }));
        let e = parse("product(const(1);  frob(2))").unwrap_err();
        assert!(matches!(e, Error::Parse { offset: 19, .. }), "{e:?}");
        let e = parse("const(0.5").unwrap_err();
        assert!(matches!(e, Error::Parse { offset: 9, .. }), "{e:?}");
        let e = parse("const(1.2.3)").unwrap_err();
        assert!(matches!(e, Error::Parse { offset: 6, .. }), "{e:?}");
        assert!(parse("const()").is_err());
        assert!(parse("const(1,2)").is_err());
        assert!(parse("const(v=1,v=2)").is_err());
        assert!(parse("const(1) x").is_err());
        assert!(parse("product(const(1))").is_err());
        assert!(parse("erf_ramp(sigma=0)").is_err());
    }

    proptest::proptest! {
        #[test]
        fn random_bumps_round_trip(c in -5.0f64..5.0, w in 0.01f64..4.0, lo in -3.0f64..0.0, hi in 0.0f64..3.0) {
            let f = ScalarField::bump(c, w, lo, hi, 1).unwrap();
            let s = render(&f).unwrap();
            let g = parse(&s).unwrap();
            proptest::prop_assert_eq!(render(&g).unwrap(), s);
            proptest::prop_assert_eq!(f.value(&[0.37]), g.value(&[0.37]));
        }
    }
}

use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use ehrhard_core::field::ScalarField;
use ehrhard_core::fieldspec;
use ehrhard_core::game::{lower_bound_gap, payoff_j_cv, DiscreteResponder, GameConfig, OptimalStrategy};
use ehrhard_core::inequality::{
    limit_recovery, verify_borell, verify_borell_with, verify_ehrhard, verify_ehrhard_with, verify_gbl,
    InequalityReport, ProjectionFrame,
};
use ehrhard_core::means::{generalized_mean, hlp_check, payoff_k, KOptimal, MeanSpec};
use ehrhard_core::quadrature::{QuadratureRule, DEFAULT_ORDER};
use ehrhard_core::report::{Row, RunReport, Uncertainty};
use ehrhard_core::rng::RngStream;
use ehrhard_core::value::{residual_scan, verify_saddle, TabulatedValue, ValueFunction, ValueOracle};

use crate::args::{Command, Common};
use crate::config::{float_list, Settings};
use crate::CliError;

const DEFAULT_DELTAS: &str = "0.25,0.0625,0.015625,0.00390625";
const DEFAULT_LIMIT_C: &str = "1e-4,1e-8,1e-12";

enum RuleChoice {
    Hermite(usize),
    Composite(usize),
}

struct Ctx<'a> {
    settings: &'a Settings,
    report: RunReport,
    rule: Option<RuleChoice>,
}

impl Ctx<'_> {
    fn rule(&mut self, default: RuleChoice) -> Result<QuadratureRule, CliError> {
        let choice = self.rule.take().unwrap_or(default);
        let rule = match choice {
            RuleChoice::Hermite(order) => {
                self.report.config("rule", &format!("gauss_hermite:{order}"))?;
                QuadratureRule::gauss_hermite(order)?
            }
            RuleChoice::Composite(panels) => {
                self.report.config("rule", &format!("composite:{panels}x8 on [-10,10]"))?;
                QuadratureRule::composite(panels, 8, 10.0)?
            }
        };
        Ok(rule)
    }

    fn field(&mut self, key: &str, flag: Option<String>) -> Result<ScalarField, CliError> {
        let spec = self.settings.require(key, flag)?;
        let f = fieldspec::parse(&spec)?;
        self.report.config(key, &spec)?;
        Ok(f)
    }

    fn num<T: FromStr + Serialize>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.settings.pick(key, flag)?.unwrap_or(default);
        self.report.config(key, &v)?;
        Ok(v)
    }

    fn required_num(&mut self, key: &str, flag: Option<f64>) -> Result<f64, CliError> {
        let v = self.settings.require(key, flag)?;
        self.report.config(key, &v)?;
        Ok(v)
    }

    fn list(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<Vec<f64>, CliError> {
        let s = self.settings.pick(key, flag)?.unwrap_or_else(|| default.to_string());
        let v = float_list(key, &s)?;
        self.report.config(key, &v)?;
        Ok(v)
    }
}

fn oracle_for(vf: &ValueFunction, dt: f64) -> Result<Box<dyn ValueOracle>, CliError> {
    Ok(if vf.dim() == 1 {
        Box::new(TabulatedValue::build(vf, dt)?)
    } else {
        Box::new(vf.clone())
    })
}

fn inequality_rows(r: &mut RunReport, ir: &InequalityReport, params: &[(&str, f64)]) {
    let name = ir.inequality.as_str();
    for i in &ir.integrals {
        r.row(Row::new(name, params, &format!("integral_{}", i.label), i.value).with_uncertainty(i.error, Uncertainty::Quadrature));
    }
    r.row(Row::new(name, params, "lhs", ir.lhs));
    r.row(Row::new(name, params, "rhs", ir.rhs));
    r.row(Row::new(name, params, "slack", ir.slack).with_uncertainty(ir.slack_error, Uncertainty::Quadrature));
    r.row(Row::new(name, params, "audit_max_violation", ir.audit.max_violation));
}

/// Runs one subcommand and returns its report.
pub fn run(common: &Common, command: Command, argv: &[String]) -> Result<RunReport, CliError> {
    let settings = Settings::load(common.config.as_deref())?;
    let seed = settings.seed(common.seed)?;
    let rule = match (settings.pick("order", common.order)?, settings.pick("composite", common.composite)?) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--order and --composite are mutually exclusive".into())),
        (Some(o), None) => Some(RuleChoice::Hermite(o)),
        (None, Some(p)) => Some(RuleChoice::Composite(p)),
        (None, None) => None,
    };
    let mut ctx = Ctx {
        settings: &settings,
        report: RunReport::new(argv).with_seed(seed),
        rule,
    };
    ctx.report.config("command", &command.name())?;
    ctx.report.config("seed", &seed)?;
    match command {
        Command::Value { f, tol } => {
            let f = ctx.field("f", f)?;
            let tol = ctx.num("tol", tol, 1e-5)?;
            let rule = ctx.rule(RuleChoice::Hermite(DEFAULT_ORDER))?;
            let order = rule.order() as f64;
            let vf = ValueFunction::phi(f, &rule)?;
            let origin = vec![0.0; vf.dim()];
            let v00 = vf.value(0.0, &origin);
            ctx.report.result("v00", &v00)?;
            ctx.report.row(Row::new("value", &[], "v00", v00).with_uncertainty(order, Uncertainty::Order));
            if vf.dim() == 1 {
                let ts: Vec<f64> = (0..9).map(|i| 0.1 * i as f64).collect();
                let xs: Vec<f64> = (0..41).map(|j| -4.0 + 0.2 * j as f64).collect();
                let scan = residual_scan(&vf, &ts, &xs)?;
                ctx.report.result("residual", &scan)?;
                ctx.report
                    .row(Row::new("value", &[], "max_pde_residual", scan.max).with_uncertainty(order, Uncertainty::Order));
                ctx.report
                    .verdict("pde_residual", scan.max < tol, format!("max {:e} at t={}, x={}", scan.max, scan.at_t, scan.at_x));
            } else {
                let r = ehrhard_core::value::pde_residual(&vf, 0.0, &origin)?;
                ctx.report.result("residual_at_origin", &r)?;
                ctx.report.row(Row::new("value", &[], "pde_residual_origin", r).with_uncertainty(order, Uncertainty::Order));
                ctx.report.verdict("pde_residual", r < tol, format!("{r:e} at the origin"));
            }
        }
        Command::Game { f, dt, paths, c } => {
            let f = ctx.field("f", f)?;
            let dt = ctx.num("dt", dt, 1e-3)?;
            let paths = ctx.num("paths", paths, 10_000)?;
            let rule = ctx.rule(RuleChoice::Hermite(DEFAULT_ORDER))?;
            let vf = ValueFunction::phi(f.clone(), &rule)?;
            let c = ctx.settings.pick("c", c)?.unwrap_or_else(|| vf.default_c());
            ctx.report.config("c", &c)?;
            let cfg = GameConfig::new(vf.dim()).with_dt(dt).with_paths(paths).with_seed(seed).with_c(c);
            let oracle = oracle_for(&vf, dt)?;
            let o = oracle.as_ref();
            let v00 = vf.value(0.0, &vec![0.0; vf.dim()]);
            let est = payoff_j_cv(&f, |_| OptimalStrategy::new(o, c), |_| DiscreteResponder::new(o, 1), &cfg, Some(o))?;
            let best = est.best();
            ctx.report.result("v00", &v00)?;
            ctx.report.result("estimate", &est)?;
            let p = [("dt", dt), ("paths", paths as f64)];
            ctx.report
                .row(Row::new("game", &p, "v00", v00).with_uncertainty(rule.order() as f64, Uncertainty::Order));
            ctx.report
                .row(Row::new("game", &p, "payoff", est.mean).with_uncertainty(est.std_err, Uncertainty::StdErr));
            ctx.report
                .row(Row::new("game", &p, "payoff_cv", best.mean).with_uncertainty(best.std_err, Uncertainty::StdErr));
            let tol = (3.0 * best.std_err).max(0.01);
            ctx.report.verdict(
                "value_identity",
                best.within(v00, 3.0, 0.01),
                format!("|{} - {v00}| vs {tol:e}", best.mean),
            );
        }
        Command::Convergence { f, dt, paths, delta, c } => {
            let f = ctx.field("f", f)?;
            let dt = ctx.num("dt", dt, 1.0 / 1024.0)?;
            let paths = ctx.num("paths", paths, 10_000)?;
            let deltas = ctx.list("delta", delta, DEFAULT_DELTAS)?;
            let rule = ctx.rule(RuleChoice::Hermite(DEFAULT_ORDER))?;
            let vf = ValueFunction::phi(f.clone(), &rule)?;
            let c = ctx.settings.pick("c", c)?.unwrap_or_else(|| vf.default_c());
            ctx.report.config("c", &c)?;
            let cfg = GameConfig::new(vf.dim()).with_dt(dt).with_paths(paths).with_seed(seed).with_c(c);
            let oracle = oracle_for(&vf, dt)?;
            let o = oracle.as_ref();
            let v00 = vf.value(0.0, &vec![0.0; vf.dim()]);
            let table = lower_bound_gap(&f, &o, v00, |_| OptimalStrategy::new(o, c), &deltas, &cfg, true)?;
            for row in &table.rows {
                ctx.report.row(
                    Row::new("convergence", &[("delta", row.delta)], "gap", row.gap.mean)
                        .with_uncertainty(row.gap.std_err, Uncertainty::StdErr),
                );
            }
            ctx.report.result("table", &table)?;
            let slope_ok = table.slope.is_some_and(|s| s >= 0.3);
            ctx.report.verdict("non_increasing", table.non_increasing, "each gap within 3 paired SE of the previous");
            ctx.report.verdict("rate", slope_ok, format!("log-log slope {:?}, need >= 0.3", table.slope));
        }
        Command::Ehrhard { f, g, h, lam } => {
            let f = ctx.field("f", f)?;
            let g = ctx.field("g", g)?;
            let lam = ctx.required_num("lam", lam)?;
            let h = match ctx.settings.pick("h", h)? {
                Some(spec) => Some(ctx.field("h", Some(spec))?),
                None => None,
            };
            let rule = ctx.rule(RuleChoice::Composite(200))?;
            let r = match &h {
                Some(h) => verify_ehrhard_with(&f, &g, h, lam, &rule)?,
                None => verify_ehrhard(&f, &g, lam, &rule)?,
            };
            finish_inequality(&mut ctx.report, &r, &[("lam", lam)])?;
        }
        Command::Borell { f, g, h, lam, mu } => {
            let lam = ctx.required_num("lam", lam)?;
            let mu = ctx.required_num("mu", mu)?;
            ehrhard_core::gaussian::admissible_correlation(lam, mu)?;
            let f = ctx.field("f", f)?;
            let g = ctx.field("g", g)?;
            let h = match ctx.settings.pick("h", h)? {
                Some(spec) => Some(ctx.field("h", Some(spec))?),
                None => None,
            };
            let rule = ctx.rule(RuleChoice::Composite(200))?;
            let r = match &h {
                Some(h) => verify_borell_with(&f, &g, h, lam, mu, &rule)?,
                None => verify_borell(&f, &g, lam, mu, &rule)?,
            };
            finish_inequality(&mut ctx.report, &r, &[("lam", lam), ("mu", mu)])?;
        }
        Command::Gbl { frame, fields, c } => {
            let path: PathBuf = ctx.settings.require("frame", frame)?;
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(format!("cannot read frame {}: {e}", path.display())))?;
            let frame = ProjectionFrame::parse(&text)?;
            ctx.report.config("frame", &frame.render())?;
            let specs = ctx.settings.fields(&fields);
            let parsed = specs.iter().map(|s| fieldspec::parse(s)).collect::<Result<Vec<_>, _>>()?;
            ctx.report.config("fields", &specs)?;
            let cs = ctx.list("c", c, "0.1,0.5,0.9")?;
            let rule = ctx.rule(RuleChoice::Hermite(32))?;
            let mut reports = Vec::new();
            for &c in &cs {
                let r = verify_gbl(&frame, &parsed, c, &rule)?;
                inequality_rows(&mut ctx.report, &r, &[("c", c)]);
                ctx.report.verdict(&format!("gbl(c={c})"), r.passed(), format!("{:?}, slack {:e}", r.verdict, r.slack));
                reports.push(r);
            }
            ctx.report.result("inequalities", &reports)?;
        }
        Command::Limits { x, c } => {
            let x = ctx.num("x", x, 0.5)?;
            let cs = ctx.list("c", c, DEFAULT_LIMIT_C)?;
            let table = limit_recovery(&cs, x, None)?;
            for row in &table.rows {
                let mut r = Row::new("limits", &[("c", row.c), ("x", x)], "value", row.value);
                r.uncertainty_kind = Uncertainty::Exact;
                ctx.report.row(r);
                if let Some(d) = row.deviation {
                    ctx.report.row(Row::new("limits", &[("c", row.c), ("x", x)], "deviation", d));
                }
            }
            ctx.report.result("table", &table)?;
            ctx.report.verdict("monotone", table.strictly_decreasing, "deviation strictly decreasing in c");
        }
        Command::Gm { f, mean, dt, paths } => {
            let f = ctx.field("f", f)?;
            let mean_name = ctx.settings.require::<String>("mean", mean)?;
            ctx.report.config("mean", &mean_name)?;
            let spec = MeanSpec::parse(&mean_name)?;
            let dt = ctx.num("dt", dt, 1e-3)?;
            let paths = ctx.num("paths", paths, 10_000)?;
            let rule = ctx.rule(RuleChoice::Hermite(DEFAULT_ORDER))?;
            let order = rule.order() as f64;
            let quad = generalized_mean(&spec, &f, &rule)?;
            let hlp = hlp_check(&spec);
            ctx.report.result("quadrature", &quad)?;
            ctx.report.result("hlp", &hlp)?;
            ctx.report.row(Row::new("gm", &[], "quadrature", quad).with_uncertainty(order, Uncertainty::Order));
            if hlp.convex {
                let vf = ValueFunction::new(f.clone(), spec.clone(), &rule)?;
                let oracle = oracle_for(&vf, dt)?;
                let o = oracle.as_ref();
                let cfg = GameConfig::new(vf.dim()).with_dt(dt).with_paths(paths).with_seed(seed);
                let est = payoff_k(&spec, &f, |_| KOptimal::new(o, spec.clone()), &cfg, Some(o))?;
                // The control-variate error bar is smaller than the Euler
                // bias, so the verdict uses the raw estimate.
                let raw = est.raw();
                let best = est.best();
                ctx.report.result("representation", &est)?;
                let p = [("dt", dt), ("paths", paths as f64)];
                ctx.report
                    .row(Row::new("gm", &p, "representation", raw.mean).with_uncertainty(raw.std_err, Uncertainty::StdErr));
                ctx.report.row(
                    Row::new("gm", &p, "representation_cv", best.mean).with_uncertainty(best.std_err, Uncertainty::StdErr),
                );
                ctx.report.verdict(
                    "representation",
                    raw.within(quad, 3.0, 0.0),
                    format!("{} +- {:e} vs {quad}", raw.mean, raw.std_err),
                );
            } else {
                ctx.report.verdict(
                    "hlp",
                    true,
                    format!("mean is not convex ({}); no control representation", hlp.witness.unwrap_or_default()),
                );
            }
        }
        Command::Saddle { f, c, paths } => {
            let f = ctx.field("f", f)?;
            let samples = ctx.num("paths", paths, 10_000)?;
            let rule = ctx.rule(RuleChoice::Hermite(DEFAULT_ORDER))?;
            let vf = ValueFunction::phi(f, &rule)?;
            let c = ctx.settings.pick("c", c)?.unwrap_or_else(|| vf.default_c());
            ctx.report.config("c", &c)?;
            let r = verify_saddle(&vf, c, samples, RngStream::new(seed, 0))?;
            ctx.report.row(Row::new("saddle", &[("c", c)], "violations", r.violations as f64));
            ctx.report.row(Row::new("saddle", &[("c", c)], "max_violation", r.max_violation));
            ctx.report.result("saddle", &r)?;
            ctx.report.verdict("saddle", r.passed(), format!("{} violations in {} draws", r.violations, r.samples));
        }
    }
    Ok(ctx.report)
}

fn finish_inequality(report: &mut RunReport, r: &InequalityReport, params: &[(&str, f64)]) -> Result<(), CliError> {
    inequality_rows(report, r, params);
    report.result("inequality", r)?;
    report.verdict(&r.inequality, r.passed(), format!("{:?}, slack {:e}", r.verdict, r.slack));
    Ok(())
}

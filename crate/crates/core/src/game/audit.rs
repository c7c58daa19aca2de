//! Replay audit of the Elliott–Kalton property: two controls agreeing up to
//! step `k` must produce strategies agreeing up to step `k`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{play_path, Payoff, ReplayControl, Strategy};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::rng::RngStream;

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub trials: usize,
    pub steps: usize,
    /// Total number of `(trial, step)` pairs compared.
    pub compared: usize,
}

pub fn audit_causality<SF, S>(strategies: SF, dim: usize, steps: usize, trials: usize, stream: RngStream) -> Result<AuditReport>
where
    SF: Fn(u64) -> S,
    S: Strategy,
{
    audit_causality_with(strategies, dim, steps, trials, stream, |_| {})
}

/// As [`audit_causality`], calling `on_replay` with each control sequence
/// right before it is played.
pub fn audit_causality_with<SF, S, H>(
    strategies: SF,
    dim: usize,
    steps: usize,
    trials: usize,
    stream: RngStream,
    mut on_replay: H,
) -> Result<AuditReport>
where
    SF: Fn(u64) -> S,
    S: Strategy,
    H: FnMut(&[f64]),
{
    if steps < 2 || dim == 0 {
        return Err(Error::Precondition("audit needs at least two steps".into()));
    }
    let payoff = Payoff::new(ScalarField::constant(0.0, dim)?);
    let mut rng = stream.child(0xa0d1).generator();
    let mut compared = 0;
    for trial in 0..trials {
        let split = rng.random_range(0..steps - 1);
        let base: Vec<f64> = (0..steps * dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut other = base.clone();
        for b in other.iter_mut().skip((split + 1) * dim) {
            *b = rng.sample(StandardNormal);
        }
        let noise = RngStream::new(stream.seed, stream.index.wrapping_add(trial as u64));
        let mut record = |seq: &Vec<f64>| {
            on_replay(seq);
            let mut alphas = Vec::with_capacity(steps * dim);
            let mut s = strategies(trial as u64);
            let mut c = ReplayControl::new(seq.clone());
            play_path(&payoff, &mut s, &mut c, steps, noise, None, Some(&mut alphas));
            alphas
        };
        let a = record(&base);
        let b = record(&other);
        for k in 0..=split {
            if a[k * dim..(k + 1) * dim] != b[k * dim..(k + 1) * dim] {
                return Err(Error::NonCausal { step: k });
            }
        }
        compared += split + 1;
    }
    Ok(AuditReport {
        trials,
        steps,
        compared,
    })
}

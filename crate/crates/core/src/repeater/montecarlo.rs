//! Event-driven Monte Carlo of pair-channel cycles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{PairModel, ProtocolStep, RepeaterError};

pub const MIN_TRIALS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    /// Ebits per second.
    pub rate: f64,
    pub stderr: f64,
    pub trials: usize,
    pub mean_step_times: [(ProtocolStep, f64); 3],
}

/// Samples one cycle: rounds of simultaneous A/B link attempts until both
/// have heralded, then local Barrett–Kok attempts until success.
fn cycle(model: &PairModel, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let (mut a, mut b, mut rounds) = (false, false, 0u64);
    while !(a && b) {
        rounds += 1;
        // Both sides draw every round so the stream layout is fixed.
        let ha = rng.random_bool(model.p1);
        let hb = rng.random_bool(model.p1);
        a |= ha;
        b |= hb;
    }
    let mut bk = 1u64;
    while !rng.random_bool(model.p2) {
        bk += 1;
    }
    [rounds as f64 * model.t_link, bk as f64 * model.t_bk, model.t_swap]
}

fn thread_count() -> Option<usize> {
    std::env::var("EFPSA_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Rate estimate for `model` from `n_trials` independent cycles.
///
/// Trial `i` uses a ChaCha8 stream `i` keyed by `seed`, and results are
/// reduced in trial order, so the output depends only on the inputs and not
/// on the thread count (`EFPSA_THREADS`).
pub fn monte_carlo_protocol(model: &PairModel, seed: u64, n_trials: usize) -> Result<McEstimate, RepeaterError> {
    if n_trials < MIN_TRIALS {
        return Err(RepeaterError::TooFewTrials { min: MIN_TRIALS, got: n_trials });
    }
    let steps = [ProtocolStep::DistantLink, ProtocolStep::LocalEntangle, ProtocolStep::Swap];
    if model.pairs == 0.0 || model.p1 == 0.0 || model.p2 == 0.0 {
        return Ok(McEstimate {
            rate: 0.0,
            stderr: 0.0,
            trials: n_trials,
            mean_step_times: steps.map(|s| (s, f64::INFINITY)),
        });
    }
    let run = || -> Vec<[f64; 3]> {
        (0..n_trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                cycle(model, &mut rng)
            })
            .collect()
    };
    let samples = match thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RepeaterError::Invalid(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let n = n_trials as f64;
    let mut sums = [0.0; 3];
    let mut total = 0.0;
    for s in &samples {
        for k in 0..3 {
            sums[k] += s[k];
        }
        total += s.iter().sum::<f64>();
    }
    let mean = total / n;
    let var = samples.iter().map(|s| (s.iter().sum::<f64>() - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Delta method for P/mean(T).
    let rate = model.pairs / mean;
    let stderr = model.pairs * (var / n).sqrt() / (mean * mean);
    let mut i = 0;
    let mean_step_times = steps.map(|s| {
        i += 1;
        (s, sums[i - 1] / n)
    });
    Ok(McEstimate { rate, stderr, trials: n_trials, mean_step_times })
}

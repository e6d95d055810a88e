use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::run_simulation;
use crate::{Error, Result};

/// One evaluation of the bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunePoint {
    pub gain: f64,
    pub rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub gain: f64,
    pub rate_hz: f64,
    /// The input config with all three weights scaled by `gain`.
    pub config: RunConfig,
    pub trace: Vec<TunePoint>,
}

/// Scales the excitatory, inhibitory and external weights together.
pub fn scale_weights(config: &RunConfig, gain: f64) -> RunConfig {
    let mut c = config.clone();
    c.grid.weights.excitatory = (f64::from(c.grid.weights.excitatory) * gain) as f32;
    c.grid.weights.inhibitory = (f64::from(c.grid.weights.inhibitory) * gain) as f32;
    c.stimulus.weight = (f64::from(c.stimulus.weight) * gain) as f32;
    c
}

/// Bisects a common weight gain in `[lo, hi]` until the mean rate of
/// `config` is within `tolerance_hz` of `target_hz` or `max_iter` runs have
/// been made. The rate must bracket the target at the interval ends.
pub fn tune_weights(
    config: &RunConfig,
    target_hz: f64,
    (mut lo, mut hi): (f64, f64),
    tolerance_hz: f64,
    max_iter: u32,
) -> Result<TuneResult> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Config(format!("bad gain bracket [{lo}, {hi}]")));
    }
    let mut trace = Vec::new();
    let mut rate_at = |gain: f64| -> Result<f64> {
        let r = run_simulation(&scale_weights(config, gain))?.mean_rate_hz;
        trace.push(TunePoint { gain, rate_hz: r });
        Ok(r)
    };
    let (r_lo, r_hi) = (rate_at(lo)?, rate_at(hi)?);
    if !(r_lo <= target_hz && target_hz <= r_hi) {
        return Err(Error::Config(format!(
            "gains [{lo}, {hi}] give rates [{r_lo}, {r_hi}] Hz, not bracketing {target_hz} Hz"
        )));
    }
    let mut best = if (r_lo - target_hz).abs() < (r_hi - target_hz).abs() {
        (lo, r_lo)
    } else {
        (hi, r_hi)
    };
    for _ in 0..max_iter {
        if (best.1 - target_hz).abs() <= tolerance_hz {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let r = rate_at(mid)?;
        if (r - target_hz).abs() < (best.1 - target_hz).abs() {
            best = (mid, r);
        }
        if r < target_hz {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TuneResult {
        gain: best.0,
        rate_hz: best.1,
        config: scale_weights(config, best.0),
        trace,
    })
}

use rand::distr::Distribution;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

/// Background drive: each neuron receives Poisson spike trains on a number
/// of equivalent external synapses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalStimulus {
    pub equivalent_synapses: u32,
    /// Hz per equivalent synapse.
    pub rate: f64,
    /// mV per external event.
    pub weight: f32,
}

impl Default for ExternalStimulus {
    fn default() -> Self {
        ExternalStimulus {
            equivalent_synapses: 594,
            rate: 3.0,
            weight: 0.53,
        }
    }
}

impl ExternalStimulus {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(Error::Config(format!(
                "external rate {} must be >= 0",
                self.rate
            )));
        }
        if !self.weight.is_finite() {
            return Err(Error::Config("external weight must be finite".into()));
        }
        Ok(())
    }

    /// Expected events per neuron per step of `dt_ms`.
    pub fn mean_events_per_step(&self, dt_ms: f64) -> f64 {
        f64::from(self.equivalent_synapses) * self.rate * dt_ms * 1e-3
    }
}

/// Sampler for the external drive with the Poisson law built once.
#[derive(Debug, Clone)]
pub struct ExternalDrive {
    seed: u64,
    law: Option<Poisson<f64>>,
}

impl ExternalDrive {
    pub fn new(stimulus: &ExternalStimulus, dt_ms: f64, seed: u64) -> Result<Self> {
        stimulus.validate()?;
        let mean = stimulus.mean_events_per_step(dt_ms);
        let law = if mean > 0.0 {
            Some(
                Poisson::new(mean)
                    .map_err(|e| Error::Config(format!("poisson mean {mean}: {e}")))?,
            )
        } else {
            None
        };
        Ok(ExternalDrive { seed, law })
    }

    /// Events reaching `neuron` at `step`; a pure function of
    /// `(seed, neuron, step)`.
    #[inline]
    pub fn events(&self, neuron: u32, step: u32) -> u32 {
        match &self.law {
            None => 0,
            Some(law) => {
                let mut rng = stream_rng(
                    self.seed,
                    Stream::ExternalDrive,
                    u64::from(neuron),
                    u64::from(step),
                );
                law.sample(&mut rng) as u32
            }
        }
    }
}

/// One-off draw of the external events for `(neuron, step)`.
pub fn external_poisson_events(
    neuron_id: u32,
    step: u32,
    stimulus: &ExternalStimulus,
    dt_ms: f64,
    seed: u64,
) -> Result<u32> {
    Ok(ExternalDrive::new(stimulus, dt_ms, seed)?.events(neuron_id, step))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_gives_no_events() {
        let s = ExternalStimulus {
            rate: 0.0,
            ..ExternalStimulus::default()
        };
        let d = ExternalDrive::new(&s, 1.0, 3).unwrap();
        assert!((0..1000).all(|n| d.events(n, n * 7) == 0));
        assert_eq!(external_poisson_events(1, 2, &s, 1.0, 3).unwrap(), 0);
    }

    #[test]
    fn repeated_calls_agree() {
        let s = ExternalStimulus::default();
        for (n, t) in [(0, 0), (17, 4), (9_999, 2_999)] {
            let a = external_poisson_events(n, t, &s, 1.0, 11).unwrap();
            let b = external_poisson_events(n, t, &s, 1.0, 11).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn default_mean_per_step() {
        let m = ExternalStimulus::default().mean_events_per_step(1.0);
        assert!((m - 1.782).abs() < 1e-12);
    }

    #[test]
    fn negative_rate_rejected() {
        let s = ExternalStimulus {
            rate: -1.0,
            ..ExternalStimulus::default()
        };
        assert!(ExternalDrive::new(&s, 1.0, 0).is_err());
    }

    #[test]
    fn empirical_variance_is_poisson() {
        let s = ExternalStimulus::default();
        let d = ExternalDrive::new(&s, 1.0, 77).unwrap();
        let n = 200_000u32;
        let (mut sum, mut sq) = (0f64, 0f64);
        for i in 0..n {
            let k = f64::from(d.events(i % 1000, i / 1000));
            sum += k;
            sq += k * k;
        }
        let mean = sum / f64::from(n);
        let var = sq / f64::from(n) - mean * mean;
        assert!((var / mean - 1.0).abs() < 0.03, "dispersion {}", var / mean);
    }
}

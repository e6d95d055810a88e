use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::exchange::DELAY_HORIZON;
use crate::{Error, Result};

/// How the non-local share of an excitatory neuron's synapses is spread
/// over other columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum RemoteKernel {
    /// Uniform over the (up to) 8 surrounding columns.
    MooreUniform,
    /// Gaussian in column distance, truncated at 3 sigma.
    Gaussian { sigma: f64 },
}

impl fmt::Display for RemoteKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RemoteKernel::MooreUniform => f.write_str("moore-uniform"),
            RemoteKernel::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
        }
    }
}

impl FromStr for RemoteKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "moore-uniform" || s == "moore" {
            return Ok(RemoteKernel::MooreUniform);
        }
        if let Some(sigma) = s
            .strip_prefix("gaussian:")
            .or_else(|| s.strip_prefix("gaussian="))
        {
            let sigma: f64 = sigma
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad gaussian sigma in {s:?}")))?;
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::Config(format!(
                    "gaussian sigma must be > 0, got {sigma}"
                )));
            }
            return Ok(RemoteKernel::Gaussian { sigma });
        }
        Err(Error::Config(format!(
            "unknown remote kernel {s:?} (expected moore-uniform or gaussian:<sigma>)"
        )))
    }
}

impl From<RemoteKernel> for String {
    fn from(k: RemoteKernel) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for RemoteKernel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Current increments (mV) carried by one synaptic event, per source population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynapticWeights {
    pub excitatory: f32,
    pub inhibitory: f32,
}

// With ~1000 recurrent inputs, excitation much above 0.02 mV runs away
// unless inhibition is of the order of 0.1 mV. These values, with the
// external weight of 0.53 mV, keep both populations firing at a few Hz,
// driven by fluctuations around threshold.
impl Default for SynapticWeights {
    fn default() -> Self {
        SynapticWeights {
            excitatory: 0.015,
            inhibitory: -0.06,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub grid_x: u32,
    pub grid_y: u32,
    pub neurons_per_column: u32,
    pub excitatory_fraction: f64,
    pub out_degree_exc: u32,
    pub out_degree_inh: u32,
    /// Share of an excitatory neuron's synapses that stay in its own column.
    pub intra_fraction: f64,
    pub remote_kernel: RemoteKernel,
    /// Inclusive range of axonal delays, in time steps.
    pub delay_min: u32,
    pub delay_max: u32,
    pub weights: SynapticWeights,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            grid_x: 4,
            grid_y: 4,
            neurons_per_column: 1250,
            excitatory_fraction: 0.8,
            out_degree_exc: 1000,
            out_degree_inh: 1000,
            intra_fraction: 0.8,
            remote_kernel: RemoteKernel::MooreUniform,
            delay_min: 1,
            delay_max: 16,
            weights: SynapticWeights::default(),
            seed: 20_170_901,
        }
    }
}

impl GridConfig {
    pub fn n_columns(&self) -> u64 {
        u64::from(self.grid_x) * u64::from(self.grid_y)
    }

    pub fn total_neurons(&self) -> u64 {
        self.n_columns() * u64::from(self.neurons_per_column)
    }

    pub fn excitatory_per_column(&self) -> u32 {
        (self.excitatory_fraction * f64::from(self.neurons_per_column)).round() as u32
    }

    /// Number of intra-column targets of each excitatory neuron.
    pub fn intra_targets(&self) -> u32 {
        (self.intra_fraction * f64::from(self.out_degree_exc)).round() as u32
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_columns() == 0 {
            return Err(Error::Topology(format!(
                "zero-sized grid {}x{}",
                self.grid_x, self.grid_y
            )));
        }
        if self.neurons_per_column == 0 {
            return Err(Error::Topology("neurons_per_column must be >= 1".into()));
        }
        if self.total_neurons() > u64::from(u32::MAX) {
            return bad(format!(
                "{} neurons exceed 32-bit ids",
                self.total_neurons()
            ));
        }
        if !(0.0..=1.0).contains(&self.excitatory_fraction) {
            return bad(format!(
                "excitatory_fraction {} outside [0,1]",
                self.excitatory_fraction
            ));
        }
        if !(self.intra_fraction > 0.0 && self.intra_fraction <= 1.0) {
            return bad(format!(
                "intra_fraction {} outside (0,1]",
                self.intra_fraction
            ));
        }
        if self.delay_min < 1 {
            return bad("delay_min must be >= 1".into());
        }
        if self.delay_max < self.delay_min {
            return bad(format!(
                "delay range [{}, {}] is empty",
                self.delay_min, self.delay_max
            ));
        }
        if self.delay_max > DELAY_HORIZON {
            return bad(format!(
                "delay_max {} exceeds the delay horizon {}",
                self.delay_max, DELAY_HORIZON
            ));
        }
        for (name, w) in [
            ("excitatory", self.weights.excitatory),
            ("inhibitory", self.weights.inhibitory),
        ] {
            if !w.is_finite() {
                return bad(format!("{name} weight is not finite"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_text_round_trip() {
        for k in [
            RemoteKernel::MooreUniform,
            RemoteKernel::Gaussian { sigma: 1.5 },
        ] {
            assert_eq!(k.to_string().parse::<RemoteKernel>().unwrap(), k);
        }
        assert!("gaussian:-1".parse::<RemoteKernel>().is_err());
        assert!("ring".parse::<RemoteKernel>().is_err());
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let ok = GridConfig::default();
        ok.validate().unwrap();

        let mut c = ok.clone();
        c.grid_x = 0;
        assert!(matches!(c.validate(), Err(Error::Topology(_))));

        let mut c = ok.clone();
        c.intra_fraction = 0.0;
        assert!(c.validate().is_err());

        let mut c = ok.clone();
        c.delay_min = 0;
        assert!(c.validate().is_err());

        let mut c = ok.clone();
        c.delay_max = DELAY_HORIZON + 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn default_split_is_80_20() {
        let c = GridConfig::default();
        assert_eq!(c.excitatory_per_column(), 1000);
        assert_eq!(c.intra_targets(), 800);
    }
}

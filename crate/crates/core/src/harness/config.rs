use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ExternalStimulus, LifcaParams};
use crate::exchange::{ExchangeMode, NodeMap, SendMode};
use crate::model::GridConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    /// Ranks are threads exchanging through shared mailboxes.
    #[default]
    Loopback,
    /// Ranks are threads connected by local TCP sockets.
    Tcp,
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportKind::Loopback => "loopback",
            TransportKind::Tcp => "tcp",
        })
    }
}

impl FromStr for TransportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "loopback" => Ok(TransportKind::Loopback),
            "tcp" => Ok(TransportKind::Tcp),
            other => Err(Error::Config(format!("unknown transport {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    /// Canonical `step,neuron_id` raster.
    pub raster: Option<PathBuf>,
    /// `step,src,dst,bytes` log of every packet; enables packet recording.
    pub packet_log: Option<PathBuf>,
    /// Synapse table dump `src_id,tgt_id,delay,weight`.
    pub topology_dump: Option<PathBuf>,
}

/// One simulation run: network, neuron model, drive, and how it is spread
/// over ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub neuron: LifcaParams,
    pub stimulus: ExternalStimulus,
    pub n_ranks: u32,
    /// Ranks grouped per node; 0 puts every rank on one node.
    pub ranks_per_node: u32,
    pub exchange: ExchangeMode,
    pub send: SendMode,
    pub transport: TransportKind,
    pub sim_seconds: f64,
    /// Keys connectivity, initial state and external drive; replaces
    /// `grid.seed`.
    pub seed: u64,
    pub record_packets: bool,
    pub output: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        let grid = GridConfig::default();
        RunConfig {
            seed: grid.seed,
            grid,
            neuron: LifcaParams::default(),
            stimulus: ExternalStimulus::default(),
            n_ranks: 1,
            ranks_per_node: 0,
            exchange: ExchangeMode::Flat,
            send: SendMode::Collective,
            transport: TransportKind::Loopback,
            sim_seconds: 1.0,
            record_packets: false,
            output: OutputPaths::default(),
        }
    }
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key} = {value:?} is not valid")))
}

/// `"4x4"` (or `"4,4"`) to `(4, 4)`.
pub fn parse_grid_dims(s: &str) -> Result<(u32, u32)> {
    let (a, b) = s
        .split_once(['x', 'X', ','])
        .ok_or_else(|| Error::Config(format!("grid {s:?} is not of the form XxY")))?;
    Ok((parse("grid", "x", a)?, parse("grid", "y", b)?))
}

impl RunConfig {
    /// The energy benchmark network: 10,000 neurons in 8
    /// columns, 1195.2 internal synapses per neuron on average, 594 external
    /// equivalent synapses at 3 Hz, 3 simulated seconds.
    pub fn energy_benchmark() -> Self {
        RunConfig {
            grid: GridConfig {
                grid_x: 4,
                grid_y: 2,
                out_degree_exc: 1244,
                out_degree_inh: 1000,
                ..GridConfig::default()
            },
            sim_seconds: 3.0,
            ..RunConfig::default()
        }
    }

    pub fn grid_with_seed(&self) -> GridConfig {
        GridConfig {
            seed: self.seed,
            ..self.grid.clone()
        }
    }

    pub fn steps(&self) -> u32 {
        (self.sim_seconds * 1000.0 / self.neuron.dt).round() as u32
    }

    /// Seconds of activity the run actually covers (whole steps).
    pub fn simulated_seconds(&self) -> f64 {
        f64::from(self.steps()) * self.neuron.dt / 1000.0
    }

    pub fn node_map(&self) -> Result<NodeMap> {
        if self.ranks_per_node == 0 {
            Ok(NodeMap::single(self.n_ranks))
        } else {
            NodeMap::uniform(self.n_ranks, self.ranks_per_node)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_with_seed().validate()?;
        self.neuron.validate()?;
        self.stimulus.validate()?;
        if self.n_ranks == 0 {
            return Err(Error::Config("n_ranks must be >= 1".into()));
        }
        if !(self.sim_seconds.is_finite() && self.sim_seconds > 0.0) {
            return Err(Error::Config(format!(
                "sim_seconds must be > 0, got {}",
                self.sim_seconds
            )));
        }
        let steps = self.sim_seconds * 1000.0 / self.neuron.dt;
        if steps.round() < 1.0 || steps > f64::from(u32::MAX) {
            return Err(Error::Config(format!(
                "{} s at dt = {} ms is {steps} steps",
                self.sim_seconds, self.neuron.dt
            )));
        }
        if u64::from(self.n_ranks) > self.grid.total_neurons() {
            return Err(Error::Config(format!(
                "{} ranks for {} neurons",
                self.n_ranks,
                self.grid.total_neurons()
            )));
        }
        Ok(())
    }

    /// Reads a sectioned `key = value` file on top of the defaults.
    pub fn from_ini_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_ini_str(&text)
    }

    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini =
            Ini::load_from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
        let mut c = RunConfig::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                c.set(section, key, value)?;
            }
        }
        Ok(c)
    }

    /// Sets one `[section] key` entry. Unknown keys are errors.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let p = |v: &str| v.trim().to_string();
        match (section, key) {
            ("grid", "size") => (self.grid.grid_x, self.grid.grid_y) = parse_grid_dims(value)?,
            ("grid", "grid_x") => self.grid.grid_x = parse(section, key, value)?,
            ("grid", "grid_y") => self.grid.grid_y = parse(section, key, value)?,
            ("grid", "neurons_per_column") => {
                self.grid.neurons_per_column = parse(section, key, value)?
            }
            ("grid", "excitatory_fraction") => {
                self.grid.excitatory_fraction = parse(section, key, value)?
            }
            ("grid", "out_degree_exc") => self.grid.out_degree_exc = parse(section, key, value)?,
            ("grid", "out_degree_inh") => self.grid.out_degree_inh = parse(section, key, value)?,
            ("grid", "intra_fraction") => self.grid.intra_fraction = parse(section, key, value)?,
            ("grid", "remote_kernel") => self.grid.remote_kernel = value.parse()?,
            ("grid", "delay_min") => self.grid.delay_min = parse(section, key, value)?,
            ("grid", "delay_max") => self.grid.delay_max = parse(section, key, value)?,
            ("synapse", "excitatory") => self.grid.weights.excitatory = parse(section, key, value)?,
            ("synapse", "inhibitory") => self.grid.weights.inhibitory = parse(section, key, value)?,
            ("neuron", "tau_m") => self.neuron.tau_m = parse(section, key, value)?,
            ("neuron", "v_rest") => self.neuron.v_rest = parse(section, key, value)?,
            ("neuron", "v_reset") => self.neuron.v_reset = parse(section, key, value)?,
            ("neuron", "v_threshold") => self.neuron.v_threshold = parse(section, key, value)?,
            ("neuron", "tau_arp") => self.neuron.tau_arp = parse(section, key, value)?,
            ("neuron", "g_c") => self.neuron.g_c = parse(section, key, value)?,
            ("neuron", "tau_c") => self.neuron.tau_c = parse(section, key, value)?,
            ("neuron", "alpha_c") => self.neuron.alpha_c = parse(section, key, value)?,
            ("neuron", "dt") => self.neuron.dt = parse(section, key, value)?,
            ("stimulus", "equivalent_synapses") => {
                self.stimulus.equivalent_synapses = parse(section, key, value)?
            }
            ("stimulus", "rate") => self.stimulus.rate = parse(section, key, value)?,
            ("stimulus", "weight") => self.stimulus.weight = parse(section, key, value)?,
            ("run", "ranks") => self.n_ranks = parse(section, key, value)?,
            ("run", "ranks_per_node") => self.ranks_per_node = parse(section, key, value)?,
            ("run", "mode") => self.exchange = value.parse()?,
            ("run", "send") => self.send = value.parse()?,
            ("run", "transport") => self.transport = value.parse()?,
            ("run", "sim_seconds") => self.sim_seconds = parse(section, key, value)?,
            ("run", "seed") => self.seed = parse(section, key, value)?,
            ("run", "record_packets") => self.record_packets = parse(section, key, value)?,
            ("output", "raster") => self.output.raster = Some(p(value).into()),
            ("output", "packet_log") => self.output.packet_log = Some(p(value).into()),
            ("output", "topology_dump") => self.output.topology_dump = Some(p(value).into()),
            _ => {
                return Err(Error::Config(format!(
                    "unknown config key [{section}] {key}"
                )));
            }
        }
        Ok(())
    }

    /// The configuration as a file `from_ini_str` reads back unchanged.
    pub fn to_ini_string(&self) -> String {
        let mut ini = Ini::new();
        let g = &self.grid;
        ini.with_section(Some("grid"))
            .set("grid_x", g.grid_x.to_string())
            .set("grid_y", g.grid_y.to_string())
            .set("neurons_per_column", g.neurons_per_column.to_string())
            .set("excitatory_fraction", g.excitatory_fraction.to_string())
            .set("out_degree_exc", g.out_degree_exc.to_string())
            .set("out_degree_inh", g.out_degree_inh.to_string())
            .set("intra_fraction", g.intra_fraction.to_string())
            .set("remote_kernel", g.remote_kernel.to_string())
            .set("delay_min", g.delay_min.to_string())
            .set("delay_max", g.delay_max.to_string());
        ini.with_section(Some("synapse"))
            .set("excitatory", g.weights.excitatory.to_string())
            .set("inhibitory", g.weights.inhibitory.to_string());
        let n = &self.neuron;
        ini.with_section(Some("neuron"))
            .set("tau_m", n.tau_m.to_string())
            .set("v_rest", n.v_rest.to_string())
            .set("v_reset", n.v_reset.to_string())
            .set("v_threshold", n.v_threshold.to_string())
            .set("tau_arp", n.tau_arp.to_string())
            .set("g_c", n.g_c.to_string())
            .set("tau_c", n.tau_c.to_string())
            .set("alpha_c", n.alpha_c.to_string())
            .set("dt", n.dt.to_string());
        ini.with_section(Some("stimulus"))
            .set(
                "equivalent_synapses",
                self.stimulus.equivalent_synapses.to_string(),
            )
            .set("rate", self.stimulus.rate.to_string())
            .set("weight", self.stimulus.weight.to_string());
        ini.with_section(Some("run"))
            .set("ranks", self.n_ranks.to_string())
            .set("ranks_per_node", self.ranks_per_node.to_string())
            .set("mode", self.exchange.to_string())
            .set("send", self.send.to_string())
            .set("transport", self.transport.to_string())
            .set("sim_seconds", self.sim_seconds.to_string())
            .set("seed", self.seed.to_string())
            .set("record_packets", self.record_packets.to_string());
        let o = &self.output;
        for (key, path) in [
            ("raster", &o.raster),
            ("packet_log", &o.packet_log),
            ("topology_dump", &o.topology_dump),
        ] {
            if let Some(path) = path {
                ini.with_section(Some("output"))
                    .set(key, path.display().to_string());
            }
        }
        let mut buf = Vec::new();
        ini.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ini output is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ini_overrides_defaults() {
        let c = RunConfig::from_ini_str(
            "[grid]\nsize = 2x3\nremote_kernel = gaussian:1.5\n\
             [run]\nranks = 4\nmode = broker\nsend = p2p\nsim_seconds = 0.5\nseed = 9\n\
             [synapse]\nexcitatory = 0.5\n",
        )
        .unwrap();
        assert_eq!((c.grid.grid_x, c.grid.grid_y), (2, 3));
        assert_eq!(c.n_ranks, 4);
        assert_eq!(c.exchange, ExchangeMode::Broker);
        assert_eq!(c.send, SendMode::PointToPoint);
        assert_eq!(c.steps(), 500);
        assert_eq!(c.grid_with_seed().seed, 9);
        assert_eq!(c.grid.weights.excitatory, 0.5);
        c.validate().unwrap();
    }

    #[test]
    fn ini_round_trip() {
        let mut c = RunConfig::energy_benchmark();
        c.n_ranks = 3;
        c.ranks_per_node = 2;
        c.transport = TransportKind::Tcp;
        c.grid.remote_kernel = crate::model::RemoteKernel::Gaussian { sigma: 0.75 };
        c.output.raster = Some("out/raster.txt".into());
        let back = RunConfig::from_ini_str(&c.to_ini_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_ini_str("[run]\nbogus = 1\n").is_err());
        assert!(RunConfig::from_ini_str("[run]\nranks = many\n").is_err());
        assert!(RunConfig::from_ini_str("[run]\nmode = ring\n").is_err());
        assert!(parse_grid_dims("4").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.validate().unwrap();
        c.sim_seconds = 0.0;
        assert!(c.validate().is_err());
        let c = RunConfig {
            n_ranks: 0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn energy_benchmark_network_size() {
        let c = RunConfig::energy_benchmark();
        assert_eq!(c.grid.total_neurons(), 10_000);
        let exc = f64::from(c.grid.excitatory_per_column());
        let npc = f64::from(c.grid.neurons_per_column);
        let mean = (exc * f64::from(c.grid.out_degree_exc)
            + (npc - exc) * f64::from(c.grid.out_degree_inh))
            / npc;
        assert!((mean - 1195.2).abs() < 1e-9);
        assert_eq!(c.steps(), 3000);
    }

    #[test]
    fn ini_inline_comments_are_stripped() {
        let c = RunConfig::from_ini_str(
            "[grid]\nremote_kernel = moore   ; or gaussian:<sigma>\n[run]\nranks = 3 # three\n",
        )
        .unwrap();
        assert_eq!(
            c.grid.remote_kernel,
            crate::model::RemoteKernel::MooreUniform
        );
        assert_eq!(c.n_ranks, 3);
    }
}

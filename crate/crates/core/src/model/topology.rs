use std::io::Write;
use std::ops::Range;

use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use serde::{Deserialize, Serialize};

use super::config::{GridConfig, RemoteKernel, SynapticWeights};
use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    Excitatory,
    Inhibitory,
}

/// Neuron numbering: column-major blocks of `neurons_per_column` ids, the
/// excitatory neurons first inside each block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub grid_x: u32,
    pub grid_y: u32,
    pub neurons_per_column: u32,
    pub excitatory_per_column: u32,
}

impl Layout {
    pub fn n_columns(&self) -> u32 {
        self.grid_x * self.grid_y
    }

    pub fn total_neurons(&self) -> u32 {
        self.n_columns() * self.neurons_per_column
    }

    #[inline]
    pub fn column_of(&self, neuron: u32) -> u32 {
        neuron / self.neurons_per_column
    }

    #[inline]
    pub fn population(&self, neuron: u32) -> Population {
        if neuron % self.neurons_per_column < self.excitatory_per_column {
            Population::Excitatory
        } else {
            Population::Inhibitory
        }
    }

    pub fn column_range(&self, column: u32) -> Range<u32> {
        let lo = column * self.neurons_per_column;
        lo..lo + self.neurons_per_column
    }

    /// Column coordinates `(x, y)`; column ids run along x first.
    pub fn column_xy(&self, column: u32) -> (u32, u32) {
        (column % self.grid_x, column / self.grid_x)
    }

    /// Columns surrounding `column` (Chebyshev distance 1) that lie on the grid.
    pub fn moore_neighbours(&self, column: u32) -> Vec<u32> {
        let (x, y) = self.column_xy(column);
        let mut out = Vec::with_capacity(8);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (i64::from(x) + dx, i64::from(y) + dy);
                if nx >= 0 && ny >= 0 && nx < i64::from(self.grid_x) && ny < i64::from(self.grid_y)
                {
                    out.push(ny as u32 * self.grid_x + nx as u32);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synapse {
    pub target: u32,
    pub delay: u8,
    pub weight: f32,
}

/// Outgoing synapses of every neuron in compressed-row form. Weights are a
/// function of the source population and are not stored per synapse.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapseTable {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    delays: Vec<u8>,
}

impl SynapseTable {
    pub fn n_sources(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    #[inline]
    pub fn out_degree(&self, source: u32) -> usize {
        let s = source as usize;
        self.offsets[s + 1] - self.offsets[s]
    }

    /// `(targets, delays)` of one source neuron, in table order.
    #[inline]
    pub fn row(&self, source: u32) -> (&[u32], &[u8]) {
        let s = source as usize;
        let r = self.offsets[s]..self.offsets[s + 1];
        (&self.targets[r.clone()], &self.delays[r])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityStats {
    pub total_synapses: u64,
    pub excitatory_intra: u64,
    pub excitatory_remote: u64,
    pub inhibitory: u64,
    pub mean_out_degree: f64,
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub layout: Layout,
    pub weights: SynapticWeights,
    pub synapses: SynapseTable,
    pub stats: ConnectivityStats,
}

impl Topology {
    pub fn total_neurons(&self) -> u32 {
        self.layout.total_neurons()
    }

    #[inline]
    pub fn weight_of(&self, source: u32) -> f32 {
        match self.layout.population(source) {
            Population::Excitatory => self.weights.excitatory,
            Population::Inhibitory => self.weights.inhibitory,
        }
    }

    pub fn synapses_of(&self, source: u32) -> impl Iterator<Item = Synapse> + '_ {
        let (targets, delays) = self.synapses.row(source);
        let weight = self.weight_of(source);
        targets
            .iter()
            .zip(delays)
            .map(move |(&target, &delay)| Synapse {
                target,
                delay,
                weight,
            })
    }

    /// Text dump, one `src_id,tgt_id,delay,weight` line per synapse, sorted
    /// by source id.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for src in 0..self.total_neurons() {
            for s in self.synapses_of(src) {
                writeln!(w, "{src},{},{},{}", s.target, s.delay, s.weight)?;
            }
        }
        w.flush()
    }
}

/// Builds the neuron layout for `config` and generates its synapses.
pub fn build_topology(config: &GridConfig) -> Result<Topology> {
    config.validate()?;
    let layout = Layout {
        grid_x: config.grid_x,
        grid_y: config.grid_y,
        neurons_per_column: config.neurons_per_column,
        excitatory_per_column: config.excitatory_per_column(),
    };
    let (synapses, stats) = generate_synapses(&layout, config)?;
    Ok(Topology {
        layout,
        weights: config.weights,
        synapses,
        stats,
    })
}

/// Remote-target sampler of one column.
struct ColumnKernel {
    columns: Vec<u32>,
    pick: Option<WeightedIndex<f64>>,
}

fn column_kernels(layout: &Layout, kernel: RemoteKernel) -> Result<Vec<ColumnKernel>> {
    (0..layout.n_columns())
        .map(|c| {
            let (columns, weights): (Vec<u32>, Vec<f64>) = match kernel {
                RemoteKernel::MooreUniform => {
                    let n = layout.moore_neighbours(c);
                    let w = vec![1.0; n.len()];
                    (n, w)
                }
                RemoteKernel::Gaussian { sigma } => {
                    let (x, y) = layout.column_xy(c);
                    let reach = (3.0 * sigma).ceil() as i64;
                    let mut cols = Vec::new();
                    let mut ws = Vec::new();
                    for dy in -reach..=reach {
                        for dx in -reach..=reach {
                            if dx == 0 && dy == 0 {
                                continue;
                            }
                            let d2 = (dx * dx + dy * dy) as f64;
                            if d2.sqrt() > 3.0 * sigma {
                                continue;
                            }
                            let (nx, ny) = (i64::from(x) + dx, i64::from(y) + dy);
                            if nx < 0
                                || ny < 0
                                || nx >= i64::from(layout.grid_x)
                                || ny >= i64::from(layout.grid_y)
                            {
                                continue;
                            }
                            cols.push(ny as u32 * layout.grid_x + nx as u32);
                            ws.push((-d2 / (2.0 * sigma * sigma)).exp());
                        }
                    }
                    (cols, ws)
                }
            };
            let pick = if columns.is_empty() {
                None
            } else {
                Some(
                    WeightedIndex::new(&weights)
                        .map_err(|e| Error::Topology(format!("remote kernel weights: {e}")))?,
                )
            };
            Ok(ColumnKernel { columns, pick })
        })
        .collect()
}

/// Draws every neuron's outgoing synapses.
///
/// Each neuron's draws come from its own counter-based stream keyed by
/// `(seed, neuron id)`, so the table does not depend on how the network is
/// later partitioned. Rows are sorted by `(target, delay)`.
pub fn generate_synapses(
    layout: &Layout,
    config: &GridConfig,
) -> Result<(SynapseTable, ConnectivityStats)> {
    let npc = layout.neurons_per_column;
    let n_exc = layout.excitatory_per_column;
    let n_inh = npc - n_exc;
    let n_intra = config.intra_targets();
    let kernels = column_kernels(layout, config.remote_kernel)?;
    let isolated = kernels.iter().any(|k| k.pick.is_none());

    if n_exc > 0 {
        // Self-connections are excluded, so a column offers npc - 1 targets.
        let needed = if isolated {
            config.out_degree_exc
        } else {
            n_intra
        };
        if needed > npc - 1 {
            return Err(Error::Topology(format!(
                "excitatory neurons need {needed} distinct intra-column targets, column has {}",
                npc - 1
            )));
        }
    }
    if n_inh > 0 && config.out_degree_inh > n_exc {
        return Err(Error::Topology(format!(
            "inhibitory out-degree {} exceeds the {} excitatory neurons of a column",
            config.out_degree_inh, n_exc
        )));
    }

    let total = layout.total_neurons() as usize;
    let expected = u64::from(layout.n_columns())
        * (u64::from(n_exc) * u64::from(config.out_degree_exc)
            + u64::from(n_inh) * u64::from(config.out_degree_inh));
    let mut offsets = Vec::with_capacity(total + 1);
    let mut targets = Vec::with_capacity(expected as usize);
    let mut delays = Vec::with_capacity(expected as usize);
    let mut stats = ConnectivityStats::default();
    let mut row: Vec<(u32, u8)> = Vec::new();
    offsets.push(0);

    for src in 0..layout.total_neurons() {
        let mut rng = stream_rng(config.seed, Stream::Synapses, u64::from(src), 0);
        let column = layout.column_of(src);
        let base = column * npc;
        let local = src - base;
        row.clear();

        match layout.population(src) {
            Population::Excitatory => {
                let kernel = &kernels[column as usize];
                let (intra, remote) = match kernel.pick {
                    Some(_) => (n_intra, config.out_degree_exc - n_intra),
                    // A column without neighbours keeps every synapse at home.
                    None => (config.out_degree_exc, 0),
                };
                for i in index::sample(&mut rng, npc as usize - 1, intra as usize) {
                    let i = i as u32;
                    let t = if i >= local { i + 1 } else { i };
                    row.push((base + t, 0));
                }
                if let Some(pick) = &kernel.pick {
                    for _ in 0..remote {
                        let c = kernel.columns[pick.sample(&mut rng)];
                        let t = c * npc + rng.random_range(0..npc);
                        row.push((t, 0));
                    }
                }
                stats.excitatory_intra += u64::from(intra);
                stats.excitatory_remote += u64::from(remote);
            }
            Population::Inhibitory => {
                for i in index::sample(&mut rng, n_exc as usize, config.out_degree_inh as usize) {
                    row.push((base + i as u32, 0));
                }
                stats.inhibitory += u64::from(config.out_degree_inh);
            }
        }

        for syn in row.iter_mut() {
            syn.1 = rng.random_range(config.delay_min..=config.delay_max) as u8;
        }
        row.sort_unstable();
        targets.extend(row.iter().map(|s| s.0));
        delays.extend(row.iter().map(|s| s.1));
        offsets.push(targets.len());
    }

    stats.total_synapses = targets.len() as u64;
    stats.mean_out_degree = stats.total_synapses as f64 / total as f64;
    Ok((
        SynapseTable {
            offsets,
            targets,
            delays,
        },
        stats,
    ))
}

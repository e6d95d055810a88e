use super::partition::PartitionMap;
use super::topology::Topology;
use crate::{Error, Result};

/// Rank-level spike subscriptions.
///
/// `destinations(s)` lists, in ascending order, every rank other than `s`
/// that owns at least one target of a neuron living on `s`. The per-neuron
/// lists used to address individual spikes are kept alongside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingTable {
    by_rank: Vec<Vec<u32>>,
    neuron_offsets: Vec<usize>,
    neuron_dests: Vec<u32>,
}

impl RoutingTable {
    pub fn n_ranks(&self) -> u32 {
        self.by_rank.len() as u32
    }

    pub fn destinations(&self, source_rank: u32) -> &[u32] {
        &self.by_rank[source_rank as usize]
    }

    /// Remote ranks that own at least one target of `neuron`.
    #[inline]
    pub fn neuron_destinations(&self, neuron: u32) -> &[u32] {
        let n = neuron as usize;
        &self.neuron_dests[self.neuron_offsets[n]..self.neuron_offsets[n + 1]]
    }

    /// Ranks that `rank` receives spikes from.
    pub fn sources(&self, rank: u32) -> Vec<u32> {
        (0..self.n_ranks())
            .filter(|&s| self.by_rank[s as usize].binary_search(&rank).is_ok())
            .collect()
    }
}

pub fn build_routing_tables(topology: &Topology, partition: &PartitionMap) -> Result<RoutingTable> {
    let total = topology.total_neurons();
    let covered = partition.ranges().last().map(|r| r.end).unwrap_or(0);
    if covered != total || topology.synapses.n_sources() != total as usize {
        return Err(Error::Partition(format!(
            "partition covers {covered} neurons, topology has {total}"
        )));
    }
    let n_ranks = partition.n_ranks() as usize;
    let mut by_rank: Vec<Vec<bool>> = vec![vec![false; n_ranks]; n_ranks];
    let mut neuron_offsets = Vec::with_capacity(total as usize + 1);
    let mut neuron_dests = Vec::new();
    neuron_offsets.push(0);

    for rank in 0..partition.n_ranks() {
        for src in partition.range(rank) {
            let (targets, _) = topology.synapses.row(src);
            // Rows are sorted by target and ranks own ascending id ranges,
            // so owners come out sorted as well.
            let mut last = None;
            for &t in targets {
                let owner = partition.owner(t);
                if owner != rank && last != Some(owner) {
                    neuron_dests.push(owner);
                    by_rank[rank as usize][owner as usize] = true;
                    last = Some(owner);
                }
            }
            neuron_offsets.push(neuron_dests.len());
        }
    }

    let by_rank = by_rank
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter_map(|(r, &hit)| hit.then_some(r as u32))
                .collect()
        })
        .collect();
    Ok(RoutingTable {
        by_rank,
        neuron_offsets,
        neuron_dests,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_topology, partition_columns, GridConfig, Population};
    use std::collections::BTreeSet;

    fn config(gx: u32, gy: u32) -> GridConfig {
        GridConfig {
            grid_x: gx,
            grid_y: gy,
            neurons_per_column: 60,
            out_degree_exc: 30,
            out_degree_inh: 20,
            ..GridConfig::default()
        }
    }

    /// Brute-force scan of every synapse.
    fn scan(t: &Topology, p: &PartitionMap) -> Vec<BTreeSet<u32>> {
        let mut out = vec![BTreeSet::new(); p.n_ranks() as usize];
        for src in 0..t.total_neurons() {
            let s = p.owner(src);
            for syn in t.synapses_of(src) {
                let d = p.owner(syn.target);
                if d != s {
                    out[s as usize].insert(d);
                }
            }
        }
        out
    }

    #[test]
    fn single_rank_has_no_routes() {
        let t = build_topology(&config(2, 2)).unwrap();
        let p = partition_columns(&t.layout, 1).unwrap();
        let r = build_routing_tables(&t, &p).unwrap();
        assert!(r.destinations(0).is_empty());
    }

    #[test]
    fn matches_brute_force_scan() {
        for (gx, gy) in [(1, 1), (2, 1), (3, 3), (4, 4)] {
            let t = build_topology(&config(gx, gy)).unwrap();
            for ranks in [1, 2, 3, 4, 5, 8, 16, 32] {
                let p = partition_columns(&t.layout, ranks).unwrap();
                let r = build_routing_tables(&t, &p).unwrap();
                let oracle = scan(&t, &p);
                for s in 0..ranks {
                    let got: Vec<u32> = r.destinations(s).to_vec();
                    let want: Vec<u32> = oracle[s as usize].iter().copied().collect();
                    assert_eq!(got, want, "grid {gx}x{gy} ranks {ranks} source {s}");
                }
            }
        }
    }

    #[test]
    fn two_ranks_route_iff_crossing_synapse() {
        let t = build_topology(&config(2, 1)).unwrap();
        let p = partition_columns(&t.layout, 2).unwrap();
        let r = build_routing_tables(&t, &p).unwrap();
        let oracle = scan(&t, &p);
        assert_eq!(r.destinations(0).contains(&1), oracle[0].contains(&1));
        assert_eq!(r.destinations(1).contains(&0), oracle[1].contains(&0));
        assert_eq!(r.destinations(0), &[1]);
    }

    #[test]
    fn whole_column_inhibitory_neurons_stay_local() {
        let t = build_topology(&config(4, 4)).unwrap();
        let p = partition_columns(&t.layout, 4).unwrap();
        let r = build_routing_tables(&t, &p).unwrap();
        for src in 0..t.total_neurons() {
            if t.layout.population(src) == Population::Inhibitory {
                assert!(r.neuron_destinations(src).is_empty());
            }
        }
    }
}

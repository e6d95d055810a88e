use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::topology::Layout;
use crate::{Error, Result};

/// Assignment of contiguous neuron-id ranges to ranks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionMap {
    pub n_columns: u32,
    ranges: Vec<Range<u32>>,
}

impl PartitionMap {
    pub fn n_ranks(&self) -> u32 {
        self.ranges.len() as u32
    }

    pub fn range(&self, rank: u32) -> Range<u32> {
        self.ranges[rank as usize].clone()
    }

    pub fn ranges(&self) -> &[Range<u32>] {
        &self.ranges
    }

    pub fn owned(&self, rank: u32) -> u32 {
        let r = &self.ranges[rank as usize];
        r.end - r.start
    }

    /// Rank that owns `neuron`.
    #[inline]
    pub fn owner(&self, neuron: u32) -> u32 {
        (self.ranges.partition_point(|r| r.end <= neuron)) as u32
    }

    /// Columns per rank as a reduced fraction `(num, den)`.
    pub fn columns_per_rank(&self) -> (u32, u32) {
        fn gcd(a: u32, b: u32) -> u32 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(self.n_columns, self.n_ranks()).max(1);
        (self.n_columns / g, self.n_ranks() / g)
    }

    pub fn columns_per_rank_f64(&self) -> f64 {
        f64::from(self.n_columns) / f64::from(self.n_ranks())
    }
}

/// Splits the neurons of `layout` across `n_ranks`.
///
/// With at least as many columns as ranks, every rank receives whole
/// columns and counts differ by at most one column. Otherwise the ranks are
/// spread over the columns (counts differ by at most one rank per column)
/// and each column is cut into near-equal contiguous neuron blocks.
pub fn partition_columns(layout: &Layout, n_ranks: u32) -> Result<PartitionMap> {
    if n_ranks == 0 {
        return Err(Error::Partition("n_ranks must be >= 1".into()));
    }
    let total = layout.total_neurons();
    if n_ranks > total {
        return Err(Error::Partition(format!(
            "{n_ranks} ranks exceed the {total} neurons of the network"
        )));
    }
    let columns = layout.n_columns();
    let npc = layout.neurons_per_column;
    let mut ranges = Vec::with_capacity(n_ranks as usize);

    if columns >= n_ranks {
        let (base, extra) = (columns / n_ranks, columns % n_ranks);
        let mut col = 0;
        for r in 0..n_ranks {
            let take = base + u32::from(r < extra);
            ranges.push(col * npc..(col + take) * npc);
            col += take;
        }
    } else {
        let (base, extra) = (n_ranks / columns, n_ranks % columns);
        for c in 0..columns {
            let k = base + u32::from(c < extra);
            if k > npc {
                return Err(Error::Partition(format!(
                    "column {c} would be split across {k} ranks but holds only {npc} neurons"
                )));
            }
            let lo = c * npc;
            let (size, rem) = (npc / k, npc % k);
            let mut start = lo;
            for j in 0..k {
                let len = size + u32::from(j < rem);
                ranges.push(start..start + len);
                start += len;
            }
        }
    }

    Ok(PartitionMap {
        n_columns: columns,
        ranges,
    })
}

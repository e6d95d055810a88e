use std::hash::Hasher;
use std::io::{BufRead, Write};

use fnv::FnvHasher;

use crate::{Error, Result};

/// All spikes of a run as `(step, neuron)` pairs in canonical order
/// (step, then neuron id).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Raster {
    spikes: Vec<(u32, u32)>,
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

impl Raster {
    pub fn from_unsorted(mut spikes: Vec<(u32, u32)>) -> Self {
        spikes.sort_unstable();
        Raster { spikes }
    }

    pub fn spikes(&self) -> &[(u32, u32)] {
        &self.spikes
    }

    pub fn len(&self) -> usize {
        self.spikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spikes.is_empty()
    }

    /// Canonical text form: one `step,neuron_id` line per spike.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (s, n) in &self.spikes {
            writeln!(w, "{s},{n}")?;
        }
        w.flush()
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::with_capacity(self.spikes.len() * 12);
        self.write_text(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    /// FNV-1a over the canonical text.
    pub fn hash(&self) -> u64 {
        let mut h = FnvHasher::default();
        let mut line = Vec::with_capacity(24);
        for (s, n) in &self.spikes {
            line.clear();
            writeln!(line, "{s},{n}").expect("writing to memory");
            h.write(&line);
        }
        h.finish()
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut spikes = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("raster", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse = || -> Option<(u32, u32)> {
                let (a, b) = line.trim().split_once(',')?;
                Some((a.parse().ok()?, b.parse().ok()?))
            };
            spikes.push(parse().ok_or_else(|| {
                Error::Instrumentation(format!("raster line {}: {line:?}", i + 1))
            })?);
        }
        Ok(Raster::from_unsorted(spikes))
    }

    /// Per-neuron spike counts over `n_neurons`.
    pub fn counts(&self, n_neurons: u32) -> Vec<u32> {
        let mut c = vec![0; n_neurons as usize];
        for &(_, n) in &self.spikes {
            c[n as usize] += 1;
        }
        c
    }
}

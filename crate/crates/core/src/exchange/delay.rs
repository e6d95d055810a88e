use super::packet::AxonalSpike;
use crate::{Error, Result};

/// Number of step buckets in a delay ring; the longest supported delay.
pub const DELAY_HORIZON: u32 = 16;

/// Circular array of step buckets. An event queued at step `t` with delay
/// `d` is returned by `drain(t + d)` and not before.
///
/// A step's bucket must be drained before events emitted at that same step
/// are queued; with that ordering a delay of the full horizon lands in the
/// bucket that was just emptied.
#[derive(Debug, Clone)]
pub struct DelayQueues<E> {
    buckets: Vec<Vec<E>>,
}

impl<E> Default for DelayQueues<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> DelayQueues<E> {
    pub fn new() -> Self {
        DelayQueues {
            buckets: (0..DELAY_HORIZON).map(|_| Vec::new()).collect(),
        }
    }

    #[inline]
    fn slot(step: u32) -> usize {
        (step % DELAY_HORIZON) as usize
    }

    #[inline]
    pub fn enqueue(&mut self, event: E, emission_step: u32, delay: u32) -> Result<()> {
        if delay == 0 || delay > DELAY_HORIZON {
            return Err(Error::DelayOutOfRange {
                delay,
                horizon: DELAY_HORIZON,
            });
        }
        self.buckets[Self::slot(emission_step.wrapping_add(delay))].push(event);
        Ok(())
    }

    /// Takes the events due at `step`, in insertion order.
    pub fn drain(&mut self, step: u32) -> Vec<E> {
        std::mem::take(&mut self.buckets[Self::slot(step)])
    }

    /// Swaps the events due at `step` into `out` (cleared first), keeping
    /// both allocations alive.
    pub fn drain_into(&mut self, step: u32, out: &mut Vec<E>) {
        out.clear();
        std::mem::swap(&mut self.buckets[Self::slot(step)], out);
    }

    pub fn pending(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }
}

impl DelayQueues<AxonalSpike> {
    /// Queues `spike` to become readable at `spike.step + delay`.
    pub fn enqueue_axonal(&mut self, spike: AxonalSpike, delay: u32) -> Result<()> {
        self.enqueue(spike, spike.step, delay)
    }

    /// Spikes due at `step`, ordered by emission step then source id.
    pub fn drain_axonal(&mut self, step: u32) -> Vec<AxonalSpike> {
        let mut out = self.drain(step);
        out.sort_by_key(AxonalSpike::order_key);
        out
    }
}

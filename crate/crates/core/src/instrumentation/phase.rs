use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The four task families a simulation step is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Neuron state updates, including the external drive.
    Computation,
    /// Delay-queue drain and insert, spike expansion into synaptic events.
    MemoryManagement,
    /// Routing, packing, sending, receiving and unpacking packets.
    Communication,
    /// Waiting at the per-step barrier.
    Synchronization,
}

/// Seconds accumulated per phase by one rank, plus its loop wall time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimers {
    pub computation: f64,
    pub memory_management: f64,
    pub communication: f64,
    pub synchronization: f64,
    pub total: f64,
    pub steps: u64,
}

impl PhaseTimers {
    pub fn phase_sum(&self) -> f64 {
        self.computation + self.memory_management + self.communication + self.synchronization
    }
}

/// Lap timer: each call to [`PhaseClock::lap`] charges the time since the
/// previous lap to one phase, so the phases tile the loop without gaps.
#[derive(Debug, Clone)]
pub struct PhaseClock {
    start: Instant,
    last: Instant,
    timers: PhaseTimers,
}

impl Default for PhaseClock {
    fn default() -> Self {
        Self::start()
    }
}

impl PhaseClock {
    pub fn start() -> Self {
        let now = Instant::now();
        PhaseClock {
            start: now,
            last: now,
            timers: PhaseTimers::default(),
        }
    }

    #[inline]
    pub fn lap(&mut self, phase: Phase) {
        let now = Instant::now();
        let dt = (now - self.last).as_secs_f64();
        self.last = now;
        let slot = match phase {
            Phase::Computation => &mut self.timers.computation,
            Phase::MemoryManagement => &mut self.timers.memory_management,
            Phase::Communication => &mut self.timers.communication,
            Phase::Synchronization => &mut self.timers.synchronization,
        };
        *slot += dt;
    }

    pub fn end_step(&mut self) {
        self.timers.steps += 1;
    }

    pub fn started_at(&self) -> Instant {
        self.start
    }

    pub fn finish(mut self) -> PhaseTimers {
        self.timers.total = self.start.elapsed().as_secs_f64();
        self.timers
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseFractions {
    pub seconds: PhaseTimers,
    pub computation: f64,
    pub memory_management: f64,
    pub communication: f64,
    pub synchronization: f64,
    /// Share of the loop time not charged to any phase.
    pub residual: f64,
}

impl PhaseFractions {
    fn from_timers(t: PhaseTimers) -> Self {
        let f = |x: f64| x / t.total;
        let computation = f(t.computation);
        let memory_management = f(t.memory_management);
        let communication = f(t.communication);
        let synchronization = f(t.synchronization);
        let residual =
            (1.0 - (computation + memory_management + communication + synchronization)).max(0.0);
        PhaseFractions {
            seconds: t,
            computation,
            memory_management,
            communication,
            synchronization,
            residual,
        }
    }

    pub fn sum(&self) -> f64 {
        self.computation
            + self.memory_management
            + self.communication
            + self.synchronization
            + self.residual
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseBreakdown {
    pub per_rank: Vec<PhaseFractions>,
    /// All ranks' seconds added together before dividing.
    pub pooled: PhaseFractions,
}

/// Turns per-rank phase timers into fractions of loop time, per rank and
/// pooled over ranks.
pub fn phase_report(timers: &[PhaseTimers]) -> Result<PhaseBreakdown> {
    if timers.is_empty() {
        return Err(Error::Instrumentation("no phase timers recorded".into()));
    }
    let mut pooled = PhaseTimers::default();
    for (rank, t) in timers.iter().enumerate() {
        if t.steps == 0 || t.total.is_nan() || t.total <= 0.0 {
            return Err(Error::Instrumentation(format!(
                "rank {rank} recorded no phase samples"
            )));
        }
        if t.phase_sum() > t.total * (1.0 + 1e-9) {
            return Err(Error::Instrumentation(format!(
                "rank {rank} phases add up to more than its loop time"
            )));
        }
        pooled.computation += t.computation;
        pooled.memory_management += t.memory_management;
        pooled.communication += t.communication;
        pooled.synchronization += t.synchronization;
        pooled.total += t.total;
        pooled.steps += t.steps;
    }
    Ok(PhaseBreakdown {
        per_rank: timers
            .iter()
            .copied()
            .map(PhaseFractions::from_timers)
            .collect(),
        pooled: PhaseFractions::from_timers(pooled),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timers(c: f64, m: f64, comm: f64, s: f64, total: f64) -> PhaseTimers {
        PhaseTimers {
            computation: c,
            memory_management: m,
            communication: comm,
            synchronization: s,
            total,
            steps: 10,
        }
    }

    #[test]
    fn single_phase_takes_everything() {
        let r = phase_report(&[timers(0.0, 0.0, 2.0, 0.0, 2.0)]).unwrap();
        assert_eq!(r.pooled.communication, 1.0);
        assert_eq!(r.pooled.computation, 0.0);
        assert_eq!(r.pooled.residual, 0.0);
    }

    #[test]
    fn known_durations_give_exact_fractions() {
        let r = phase_report(&[
            timers(1.0, 0.5, 0.25, 0.25, 2.0),
            timers(0.5, 0.5, 0.5, 0.25, 2.0),
        ])
        .unwrap();
        assert_eq!(r.per_rank[0].computation, 0.5);
        assert_eq!(r.per_rank[0].memory_management, 0.25);
        assert_eq!(r.per_rank[1].residual, 0.125);
        assert_eq!(r.pooled.computation, 0.375);
        assert_eq!(r.pooled.synchronization, 0.125);
        assert_eq!(r.pooled.residual, 0.0625);
        for f in r.per_rank.iter().chain([&r.pooled]) {
            assert!((f.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn table_row_layout() {
        // A 12x12 row of the reference table: 21.3 / 17.1 / 35.2 / 22.9 %.
        let r = phase_report(&[timers(21.3, 17.1, 35.2, 22.9, 100.0)]).unwrap();
        let p = r.pooled;
        assert!((p.computation - 0.213).abs() < 1e-12);
        assert!((p.memory_management - 0.171).abs() < 1e-12);
        assert!((p.communication - 0.352).abs() < 1e-12);
        assert!((p.synchronization - 0.229).abs() < 1e-12);
        assert!((p.residual - 0.035).abs() < 1e-9);
    }

    #[test]
    fn missing_samples() {
        assert!(phase_report(&[]).is_err());
        let mut t = timers(1.0, 0.0, 0.0, 0.0, 1.0);
        t.steps = 0;
        assert!(phase_report(&[t]).is_err());
    }

    #[test]
    fn lap_clock_tiles_the_loop() {
        let mut c = PhaseClock::start();
        for _ in 0..100 {
            c.lap(Phase::Computation);
            c.lap(Phase::MemoryManagement);
            c.lap(Phase::Communication);
            c.lap(Phase::Synchronization);
            c.end_step();
        }
        let t = c.finish();
        assert_eq!(t.steps, 100);
        assert!(t.phase_sum() <= t.total);
    }
}

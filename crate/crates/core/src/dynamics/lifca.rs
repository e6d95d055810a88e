use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

/// Leaky integrate-and-fire neuron with a calcium-gated adaptation current.
///
/// Potentials are in mV relative to rest, times in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifcaParams {
    pub tau_m: f64,
    pub v_rest: f64,
    pub v_reset: f64,
    pub v_threshold: f64,
    /// Absolute refractory period.
    pub tau_arp: f64,
    /// Adaptation strength, mV/ms per unit calcium.
    pub g_c: f64,
    pub tau_c: f64,
    /// Calcium increment per spike.
    pub alpha_c: f64,
    pub dt: f64,
}

impl Default for LifcaParams {
    fn default() -> Self {
        LifcaParams {
            tau_m: 20.0,
            v_rest: 0.0,
            v_reset: 0.0,
            v_threshold: 20.0,
            tau_arp: 2.0,
            g_c: 0.02,
            tau_c: 500.0,
            alpha_c: 1.0,
            dt: 1.0,
        }
    }
}

impl LifcaParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.tau_m,
            self.v_rest,
            self.v_reset,
            self.v_threshold,
            self.tau_arp,
            self.g_c,
            self.tau_c,
            self.alpha_c,
            self.dt,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("neuron parameters must be finite".into()));
        }
        if !(self.tau_m > 0.0 && self.tau_c > 0.0 && self.dt > 0.0) {
            return Err(Error::Config("tau_m, tau_c and dt must be > 0".into()));
        }
        if self.v_threshold <= self.v_reset {
            return Err(Error::Config(format!(
                "v_threshold {} must exceed v_reset {}",
                self.v_threshold, self.v_reset
            )));
        }
        if self.tau_arp < 0.0 || self.g_c < 0.0 || self.alpha_c < 0.0 {
            return Err(Error::Config(
                "tau_arp, g_c and alpha_c must be >= 0".into(),
            ));
        }
        if self.dt > self.tau_c {
            return Err(Error::Config("dt must not exceed tau_c".into()));
        }
        Ok(())
    }

    /// Steps a neuron stays clamped after firing.
    pub fn refractory_steps(&self) -> u32 {
        (self.tau_arp / self.dt).round() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifcaState {
    pub v: f64,
    pub c: f64,
    /// Last step during which the potential is held at reset.
    pub refractory_until: Option<u32>,
}

impl LifcaState {
    pub fn at_rest(params: &LifcaParams) -> Self {
        LifcaState {
            v: params.v_rest,
            c: 0.0,
            refractory_until: None,
        }
    }

    #[inline]
    pub fn is_refractory(&self, now: u32) -> bool {
        matches!(self.refractory_until, Some(until) if now <= until)
    }
}

/// Start state of a network neuron: calcium at zero, potential uniform in
/// `[v_reset, v_threshold)` from the neuron's own stream so that the
/// population does not fire in lock-step on the first steps.
pub fn initial_state(params: &LifcaParams, seed: u64, neuron: u32) -> LifcaState {
    let mut rng = stream_rng(seed, Stream::Initial, u64::from(neuron), 0);
    let u: f64 = rng.random();
    LifcaState {
        v: params.v_reset + u * (params.v_threshold - params.v_reset),
        c: 0.0,
        refractory_until: None,
    }
}

/// Advances one neuron by one step and reports whether it fired.
///
/// Explicit Euler: while refractory the potential stays at reset; otherwise
/// `v += dt * (-(v - v_rest) / tau_m - g_c * c) + input`. Calcium decays by
/// `1 - dt / tau_c` every step and jumps by `alpha_c` on a spike.
#[inline]
pub fn step_lifca(
    state: &mut LifcaState,
    params: &LifcaParams,
    input_current: f64,
    now: u32,
) -> Result<bool> {
    if !input_current.is_finite() {
        return Err(Error::Dynamics(format!(
            "non-finite input current {input_current} at step {now}"
        )));
    }
    let c = state.c;
    if state.is_refractory(now) {
        state.v = params.v_reset;
    } else {
        state.v += params.dt * (-(state.v - params.v_rest) / params.tau_m - params.g_c * c)
            + input_current;
    }
    state.c = c * (1.0 - params.dt / params.tau_c);
    if state.v >= params.v_threshold {
        state.v = params.v_reset;
        state.c += params.alpha_c;
        state.refractory_until = Some(now + params.refractory_steps());
        return Ok(true);
    }
    Ok(false)
}

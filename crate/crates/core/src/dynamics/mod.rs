//! Per-neuron state update and the inputs that drive it.

mod input;
mod lifca;
mod stimulus;

pub use input::accumulate_input;
pub use lifca::{initial_state, step_lifca, LifcaParams, LifcaState};
pub use stimulus::{external_poisson_events, ExternalDrive, ExternalStimulus};

//! Benchmark driver: configuration, single runs, strong-scaling sweeps,
//! weight tuning and report output.

mod config;
mod report;
mod run;
mod sweep;
mod tune;

pub use config::{parse_grid_dims, OutputPaths, RunConfig, TransportKind};
pub use report::{
    emit_report, realtime_check, write_plot_data, AnyReport, EnergyBar, PacketStatsRow,
    PhaseStackRow, RealtimeCheck, ReportFormat, RunReport, ScalingPoint, ScalingReport, ScalingRow,
};
pub use run::{attach_energy, run_detailed, run_simulation, RunArtifacts};
pub use sweep::strong_scaling_sweep;
pub use tune::{scale_weights, tune_weights, TunePoint, TuneResult};

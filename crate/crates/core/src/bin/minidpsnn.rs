use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use minidpsnn::exchange::{ExchangeMode, SendMode};
use minidpsnn::harness::{
    attach_energy, emit_report, parse_grid_dims, realtime_check, run_simulation,
    strong_scaling_sweep, tune_weights, write_plot_data, AnyReport, ReportFormat, RunConfig,
    RunReport, TransportKind,
};
use minidpsnn::instrumentation::PowerSampleSeries;
use minidpsnn::{Error, Result};

#[derive(Parser)]
#[command(
    name = "minidpsnn",
    version,
    about = "Distributed spiking network proxy benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        ranks: Option<u32>,
        /// Power log (CSV: t,p or t,i,v) measured over the run.
        #[arg(long)]
        power_log: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        baseline_watts: f64,
    },
    /// Strong-scaling sweep over a list of rank counts.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<u32>,
    },
    /// Energy-to-solution of a stored run report from a power log.
    Energy {
        /// JSON report of a previous `run`.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        power_log: PathBuf,
        /// Window start in log time (defaults to the first sample).
        #[arg(long)]
        t0: Option<f64>,
        /// Window end in log time (defaults to the last sample).
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        baseline_watts: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Re-emit a stored JSON report in another format.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Bisect a common gain on all synaptic weights towards a target rate.
    Tune {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        ranks: Option<u32>,
        #[arg(long, default_value_t = 5.0)]
        target_hz: f64,
        #[arg(long, default_value_t = 0.5)]
        gain_lo: f64,
        #[arg(long, default_value_t = 2.0)]
        gain_hi: f64,
        #[arg(long, default_value_t = 0.2)]
        tolerance_hz: f64,
        #[arg(long, default_value_t = 12)]
        max_iter: u32,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Sectioned key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Column grid as XxY.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    neurons_per_column: Option<u32>,
    #[arg(long)]
    ranks_per_node: Option<u32>,
    #[arg(long)]
    sim_seconds: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<ExchangeMode>,
    #[arg(long)]
    send: Option<SendMode>,
    #[arg(long)]
    transport: Option<TransportKind>,
    /// Start from the 10k-neuron energy benchmark network.
    #[arg(long)]
    energy_benchmark: bool,
    #[arg(long)]
    raster: Option<PathBuf>,
    #[arg(long)]
    packet_log: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OutputArgs {
    /// Report file; JSON goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    /// Directory for plot-data CSVs.
    #[arg(long)]
    plot_dir: Option<PathBuf>,
}

impl CommonArgs {
    fn config(&self, ranks: Option<u32>) -> Result<RunConfig> {
        let mut c = match (&self.config, self.energy_benchmark) {
            (Some(p), _) => RunConfig::from_ini_path(p)?,
            (None, true) => RunConfig::energy_benchmark(),
            (None, false) => RunConfig::default(),
        };
        if let Some(g) = &self.grid {
            (c.grid.grid_x, c.grid.grid_y) = parse_grid_dims(g)?;
        }
        if let Some(n) = self.neurons_per_column {
            c.grid.neurons_per_column = n;
        }
        if let Some(n) = ranks {
            c.n_ranks = n;
        }
        if let Some(n) = self.ranks_per_node {
            c.ranks_per_node = n;
        }
        if let Some(s) = self.sim_seconds {
            c.sim_seconds = s;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(m) = self.mode {
            c.exchange = m;
        }
        if let Some(s) = self.send {
            c.send = s;
        }
        if let Some(t) = self.transport {
            c.transport = t;
        }
        if let Some(p) = &self.raster {
            c.output.raster = Some(p.clone());
        }
        if let Some(p) = &self.packet_log {
            c.output.packet_log = Some(p.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

fn write_out(report: &AnyReport, out: &OutputArgs) -> Result<()> {
    match &out.out {
        Some(path) => emit_report(report, out.format, path)?,
        None => match out.format {
            ReportFormat::Json => println!("{}", serde_json::to_string_pretty(report)?),
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(std::io::stdout());
                for row in report.rows() {
                    w.serialize(row)?;
                }
                w.flush().map_err(|e| Error::io(Path::new("<stdout>"), e))?;
            }
        },
    }
    if let Some(dir) = &out.plot_dir {
        write_plot_data(report, dir)?;
    }
    Ok(())
}

fn summarize(r: &RunReport) {
    let rt = realtime_check(r);
    eprintln!(
        "{} neurons, {} ranks ({} {}): {} spikes, {:.3} Hz, {} synaptic events",
        r.n_neurons,
        r.config.n_ranks,
        r.config.exchange,
        r.config.send,
        r.spike_count,
        r.mean_rate_hz,
        r.synaptic_events_total
    );
    eprintln!(
        "wall {:.3} s for {:.3} s simulated: ratio {:.3}, real time {}",
        r.wall_seconds,
        r.simulated_seconds,
        rt.ratio,
        if rt.pass { "met" } else { "missed" }
    );
    let p = &r.phases.pooled;
    eprintln!(
        "phases: computation {:.1}%, memory {:.1}%, communication {:.1}%, synchronization {:.1}%",
        100.0 * p.computation,
        100.0 * p.memory_management,
        100.0 * p.communication,
        100.0 * p.synchronization
    );
    eprintln!(
        "traffic: {} packets, mean {:.1} B, max {} B; raster {}",
        r.traffic.packets, r.traffic.mean_packet_bytes, r.traffic.max_packet_bytes, r.raster_hash
    );
    if let Some(e) = &r.energy {
        eprintln!(
            "energy: {:.1} J at {:.2} W mean, {:.3} uJ per synaptic event",
            e.joules, e.mean_watts, e.microjoules_per_event
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            ranks,
            power_log,
            baseline_watts,
        } => {
            let config = common.config(ranks)?;
            let mut report = run_simulation(&config)?;
            if let Some(p) = power_log {
                let series = PowerSampleSeries::from_csv_path(&p)?;
                attach_energy(&mut report, &series, None, baseline_watts)?;
            }
            summarize(&report);
            write_out(&AnyReport::Run(report), &common.output)
        }
        Command::Sweep { common, ranks } => {
            let config = common.config(None)?;
            let sweep = strong_scaling_sweep(&config, &ranks)?;
            for r in &sweep.runs {
                summarize(r);
            }
            let failure = sweep.error.clone();
            write_out(&AnyReport::Scaling(sweep), &common.output)?;
            match failure {
                Some(e) => Err(Error::Config(format!("sweep stopped early: {e}"))),
                None => Ok(()),
            }
        }
        Command::Energy {
            report,
            power_log,
            t0,
            t1,
            baseline_watts,
            output,
        } => {
            let mut r = match AnyReport::from_json_path(&report)? {
                AnyReport::Run(r) => r,
                AnyReport::Scaling(_) => {
                    return Err(Error::Config("energy needs a single-run report".into()))
                }
            };
            let series = PowerSampleSeries::from_csv_path(&power_log)?;
            let span = series
                .span()
                .ok_or_else(|| Error::Energy("power log has no samples".into()))?;
            let window = (t0.unwrap_or(span.0), t1.unwrap_or(span.1));
            attach_energy(&mut r, &series, Some(window), baseline_watts)?;
            summarize(&r);
            write_out(&AnyReport::Run(r), &output)
        }
        Command::Report { input, output } => {
            write_out(&AnyReport::from_json_path(&input)?, &output)
        }
        Command::Tune {
            common,
            ranks,
            target_hz,
            gain_lo,
            gain_hi,
            tolerance_hz,
            max_iter,
        } => {
            let config = common.config(ranks)?;
            let t = tune_weights(
                &config,
                target_hz,
                (gain_lo, gain_hi),
                tolerance_hz,
                max_iter,
            )?;
            for p in &t.trace {
                eprintln!("gain {:.6}: {:.3} Hz", p.gain, p.rate_hz);
            }
            let w = &t.config.grid.weights;
            eprintln!(
                "gain {:.6} gives {:.3} Hz: excitatory {}, inhibitory {}, external {}",
                t.gain, t.rate_hz, w.excitatory, w.inhibitory, t.config.stimulus.weight
            );
            println!("{}", serde_json::to_string_pretty(&t)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use super::config::RunConfig;
use super::report::{ScalingReport, ScalingRow};
use super::run::run_simulation;
use crate::{Error, Result};

/// Runs `config` once per rank count in `rank_list` (non-empty, strictly
/// ascending). A failing run stops the sweep; the rows gathered so far are
/// returned with `complete` cleared.
pub fn strong_scaling_sweep(config: &RunConfig, rank_list: &[u32]) -> Result<ScalingReport> {
    if rank_list.is_empty() {
        return Err(Error::Config("empty rank list".into()));
    }
    if rank_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "rank list {rank_list:?} is not ascending"
        )));
    }
    let mut runs = Vec::new();
    let mut error = None;
    for &n in rank_list {
        let c = RunConfig {
            n_ranks: n,
            ..config.clone()
        };
        match run_simulation(&c) {
            Ok(r) => runs.push(r),
            Err(e) => {
                error = Some(format!("{n} ranks: {e}"));
                break;
            }
        }
    }
    let base = runs.first().map_or(0.0, |r| r.wall_seconds);
    let rows: Vec<ScalingRow> = runs.iter().map(|r| ScalingRow::from_run(r, base)).collect();
    let hashes_agree = rows
        .windows(2)
        .all(|w| w[0].raster_hash == w[1].raster_hash);
    Ok(ScalingReport {
        rows,
        runs,
        complete: error.is_none(),
        error,
        hashes_agree,
    })
}

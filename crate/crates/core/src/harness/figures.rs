use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use crate::compound::LossRate;
use crate::error::{Error, Result};
use crate::{fluid, limit};

/// Loss rate of the fluid convergence figure.
pub const FIG2_LOSS_RATE: f64 = 1e-3;
/// Initial windows of the fluid convergence figure.
pub const FIG2_STARTS: [f64; 2] = [10.0, 100.0];
/// Initial scaled windows of the running-mean figure.
pub const FIG3_STARTS: [f64; 3] = [0.0, 0.1, 2.0];

const FIG2_CYCLES: usize = 30;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Output {
            path: path.to_path_buf(),
            source,
        })
}

/// Write the fluid sawtooth trajectories and the limit-chain running means
/// under `config.output.out_dir`. Returns the paths written.
pub fn run_figures(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.params.validate()?;
    let seed = config.effective_seed()?;
    let dir = &config.output.out_dir;
    fs::create_dir_all(dir).map_err(|source| Error::Output {
        path: dir.clone(),
        source,
    })?;

    let mut written = Vec::new();
    let p = LossRate::new(FIG2_LOSS_RATE)?;
    for x0 in FIG2_STARTS {
        let traj =
            fluid::simulate_fluid(x0, p, FIG2_CYCLES, Some(config.params.rtt), &config.params);
        let path = dir.join(format!("fig2_fluid_x0_{x0}.csv"));
        fluid::write_trajectory_csv(&traj, create(&path)?)?;
        written.push(path);
    }

    let traces = FIG3_STARTS
        .iter()
        .map(|&v0| {
            Ok((
                v0,
                limit::running_mean_trace(config.limit.n, v0, seed, &config.params)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let path = dir.join("fig3_running_mean_g.csv");
    limit::write_running_mean_csv(&traces, create(&path)?)?;
    written.push(path);
    Ok(written)
}

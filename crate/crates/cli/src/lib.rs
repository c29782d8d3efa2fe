//! Config-driven GLA experiments: parse a JSON config, run projections against
//! closed-form oracles, and export CSV, JSON and SVG.

pub mod config;
mod json;
pub mod output;
pub mod poly;
pub mod run;

use std::path::{Path, PathBuf};

use config::{parse_config, ExperimentConfig, Mode};
use run::{verify, Experiment, RunError, RunOutput};

pub const DEFAULT_OUTPUT_DIR: &str = "gla-out";

pub fn load(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(RunError::Validation)
}

#[derive(Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub rows: usize,
    /// `(failures, checked)` in verify mode.
    pub verification: Option<(usize, usize)>,
}

/// Runs the experiment and writes its bundle. Verify-mode failures are reported
/// after the files are written, so the evidence stays on disk.
pub fn run_experiment(config: ExperimentConfig, out: Option<&Path>, jobs: usize) -> Result<RunSummary, RunError> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let exp = Experiment::prepare(config)?;
    let result = exp.run(jobs)?;
    let files = output::write_bundle(&dir, &output::bundle(&exp, &result)?)?;
    let verification = (exp.config.mode == Mode::Verify).then(|| verify(&result.rows, exp.config.mode));
    if let Some((failures, checked)) = verification {
        if failures > 0 {
            return Err(RunError::Verify { failures, checked });
        }
    }
    Ok(RunSummary {
        output_dir: dir,
        files,
        rows: result.rows.len(),
        verification,
    })
}

/// Runs without writing anything and checks every row against its oracle.
pub fn verify_experiment(config: ExperimentConfig, jobs: usize) -> Result<(RunOutput, usize), RunError> {
    let mode = config.mode;
    let exp = Experiment::prepare(config)?;
    let result = exp.run(jobs)?;
    let (failures, checked) = verify(&result.rows, mode);
    if failures > 0 {
        return Err(RunError::Verify { failures, checked });
    }
    Ok((result, checked))
}

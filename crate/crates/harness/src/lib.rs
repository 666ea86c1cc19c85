//! Monte Carlo driver for `radcom`: Rayleigh channel draws, SNR sweeps over
//! the balancing and sum-rate solvers, and CSV/JSON result files.

pub mod channel;
pub mod config;
pub mod experiment;
pub mod instance;
pub mod output;

pub use channel::{rayleigh_channel, trial_seed};
pub use config::{ExperimentConfig, Method, OutputFormat, SolverOptions};
pub use experiment::{design_pattern, run_experiment, run_method, MethodOutcome, TrialRecord};
pub use output::{emit_results, read_results, CSV_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<radcom::Error> for HarnessError {
    fn from(e: radcom::Error) -> Self {
        HarnessError::Solver(e.to_string())
    }
}

/// Mean of the successful values of `method` at each SNR, in grid order.
/// The last element of each entry counts failed records.
pub fn mean_by_snr(records: &[TrialRecord], method: Method) -> Vec<(f64, f64, usize)> {
    let mut out: Vec<(f64, f64, usize, usize)> = Vec::new();
    for r in records.iter().filter(|r| r.method == method) {
        let pos = match out.iter().position(|e| e.0 == r.snr_db) {
            Some(p) => p,
            None => {
                out.push((r.snr_db, 0.0, 0, 0));
                out.len() - 1
            }
        };
        match r.value {
            Some(v) => {
                out[pos].1 += v;
                out[pos].2 += 1;
            }
            None => out[pos].3 += 1,
        }
    }
    out.into_iter()
        .map(|(snr, sum, n, failed)| (snr, if n > 0 { sum / n as f64 } else { f64::NAN }, failed))
        .collect()
}

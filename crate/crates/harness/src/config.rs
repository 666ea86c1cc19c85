use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use radcom::{BarrierOptions, DpcOptions, MultibeamParams, PatternKind, TbfOptions};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Solver run on every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Balanced SINR with linear beamforming, in dB.
    TbfBalance,
    /// Balanced SINR with dirty-paper coding, in dB.
    DpcBalance,
    /// DPC sum rate (Sato bound, KKT-checked), in bits.
    DpcSumrate,
    /// Zero-forcing DPC sum rate, in bits.
    ZfDpc,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::TbfBalance,
        Method::DpcBalance,
        Method::DpcSumrate,
        Method::ZfDpc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::TbfBalance => "tbf_balance",
            Method::DpcBalance => "dpc_balance",
            Method::DpcSumrate => "dpc_sumrate",
            Method::ZfDpc => "zf_dpc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.replace('-', "_"))
            .ok_or_else(|| HarnessError::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(HarnessError::Config(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tbf: TbfOptions<f64>,
    pub dpc: DpcOptions<f64>,
    pub barrier: BarrierOptions<f64>,
}

impl SolverOptions {
    /// Overrides the stopping tolerance of the first-order solvers.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tbf.tol = tol;
        self.dpc.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.tbf.max_iter = n;
        self.dpc.max_iter = n;
        self
    }
}

/// A Monte Carlo sweep. Field names double as the JSON config format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Transmit antennas.
    pub antennas: usize,
    pub users: usize,
    pub pattern: PatternKind,
    pub multibeam: MultibeamParams<f64>,
    /// Transmit SNR `P/σ²` in dB.
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub solver: SolverOptions,
    /// Noise power; the radar power is `σ² · 10^(snr/10)`.
    pub noise: f64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Write wall-clock solve times. Off makes output byte-reproducible.
    pub record_runtime: bool,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            antennas: 10,
            users: 4,
            pattern: PatternKind::Omni,
            multibeam: MultibeamParams::default(),
            snr_db: (0..=6).map(|i| 5.0 * i as f64).collect(),
            trials: 100,
            seed: 0,
            methods: vec![Method::TbfBalance, Method::DpcBalance],
            solver: SolverOptions::default(),
            noise: 1.0,
            threads: None,
            record_runtime: true,
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.antennas == 0 || self.users == 0 {
            return fail("antennas and users must be positive".into());
        }
        if self.users > self.antennas {
            return fail(format!("users ({}) exceed antennas ({})", self.users, self.antennas));
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.snr_db.is_empty() {
            return fail("SNR grid is empty".into());
        }
        if let Some(bad) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return fail(format!("SNR {bad} is not finite"));
        }
        if self.methods.is_empty() {
            return fail("no methods requested".into());
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return fail(format!("noise power must be positive, got {}", self.noise));
        }
        if self.threads == Some(0) {
            return fail("threads must be positive".into());
        }
        self.solver
            .tbf
            .check()
            .map_err(|e| HarnessError::Config(format!("tbf options: {e}")))?;
        self.solver
            .dpc
            .check()
            .map_err(|e| HarnessError::Config(format!("dpc options: {e}")))?;
        self.solver
            .barrier
            .check()
            .map_err(|e| HarnessError::Config(format!("barrier options: {e}")))?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

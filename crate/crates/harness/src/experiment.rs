use std::time::Instant;

use radcom::{
    make_covariance, solve_dpc_balancing, solve_sato_barrier, solve_tbf_balancing, verify_kkt_theorem1,
    zf_dpc_precoder, CovarianceDesign64, EffectiveChannel64, PatternKind,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{rayleigh_channel, trial_seed};
use crate::config::{ExperimentConfig, Method, SolverOptions};
use crate::HarnessError;

/// KKT residual bound applied to every sum-rate solution.
pub const KKT_TOL: f64 = 1e-6;

/// One solver run on one channel draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "M")]
    pub antennas: usize,
    pub pattern: PatternKind,
    pub snr_db: f64,
    pub method: Method,
    /// Balanced SINR in dB or sum rate in bits; empty when the solver failed.
    pub value: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_ms: f64,
}

/// Outcome of one method on one effective channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub value: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl MethodOutcome {
    fn failed() -> Self {
        Self {
            value: None,
            iterations: 0,
            converged: false,
        }
    }
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Runs `method` on `eff`. Solver errors become a failed outcome rather than
/// aborting the sweep.
pub fn run_method(method: Method, eff: &EffectiveChannel64, opts: &SolverOptions) -> MethodOutcome {
    let out = match method {
        Method::TbfBalance => solve_tbf_balancing(eff, &opts.tbf).map(|r| MethodOutcome {
            value: Some(db(r.gamma)),
            iterations: r.iterations,
            converged: r.converged,
        }),
        Method::DpcBalance => solve_dpc_balancing(eff, &opts.dpc).map(|r| MethodOutcome {
            value: Some(db(r.gamma)),
            iterations: r.iterations,
            converged: r.converged,
        }),
        Method::DpcSumrate => solve_sato_barrier(eff, &opts.barrier).map(|sato| {
            let kkt_ok = verify_kkt_theorem1(&sato, eff)
                .and_then(|(_, report)| report.check(KKT_TOL))
                .is_ok();
            MethodOutcome {
                value: Some(sato.bound),
                iterations: sato.newton_steps,
                converged: sato.converged && kkt_ok,
            }
        }),
        Method::ZfDpc => zf_dpc_precoder(eff).map(|l| {
            let sigma2 = eff.sigma2();
            let rate = (0..eff.users())
                .map(|k| (1.0 + l[(k, k)].norm_sqr() / sigma2).log2())
                .sum();
            MethodOutcome {
                value: Some(rate),
                iterations: 0,
                converged: true,
            }
        }),
    };
    match out {
        Ok(o) if o.value.is_some_and(f64::is_finite) => o,
        Ok(o) => MethodOutcome {
            value: None,
            converged: false,
            ..o
        },
        Err(_) => MethodOutcome::failed(),
    }
}

/// Unit-trace covariance shape used by every trial of `cfg`.
pub fn design_pattern(cfg: &ExperimentConfig) -> Result<CovarianceDesign64, HarnessError> {
    let design = make_covariance(cfg.pattern, cfg.antennas, &cfg.multibeam)?;
    if !design.converged {
        return Err(HarnessError::Solver(format!(
            "multibeam design did not converge (mismatch {:.6e})",
            design.mismatch
        )));
    }
    Ok(design)
}

fn run_trial(
    cfg: &ExperimentConfig,
    design: &CovarianceDesign64,
    snr_db: f64,
    trial: usize,
) -> Result<Vec<TrialRecord>, HarnessError> {
    let seed = trial_seed(cfg.seed, trial);
    let h = rayleigh_channel(cfg.users, cfg.antennas, seed);
    let power = cfg.noise * 10f64.powf(snr_db / 10.0);
    let radar = design.radar(power)?;
    let eff = EffectiveChannel64::new(&h, &radar, cfg.noise)?;
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    Ok(methods
        .into_iter()
        .map(|method| {
            let start = Instant::now();
            let outcome = run_method(method, &eff, &cfg.solver);
            let runtime_ms = if cfg.record_runtime {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            TrialRecord {
                trial,
                seed,
                users: cfg.users,
                antennas: cfg.antennas,
                pattern: cfg.pattern,
                snr_db,
                method,
                value: outcome.value,
                iterations: outcome.iterations,
                converged: outcome.converged,
                runtime_ms,
            }
        })
        .collect())
}

/// Runs every method on every (SNR, trial) pair. Trial `t` draws its
/// channel from a seed derived from `(cfg.seed, t)` and reuses it across the
/// SNR grid. Records are ordered by SNR grid position, trial, then method,
/// whatever the number of worker threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>, HarnessError> {
    cfg.validate()?;
    let design = design_pattern(cfg)?;
    let jobs: Vec<(f64, usize)> = cfg
        .snr_db
        .iter()
        .flat_map(|&snr| (0..cfg.trials).map(move |t| (snr, t)))
        .collect();
    let work = || -> Result<Vec<Vec<TrialRecord>>, HarnessError> {
        jobs.par_iter()
            .map(|&(snr, t)| run_trial(cfg, &design, snr, t))
            .collect()
    };
    let nested = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    Ok(nested.into_iter().flatten().collect())
}

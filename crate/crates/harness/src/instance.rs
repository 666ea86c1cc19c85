//! Single-instance solves behind the `tbf-balance`, `dpc-balance` and
//! `dpc-sumrate` subcommands.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use radcom::json;
use radcom::linalg::{CMat, RVec};
use radcom::{
    compute_sinr, recover_precoders, recover_sumrate_precoder, solve_dpc_balancing, solve_saddle_extragradient,
    solve_sato_barrier, solve_tbf_balancing, verify_kkt_theorem1, ChannelMatrix64, EffectiveChannel64, KktReport,
    MultibeamParams, PatternKind, RadarCovariance64, SaddleOptions, SinrMode,
};
use serde::{Deserialize, Serialize};

use crate::channel::rayleigh_channel;
use crate::config::SolverOptions;
use crate::experiment::KKT_TOL;
use crate::HarnessError;

/// A single channel and radar pattern. `channel` overrides the Rayleigh draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceSpec {
    pub antennas: usize,
    pub users: usize,
    pub pattern: PatternKind,
    pub multibeam: MultibeamParams<f64>,
    pub snr_db: f64,
    pub noise: f64,
    pub seed: u64,
    #[serde(with = "json::opt_cmat", skip_serializing_if = "Option::is_none")]
    pub channel: Option<CMat<f64>>,
    pub solver: SolverOptions,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            antennas: 10,
            users: 4,
            pattern: PatternKind::Omni,
            multibeam: MultibeamParams::default(),
            snr_db: 10.0,
            noise: 1.0,
            seed: 0,
            channel: None,
            solver: SolverOptions::default(),
        }
    }
}

/// The channel, radar covariance and effective channel of an instance.
pub struct Instance {
    pub h: ChannelMatrix64,
    pub radar: RadarCovariance64,
    pub eff: EffectiveChannel64,
}

impl InstanceSpec {
    pub fn build(&self) -> Result<Instance, HarnessError> {
        if self.noise.is_nan() || self.noise <= 0.0 || !self.snr_db.is_finite() {
            return Err(HarnessError::Config("noise must be positive and SNR finite".into()));
        }
        let h = match &self.channel {
            Some(m) => ChannelMatrix64::new(m.clone())?,
            None => {
                if self.users == 0 || self.users > self.antennas {
                    return Err(HarnessError::Config(format!(
                        "need 1 <= users <= antennas, got K={}, M={}",
                        self.users, self.antennas
                    )));
                }
                rayleigh_channel(self.users, self.antennas, self.seed)
            }
        };
        let design = radcom::make_covariance(self.pattern, h.antennas(), &self.multibeam)?;
        let radar = design.radar(self.noise * 10f64.powf(self.snr_db / 10.0))?;
        let eff = EffectiveChannel64::new(&h, &radar, self.noise)?;
        Ok(Instance { h, radar, eff })
    }
}

/// Solution of a single instance, written as JSON.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub method: &'static str,
    /// Balanced SINR (linear) or sum rate (bits).
    pub value: f64,
    pub value_db: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(with = "json::rvec")]
    pub sinrs: RVec<f64>,
    /// Effective precoder `H W_c`.
    #[serde(with = "json::cmat")]
    pub f: CMat<f64>,
    #[serde(with = "json::cmat")]
    pub w_c: CMat<f64>,
    #[serde(with = "json::cmat")]
    pub w_r: CMat<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KktReport<f64>>,
    pub notes: Vec<String>,
}

fn trace_file(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn trace_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io(format!("{}: {e}", path.display()))
}

pub fn tbf_balance(inst: &Instance, opts: &SolverOptions, trace: Option<&Path>) -> Result<Report, HarnessError> {
    let res = solve_tbf_balancing(&inst.eff, &opts.tbf)?;
    if let Some(p) = trace {
        res.dual.write_trace_csv(trace_file(p)?).map_err(trace_err(p))?;
    }
    let prec = recover_precoders(&res.f, &inst.h, &inst.radar)?;
    Ok(Report {
        method: "tbf_balance",
        value: res.gamma,
        value_db: Some(10.0 * res.gamma.log10()),
        iterations: res.iterations,
        converged: res.converged,
        sinrs: compute_sinr(&res.f, &inst.eff, SinrMode::Tbf)?,
        f: prec.f,
        w_c: prec.w_c,
        w_r: prec.w_r,
        kkt: None,
        notes: res.notes,
    })
}

pub fn dpc_balance(inst: &Instance, opts: &SolverOptions, trace: Option<&Path>) -> Result<Report, HarnessError> {
    let res = solve_dpc_balancing(&inst.eff, &opts.dpc)?;
    if let Some(p) = trace {
        res.dual.write_trace_csv(trace_file(p)?).map_err(trace_err(p))?;
    }
    let prec = recover_precoders(&res.f, &inst.h, &inst.radar)?;
    Ok(Report {
        method: "dpc_balance",
        value: res.gamma,
        value_db: Some(10.0 * res.gamma.log10()),
        iterations: res.iterations,
        converged: res.converged,
        sinrs: compute_sinr(&res.f, &inst.eff, SinrMode::Dpc)?,
        f: prec.f,
        w_c: prec.w_c,
        w_r: prec.w_r,
        kkt: None,
        notes: res.notes,
    })
}

/// Sum rate through the barrier solver and the KKT map; with `trace` the
/// extragradient solver is used instead and its iterates are exported.
pub fn dpc_sumrate(
    inst: &Instance,
    opts: &SolverOptions,
    saddle: &SaddleOptions<f64>,
    trace: Option<&Path>,
) -> Result<Report, HarnessError> {
    let (sp, kkt, iterations, converged) = match trace {
        None => {
            let sato = solve_sato_barrier(&inst.eff, &opts.barrier)?;
            let (sp, report) = verify_kkt_theorem1(&sato, &inst.eff)?;
            report.check(KKT_TOL)?;
            (sp, Some(report), sato.newton_steps, sato.converged)
        }
        Some(p) => {
            let sp = solve_saddle_extragradient(&inst.eff, saddle)?;
            sp.write_trace_csv(trace_file(p)?).map_err(trace_err(p))?;
            let (it, conv) = (sp.iterations, sp.converged);
            (sp, None, it, conv)
        }
    };
    let rec = recover_sumrate_precoder(&sp, &inst.eff)?;
    let prec = recover_precoders(&rec.f, &inst.h, &inst.radar)?;
    let mut notes = Vec::new();
    if rec.peak > 1.0 + 1e-9 {
        notes.push(format!("recovered precoder rescaled from peak {:.6e}", rec.peak));
    }
    Ok(Report {
        method: "dpc_sumrate",
        value: sp.rate,
        value_db: None,
        iterations,
        converged,
        sinrs: rec.downlink_sinrs,
        f: prec.f,
        w_c: prec.w_c,
        w_r: prec.w_r,
        kkt,
        notes,
    })
}

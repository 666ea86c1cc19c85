use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use radcom::{angle_grid, beampattern, json, PatternKind, SaddleOptions};
use radcom_harness::instance::{self, InstanceSpec, Report};
use radcom_harness::{emit_results, run_experiment, ExperimentConfig, HarnessError, Method, OutputFormat};

#[derive(Parser)]
#[command(
    name = "radcom",
    version,
    about = "Downlink precoding under a fixed radar transmit covariance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design the radar covariance and export its beampattern.
    Pattern(PatternArgs),
    /// Balanced SINR with linear beamforming on one channel.
    TbfBalance(InstanceArgs),
    /// Balanced SINR with dirty-paper coding on one channel.
    DpcBalance(InstanceArgs),
    /// DPC sum rate on one channel.
    DpcSumrate(InstanceArgs),
    /// Monte Carlo sweep over SNR and channel draws.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    antennas: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    pattern: Option<PatternKind>,
    /// Comma-separated transmit SNRs in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stopping tolerance of the first-order solvers.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args)]
struct PatternArgs {
    #[arg(long, default_value_t = 10)]
    antennas: usize,
    #[arg(long, default_value = "omni")]
    pattern: PatternKind,
    /// Radar power `P` in dB.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    snr_db: f64,
    /// Angle grid step in degrees.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Beampattern CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write `R_o` as a JSON matrix here.
    #[arg(long)]
    covariance: Option<PathBuf>,
}

#[derive(Args)]
struct InstanceArgs {
    #[command(flatten)]
    common: Common,
    /// JSON matrix (rows of `[re, im]` pairs) used instead of a Rayleigh draw.
    #[arg(long)]
    channel: Option<PathBuf>,
    /// Convergence trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of tbf_balance, dpc_balance, dpc_sumrate, zf_dpc.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write zero runtimes so repeated runs give identical files.
    #[arg(long)]
    no_runtime: bool,
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn pattern(args: PatternArgs) -> Result<(), HarnessError> {
    let design = radcom::make_covariance(args.pattern, args.antennas, &Default::default())?;
    let radar = design.radar(10f64.powf(args.snr_db / 10.0))?;
    let r_o = radar.covariance();
    let grid = beampattern(&r_o, &angle_grid(args.step)?)?;
    let mut csv = Vec::new();
    grid.write_csv(&mut csv).map_err(|e| HarnessError::Io(e.to_string()))?;
    match &args.out {
        Some(p) => write(p, &csv)?,
        None => io::stdout()
            .write_all(&csv)
            .map_err(|e| HarnessError::Io(e.to_string()))?,
    }
    if let Some(p) = &args.covariance {
        let text = serde_json::to_string_pretty(&json::encode(&r_o)).map_err(|e| HarnessError::Io(e.to_string()))?;
        write(p, text.as_bytes())?;
    }
    eprintln!(
        "{} pattern, M = {}: effective rank {}, mismatch {:.6e}, {} iterations",
        design.kind,
        args.antennas,
        design.effective_rank(),
        design.mismatch,
        design.iterations
    );
    Ok(())
}

fn instance_spec(args: &InstanceArgs) -> Result<InstanceSpec, HarnessError> {
    let c = &args.common;
    let mut spec = match &c.config {
        Some(p) => {
            serde_json::from_str(&read(p)?).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?
        }
        None => InstanceSpec::default(),
    };
    if let Some(v) = c.antennas {
        spec.antennas = v;
    }
    if let Some(v) = c.users {
        spec.users = v;
    }
    if let Some(v) = c.pattern {
        spec.pattern = v;
    }
    if let Some(v) = &c.snr_db {
        match v.as_slice() {
            [snr] => spec.snr_db = *snr,
            _ => return Err(HarnessError::Config("a single instance takes exactly one SNR".into())),
        }
    }
    if let Some(v) = c.seed {
        spec.seed = v;
    }
    if let Some(v) = c.tol {
        spec.solver = spec.solver.with_tol(v);
    }
    if let Some(v) = c.max_iters {
        spec.solver = spec.solver.with_max_iters(v);
    }
    if let Some(p) = &args.channel {
        let rows =
            serde_json::from_str(&read(p)?).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
        spec.channel = Some(json::decode(rows)?);
    }
    Ok(spec)
}

fn single(args: InstanceArgs, method: Method) -> Result<(), HarnessError> {
    let spec = instance_spec(&args)?;
    let inst = spec.build()?;
    let trace = args.trace.as_deref();
    let report: Report = match method {
        Method::TbfBalance => instance::tbf_balance(&inst, &spec.solver, trace)?,
        Method::DpcBalance => instance::dpc_balance(&inst, &spec.solver, trace)?,
        Method::DpcSumrate => {
            let mut saddle = SaddleOptions::default();
            if let Some(v) = args.common.tol {
                saddle.tol = v;
            }
            if let Some(v) = args.common.max_iters {
                saddle.max_iter = v;
            }
            instance::dpc_sumrate(&inst, &spec.solver, &saddle, trace)?
        }
        Method::ZfDpc => unreachable!("no subcommand"),
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| HarnessError::Io(e.to_string()))? + "\n";
    match &args.common.out {
        Some(p) => write(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    if !report.converged {
        return Err(HarnessError::Solver(format!("{method} did not converge")));
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), HarnessError> {
    let c = &args.common;
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::from_json(&read(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = c.antennas {
        cfg.antennas = v;
    }
    if let Some(v) = c.users {
        cfg.users = v;
    }
    if let Some(v) = c.pattern {
        cfg.pattern = v;
    }
    if let Some(v) = &c.snr_db {
        cfg.snr_db = v.clone();
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.tol {
        cfg.solver = cfg.solver.with_tol(v);
    }
    if let Some(v) = c.max_iters {
        cfg.solver = cfg.solver.with_max_iters(v);
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = &args.methods {
        cfg.methods = v.clone();
    }
    if let Some(v) = args.format {
        cfg.format = v;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if args.no_runtime {
        cfg.record_runtime = false;
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| HarnessError::Config("an output path is required (--out)".into()))?;
    let records = run_experiment(&cfg)?;
    emit_results(&records, &out, cfg.format)?;
    let failed = records.iter().filter(|r| !r.converged).count();
    eprintln!(
        "{} records written to {} ({failed} not converged)",
        records.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pattern(a) => pattern(a),
        Command::TbfBalance(a) => single(a, Method::TbfBalance),
        Command::DpcBalance(a) => single(a, Method::DpcBalance),
        Command::DpcSumrate(a) => single(a, Method::DpcSumrate),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

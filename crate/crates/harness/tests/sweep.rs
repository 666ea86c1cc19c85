use std::process::Command;

use radcom::{make_covariance, MultibeamParams, PatternKind};
use radcom_harness::{
    emit_results, rayleigh_channel, read_results, run_experiment, trial_seed, ExperimentConfig, Method, OutputFormat,
};

fn cfg(methods: Vec<Method>) -> ExperimentConfig {
    ExperimentConfig {
        antennas: 6,
        users: 3,
        snr_db: vec![0.0, 15.0],
        trials: 4,
        seed: 99,
        methods,
        record_runtime: false,
        ..ExperimentConfig::default()
    }
}

#[test]
fn output_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in [Some(1), Some(3), None] {
        let c = ExperimentConfig {
            threads,
            ..cfg(Method::ALL.to_vec())
        };
        let path = dir.path().join(format!("{threads:?}.csv"));
        emit_results(&run_experiment(&c).unwrap(), &path, OutputFormat::Csv).unwrap();
        files.push(std::fs::read(&path).unwrap());
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn dpc_dominates_tbf_per_record_pair() {
    let recs = run_experiment(&cfg(vec![Method::TbfBalance, Method::DpcBalance])).unwrap();
    for pair in recs.chunks(2) {
        assert_eq!(pair[0].method, Method::TbfBalance);
        assert_eq!(pair[1].method, Method::DpcBalance);
        let (t, d) = (pair[0].value.unwrap(), pair[1].value.unwrap());
        assert!(10f64.powf(d / 10.0) >= 10f64.powf(t / 10.0) - 1e-6, "{d} dB < {t} dB");
    }
}

#[test]
fn single_user_sum_rate_is_capacity() {
    let c = ExperimentConfig {
        users: 1,
        ..cfg(vec![Method::DpcSumrate, Method::ZfDpc])
    };
    let shape = make_covariance::<f64>(PatternKind::Omni, 6, &MultibeamParams::default())
        .unwrap()
        .shape;
    for r in run_experiment(&c).unwrap() {
        let h = rayleigh_channel(1, 6, trial_seed(c.seed, r.trial));
        let gain = (h.matrix() * &shape * h.matrix().adjoint())[(0, 0)].re;
        let snr = 10f64.powf(r.snr_db / 10.0) * gain;
        let expected = (1.0 + snr).log2();
        assert!(r.converged);
        assert!(
            (r.value.unwrap() - expected).abs() <= 1e-6 * expected,
            "{:?} vs {expected}",
            r.value
        );
    }
}

#[test]
fn trial_is_reproducible_in_isolation() {
    let full = run_experiment(&cfg(vec![Method::TbfBalance])).unwrap();
    let seed = full[2].seed;
    assert_eq!(seed, trial_seed(99, full[2].trial));
    let again = run_experiment(&ExperimentConfig {
        trials: full[2].trial + 1,
        snr_db: vec![full[2].snr_db],
        ..cfg(vec![Method::TbfBalance])
    })
    .unwrap();
    let same = again.iter().find(|r| r.trial == full[2].trial).unwrap();
    assert_eq!(same, &full[2]);
}

#[test]
fn json_results_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let recs = run_experiment(&cfg(vec![Method::ZfDpc, Method::DpcSumrate])).unwrap();
    let path = dir.path().join("r.json");
    emit_results(&recs, &path, OutputFormat::Json).unwrap();
    assert_eq!(read_results(&path, OutputFormat::Json).unwrap(), recs);
}

#[test]
fn json_config_matches_defaults() {
    let c = ExperimentConfig::from_json(r#"{"users": 2, "methods": ["zf_dpc"], "snr_db": [10]}"#).unwrap();
    assert_eq!(c.antennas, 10);
    assert_eq!(c.trials, 100);
    assert!(ExperimentConfig::from_json(r#"{"users": 2, "trials": 0}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"snr_db": []}"#).is_err());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_radcom"))
}

#[test]
fn cli_sweep_writes_records_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = cli()
            .args([
                "sweep",
                "--antennas",
                "4",
                "--users",
                "2",
                "--snr-db",
                "0,10",
                "--trials",
                "1",
            ])
            .args([
                "--seed",
                "3",
                "--methods",
                "tbf_balance,zf_dpc",
                "--no-runtime",
                "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    assert_eq!(a.lines().count(), 1 + 2 * 2);
    assert_eq!(a.lines().next().unwrap(), radcom_harness::CSV_HEADER);
}

#[test]
fn cli_reports_validation_failure() {
    let out = cli()
        .args(["sweep", "--users", "12", "--out", "/tmp/never.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceed antennas"));
}

#[test]
fn cli_single_instance_and_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let trace = dir.path().join("t.csv");
    let status = cli()
        .args([
            "dpc-balance",
            "--users",
            "2",
            "--antennas",
            "4",
            "--snr-db",
            "5",
            "--out",
        ])
        .arg(&report)
        .arg("--trace")
        .arg(&trace)
        .status()
        .unwrap();
    assert!(status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["method"], "dpc_balance");
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert!(std::fs::read_to_string(&trace)
        .unwrap()
        .starts_with("iteration,gamma,delta_norm,min_eig_Y"));

    let csv = dir.path().join("p.csv");
    let cov = dir.path().join("ro.json");
    let status = cli()
        .args(["pattern", "--pattern", "phased", "--snr-db", "10", "--out"])
        .arg(&csv)
        .arg("--covariance")
        .arg(&cov)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let peak = text
        .lines()
        .find(|l| l.starts_with("0,"))
        .and_then(|l| l.split(',').nth(1))
        .unwrap()
        .parse::<f64>()
        .unwrap();
    // P·M = 100 at broadside
    assert!((peak - 20.0).abs() < 1e-9);
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(&std::fs::read_to_string(&cov).unwrap()).unwrap();
    assert_eq!(rows.len(), 10);
}

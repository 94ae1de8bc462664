use std::path::Path;
use std::process::{Command, Output};

use isq_cli::config::{ExperimentConfig, ExperimentId};
use isq_cli::experiments::{run, run_theorem_11, run_theorem_12, run_theorem_a};
use isq_cli::CliError;
use isq_core::weights::Weight;

fn isq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isq")).args(args).output().expect("run isq")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.ini");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn apconst_reports_four_thirds() {
    let out = isq(&["apconst", "--weight", "power center=0 gamma=0.5", "--p", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("experiment,input_id,lhs,rhs,ratio,tolerance,pass"));
    let lhs: f64 = lines.next().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((lhs - 4.0 / 3.0).abs() < 0.01 * 4.0 / 3.0, "{lhs}");
}

#[test]
fn norms_of_the_indicator() {
    let out = isq(&["norms", "--input", "indicator", "--p", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lp: f64 = text.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((lp - 1.0).abs() < 1e-12);
}

#[test]
fn sqfn_eval_commands() {
    for kind in ["area", "g", "gstar", "poisson"] {
        let out = isq(&["sqfn", "eval", "--input", "bump", "--x", "0.5", "--kind", kind]);
        assert_eq!(out.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = isq(&["sqfn", "eval", "--input", "nothing", "--x", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hypothesis_violations_exit_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[hypothesis]\nalpha = 1\nlambda = 5\n");
    let out = isq(&["--config", &cfg, "theorem", "1.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hypothesis"));
    let cfg = write_config(dir.path(), "[hypothesis]\nalpha = 0.5\np = 0.6\n");
    assert_eq!(isq(&["--config", &cfg, "theorem", "1.1"]).status.code(), Some(2));
    assert_eq!(isq(&["decay", "fit", "--lemma", "1.1"]).status.code(), Some(2));
}

#[test]
fn out_flag_writes_file_and_exit_code_tracks_pass_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weights.csv");
    let out = isq(&["--out", path.to_str().unwrap(), "check", "weights"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().count() > 40 && text.lines().skip(1).all(|l| l.ends_with(",true")));
}

fn small(id: ExperimentId) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(id);
    cfg.box_half = 4.0;
    cfg.t_max = 8.0;
    cfg.alphas = vec![1.0];
    cfg
}

#[test]
fn guards_refuse_inadmissible_weights() {
    let mut cfg = small(ExperimentId::Theorem11);
    cfg.weights = vec![Weight::power(1, &[0.0], 0.5).unwrap()];
    cfg.alphas = vec![0.5];
    assert!(matches!(run_theorem_11(&cfg), Err(CliError::Hypothesis(_))));
    let mut cfg = small(ExperimentId::TheoremA);
    cfg.weights = vec![Weight::power(1, &[0.0], 1.25).unwrap()];
    assert!(matches!(run_theorem_a(&cfg), Err(CliError::Hypothesis(_))));
    let mut cfg = small(ExperimentId::Theorem12);
    cfg.lambdas = vec![5.0];
    assert!(matches!(run_theorem_12(&cfg), Err(CliError::Hypothesis(_))));
}

#[test]
fn mixed_weights_keep_admissible_cases_and_record_the_refusal() {
    let mut cfg = small(ExperimentId::Theorem11);
    cfg.weights = vec![Weight::constant(1, 1.0).unwrap(), Weight::power(1, &[0.0], 0.5).unwrap()];
    cfg.alphas = vec![0.5];
    cfg.ps = vec![1.0];
    let rows = run(&cfg).unwrap();
    let skipped: Vec<_> = rows.iter().filter(|r| r.input_id.starts_with("skipped")).collect();
    assert_eq!(skipped.len(), 1);
    assert!(rows.iter().any(|r| r.input_id.starts_with("single |")));
    assert!(rows.iter().all(|r| r.pass));
}

#[test]
fn gstar_ratios_decrease_in_lambda() {
    let mut cfg = small(ExperimentId::Theorem12);
    cfg.weights = vec![Weight::constant(1, 1.0).unwrap()];
    cfg.ps = vec![1.0];
    let rows = run(&cfg).unwrap();
    let mono: Vec<_> = rows.iter().filter(|r| r.input_id.contains(" -> ")).collect();
    assert_eq!(mono.len(), 2 * 12);
    assert!(mono.iter().all(|r| r.pass && r.lhs <= r.rhs));
}

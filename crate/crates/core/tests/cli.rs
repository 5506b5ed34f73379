use std::path::Path;
use std::process::{Command, Output};

use umda_core::harness::{AggregateResult, SuiteVerdict};
use umda_core::{BoundReport, RunOutcome};

fn umda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_umda"))
        .args(args)
        .env_remove("UMDA_WORKERS")
        .env_remove("UMDA_OUT_DIR")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_reports_outcome_and_exit_code() {
    let out = umda(&[
        "run", "--n", "2", "--mu", "1", "--lambda", "1", "--seed", "7",
    ]);
    let outcome: RunOutcome = serde_json::from_slice(&out.stdout).unwrap();
    let expected = if outcome.found_optimum { 0 } else { 2 };
    assert_eq!(code(&out), expected);
    let again = serde_json::to_string_pretty(&outcome).unwrap() + "\n";
    assert_eq!(again.as_bytes(), out.stdout.as_slice());
}

#[test]
fn cap_exhaustion_exits_two() {
    let out = umda(&[
        "run",
        "--n",
        "40",
        "--mu",
        "1",
        "--lambda",
        "1",
        "--max-iters",
        "1",
    ]);
    assert_eq!(code(&out), 2);
    let outcome: RunOutcome = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!outcome.found_optimum);
    assert_eq!(outcome.iterations_completed, 1);
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let trace = dir.path().join(format!("trace{k}.csv"));
        let freq = dir.path().join(format!("freq{k}.csv"));
        let out = umda(&[
            "run",
            "--n",
            "20",
            "--mu",
            "5",
            "--lambda",
            "20",
            "--seed",
            "99",
            "--backend",
            "explicit",
            "--workers",
            if k == 0 { "1" } else { "3" },
            "--trace",
            trace.to_str().unwrap(),
            "--dump-frequencies",
            freq.to_str().unwrap(),
        ]);
        outputs.push((
            out.stdout,
            std::fs::read(trace).unwrap(),
            std::fs::read(freq).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let trace = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert!(trace.starts_with("run_id,t,critical_pos,max_sel_relevant,min_freq,"));
}

#[test]
fn invalid_parameters_exit_one() {
    let out = umda(&["run", "--n", "5", "--mu", "3", "--lambda", "2"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu"));
    assert_eq!(
        code(&umda(&[
            "run", "--n", "5", "--mu", "1", "--lambda", "2", "--bogus"
        ])),
        1
    );
    assert_eq!(
        code(&umda(&[
            "run",
            "--n",
            "5",
            "--mu",
            "1",
            "--lambda",
            "2",
            "--fitness",
            "two_max"
        ])),
        1
    );
    assert_eq!(
        code(&umda(&[
            "run",
            "--n",
            "8",
            "--mu",
            "1",
            "--lambda",
            "2",
            "--fitness",
            "one_max",
            "--backend",
            "aggregated"
        ])),
        1
    );
}

#[test]
fn bounds_json_round_trips() {
    let out = umda(&[
        "bounds", "--n", "100", "--mu", "10", "--lambda", "3480", "--delta", "0.5",
    ]);
    assert_eq!(code(&out), 0);
    let report: BoundReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.d_upper, 2);
    assert_eq!(report.upper_bound_iterations, 47);
    assert_eq!(report, BoundReport::evaluate(100, 10, 3480, 0.5).unwrap());
}

#[test]
fn bounds_flags_trivial_lower_bound() {
    let out = umda(&["bounds", "--n", "10", "--mu", "10", "--lambda", "1000000"]);
    let report: BoundReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.lower_bound_trivial);
    let table = umda(&[
        "bounds", "--n", "10", "--mu", "10", "--lambda", "1000000", "--format", "table",
    ]);
    let text = String::from_utf8_lossy(&table.stdout).into_owned();
    assert!(text
        .lines()
        .any(|l| l.split_whitespace().eq(["lower_bound_trivial", "true"])));
}

#[test]
fn bounds_usage_errors() {
    let missing = umda(&["bounds", "--n", "100", "--mu", "10"]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("Usage"));
    assert_eq!(
        code(&umda(&[
            "bounds", "--n", "100", "--mu", "10", "--lambda", "20", "--delta", "1.5"
        ])),
        1
    );
    assert_eq!(code(&umda(&["--help"])), 0);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let small = write(
        dir.path(),
        "chernoff.toml",
        "master_seed = 1\n[chernoff]\nks = [100]\nps = [0.5]\ndeltas = [0.5]\nsamples = 10000\n",
    );
    let ok = umda(&["verify", "chernoff", "--config", &small]);
    assert_eq!(code(&ok), 0);
    let verdicts: Vec<SuiteVerdict> = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(verdicts[0].passed);

    // μ = λ = 2 drifts freely, so frequencies drop below 1/4 early
    let planted = write(
        dir.path(),
        "planted.toml",
        "[floor]\nreplications = 3\nmax_violating_runs = 0\n[floor.point]\nn = 100\nmu = { fixed = 2 }\nlambda = { fixed = 2 }\n",
    );
    assert_eq!(code(&umda(&["verify", "floor", "--config", &planted])), 3);

    assert_eq!(code(&umda(&["verify", "nonsense"])), 1);
    let malformed = write(dir.path(), "bad.toml", "[floor\nreplications = ");
    assert_eq!(code(&umda(&["verify", "floor", "--config", &malformed])), 1);
    let unknown = write(dir.path(), "unknown.toml", "[floor]\nwhatever = 1\n");
    assert_eq!(code(&umda(&["verify", "floor", "--config", &unknown])), 1);
}

#[test]
fn sweep_writes_seed_keyed_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        "master_seed = 5\nreplications = 3\n[[grid]]\nn = 16\nmu = { fixed = 8 }\nlambda = { ratio = 4.0 }\n\
         [[grid]]\nn = 24\nmu = { fixed = 8 }\nlambda = { ratio = 4.0 }\n",
    );
    let out_dir = dir.path().join("out");
    let out = umda(&[
        "sweep",
        "--config",
        &cfg,
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0);
    let printed: Vec<AggregateResult> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed.len(), 2);
    for (g, expected) in printed.iter().enumerate() {
        let json = std::fs::read(out_dir.join(format!("sweep-5-{g}.json"))).unwrap();
        let agg: AggregateResult = serde_json::from_slice(&json).unwrap();
        assert_eq!(&agg, expected);
        let rows = std::fs::read_to_string(out_dir.join(format!("sweep-5-{g}.csv"))).unwrap();
        assert_eq!(rows.lines().count(), 1 + 3);
    }
    assert!(out_dir.join("sweep-5-summary.csv").exists());
}

#[test]
fn out_dir_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.toml",
        "master_seed = 8\nreplications = 1\n[[grid]]\nn = 8\nmu = { fixed = 2 }\nlambda = { fixed = 8 }\n",
    );
    let status = Command::new(env!("CARGO_BIN_EXE_umda"))
        .args(["sweep", "--config", &cfg])
        .env("UMDA_OUT_DIR", dir.path())
        .env("UMDA_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&status), 0);
    assert!(dir.path().join("sweep-8-0.csv").exists());
}

//! End-to-end smoke tests for the `sahm` binary: one happy path per
//! subcommand plus the documented failure modes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sahm"))
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/fixture_trace.csv")
}

fn run_ok(args: &[&str]) -> Output {
    let output = binary().args(args).output().unwrap();
    assert!(
        output.status.success(),
        "expected success for {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
    output
}

fn run_err(args: &[&str]) -> String {
    let output = binary().args(args).output().unwrap();
    assert!(
        !output.status.success(),
        "expected failure for {args:?}\nstdout: {}",
        String::from_utf8_lossy(&output.stdout),
    );
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn gen_trace_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    let gen = |path: &Path, seed: &str| {
        run_ok(&[
            "gen-trace",
            "--epochs",
            "50",
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
    };
    gen(&a, "7");
    gen(&b, "7");
    gen(&c, "8");
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap(), "same seed, same bytes");
    assert_ne!(bytes_a, std::fs::read(&c).unwrap(), "different seed");
    let text = String::from_utf8(bytes_a).unwrap();
    assert!(text.starts_with(
        "name,epoch_index,branch_mispredict_ratio,l1i_mpki,l1d_miss_ratio,l2_miss_ratio"
    ));
    assert_eq!(text.lines().count(), 51, "header plus one row per epoch");
}

#[test]
fn gen_trace_honors_weights_and_stdout() {
    // All weight on state 8: every epoch must classify as L2. A one-state
    // chain only validates with a self-transition probability of 1.
    let out = run_ok(&[
        "gen-trace",
        "--epochs",
        "10",
        "--weights",
        "8:1.0",
        "--self-transition",
        "1",
    ]);
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    std::fs::write(&trace, &out.stdout).unwrap();
    let labels = run_ok(&["classify", "--trace", trace.to_str().unwrap()]);
    let labels = String::from_utf8(labels.stdout).unwrap();
    assert_eq!(labels.lines().count(), 10);
    assert!(labels.lines().all(|l| l == "L2"), "got: {labels}");
}

#[test]
fn classify_prints_one_label_per_epoch() {
    let out = run_ok(&["classify", "--trace", fixture().to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    let labels: Vec<&str> = text.lines().collect();
    assert_eq!(
        labels,
        [
            "Low",
            "Low",
            "L2",
            "L2",
            "L2+Branch",
            "L2+Branch",
            "L2+Branch",
            "Branch",
            "Branch",
            "L2",
            "Low",
            "Low"
        ]
    );
}

#[test]
fn classify_missing_file_fails_with_context() {
    let stderr = run_err(&["classify", "--trace", "/nonexistent/trace.csv"]);
    assert!(
        stderr.contains("/nonexistent/trace.csv"),
        "stderr: {stderr}"
    );
}

#[test]
fn derive_cutoffs_emits_loadable_json() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("cutoffs.json");
    run_ok(&[
        "derive-cutoffs",
        "--traces",
        fixture().to_str().unwrap(),
        "--percentile",
        "0.5",
        "--out",
        out_file.to_str().unwrap(),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out_file).unwrap()).unwrap();
    for key in ["branch_mispredict", "l1i_mpki", "l1d_miss", "l2_miss"] {
        assert!(
            parsed[key].is_f64() || parsed[key].is_u64(),
            "missing {key}"
        );
    }
    // The derived file is accepted wherever a cutoff preset is.
    run_ok(&[
        "classify",
        "--trace",
        fixture().to_str().unwrap(),
        "--cutoffs",
        out_file.to_str().unwrap(),
    ]);
}

#[test]
fn characterization_commands_write_csv_tables() {
    let dir = tempfile::tempdir().unwrap();
    let trace = fixture();
    let trace = trace.to_str().unwrap();

    let coverage = dir.path().join("coverage.csv");
    run_ok(&[
        "coverage",
        "--traces",
        trace,
        "--out",
        coverage.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&coverage).unwrap();
    assert!(text.starts_with("application,Low,Branch,"));
    assert!(text.contains("\naverage,"));

    let transitions = run_ok(&["transitions", "--traces", trace]);
    let text = String::from_utf8(transitions.stdout).unwrap();
    assert!(text.starts_with("from_state,to_state,share"));

    let nodiag = run_ok(&["transitions", "--traces", trace, "--exclude-diagonal"]);
    let nodiag = String::from_utf8(nodiag.stdout).unwrap();
    assert!(
        nodiag.contains("\n0,0,\n"),
        "diagonal share cell should be empty"
    );
    assert!(
        text.contains("\n0,0,0."),
        "diagonal share present by default"
    );

    let intervals = run_ok(&["intervals", "--traces", trace, "--buckets", "1,3"]);
    let text = String::from_utf8(intervals.stdout).unwrap();
    assert!(text.starts_with("kind,key,count_share,time_share,mean_interval_epochs"));
    assert!(text.contains("bucket,3+,"));
}

#[test]
fn enumerate_configs_prints_the_design_space() {
    let three = run_ok(&["enumerate-configs", "--levels", "0.1,0.2,0.3"]);
    assert_eq!(
        String::from_utf8(three.stdout).unwrap().lines().count(),
        256
    );

    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("configs.json");
    let one = run_ok(&[
        "enumerate-configs",
        "--levels",
        "0.3",
        "--out",
        json.to_str().unwrap(),
    ]);
    let names = String::from_utf8(one.stdout).unwrap();
    assert_eq!(names.lines().count(), 16);
    assert!(
        names.lines().next().unwrap().contains("B"),
        "baseline-only first"
    );
    let parsed: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 16);

    let stderr = run_err(&["enumerate-configs", "--levels", "1.5,-0.1"]);
    assert!(!stderr.is_empty());
}

#[test]
fn simulate_writes_result_json_and_event_log() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "simulate",
        "--traces",
        fixture().to_str().unwrap(),
        "--policy",
        "oracle",
        "--log-events",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let result: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(result["chip"], "canonical30");
    assert_eq!(result["policy"], "oracle");
    assert_eq!(result["horizon_ms"], 1200);
    let speedup = result["system_speedup"].as_f64().unwrap();
    assert!(speedup >= 1.0 && speedup <= 1.3);

    let gz = std::fs::read(dir.path().join("events.csv.gz")).unwrap();
    let mut decoder = flate2::read::GzDecoder::new(gz.as_slice());
    let mut events = String::new();
    std::io::Read::read_to_string(&mut decoder, &mut events).unwrap();
    assert!(events.starts_with(
        "kind,time_ms,program,core,state,matched,work_done_ms,stalled_ms,from_core,to_core"
    ));
    assert_eq!(
        events.lines().filter(|l| l.starts_with("step,")).count(),
        120,
        "one step row per executed timestep"
    );
}

#[test]
fn simulate_rejects_bad_policy_and_misplaced_inertia() {
    let trace = fixture();
    let trace = trace.to_str().unwrap();
    let stderr = run_err(&["simulate", "--traces", trace, "--policy", "fastest"]);
    assert!(stderr.contains("fastest"), "stderr: {stderr}");
    let stderr = run_err(&[
        "simulate",
        "--traces",
        trace,
        "--policy",
        "greedy",
        "--inertia-schedulings",
        "3",
    ]);
    assert!(!stderr.is_empty());
}

#[test]
fn sweep_emits_ordered_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    run_ok(&[
        "sweep",
        "--traces",
        fixture().to_str().unwrap(),
        "--per-trace",
        "--chips",
        "baseline,canonical30",
        "--policies",
        "blind,oracle",
        "--costs",
        "0,1",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "workload,chip,policy,migration_cost_ms,system_speedup,mean_app_speedup,\
         p25,median,p75,min,max,migrations_per_sec,epoch_utilization"
    );
    assert_eq!(
        lines.count(),
        8,
        "2 chips x 2 policies x 2 costs x 1 workload"
    );
    assert!(text.contains("fixture,B,blind,0.0,1.0,1.0,"));

    let json_out = dir.path().join("sweep.json");
    run_ok(&[
        "sweep",
        "--traces",
        fixture().to_str().unwrap(),
        "--chips",
        "canonical30",
        "--policies",
        "greedy",
        "--costs",
        "0",
        "--format",
        "json",
        "--out",
        json_out.to_str().unwrap(),
    ]);
    let rows: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&json_out).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);
    assert_eq!(rows[0]["workload"], "mix");
}

#[test]
fn repro_presets_write_fixed_filenames() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "repro",
        "limit-study",
        "--synth",
        "3",
        "--epochs",
        "30",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(dir.path().join("limit_study.csv")).unwrap();
    assert!(text.starts_with("trace,simulated_speedup,amdahl_speedup"));
    assert_eq!(text.lines().count(), 4);

    run_ok(&[
        "repro",
        "generalist-vs-specialized",
        "--synth",
        "3",
        "--epochs",
        "30",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(dir.path().join("generalist_vs_specialized.csv")).unwrap();
    assert!(text.contains("generalist-5"));
}

#[test]
fn repro_rejects_unknown_preset_and_empty_trace_dir() {
    let stderr = run_err(&["repro", "everything"]);
    assert!(stderr.contains("everything"), "stderr: {stderr}");
    let dir = tempfile::tempdir().unwrap();
    let stderr = run_err(&[
        "repro",
        "limit-study",
        "--traces",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!stderr.is_empty());
}

#[test]
fn unknown_subcommand_and_missing_args_fail() {
    run_err(&["frobnicate"]);
    run_err(&["coverage"]); // --traces is required
    run_err(&[]);
}

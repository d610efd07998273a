use std::fs;
use std::path::Path;
use std::process::Command;

use bolduc::harness::{mean_std, run_experiment, ExperimentConfig, FunctionKind, MethodKind};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bolduc"))
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

// Replies with the sum of squares of the request coordinates.
const SUM_OF_SQUARES: &str = r#"while read line; do echo "$line" | awk '{ gsub(/[^0-9eE.,+-]/, ""); n = split($0, a, ","); s = 0; for (i = 1; i <= n; i++) s += a[i] * a[i]; printf "{\"y\": %.17g}\n", s }'; done"#;

#[test]
fn budget_equal_to_init_gives_no_acquisitions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let status = bin()
        .args(["--function", "rosenbrock", "--dim", "3", "--budget", "5", "--init", "5", "--trials", "2"])
        .args(["--method", "bold", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let (header, rows) = read_csv(&out);
    assert_eq!(header[..12].join(","), "trial,t,method,y,best_y,simple_regret,log_regret,lsod_size,theta_l,theta_sigma,subspace_id,elapsed_ms");
    assert_eq!(&header[12..], ["x_1", "x_2", "x_3"]);
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r[7] == "0" && r[10] == "-1"));
}

#[test]
fn same_config_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = bin()
            .args(["--function", "ackley", "--dim", "4", "--budget", "16", "--method", "standard,bold,bolduc"])
            .args(["--m", "6", "--trials", "2", "--seed", "11", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        (fs::read(&out).unwrap(), fs::read(dir.path().join(format!("{name}.summary.csv"))).unwrap())
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn trace_invariants_and_summary_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(FunctionKind::Ackley, 4, 20);
    cfg.methods = vec![MethodKind::Bold, MethodKind::Bolduc];
    cfg.m = 8;
    cfg.trials = 3;
    cfg.seed = 5;
    cfg.out = dir.path().join("trace.csv");
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.failed_trials(), 0);

    let (header, rows) = read_csv(&report.trace_path);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (c_trial, c_t, c_method, c_y, c_best, c_lr) =
        (col("trial"), col("t"), col("method"), col("y"), col("best_y"), col("log_regret"));
    assert_eq!(rows.len(), 2 * 3 * 20);

    let mut last: Option<(String, String, f64)> = None;
    for r in &rows {
        let best: f64 = r[c_best].parse().unwrap();
        let key = (r[c_trial].clone(), r[c_method].clone());
        if let Some((trial, method, prev)) = &last {
            if (trial, method) == (&key.0, &key.1) {
                assert!(best <= *prev);
            }
        }
        // native coordinates inside the Ackley box
        for v in &r[12..] {
            let v: f64 = v.parse().unwrap();
            assert!(v.abs() <= 32.768);
        }
        last = Some((key.0, key.1, best));
    }

    // shared initial design: same first N0 values for both methods
    for trial in ["0", "1", "2"] {
        let ys = |m: &str| -> Vec<String> {
            rows.iter()
                .filter(|r| r[c_trial] == trial && r[c_method] == m && r[c_t].parse::<usize>().unwrap() <= 4)
                .map(|r| r[c_y].clone())
                .collect()
        };
        assert_eq!(ys("bold"), ys("bolduc"));
        assert_eq!(ys("bold").len(), 4);
    }

    let (sh, summary) = read_csv(&report.summary_path);
    assert_eq!(sh, ["method", "t", "mean_log_regret", "std_log_regret"]);
    assert_eq!(summary.len(), 2 * 20);
    for s in &summary {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r[c_method] == s[0] && r[c_t] == s[1])
            .map(|r| r[c_lr].parse().unwrap())
            .collect();
        assert_eq!(vals.len(), 3);
        let mean = vals.iter().sum::<f64>() / 3.0;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        assert!((s[2].parse::<f64>().unwrap() - mean).abs() <= 1e-12);
        assert!((s[3].parse::<f64>().unwrap() - std).abs() <= 1e-12);
        let (m2, s2) = mean_std(&vals);
        assert!((m2 - mean).abs() <= 1e-12 && (s2 - std).abs() <= 1e-12);
    }
}

#[test]
fn external_objective_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ext.csv");
    let status = bin()
        .args(["--function", "external", "--dim", "3", "--budget", "12", "--method", "bold"])
        .args(["--lower", "-1", "--upper", "1", "--external-cmd", SUM_OF_SQUARES, "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let (header, rows) = read_csv(&out);
    assert_eq!(rows.len(), 12);
    let x0 = header.iter().position(|h| h == "x_1").unwrap();
    for r in &rows {
        let x: Vec<f64> = r[x0..].iter().map(|v| v.parse().unwrap()).collect();
        let y: f64 = r[3].parse().unwrap();
        let expect: f64 = x.iter().map(|v| v * v).sum();
        assert!((y - expect).abs() <= 1e-12 * expect.max(1.0));
        assert_eq!(r[5], "NaN");
    }
}

#[test]
fn crashed_objective_fails_its_trial_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("crash.csv");
    // answers three requests, then exits
    let script = r#"i=0; while read line; do i=$((i+1)); [ $i -gt 3 ] && exit 1; echo '{"y": 1.0}'; done"#;
    let output = bin()
        .args(["--function", "external", "--dim", "2", "--budget", "8", "--init", "2", "--trials", "2"])
        .args(["--method", "bold", "--external-cmd", script, "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let (_, rows) = read_csv(&out);
    // both trials ran and kept their three observations
    assert_eq!(rows.iter().filter(|r| r[0] == "0").count(), 3);
    assert_eq!(rows.iter().filter(|r| r[0] == "1").count(), 3);
}

#[test]
fn malformed_reply_aborts_with_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad.csv");
    let script = r#"read line; echo '{"y": 2.0}'; read line; echo 'oops'"#;
    let output = bin()
        .args(["--function", "external", "--dim", "2", "--budget", "6", "--init", "3", "--method", "bold"])
        .args(["--external-cmd", script, "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 1);
    assert!(String::from_utf8_lossy(&output.stderr).contains("malformed"));
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let output = bin().args(["--dim", "3", "--budget", "5"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--function"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    let out = dir.path().join("o.csv");
    fs::write(
        &cfg,
        format!(r#"{{"function":"rosenbrock","dim":3,"budget":40,"method":["bold"],"out":{:?}}}"#, out.to_str().unwrap()),
    )
    .unwrap();
    let status = bin().args(["--config"]).arg(&cfg).args(["--budget", "6"]).status().unwrap();
    assert!(status.success());
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 6);
}

#[test]
fn help_exits_cleanly() {
    let output = bin().arg("--help").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.starts_with("Bayesian optimization") && text.contains("--strategy"));
}

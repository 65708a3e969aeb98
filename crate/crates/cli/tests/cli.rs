//! End-to-end checks of the command-line interface: exit codes, config
//! handling, and byte-level determinism of the CSV outputs.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hill-dro"))
}

#[test]
fn table1_reports_all_cases() {
    let out = bin().arg("table1").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1: periodic"));
    assert!(text.contains("362.21"));
    assert!(text.contains("45.145"));
}

#[test]
fn propagate_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for path in [&a, &b] {
        let status = bin()
            .args([
                "propagate",
                "--case",
                "1",
                "--mode",
                "low6",
                "--corrections",
                "6",
                "--prime-convert",
                "--t-end",
                "50",
                "--samples",
                "200",
                "--out",
            ])
            .arg(path)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let (ca, cb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ca, cb, "identical config must produce byte-identical CSV");
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("t,x,y,X,Y,energy,x_C,y_C,r\n"));
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn contour_csv_header_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for path in [&a, &b] {
        let status = bin()
            .args([
                "contour",
                "--phi",
                "45",
                "--q-range",
                "-20:20",
                "--momentum-range",
                "-0.5:0.5",
                "--resolution",
                "41:21",
                "--out",
            ])
            .arg(path)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("q,Q,K\n"));
    assert_eq!(text.lines().count(), 1 + 41 * 21);
}

#[test]
fn unknown_mode_is_config_error() {
    let out = bin()
        .args(["propagate", "--case", "1", "--mode", "warp", "--t-end", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrections_on_truth_model_rejected() {
    let out = bin()
        .args(["propagate", "--case", "1", "--mode", "truth", "--corrections", "6", "--t-end", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_correction_order_rejected() {
    let out = bin()
        .args(["propagate", "--case", "1", "--mode", "low6", "--corrections", "7", "--t-end", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_initial_conditions_rejected() {
    let out = bin().args(["propagate", "--t-end", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn singular_state_is_numerical_error() {
    let out = bin()
        .args(["propagate", "--ic", "0,0,0,0", "--mode", "truth", "--t-end", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_unknown_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "mu = 1.0\nwarp_drive = on\n").unwrap();
    let out = bin()
        .args(["table1", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("warp_drive"));
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "mode = low6\ncorrections = 6\n").unwrap();
    let from_file = dir.path().join("file.csv");
    let status = bin()
        .args(["propagate", "--case", "1", "--t-end", "20", "--samples", "50", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&from_file)
        .status()
        .unwrap();
    assert!(status.success());
    // Same run with the explicit flags and no config file.
    let explicit = dir.path().join("explicit.csv");
    let status = bin()
        .args([
            "propagate",
            "--case",
            "1",
            "--mode",
            "low6",
            "--corrections",
            "6",
            "--t-end",
            "20",
            "--samples",
            "50",
            "--out",
        ])
        .arg(&explicit)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read(&from_file).unwrap(), std::fs::read(&explicit).unwrap());
    // A flag overrides the file value: corrections 9 differs from 6.
    let overridden = dir.path().join("override.csv");
    let status = bin()
        .args([
            "propagate",
            "--case",
            "1",
            "--corrections",
            "9",
            "--t-end",
            "20",
            "--samples",
            "50",
            "--config",
        ])
        .arg(&cfg)
        .args(["--out"])
        .arg(&overridden)
        .status()
        .unwrap();
    assert!(status.success());
    assert_ne!(std::fs::read(&from_file).unwrap(), std::fs::read(&overridden).unwrap());
}

#[test]
fn correct_case1_report() {
    let out = bin().args(["correct", "--case", "1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("iterations:"));
    let eps_line = text.lines().find(|l| l.starts_with("epsilon:")).unwrap();
    let eps: f64 = eps_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(eps <= 1e-12, "reported eps {eps}");
    let iter_line = text.lines().find(|l| l.starts_with("iterations:")).unwrap();
    let iters: usize = iter_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(iters <= 5);
}

#[test]
fn center_track_linear_model_center() {
    // The linear-model ellipse center stays at x_C = -0.2 and drifts in y.
    let out = bin()
        .args([
            "center-track",
            "--ic",
            "0,20,0.5,-0.1",
            "--mode",
            "linear",
            "--t-end",
            "10",
            "--samples",
            "5",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x_C,y_C,q,Q");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    let x_c: f64 = first[1].parse().unwrap();
    let y_c: f64 = first[2].parse().unwrap();
    assert!((x_c - -0.2).abs() < 1e-12);
    assert!((y_c - -21.0).abs() < 1e-12);
}

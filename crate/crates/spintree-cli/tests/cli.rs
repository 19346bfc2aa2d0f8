//! End-to-end tests of the `spintree` binary: exit codes, headers,
//! determinism, and the config-file override order.

use std::path::Path;
use std::process::{Command, Output};

fn spintree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spintree"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn verify_exit_codes_and_count() {
    let out = spintree(&["verify", "--k", "2", "--theta", "0.9"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().last().unwrap().trim(), "3");
    assert!(text.starts_with("# spintree v"));
    assert!(text.contains("# resolved: k=2 theta=0.9"));

    let out = spintree(&["verify", "--k", "3", "--theta", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().last().unwrap().trim(), "1");

    // The boundary coupling counts as the uniqueness regime.
    let out = spintree(&["verify", "--k", "2", "--theta", "0.8333333333333333"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().last().unwrap().trim(), "1");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(
        spintree(&["fixed-points", "--k", "2", "--theta", "1.2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        spintree(&["verify", "--k", "4", "--theta", "0.5"]).status.code(),
        Some(1)
    );
    assert_eq!(spintree(&["verify", "--k", "2"]).status.code(), Some(1));
    assert_eq!(spintree(&["bogus-subcommand"]).status.code(), Some(1));
    assert_eq!(spintree(&["--help"]).status.code(), Some(0));
}

#[test]
fn fixed_points_newton_matches_analytic() {
    let newton = spintree(&[
        "fixed-points",
        "--k",
        "3",
        "--theta",
        "0.8",
        "--method",
        "newton",
        "--format",
        "structured",
    ]);
    assert_eq!(newton.status.code(), Some(0));
    let body: String = stdout(&newton)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let json: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(json["points"].as_array().unwrap().len(), 9);
    assert_eq!(json["count_positive"], 3);
}

#[test]
fn sweep_brackets_threshold_and_emits_csv() {
    let dir = std::env::temp_dir().join("spintree-cli-sweep");
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("sweep.csv");
    let out = spintree(&[
        "sweep",
        "--k",
        "2",
        "--theta-min",
        "0.80",
        "--theta-max",
        "0.86",
        "--step",
        "0.005",
        "--refine",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("threshold bracket: [8.3000"), "{text}");
    let file = std::fs::read_to_string(&csv).unwrap();
    assert!(file.contains("theta,count_positive,x_1,y_1"));
    let estimate_line = file
        .lines()
        .find(|l| l.starts_with("threshold_estimate="))
        .unwrap();
    let estimate: f64 = estimate_line
        .trim_start_matches("threshold_estimate=")
        .parse()
        .unwrap();
    assert!((estimate - 5.0 / 6.0).abs() < 1e-6);
}

#[test]
fn sample_is_deterministic_and_branch_checked() {
    let dir = std::env::temp_dir().join("spintree-cli-sample");
    std::fs::create_dir_all(&dir).unwrap();
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    for path in [&a, &b] {
        let out = spintree(&[
            "sample",
            "--k",
            "2",
            "--theta",
            "0.9",
            "--branch",
            "1",
            "--depth",
            "2",
            "--n",
            "500",
            "--seed",
            "42",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let text = stdout(&out);
        assert!(text.contains("mean_spin,"));
        assert!(text.contains("mean_basis,"));
    }
    let strip = |p: &Path| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# command"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));

    // Only the constant branch exists below the threshold.
    let out = spintree(&[
        "sample", "--k", "2", "--theta", "0.5", "--branch", "1", "--depth", "1", "--n", "10",
        "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn jobs_flag_does_not_change_samples() {
    let dir = std::env::temp_dir().join("spintree-cli-jobs");
    std::fs::create_dir_all(&dir).unwrap();
    let serial = dir.join("serial.csv");
    let parallel = dir.join("parallel.csv");
    for (path, jobs) in [(&serial, "1"), (&parallel, "4")] {
        let out = spintree(&[
            "sample",
            "--k",
            "2",
            "--theta",
            "0.9",
            "--branch",
            "2",
            "--depth",
            "1",
            "--n",
            "400",
            "--seed",
            "9",
            "--jobs",
            jobs,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let strip = |p: &Path| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&serial), strip(&parallel));
}

#[test]
fn dlr_check_passes_and_guards_dimension() {
    for branch in ["0", "1"] {
        let out = spintree(&[
            "dlr-check",
            "--k",
            "2",
            "--theta",
            "0.9",
            "--branch",
            branch,
            "--depth",
            "1",
            "--order",
            "16",
        ]);
        assert_eq!(out.status.code(), Some(0), "branch {branch}");
        assert!(stdout(&out).contains("status=pass"));
    }
    let out = spintree(&[
        "dlr-check", "--k", "3", "--theta", "0.8", "--branch", "0", "--depth", "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn apply_round_trips_a_fixed_density() {
    let dir = std::env::temp_dir().join("spintree-cli-apply");
    std::fs::create_dir_all(&dir).unwrap();
    let input = dir.join("one.csv");
    // The constant density is a fixed point for any coupling.
    let mut body = String::from("t,value\n");
    let n = 17;
    for i in 0..n {
        let w = -(std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
        let t: f64 = if i == 0 {
            0.0
        } else if i == n - 1 {
            1.0
        } else {
            0.5 + 0.5 * w * w * w
        };
        body.push_str(&format!("{t:.17},1.0\n"));
    }
    std::fs::write(&input, body).unwrap();
    let out_path = dir.join("image.csv");
    let out = spintree(&[
        "apply",
        "--k",
        "2",
        "--theta",
        "0.7",
        "--input",
        input.to_str().unwrap(),
        "--residual",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let residual_line = stdout(&out);
    let residual: f64 = residual_line
        .trim()
        .trim_start_matches("residual=")
        .parse()
        .unwrap();
    assert!(residual < 1e-12, "{residual}");
    let image = std::fs::read_to_string(&out_path).unwrap();
    for line in image.lines().filter(|l| !l.starts_with('#') && !l.starts_with("t,")) {
        let value: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((value - 1.0).abs() < 1e-13);
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = std::env::temp_dir().join("spintree-cli-config");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "k=2\ntheta=0.9\n# comment\nunused-key=ignored\n").unwrap();
    let out = spintree(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().last().unwrap().trim(), "3");
    // Flag overrides the config value.
    let out = spintree(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--theta",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().last().unwrap().trim(), "1");
}

use std::path::Path;
use std::process::{Command, Output};

use ibkernel::experiments::validate_moments;
use ibkernel::format::WeightDump;
use ibkernel::kernel::{eval_psi6, tensor_weight};
use ibkernel::WeightFunction;
use tempfile::TempDir;

fn ibkernel(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibkernel"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn read_dump(path: &Path) -> WeightDump {
    WeightDump::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn table_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn circle_case1_table() {
    let dir = TempDir::new().unwrap();
    let out = ibkernel(
        dir.path(),
        &[
            "circle",
            "--case",
            "1",
            "--table",
            "t.csv",
            "--weights",
            "w.csv",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(text.starts_with("marker_deg,rel_error,psi_min,psi_max,eq_residual,mode\n"));
    let rows = table_rows(&dir.path().join("t.csv"));
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!(r[1].parse::<f64>().unwrap() <= 1e-12);
        assert!(r[4].parse::<f64>().unwrap() <= 1e-12);
        assert_eq!(r[5], "Exact");
    }
    let w = std::fs::read_to_string(dir.path().join("w.csv")).unwrap();
    assert!(w.starts_with("x,y,psi,marker_deg\n"));
}

#[test]
fn circle_case3_reports_bounds() {
    let dir = TempDir::new().unwrap();
    let out = ibkernel(dir.path(), &["circle", "--case", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("# bounds [-0.07, 0.5]"));
    for r in table_rows(&dir.path().join("circle_case3_errors.csv")) {
        assert_eq!(r[5], "Exact");
        assert!(r[2].parse::<f64>().unwrap() >= -0.07 - 1e-10);
        assert!(r[3].parse::<f64>().unwrap() <= 0.5 + 1e-10);
    }
}

#[test]
fn circle_case4_reports_phase1_outcome() {
    let dir = TempDir::new().unwrap();
    let out = ibkernel(dir.path(), &["circle", "--case", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.matches("phase-1").count(), 4);
    for r in table_rows(&dir.path().join("circle_case4_errors.csv")) {
        assert!(r[1].parse::<f64>().unwrap() <= 1e-5);
        assert!(r[2].parse::<f64>().unwrap() >= -1e-10);
    }
}

#[test]
fn circle_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    for name in ["a", "b"] {
        let t = format!("{name}_t.csv");
        let w = format!("{name}_w.csv");
        let out = ibkernel(
            dir.path(),
            &["circle", "--case", "2", "--table", &t, "--weights", &w],
        );
        assert_eq!(out.status.code(), Some(0));
    }
    for (a, b) in [("a_t.csv", "b_t.csv"), ("a_w.csv", "b_w.csv")] {
        let a = std::fs::read(dir.path().join(a)).unwrap();
        let b = std::fs::read(dir.path().join(b)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn standard_and_backus_gilbert_agree() {
    let dir = TempDir::new().unwrap();
    for (f, o) in [("standard", "s.json"), ("backus-gilbert", "b.json")] {
        let out = ibkernel(
            dir.path(),
            &[
                "kernel",
                "--formulation",
                f,
                "--eval",
                "0.3,-0.21",
                "--out",
                o,
            ],
        );
        assert_eq!(out.status.code(), Some(0));
    }
    let s = read_dump(&dir.path().join("s.json"));
    let b = read_dump(&dir.path().join("b.json"));
    assert_eq!(s.sites, b.sites);
    for (x, y) in s.psi.iter().zip(&b.psi) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn kernel_at_grid_node_equals_raw_psi6() {
    let dir = TempDir::new().unwrap();
    let out = ibkernel(
        dir.path(),
        &["kernel", "--eval", "0.0875,0.0125", "--out", "k.json"],
    );
    assert_eq!(out.status.code(), Some(0));
    let d = read_dump(&dir.path().join("k.json"));
    let k = d.to_kernel().unwrap();
    let wf = WeightFunction::six_point(0.075).unwrap();
    for (site, psi) in d.sites.iter().zip(&d.psi) {
        assert!((psi - tensor_weight(site, k.eval(), &wf)).abs() <= 1e-12);
    }
    assert!((d.psi.iter().cloned().fold(0.0, f64::max) - eval_psi6(0.0).powi(2)).abs() <= 1e-12);
}

#[test]
fn peskin4_shift_prints_closed_form() {
    let dir = TempDir::new().unwrap();
    let out = ibkernel(
        dir.path(),
        &["kernel", "--formulation", "peskin4", "--shift", "0.5"],
    );
    assert_eq!(out.status.code(), Some(0));
    let d = WeightDump::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let r = 2.0_f64.sqrt();
    let e = [
        (2.0 - r) / 8.0,
        (2.0 + r) / 8.0,
        (2.0 + r) / 8.0,
        (2.0 - r) / 8.0,
    ];
    for (a, b) in d.psi.iter().zip(e) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn validate_accepts_generated_files() {
    let dir = TempDir::new().unwrap();
    let cases: [&[&str]; 3] = [
        &[
            "kernel",
            "--formulation",
            "one-sided",
            "--eval",
            "0.383,0.321",
            "--out",
            "k.json",
        ],
        &[
            "kernel",
            "--formulation",
            "peskin4",
            "--shift",
            "0.3,0.8",
            "--out",
            "k.json",
        ],
        &[
            "kernel",
            "--formulation",
            "peskin4",
            "--eval",
            "0.1,0.2",
            "--out",
            "k.json",
        ],
    ];
    for args in cases {
        assert_eq!(ibkernel(dir.path(), args).status.code(), Some(0));
        let out = ibkernel(dir.path(), &["validate", "k.json", "--tolerance", "1e-12"]);
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert_eq!(out.status.code(), Some(0), "{stdout}");
        if args.contains(&"peskin4") {
            for key in ["even sum", "odd sum", "first moment", "sum of squares"] {
                assert!(stdout.contains(key));
            }
        }
    }
}

#[test]
fn validate_reproduces_in_process_residuals() {
    let dir = TempDir::new().unwrap();
    ibkernel(
        dir.path(),
        &[
            "kernel",
            "--formulation",
            "backus-gilbert",
            "--eval",
            "-0.2,0.44",
            "--out",
            "k.json",
        ],
    );
    let d = read_dump(&dir.path().join("k.json"));
    let k = d.to_kernel().unwrap();
    let expected = validate_moments(&k, k.basis()).unwrap();
    let out = ibkernel(dir.path(), &["validate", "k.json"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    for (j, e) in expected.iter().enumerate() {
        let line = stdout
            .lines()
            .find(|l| l.starts_with(&format!("moment {j}:")))
            .unwrap();
        let v: f64 = line.split(':').nth(1).unwrap().trim().parse().unwrap();
        assert!((v - e).abs() <= 1e-14);
    }
}

#[test]
fn validate_flags_corrupted_weights() {
    let dir = TempDir::new().unwrap();
    ibkernel(
        dir.path(),
        &["kernel", "--eval", "0.383,0.321", "--out", "k.json"],
    );
    let mut d = read_dump(&dir.path().join("k.json"));
    d.psi[3] += 0.01;
    std::fs::write(dir.path().join("bad.json"), d.to_json()).unwrap();
    let out = ibkernel(dir.path(), &["validate", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("moment 0"));
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("junk.json"), "{not json").unwrap();
    assert_eq!(
        ibkernel(dir.path(), &["validate", "junk.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ibkernel(dir.path(), &["validate", "missing.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ibkernel(dir.path(), &["circle", "--case", "7"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ibkernel(dir.path(), &["kernel", "--eval", "0.99,0"])
            .status
            .code(),
        Some(2)
    );
    let out = ibkernel(
        dir.path(),
        &["kernel", "--eval", "0.99,0", "--out", "never.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("never.json").exists());
    assert!(!out.stderr.is_empty());
}

#[test]
fn config_file_is_read_and_flags_win() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("ibkernel.json"),
        r#"{"case": 2, "bogus": 1}"#,
    )
    .unwrap();
    assert_eq!(ibkernel(dir.path(), &["circle"]).status.code(), Some(2));

    std::fs::write(
        dir.path().join("ibkernel.json"),
        r#"{"case": 2, "bounds": {"alpha": 0.0, "beta": 0.75}}"#,
    )
    .unwrap();
    assert_eq!(ibkernel(dir.path(), &["circle"]).status.code(), Some(0));
    assert!(dir.path().join("circle_case2_errors.csv").exists());

    let out = ibkernel(dir.path(), &["circle", "--case", "3", "--bounds=-0.07,0.5"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("# bounds [-0.07, 0.5]"));

    std::fs::write(dir.path().join("other.json"), r#"{"case": 1}"#).unwrap();
    assert_eq!(
        ibkernel(dir.path(), &["--config", "other.json", "circle"])
            .status
            .code(),
        Some(0)
    );
    assert!(dir.path().join("circle_case1_errors.csv").exists());
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qcflow_core::generators::{grid, grid_corners, tetrahedron, torus};
use qcflow_core::mesh::{save_obj, write_obj, HalfedgeMesh};
use serde_json::Value;
use tempfile::TempDir;

fn qcflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn save(dir: &TempDir, name: &str, mesh: &HalfedgeMesh) -> PathBuf {
    let p = path(dir, name);
    save_obj(mesh, None, &p).unwrap();
    p
}

/// OBJ of `mesh` with texture coordinates `(x, y) -> uv(x, y)`.
fn save_mapped(dir: &TempDir, name: &str, mesh: &HalfedgeMesh, uv: impl Fn(f64, f64) -> (f64, f64)) -> PathBuf {
    let mut text = String::new();
    let positions = mesh.positions().unwrap();
    for p in positions {
        writeln!(text, "v {} {} {}", p[0], p[1], p[2]).unwrap();
    }
    for p in positions {
        let (u, v) = uv(p[0], p[1]);
        writeln!(text, "vt {u} {v}").unwrap();
    }
    for f in mesh.faces() {
        writeln!(text, "f {0}/{0} {1}/{1} {2}/{2}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    let p = path(dir, name);
    fs::write(&p, text).unwrap();
    p
}

fn write_mu(dir: &TempDir, name: &str, n: usize, re: f64, im: f64) -> PathBuf {
    let mu: Vec<Value> = (0..n)
        .map(|i| serde_json::json!({ "i": i, "re": re, "im": im }))
        .collect();
    let p = path(dir, name);
    fs::write(&p, serde_json::json!({ "mu": mu }).to_string()).unwrap();
    p
}

fn corners_arg(nx: usize, ny: usize) -> String {
    grid_corners(nx, ny).map(|c| c.to_string()).join(",")
}

#[test]
fn check_reports_tetrahedron() {
    let dir = TempDir::new().unwrap();
    let input = save(&dir, "tet.obj", &tetrahedron());
    let out = qcflow(&["check", "--input", s(&input)]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["chi"], 2);
    assert_eq!(report["boundaries"], 0);
    assert!(report["gauss_bonnet_residual"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn flatten_square_rectangle() {
    let dir = TempDir::new().unwrap();
    let input = save(&dir, "square.obj", &grid(9, 9, 1.0, 1.0));
    let out_obj = path(&dir, "flat.obj");
    let report = path(&dir, "report.json");
    let corners = corners_arg(9, 9);
    let out = qcflow(&[
        "flatten", "--input", s(&input), "--preset", "rectangle", "--corners", &corners,
        "--out", s(&out_obj), "--report", s(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["preset"], "rectangle");
    assert!((report["module"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(fs::read_to_string(&out_obj).unwrap().contains("\nvt "));
}

#[test]
fn flatten_prints_report_without_report_path() {
    let dir = TempDir::new().unwrap();
    let input = save(&dir, "square.obj", &grid(5, 5, 1.0, 1.0));
    let out_obj = path(&dir, "flat.obj");
    let out = qcflow(&["flatten", "--input", s(&input), "--preset", "disk", "--out", s(&out_obj)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["preset"], "disk");
}

#[test]
fn qcmap_with_zero_mu_matches_flatten() {
    let dir = TempDir::new().unwrap();
    let mesh = grid(9, 5, 2.0, 1.0);
    let input = save(&dir, "rect.obj", &mesh);
    let mu = write_mu(&dir, "mu.json", mesh.n_vertices(), 0.0, 0.0);
    let corners = corners_arg(9, 5);
    let flat = path(&dir, "flat.obj");
    let qc = path(&dir, "qc.obj");
    let base = ["--input", s(&input), "--preset", "rectangle", "--corners", &corners];

    let mut args = vec!["flatten"];
    args.extend(base);
    args.extend(["--out", s(&flat)]);
    assert_eq!(code(&qcflow(&args)), 0);

    let mut args = vec!["qcmap"];
    args.extend(base);
    args.extend(["--mu", s(&mu), "--out", s(&qc)]);
    let out = qcflow(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&flat).unwrap(), fs::read(&qc).unwrap());
}

#[test]
fn estimate_recovers_affine_mu() {
    let dir = TempDir::new().unwrap();
    let mesh = grid(6, 6, 1.0, 1.0);
    // w = z + 0.25 conj(z)
    let src = save_mapped(&dir, "src.obj", &mesh, |x, y| (x, y));
    let dst = save_mapped(&dir, "dst.obj", &mesh, |x, y| (1.25 * x, 0.75 * y));
    let mu = path(&dir, "mu.json");
    let hist = path(&dir, "hist.csv");
    let out = qcflow(&[
        "estimate-mu", "--src", s(&src), "--dst", s(&dst), "--out", s(&mu), "--hist", s(&hist),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let field: Value = serde_json::from_str(&fs::read_to_string(&mu).unwrap()).unwrap();
    let entries = field["mu"].as_array().unwrap();
    assert_eq!(entries.len(), 36);
    for e in entries {
        assert!((e["re"].as_f64().unwrap() - 0.25).abs() < 1e-12);
        assert!(e["im"].as_f64().unwrap().abs() < 1e-12);
    }
    let csv = fs::read_to_string(&hist).unwrap();
    assert!(csv.starts_with("vertex,re,im,arg,abs,dilation\n"));
    assert_eq!(csv.lines().count(), 37);
}

#[test]
fn estimate_rejects_reversed_map() {
    let dir = TempDir::new().unwrap();
    let mesh = grid(4, 4, 1.0, 1.0);
    let src = save_mapped(&dir, "src.obj", &mesh, |x, y| (x, y));
    let dst = save_mapped(&dir, "dst.obj", &mesh, |x, y| (x, -y));
    let mu = path(&dir, "mu.json");
    let out = qcflow(&["estimate-mu", "--src", s(&src), "--dst", s(&dst), "--out", s(&mu)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn compose_with_identity_keeps_mu() {
    let dir = TempDir::new().unwrap();
    let mesh = grid(5, 5, 1.0, 1.0);
    let n = mesh.n_vertices();
    let src = save_mapped(&dir, "src.obj", &mesh, |x, y| (x, y));
    let mu_f = write_mu(&dir, "f.json", n, 0.0, 0.0);
    let mu_g = write_mu(&dir, "g.json", n, 0.1, -0.2);
    let out_path = path(&dir, "c.json");
    let out = qcflow(&[
        "compose-mu", "--mu-f", s(&mu_f), "--mu-g", s(&mu_g), "--f-src", s(&src), "--f-dst", s(&src),
        "--out", s(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let field: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    for e in field["mu"].as_array().unwrap() {
        assert!((e["re"].as_f64().unwrap() - 0.1).abs() < 1e-12);
        assert!((e["im"].as_f64().unwrap() + 0.2).abs() < 1e-12);
    }
}

#[test]
fn compare_threshold_sets_exit_code() {
    let dir = TempDir::new().unwrap();
    let mesh = grid(5, 5, 1.0, 1.0);
    let surface = save(&dir, "mesh.obj", &mesh);
    let a = save_mapped(&dir, "a.obj", &mesh, |x, y| (x, y));
    let b = save_mapped(&dir, "b.obj", &mesh, |x, y| (x + 0.01, y));

    let same = qcflow(&["compare", "--a", s(&a), "--b", s(&a), "--mesh", s(&surface)]);
    assert_eq!(code(&same), 0);
    assert_eq!(stdout_json(&same)["distance"], 0.0);

    let near = qcflow(&["compare", "--a", s(&a), "--b", s(&b), "--mesh", s(&surface), "--threshold", "0.1"]);
    assert_eq!(code(&near), 0);
    let distance = stdout_json(&near)["distance"].as_f64().unwrap();
    assert!((distance - 0.01 / 2f64.sqrt()).abs() < 1e-12);

    let far = qcflow(&["compare", "--a", s(&a), "--b", s(&b), "--mesh", s(&surface)]);
    assert_eq!(code(&far), 1);
}

#[test]
fn closed_flat_reports_periods() {
    let dir = TempDir::new().unwrap();
    let input = save(&dir, "torus.obj", &torus(12, 8, 3.0, 1.0));
    let out_obj = path(&dir, "flat.obj");
    let out = qcflow(&["flatten", "--input", s(&input), "--preset", "closed-flat", "--out", s(&out_obj)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let periods = &stdout_json(&out)["periods"];
    assert_eq!(periods["za"].as_array().unwrap().len(), 2);
    assert_eq!(periods["zb"].as_array().unwrap().len(), 2);
}

#[test]
fn validation_failures_exit_one() {
    let dir = TempDir::new().unwrap();
    let closed = save(&dir, "tet.obj", &tetrahedron());
    let out_obj = path(&dir, "out.obj");
    let out = qcflow(&["flatten", "--input", s(&closed), "--preset", "disk", "--out", s(&out_obj)]);
    assert_eq!(code(&out), 1);

    let square = save(&dir, "square.obj", &grid(4, 4, 1.0, 1.0));
    let mu = write_mu(&dir, "mu.json", 16, 0.9, 0.9);
    let out = qcflow(&[
        "qcmap", "--input", s(&square), "--preset", "disk", "--mu", s(&mu), "--out", s(&out_obj),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_and_parse_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let square = save(&dir, "square.obj", &grid(4, 4, 1.0, 1.0));
    let out_obj = path(&dir, "out.obj");

    assert_eq!(code(&qcflow(&[])), 2);
    assert_eq!(code(&qcflow(&["flatten", "--input", s(&square)])), 2);
    assert_eq!(
        code(&qcflow(&["flatten", "--input", s(&square), "--preset", "sphere", "--out", s(&out_obj)])),
        2
    );
    assert_eq!(
        code(&qcflow(&["flatten", "--input", s(&square), "--preset", "rectangle", "--out", s(&out_obj)])),
        2
    );

    let garbage = path(&dir, "bad.obj");
    fs::write(&garbage, "v 0 0\nf 1 2 x\n").unwrap();
    assert_eq!(code(&qcflow(&["check", "--input", s(&garbage)])), 2);
    assert_eq!(code(&qcflow(&["check", "--input", s(&path(&dir, "missing.obj"))])), 2);

    let bad_mu = path(&dir, "mu.json");
    fs::write(&bad_mu, "{\"mu\": [").unwrap();
    let out = qcflow(&[
        "qcmap", "--input", s(&square), "--preset", "disk", "--mu", s(&bad_mu), "--out", s(&out_obj),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn written_obj_round_trips_through_check() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "grid.obj");
    fs::write(&p, write_obj(&grid(3, 3, 1.0, 1.0), None)).unwrap();
    let out = qcflow(&["check", "--input", s(&p)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["boundaries"], 1);
}

#[test]
fn corners_need_four_ids() {
    let dir = TempDir::new().unwrap();
    let square = save(&dir, "square.obj", &grid(4, 4, 1.0, 1.0));
    let out_obj = path(&dir, "out.obj");
    let out = qcflow(&[
        "flatten", "--input", s(&square), "--preset", "rectangle", "--corners", "0,3,15", "--out", s(&out_obj),
    ]);
    assert_eq!(code(&out), 2);
    let out = qcflow(&[
        "flatten", "--input", s(&square), "--preset", "disk", "--corners", "0,3,15,12", "--out", s(&out_obj),
    ]);
    assert_eq!(code(&out), 2);
}

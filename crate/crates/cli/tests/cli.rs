use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_billiard-mc"));
    c.env_remove("BILLIARD_MC_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect()
}

fn sha256_hex(path: &Path) -> String {
    Sha256::digest(fs::read(path).unwrap()).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn validate_table_reports_length_and_curvature() {
    let o = run(&["validate-table", "--table", "ellipse:2,1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // Trapezoid rule on the periodic speed is spectrally accurate.
    let n = 4096;
    let want: f64 = (0..n)
        .map(|i| {
            let u = 2.0 * PI * i as f64 / n as f64;
            (4.0 * u.sin().powi(2) + u.cos().powi(2)).sqrt()
        })
        .sum::<f64>()
        * 2.0
        * PI
        / n as f64;
    assert!((v["length"].as_f64().unwrap() - want).abs() < 1e-8);
    assert!((v["min_curvature"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    assert_eq!(v["convex"], true);
}

#[test]
#[allow(clippy::approx_constant)]
fn simulate_follows_circle_closed_form() {
    let o = run(&[
        "simulate",
        "--table",
        "circle:1",
        "--kernel",
        "example1",
        "--epsilon",
        "1e-9",
        "--steps",
        "5",
        "--init",
        "0,1.0471975512",
        "--seed",
        "1",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("chain,step,s,theta"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let want = (2.0 * r[1] * 1.0471975512).rem_euclid(2.0 * PI);
        let d = (r[2] - want).rem_euclid(2.0 * PI);
        assert!(d.min(2.0 * PI - d) < 1e-5, "step {}: {} vs {want}", r[1], r[2]);
    }
}

#[test]
fn usage_errors_exit_two() {
    let o = run(&["simulate", "--table", "circle:1", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["validate-table", "--table", "torus:1"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--table", "circle:1", "--epsilon", "2"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--table", "circle:1", "--init", "0,4"]).status.code(), Some(2));
    let o = bin().env("BILLIARD_MC_THREADS", "many").args(["validate-table", "--table", "circle:1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn runtime_errors_exit_one() {
    assert_eq!(run(&["validate-table", "--table", "superellipse:1,1,1.5"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("dent.json");
    // r = 1 + 0.5 cos 3φ is star-shaped but not convex.
    fs::write(&spec, r#"{"kind": "polar_fourier", "cos": [1, 0, 0, 0.5]}"#).unwrap();
    assert_eq!(run(&["validate-table", "--table", spec.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn json_table_and_custom_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("t.json");
    fs::write(&spec, r#"{"kind": "ellipse", "semi_axis_a": 2, "semi_axis_b": 1, "resolution": 1024}"#).unwrap();
    let kernel = dir.path().join("k.json");
    // Support [θ/2, (θ + π)/2]: always inside [0, π] with positive length.
    fs::write(&kernel, r#"{"lo": [[0, 0], [3.141592653589793, 1.5707963267948966]], "hi": [[0, 1.5707963267948966], [3.141592653589793, 3.141592653589793]]}"#).unwrap();
    let o = run(&[
        "simulate",
        "--table",
        spec.to_str().unwrap(),
        "--kernel",
        kernel.to_str().unwrap(),
        "--steps",
        "200",
        "--chains",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((0.0..=PI).contains(&v[3]));
    }
    fs::write(&kernel, r#"{"lo": [[0, 0]], "hi": [[0, 0]]}"#).unwrap();
    let o = run(&["simulate", "--table", "circle:1", "--kernel", kernel.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_directory_holds_everything_and_digests_match() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    let o = bin()
        .current_dir(root.path())
        .args(["--out", "run", "simulate", "--table", "ellipse:2,1", "--chains", "5", "--steps", "40", "--init", "nu"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(files(root.path()), BTreeSet::from(["run".to_string()]));
    assert_eq!(files(&out), BTreeSet::from(["manifest.json".to_string(), "trajectories.csv".to_string()]));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 0);
    assert_eq!(m["args"]["init"], "nu");
    assert_eq!(m["defaults"]["grid"], serde_json::json!([32, 32]));
    let rec = &m["outputs"][0];
    assert_eq!(rec["name"], "trajectories.csv");
    assert_eq!(rec["sha256"].as_str().unwrap(), sha256_hex(&out.join("trajectories.csv")));
    let rows = fs::read_to_string(out.join("trajectories.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 5 * 41);
}

#[test]
fn replay_reproduces_and_detects_changes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tv");
    let o = run(&[
        "--out",
        out.to_str().unwrap(),
        "tv-decay",
        "--table",
        "ellipse:2,1",
        "--chains",
        "5000",
        "--n-max",
        "20",
        "--bootstrap",
        "20",
        "--seed",
        "9",
        "--grid",
        "8,8",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = out.join("manifest.json");
    let before = files(&out);
    let o = run(&["--threads", "2", "replay", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches(": match").count(), 2);
    assert_eq!(files(&out), before);

    let again = dir.path().join("again");
    let o = run(&["--out", again.to_str().unwrap(), "replay", manifest.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read(out.join("tv.csv")).unwrap(), fs::read(again.join("tv.csv")).unwrap());

    let mut m = json(&manifest);
    m["args"]["seed"] = 10.into();
    fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();
    let o = run(&["replay", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("MISMATCH"));
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["simulate", "--table", "superellipse:1,1,4", "--chains", "300", "--steps", "20", "--seed", "4"];
    let one = bin().args(["--threads", "1"]).args(args).output().unwrap();
    let four = bin().env("BILLIARD_MC_THREADS", "4").args(["--threads", "1"]).args(args).output().unwrap();
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn file_out_puts_manifest_beside_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sub").join("orbit.csv");
    let o = run(&["--out", path.to_str().unwrap(), "simulate", "--table", "circle:1", "--steps", "3"]);
    assert!(o.status.success());
    assert_eq!(
        files(&dir.path().join("sub")),
        BTreeSet::from(["orbit.csv".to_string(), "orbit.manifest.json".to_string()])
    );
}

#[test]
fn reachability_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "reachability",
        "--table",
        "circle:1",
        "--start",
        "0,1",
        "--grid",
        "16,16",
        "--band",
        "16,8",
    ]);
    assert!(o.status.success());
    assert_eq!(
        files(dir.path()),
        ["coverage.csv", "manifest.json", "mask.pgm", "mask.svg", "reachability.json"].map(String::from).into()
    );
    let v = json(&dir.path().join("reachability.json"));
    let n_full = v["n_full"].as_u64().unwrap() as usize;
    assert_eq!(v["final_coverage"], 1.0);
    let cert = &v["band_certificate"];
    assert_eq!(cert["holds"], true);
    assert!((cert["c1"].as_f64().unwrap() - 0.15).abs() < 1e-9);
    let coverage = fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
    assert_eq!(coverage.lines().count(), n_full + 2);
    let pgm = fs::read(dir.path().join("mask.pgm")).unwrap();
    let header = b"P5\n16 16\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert!(pgm[header.len()..].iter().all(|&p| p == 0));
}

#[test]
fn density_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "density",
        "--table",
        "ellipse:2,1",
        "--start",
        "0,1",
        "--grid",
        "16,16",
    ]);
    assert!(o.status.success());
    let v = json(&dir.path().join("density.json"));
    assert!((v["total_mass"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    let csv = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 256);
    let positive = csv.lines().skip(1).filter(|l| l.split(',').nth(4).unwrap().parse::<f64>().unwrap() > 0.0).count();
    assert!(positive > 0 && positive < 256);
}

#[test]
fn stationary_and_doeblin_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let st = dir.path().join("st");
    let o = run(&[
        "--out",
        st.to_str().unwrap(),
        "stationary",
        "--table",
        "circle:1",
        "--chains",
        "100",
        "--burn-in",
        "10",
        "--samples",
        "10",
        "--grid",
        "8,8",
        "--bootstrap",
        "10",
    ]);
    assert!(o.status.success());
    let v = json(&st.join("stationary.json"));
    assert_eq!(v["samples"], 1000);
    let masses: f64 = fs::read_to_string(st.join("stationary.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(6).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((masses - 1.0).abs() < 1e-12);

    let db = dir.path().join("db");
    let o = run(&[
        "--out",
        db.to_str().unwrap(),
        "doeblin",
        "--table",
        "ellipse:2,1",
        "--n",
        "3",
        "--probes",
        "0,1;2,2",
        "--chains",
        "2000",
        "--grid",
        "8,8",
    ]);
    assert!(o.status.success());
    let v = json(&db.join("doeblin.json"));
    assert_eq!(v["n"], 3);
    assert_eq!(v["n_full"], serde_json::Value::Null);
    // Three steps of ε = 0.3 cannot reach θ near π from θ = 1.
    assert_eq!(v["b_hat"], 0.0);
    assert_eq!(fs::read_to_string(db.join("doeblin.csv")).unwrap().lines().count(), 3);
}

#[test]
fn phase_portrait_svg() {
    let o = run(&[
        "phase-portrait",
        "--table",
        "ellipse:2,1",
        "--chains",
        "3",
        "--steps",
        "99",
        "--thin",
        "10",
        "--init",
        "nu",
    ]);
    assert!(o.status.success());
    let svg = stdout(&o);
    assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), 3 * 10);
    assert_eq!(run(&["phase-portrait", "--table", "circle:1", "--thin", "0"]).status.code(), Some(2));
}

#[test]
fn stdout_mode_skips_secondary_outputs() {
    let o = run(&["reachability", "--table", "circle:1", "--grid", "8,8"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("generation,coverage,cells\n"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mask.pgm"));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rpl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpl"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("spawn rpl")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn generate_writes_uniform_rows_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = rpl(d.path(), &["generate", "--kind", "cantor", "--depth", "4", "--seed", "9"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = fs::read_to_string(a.path().join("measure.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4096);
    for r in &rows {
        let w: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(w, 1.0 / 4096.0);
    }
    for f in ["measure.csv", "measure.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn validation_and_io_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&rpl(d.path(), &["generate", "--depth", "0"])), 2);
    assert_eq!(code(&rpl(d.path(), &["sweep", "--input", "/nonexistent/m.csv"])), 3);
    assert_eq!(code(&rpl(d.path(), &["sweep", "--t", "1.5", "--input", "x.csv"])), 2);
    assert_eq!(code(&rpl(d.path(), &["bounds", "--s", "4"])), 2);
    fs::write(d.path().join("bad.toml"), "[sweep]\nthet_count = 3\n").unwrap();
    let cfg = d.path().join("bad.toml");
    assert_eq!(code(&rpl(d.path(), &["--config", cfg.to_str().unwrap(), "bounds"])), 2);
}

#[test]
fn single_atom_sweep_writes_zero_dims() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("atom.csv");
    fs::write(&input, "x1,x2,r,w\n0.0,0.0,0.75,1.0\n").unwrap();
    let o = rpl(d.path(), &["sweep", "--input", input.to_str().unwrap(), "--theta-count", "64", "--svg"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 65);
    for line in csv.lines().skip(1) {
        let dim: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(dim, 0.0);
    }
    assert!(fs::read_to_string(d.path().join("sweep.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn cantor_sweep_reports_the_sharp_bound() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&rpl(d.path(), &["generate", "--depth", "5"])), 0);
    let input = d.path().join("measure.csv");
    let o = rpl(d.path(), &["sweep", "--input", input.to_str().unwrap(), "--theta-count", "64", "--finest", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(json["bounds"]["new"].as_f64(), Some(1.5));
    assert_eq!(json["s_nominal"].as_f64(), Some(1.5));
}

#[test]
fn multiplicity_and_tangency_commands() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&rpl(d.path(), &["generate", "--depth", "3"])), 0);
    let input = d.path().join("measure.csv");
    let input = input.to_str().unwrap();

    let o = rpl(d.path(), &["multiplicity", "--input", input, "--kappa", "10", "--deltas", "0.125,0.0625", "--theta-samples", "64", "--points"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("multiplicity.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
    // δ^(s−κ) exceeds 1, which no tube mass reaches
    assert_eq!(json[0]["Z_mass"].as_f64(), Some(0.0));
    assert_eq!(json[0]["histogram"].as_array().unwrap().len(), 64);
    let pts = fs::read_to_string(d.path().join("multiplicity_points_0.csv")).unwrap();
    assert!(pts.starts_with("x1,x2,r,w,h\n"));
    assert_eq!(pts.lines().count(), 513);

    let o = rpl(d.path(), &["tangency", "--input", input, "--deltas", "0.0625"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("partition ok"));
    let csv = fs::read_to_string(d.path().join("tangency.csv")).unwrap();
    assert!(csv.starts_with("delta,tau,pairs,mass\n"));
    assert_eq!(csv.lines().count(), 1 + 5);
}

#[test]
fn verify_passes_and_fault_fails() {
    let d = tempfile::tempdir().unwrap();
    let small = ["--conjugation-samples", "2000", "--implication-samples", "2000", "--window-pairs", "300"];
    let mut args = vec!["verify"];
    args.extend(small);
    let o = rpl(d.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("calibrated window constant C"));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("verify.json")).unwrap()).unwrap();
    for c in rep["checks"].as_array().unwrap() {
        if c["name"].as_str().unwrap().starts_with("conjugation") {
            assert!(c["value"].as_f64().unwrap() <= 1e-12);
        }
    }
    args.push("--inject-fault");
    let o = rpl(d.path(), &args);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL] tube implies tangency"));
}

#[test]
fn config_file_supplies_defaults() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    fs::write(&cfg, "seed = 4\n\n[generate]\nkind = \"plane\"\nper_side = 40\nname = \"plane.csv\"\n").unwrap();
    let o = rpl(d.path(), &["--config", cfg.to_str().unwrap(), "generate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("plane.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"].as_u64(), Some(4));
    assert_eq!(meta["count"].as_u64(), Some(1600));
    // flags win over the file
    let o = rpl(d.path(), &["--config", cfg.to_str().unwrap(), "generate", "--per-side", "10"]);
    assert_eq!(code(&o), 0);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("plane.json")).unwrap()).unwrap();
    assert_eq!(meta["count"].as_u64(), Some(100));
}

#[test]
fn probe3_and_bounds_outputs() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&rpl(d.path(), &["probe3"])), 0);
    let p: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("probe3.json")).unwrap()).unwrap();
    let n = p["solution_cells"].as_array().unwrap().len();
    assert!((1..=4).contains(&n));
    assert_eq!(code(&rpl(d.path(), &["bounds", "--grid", "13"])), 0);
    let csv = fs::read_to_string(d.path().join("bounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 14);
}

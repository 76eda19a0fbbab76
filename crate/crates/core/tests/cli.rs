use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polykin"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn schema(name: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(root().join("schemas").join(name)).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, instance: &Value) {
    if let Err(e) = v.validate(instance) {
        panic!("schema violation: {e}\n{instance}");
    }
}

fn stdout_lines(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn check_reference_gas_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["check", "--delta", "2.017", "--zeta", "0.537", "--hyp", "H2,H3"]);
    assert_eq!(o.status.code(), Some(0));
    let lines = stdout_lines(&o);
    let v = schema("verdict.schema.json");
    for l in &lines {
        assert_valid(&v, l);
    }
    assert_eq!(lines[0]["hypothesis"], "H2");
    assert_eq!(lines[0]["satisfied"], true);
    assert_eq!(lines[1]["hypothesis"], "H3");
    assert_eq!(lines[1]["satisfied"], false);

    let o = run(dir.path(), &["check", "--delta", "3", "--zeta", "0.5", "--hyp", "H3"]);
    assert_eq!(stdout_lines(&o)[0]["satisfied"], true);

    let o = run(dir.path(), &["check", "--delta", "3", "--zeta", "0.5", "--hyp", "H6,H7,H4,H5,H1", "--delta2", "2.5"]);
    assert_eq!(o.status.code(), Some(0));
    for l in stdout_lines(&o) {
        assert_valid(&v, &l);
    }
}

#[test]
fn check_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["check", "--delta", "3", "--zeta", "0.5", "--hyp", "H9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("H9"));
    assert_eq!(run(dir.path(), &["check", "--delta", "x", "--zeta", "0.5"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["check", "--delta", "NaN", "--zeta", "0.5"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn diag_k2_verdicts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let v = schema("diag_summary.schema.json");
    let o = run(dir.path(), &["diag", "--kind", "k2", "--delta", "3", "--zeta", "0.5", "--seed", "5", "--out", "a.csv"]);
    assert_eq!(o.status.code(), Some(0));
    let s = &stdout_lines(&o)[0];
    assert_valid(&v, s);
    assert_eq!(s["verdict"], "integrable");
    let o2 = run(dir.path(), &["diag", "--kind", "k2", "--delta", "3", "--zeta", "0.5", "--seed", "5", "--out", "b.csv"]);
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with(b"# seed=5\nepsilon,partial_integral\n"));
    let strip = |o: &Output| String::from_utf8_lossy(&o.stdout).replace("b.csv", "a.csv");
    assert_eq!(strip(&o), strip(&o2));

    let o = run(dir.path(), &["diag", "--kind", "k2", "--delta", "2.017", "--zeta", "0.537"]);
    assert_eq!(stdout_lines(&o)[0]["verdict"], "divergent");
    assert!(dir.path().join("k2_diag.csv").exists());
}

#[test]
fn diag_k1norm_and_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["diag", "--kind", "k1norm", "--delta", "3", "--zeta", "0.5", "--grid", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let s = &stdout_lines(&o)[0];
    assert_valid(&schema("diag_summary.schema.json"), s);
    assert!(s["hs_norm"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("k1_norms.csv")).unwrap();
    assert!(csv.starts_with("# seed=0\nnode_index,v,I,k1_row_norm\n"));

    let o = run(
        dir.path(),
        &["diag", "--kind", "k2", "--delta", "3", "--zeta", "0.5", "--out", "missing/dir/x.csv"],
    );
    assert_eq!(o.status.code(), Some(3));
}

fn write_config(dir: &Path, name: &str, counts: usize, t_kin: f64, t_int: f64, t_end: f64) -> PathBuf {
    let text = format!(
        r#"{{
  "model": {{
    "species": [{{"label": "A", "mass": 1.0, "energy": {{"kind": "continuous", "delta": 2.0}}}}],
    "kernels": [[{{"kind": "power_law_e", "C": 1.0, "zeta": 0.0}}]]
  }},
  "init": {{"counts": [{counts}], "t_kin": {t_kin}, "t_int": {t_int}}},
  "relax": {{"dt": 0.05, "t_end": {t_end}, "seed": 3, "majorant_samples": 50000}}
}}"#
    );
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn relax_energy_budget_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", 30_000, 2.0, 1.0, 4.0);
    let config_schema = schema("relax_config.schema.json");
    let config: Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    assert_valid(&config_schema, &config);
    for bundled in ["relax_delta2.json", "relax_equilibrium.json"] {
        let text = std::fs::read_to_string(root().join("configs").join(bundled)).unwrap();
        assert_valid(&config_schema, &serde_json::from_str(&text).unwrap());
    }

    let o = run(dir.path(), &["relax", "run.json", "--out-dir", "a"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = &stdout_lines(&o)[0];
    assert_valid(&schema("relax_summary.schema.json"), s);
    let t_eq = s["t_eq"].as_f64().unwrap();
    assert!((t_eq - 1.6).abs() < 0.02 * 1.6, "{s}");
    assert!(s["equipartition_gap"].as_f64().unwrap() <= 0.02, "{s}");
    let written: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(&written, s);

    let o = run(dir.path(), &["relax", "run.json", "--out-dir", "b"]);
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read(dir.path().join("a/timeseries.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/timeseries.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with(b"# seed=3\nt,T_kin,T_int,mean_I,H,collisions\n"));

    let o = run(dir.path(), &["relax", "run.json", "--out-dir", "c", "--seed", "4", "--t-end", "0.5"]);
    let csv = std::fs::read_to_string(dir.path().join("c/timeseries.csv")).unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(csv.starts_with("# seed=4\n"));
}

#[test]
fn relax_equilibrium_start() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "eq.json", 20_000, 1.0, 1.0, 1.0);
    let o = run(dir.path(), &["relax", "eq.json"]);
    assert_eq!(o.status.code(), Some(0));
    let s = &stdout_lines(&o)[0];
    assert!(s["equipartition_gap"].as_f64().unwrap() < 0.03, "{s}");
    assert!(dir.path().join("timeseries.csv").exists());
}

#[test]
fn relax_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["relax", "nope.json"]).status.code(), Some(3));

    std::fs::write(dir.path().join("bad.json"), r#"{"model": {}, "init": {}}"#).unwrap();
    assert_eq!(run(dir.path(), &["relax", "bad.json"]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "extra.json", 100, 1.0, 1.0, 1.0);
    let text = std::fs::read_to_string(&cfg).unwrap().replace("\"seed\": 3", "\"seed\": 3, \"bogus\": 1");
    std::fs::write(&cfg, text).unwrap();
    assert!(!schema("relax_config.schema.json").is_valid(&serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap()));
    assert_eq!(run(dir.path(), &["relax", "extra.json"]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "tight.json", 5000, 1.0, 1.0, 0.5);
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("\"majorant_samples\": 50000", "\"majorant_samples\": 50000, \"majorant_safety\": 0.3, \"max_violation_rate\": 0.001");
    std::fs::write(&cfg, text).unwrap();
    let o = run(dir.path(), &["relax", "tight.json"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("majorant"));
}

#[test]
fn table1_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["table1", "--export-dir", "data"]);
    assert_eq!(o.status.code(), Some(0));
    let s = &stdout_lines(&o)[0];
    assert_valid(&schema("fit_summary.schema.json"), s);
    let rows = s["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let gases: std::collections::BTreeSet<&str> = rows.iter().map(|r| r["gas"].as_str().unwrap()).collect();
    assert_eq!(gases.len(), 4);
    for v in s["verdicts"].as_array().unwrap() {
        let h2_expected = v["gas"] != "H2";
        assert_eq!(v["H2"], h2_expected, "{v}");
        assert_eq!(v["H3"], false);
    }
    let csv = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("delta_fit,delta_half_width,zeta_fit"));
    assert!(csv.contains("delta_ref,zeta_ref,zeta_chapman_cowling"));

    let manifest = dir.path().join("data/manifest.json");
    assert_valid(
        &schema("manifest.schema.json"),
        &serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap(),
    );
    let o = run(dir.path(), &["fit", "--manifest", "data/manifest.json", "--out", "fit.csv"]);
    assert_eq!(o.status.code(), Some(0));
    let s = &stdout_lines(&o)[0];
    assert_valid(&schema("fit_summary.schema.json"), s);
    assert!((s["rows"][0]["delta_fit"].as_f64().unwrap() - 2.017).abs() < 1e-12);
}

#[test]
fn bundled_data_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    let shipped = root().join("data");
    let o = run(dir.path(), &["fit", "--manifest", shipped.join("manifest.json").to_str().unwrap(), "--out", "r.csv"]);
    assert_eq!(o.status.code(), Some(0));
    run(dir.path(), &["table1", "--out", "t.csv"]);
    let fit = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let table = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(fit, table);
}

#[test]
fn fit_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["fit", "--manifest", "absent.json"]).status.code(), Some(3));
    std::fs::write(dir.path().join("m.json"), r#"{"units": {"temperature": "K"}, "datasets": []}"#).unwrap();
    assert_eq!(run(dir.path(), &["fit", "--manifest", "m.json"]).status.code(), Some(2));
    std::fs::write(
        dir.path().join("m2.json"),
        r#"{"units": {"temperature": "K", "viscosity": "Pa s"}, "datasets": [{"gas": "N2", "pressure_bar": 1.0, "cv": "x.csv", "viscosity": "y.csv"}]}"#,
    )
    .unwrap();
    assert_eq!(run(dir.path(), &["fit", "--manifest", "m2.json"]).status.code(), Some(3));
}

#[test]
fn thread_cap_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let outputs: Vec<Vec<u8>> = ["1", "3"]
        .iter()
        .map(|t| {
            bin()
                .current_dir(dir.path())
                .env("POLYKIN_THREADS", t)
                .args(["check", "--delta", "2.5", "--zeta", "0.2", "--hyp", "H3"])
                .output()
                .unwrap()
                .stdout
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    let o = bin()
        .current_dir(dir.path())
        .env("POLYKIN_THREADS", "zero")
        .args(["check", "--delta", "2.5", "--zeta", "0.2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

//! End-to-end tests of the `anls` binary.

use std::path::Path;
use std::process::{Command, Output};

use anls::snapshot;
use serde_json::Value;

fn anls(args: &[&str], env_root: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_anls"));
    cmd.args(args).env_remove("ANLS_OUTPUT_DIR");
    if let Some(root) = env_root {
        cmd.env("ANLS_OUTPUT_DIR", root);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&o.stderr)))
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn ground_state_writes_snapshot_sidecar_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gs");
    let o = anls(
        &["ground-state", "--p", "4", "--omega", "1", "--nx", "128", "--ny", "128", "--output-dir", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("residual_l2"));
    let side = json_file(&out.join("ground_state.json"));
    assert!(side["summary"]["residual_l2"].as_f64().unwrap() < 1e-8);
    let poh = &side["summary"]["pohozaev"];
    for k in ["r1", "r2", "r3"] {
        assert!(poh[k].as_f64().unwrap().abs() < 1e-6);
    }
    let snap = snapshot::read_snapshot(&out.join("ground_state.anls")).unwrap();
    assert_eq!(std::fs::metadata(out.join("ground_state.anls")).unwrap().len(), 40 + 16 * 128 * 128);
    assert_eq!((snap.grid().nx(), snap.grid().ny()), (128, 128));
    let manifest = json_file(&out.join("manifest.json"));
    assert_eq!(manifest["experiment"], "ground-state");
    assert_eq!(manifest["config"]["model"]["p"], 4.0);
    assert_eq!(manifest["config"]["grid"]["nx"], 128);
    assert_eq!(manifest["config"]["rng_seed"], 0);
    assert!(manifest["config"]["solver"].is_object());
}

#[test]
fn gn_constant_prints_c_opt_and_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = anls(&["gn-constant", "--p", "4.6667", "--nx", "128", "--ny", "128", "--output-dir", dir.path().to_str().unwrap()], None);
    assert!(o.status.success());
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{key}:"))).unwrap();
        line.split(':').nth(1).unwrap().trim().parse().unwrap()
    };
    let c_opt = value("c_opt");
    assert!((value("c_star") - (7.0 / (3.0 * c_opt)).powf(0.375)).abs() < 1e-12);
    assert!((c_opt - 0.17619).abs() < 1e-3);
}

#[test]
fn zero_field_evolution_has_identically_zero_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let o = anls(
        &["evolve", "--initial", "zero", "--nx", "32", "--ny", "32", "--t-max", "0.05", "--dt", "0.01", "--stride", "1", "--output-dir", dir.path().to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,mass,energy,q,k,virial,h12_norm,boundary_mass_fraction");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        assert!(row.split(',').skip(1).all(|c| c == "0.0000000000000000e0"), "{row}");
    }
    assert!(!csv.contains('\r'));
    let outcome = json_file(&dir.path().join("outcome.json"));
    assert_eq!(outcome["status"], "completed");
}

#[test]
fn csv_floats_carry_17_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let o = anls(
        &["evolve", "--p", "3", "--nx", "64", "--ny", "64", "--lx", "30", "--ly", "30", "--t-max", "0.02", "--snapshot-times", "0.01", "--output-dir", dir.path().to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    for cell in csv.lines().skip(1).flat_map(|l| l.split(',')) {
        let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
        cell.parse::<f64>().unwrap();
    }
    assert!(dir.path().join("snapshot_0000.anls").exists());
    assert!(dir.path().join("final.anls").exists());
}

#[test]
fn distinct_exit_codes_with_machine_readable_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let unknown = anls(&["run", "--experiment", "nope", "--output-dir", d], None);
    let grid = anls(&["evolve", "--nx", "100", "--output-dir", d], None);
    let params = anls(&["evolve", "--p", "1.5", "--output-dir", d], None);
    let file = dir.path().join("file");
    std::fs::write(&file, "x").unwrap();
    let unwritable = anls(&["evolve", "--output-dir", file.join("sub").to_str().unwrap()], None);
    let codes: Vec<i32> = [&unknown, &grid, &params, &unwritable].iter().map(|o| o.status.code().unwrap()).collect();
    assert_eq!(codes, vec![4, 5, 6, 7]);
    let kinds: Vec<Value> = [&unknown, &grid, &params, &unwritable].iter().map(|o| error_json(o)["error"]["kind"].clone()).collect();
    assert_eq!(kinds, ["unknown_experiment", "invalid_grid", "invalid_params", "output_dir_unwritable"]);
}

#[test]
fn config_file_errors_point_at_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, "{\n  \"experiment\": \"evolve\",\n  \"grid\": {\"nx\": 64, \"nyy\": 64}\n}\n").unwrap();
    let o = anls(&["run", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    let msg = error_json(&o)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("nyy") && msg.contains("line 3"), "{msg}");
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"experiment": "evolve", "model": {{"p": 5}}, "grid": {{"nx": 32, "ny": 32, "lx": 20, "ly": 20}},
               "evolve": {{"dt": 0.01, "t_max": 0.05}}, "initial": {{"kind": "zero"}}, "output_dir": "{}"}}"#,
            out.display()
        ),
    )
    .unwrap();
    let o = anls(&["run", "--config", cfg.to_str().unwrap(), "--p", "3"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = json_file(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["model"]["p"], 3.0);
    assert_eq!(manifest["config"]["grid"]["nx"], 32);
    assert_eq!(manifest["config"]["evolve"]["t_max"], 0.05);
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = anls(&["symmetry-report", "--p", "3", "--nx", "64", "--ny", "64", "--lx", "30", "--ly", "30"], Some(dir.path()));
    assert!(o.status.success());
    assert!(dir.path().join("symmetry-report").join("manifest.json").exists());
    let sym = json_file(&dir.path().join("symmetry-report").join("symmetry.json"));
    assert!(sym["x_reflection"].as_f64().unwrap() < 1e-10);
}

#[test]
fn blowup_scan_records_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = anls(
        &[
            "blowup-scan", "--p-list", "3,6", "--amplitudes", "0.5,2.5", "--nx", "64", "--ny", "64", "--lx", "30", "--ly", "30",
            "--t-max", "0.05", "--workers", "2", "--output-dir", dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("phase_table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "p,amplitude,status,t_final,energy,mass,membership,blowup_signal,error");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 3.0);
    assert_eq!(rows[3][1].parse::<f64>().unwrap(), 2.5);
    // p = 6 with A = 2.5 has negative energy
    assert!(rows[3][4].parse::<f64>().unwrap() < 0.0);
    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        assert!(dir.path().join(format!("cell_{i:02}_{j:02}.csv")).exists());
    }
}

#[test]
fn help_lists_every_experiment() {
    let o = anls(&["--help"], None);
    assert!(o.status.success());
    let text = stdout(&o);
    for e in anls::experiments::Experiment::ALL {
        assert!(text.contains(e.name()), "{}", e.name());
    }
}

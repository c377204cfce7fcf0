use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn small_problem(family: &str) -> Value {
    json!({
        "family": family,
        "a": 1.0, "b": 2.0, "c": 0.0,
        "alpha": 0.01, "beta": 1.0, "q": 0.75,
        "y": 1.0, "dt": 0.03125, "n": 2048, "dx": 0.25, "ds": 0.125,
        "plots": false
    })
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn exec(&self, subcommand: &str, config: &Value, out: &str, extra: &[&str]) -> Output {
        let config_path = self.path(&format!("{out}.json"));
        std::fs::write(&config_path, serde_json::to_string(config).unwrap()).unwrap();
        Command::new(env!("CARGO_BIN_EXE_cauchy"))
            .arg(subcommand)
            .arg("--config")
            .arg(&config_path)
            .arg("--out")
            .arg(self.path(out))
            .args(extra)
            .output()
            .unwrap()
    }
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn values(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn zero_data_gives_zero_field_bundle() {
    let run = Run::new();
    let out = run.exec("solve", &small_problem("zero"), "zero", &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["u", "u_x", "u_xx", "u_t"] {
        let v = values(&run.path("zero").join(format!("{name}.csv")));
        assert_eq!(v.len(), 5 * 2048);
        assert!(v.iter().all(|x| *x == 0.0), "{name}");
    }
    assert_eq!(manifest(&run.path("zero"))["result"]["w_norm"], json!(0.0));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let run = Run::new();
    let mut config = small_problem("prod-exp");
    config["plots"] = json!(true);
    for out in ["first", "second"] {
        assert!(run.exec("solve", &config, out, &[]).status.success());
    }
    for name in ["u.csv", "u_x.csv", "u_xx.csv", "u_t.csv", "u_slices.svg", "stability.svg"] {
        let a = std::fs::read(run.path("first").join(name)).unwrap();
        let b = std::fs::read(run.path("second").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn configuration_errors_are_listed_together() {
    let run = Run::new();
    let mut config = small_problem("prod-exp");
    config["a"] = json!(-1.0);
    config["q"] = json!(1.2);
    config["n"] = json!(1000);
    let out = run.exec("solve", &config, "bad", &[]);
    assert_eq!(out.status.code(), Some(2));
    let message = stderr(&out);
    assert!(message.contains("coefficient a"), "{message}");
    assert!(message.contains("q must lie"), "{message}");
    assert!(message.contains("power of two"), "{message}");
    assert!(!run.path("bad").exists());
}

#[test]
fn unknown_keys_and_missing_inputs_are_input_errors() {
    let run = Run::new();
    let mut config = small_problem("prod-exp");
    config["alhpa"] = json!(1.0);
    assert_eq!(run.exec("solve", &config, "typo", &[]).status.code(), Some(2));

    let mut config = small_problem("prod-exp");
    config.as_object_mut().unwrap().remove("family");
    config["input_g0"] = json!("missing_g0.csv");
    config["input_g1"] = json!("missing_g1.csv");
    let out = run.exec("solve", &config, "missing", &[]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("missing_g0.csv"));
}

#[test]
fn strict_q_rejects_irrational_looking_exponent() {
    let run = Run::new();
    let mut config = small_problem("prod-exp");
    config["q"] = json!(std::f64::consts::FRAC_1_SQRT_2);
    assert!(run.exec("solve", &config, "lenient", &[]).status.success());
    let out = run.exec("solve", &config, "strict", &["--strict-q"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("rational"));
}

#[test]
fn raw_mode_on_noisy_data_aborts_with_blowup_code() {
    let run = Run::new();
    let mut config = small_problem("prod-exp");
    config["dt"] = json!(1.0 / 1024.0);
    config["n"] = json!(1 << 15);
    config["noise_level"] = json!(0.01);
    config["seed"] = json!(3);
    config["mode"] = json!("raw");
    let out = run.exec("solve", &config, "raw", &[]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("ill-posed blowup"));

    config["mode"] = json!("premollified");
    config["alpha"] = json!(1.0);
    let out = run.exec("solve", &config, "mollified", &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let error = manifest(&run.path("mollified"))["result"]["error_vs_reference"]["u"]
        .as_f64()
        .unwrap();
    assert!(error < 5e-2, "{error}");
}

#[test]
fn manufactured_files_reproduce_the_family_solve() {
    let run = Run::new();
    let config = small_problem("sine-packet");
    assert!(run.exec("manufacture", &config, "data", &[]).status.success());
    assert!(run.exec("solve", &config, "family", &[]).status.success());

    let data = run.path("data");
    let mut from_files = config.clone();
    let object = from_files.as_object_mut().unwrap();
    object.remove("family");
    object.remove("ds");
    object.insert("input_g0".into(), json!(data.join("g0.csv")));
    object.insert("input_g1".into(), json!(data.join("g1.csv")));
    object.insert("input_f".into(), json!(data.join("f.csv")));
    let out = run.exec("solve", &from_files, "files", &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["u.csv", "u_x.csv", "u_xx.csv", "u_t.csv"] {
        let a = std::fs::read(run.path("family").join(name)).unwrap();
        let b = std::fs::read(run.path("files").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    let exact = values(&data.join("u_exact.csv"));
    assert_eq!(exact.len(), 5 * 2048);
}

#[test]
fn source_depth_must_cover_the_strip() {
    let run = Run::new();
    let config = small_problem("prod-exp");
    assert!(run.exec("manufacture", &config, "data", &[]).status.success());
    let data = run.path("data");
    let mut deeper = config.clone();
    let object = deeper.as_object_mut().unwrap();
    object.remove("family");
    object.insert("y".into(), json!(2.0));
    object.insert("input_g0".into(), json!(data.join("g0.csv")));
    object.insert("input_g1".into(), json!(data.join("g1.csv")));
    object.insert("input_f".into(), json!(data.join("f.csv")));
    let out = run.exec("solve", &deeper, "deep", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("source depth"));
}

#[test]
fn shifted_solve_undamps_to_the_original_frame() {
    let run = Run::new();
    let mut config = small_problem("sine-packet");
    config["ds"] = json!(1.0 / 64.0);
    config["b"] = json!(0.0);
    config["c"] = json!(1.0);
    let out = run.exec("solve", &config, "unshifted", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("shift"));

    config["shift"] = json!(2.0);
    config["output_t_max"] = json!(3.0);
    assert_eq!(run.exec("solve", &config, "low_beta", &[]).status.code(), Some(2));
    config["beta"] = json!(3.0);
    let out = run.exec("solve", &config, "shifted", &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = manifest(&run.path("shifted"));
    assert_eq!(m["solved_coefficients"]["c"], json!(-1.0));
    assert!(m["result"]["error_vs_reference"]["u"].as_f64().unwrap() < 1e-2);
    let text = std::fs::read_to_string(run.path("shifted").join("u.csv")).unwrap();
    let rows: Vec<[f64; 3]> = text
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect();
    assert_eq!(rows.len(), 5 * 97);
    // Closed form of the default sine packet in the original frame.
    let exact: Vec<f64> = rows.iter().map(|[x, t, _]| ((-t).exp() - (-2.0 * t).exp()) * x.sin()).collect();
    let got: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let error = cauchy_core::spectral::relative_l2(&got, &exact);
    assert!(error < 5e-2, "{error}");
}

#[test]
fn mollify_reports_class_membership() {
    let run = Run::new();
    let series = run.path("v.csv");
    let mut text = String::from("t,value\n");
    for j in 0..1024 {
        let t = j as f64 / 32.0;
        text.push_str(&format!("{t},{}\n", t * (-t).exp()));
    }
    std::fs::write(&series, text).unwrap();
    let config = json!({ "alpha": 1.0, "beta": 1.0, "q": 0.75, "input_series": series });
    let out = run.exec("mollify", &config, "smooth", &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = manifest(&run.path("smooth"));
    assert_eq!(m["class_diagnostic"]["mollified"]["in_class"], json!(true));
    assert_eq!(m["class_diagnostic"]["input"]["in_class"], json!(false));
    let smoothed = values(&run.path("smooth").join("mollified.csv"));
    assert_eq!(smoothed.len(), 1024);
    assert!(m["l2_norm"]["mollified"].as_f64() <= m["l2_norm"]["input"].as_f64());
}

#[test]
fn probe_matches_library_and_handles_empty_grid() {
    let run = Run::new();
    let mut config = json!({
        "a": 1.0, "b": 0.0, "c": -1.0,
        "alpha": 1.0, "beta": 1.0, "q": 0.75,
        "probe_x": 1.0, "omega_grid": [10000.0]
    });
    assert!(run.exec("probe", &config, "probe", &[]).status.success());
    let text = std::fs::read_to_string(run.path("probe").join("probe.csv")).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let expected = 5000f64.sqrt();
    assert!((row[1] - expected).abs() < 2f64.ln(), "{row:?}");
    assert!(row[2] < 0.0);

    config["omega_grid"] = json!([]);
    assert!(run.exec("probe", &config, "empty", &[]).status.success());
    let text = std::fs::read_to_string(run.path("empty").join("probe.csv")).unwrap();
    assert_eq!(text, "omega0,raw_gain_log,regularized_gain_log\n");
}

#[test]
fn alpha_study_rows_match_solve_and_data_error_decreases() {
    let run = Run::new();
    let mut config = small_problem("prod-exp");
    config["alpha_list"] = json!([1.0, 0.1, 0.01, 0.001]);
    let out = run.exec("alpha-study", &config, "study", &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(run.path("study").join("alpha_study.csv")).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 4);
    let data_error: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(data_error.windows(2).all(|w| w[1] < w[0]), "{data_error:?}");
    assert!(rows.iter().all(|r| r[5] == "ok"));

    config["alpha_list"] = json!([0.01]);
    assert!(run.exec("alpha-study", &config, "single", &[]).status.success());
    assert!(run.exec("solve", &config, "solve", &[]).status.success());
    let text = std::fs::read_to_string(run.path("single").join("alpha_study.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let result = &manifest(&run.path("solve"))["result"];
    assert_eq!(row[1].parse::<f64>().unwrap(), result["data_error"].as_f64().unwrap());
    assert_eq!(row[2].parse::<f64>().unwrap(), result["error_vs_reference"]["u"].as_f64().unwrap());
    assert_eq!(row[3].parse::<f64>().unwrap(), result["error_vs_truth"]["u"].as_f64().unwrap());
    assert_eq!(row[4].parse::<f64>().unwrap(), result["stability_ratio"].as_f64().unwrap());
}

#[test]
fn bundled_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let config = cauchy_cli::config::RunConfig::load(&path).unwrap();
        let ok = match path.file_stem().unwrap().to_str().unwrap() {
            "probe" => cauchy_cli::config::probe_setup(&config, false).is_ok(),
            "alpha_study" => cauchy_cli::config::study_setup(&config, false).is_ok(),
            _ => cauchy_cli::config::solve_setup(&config, false).is_ok(),
        };
        assert!(ok, "{}", path.display());
        count += 1;
    }
    assert!(count >= 3);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qce_cli::config::{ExperimentConfig, FixedPointTag, Model, RunType, StateSpec};
use qce_cli::presets::{preset, PRESET_NAMES};
use qce_cli::RunManifest;
use qce_core::classical::SectionResult;
use qce_core::entanglement::{EntropySeries, PowerSpectrum};
use qce_core::spectral::SupportSpectrum;

fn qce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qce")).args(args).output().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn presets_are_listed_and_valid() {
    let out = qce(&["list-presets"]);
    assert!(out.status.success());
    let listed: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(listed, PRESET_NAMES);
    let dir = tempfile::tempdir().unwrap();
    for name in PRESET_NAMES {
        let c = preset(name).unwrap();
        let path = dir.path().join(format!("{name}.toml"));
        fs::write(&path, c.to_toml().unwrap()).unwrap();
        let v = qce(&["validate", path.to_str().unwrap()]);
        assert!(v.status.success(), "{name}: {}", String::from_utf8_lossy(&v.stderr));
        assert_eq!(String::from_utf8(v.stdout).unwrap().trim(), c.hash());
    }
}

#[test]
fn config_round_trips_through_toml() {
    let mut c = ExperimentConfig::new(Model::Qkt, RunType::Analyze);
    c.states = vec![StateSpec::tagged("e", FixedPointTag::Elliptic), StateSpec::point("p", 0.0, 0.0, 1.0, -2.0)];
    c.analysis.truncate_top = Some(3);
    c.classical.energy = Some(-280.0);
    let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
    let mut moved = c.clone();
    moved.output_dir = "elsewhere".into();
    assert_eq!(moved.hash(), c.hash());
    moved.qkt.kappa = 2.0;
    assert_ne!(moved.hash(), c.hash());
    assert!(ExperimentConfig::from_toml("model = \"qkt\"\nrun_type = \"entropy\"\nbogus = 1\n").is_err());
}

#[test]
fn untwisted_top_stays_unentangled() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = qce(&["run", "--model", "qkt", "--kappa", "0", "--p-rot", "1.5707963", "--j", "10", "--type", "entropy", "--t-end", "50", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let series = EntropySeries::from_csv(&fs::read_to_string(out.join("entropy_elliptic.csv")).unwrap()).unwrap();
    assert_eq!(series.times.len(), 51);
    assert_eq!(series.metadata.time_units, "kicks");
    assert!(series.values.iter().all(|s| s.abs() < 1e-12));
}

#[test]
fn invalid_config_exits_two_and_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = qce(&["run", "--model", "qkt", "--type", "entropy", "--j=-3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(record["error"], "config");
    assert_eq!(record["exit_code"], 2);
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "model = \"qkt\"\nrun_type = \"nonsense\"\n").unwrap();
    assert_eq!(qce(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(qce(&["preset", "nope"]).status.code(), Some(2));
}

#[test]
fn classical_run_on_quantum_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = qce(&["run", "--model", "qkt", "--type", "lyapunov", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn qkt_analyze_outputs_parse_and_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = preset("fig6_qkt_entropy").unwrap();
    c.time.t_end = Some(120.0);
    c.output_dir = dir.path().join("a");
    let m = qce_cli::run(&c).unwrap();
    let mut on_disk: Vec<String> = fs::read_dir(&c.output_dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    on_disk.sort();
    let mut listed = m.outputs.clone();
    listed.push("manifest.json".into());
    listed.sort();
    assert_eq!(on_disk, listed);
    assert_eq!(manifest(&c.output_dir), m);
    assert_eq!(m.config_hash, c.hash());

    for label in ["elliptic", "chaotic"] {
        let read = |name: String| fs::read_to_string(c.output_dir.join(name)).unwrap();
        let s = EntropySeries::from_csv(&read(format!("entropy_{label}.csv"))).unwrap();
        assert_eq!(s.values.len(), 121);
        assert!(s.values.iter().all(|v| (0.0..=0.75 + 1e-12).contains(v)));
        EntropySeries::from_csv(&read(format!("entropy_{label}_top3.csv"))).unwrap();
        let p = PowerSpectrum::from_csv(&read(format!("power_{label}.csv"))).unwrap();
        assert!(!p.frequencies.is_empty());
        let a: serde_json::Value = serde_json::from_str(&read(format!("analysis_{label}.json"))).unwrap();
        assert!(a["spectral_flatness"].as_f64().unwrap() > 0.0);
        let t: serde_json::Value = serde_json::from_str(&read(format!("truncation_{label}.json"))).unwrap();
        assert_eq!(t["kept"], 3);
        if label == "elliptic" {
            // S peaks after one kick, leaving too few points for a rise fit.
            assert!(!c.output_dir.join("fits_elliptic.json").exists());
            assert!(m.warnings.iter().any(|w| w.starts_with("elliptic: rise fit skipped")));
            continue;
        }
        let fits: serde_json::Value = serde_json::from_str(&read(format!("fits_{label}.json"))).unwrap();
        let fits = fits.as_array().unwrap();
        assert_eq!(fits.len(), 2);
        assert_eq!(fits.iter().filter(|f| f["preferred"] == true).count(), 1);
        for f in fits {
            for key in ["model", "params", "residual", "window"] {
                assert!(!f[key].is_null(), "{key}");
            }
        }
    }
}

#[test]
fn qkt_support_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = qce(&["preset", "fig5_qkt_support", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let support = SupportSpectrum::from_csv(&fs::read_to_string(out.join("support_elliptic.csv")).unwrap()).unwrap();
    assert_eq!(support.populations.len(), 51);
    assert!((support.total() - 1.0).abs() < 1e-10);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("support_elliptic.json")).unwrap()).unwrap();
    assert_eq!(summary["top"].as_array().unwrap().len(), 3);
    let spectrum = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(spectrum.starts_with("# eigenvalue_units=rad\nindex,eigenvalue\n"));
    assert_eq!(spectrum.lines().count(), 2 + 51);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |d: &str| {
        vec!["run", "--model", "qkt", "--type", "analyze", "--j", "12", "--theta", "2.2", "--phi", "-3.0", "--t-end", "80", "--out"]
            .into_iter()
            .map(String::from)
            .chain([dir.path().join(d).to_string_lossy().into_owned()])
            .collect::<Vec<_>>()
    };
    for d in ["x", "y"] {
        let a = args(d);
        assert!(qce(&a.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
    }
    let (mx, my) = (manifest(&dir.path().join("x")), manifest(&dir.path().join("y")));
    assert_eq!(mx.config_hash, my.config_hash);
    assert_eq!(mx.outputs, my.outputs);
    for f in &mx.outputs {
        assert_eq!(fs::read(dir.path().join("x").join(f)).unwrap(), fs::read(dir.path().join("y").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn classical_section_output_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = preset("fig1_sections").unwrap();
    c.states.truncate(1);
    c.classical.n_crossings = 10;
    c.classical.t_max = 200.0;
    c.output_dir = dir.path().to_path_buf();
    let m = qce_cli::run(&c).unwrap();
    assert!(m.outputs.contains(&"section_mu_y_s0.csv".to_string()));
    let text = fs::read_to_string(dir.path().join("section_mu_y_s0.csv")).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], SectionResult::CSV_HEADER);
    assert_eq!(body.len(), 11);
    assert!(text.contains("# energy=-2.8"));
}

#[test]
fn lyapunov_run_reports_each_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::new(Model::Amol, RunType::Lyapunov);
    c.amol.spin_scale = "full".into();
    c.classical.lyapunov_time = 100.0;
    c.states = vec![qce_cli::presets::amol_chaotic()];
    c.output_dir = dir.path().to_path_buf();
    qce_cli::run(&c).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("lyapunov.json")).unwrap()).unwrap();
    assert_eq!(v["states"][0]["label"], "chaotic");
    assert!(v["states"][0]["exponent"].as_f64().unwrap() > 0.0);
}

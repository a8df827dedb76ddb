use landau_delta::disorder::{derive_seed, sample_field, DisorderLaw, LatticeSite};
use landau_delta::lattice_operator::single_impurity_levels;
use landau_delta_cli::config::{RunConfig, Stage, WindowShape};
use landau_delta_cli::manifest::{RunManifest, MANIFEST_FILE};
use proptest::prelude::*;
use std::fs;
use std::path::Path;
use std::process::Command;

fn config(stage: Stage, out: &Path) -> RunConfig {
    RunConfig {
        command: stage,
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

/// Rows of a CSV file as maps from column name to text.
fn read_csv(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    lines
        .map(|l| {
            header
                .iter()
                .cloned()
                .zip(l.split(',').map(str::to_string))
                .collect()
        })
        .collect()
}

fn num(row: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn config_round_trips(kappa in 0.1f64..20.0, seed in any::<u64>(), radius in 0.0f64..9.0,
                          bands in (0u32..4, 0u32..4), square in any::<bool>(), s in 0.05f64..0.95,
                          eps in prop::collection::vec(1e-6f64..1.0, 1..4), gamma in prop::option::of(0.0f64..1.0)) {
        let mut cfg = RunConfig {
            kappa, seed, radius,
            first_band: bands.0.min(bands.1),
            last_band: bands.0.max(bands.1),
            window: if square { WindowShape::Square } else { WindowShape::Disk },
            ..RunConfig::default()
        };
        cfg.moments.s = s;
        cfg.moments.gamma = gamma;
        cfg.moments.epsilons = eps;
        let back: RunConfig = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    assert!(serde_json::from_str::<RunConfig>(r#"{"kapa": 2.0}"#).is_err());
    let partial: RunConfig =
        serde_json::from_str(r#"{"kappa": 2.0, "moments": {"s": 0.5}}"#).unwrap();
    assert_eq!(partial.kappa, 2.0);
    assert_eq!(partial.moments.params().gamma, 0.25);
}

#[test]
fn single_site_spectrum_matches_impurity_levels() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(Stage::Spectrum, dir.path());
    cfg.radius = 0.0;
    landau_delta_cli::run(&cfg).unwrap();
    let omega = sample_field(derive_seed(cfg.seed, 0), 0.0, DisorderLaw::default())
        .unwrap()
        .omega(&LatticeSite::ORIGIN)
        .unwrap();
    let levels = single_impurity_levels(omega, 0..=3);
    let rows = read_csv(&dir.path().join("spectrum.csv"));
    assert_eq!(rows.len(), 4);
    for (row, level) in rows.iter().zip(&levels) {
        match level.log_neg_lambda {
            Some(s) => assert!((num(row, "log_neg_lambda") - s).abs() <= 1e-9 * s.abs().max(1.0)),
            None => assert!((num(row, "lambda") - level.lambda).abs() <= 1e-9),
        }
    }
}

#[test]
fn localization_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let mut cfg = config(Stage::Localization, &dir.path().join(name));
        cfg.moments.trials = 16;
        cfg.moments.epsilons = vec![1e-2, 1e-3];
        landau_delta_cli::run(&cfg).unwrap().outputs
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn bands_contain_every_spectrum_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(Stage::Spectrum, &dir.path().join("spectrum"));
    cfg.fields = 20;
    cfg.radius = 1.5;
    landau_delta_cli::run(&cfg).unwrap();
    cfg.command = Stage::Bands;
    cfg.out = dir.path().join("bands");
    landau_delta_cli::run(&cfg).unwrap();

    let bands = read_csv(&cfg.out.join("bands.csv"));
    let eigen = read_csv(&dir.path().join("spectrum/spectrum.csv"));
    assert_eq!(eigen.len(), 20 * 9 * 4);
    for row in &eigen {
        let inside = bands.iter().filter(|b| b["band"] == row["band"]).any(|b| {
            let (lo, hi) = (num(b, "inflated_lower"), num(b, "inflated_upper"));
            let l = num(row, "lambda");
            let direct = l >= lo - 1e-9 && l <= hi + 1e-9;
            // Deep roots may overflow; compare ln(−λ) with ln(−upper).
            let deep = lo == f64::NEG_INFINITY
                && !row["log_neg_lambda"].is_empty()
                && num(row, "log_neg_lambda") >= (-hi).ln() - 1e-9;
            direct || deep
        });
        assert!(
            inside,
            "eigenvalue {row:?} outside every interval of its band"
        );
    }
}

#[test]
fn failed_run_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // A directory in place of a later output makes the stage fail after its first write.
    fs::create_dir(dir.path().join("specfun.csv")).unwrap();
    let err = landau_delta_cli::run(&config(Stage::Specfun, dir.path())).unwrap_err();
    assert!(format!("{err:#}").contains("specfun.csv"));
    assert!(!dir.path().join("digamma.csv").exists());
    assert!(!dir.path().join(MANIFEST_FILE).exists());
    assert!(dir.path().exists());
}

#[test]
fn invalid_configuration_creates_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let mut cfg = config(Stage::Localization, &out);
    cfg.radius = 0.5;
    let err = landau_delta_cli::run(&cfg).unwrap_err();
    assert!(format!("{err:#}").contains("--radius"));
    assert!(!out.exists());
}

#[test]
fn replay_detects_changed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = landau_delta_cli::run(&config(Stage::Bands, &dir.path().join("run"))).unwrap();
    let loaded = RunManifest::load(&dir.path().join("run").join(MANIFEST_FILE)).unwrap();
    assert_eq!(loaded, manifest);
    assert!(landau_delta_cli::replay(&loaded, &dir.path().join("again"))
        .unwrap()
        .is_empty());

    let mut tampered = loaded.clone();
    tampered.outputs[0].sha256 = "0".repeat(64);
    let diffs = landau_delta_cli::replay(&tampered, &dir.path().join("third")).unwrap();
    assert_eq!(diffs.len(), 1);
    assert_eq!(diffs[0].file, tampered.outputs[0].file);
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_landau-delta"))
}

#[test]
fn binary_reports_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = binary()
        .args(["bands", "--kappa", "-1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--kappa must be a positive number"));
}

#[test]
fn binary_writes_manifest_and_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let out = binary()
        .args(["regularity", "--seed", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.seed, 3);
    let stdout = String::from_utf8_lossy(&out.stdout);
    for o in &manifest.outputs {
        assert!(stdout.contains(&o.sha256));
    }
    let replay = binary()
        .arg("replay")
        .arg(dir.path().join(MANIFEST_FILE))
        .arg("--out")
        .arg(dir.path().join("r"))
        .output()
        .unwrap();
    assert!(
        replay.status.success(),
        "{}",
        String::from_utf8_lossy(&replay.stdout)
    );
}

#[test]
fn specfun_eval_prints_value() {
    let out = binary()
        .args(["specfun", "eval", "digamma", "--lambda", "-0.5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let expect = -0.577_215_664_901_532_9 - 2.0 * std::f64::consts::LN_2;
    assert!((v["value"]["re"].as_f64().unwrap() - expect).abs() < 1e-14);
}

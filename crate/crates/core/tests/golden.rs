//! Regression against a frozen calibration run. Regenerate with
//! `UPDATE_GOLDEN=1 cargo test -p sparsepce --test golden`.

use serde_json::Value;
use sparsepce::cs::CsConfig;
use sparsepce::study::{run_study, StudyConfig, StudyKind};
use std::path::PathBuf;

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Numbers agree to 1e-9 relative; everything else exactly.
fn assert_close(got: &Value, want: &Value, at: &str) {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            assert!(
                (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300),
                "{at}: {a} vs {b}"
            );
        }
        (Value::Array(a), Value::Array(b)) => {
            assert_eq!(a.len(), b.len(), "{at}: length");
            for (k, (x, y)) in a.iter().zip(b).enumerate() {
                assert_close(x, y, &format!("{at}[{k}]"));
            }
        }
        (Value::Object(a), Value::Object(b)) => {
            assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>(), "{at}: keys");
            for (k, x) in a {
                assert_close(x, &b[k], &format!("{at}.{k}"));
            }
        }
        _ => assert_eq!(got, want, "{at}"),
    }
}

fn check(name: &str, report: String) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &report).unwrap();
    }
    let want: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let got: Value = serde_json::from_str(&report).unwrap();
    assert_close(&got, &want, name);
}

#[test]
fn vary_c_small_instance() {
    let mut config = StudyConfig::new(StudyKind::VaryC, vec![0.2, 1.0]);
    config.dim = 3;
    config.order = 3;
    config.n_train = 15;
    config.n_validation = 2000;
    config.n_reference = 20_000;
    config.n_moments = 20_000;
    config.bootstrap = 200;
    config.cs = Some(CsConfig::default());
    check(
        "vary_c_k3_p3_n15.json",
        run_study(&config, Some(2)).unwrap().to_json().unwrap(),
    );
}

#[test]
fn vary_n_small_instance() {
    let mut config = StudyConfig::new(StudyKind::VaryN, vec![15.0, 40.0]);
    config.dim = 4;
    config.order = 3;
    config.n_validation = 2000;
    config.n_reference = 20_000;
    config.n_moments = 20_000;
    config.bootstrap = 200;
    check(
        "vary_n_k4_p3.json",
        run_study(&config, Some(2)).unwrap().to_json().unwrap(),
    );
}

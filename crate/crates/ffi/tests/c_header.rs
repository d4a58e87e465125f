use std::path::{Path, PathBuf};
use std::process::Command;

use soit2fnn::clustering::Normalizer;
use soit2fnn::fuzzy::It2Mf;
use soit2fnn::network::{Ablation, NetworkParams};
use soit2fnn::Model;

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().map(|o| o.status.success()).unwrap_or(false)
}

#[test]
fn header_declares_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/soit2fnn.h")).unwrap();
    for sym in [
        "soit2fnn_model_load",
        "soit2fnn_model_free",
        "soit2fnn_model_predict",
        "soit2fnn_model_dims",
        "soit2fnn_last_error",
        "typedef struct Soit2fnnModel Soit2fnnModel",
        "SOIT2FNN_STATUS_OK = 0",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}

#[test]
fn c_program_links_and_predicts() {
    let lib = target_dir().join("libsoit2fnn_ffi.a");
    if !have_cc() || !lib.exists() {
        eprintln!("skipping: cc or {} unavailable", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let mut p = NetworkParams::empty(2, 2, 0.2, Ablation::default());
    p.push_rule(&[It2Mf::new(0.2, 0.3, 0.4), It2Mf::new(0.5, 0.6, 0.3)], &[0.1, 0.2, 0.3, -0.1, 0.4, 0.2], &[0.05; 6]);
    let model = Model::new(p, Normalizer::from_bounds(vec![0.0, 0.0], vec![2.0, 4.0]).unwrap(), Normalizer::from_bounds(vec![0.0; 2], vec![2.0; 2]).unwrap());
    let model_path = dir.path().join("model.json");
    model.save(&model_path).unwrap();

    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).arg(&model_path).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    let got: Vec<f64> = text.split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(got, model.predict_raw(&[0.7, 1.9]).unwrap());
}

use std::ffi::{CStr, CString};
use std::ptr;

use soit2fnn::clustering::Normalizer;
use soit2fnn::fuzzy::It2Mf;
use soit2fnn::network::{Ablation, NetworkParams};
use soit2fnn::Model;
use soit2fnn_ffi::*;

fn sample_model() -> Model {
    let mut p = NetworkParams::empty(2, 2, 0.2, Ablation::default());
    p.push_rule(&[It2Mf::new(0.2, 0.3, 0.4), It2Mf::new(0.5, 0.6, 0.3)], &[0.1, 0.2, 0.3, -0.1, 0.4, 0.2], &[0.05; 6]);
    p.push_rule(&[It2Mf::new(0.7, 0.8, 0.2), It2Mf::new(0.1, 0.2, 0.5)], &[0.3, -0.2, 0.1, 0.2, 0.1, 0.0], &[0.01; 6]);
    Model::new(p, Normalizer::from_bounds(vec![0.0, 0.0], vec![2.0, 4.0]).unwrap(), Normalizer::from_bounds(vec![0.0; 2], vec![2.0; 2]).unwrap())
}

fn last_error() -> String {
    let p = soit2fnn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(model: &Model) -> *mut Soit2fnnModel {
    let json = CString::new(model.to_json().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { soit2fnn_model_from_json(json.as_ptr(), &mut handle) }, Soit2fnnStatus::Ok);
    assert!(!handle.is_null());
    handle
}

#[test]
fn predict_matches_library() {
    let model = sample_model();
    let h = load(&model);
    let (mut n, mut m, mut k) = (0, 0, 0);
    assert_eq!(unsafe { soit2fnn_model_dims(h, &mut n, &mut m, &mut k) }, Soit2fnnStatus::Ok);
    assert_eq!((n, m, k), (2, 2, 2));
    let x = [0.7, 1.9];
    let mut y = [0.0; 2];
    assert_eq!(unsafe { soit2fnn_model_predict(h, x.as_ptr(), 2, y.as_mut_ptr(), 2) }, Soit2fnnStatus::Ok);
    assert_eq!(y.to_vec(), model.predict_raw(&x).unwrap());

    let (mut lo, mut up) = ([0.0; 2], [0.0; 2]);
    assert_eq!(unsafe { soit2fnn_model_firing(h, x.as_ptr(), 2, lo.as_mut_ptr(), up.as_mut_ptr(), 2) }, Soit2fnnStatus::Ok);
    assert!(lo.iter().zip(&up).all(|(l, u)| *l > 0.0 && l <= u));
    unsafe { soit2fnn_model_free(h) };
}

#[test]
fn shape_mismatch_reports_error() {
    let h = load(&sample_model());
    let x = [0.1; 3];
    let mut y = [0.0; 2];
    assert_eq!(unsafe { soit2fnn_model_predict(h, x.as_ptr(), 3, y.as_mut_ptr(), 2) }, Soit2fnnStatus::Shape);
    assert!(last_error().contains("expected 2"));
    unsafe { soit2fnn_model_free(h) };
}

#[test]
fn null_and_parse_errors() {
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { soit2fnn_model_from_json(ptr::null(), &mut handle) }, Soit2fnnStatus::NullPointer);
    let bad = CString::new("{\"format\": 1}").unwrap();
    assert_eq!(unsafe { soit2fnn_model_from_json(bad.as_ptr(), &mut handle) }, Soit2fnnStatus::Parse);
    assert!(handle.is_null());
    let missing = CString::new("/nonexistent/model.json").unwrap();
    assert_eq!(unsafe { soit2fnn_model_load(missing.as_ptr(), &mut handle) }, Soit2fnnStatus::Io);
    unsafe { soit2fnn_model_free(ptr::null_mut()) };
}

#[test]
fn save_and_reload() {
    let model = sample_model();
    let h = load(&model);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { soit2fnn_model_save(h, path.as_ptr()) }, Soit2fnnStatus::Ok);
    let mut h2 = ptr::null_mut();
    assert_eq!(unsafe { soit2fnn_model_load(path.as_ptr(), &mut h2) }, Soit2fnnStatus::Ok);
    assert_eq!(Model::load(dir.path().join("m.json")).unwrap(), model);
    unsafe {
        soit2fnn_model_free(h);
        soit2fnn_model_free(h2);
    }
}

#[test]
fn mackey_glass_and_grad_check() {
    let mut out = vec![0.0; 100];
    assert_eq!(unsafe { soit2fnn_mackey_glass(30.0, 1.0, 0.1, 1, 100, out.as_mut_ptr()) }, Soit2fnnStatus::Ok);
    assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-9));
    assert_eq!(unsafe { soit2fnn_mackey_glass(30.0, 1.2, 0.3, 1, 100, out.as_mut_ptr()) }, Soit2fnnStatus::Config);

    let (mut passed, mut err) = (0, 0.0);
    assert_eq!(unsafe { soit2fnn_grad_check(7, 5, &mut passed, &mut err) }, Soit2fnnStatus::Ok);
    assert_eq!(passed, 1);
    assert!(err < 1e-4);
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(soit2fnn_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

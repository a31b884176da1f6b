use std::ffi::CStr;
use std::ptr;

use cyclic_esn::{cv_objective, CvConfig, ScrParams, Task};
use cyclic_esn_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cesn_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn sine_task(n: usize) -> (Vec<f64>, Vec<f64>) {
    let s: Vec<f64> = (0..=n).map(|t| (0.3 * t as f64).sin()).collect();
    (s[..n].to_vec(), s[1..].to_vec())
}

#[test]
fn model_lifecycle() {
    let p = CesnParams {
        n_nodes: 40,
        w_in: 0.5,
        w: 0.8,
        lambda: 1e-8,
    };
    let (u, y) = sine_task(400);
    let mut model: *mut CesnModel = ptr::null_mut();
    unsafe {
        assert_eq!(cesn_model_new(&p, &mut model), CesnStatus::Ok);
        assert!(!model.is_null());

        let mut out = vec![0.0; 400];
        assert_eq!(cesn_model_predict(model, u.as_ptr(), u.len(), out.as_mut_ptr()), CesnStatus::NotFitted);
        assert!(last_error().contains("readout"));

        assert_eq!(cesn_model_fit(model, u.as_ptr(), y.as_ptr(), u.len(), 50), CesnStatus::Ok);
        assert_eq!(cesn_model_predict(model, u.as_ptr(), u.len(), out.as_mut_ptr()), CesnStatus::Ok);
        let mut score = f64::NAN;
        assert_eq!(cesn_nmse(y[50..].as_ptr(), out[50..].as_ptr(), 350, &mut score), CesnStatus::Ok);
        assert!(score < 1e-4, "{score}");

        let mut weights = vec![0.0; 41];
        let mut written = 0usize;
        assert_eq!(cesn_model_readout(model, weights.as_mut_ptr(), 10, &mut written), CesnStatus::BufferTooSmall);
        assert_eq!(written, 41);
        assert_eq!(cesn_model_readout(model, weights.as_mut_ptr(), 41, &mut written), CesnStatus::Ok);
        assert!(weights.iter().any(|w| *w != 0.0));
        cesn_model_free(model);
        cesn_model_free(ptr::null_mut());
    }
}

#[test]
fn error_codes() {
    let bad = CesnParams {
        n_nodes: 0,
        w_in: 0.5,
        w: 0.8,
        lambda: 0.0,
    };
    let mut model: *mut CesnModel = ptr::null_mut();
    unsafe {
        assert_eq!(cesn_model_new(&bad, &mut model), CesnStatus::InvalidParameter);
        assert!(model.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(cesn_model_new(ptr::null(), &mut model), CesnStatus::NullPointer);
        let mut v = 0.0;
        let y = [1.0, 1.0, 1.0];
        assert_eq!(cesn_nmse(y.as_ptr(), y.as_ptr(), 3, &mut v), CesnStatus::DegenerateSeries);
        let mut buf = vec![0.0; 4];
        assert_eq!(cesn_gen_mackey_glass(-1.0, 4, 0.0, 0, buf.as_mut_ptr()), CesnStatus::InvalidParameter);
        let t = [0.0, 2.0];
        let pr = [1.0, 1.0];
        assert_eq!(cesn_nmse(t.as_ptr(), pr.as_ptr(), 2, &mut v), CesnStatus::Ok);
        assert_eq!(v, 1.0);
        assert!(last_error().is_empty());
    }
}

#[test]
fn cv_objective_matches_library() {
    let (u, y) = sine_task(300);
    let p = CesnParams {
        n_nodes: 30,
        w_in: 0.2,
        w: 0.7,
        lambda: 1e-6,
    };
    let mut v = f64::NAN;
    unsafe {
        assert_eq!(cesn_cv_objective(&p, u.as_ptr(), y.as_ptr(), u.len(), 4, 50, &mut v), CesnStatus::Ok);
    }
    let expected = cv_objective(
        &ScrParams::new(30, 0.2, 0.7, 1e-6).unwrap(),
        &Task::new(u, y).unwrap(),
        &CvConfig::new(4, 50).unwrap(),
    )
    .unwrap();
    assert_eq!(v, expected);
}

#[test]
fn generators_and_optimizer() {
    let n = 400;
    let mut s = vec![0.0; n];
    let mut y = vec![0.0; n];
    unsafe {
        assert_eq!(cesn_gen_narma(10, n, 3, s.as_mut_ptr(), y.as_mut_ptr()), CesnStatus::Ok);
    }
    assert_eq!(y[0], 0.1);
    assert!(s.iter().all(|v| *v > 0.0 && *v < 0.5));

    let mut best = CesnParams {
        n_nodes: 0,
        w_in: 0.0,
        w: 0.0,
        lambda: 0.0,
    };
    let mut value = f64::NAN;
    let mut evals = 0usize;
    unsafe {
        let st = cesn_optimize(
            s.as_ptr(),
            y.as_ptr(),
            n,
            3,
            50,
            6,
            12,
            f64::NAN,
            5,
            &mut best,
            &mut value,
            &mut evals,
        );
        assert_eq!(st, CesnStatus::Ok, "{}", last_error());
    }
    assert!((6..=12).contains(&evals));
    assert!((50..=200).contains(&best.n_nodes));
    assert!(value.is_finite());
}

use std::ffi::{c_char, CString};
use std::ptr;

use uinfc_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe { uinfc_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf.iter().take_while(|c| **c != 0).map(|c| *c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn norm_clf_value_and_envelope() {
    let mut clf = ptr::null_mut();
    assert_eq!(unsafe { uinfc_norm_clf_new(1, 0.5, &mut clf) }, UINFC_OK);
    let mut dim = 0;
    assert_eq!(unsafe { uinfc_clf_dim(clf, &mut dim) }, UINFC_OK);
    assert_eq!(dim, 1);
    let x = [2.0];
    let mut v = 0.0;
    assert_eq!(unsafe { uinfc_clf_value(clf, x.as_ptr(), 1, &mut v) }, UINFC_OK);
    assert_eq!(v, 2.0);
    let (mut y, mut val, mut eps) = ([0.0], 0.0, 1.0);
    let rc = unsafe { uinfc_moreau_envelope(clf, x.as_ptr(), 1, 0.5, 0.0, 1, y.as_mut_ptr(), &mut val, &mut eps) };
    assert_eq!(rc, UINFC_OK);
    assert!((y[0] - 1.75).abs() < 1e-6);
    assert!((val - 1.875).abs() < 1e-9);
    unsafe { uinfc_clf_free(clf) };
}

#[test]
fn errors_are_reported() {
    let mut clf = ptr::null_mut();
    assert_eq!(unsafe { uinfc_norm_clf_new(0, 0.5, &mut clf) }, UINFC_ERR_PARAM);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { uinfc_norm_clf_new(2, 0.5, &mut clf) }, UINFC_OK);
    let x = [1.0];
    let mut v = 0.0;
    assert_eq!(unsafe { uinfc_clf_value(clf, x.as_ptr(), 1, &mut v) }, UINFC_ERR_PARAM);
    assert!(last_error().contains("expected 2"));
    assert_eq!(unsafe { uinfc_clf_value(ptr::null(), x.as_ptr(), 1, &mut v) }, UINFC_ERR_NULL);
    unsafe { uinfc_clf_free(clf) };
    unsafe { uinfc_clf_free(ptr::null_mut()) };
}

#[test]
fn run_from_config_file() {
    let dir = std::env::temp_dir().join(format!("uinfc-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("one_d.cfg");
    std::fs::write(
        &cfg,
        "system = single_integrator\nclf = norm\nx0 = 1\ninput.lower = -1\ninput.upper = 1\n\
         controller.alpha = 0.05\ncontroller.eps = 0\ncontroller.eta = 0\ncontroller.chi = 1e-6\n\
         sim.delta = 0.01\nsim.horizon = 200\nsim.audit_stride = 0\nverdict.r = 0.05\nverdict.R = 1.5\n",
    )
    .unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let csv = CString::new(dir.join("out.csv").to_str().unwrap()).unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { uinfc_run_load(path.as_ptr(), &mut run) }, UINFC_OK);
    assert_eq!(unsafe { uinfc_run_set_seed(run, 5) }, UINFC_OK);
    let (mut verdict, mut t) = (-1, 0.0);
    assert_eq!(unsafe { uinfc_run_simulate(run, csv.as_ptr(), &mut verdict, &mut t) }, UINFC_OK);
    assert_eq!(verdict, UINFC_VERDICT_STABLE);
    assert!(t > 0.9 && t < 1.1, "{t}");
    let text = std::fs::read_to_string(dir.join("out.csv")).unwrap();
    assert_eq!(text.lines().count(), 202);
    unsafe { uinfc_run_free(run) };

    let missing = CString::new(dir.join("nope.cfg").to_str().unwrap()).unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { uinfc_run_load(missing.as_ptr(), &mut run) }, UINFC_ERR_CONFIG);
    assert!(run.is_null());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/uinfc.h")).unwrap();
    for name in ["uinfc_run_load", "uinfc_run_simulate", "uinfc_moreau_envelope", "uinfc_last_error", "UINFC_ERR_PANIC"]
    {
        assert!(header.contains(name), "{name} missing from header");
    }
    assert!(header.contains("typedef struct UinfcRun UinfcRun"));
}

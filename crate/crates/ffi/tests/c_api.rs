use std::ffi::{c_char, CStr, CString};
use std::ptr;

use ionshuttle_ffi::*;

const BE: f64 = 9.012;
const MG: f64 = 23.985;

fn chain(masses: &[f64]) -> *mut IonshuttleChain {
    let mut c = ptr::null_mut();
    let s = unsafe { ionshuttle_chain_new(masses.as_ptr(), masses.len(), 2e6, &mut c) };
    assert_eq!(s, IonshuttleStatus::Ok);
    assert!(!c.is_null());
    c
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe { ionshuttle_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(ionshuttle_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn modes_of_equal_pair() {
    let c = chain(&[BE, BE]);
    assert_eq!(unsafe { ionshuttle_chain_num_ions(c) }, 2);
    let (mut w, mut g, mut v) = ([0.0; 2], [0.0; 2], [0.0; 4]);
    let s = unsafe { ionshuttle_chain_modes(c, w.as_mut_ptr(), g.as_mut_ptr(), ptr::null_mut(), v.as_mut_ptr(), 4) };
    assert_eq!(s, IonshuttleStatus::Ok);
    let w1 = 2.0 * std::f64::consts::PI * 2e6;
    assert!((w[0] / w1 - 1.0).abs() < 1e-12);
    assert!((w[1] / w1 - 3f64.sqrt()).abs() < 1e-12);
    assert!(g[1].abs() < 1e-12 * g[0]);
    assert!((v[0] - v[1]).abs() < 1e-14);

    let mut small = [0.0; 3];
    let s = unsafe {
        ionshuttle_chain_modes(c, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), small.as_mut_ptr(), 3)
    };
    assert_eq!(s, IonshuttleStatus::BufferTooSmall);
    assert!(last_error().contains("4 needed"));
    unsafe { ionshuttle_chain_free(c) };
}

#[test]
fn bad_arguments_give_codes() {
    let mut c = ptr::null_mut();
    let masses = [BE, -1.0];
    let s = unsafe { ionshuttle_chain_new(masses.as_ptr(), 2, 2e6, &mut c) };
    assert_eq!(s, IonshuttleStatus::InvalidArgument);
    assert!(c.is_null());
    assert!(!last_error().is_empty());

    let s = unsafe { ionshuttle_chain_new(ptr::null(), 2, 2e6, &mut c) };
    assert_eq!(s, IonshuttleStatus::NullPointer);

    let mut t = ptr::null_mut();
    assert_eq!(unsafe { ionshuttle_trajectory_linear(-1.0, 1e-4, &mut t) }, IonshuttleStatus::InvalidArgument);
    let mut q = 0.0;
    assert_eq!(
        unsafe { ionshuttle_trajectory_evaluate(ptr::null(), 0.0, &mut q, ptr::null_mut(), ptr::null_mut()) },
        IonshuttleStatus::NullPointer
    );

    let four = chain(&[BE, MG, MG, BE]);
    let s = unsafe { ionshuttle_trajectory_design(four, 5e-6, 370e-6, &mut t, ptr::null_mut()) };
    assert_eq!(s, IonshuttleStatus::InvalidArgument);
    unsafe { ionshuttle_chain_free(four) };

    let bad = CString::new("{\"kind\": \"spline\"}").unwrap();
    assert_eq!(unsafe { ionshuttle_trajectory_from_json(bad.as_ptr(), &mut t) }, IonshuttleStatus::Config);
    // Freeing null is a no-op.
    unsafe {
        ionshuttle_chain_free(ptr::null_mut());
        ionshuttle_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn design_and_simulate() {
    let c = chain(&[BE, MG]);
    let tf = 5e-6;
    let mut t = ptr::null_mut();
    let mut residual = f64::NAN;
    assert_eq!(unsafe { ionshuttle_trajectory_design(c, tf, 370e-6, &mut t, &mut residual) }, IonshuttleStatus::Ok);
    assert!(residual < 1e-9);
    let mut b = f64::NAN;
    assert_eq!(unsafe { ionshuttle_trajectory_boundary_residual(t, &mut b) }, IonshuttleStatus::Ok);
    assert!(b < 1e-9);

    let mut quanta = [0.0; 2];
    let mut total = 0.0;
    let s = unsafe { ionshuttle_uncoupled_excitation(c, t, quanta.as_mut_ptr(), 2, &mut total) };
    assert_eq!(s, IonshuttleStatus::Ok);
    assert!(quanta.iter().all(|q| *q < 1e-6));

    let mut lin = ptr::null_mut();
    assert_eq!(unsafe { ionshuttle_trajectory_linear(tf, 370e-6, &mut lin) }, IonshuttleStatus::Ok);
    let (mut full, mut ramp) = (0.0, 0.0);
    assert_eq!(unsafe { ionshuttle_simulate(c, t, 0.0, ptr::null_mut(), 0, &mut full) }, IonshuttleStatus::Ok);
    assert_eq!(unsafe { ionshuttle_simulate(c, lin, 0.0, ptr::null_mut(), 0, &mut ramp) }, IonshuttleStatus::Ok);
    assert!(full < ramp / 100.0, "{full} {ramp}");

    // JSON round trip gives the same trajectory.
    let mut needed = 0;
    let s = unsafe { ionshuttle_trajectory_to_json(t, ptr::null_mut(), 0, &mut needed) };
    assert_eq!(s, IonshuttleStatus::NullPointer);
    let mut buf = vec![0 as c_char; needed + 1];
    assert_eq!(unsafe { ionshuttle_trajectory_to_json(t, buf.as_mut_ptr(), buf.len(), &mut needed) }, IonshuttleStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { ionshuttle_trajectory_from_json(buf.as_ptr(), &mut back) }, IonshuttleStatus::Ok);
    for k in 0..=10 {
        let time = tf * k as f64 / 10.0;
        let (mut a, mut b2) = (0.0, 0.0);
        unsafe {
            ionshuttle_trajectory_evaluate(t, time, &mut a, ptr::null_mut(), ptr::null_mut());
            ionshuttle_trajectory_evaluate(back, time, &mut b2, ptr::null_mut(), ptr::null_mut());
        }
        assert_eq!(a, b2);
    }
    let mut erf = ptr::null_mut();
    assert_eq!(unsafe { ionshuttle_trajectory_erf(tf, 370e-6, tf / 8.0, &mut erf) }, IonshuttleStatus::Ok);
    let mut nonic = ptr::null_mut();
    let s = unsafe { ionshuttle_trajectory_analytic(c, IonshuttleFamily::Cosine, tf, 370e-6, 1.0, &mut nonic) };
    assert_eq!(s, IonshuttleStatus::Ok);
    unsafe {
        for h in [t, lin, back, erf, nonic] {
            ionshuttle_trajectory_free(h);
        }
        ionshuttle_chain_free(c);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ionshuttle.h")).unwrap();
    for sym in [
        "IONSHUTTLE_STATUS_OK = 0",
        "typedef struct IonshuttleChain IonshuttleChain;",
        "ionshuttle_chain_new(",
        "ionshuttle_simulate(",
        "ionshuttle_trajectory_design(",
        "ionshuttle_last_error(",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}

#[test]
fn c_program_links_and_runs() {
    // The static library sits next to the deps/ directory of this test binary.
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libionshuttle_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = env!("CARGO_TARGET_TMPDIR");
    let bin = std::path::Path::new(dir).join("ionshuttle_smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = std::process::Command::new(cc)
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/smoke.c"))
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("run the C compiler");
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("ok"), "{stdout}");
}

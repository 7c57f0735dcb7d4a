use std::ffi::{c_char, CStr, CString};
use std::ptr;

use landau_lab::coefficients;
use landau_lab::grid::{self, VelocityGrid};
use landau_lab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { ll_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0, "no error recorded");
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn new_grid(points: usize) -> *mut LlGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { ll_grid_new(3, 4.0, points, &mut g) }, LlStatus::Ok);
    g
}

fn maxwellian(g: *const LlGrid) -> *mut LlField {
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { ll_field_maxwellian(g, &mut f) }, LlStatus::Ok);
    f
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(ll_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn grid_and_field_handles_round_trip() {
    let g = new_grid(8);
    assert_eq!(unsafe { ll_grid_len(g) }, 512);
    let f = maxwellian(g);
    assert_eq!(unsafe { ll_field_len(f) }, 512);
    let mut mass = 0.0;
    assert_eq!(unsafe { ll_field_mass(f, &mut mass) }, LlStatus::Ok);
    assert!((mass - 1.0).abs() < 1e-12);

    let mut values = vec![0.0; 512];
    assert_eq!(unsafe { ll_field_values(f, values.as_mut_ptr(), values.len()) }, LlStatus::Ok);
    let mut copy = ptr::null_mut();
    assert_eq!(unsafe { ll_field_from_values(g, values.as_ptr(), values.len(), &mut copy) }, LlStatus::Ok);
    let mut again = vec![0.0; 512];
    assert_eq!(unsafe { ll_field_values(copy, again.as_mut_ptr(), again.len()) }, LlStatus::Ok);
    assert_eq!(values, again);
    unsafe {
        ll_field_free(copy);
        ll_field_free(f);
        ll_grid_free(g);
    }
}

#[test]
fn coefficients_match_the_library() {
    let g = new_grid(12);
    let f = maxwellian(g);
    let mut out = vec![0.0; 12 * 12 * 12];
    let status = unsafe { ll_coefficient_field(f, -1.0, LlCoefficient::A, out.as_mut_ptr(), out.len()) };
    assert_eq!(status, LlStatus::Ok);
    let lib = coefficients::a_field(&grid::maxwellian(&VelocityGrid::new(3, 4.0, 12).unwrap()), -1.0).unwrap();
    assert_eq!(out, lib.values);
    unsafe {
        ll_field_free(f);
        ll_grid_free(g);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { ll_grid_new(3, -1.0, 8, &mut g) }, LlStatus::InvalidGrid);
    assert!(g.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { ll_grid_new(3, 4.0, 8, ptr::null_mut()) }, LlStatus::NullPointer);
    assert!(last_error().contains("out"));
    assert_eq!(unsafe { ll_field_maxwellian(ptr::null(), &mut ptr::null_mut()) }, LlStatus::NullPointer);

    let g = new_grid(8);
    let f = maxwellian(g);
    let mut small = vec![0.0; 10];
    assert_eq!(unsafe { ll_field_values(f, small.as_mut_ptr(), small.len()) }, LlStatus::BufferTooSmall);
    assert!(last_error().contains("512"));
    let mut big = vec![0.0; 512];
    let s = unsafe { ll_coefficient_field(f, 0.5, LlCoefficient::H, big.as_mut_ptr(), big.len()) };
    assert_eq!(s, LlStatus::GammaOutOfRange);

    let negative = vec![-1.0; 512];
    let mut h = ptr::null_mut();
    let s = unsafe { ll_field_from_values(g, negative.as_ptr(), 511, &mut h) };
    assert_ne!(s, LlStatus::Ok);

    assert!(ll_gamma_supported(3, -3.0));
    assert!(!ll_gamma_supported(3, -3.5));
    assert_eq!(unsafe { ll_grid_len(ptr::null()) }, 0);
    unsafe {
        ll_field_free(f);
        ll_grid_free(g);
        ll_field_free(ptr::null_mut());
        ll_grid_free(ptr::null_mut());
        ll_solver_free(ptr::null_mut());
    }
}

#[test]
fn error_buffer_truncates() {
    unsafe { ll_grid_new(3, 4.0, 8, ptr::null_mut()) };
    let full = unsafe { ll_last_error(ptr::null_mut(), 0) };
    let mut buf = [0 as c_char; 4];
    assert_eq!(unsafe { ll_last_error(buf.as_mut_ptr(), 4) }, full);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_bytes().len(), 3);
}

#[test]
fn solver_steps_and_conserves_mass() {
    let g = new_grid(12);
    let f = maxwellian(g);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ll_solver_new(g, -1.0, 0.05, &mut s) }, LlStatus::Ok);
    assert!(unsafe { ll_solver_time(s) }.is_nan());
    assert_eq!(unsafe { ll_solver_step(s, 1) }, LlStatus::NotInitialized);
    let mut h = 0.0;
    assert_eq!(unsafe { ll_solver_entropy(s, &mut h) }, LlStatus::NotInitialized);

    assert_eq!(unsafe { ll_solver_init(s, f) }, LlStatus::Ok);
    let mut h0 = 0.0;
    assert_eq!(unsafe { ll_solver_entropy(s, &mut h0) }, LlStatus::Ok);
    assert_eq!(unsafe { ll_solver_step(s, 4) }, LlStatus::Ok);
    assert!((unsafe { ll_solver_time(s) } - 0.2).abs() < 1e-12);
    let mut h1 = 0.0;
    assert_eq!(unsafe { ll_solver_entropy(s, &mut h1) }, LlStatus::Ok);
    assert!(h1 <= h0 + 1e-12);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ll_solver_field(s, &mut out) }, LlStatus::Ok);
    let mut mass = 0.0;
    assert_eq!(unsafe { ll_field_mass(out, &mut mass) }, LlStatus::Ok);
    assert!((mass - 1.0).abs() < 1e-9);
    unsafe {
        ll_field_free(out);
        ll_solver_free(s);
        ll_field_free(f);
        ll_grid_free(g);
    }
}

#[test]
fn snapshots_save_and_load() {
    let tmp = tempfile::tempdir().unwrap();
    let path = CString::new(tmp.path().join("m.llf").to_str().unwrap()).unwrap();
    let g = new_grid(8);
    let f = maxwellian(g);
    assert_eq!(unsafe { ll_field_save(f, path.as_ptr()) }, LlStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { ll_field_load(path.as_ptr(), &mut back) }, LlStatus::Ok);
    let (mut a, mut b) = (vec![0.0; 512], vec![0.0; 512]);
    unsafe {
        ll_field_values(f, a.as_mut_ptr(), 512);
        ll_field_values(back, b.as_mut_ptr(), 512);
    }
    assert_eq!(a, b);
    let missing = CString::new(tmp.path().join("none.llf").to_str().unwrap()).unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { ll_field_load(missing.as_ptr(), &mut none) }, LlStatus::Io);
    unsafe {
        ll_field_free(back);
        ll_field_free(f);
        ll_grid_free(g);
    }
}

#[test]
fn spectral_and_gks_functionals_are_exposed() {
    let g = new_grid(10);
    let f = maxwellian(g);
    let (mut lambda, mut ratio) = (0.0, 0.0);
    assert_eq!(unsafe { ll_lambda(f, -1.0, 0.1, &mut lambda) }, LlStatus::Ok);
    assert!(lambda.is_finite());
    assert_eq!(unsafe { ll_lambda(f, -1.0, -0.1, &mut lambda) }, LlStatus::InvalidArgument);
    assert_eq!(unsafe { ll_gks_ratio(f, 2.0, &mut ratio) }, LlStatus::Ok);
    assert!(ratio > 0.0 && ratio.is_finite());
    unsafe {
        ll_field_free(f);
        ll_grid_free(g);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/landau_lab.h")).unwrap();
    let source = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for tag in ["LANDAU_LAB_H", "LL_STATUS_OK = 0", "LL_STATUS_PANIC = 12", "typedef struct LlGrid LlGrid"] {
        assert!(header.contains(tag), "{tag}");
    }
}

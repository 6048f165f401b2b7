use std::ffi::CString;
use std::path::Path;
use std::process::Command;
use std::ptr;

use bethe_transport::green::{dense_oracle, max_relative_error, GreenColumn};
use bethe_transport::{sample_field, ComplexEnergy, PotentialDistribution, TreeGeometry};
use bethe_transport_ffi::*;
use num_complex::Complex64;

fn uniform(w: f64) -> BtDistribution {
    BtDistribution { kind: BtDistKind::Uniform, param: w }
}

fn last_error() -> String {
    unsafe {
        let n = bt_last_error(ptr::null_mut(), 0);
        let mut buf = vec![0u8; n + 1];
        bt_last_error(buf.as_mut_ptr().cast(), buf.len());
        String::from_utf8(buf[..n].to_vec()).unwrap()
    }
}

#[test]
fn column_matches_dense_solve() {
    let d = uniform(1.0);
    let mut h: *mut BtField = ptr::null_mut();
    unsafe {
        assert_eq!(bt_field_sample(&d, 3, 4, 11, &mut h), BtStatus::Ok);
        let n = bt_field_vertex_count(h);
        assert_eq!(n, 121);
        let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(bt_resolvent_column(h, 0.3, 0.01, re.as_mut_ptr(), im.as_mut_ptr(), n), BtStatus::Ok);
        bt_field_free(h);

        let g = TreeGeometry::new(3, 4).unwrap();
        let f = sample_field(&PotentialDistribution::uniform(1.0).unwrap(), &g, 11).unwrap();
        let dense = dense_oracle(&f, &g, ComplexEnergy::new(0.3, 0.01).unwrap()).unwrap();
        let g0x: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let col = GreenColumn { g00: g0x[0], g0x };
        assert!(max_relative_error(&col, &dense) < 1e-10);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut h: *mut BtField = ptr::null_mut();
        assert_eq!(bt_field_sample(ptr::null(), 2, 3, 0, &mut h), BtStatus::NullPointer);
        assert!(last_error().contains("distribution"));
        assert_eq!(bt_field_sample(&uniform(-1.0), 2, 3, 0, &mut h), BtStatus::InvalidArgument);
        assert!(h.is_null());
        assert_eq!(bt_field_sample(&uniform(1.0), 2, 3, 0, &mut h), BtStatus::Ok);
        let mut buf = [0.0; 4];
        assert_eq!(
            bt_resolvent_column(h, 0.0, 0.1, buf.as_mut_ptr(), buf.as_mut_ptr(), 4),
            BtStatus::InvalidArgument
        );
        assert!(last_error().contains("vertex count"));
        assert_eq!(bt_resolvent_column(h, 0.0, -1.0, ptr::null_mut(), ptr::null_mut(), 15), BtStatus::InvalidArgument);
        bt_field_free(h);
        bt_field_free(ptr::null_mut());
        assert_eq!(bt_field_vertex_count(ptr::null()), 0);

        let (mut v, mut mu) = (0.0, 0.0);
        assert_eq!(bt_ballistic_certificate(1, &mut v, &mut mu), BtStatus::InvalidArgument);
        assert_eq!(bt_ballistic_certificate(3, &mut v, &mut mu), BtStatus::Ok);
        assert!((v - 4.0 * std::f64::consts::E).abs() < 1e-8 && (mu - 1.0).abs() < 1e-8);
        assert_eq!(bt_ballistic_certificate(3, ptr::null_mut(), &mut mu), BtStatus::NullPointer);

        // truncation to the buffer, with the full length returned
        let mut small = [0 as std::ffi::c_char; 5];
        let n = bt_last_error(small.as_mut_ptr(), small.len());
        assert!(n > 4);
        assert_eq!(small[4], 0);
    }
}

#[test]
fn pool_lifecycle_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("p.btpool").to_str().unwrap()).unwrap();
    unsafe {
        let mut p: *mut BtPool = ptr::null_mut();
        assert_eq!(bt_pool_new(&uniform(1.0), 2, 0.0, 0.1, 2000, 100, 5, &mut p), BtStatus::Ok);
        assert_eq!(bt_pool_evolve(p, 3), BtStatus::Ok);
        assert_eq!(bt_pool_sweeps_done(p), 103);
        let (mut re, mut im) = (vec![0.0; 100], vec![0.0; 100]);
        assert_eq!(bt_pool_root_samples(p, 100, 1, re.as_mut_ptr(), im.as_mut_ptr()), BtStatus::Ok);
        assert!(im.iter().all(|x| *x > 0.0));
        assert_eq!(bt_pool_save(p, path.as_ptr()), BtStatus::Ok);
        bt_pool_free(p);

        let mut q: *mut BtPool = ptr::null_mut();
        assert_eq!(bt_pool_load(path.as_ptr(), &mut q), BtStatus::Ok);
        let (mut re2, mut im2) = (vec![0.0; 100], vec![0.0; 100]);
        assert_eq!(bt_pool_root_samples(q, 100, 1, re2.as_mut_ptr(), im2.as_mut_ptr()), BtStatus::Ok);
        assert_eq!((re, im), (re2, im2));
        bt_pool_free(q);

        let missing = CString::new(dir.path().join("none").to_str().unwrap()).unwrap();
        assert_eq!(bt_pool_load(missing.as_ptr(), &mut q), BtStatus::Io);
        assert_eq!(bt_pool_evolve(ptr::null_mut(), 1), BtStatus::NullPointer);
    }
}

#[test]
fn header_declares_the_abi_and_compiles_as_c() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/bethe_transport.h")).unwrap();
    for sym in [
        "bt_last_error",
        "bt_field_sample",
        "bt_field_free",
        "bt_resolvent_column",
        "bt_pool_new",
        "bt_pool_evolve",
        "bt_pool_root_samples",
        "bt_pool_save",
        "bt_pool_load",
        "bt_pool_free",
        "bt_ballistic_certificate",
        "typedef struct BtPool BtPool",
        "BT_STATUS_PANIC = 5",
    ] {
        assert!(header.contains(sym), "{sym}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .status()
    else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(status.success());
}

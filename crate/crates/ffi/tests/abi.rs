use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use gaussloc_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gl_last_error()) }.to_string_lossy().into_owned()
}

fn rem(n: usize) -> *mut GlModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { gl_model_rem(n, &mut m) }, GlStatus::Ok);
    m
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(gl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn rem_four_state_oracle() {
    unsafe {
        let m = rem(2);
        assert_eq!(gl_model_feature_count(m), 4);
        let g = [0.5, -0.5, 0.0, 1.0];
        let mut env = ptr::null_mut();
        assert_eq!(gl_env_from_values(g.as_ptr(), 4, &mut env), GlStatus::Ok);
        let mut gibbs = ptr::null_mut();
        assert_eq!(gl_gibbs_new(m, env, 1.0, &mut gibbs), GlStatus::Ok);
        let mut s = GlGibbsSummary::default();
        assert_eq!(gl_gibbs_summary(gibbs, &mut s), GlStatus::Ok);
        let r2 = 2f64.sqrt();
        let expect = (0.25 * ((r2 * 0.5).exp() + (-r2 * 0.5).exp() + 1.0 + r2.exp())).ln();
        assert!((s.log_z - expect).abs() < 1e-12);
        gl_gibbs_free(gibbs);
        gl_env_free(env);
        gl_model_free(m);
    }
}

#[test]
fn state_roundtrip_and_hamiltonian() {
    unsafe {
        let m = rem(3);
        let text = CString::new("101").unwrap();
        let mut st = ptr::null_mut();
        assert_eq!(gl_state_parse(m, text.as_ptr(), &mut st), GlStatus::Ok);
        let mut needed = 0usize;
        assert_eq!(
            gl_state_to_string(st, ptr::null_mut(), 0, &mut needed),
            GlStatus::BufferTooSmall
        );
        assert_eq!(needed, 4);
        let mut buf = vec![0 as c_char; needed];
        assert_eq!(gl_state_to_string(st, buf.as_mut_ptr(), needed, &mut needed), GlStatus::Ok);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "101");

        let mut env = ptr::null_mut();
        assert_eq!(gl_env_sample(m, 7, 0, &mut env), GlStatus::Ok);
        let mut vals = vec![0.0; gl_env_len(env)];
        assert_eq!(gl_env_values(env, vals.as_mut_ptr(), vals.len()), GlStatus::Ok);
        let mut h = 0.0;
        assert_eq!(gl_hamiltonian(m, env, st, &mut h), GlStatus::Ok);
        assert!(vals.iter().any(|&v| (v * 3f64.sqrt() - h).abs() < 1e-12));
        let mut r = 0.0;
        assert_eq!(gl_overlap(m, st, st, &mut r), GlStatus::Ok);
        assert_eq!(r, 1.0);
        gl_state_free(st);
        gl_env_free(env);
        gl_model_free(m);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(gl_model_polymer(3, 7, &mut m), GlStatus::InvalidArgument);
        assert!(last_error().contains('d'), "{}", last_error());
        assert_eq!(gl_model_rem(3, ptr::null_mut()), GlStatus::NullPointer);
        let m = rem(3);
        let bad = CString::new("10x").unwrap();
        let mut st = ptr::null_mut();
        assert_eq!(gl_state_parse(m, bad.as_ptr(), &mut st), GlStatus::Encoding);
        let mut env = ptr::null_mut();
        let g = [0.0; 3];
        assert_eq!(gl_env_from_values(g.as_ptr(), 3, &mut env), GlStatus::Ok);
        let mut gibbs = ptr::null_mut();
        assert_eq!(gl_gibbs_new(m, env, 1.0, &mut gibbs), GlStatus::DimensionMismatch);
        let mut x = 0.0;
        assert_eq!(gl_rem_limit_mean_overlap(-1.0, &mut x), GlStatus::InvalidArgument);
        assert_eq!(gl_rem_limit_mean_overlap(1.0, &mut x), GlStatus::Ok);
        assert_eq!(last_error(), "");
        gl_env_free(env);
        gl_model_free(m);
        gl_model_free(ptr::null_mut());
    }
}

#[test]
fn polymer_atoms_and_turn_counts() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(gl_model_polymer(4, 1, &mut m), GlStatus::Ok);
        let zeros = vec![0.0; gl_model_feature_count(m)];
        let mut env = ptr::null_mut();
        assert_eq!(gl_env_from_values(zeros.as_ptr(), zeros.len(), &mut env), GlStatus::Ok);
        let mut l = 1.0;
        let mut steps = [9u8; 4];
        assert_eq!(gl_passage_time(1, 4, env, &mut l, steps.as_mut_ptr(), 4), GlStatus::Ok);
        assert_eq!((l, steps), (0.0, [0; 4]));
        let mut a = GlAtomReport::default();
        assert_eq!(gl_max_atom(1, 4, env, 0.0, &mut a), GlStatus::Ok);
        assert!((a.max_atom - 1.0 / 16.0).abs() < 1e-15);

        let mut buf = [0 as c_char; 32];
        let mut needed = 0;
        assert_eq!(gl_count_paths_by_turns(3, 1, 1, buf.as_mut_ptr(), 32, &mut needed), GlStatus::Ok);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "4");
        gl_env_free(env);
        gl_model_free(m);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/gaussloc.h");
    assert!(header.is_file(), "header missing");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["gl_model_rem", "gl_gibbs_summary", "gl_max_atom", "GL_STATUS_OK"] {
        assert!(text.contains(sym), "{sym} absent from header");
    }
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; header syntax not checked");
        return;
    };
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

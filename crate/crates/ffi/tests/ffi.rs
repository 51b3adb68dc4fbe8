use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use calibra::procedures::{run, ProcedureSpec, RunOptions};
use calibra::adversaries::{AdversarySpec, InfoMode};
use calibra::{ConvexDomain, Point};
use calibra_ffi::*;

struct Engine(*mut CalibraEngine);

impl Engine {
    fn new(procedure: &str, domain: Option<&str>, seed: u64) -> Result<Engine, (CalibraStatus, String)> {
        let p = CString::new(procedure).unwrap();
        let d = domain.map(|d| CString::new(d).unwrap());
        let mut out = ptr::null_mut();
        let s = unsafe { calibra_engine_new(p.as_ptr(), d.as_ref().map_or(ptr::null(), |d| d.as_ptr()), seed, &mut out) };
        if s == CalibraStatus::Ok {
            Ok(Engine(out))
        } else {
            assert!(out.is_null());
            Err((s, last_error()))
        }
    }

    fn dim(&self) -> usize {
        unsafe { calibra_engine_dimension(self.0) }
    }

    fn next(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        assert_eq!(unsafe { calibra_engine_next_forecast(self.0, c.as_mut_ptr(), c.len()) }, CalibraStatus::Ok);
        c
    }

    fn observe(&self, a: &[f64]) -> CalibraStatus {
        unsafe { calibra_engine_observe(self.0, a.as_ptr(), a.len()) }
    }

    fn scores(&self) -> Result<CalibraScores, CalibraStatus> {
        let mut s = CalibraScores::default();
        match unsafe { calibra_engine_scores(self.0, &mut s) } {
            CalibraStatus::Ok => Ok(s),
            e => Err(e),
        }
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        unsafe { calibra_engine_free(self.0) }
    }
}

fn last_error() -> String {
    let p = calibra_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn matches_the_library_run() {
    let seq: Vec<Point> = [1.0, 0.0, 0.0, 1.0, 1.0].iter().map(|&x| Point::scalar(x).unwrap()).collect();
    let spec = ProcedureSpec::Mm { epsilon: 0.1, resolution: None, maximizer: Default::default() };
    let rec = run(
        &spec,
        &AdversarySpec::Fixed { sequence: seq.clone(), mode: InfoMode::HistoryOnly },
        &ConvexDomain::Interval01,
        &RunOptions::new(300, 11),
    )
    .unwrap();
    let e = Engine::new(&serde_json::to_string(&spec).unwrap(), None, 11).unwrap();
    for (t, step) in rec.steps.iter().enumerate() {
        let c = e.next();
        // a repeated call returns the same pending forecast
        assert_eq!(e.next(), c);
        assert_eq!(c, step.forecast.coords());
        assert_eq!(e.observe(seq[t % seq.len()].coords()), CalibraStatus::Ok);
    }
    let s = e.scores().unwrap();
    let f = rec.final_scores().unwrap();
    assert_eq!((s.t, s.k_classic, s.k_binned, s.s_over_t2, s.x_over_t), (f.t, f.k_classic, f.k_binned, f.s_over_t2, f.x_over_t));
    let mut d = CalibraDiagnostics::default();
    assert_eq!(unsafe { calibra_engine_last_diagnostics(e.0, &mut d) }, CalibraStatus::Ok);
    assert_eq!(d.satisfied, 1);
    assert!(d.support >= 1 && d.support <= 4);
}

#[test]
fn simplex_fp_engine() {
    let e = Engine::new(r#"{"kind":"fp"}"#, Some(r#"{"kind":"simplex","m":3}"#), 0).unwrap();
    assert_eq!(e.dim(), 3);
    for t in 0..50 {
        let c = e.next();
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let mut a = vec![0.0; 3];
        a[t % 3] = 1.0;
        assert_eq!(e.observe(&a), CalibraStatus::Ok);
    }
    assert_eq!(e.scores().unwrap().t, 50);
}

#[test]
fn errors_are_reported() {
    let (s, msg) = Engine::new("not json", None, 0).err().unwrap();
    assert_eq!(s, CalibraStatus::InvalidConfig);
    assert!(msg.contains("procedure"));
    assert_eq!(unsafe { calibra_engine_new(ptr::null(), ptr::null(), 0, &mut ptr::null_mut()) }, CalibraStatus::NullPointer);
    let p = CString::new(r#"{"kind":"fp"}"#).unwrap();
    assert_eq!(unsafe { calibra_engine_new(p.as_ptr(), ptr::null(), 0, ptr::null_mut()) }, CalibraStatus::NullPointer);

    let e = Engine::new(r#"{"kind":"binary","n":4}"#, None, 0).unwrap();
    assert_eq!(e.scores().err(), Some(CalibraStatus::EmptyHistory));
    assert_eq!(e.observe(&[1.0]), CalibraStatus::InvalidState);
    assert!(last_error().contains("pending"));
    let mut two = [0.0; 2];
    assert_eq!(unsafe { calibra_engine_next_forecast(e.0, two.as_mut_ptr(), 2) }, CalibraStatus::DimensionMismatch);
    e.next();
    assert_eq!(e.observe(&[f64::NAN]), CalibraStatus::InvalidArgument);
    assert_eq!(e.observe(&[1.5]), CalibraStatus::InvalidArgument);
    assert_eq!(e.observe(&[1.0]), CalibraStatus::Ok);
    assert!(calibra_last_error_message().is_null());
    assert_eq!(unsafe { calibra_engine_dimension(ptr::null()) }, 0);
    assert_eq!(unsafe { calibra_engine_observe(ptr::null_mut(), [1.0].as_ptr(), 1) }, CalibraStatus::NullPointer);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(calibra_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// target/<profile>, two levels above this test binary in deps/.
fn artifact_dir() -> PathBuf {
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_is_current() {
    let h = std::fs::read_to_string(crate_dir().join("include/calibra.h")).unwrap();
    for f in [
        "calibra_engine_new",
        "calibra_engine_free",
        "calibra_engine_dimension",
        "calibra_engine_next_forecast",
        "calibra_engine_observe",
        "calibra_engine_scores",
        "calibra_engine_last_diagnostics",
        "calibra_last_error_message",
        "calibra_version",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from the header");
    }
    assert!(h.contains("typedef struct CalibraEngine CalibraEngine;"));
    assert!(h.contains("CALIBRA_STATUS_INVALID_STATE = 6"));
}

#[test]
fn c_program_links_against_the_static_library() {
    // `cargo test` builds only the rlib, so produce the archive for this profile first.
    let dir = artifact_dir();
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let mut build = Command::new(cargo);
    build.args(["build", "--quiet", "-p", "calibra-ffi", "--lib"]);
    if dir.file_name().is_some_and(|n| n == "release") {
        build.arg("--release");
    }
    assert!(build.status().unwrap().success(), "building the static library failed");
    let lib = dir.join("libcalibra_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap_or_else(|e| panic!("{cc}: {e}"));
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let cells: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(cells[0], "1000");
    let k: f64 = cells[1].parse().unwrap();
    assert!(k <= 0.05 + 0.02, "binary K = {k}");
    assert_eq!(cells[3], env!("CARGO_PKG_VERSION"));
}

use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use jbcp_ffi::*;

// one BS, one user: minimum power design is p = q = 1
const SCALAR: &str = r#"{
  "num_bs": 1, "num_users": 1,
  "channels": [[[1.0, 0.0]]],
  "noise_powers": [1.0], "sinr_targets": [0.5],
  "fronthaul_caps": [1.0], "power_budgets": [10.0]
}"#;

fn load(json: &str) -> *mut JbcpInstance {
    let s = CString::new(json).unwrap();
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { jbcp_instance_from_json(s.as_ptr(), &mut inst) }, JbcpStatus::Ok);
    assert!(!inst.is_null());
    inst
}

fn last_error() -> String {
    let p = jbcp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_instance_round_trip() {
    let inst = load(SCALAR);
    unsafe {
        assert_eq!(jbcp_instance_num_bs(inst), 1);
        assert_eq!(jbcp_instance_num_users(inst), 1);
        for method in [JbcpMethod::Sdr, JbcpMethod::Pega] {
            let mut out = ptr::null_mut();
            assert_eq!(jbcp_solve(inst, method, ptr::null(), &mut out), JbcpStatus::Ok);
            assert_eq!(jbcp_outcome_status(out), JbcpRunStatus::Converged);
            assert!((jbcp_outcome_objective(out) - 2.0).abs() < 1e-6, "{method:?}");
            assert!((jbcp_outcome_design_power(out) - 2.0).abs() < 1e-6);
            assert!(jbcp_outcome_feasible(out));

            let mut len = 0usize;
            let mut p = [0.0f64; 1];
            assert_eq!(jbcp_outcome_antenna_power(out, p.as_mut_ptr(), 1, &mut len), JbcpStatus::Ok);
            assert_eq!(len, 1);
            assert!((p[0] - 2.0).abs() < 1e-6);

            let mut js = ptr::null_mut();
            assert_eq!(jbcp_outcome_to_json(out, &mut js), JbcpStatus::Ok);
            let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(js).to_str().unwrap()).unwrap();
            assert_eq!(v["status"], "ok");
            jbcp_string_free(js);
            jbcp_outcome_free(out);
        }
        jbcp_instance_free(inst);
    }
}

#[test]
fn multiplier_buffer_protocol() {
    let inst = load(SCALAR);
    unsafe {
        let mut out = ptr::null_mut();
        let opts = JbcpSolveOptions { eps_out: 1e-6, max_outer: 50, feasibility_tolerance: 0.0 };
        assert_eq!(jbcp_solve(inst, JbcpMethod::Piga, &opts, &mut out), JbcpStatus::Ok);
        let mut len = 7usize;
        assert_eq!(jbcp_outcome_multipliers(out, ptr::null_mut(), 0, &mut len), JbcpStatus::BufferTooSmall);
        assert_eq!(len, 1);
        let mut mu = [f64::NAN];
        assert_eq!(jbcp_outcome_multipliers(out, mu.as_mut_ptr(), 1, &mut len), JbcpStatus::Ok);
        // budget inactive
        assert_eq!(mu[0], 0.0);
        jbcp_outcome_free(out);

        assert_eq!(jbcp_solve(inst, JbcpMethod::Sdr, ptr::null(), &mut out), JbcpStatus::Ok);
        assert_eq!(jbcp_outcome_multipliers(out, mu.as_mut_ptr(), 1, &mut len), JbcpStatus::Ok);
        assert_eq!(len, 0);
        jbcp_outcome_free(out);
        jbcp_instance_free(inst);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(jbcp_instance_from_json(ptr::null(), &mut inst), JbcpStatus::NullPointer);
        let bad = CString::new("{ not json").unwrap();
        assert_eq!(jbcp_instance_from_json(bad.as_ptr(), &mut inst), JbcpStatus::Json);
        assert!(inst.is_null());
        let neg = CString::new(SCALAR.replace("[10.0]", "[-1.0]")).unwrap();
        assert_eq!(jbcp_instance_from_json(neg.as_ptr(), &mut inst), JbcpStatus::InvalidInput);
        assert!(last_error().contains("power"), "{}", last_error());
        let missing = CString::new("/nonexistent/instance.json").unwrap();
        assert_eq!(jbcp_instance_load(missing.as_ptr(), &mut inst), JbcpStatus::Io);

        let mut out = ptr::null_mut();
        assert_eq!(jbcp_solve(ptr::null(), JbcpMethod::Pega, ptr::null(), &mut out), JbcpStatus::NullPointer);

        let good = load(SCALAR);
        let opts = JbcpSolveOptions { eps_out: f64::NAN, max_outer: 0, feasibility_tolerance: 0.0 };
        // NaN is not > 0, so the default is kept
        assert_eq!(jbcp_solve(good, JbcpMethod::Psga, &opts, &mut out), JbcpStatus::Ok);
        jbcp_outcome_free(out);

        let mut js = ptr::null_mut();
        let mu = [-1.0];
        assert_eq!(jbcp_dump_cone(good, mu.as_ptr(), 1, &mut js), JbcpStatus::InvalidInput);
        jbcp_instance_free(good);

        jbcp_instance_free(ptr::null_mut());
        jbcp_outcome_free(ptr::null_mut());
        jbcp_string_free(ptr::null_mut());
        assert!(jbcp_outcome_objective(ptr::null()).is_nan());
    }
}

#[test]
fn infeasible_instance_is_an_outcome_not_an_error() {
    // minimum power is 2 but the budget is 1.6
    let inst = load(&SCALAR.replace("[10.0]", "[1.6]"));
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(jbcp_solve(inst, JbcpMethod::Sdr, ptr::null(), &mut out), JbcpStatus::Ok);
        assert_eq!(jbcp_outcome_status(out), JbcpRunStatus::Infeasible);
        assert!(!jbcp_outcome_feasible(out));
        jbcp_outcome_free(out);
        jbcp_instance_free(inst);
    }
}

#[test]
fn dump_cone_matches_core_program() {
    let inst = load(SCALAR);
    unsafe {
        let mut js = ptr::null_mut();
        assert_eq!(jbcp_dump_cone(inst, ptr::null(), 0, &mut js), JbcpStatus::Ok);
        let text = CStr::from_ptr(js).to_str().unwrap().to_owned();
        jbcp_string_free(js);
        let expected = jbcp::sdr::build_sdr_program(&jbcp::NetworkInstance::from_json(SCALAR).unwrap()).unwrap();
        assert_eq!(jbcp::sdr::ConeProgram::from_json(&text).unwrap(), expected);

        let mu = [3.0];
        assert_eq!(jbcp_dump_cone(inst, mu.as_ptr(), 1, &mut js), JbcpStatus::Ok);
        let inner = jbcp::sdr::ConeProgram::from_json(CStr::from_ptr(js).to_str().unwrap()).unwrap();
        jbcp_string_free(js);
        assert_eq!(inner.objective.iter().cloned().fold(0.0, f64::max), 4.0);
        jbcp_instance_free(inst);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(jbcp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/jbcp.h");
    assert!(header.exists(), "build script did not write the header");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["jbcp_solve", "jbcp_instance_free", "jbcp_last_error", "JBCP_STATUS_PANIC"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"jbcp.h\"\nint main(void) { JbcpInstance *i = 0; JbcpSolveOptions o = {1e-3, 10, 1e-3};\n\
         (void)o; jbcp_instance_free(i); return JBCP_STATUS_OK; }\n",
    )
    .unwrap();
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(status) = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(dir.join("include"))
            .arg(&src)
            .status()
        else {
            eprintln!("{cc} not available; skipped");
            continue;
        };
        assert!(status.success(), "{cc} rejected the header");
    }
}

//! Exercises the C ABI exactly as a foreign binding would: raw pointers,
//! status codes, the per-thread error buffer and handle lifecycles.

use std::ffi::{CStr, CString};

use xva_ffi::*;

const SCENARIO: &str = r#"{
  "rates": {"r_f_plus": 0.08, "r_f_minus": 0.08, "r_r_plus": 0.05, "r_r_minus": 0.05,
            "r_c_plus": 0.01, "r_c_minus": 0.01, "r_D": 0.05},
  "credit": {"L_I": 0.5, "L_C": 0.5, "h_I_Q": 0.15, "h_C_Q": 0.2},
  "equity": {"S0": 100.0, "mu": 0.05, "sigma": 0.2},
  "collateral": {"alpha": 0.25},
  "claim": {"kind": "call", "strike": 100.0, "maturity": 1.0},
  "grid": {"n_time": 60, "n_space": 120, "width_sigmas": 6.0, "picard_tol": 1e-10, "picard_max": 50},
  "mc": {"n_paths": 4000, "n_steps": 50, "seed": 5}
}"#;

fn parse(json: &str) -> *mut XvaScenario {
    let text = CString::new(json).unwrap();
    let mut handle: *mut XvaScenario = std::ptr::null_mut();
    let status = unsafe { xva_scenario_parse(text.as_ptr(), &mut handle) };
    assert_eq!(status, XvaStatus::Ok);
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    let mut buf = vec![0i8; 512];
    let n = unsafe { xva_last_error(buf.as_mut_ptr(), buf.len()) };
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned();
    assert!(n >= text.len());
    text
}

#[test]
fn version_is_a_static_string() {
    let v = unsafe { CStr::from_ptr(xva_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn closed_form_price_through_the_abi() {
    let handle = parse(SCENARIO);
    let mut out = XvaBreakdownC::default();
    let status = unsafe { xva_price_closed_form(handle, &mut out) };
    assert_eq!(status, XvaStatus::Ok);
    // figure parameters: negative adjustment, legs sum to the value
    assert!(out.total < 0.0);
    let legs = out.funding_leg + out.dva_leg + out.cva_leg + out.collateral_leg;
    assert!((legs - out.vhat - out.total).abs() < 1e-10);
    assert!((out.vhat - 10.4506).abs() < 1e-3);
    unsafe { xva_scenario_free(handle) };
}

#[test]
fn lattice_solve_and_hedge_through_the_abi() {
    let handle = parse(SCENARIO);
    let mut solution: *mut XvaSolution = std::ptr::null_mut();
    assert_eq!(
        unsafe { xva_solve(handle, XvaSide::Seller, &mut solution) },
        XvaStatus::Ok
    );
    let mut value = 0.0f64;
    assert_eq!(
        unsafe { xva_solution_value_at(solution, 0.0, 100.0, &mut value) },
        XvaStatus::Ok
    );
    let mut cf = XvaBreakdownC::default();
    assert_eq!(
        unsafe { xva_price_closed_form(handle, &mut cf) },
        XvaStatus::Ok
    );
    assert!(
        ((value - cf.vhat - cf.total) / value).abs() < 5e-3,
        "lattice {value} vs closed form {}",
        cf.vhat + cf.total
    );

    let mut hedge = XvaHedgeC::default();
    assert_eq!(
        unsafe { xva_solution_hedge_at(solution, 0.0, 100.0, &mut hedge) },
        XvaStatus::Ok
    );
    assert!(hedge.xi_bond_i > 0.0);
    assert!(hedge.xi_bond_c < 0.0);
    assert_eq!(hedge.psi_repo, -hedge.xi_stock * 100.0);

    // out-of-range lookups surface as status codes with a message
    assert_eq!(
        unsafe { xva_solution_value_at(solution, 5.0, 100.0, &mut value) },
        XvaStatus::OutOfRange
    );
    assert!(last_error().contains("outside"));

    unsafe { xva_solution_free(solution) };
    unsafe { xva_scenario_free(handle) };
}

#[test]
fn interval_and_mc_through_the_abi() {
    let handle = parse(SCENARIO);
    let mut interval = XvaIntervalC::default();
    assert_eq!(
        unsafe { xva_interval(handle, &mut interval) },
        XvaStatus::Ok
    );
    assert!(interval.width.abs() <= 1e-6 * interval.vhat); // equal funding rates
    assert_eq!(interval.xva_sell - interval.xva_buy, interval.width);

    let mut mc = XvaMcBreakdownC::default();
    assert_eq!(unsafe { xva_price_mc(handle, &mut mc) }, XvaStatus::Ok);
    assert!(mc.total.std_error > 0.0);
    assert_eq!(mc.total.n_effective, 4000);
    let mut cf = XvaBreakdownC::default();
    unsafe { xva_price_closed_form(handle, &mut cf) };
    assert!(
        (mc.total.value - cf.total).abs() <= 4.0 * mc.total.std_error,
        "mc {} vs closed {}",
        mc.total.value,
        cf.total
    );
    unsafe { xva_scenario_free(handle) };
}

#[test]
fn validation_and_error_reporting() {
    let handle = parse(SCENARIO);
    // figure rates break the repo-vs-funding inequality
    assert_eq!(
        unsafe { xva_scenario_validate(handle) },
        XvaStatus::ValidationFailed
    );
    assert!(last_error().contains("r_f_plus<=r_r_minus"));
    unsafe { xva_scenario_free(handle) };

    let flat = SCENARIO.replace("0.08", "0.05");
    let handle = parse(&flat);
    assert_eq!(unsafe { xva_scenario_validate(handle) }, XvaStatus::Ok);
    unsafe { xva_scenario_free(handle) };
}

#[test]
fn null_and_garbage_inputs_are_rejected() {
    let mut out = XvaBreakdownC::default();
    assert_eq!(
        unsafe { xva_price_closed_form(std::ptr::null(), &mut out) },
        XvaStatus::NullArgument
    );
    let mut handle: *mut XvaScenario = std::ptr::null_mut();
    assert_eq!(
        unsafe { xva_scenario_parse(std::ptr::null(), &mut handle) },
        XvaStatus::NullArgument
    );
    let garbage = CString::new("{not json").unwrap();
    assert_eq!(
        unsafe { xva_scenario_parse(garbage.as_ptr(), &mut handle) },
        XvaStatus::InvalidInput
    );
    assert!(!last_error().is_empty());
    unsafe { xva_scenario_free(std::ptr::null_mut()) }; // tolerated
}

#[test]
fn asymmetric_rates_report_the_precondition() {
    let asym = SCENARIO.replace("\"r_f_minus\": 0.08", "\"r_f_minus\": 0.09");
    let handle = parse(&asym);
    let mut out = XvaBreakdownC::default();
    assert_eq!(
        unsafe { xva_price_closed_form(handle, &mut out) },
        XvaStatus::PreconditionNotMet
    );
    assert!(last_error().contains("BSDE"));
    unsafe { xva_scenario_free(handle) };
}

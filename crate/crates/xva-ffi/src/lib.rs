//! C ABI over the valuation engines: opaque handles, plain structs and
//! integer error codes so other languages can bind without Rust types.
//!
//! Conventions: every function returns an [`XvaStatus`] code; outputs go
//! through pointers; handles are created and released by matching
//! `.._parse`/`.._free` pairs; the last error message is kept per thread and
//! read with [`xva_last_error`]. The header `include/xva.h` is generated by
//! cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use xva_core::bsde::{self, GridSolution, Side};
use xva_core::claim::ClaimSpec;
use xva_core::closed_form::{self, HedgeReport, XvaBreakdown};
use xva_core::market::MarketParams;
use xva_core::mc;
use xva_core::report::CROSSCHECK_REL_TOL;
use xva_core::scenario::ScenarioConfig;
use xva_core::XvaError;

/// Status codes returned by every API call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XvaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidInput = 2,
    NumericalError = 3,
    PreconditionNotMet = 4,
    OutOfRange = 5,
    ValidationFailed = 6,
}

/// Opaque scenario handle: parsed configuration plus derived market and
/// claim data.
pub struct XvaScenario {
    params: MarketParams,
    claim: ClaimSpec,
    config: ScenarioConfig,
}

/// Opaque solved-lattice handle.
pub struct XvaSolution {
    params: MarketParams,
    solution: GridSolution,
}

/// Valuation adjustment split into its four legs.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct XvaBreakdownC {
    pub total: f64,
    pub funding_leg: f64,
    pub dva_leg: f64,
    pub cva_leg: f64,
    pub collateral_leg: f64,
    pub adjustment_factor: f64,
    pub vhat: f64,
}

/// Replicating portfolio positions.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct XvaHedgeC {
    pub xi_stock: f64,
    pub xi_bond_i: f64,
    pub xi_bond_c: f64,
    pub psi_repo: f64,
    pub xi_funding: f64,
    pub psi_collateral: f64,
}

/// Monte Carlo point estimate.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct XvaMcEstimateC {
    pub value: f64,
    pub std_error: f64,
    pub n_effective: u64,
}

/// Per-leg Monte Carlo estimates.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct XvaMcBreakdownC {
    pub funding: XvaMcEstimateC,
    pub dva: XvaMcEstimateC,
    pub cva: XvaMcEstimateC,
    pub collateral: XvaMcEstimateC,
    pub total: XvaMcEstimateC,
    pub vhat: f64,
}

/// Buyer/seller values and the no-arbitrage interval.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct XvaIntervalC {
    pub v0_minus: f64,
    pub v0_plus: f64,
    pub xva_buy: f64,
    pub xva_sell: f64,
    pub width: f64,
    pub vhat: f64,
    pub grid_error: f64,
}

/// Trade side selector for lattice solves.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XvaSide {
    Seller = 0,
    Buyer = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let owned = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn status_for(err: &XvaError) -> XvaStatus {
    match err {
        XvaError::NonFinite { .. } | XvaError::InvalidParams(_) | XvaError::Scenario(_) => {
            XvaStatus::InvalidInput
        }
        XvaError::Domain(_) | XvaError::OutsideGrid(_) => XvaStatus::OutOfRange,
        XvaError::ClosedFormPrecondition(_) | XvaError::ExcludedParameter(_) => {
            XvaStatus::PreconditionNotMet
        }
        XvaError::PicardDiverged(_) | XvaError::ResourceCap(_) | XvaError::Io(_) => {
            XvaStatus::NumericalError
        }
    }
}

fn fail(err: XvaError) -> XvaStatus {
    let status = status_for(&err);
    set_error(&err.to_string());
    status
}

fn breakdown_c(b: &XvaBreakdown) -> XvaBreakdownC {
    XvaBreakdownC {
        total: b.total,
        funding_leg: b.funding_leg,
        dva_leg: b.dva_leg,
        cva_leg: b.cva_leg,
        collateral_leg: b.collateral_leg,
        adjustment_factor: b.adjustment_factor,
        vhat: b.vhat,
    }
}

fn hedge_c(h: &HedgeReport) -> XvaHedgeC {
    XvaHedgeC {
        xi_stock: h.xi_stock,
        xi_bond_i: h.xi_bond_i,
        xi_bond_c: h.xi_bond_c,
        psi_repo: h.psi_repo,
        xi_funding: h.xi_funding,
        psi_collateral: h.psi_collateral,
    }
}

fn estimate_c(e: &mc::McEstimate) -> XvaMcEstimateC {
    XvaMcEstimateC {
        value: e.value,
        std_error: e.std_error,
        n_effective: e.n_effective as u64,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn xva_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buffer` (truncated to
/// `length` bytes including the terminator) and returns the full message
/// length. Safe to call with a null buffer to query the length.
///
/// # Safety
/// `buffer`, when non-null, must point to at least `length` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn xva_last_error(buffer: *mut c_char, length: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes_with_nul();
        if !buffer.is_null() && length > 0 {
            let n = bytes.len().min(length - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buffer as *mut u8, n);
            *buffer.add(n) = 0;
        }
        bytes.len().saturating_sub(1)
    })
}

/// Parses a scenario JSON document into an opaque handle.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be a valid
/// pointer. On success the handle must be released with
/// [`xva_scenario_free`].
#[no_mangle]
pub unsafe extern "C" fn xva_scenario_parse(
    json: *const c_char,
    out: *mut *mut XvaScenario,
) -> XvaStatus {
    if json.is_null() || out.is_null() {
        return XvaStatus::NullArgument;
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("scenario JSON is not valid UTF-8");
            return XvaStatus::InvalidInput;
        }
    };
    let config = match ScenarioConfig::from_json(text) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let claim = match config.claim_spec() {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let params = config.market_params();
    *out = Box::into_raw(Box::new(XvaScenario {
        params,
        claim,
        config,
    }));
    XvaStatus::Ok
}

/// Releases a scenario handle. Null is ignored.
///
/// # Safety
/// `scenario` must be null or a pointer obtained from
/// [`xva_scenario_parse`] that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn xva_scenario_free(scenario: *mut XvaScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

unsafe fn scenario_ref<'a>(handle: *const XvaScenario) -> Option<&'a XvaScenario> {
    handle.as_ref()
}

/// Runs the no-arbitrage rate checks. Returns `Ok` when every condition
/// holds, `ValidationFailed` with the violation list in the error buffer
/// otherwise.
///
/// # Safety
/// `scenario` must be a live handle from [`xva_scenario_parse`].
#[no_mangle]
pub unsafe extern "C" fn xva_scenario_validate(scenario: *const XvaScenario) -> XvaStatus {
    let Some(s) = scenario_ref(scenario) else {
        return XvaStatus::NullArgument;
    };
    match s.params.validate() {
        Ok(report) if report.passed() => XvaStatus::Ok,
        Ok(report) => {
            set_error(&report.to_string());
            XvaStatus::ValidationFailed
        }
        Err(e) => fail(e),
    }
}

/// Equal-rates closed form at inception (defaults formula when a credit
/// block is present).
///
/// # Safety
/// `scenario` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xva_price_closed_form(
    scenario: *const XvaScenario,
    out: *mut XvaBreakdownC,
) -> XvaStatus {
    let (Some(s), false) = (scenario_ref(scenario), out.is_null()) else {
        return XvaStatus::NullArgument;
    };
    let result = if matches!(s.params.effective_credit(), Ok(c) if c.defaults_enabled) {
        closed_form::default_xva(&s.params, &s.claim, 0.0, s.params.equity.s0)
    } else {
        closed_form::piterbarg_xva(&s.params, &s.claim, 0.0, s.params.equity.s0)
    };
    match result {
        Ok(b) => {
            *out = breakdown_c(&b);
            XvaStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Closed-form replicating positions at inception.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xva_hedge_closed_form(
    scenario: *const XvaScenario,
    out: *mut XvaHedgeC,
) -> XvaStatus {
    let (Some(s), false) = (scenario_ref(scenario), out.is_null()) else {
        return XvaStatus::NullArgument;
    };
    let result = if matches!(s.params.effective_credit(), Ok(c) if c.defaults_enabled) {
        closed_form::default_hedge(&s.params, &s.claim, 0.0, s.params.equity.s0)
    } else {
        closed_form::piterbarg_hedge(&s.params, &s.claim, 0.0, s.params.equity.s0)
    };
    match result {
        Ok(h) => {
            *out = hedge_c(&h);
            XvaStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Solves the backward equation on the lattice for one side of the trade.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be a valid pointer. On
/// success the handle must be released with [`xva_solution_free`].
#[no_mangle]
pub unsafe extern "C" fn xva_solve(
    scenario: *const XvaScenario,
    side: XvaSide,
    out: *mut *mut XvaSolution,
) -> XvaStatus {
    let (Some(s), false) = (scenario_ref(scenario), out.is_null()) else {
        return XvaStatus::NullArgument;
    };
    let side = match side {
        XvaSide::Seller => Side::Seller,
        XvaSide::Buyer => Side::Buyer,
    };
    match bsde::solve(&s.claim, &s.params, side, &s.config.grid) {
        Ok(solution) => {
            *out = Box::into_raw(Box::new(XvaSolution {
                params: s.params,
                solution,
            }));
            XvaStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Releases a solution handle. Null is ignored.
///
/// # Safety
/// `solution` must be null or a pointer obtained from [`xva_solve`] that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn xva_solution_free(solution: *mut XvaSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Reads the pre-default value surface at `(t, s)`.
///
/// # Safety
/// `solution` must be a live handle from [`xva_solve`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn xva_solution_value_at(
    solution: *const XvaSolution,
    t: f64,
    s: f64,
    out: *mut f64,
) -> XvaStatus {
    let (Some(sol), false) = (solution.as_ref(), out.is_null()) else {
        return XvaStatus::NullArgument;
    };
    match sol.solution.value_at(t, s) {
        Ok(v) => {
            *out = v;
            XvaStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Extracts the replicating positions from a solved lattice at `(t, s)`.
///
/// # Safety
/// `solution` must be a live handle from [`xva_solve`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn xva_solution_hedge_at(
    solution: *const XvaSolution,
    t: f64,
    s: f64,
    out: *mut XvaHedgeC,
) -> XvaStatus {
    let (Some(sol), false) = (solution.as_ref(), out.is_null()) else {
        return XvaStatus::NullArgument;
    };
    match bsde::extract_hedge(&sol.solution, &sol.params, t, s) {
        Ok(h) => {
            *out = hedge_c(&h);
            XvaStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Buyer/seller lattice solves assembled into the no-arbitrage interval.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xva_interval(
    scenario: *const XvaScenario,
    out: *mut XvaIntervalC,
) -> XvaStatus {
    let (Some(s), false) = (scenario_ref(scenario), out.is_null()) else {
        return XvaStatus::NullArgument;
    };
    match bsde::interval(&s.claim, &s.params, &s.config.grid) {
        Ok(i) => {
            *out = XvaIntervalC {
                v0_minus: i.v0_minus,
                v0_plus: i.v0_plus,
                xva_buy: i.xva_buy,
                xva_sell: i.xva_sell,
                width: i.width,
                vhat: i.vhat0,
                grid_error: i.grid_error,
            };
            XvaStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Monte Carlo evaluation of the default-risky representation with the
/// scenario's `mc` settings.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xva_price_mc(
    scenario: *const XvaScenario,
    out: *mut XvaMcBreakdownC,
) -> XvaStatus {
    let (Some(s), false) = (scenario_ref(scenario), out.is_null()) else {
        return XvaStatus::NullArgument;
    };
    let bundle = match mc::simulate(&s.params, &s.claim, &s.config.mc) {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    match mc::estimate_representation(&bundle, &s.params, &s.claim) {
        Ok(est) => {
            *out = XvaMcBreakdownC {
                funding: estimate_c(&est.funding),
                dva: estimate_c(&est.dva),
                cva: estimate_c(&est.cva),
                collateral: estimate_c(&est.collateral),
                total: estimate_c(&est.total),
                vhat: est.vhat0,
            };
            XvaStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Relative tolerance used by the engine cross-checks; exported so bindings
/// can apply the same acceptance band.
#[no_mangle]
pub extern "C" fn xva_crosscheck_rel_tol() -> f64 {
    CROSSCHECK_REL_TOL
}

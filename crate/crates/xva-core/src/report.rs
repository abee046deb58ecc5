//! Scenario runner: orchestrates the three engines, cross-validates them,
//! and emits the CSV artifacts behind the `xva` command-line interface.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analytic::public_value;
use crate::bsde::{self, GridSettings, Side};
use crate::claim::{ClaimSpec, TradeSide};
use crate::closed_form::{self, equal_rates, HedgeReport, XvaBreakdown};
use crate::error::XvaError;
use crate::market::MarketParams;
use crate::mc;
use crate::scenario::{sweep_points, RunMode, ScenarioConfig, SweepAxis};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CROSSCHECK: i32 = 4;

pub const XVA_CSV_HEADER: &str =
    "t,S,engine,total,funding_leg,dva_leg,cva_leg,collateral_leg,factor,vhat";
pub const HEDGE_CSV_HEADER: &str = "t,S,xi_stock,xi_bond_I,xi_bond_C,psi_repo,xi_funding";
pub const INTERVAL_CSV_HEADER: &str = "V0_minus,V0_plus,width";
pub const CROSSCHECK_CSV_HEADER: &str =
    "metric,engine_a,engine_b,value_a,value_b,delta,se,tol,pass";

/// Relative tolerance of the closed-form vs lattice cross-check, measured
/// against the replication value.
pub const CROSSCHECK_REL_TOL: f64 = 5e-3;
/// Standard-error multiple granted to the Monte Carlo cross-checks.
pub const CROSSCHECK_SE_BAND: f64 = 3.0;

/// Outcome of a CLI action: files written plus the derived exit code.
#[derive(Debug, Default)]
pub struct RunReport {
    pub artifacts: Vec<PathBuf>,
    pub messages: Vec<String>,
    pub crosscheck_failures: usize,
    pub exit_code: i32,
}

fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.10e}")
    }
}

struct CsvBuilder {
    text: String,
}

impl CsvBuilder {
    fn new(header: &str) -> Self {
        CsvBuilder {
            text: format!("{header}\n"),
        }
    }

    fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }
}

fn write_artifact(
    dir: &Path,
    name: &str,
    body: &str,
    written: &mut Vec<PathBuf>,
) -> Result<(), XvaError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, body)?;
    written.push(path);
    Ok(())
}

fn remove_partial(written: &[PathBuf]) {
    for path in written {
        let _ = fs::remove_file(path);
    }
}

/// Closed-form route: the defaults formula when a credit block is present,
/// the no-default formula otherwise.
fn closed_form_breakdown(
    params: &MarketParams,
    claim: &ClaimSpec,
) -> Result<XvaBreakdown, XvaError> {
    if params.effective_credit()?.defaults_enabled {
        closed_form::default_xva(params, claim, 0.0, params.equity.s0)
    } else {
        closed_form::piterbarg_xva(params, claim, 0.0, params.equity.s0)
    }
}

fn closed_form_hedge(params: &MarketParams, claim: &ClaimSpec) -> Result<HedgeReport, XvaError> {
    if params.effective_credit()?.defaults_enabled {
        closed_form::default_hedge(params, claim, 0.0, params.equity.s0)
    } else {
        closed_form::piterbarg_hedge(params, claim, 0.0, params.equity.s0)
    }
}

fn pde_breakdown(
    params: &MarketParams,
    claim: &ClaimSpec,
    grid: &GridSettings,
) -> Result<XvaBreakdown, XvaError> {
    let side = match claim.side {
        TradeSide::Sell => Side::Seller,
        TradeSide::Buy => Side::Buyer,
    };
    let solution = bsde::solve(claim, params, side, grid)?;
    let s0 = params.equity.s0;
    let value = solution.initial_value(s0)?;
    let vhat = public_value(claim, params.rates.r_d, params.equity.sigma, 0.0, s0)?;
    Ok(XvaBreakdown {
        total: value - vhat,
        funding_leg: f64::NAN,
        dva_leg: f64::NAN,
        cva_leg: f64::NAN,
        collateral_leg: f64::NAN,
        adjustment_factor: if vhat != 0.0 { value / vhat } else { f64::NAN },
        vhat,
    })
}

fn xva_row(t: f64, s: f64, engine: &str, b: &XvaBreakdown) -> Vec<String> {
    vec![
        format!("{t}"),
        format!("{s}"),
        engine.to_string(),
        fmt_value(b.total),
        fmt_value(b.funding_leg),
        fmt_value(b.dva_leg),
        fmt_value(b.cva_leg),
        fmt_value(b.collateral_leg),
        fmt_value(b.adjustment_factor),
        fmt_value(b.vhat),
    ]
}

fn hedge_row(t: f64, s: f64, h: &HedgeReport) -> Vec<String> {
    vec![
        format!("{t}"),
        format!("{s}"),
        fmt_value(h.xi_stock),
        fmt_value(h.xi_bond_i),
        fmt_value(h.xi_bond_c),
        fmt_value(h.psi_repo),
        fmt_value(h.xi_funding),
    ]
}

struct CrosscheckRow {
    metric: String,
    engine_a: &'static str,
    engine_b: &'static str,
    value_a: f64,
    value_b: f64,
    se: f64,
    tol: f64,
}

impl CrosscheckRow {
    fn pass(&self) -> bool {
        (self.value_a - self.value_b).abs() <= self.tol
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.metric.clone(),
            self.engine_a.to_string(),
            self.engine_b.to_string(),
            fmt_value(self.value_a),
            fmt_value(self.value_b),
            fmt_value(self.value_a - self.value_b),
            fmt_value(self.se),
            fmt_value(self.tol),
            if self.pass() { "pass" } else { "fail" }.to_string(),
        ]
    }
}

fn crosscheck_rows(
    params: &MarketParams,
    claim: &ClaimSpec,
    config: &ScenarioConfig,
) -> Result<(Vec<CrosscheckRow>, Vec<(String, XvaBreakdown)>), XvaError> {
    let mut rows = Vec::new();
    let mut engines: Vec<(String, XvaBreakdown)> = Vec::new();

    let linear_rates = equal_rates(params).is_ok();
    let cf = if linear_rates {
        let b = closed_form_breakdown(params, claim)?;
        engines.push(("closed_form".into(), b));
        Some(b)
    } else {
        None
    };

    let pde = pde_breakdown(params, claim, &config.grid)?;
    engines.push(("pde".into(), pde));

    let mc_est = if linear_rates {
        let bundle = mc::simulate(params, claim, &config.mc)?;
        let est = mc::estimate_representation(&bundle, params, claim)?;
        engines.push(("mc".into(), est.to_breakdown()));
        Some(est)
    } else {
        None
    };

    if let Some(cf) = cf {
        let scale = (cf.vhat + cf.total).abs().max(cf.vhat.abs());
        rows.push(CrosscheckRow {
            metric: "replication_value".into(),
            engine_a: "closed_form",
            engine_b: "pde",
            value_a: cf.vhat + cf.total,
            value_b: pde.vhat + pde.total,
            se: f64::NAN,
            tol: CROSSCHECK_REL_TOL * scale,
        });
    }
    if let (Some(cf), Some(est)) = (&cf, &mc_est) {
        let legs = [
            ("funding_leg", cf.funding_leg, est.funding),
            ("dva_leg", cf.dva_leg, est.dva),
            ("cva_leg", cf.cva_leg, est.cva),
            ("collateral_leg", cf.collateral_leg, est.collateral),
        ];
        for (name, cf_leg, mc_leg) in legs {
            rows.push(CrosscheckRow {
                metric: name.into(),
                engine_a: "closed_form",
                engine_b: "mc",
                value_a: cf_leg,
                value_b: mc_leg.value,
                se: mc_leg.std_error,
                tol: CROSSCHECK_SE_BAND * mc_leg.std_error,
            });
        }
    }
    if let Some(est) = &mc_est {
        rows.push(CrosscheckRow {
            metric: "total".into(),
            engine_a: "pde",
            engine_b: "mc",
            value_a: pde.total,
            value_b: est.total.value,
            se: est.total.std_error,
            tol: CROSSCHECK_SE_BAND * est.total.std_error,
        });
    }
    Ok((rows, engines))
}

fn validation_gate(
    params: &MarketParams,
    force: bool,
    report: &mut RunReport,
) -> Result<bool, XvaError> {
    let validation = params.validate()?;
    if validation.passed() {
        return Ok(true);
    }
    report
        .messages
        .push(format!("validation violations:\n{validation}"));
    if force {
        report
            .messages
            .push("--force set: continuing despite violations".into());
        Ok(true)
    } else {
        report.exit_code = EXIT_VALIDATION;
        Ok(false)
    }
}

/// `xva validate`: check the scenario and report violations.
pub fn run_validate(config: &ScenarioConfig) -> Result<RunReport, XvaError> {
    let params = config.market_params();
    let mut report = RunReport::default();
    let validation = params.validate()?;
    if validation.passed() {
        report.messages.push("all rate conditions hold".into());
    } else {
        report.messages.push(format!("{validation}"));
        report.exit_code = EXIT_VALIDATION;
    }
    // surface claim construction problems here too
    config.claim_spec()?;
    Ok(report)
}

/// `xva price`: one engine pass (or all three in crosscheck mode), written
/// to `xva.csv` (and `crosscheck.csv` when cross-checking).
pub fn run_price(
    config: &ScenarioConfig,
    out_dir: &Path,
    force: bool,
) -> Result<RunReport, XvaError> {
    let params = config.market_params();
    let claim = config.claim_spec()?;
    let mut report = RunReport::default();
    if !validation_gate(&params, force, &mut report)? {
        return Ok(report);
    }
    let s0 = params.equity.s0;
    let mut xva = CsvBuilder::new(XVA_CSV_HEADER);
    let mut written = Vec::new();

    let result = (|| -> Result<(), XvaError> {
        match config.run.mode {
            RunMode::ClosedForm => {
                let b = closed_form_breakdown(&params, &claim)?;
                xva.row(&xva_row(0.0, s0, "closed_form", &b));
            }
            RunMode::Pde => {
                let b = pde_breakdown(&params, &claim, &config.grid)?;
                xva.row(&xva_row(0.0, s0, "pde", &b));
            }
            RunMode::Mc => {
                let bundle = mc::simulate(&params, &claim, &config.mc)?;
                let est = mc::estimate_representation(&bundle, &params, &claim)?;
                xva.row(&xva_row(0.0, s0, "mc", &est.to_breakdown()));
            }
            RunMode::Crosscheck => {
                let (rows, engines) = crosscheck_rows(&params, &claim, config)?;
                for (engine, b) in &engines {
                    xva.row(&xva_row(0.0, s0, engine, b));
                }
                let mut cc = CsvBuilder::new(CROSSCHECK_CSV_HEADER);
                for row in &rows {
                    if !row.pass() {
                        report.crosscheck_failures += 1;
                    }
                    cc.row(&row.cells());
                }
                write_artifact(out_dir, "crosscheck.csv", &cc.text, &mut written)?;
            }
        }
        write_artifact(out_dir, "xva.csv", &xva.text, &mut written)?;
        Ok(())
    })();
    if let Err(e) = result {
        remove_partial(&written);
        return Err(e);
    }
    report.artifacts = written;
    if report.crosscheck_failures > 0 {
        report.exit_code = EXIT_CROSSCHECK;
        report.messages.push(format!(
            "{} cross-check comparison(s) breached tolerance",
            report.crosscheck_failures
        ));
    }
    Ok(report)
}

/// `xva crosscheck`: price with every applicable engine and compare.
pub fn run_crosscheck(
    config: &ScenarioConfig,
    out_dir: &Path,
    force: bool,
) -> Result<RunReport, XvaError> {
    let mut config = config.clone();
    config.run.mode = RunMode::Crosscheck;
    run_price(&config, out_dir, force)
}

/// `xva interval`: buyer and seller lattice solves, written to
/// `interval.csv`.
pub fn run_interval(
    config: &ScenarioConfig,
    out_dir: &Path,
    force: bool,
) -> Result<RunReport, XvaError> {
    let params = config.market_params();
    let claim = config.claim_spec()?;
    let mut report = RunReport::default();
    if !validation_gate(&params, force, &mut report)? {
        return Ok(report);
    }
    let mut written = Vec::new();
    let result = (|| -> Result<(), XvaError> {
        let interval = bsde::interval(&claim, &params, &config.grid)?;
        let mut csv = CsvBuilder::new(INTERVAL_CSV_HEADER);
        csv.row(&[
            fmt_value(interval.v0_minus),
            fmt_value(interval.v0_plus),
            fmt_value(interval.width),
        ]);
        write_artifact(out_dir, "interval.csv", &csv.text, &mut written)?;
        Ok(())
    })();
    if let Err(e) = result {
        remove_partial(&written);
        return Err(e);
    }
    report.artifacts = written;
    Ok(report)
}

/// `xva hedge`: replicating positions at inception, written to `hedge.csv`.
pub fn run_hedge(
    config: &ScenarioConfig,
    out_dir: &Path,
    force: bool,
) -> Result<RunReport, XvaError> {
    let params = config.market_params();
    let claim = config.claim_spec()?;
    let mut report = RunReport::default();
    if !validation_gate(&params, force, &mut report)? {
        return Ok(report);
    }
    let s0 = params.equity.s0;
    let mut written = Vec::new();
    let result = (|| -> Result<(), XvaError> {
        let hedge = match config.run.mode {
            RunMode::ClosedForm => closed_form_hedge(&params, &claim)?,
            _ => {
                let side = match claim.side {
                    TradeSide::Sell => Side::Seller,
                    TradeSide::Buy => Side::Buyer,
                };
                let solution = bsde::solve(&claim, &params, side, &config.grid)?;
                bsde::extract_hedge(&solution, &params, 0.0, s0)?
            }
        };
        let mut csv = CsvBuilder::new(HEDGE_CSV_HEADER);
        csv.row(&hedge_row(0.0, s0, &hedge));
        write_artifact(out_dir, "hedge.csv", &csv.text, &mut written)?;
        Ok(())
    })();
    if let Err(e) = result {
        remove_partial(&written);
        return Err(e);
    }
    report.artifacts = written;
    Ok(report)
}

/// One computed sweep point.
pub struct SweepRow {
    pub coordinates: Vec<f64>,
    pub engine: &'static str,
    pub breakdown: XvaBreakdown,
    pub hedge: HedgeReport,
    pub interval_width: f64,
}

fn sweep_point(
    config: &ScenarioConfig,
    claim: &ClaimSpec,
    axes: &[SweepAxis],
    point: &[f64],
) -> Result<Vec<SweepRow>, XvaError> {
    let mut params = config.market_params();
    for (axis, &value) in axes.iter().zip(point) {
        axis.name.apply(&mut params, value)?;
    }
    let s0 = params.equity.s0;
    let engines: Vec<&'static str> = match config.run.mode {
        RunMode::ClosedForm => vec!["closed_form"],
        RunMode::Pde => vec!["pde"],
        RunMode::Mc => vec!["mc"],
        RunMode::Crosscheck => vec!["closed_form", "pde"],
    };
    let mut rows = Vec::with_capacity(engines.len());
    for engine in engines {
        let (breakdown, hedge, width) = match engine {
            "closed_form" => {
                let b = closed_form_breakdown(&params, claim)?;
                let h = closed_form_hedge(&params, claim)?;
                // linear drivers: buyer and seller coincide
                (b, h, 0.0)
            }
            "pde" => {
                let seller = bsde::solve(claim, &params, Side::Seller, &config.grid)?;
                let buyer = bsde::solve(claim, &params, Side::Buyer, &config.grid)?;
                let own = match claim.side {
                    TradeSide::Sell => &seller,
                    TradeSide::Buy => &buyer,
                };
                let value = own.initial_value(s0)?;
                let vhat = public_value(claim, params.rates.r_d, params.equity.sigma, 0.0, s0)?;
                let b = XvaBreakdown {
                    total: value - vhat,
                    funding_leg: f64::NAN,
                    dva_leg: f64::NAN,
                    cva_leg: f64::NAN,
                    collateral_leg: f64::NAN,
                    adjustment_factor: if vhat != 0.0 { value / vhat } else { f64::NAN },
                    vhat,
                };
                let h = bsde::extract_hedge(own, &params, 0.0, s0)?;
                let width = seller.initial_value(s0)? - buyer.initial_value(s0)?;
                (b, h, width)
            }
            _ => {
                let bundle = mc::simulate(&params, claim, &config.mc)?;
                let est = mc::estimate_representation(&bundle, &params, claim)?;
                let h = closed_form_hedge(&params, claim)?;
                (est.to_breakdown(), h, 0.0)
            }
        };
        rows.push(SweepRow {
            coordinates: point.to_vec(),
            engine,
            breakdown,
            hedge,
            interval_width: width,
        });
    }
    Ok(rows)
}

/// Computes the sweep grid: points are dispatched to a worker pool, results
/// assembled in deterministic lexicographic order.
pub fn sweep(config: &ScenarioConfig, axes: &[SweepAxis]) -> Result<Vec<SweepRow>, XvaError> {
    let claim = config.claim_spec()?;
    let points = sweep_points(axes)?;
    let blocks = crate::math::map_blocks(points.len(), 1, crate::math::worker_threads(), |range| {
        range
            .map(|i| sweep_point(config, &claim, axes, &points[i]))
            .collect::<Vec<_>>()
    });
    let mut rows = Vec::new();
    for block in blocks {
        for result in block {
            rows.extend(result?);
        }
    }
    Ok(rows)
}

/// `xva sweep`: axis product written to `sweep.csv`.
pub fn run_sweep(
    config: &ScenarioConfig,
    axes: &[SweepAxis],
    out_dir: &Path,
    force: bool,
) -> Result<RunReport, XvaError> {
    let params = config.market_params();
    let mut report = RunReport::default();
    if !validation_gate(&params, force, &mut report)? {
        return Ok(report);
    }
    let mut written = Vec::new();
    let result = (|| -> Result<(), XvaError> {
        let rows = sweep(config, axes)?;
        let axis_labels: Vec<String> = axes.iter().map(|a| a.name.label().to_string()).collect();
        let header = format!(
            "{},engine,total,funding_leg,dva_leg,cva_leg,collateral_leg,factor,vhat,\
             xi_stock,xi_bond_I,xi_bond_C,psi_repo,xi_funding,width",
            axis_labels.join(",")
        );
        let mut csv = CsvBuilder::new(&header);
        for row in &rows {
            let mut cells: Vec<String> = row.coordinates.iter().map(|v| format!("{v}")).collect();
            cells.push(row.engine.to_string());
            cells.extend([
                fmt_value(row.breakdown.total),
                fmt_value(row.breakdown.funding_leg),
                fmt_value(row.breakdown.dva_leg),
                fmt_value(row.breakdown.cva_leg),
                fmt_value(row.breakdown.collateral_leg),
                fmt_value(row.breakdown.adjustment_factor),
                fmt_value(row.breakdown.vhat),
                fmt_value(row.hedge.xi_stock),
                fmt_value(row.hedge.xi_bond_i),
                fmt_value(row.hedge.xi_bond_c),
                fmt_value(row.hedge.psi_repo),
                fmt_value(row.hedge.xi_funding),
                fmt_value(row.interval_width),
            ]);
            csv.row(&cells);
        }
        write_artifact(out_dir, "sweep.csv", &csv.text, &mut written)?;
        Ok(())
    })();
    if let Err(e) = result {
        remove_partial(&written);
        return Err(e);
    }
    report.artifacts = written;
    Ok(report)
}

/// Maps an engine error to the CLI exit code contract.
pub fn exit_code_for(err: &XvaError) -> i32 {
    match err {
        XvaError::Scenario(_) | XvaError::NonFinite { .. } | XvaError::InvalidParams(_) => {
            EXIT_VALIDATION
        }
        _ => EXIT_NUMERICAL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(mode: &str) -> ScenarioConfig {
        let text = format!(
            r#"{{
            "rates": {{"r_f_plus": 0.08, "r_f_minus": 0.08, "r_r_plus": 0.05,
                      "r_r_minus": 0.05, "r_c_plus": 0.01, "r_c_minus": 0.01, "r_D": 0.05}},
            "credit": {{"L_I": 0.5, "L_C": 0.5, "h_I_Q": 0.15, "h_C_Q": 0.2}},
            "equity": {{"S0": 100.0, "mu": 0.05, "sigma": 0.2}},
            "collateral": {{"alpha": 0.25}},
            "claim": {{"kind": "call", "strike": 100.0, "maturity": 1.0}},
            "grid": {{"n_time": 60, "n_space": 120, "width_sigmas": 6.0,
                      "picard_tol": 1e-10, "picard_max": 50}},
            "mc": {{"n_paths": 4000, "n_steps": 50, "seed": 3, "antithetic": false,
                    "resource_cap": 50000000, "tie_break": "counterparty_first"}},
            "run": {{"mode": "{mode}"}}
        }}"#
        );
        ScenarioConfig::from_json(&text).unwrap()
    }

    #[test]
    fn price_crosscheck_writes_artifacts_and_passes() {
        let dir = std::env::temp_dir().join(format!("xva_report_test_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        // figure-style scenario needs --force (r_f above the repo borrow rate)
        let report = run_price(&scenario("crosscheck"), &dir, true).unwrap();
        assert_eq!(report.exit_code, EXIT_OK, "{:?}", report.messages);
        let xva = std::fs::read_to_string(dir.join("xva.csv")).unwrap();
        assert!(xva.starts_with(XVA_CSV_HEADER));
        assert_eq!(xva.lines().count(), 4); // header + three engines
        let cc = std::fs::read_to_string(dir.join("crosscheck.csv")).unwrap();
        assert!(cc.starts_with(CROSSCHECK_CSV_HEADER));
        assert!(cc.contains("pass"));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn validation_gate_blocks_without_force() {
        let config = scenario("closed_form");
        let dir = std::env::temp_dir().join("xva_report_gate_test");
        let report = run_price(&config, &dir, false).unwrap();
        assert_eq!(report.exit_code, EXIT_VALIDATION);
        assert!(report.artifacts.is_empty());
    }

    #[test]
    fn sweep_rows_deterministic_and_tagged() {
        let mut config = scenario("closed_form");
        config.run.mode = RunMode::ClosedForm;
        let axes = vec![
            SweepAxis::parse("r_f=0.05:0.06:0.005").unwrap(),
            SweepAxis::parse("alpha=0,1").unwrap(),
        ];
        let rows = sweep(&config, &axes).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.engine == "closed_form"));
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&rows[0].coordinates, &[0.05, 0.0]));
        assert!(close(&rows[5].coordinates, &[0.06, 1.0]));
        let again = sweep(&config, &axes).unwrap();
        for (a, b) in rows.iter().zip(&again) {
            assert_eq!(a.breakdown.total, b.breakdown.total);
        }
    }
}

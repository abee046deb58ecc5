//! Scenario files: strict JSON schema binding market, claim, grid and
//! Monte Carlo settings, plus the sweep-axis mini-language of the CLI.

use serde::{Deserialize, Serialize};

use crate::bsde::GridSettings;
use crate::claim::{ClaimSpec, TradeSide};
use crate::error::XvaError;
use crate::market::{CreditParams, EquityParams, MarketParams, RateSet};
use crate::mc::McSettings;

/// Engine selection for `price`, `hedge` and `sweep`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    ClosedForm,
    Pde,
    Mc,
    #[default]
    Crosscheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Call,
    Put,
    Custom,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimConfig {
    pub kind: ClaimKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    pub maturity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub side: TradeSide,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollateralConfig {
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub mode: RunMode,
}

/// One parsed scenario file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rates: RateSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credit: Option<CreditParams>,
    pub equity: EquityParams,
    pub collateral: CollateralConfig,
    pub claim: ClaimConfig,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub run: RunOptions,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, XvaError> {
        serde_json::from_str(text).map_err(|e| XvaError::Scenario(format!("bad scenario: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn market_params(&self) -> MarketParams {
        MarketParams {
            rates: self.rates,
            credit: self.credit,
            equity: self.equity,
            alpha: self.collateral.alpha,
        }
    }

    pub fn claim_spec(&self) -> Result<ClaimSpec, XvaError> {
        let claim = match self.claim.kind {
            ClaimKind::Call => ClaimSpec::call(
                self.claim
                    .strike
                    .ok_or_else(|| XvaError::Scenario("call claim needs a strike".into()))?,
                self.claim.maturity,
            )?,
            ClaimKind::Put => ClaimSpec::put(
                self.claim
                    .strike
                    .ok_or_else(|| XvaError::Scenario("put claim needs a strike".into()))?,
                self.claim.maturity,
            )?,
            ClaimKind::Custom => ClaimSpec::custom(
                self.claim
                    .knots
                    .clone()
                    .ok_or_else(|| XvaError::Scenario("custom claim needs a knot list".into()))?,
                self.claim.maturity,
            )?,
        };
        Ok(claim.with_side(self.claim.side))
    }
}

/// Maximum number of points a sweep may produce.
pub const MAX_SWEEP_POINTS: usize = 10_000;

/// Parameters a sweep axis may drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisName {
    RFunding,
    RFundingLend,
    RFundingBorrow,
    RCollateral,
    Alpha,
    Sigma,
    HIQ,
    HCQ,
    LossI,
    LossC,
}

impl AxisName {
    pub fn parse(name: &str) -> Result<Self, XvaError> {
        Ok(match name {
            "r_f" => AxisName::RFunding,
            "r_f_plus" => AxisName::RFundingLend,
            "r_f_minus" => AxisName::RFundingBorrow,
            "r_c" => AxisName::RCollateral,
            "alpha" => AxisName::Alpha,
            "sigma" => AxisName::Sigma,
            "h_I_Q" => AxisName::HIQ,
            "h_C_Q" => AxisName::HCQ,
            "L_I" => AxisName::LossI,
            "L_C" => AxisName::LossC,
            other => {
                return Err(XvaError::Scenario(format!(
                    "unknown sweep axis '{other}' (try r_f, r_f_plus, r_f_minus, r_c, alpha, sigma, h_I_Q, h_C_Q, L_I, L_C)"
                )))
            }
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            AxisName::RFunding => "r_f",
            AxisName::RFundingLend => "r_f_plus",
            AxisName::RFundingBorrow => "r_f_minus",
            AxisName::RCollateral => "r_c",
            AxisName::Alpha => "alpha",
            AxisName::Sigma => "sigma",
            AxisName::HIQ => "h_I_Q",
            AxisName::HCQ => "h_C_Q",
            AxisName::LossI => "L_I",
            AxisName::LossC => "L_C",
        }
    }

    pub fn apply(&self, params: &mut MarketParams, value: f64) -> Result<(), XvaError> {
        fn credit(p: &mut MarketParams) -> Result<&mut CreditParams, XvaError> {
            p.credit.as_mut().ok_or_else(|| {
                XvaError::Scenario("credit-axis sweep needs a credit block in the scenario".into())
            })
        }
        match self {
            AxisName::RFunding => {
                params.rates.r_f_plus = value;
                params.rates.r_f_minus = value;
            }
            AxisName::RFundingLend => params.rates.r_f_plus = value,
            AxisName::RFundingBorrow => params.rates.r_f_minus = value,
            AxisName::RCollateral => {
                params.rates.r_c_plus = value;
                params.rates.r_c_minus = value;
            }
            AxisName::Alpha => params.alpha = value,
            AxisName::Sigma => params.equity.sigma = value,
            AxisName::HIQ => credit(params)?.h_i_q = Some(value),
            AxisName::HCQ => credit(params)?.h_c_q = Some(value),
            AxisName::LossI => credit(params)?.l_i = value,
            AxisName::LossC => credit(params)?.l_c = value,
        }
        Ok(())
    }
}

/// One sweep axis: a parameter name and its value list in sweep order.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub name: AxisName,
    pub values: Vec<f64>,
}

impl SweepAxis {
    /// Parses `name=a:b:step` (inclusive range) or `name=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self, XvaError> {
        let (name, rest) = spec
            .split_once('=')
            .ok_or_else(|| XvaError::Scenario(format!("axis '{spec}' must look like name=...")))?;
        let name = AxisName::parse(name.trim())?;
        let rest = rest.trim();
        let bad = |what: &str| XvaError::Scenario(format!("axis '{spec}': {what}"));
        let values = if rest.contains(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("range needs start:end:step"));
            }
            let start: f64 = parts[0].parse().map_err(|_| bad("bad range start"))?;
            let end: f64 = parts[1].parse().map_err(|_| bad("bad range end"))?;
            let step: f64 = parts[2].parse().map_err(|_| bad("bad range step"))?;
            if !(step > 0.0) || !start.is_finite() || !end.is_finite() || end < start {
                return Err(bad("range must be finite with positive step"));
            }
            let n = ((end - start) / step + 1e-9).floor() as usize + 1;
            (0..n).map(|i| start + i as f64 * step).collect()
        } else {
            rest.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad("bad list value")))
                .collect::<Result<Vec<f64>, XvaError>>()?
        };
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(bad("axis values must be finite and nonempty"));
        }
        Ok(SweepAxis { name, values })
    }
}

/// All points of the axis product in lexicographic order (first axis
/// outermost). Errors when the product exceeds [`MAX_SWEEP_POINTS`].
pub fn sweep_points(axes: &[SweepAxis]) -> Result<Vec<Vec<f64>>, XvaError> {
    if axes.is_empty() {
        return Err(XvaError::Scenario("sweep needs at least one --axis".into()));
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    if total > MAX_SWEEP_POINTS {
        return Err(XvaError::Scenario(format!(
            "sweep of {total} points exceeds the {MAX_SWEEP_POINTS}-point cap"
        )));
    }
    let mut points = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for prefix in &points {
            for &v in &axis.values {
                let mut row = prefix.clone();
                row.push(v);
                next.push(row);
            }
        }
        points = next;
    }
    Ok(points)
}

/// Human-readable schema of the scenario file, units included.
pub const SCHEMA_MD: &str = r#"# Scenario file schema

A scenario is a single strict JSON object: unknown keys are rejected.
All rates are continuous compounding per year (decimal, e.g. `0.05`);
times and maturities are in years; prices and values in currency units.

## `rates` (required)

| field | meaning |
|-------|---------|
| `r_f_plus` | funding rate earned when lending to the treasury |
| `r_f_minus` | funding rate paid when borrowing from the treasury |
| `r_r_plus` | repo rate earned when lending to the repo market |
| `r_r_minus` | repo rate paid when borrowing from the repo market |
| `r_c_plus` | rate on collateral the hedger posted |
| `r_c_minus` | rate on collateral the hedger received |
| `r_D` | public discount rate used for closeout quotes |

## `credit` (optional; omit for the no-default model)

| field | meaning |
|-------|---------|
| `h_I_P`, `h_C_P` | physical default intensities per year (optional when the `h_*_Q` override is given) |
| `r_I`, `r_C` | bond return rates (optional; back-solved from the override, else `r_D`) |
| `L_I`, `L_C` | loss rates in `[0, 1]` (required) |
| `h_I_Q`, `h_C_Q` |direct valuation-measure intensity overrides (optional) |

## `equity` (required)

`S0` (spot, > 0), `mu` (physical drift), `sigma` (volatility, > 0).

## `collateral` (required)

`alpha` in `[0, 1]`: fraction of the public quote posted as cash collateral.

## `claim` (required)

`kind` one of `call`, `put`, `custom`; `strike` (call/put); `maturity` in
years; `knots` for custom payoffs as `[[price, payoff], ...]` with strictly
increasing prices (linear between knots, end segments extend); optional
`side` = `sell` (default) or `buy`.

## `grid` (optional)

`n_time` (default 200), `n_space` (400), `width_sigmas` (6.0),
`picard_tol` (1e-10), `picard_max` (50).

## `mc` (optional)

`n_paths` (default 100000), `n_steps` (250), `seed` (42), `antithetic`
(false), `resource_cap` (50000000, bounds `n_paths * n_steps`),
`tie_break` (`counterparty_first` default, or `investor_first`).

## `run` (optional)

`mode` one of `closed_form`, `pde`, `mc`, `crosscheck` (default).
"#;

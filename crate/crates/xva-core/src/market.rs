//! Market parameters: rate set, credit inputs, equity dynamics and the
//! no-arbitrage rate checks that gate every valuation run.

use serde::{Deserialize, Serialize};

use crate::error::XvaError;

/// The seven interest rates of the trading environment, all continuous
/// compounding, per year.
///
/// `plus` rates are earned when lending (positive account position), `minus`
/// rates are paid when borrowing. `r_d` is the public discount rate used by
/// the valuation agent for closeout quotes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSet {
    pub r_f_plus: f64,
    pub r_f_minus: f64,
    pub r_r_plus: f64,
    pub r_r_minus: f64,
    pub r_c_plus: f64,
    pub r_c_minus: f64,
    #[serde(rename = "r_D")]
    pub r_d: f64,
}

impl RateSet {
    /// All seven rates set to the same value.
    pub fn flat(rate: f64) -> Self {
        RateSet {
            r_f_plus: rate,
            r_f_minus: rate,
            r_r_plus: rate,
            r_r_minus: rate,
            r_c_plus: rate,
            r_c_minus: rate,
            r_d: rate,
        }
    }

    fn fields(&self) -> [(&'static str, f64); 7] {
        [
            ("r_f_plus", self.r_f_plus),
            ("r_f_minus", self.r_f_minus),
            ("r_r_plus", self.r_r_plus),
            ("r_r_minus", self.r_r_minus),
            ("r_c_plus", self.r_c_plus),
            ("r_c_minus", self.r_c_minus),
            ("r_D", self.r_d),
        ]
    }
}

/// Credit inputs for the two names: the hedging investor `I` and the
/// counterparty `C`.
///
/// Either the physical parameterization (`h_I_P`, `r_I`) or a direct
/// valuation-measure intensity override (`h_I_Q`) may be supplied. When the
/// override is present the bond return is back-solved as
/// `r_I = r_D + h_I_Q - h_I_P`, with `h_I_P` defaulting to `h_I_Q`, keeping
/// the bond dynamics consistent with the quoted intensity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreditParams {
    #[serde(rename = "h_I_P", default, skip_serializing_if = "Option::is_none")]
    pub h_i_p: Option<f64>,
    #[serde(rename = "h_C_P", default, skip_serializing_if = "Option::is_none")]
    pub h_c_p: Option<f64>,
    #[serde(rename = "r_I", default, skip_serializing_if = "Option::is_none")]
    pub r_bond_i: Option<f64>,
    #[serde(rename = "r_C", default, skip_serializing_if = "Option::is_none")]
    pub r_bond_c: Option<f64>,
    #[serde(rename = "L_I")]
    pub l_i: f64,
    #[serde(rename = "L_C")]
    pub l_c: f64,
    #[serde(rename = "h_I_Q", default, skip_serializing_if = "Option::is_none")]
    pub h_i_q: Option<f64>,
    #[serde(rename = "h_C_Q", default, skip_serializing_if = "Option::is_none")]
    pub h_c_q: Option<f64>,
}

/// Stock dynamics: spot, physical drift and volatility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquityParams {
    #[serde(rename = "S0")]
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Full parameter set consumed by every engine.
///
/// `credit: None` selects the no-default model: no risky bonds, both
/// intensities zero, the transaction always runs to maturity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarketParams {
    pub rates: RateSet,
    pub credit: Option<CreditParams>,
    pub equity: EquityParams,
    /// Collateralization level in `[0, 1]`: the fraction of the public value
    /// posted as cash collateral.
    pub alpha: f64,
}

/// Per-name credit data after normalization of overrides and defaults.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveCredit {
    pub h_i_p: f64,
    pub h_c_p: f64,
    pub r_bond_i: f64,
    pub r_bond_c: f64,
    pub h_i_q: f64,
    pub h_c_q: f64,
    pub l_i: f64,
    pub l_c: f64,
    /// False when the scenario carries no credit block at all.
    pub defaults_enabled: bool,
}

/// One failed check, identified by a stable id plus a human-readable detail.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub id: &'static str,
    pub detail: String,
}

/// Outcome of [`MarketParams::validate`]: the full list of violated
/// inequalities, empty on pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.violations.iter().any(|v| v.id == id)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return write!(f, "all rate conditions hold");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", v.id, v.detail)?;
        }
        Ok(())
    }
}

/// Stable identifiers of the seven no-arbitrage rate inequalities.
pub mod check_id {
    pub const REPO_LEND_VS_FUNDING_LEND: &str = "r_r_plus<=r_f_plus";
    pub const FUNDING_LEND_VS_REPO_BORROW: &str = "r_f_plus<=r_r_minus";
    pub const FUNDING_LEND_VS_BORROW: &str = "r_f_plus<=r_f_minus";
    pub const FUNDING_VS_BOND_I: &str = "r_f_plus|r_D<r_I+h_I_P";
    pub const FUNDING_VS_BOND_C: &str = "r_f_plus|r_D<r_C+h_C_P";
    pub const COLLATERAL_VS_FUNDING_BORROW: &str = "r_c_plus|r_c_minus<=r_f_minus";
    pub const FUNDING_BORROW_VS_BONDS: &str = "r_f_minus<=(r_I+h_I_P)&(r_C+h_C_P)";
    pub const ALPHA_RANGE: &str = "0<=alpha<=1";
    pub const SIGMA_POSITIVE: &str = "sigma>0";
    pub const SPOT_POSITIVE: &str = "S0>0";
    pub const LOSS_RATE_I_RANGE: &str = "0<=L_I<=1";
    pub const LOSS_RATE_C_RANGE: &str = "0<=L_C<=1";
    pub const INTENSITY_I_POSITIVE: &str = "h_I_Q>0";
    pub const INTENSITY_C_POSITIVE: &str = "h_C_Q>0";
    pub const INTENSITY_I_P_NONNEG: &str = "h_I_P>=0";
    pub const INTENSITY_C_P_NONNEG: &str = "h_C_P>=0";
}

/// Discount factor `e^{-rate * t}`.
pub fn discount(rate: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    (-rate * t).exp()
}

/// Cash-account value `e^{rate * t}`; reciprocal of [`discount`].
pub fn account(rate: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    (rate * t).exp()
}

impl MarketParams {
    /// Resolves optional credit inputs into a concrete per-name set.
    ///
    /// Errors only on structurally unusable input (a credit block with
    /// neither a physical intensity nor an override for some name).
    pub fn effective_credit(&self) -> Result<EffectiveCredit, XvaError> {
        let r_d = self.rates.r_d;
        let Some(c) = self.credit else {
            return Ok(EffectiveCredit {
                h_i_p: 0.0,
                h_c_p: 0.0,
                r_bond_i: r_d,
                r_bond_c: r_d,
                h_i_q: 0.0,
                h_c_q: 0.0,
                l_i: 0.0,
                l_c: 0.0,
                defaults_enabled: false,
            });
        };
        let resolve = |name: &'static str,
                       h_p: Option<f64>,
                       r_bond: Option<f64>,
                       h_q: Option<f64>|
         -> Result<(f64, f64, f64), XvaError> {
            match h_q {
                Some(hq) => {
                    let hp = h_p.unwrap_or(hq);
                    Ok((hp, r_d + hq - hp, hq))
                }
                None => {
                    let hp = h_p.ok_or_else(|| {
                        XvaError::InvalidParams(format!(
                            "credit block for {name} needs h_{name}_P or h_{name}_Q"
                        ))
                    })?;
                    let rb = r_bond.unwrap_or(r_d);
                    Ok((hp, rb, rb - r_d + hp))
                }
            }
        };
        let (h_i_p, r_bond_i, h_i_q) = resolve("I", c.h_i_p, c.r_bond_i, c.h_i_q)?;
        let (h_c_p, r_bond_c, h_c_q) = resolve("C", c.h_c_p, c.r_bond_c, c.h_c_q)?;
        Ok(EffectiveCredit {
            h_i_p,
            h_c_p,
            r_bond_i,
            r_bond_c,
            h_i_q,
            h_c_q,
            l_i: c.l_i,
            l_c: c.l_c,
            defaults_enabled: true,
        })
    }

    /// Checks the no-arbitrage rate inequalities and the parameter domains.
    ///
    /// Non-finite input is a hard error (never a partial report). The three
    /// bond-side inequalities apply only when a credit block is present.
    pub fn validate(&self) -> Result<ValidationReport, XvaError> {
        for (field, value) in self.rates.fields() {
            if !value.is_finite() {
                return Err(XvaError::NonFinite { field });
            }
        }
        for (field, value) in [
            ("S0", self.equity.s0),
            ("mu", self.equity.mu),
            ("sigma", self.equity.sigma),
            ("alpha", self.alpha),
        ] {
            if !value.is_finite() {
                return Err(XvaError::NonFinite { field });
            }
        }
        if let Some(c) = self.credit {
            for (field, value) in [
                ("h_I_P", c.h_i_p.unwrap_or(0.0)),
                ("h_C_P", c.h_c_p.unwrap_or(0.0)),
                ("r_I", c.r_bond_i.unwrap_or(0.0)),
                ("r_C", c.r_bond_c.unwrap_or(0.0)),
                ("L_I", c.l_i),
                ("L_C", c.l_c),
                ("h_I_Q", c.h_i_q.unwrap_or(0.0)),
                ("h_C_Q", c.h_c_q.unwrap_or(0.0)),
            ] {
                if !value.is_finite() {
                    return Err(XvaError::NonFinite { field });
                }
            }
        }

        let mut violations = Vec::new();
        let mut check = |ok: bool, id: &'static str, detail: String| {
            if !ok {
                violations.push(Violation { id, detail });
            }
        };

        let r = &self.rates;
        check(
            r.r_r_plus <= r.r_f_plus,
            check_id::REPO_LEND_VS_FUNDING_LEND,
            format!("r_r_plus={} exceeds r_f_plus={}", r.r_r_plus, r.r_f_plus),
        );
        check(
            r.r_f_plus <= r.r_r_minus,
            check_id::FUNDING_LEND_VS_REPO_BORROW,
            format!("r_f_plus={} exceeds r_r_minus={}", r.r_f_plus, r.r_r_minus),
        );
        check(
            r.r_f_plus <= r.r_f_minus,
            check_id::FUNDING_LEND_VS_BORROW,
            format!("r_f_plus={} exceeds r_f_minus={}", r.r_f_plus, r.r_f_minus),
        );
        check(
            r.r_c_plus.max(r.r_c_minus) <= r.r_f_minus,
            check_id::COLLATERAL_VS_FUNDING_BORROW,
            format!(
                "collateral rate max({}, {}) exceeds funding borrow rate {}",
                r.r_c_plus, r.r_c_minus, r.r_f_minus
            ),
        );

        if self.credit.is_some() {
            let c = self.effective_credit()?;
            let yield_i = c.r_bond_i + c.h_i_p;
            let yield_c = c.r_bond_c + c.h_c_p;
            let lend_floor = r.r_f_plus.max(r.r_d);
            check(
                lend_floor < yield_i,
                check_id::FUNDING_VS_BOND_I,
                format!("max(r_f_plus, r_D)={lend_floor} not below r_I+h_I_P={yield_i}"),
            );
            check(
                lend_floor < yield_c,
                check_id::FUNDING_VS_BOND_C,
                format!("max(r_f_plus, r_D)={lend_floor} not below r_C+h_C_P={yield_c}"),
            );
            check(
                r.r_f_minus <= yield_i.min(yield_c),
                check_id::FUNDING_BORROW_VS_BONDS,
                format!(
                    "r_f_minus={} exceeds min bond yield {}",
                    r.r_f_minus,
                    yield_i.min(yield_c)
                ),
            );
            check(
                c.h_i_p >= 0.0,
                check_id::INTENSITY_I_P_NONNEG,
                format!("h_I_P={} is negative", c.h_i_p),
            );
            check(
                c.h_c_p >= 0.0,
                check_id::INTENSITY_C_P_NONNEG,
                format!("h_C_P={} is negative", c.h_c_p),
            );
            check(
                c.h_i_q > 0.0,
                check_id::INTENSITY_I_POSITIVE,
                format!("risk-neutral intensity of I is {} (must be > 0)", c.h_i_q),
            );
            check(
                c.h_c_q > 0.0,
                check_id::INTENSITY_C_POSITIVE,
                format!("risk-neutral intensity of C is {} (must be > 0)", c.h_c_q),
            );
            check(
                (0.0..=1.0).contains(&c.l_i),
                check_id::LOSS_RATE_I_RANGE,
                format!("L_I={} outside [0, 1]", c.l_i),
            );
            check(
                (0.0..=1.0).contains(&c.l_c),
                check_id::LOSS_RATE_C_RANGE,
                format!("L_C={} outside [0, 1]", c.l_c),
            );
        }

        check(
            (0.0..=1.0).contains(&self.alpha),
            check_id::ALPHA_RANGE,
            format!("alpha={} outside [0, 1]", self.alpha),
        );
        check(
            self.equity.sigma > 0.0,
            check_id::SIGMA_POSITIVE,
            format!("sigma={} not positive", self.equity.sigma),
        );
        check(
            self.equity.s0 > 0.0,
            check_id::SPOT_POSITIVE,
            format!("S0={} not positive", self.equity.s0),
        );

        Ok(ValidationReport { violations })
    }

    /// Risk-neutral default intensities `(h_I_Q, h_C_Q)`.
    ///
    /// Direct overrides take precedence; otherwise derived as
    /// `h_Q = r_bond - r_D + h_P`. Both must be strictly positive when a
    /// credit block is present; the no-default model returns `(0, 0)`.
    pub fn risk_neutral_intensities(&self) -> Result<(f64, f64), XvaError> {
        let c = self.effective_credit()?;
        if !c.defaults_enabled {
            return Ok((0.0, 0.0));
        }
        if c.h_i_q <= 0.0 {
            return Err(XvaError::InvalidParams(format!(
                "risk-neutral default intensity of the investor is {} (must be > 0)",
                c.h_i_q
            )));
        }
        if c.h_c_q <= 0.0 {
            return Err(XvaError::InvalidParams(format!(
                "risk-neutral default intensity of the counterparty is {} (must be > 0)",
                c.h_c_q
            )));
        }
        Ok((c.h_i_q, c.h_c_q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_params() -> MarketParams {
        MarketParams {
            rates: RateSet::flat(0.05),
            credit: Some(CreditParams {
                h_i_p: Some(0.2),
                h_c_p: Some(0.2),
                r_bond_i: Some(0.0),
                r_bond_c: Some(0.0),
                l_i: 0.5,
                l_c: 0.5,
                h_i_q: None,
                h_c_q: None,
            }),
            equity: EquityParams {
                s0: 100.0,
                mu: 0.05,
                sigma: 0.2,
            },
            alpha: 0.5,
        }
    }

    #[test]
    fn flat_rates_with_positive_hazard_pass() {
        // all rates 0.05, h_P = 0.2, r_bond = 0: 0.05 < 0.2 holds
        let report = base_params().validate().unwrap();
        assert!(report.passed(), "unexpected violations: {report}");
    }

    #[test]
    fn repo_lend_above_funding_flags_named_violation() {
        let mut p = base_params();
        p.rates.r_r_plus = 0.06;
        p.rates.r_f_minus = 0.05;
        let report = p.validate().unwrap();
        assert!(report.contains(check_id::REPO_LEND_VS_FUNDING_LEND));
    }

    #[test]
    fn collateral_rate_above_funding_borrow_flagged() {
        let mut p = base_params();
        p.rates.r_c_minus = 0.09;
        p.rates.r_f_minus = 0.08;
        p.rates.r_f_plus = 0.05;
        let report = p.validate().unwrap();
        assert!(report.contains(check_id::COLLATERAL_VS_FUNDING_BORROW));
    }

    #[test]
    fn non_finite_input_is_rejected_not_reported() {
        let mut p = base_params();
        p.rates.r_f_plus = f64::NAN;
        match p.validate() {
            Err(XvaError::NonFinite { field }) => assert_eq!(field, "r_f_plus"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn derived_intensity_matches_hand_value() {
        let mut p = base_params();
        p.credit = Some(CreditParams {
            h_i_p: Some(0.10),
            h_c_p: Some(0.10),
            r_bond_i: Some(0.10),
            r_bond_c: Some(0.05),
            l_i: 0.5,
            l_c: 0.5,
            h_i_q: None,
            h_c_q: None,
        });
        let (h_i, h_c) = p.risk_neutral_intensities().unwrap();
        assert!((h_i - 0.15).abs() < 1e-15); // r_I=0.10, r_D=0.05, h_P=0.10
        assert!((h_c - 0.10).abs() < 1e-15); // r_C = r_D leaves h_Q = h_P
    }

    #[test]
    fn overrides_returned_verbatim_and_bond_yield_backsolved() {
        let mut p = base_params();
        p.credit = Some(CreditParams {
            h_i_p: None,
            h_c_p: None,
            r_bond_i: None,
            r_bond_c: None,
            l_i: 0.5,
            l_c: 0.5,
            h_i_q: Some(0.15),
            h_c_q: Some(0.2),
        });
        let (h_i, h_c) = p.risk_neutral_intensities().unwrap();
        assert_eq!((h_i, h_c), (0.15, 0.2));
        let eff = p.effective_credit().unwrap();
        assert!((eff.r_bond_i - p.rates.r_d).abs() < 1e-15);
        assert_eq!(eff.h_i_p, 0.15);
    }

    #[test]
    fn non_positive_derived_intensity_names_party() {
        let mut p = base_params();
        p.credit = Some(CreditParams {
            h_i_p: Some(0.01),
            h_c_p: Some(0.2),
            r_bond_i: Some(0.0),
            r_bond_c: Some(0.0),
            l_i: 0.0,
            l_c: 0.0,
            h_i_q: None,
            h_c_q: None,
        });
        let err = p.risk_neutral_intensities().unwrap_err();
        assert!(err.to_string().contains("investor"), "{err}");
    }

    #[test]
    fn no_default_mode_reports_zero_intensities() {
        let mut p = base_params();
        p.credit = None;
        assert_eq!(p.risk_neutral_intensities().unwrap(), (0.0, 0.0));
        assert!(p.validate().unwrap().passed());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn validate_is_idempotent_and_deterministic(
                r_f_plus in -0.02f64..0.12,
                r_f_minus in -0.02f64..0.12,
                r_r_plus in -0.02f64..0.12,
                r_r_minus in -0.02f64..0.12,
                r_c_plus in -0.02f64..0.12,
                r_c_minus in -0.02f64..0.12,
                r_d in -0.02f64..0.12,
                h in 0.01f64..0.8,
                alpha in -0.2f64..1.2,
            ) {
                let params = MarketParams {
                    rates: RateSet { r_f_plus, r_f_minus, r_r_plus, r_r_minus, r_c_plus, r_c_minus, r_d },
                    credit: Some(CreditParams {
                        h_i_p: Some(h), h_c_p: Some(h),
                        r_bond_i: Some(0.0), r_bond_c: Some(0.0),
                        l_i: 0.5, l_c: 0.5, h_i_q: None, h_c_q: None,
                    }),
                    equity: EquityParams { s0: 100.0, mu: 0.05, sigma: 0.2 },
                    alpha,
                };
                let a = params.validate().unwrap();
                let b = params.validate().unwrap();
                prop_assert_eq!(&a.violations, &b.violations);
            }

            #[test]
            fn flat_rates_with_positive_physical_hazard_always_pass(
                rate in -0.05f64..0.15,
                h_i in 1e-6f64..2.0,
                h_c in 1e-6f64..2.0,
                alpha in 0.0f64..=1.0,
            ) {
                let params = MarketParams {
                    rates: RateSet::flat(rate),
                    credit: Some(CreditParams {
                        h_i_p: Some(h_i), h_c_p: Some(h_c),
                        r_bond_i: None, r_bond_c: None,
                        l_i: 0.3, l_c: 0.7, h_i_q: None, h_c_q: None,
                    }),
                    equity: EquityParams { s0: 50.0, mu: 0.0, sigma: 0.4 },
                    alpha,
                };
                let report = params.validate().unwrap();
                prop_assert!(report.passed(), "violations: {}", report);
                // derived intensities match the defining identity exactly
                let (qi, qc) = params.risk_neutral_intensities().unwrap();
                let eff = params.effective_credit().unwrap();
                prop_assert_eq!(qi, eff.r_bond_i - rate + h_i);
                prop_assert_eq!(qc, eff.r_bond_c - rate + h_c);
            }
        }
    }

    #[test]
    fn discount_account_inverse() {
        assert_eq!(discount(0.05, 0.0), 1.0);
        assert_eq!(discount(0.0, 3.0), 1.0);
        assert!((discount(0.05, 1.0) - 0.951229424500714).abs() < 1e-15);
        for (r, t) in [(0.05, 1.0), (0.12, 7.3), (-0.01, 2.0)] {
            assert!((account(r, t) * discount(r, t) - 1.0).abs() < 1e-15);
        }
    }
}

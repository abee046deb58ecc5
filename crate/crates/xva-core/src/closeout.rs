//! Collateral rule and the closeout payoff exchanged at the first default.

use crate::math::{neg, pos};

/// Which name defaulted first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Party {
    Investor,
    Counterparty,
}

/// First-to-default outcome carried by the discrete engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FirstDefaulter {
    Investor,
    Counterparty,
    None,
}

/// Tie rule for the null event `τ_I = τ_C` in the discrete engines.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    CounterpartyFirst,
    InvestorFirst,
}

/// Inputs of the general closeout formula.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloseoutInputs {
    /// Public value `V̂(τ, S_τ)` at the default time.
    pub vhat: f64,
    /// Collateral balance just before default; `alpha * vhat` under the
    /// collateral rule.
    pub collateral: f64,
    pub l_i: f64,
    pub l_c: f64,
    pub alpha: f64,
    pub first_defaulter: FirstDefaulter,
}

/// Collateral rule: `C_t = alpha * V̂(t, S_t)`, positive when the hedger
/// posts.
pub fn collateral(alpha: f64, vhat: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&alpha));
    alpha * vhat
}

/// Closeout value settled at the first default:
/// `θ = V̂ + 1{C first} L_C (V̂-C)⁻ - 1{I first} L_I (V̂-C)⁺`.
///
/// Panics if no party has defaulted; the caller owns the first-to-default
/// determination.
pub fn closeout_value(inputs: &CloseoutInputs) -> f64 {
    let gap = inputs.vhat - inputs.collateral;
    match inputs.first_defaulter {
        FirstDefaulter::Investor => inputs.vhat - inputs.l_i * pos(gap),
        FirstDefaulter::Counterparty => inputs.vhat + inputs.l_c * neg(gap),
        FirstDefaulter::None => panic!("closeout requested with no defaulted party"),
    }
}

/// Party-specific closeout under the collateral rule:
/// `θ_I(v̂) = v̂ - L_I ((1-α) v̂)⁺`, `θ_C(v̂) = v̂ + L_C ((1-α) v̂)⁻`.
///
/// Computed through the same arithmetic as [`closeout_value`] with
/// `C = alpha * v̂`, so the two agree bitwise.
pub fn theta_party(party: Party, vhat: f64, alpha: f64, loss_rate: f64) -> f64 {
    let inputs = CloseoutInputs {
        vhat,
        collateral: collateral(alpha, vhat),
        l_i: loss_rate,
        l_c: loss_rate,
        alpha,
        first_defaulter: match party {
            Party::Investor => FirstDefaulter::Investor,
            Party::Counterparty => FirstDefaulter::Counterparty,
        },
    };
    closeout_value(&inputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn positive_exposure_counterparty_default_has_no_loss() {
        let inputs = CloseoutInputs {
            vhat: 100.0,
            collateral: 25.0,
            l_i: 0.5,
            l_c: 0.5,
            alpha: 0.25,
            first_defaulter: FirstDefaulter::Counterparty,
        };
        assert_eq!(closeout_value(&inputs), 100.0);
    }

    #[test]
    fn investor_default_applies_loss_on_uncollateralized_exposure() {
        let inputs = CloseoutInputs {
            vhat: 100.0,
            collateral: 25.0,
            l_i: 0.5,
            l_c: 0.5,
            alpha: 0.25,
            first_defaulter: FirstDefaulter::Investor,
        };
        assert_eq!(closeout_value(&inputs), 62.5); // 100 - 0.5 * 75
    }

    #[test]
    fn negative_exposure_counterparty_default() {
        let inputs = CloseoutInputs {
            vhat: -100.0,
            collateral: -25.0,
            l_i: 0.5,
            l_c: 0.5,
            alpha: 0.25,
            first_defaulter: FirstDefaulter::Counterparty,
        };
        assert_eq!(closeout_value(&inputs), -62.5); // -100 + 0.5 * 75
    }

    #[test]
    fn theta_party_hand_values() {
        assert_eq!(theta_party(Party::Investor, -40.0, 0.25, 0.5), -40.0);
        assert_eq!(theta_party(Party::Investor, 100.0, 0.25, 0.5), 62.5);
        // full collateralization kills both adjustments
        for v in [-75.0, 0.0, 123.0] {
            assert_eq!(theta_party(Party::Investor, v, 1.0, 0.5), v);
            assert_eq!(theta_party(Party::Counterparty, v, 1.0, 0.5), v);
        }
    }

    #[test]
    fn collateral_rule_values() {
        assert_eq!(collateral(0.0, 55.5), 0.0);
        assert_eq!(collateral(1.0, 55.5), 55.5);
        assert!((collateral(0.25, 10.4506) - 2.61265).abs() < 1e-12);
    }

    /// The min/max form of the closeout printed alongside the indicator form.
    fn closeout_minmax(inputs: &CloseoutInputs) -> f64 {
        let v = inputs.vhat;
        let c = inputs.collateral;
        match inputs.first_defaulter {
            FirstDefaulter::Investor => ((1.0 - inputs.l_i) * (v - c) + c).min(v),
            FirstDefaulter::Counterparty => ((1.0 - inputs.l_c) * (v - c) + c).max(v),
            FirstDefaulter::None => unreachable!(),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn indicator_and_minmax_forms_agree(
            vhat in -500.0f64..500.0,
            alpha in 0.0f64..=1.0,
            l_i in 0.0f64..=1.0,
            l_c in 0.0f64..=1.0,
            who in 0..2u8,
        ) {
            let inputs = CloseoutInputs {
                vhat,
                collateral: collateral(alpha, vhat),
                l_i,
                l_c,
                alpha,
                first_defaulter: if who == 0 {
                    FirstDefaulter::Investor
                } else {
                    FirstDefaulter::Counterparty
                },
            };
            let a = closeout_value(&inputs);
            let b = closeout_minmax(&inputs);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + vhat.abs()));
        }

        #[test]
        fn party_form_consistent_with_general_closeout(
            vhat in -500.0f64..500.0,
            alpha in 0.0f64..=1.0,
            l in 0.0f64..=1.0,
        ) {
            let via_general_i = closeout_value(&CloseoutInputs {
                vhat,
                collateral: collateral(alpha, vhat),
                l_i: l,
                l_c: 0.0,
                alpha,
                first_defaulter: FirstDefaulter::Investor,
            });
            prop_assert_eq!(theta_party(Party::Investor, vhat, alpha, l), via_general_i);
            let via_general_c = closeout_value(&CloseoutInputs {
                vhat,
                collateral: collateral(alpha, vhat),
                l_i: 0.0,
                l_c: l,
                alpha,
                first_defaulter: FirstDefaulter::Counterparty,
            });
            prop_assert_eq!(theta_party(Party::Counterparty, vhat, alpha, l), via_general_c);
        }

        #[test]
        fn closeout_monotone_in_public_value(
            v1 in -500.0f64..500.0,
            bump in 0.0f64..250.0,
            alpha in 0.0f64..=1.0,
            l in 0.0f64..=1.0,
            who in 0..2u8,
        ) {
            let party = if who == 0 { Party::Investor } else { Party::Counterparty };
            let lo = theta_party(party, v1, alpha, l);
            let hi = theta_party(party, v1 + bump, alpha, l);
            prop_assert!(hi >= lo - 1e-9);
        }

        #[test]
        fn closeout_bounded_by_recovery_and_face(
            vhat in -500.0f64..500.0,
            alpha in 0.0f64..=1.0,
            l in 0.0f64..=1.0,
        ) {
            // when v̂ ≥ C: (1-L)(v̂-C)+C ≤ θ_I ≤ v̂, reversed when v̂ < C
            let c = collateral(alpha, vhat);
            let theta = theta_party(Party::Investor, vhat, alpha, l);
            let recovery = (1.0 - l) * (vhat - c) + c;
            let eps = 1e-12 * (1.0 + vhat.abs());
            if vhat >= c {
                prop_assert!(recovery - eps <= theta && theta <= vhat + eps);
            } else {
                prop_assert!(vhat - eps <= theta && theta <= recovery + eps);
            }
        }
    }

    // binary search over the piecewise form: the fourth printed variant with
    // explicit sign indicators agrees with the indicator form under the
    // collateral rule
    proptest! {
        #[test]
        fn alpha_form_agrees_under_collateral_rule(
            vhat in -500.0f64..500.0,
            alpha in 0.0f64..=1.0,
            l_i in 0.0f64..=1.0,
            l_c in 0.0f64..=1.0,
        ) {
            let theta_i = theta_party(Party::Investor, vhat, alpha, l_i);
            let expect_i = if vhat >= 0.0 {
                (1.0 - (1.0 - alpha) * l_i) * vhat
            } else {
                vhat
            };
            prop_assert!((theta_i - expect_i).abs() <= 1e-12 * (1.0 + vhat.abs()));
            let theta_c = theta_party(Party::Counterparty, vhat, alpha, l_c);
            let expect_c = if vhat < 0.0 {
                (1.0 - (1.0 - alpha) * l_c) * vhat
            } else {
                vhat
            };
            prop_assert!((theta_c - expect_c).abs() <= 1e-12 * (1.0 + vhat.abs()));
        }
    }
}

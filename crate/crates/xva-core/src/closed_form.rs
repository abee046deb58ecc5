//! Explicit equal-rates valuation adjustments: the no-default closed form,
//! its extension with bilateral default risk, the first-to-default
//! functionals behind the credit legs, and the corresponding hedge ratios.
//!
//! Everything here requires the equal-rates regime
//! `r_f^+ = r_f^-`, `r_c^+ = r_c^-`, `r_D = r_r^+ = r_r^-`; asymmetric rates
//! are the business of the backward-equation engine.

use crate::analytic::{compound_theta_pair, public_delta, public_value};
use crate::claim::{ClaimSpec, PayoffSign};
use crate::closeout::{theta_party, Party};
use crate::error::XvaError;
use crate::market::{account, EffectiveCredit, MarketParams};
use crate::math::{exp_integral, gauss_legendre};

/// Nodes of the default-time quadrature used for mixed-sign payoffs.
const DEFAULT_TIME_NODES: usize = 200;

/// Tolerance on the equal-rates preconditions.
const RATE_EQ_TOL: f64 = 1e-12;

/// Exclusion window around the degenerate decay parameters of the
/// first-to-default formula.
const LEMMA_EXCLUSION_TOL: f64 = 1e-10;

/// Replication value split into the four contributing legs.
///
/// The legs sum to the replication value `V_t`, so
/// `total = funding_leg + dva_leg + cva_leg + collateral_leg - vhat`.
/// For sign-definite payoffs `total = (adjustment_factor - 1) * vhat`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XvaBreakdown {
    /// Total valuation adjustment `V_t - V̂(t, S_t)`.
    pub total: f64,
    /// Default- and collateral-free value under funding constraints.
    pub funding_leg: f64,
    /// Funding-adjusted closeout paid at own default.
    pub dva_leg: f64,
    /// Funding-adjusted closeout paid at counterparty default.
    pub cva_leg: f64,
    /// Funding cost of carrying the collateral account.
    pub collateral_leg: f64,
    /// Replication value as a multiple of the public quote; NaN when the
    /// quote is zero and the payoff has mixed sign.
    pub adjustment_factor: f64,
    /// Public quote `V̂(t, S_t)` the adjustment is measured against.
    pub vhat: f64,
}

impl XvaBreakdown {
    /// The replication value `V_t`, i.e. the sum of the four legs.
    pub fn replication_value(&self) -> f64 {
        self.funding_leg + self.dva_leg + self.cva_leg + self.collateral_leg
    }
}

/// Positions of the replicating portfolio at one evaluation point.
///
/// The repo, collateral and funding account shares are pinned by the balance
/// identities `ψ_r B^{r_r} = -ξ S`, `ψ_c B^{r_c} = -C` and
/// `ξ_f B^{r_f} = V - ξ_I P^I - ξ_C P^C - C`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HedgeReport {
    pub xi_stock: f64,
    pub xi_bond_i: f64,
    pub xi_bond_c: f64,
    pub psi_repo: f64,
    pub xi_funding: f64,
    pub psi_collateral: f64,
}

/// Equal rates extracted from a full rate set.
#[derive(Clone, Copy, Debug)]
pub struct EqualRates {
    pub r_f: f64,
    pub r_c: f64,
    /// Repo rate, equal to the discount rate in this regime.
    pub r_r: f64,
    pub r_d: f64,
}

/// Checks the equal-rates preconditions and collapses the rate set.
pub fn equal_rates(params: &MarketParams) -> Result<EqualRates, XvaError> {
    let r = &params.rates;
    let checks = [
        ("r_f_plus = r_f_minus", r.r_f_plus, r.r_f_minus),
        ("r_c_plus = r_c_minus", r.r_c_plus, r.r_c_minus),
        ("r_r_plus = r_D", r.r_r_plus, r.r_d),
        ("r_r_minus = r_D", r.r_r_minus, r.r_d),
    ];
    for (name, a, b) in checks {
        if (a - b).abs() > RATE_EQ_TOL {
            return Err(XvaError::ClosedFormPrecondition(format!(
                "{name} violated ({a} vs {b})"
            )));
        }
    }
    Ok(EqualRates {
        r_f: r.r_f_plus,
        r_c: r.r_c_plus,
        r_r: r.r_d,
        r_d: r.r_d,
    })
}

/// Survival factor `E[1{τ ≥ s} | G_t] = e^{-(h_I + h_C)(s - t)}` on `{τ ≥ t}`.
pub fn survival_expectation(h_i_q: f64, h_c_q: f64, t: f64, s: f64) -> Result<f64, XvaError> {
    if s < t {
        return Err(XvaError::Domain(format!("horizon {s} before time {t}")));
    }
    if h_i_q < 0.0 || h_c_q < 0.0 {
        return Err(XvaError::Domain("intensities must be nonnegative".into()));
    }
    Ok((-(h_i_q + h_c_q) * (s - t)).exp())
}

/// First-to-default functional
/// `E[e^{λ (τ_first - t)} 1{t < τ_first < τ_other ∧ T}]` for independent
/// exponential defaults with the given intensities over `horizon = T - t`.
///
/// Valid away from the excluded decay parameters
/// `λ ∈ {h_first, h_other, h_first + h_other}` (tolerance 1e-10).
pub fn first_default_functional(
    lambda: f64,
    h_first: f64,
    h_other: f64,
    horizon: f64,
) -> Result<f64, XvaError> {
    if horizon < 0.0 {
        return Err(XvaError::Domain(format!("negative horizon {horizon}")));
    }
    if h_first < 0.0 || h_other < 0.0 {
        return Err(XvaError::Domain("intensities must be nonnegative".into()));
    }
    if h_first == 0.0 {
        // that name never defaults
        return Ok(0.0);
    }
    check_lemma_exclusions(lambda, h_first, h_other)?;
    let kappa = lambda - h_first - h_other;
    let bracket = h_other / kappa * f64::exp_m1(kappa * horizon) - 1.0
        + (-h_other * horizon).exp() * ((lambda - h_first) * horizon).exp();
    Ok(h_first / (lambda - h_first) * bracket)
}

fn check_lemma_exclusions(lambda: f64, h_first: f64, h_other: f64) -> Result<(), XvaError> {
    for (name, excluded) in [
        ("h_first", h_first),
        ("h_other", h_other),
        ("h_first+h_other", h_first + h_other),
    ] {
        if (lambda - excluded).abs() < LEMMA_EXCLUSION_TOL {
            return Err(XvaError::ExcludedParameter(format!(
                "lambda = {lambda} coincides with {name} = {excluded}"
            )));
        }
    }
    Ok(())
}

/// No-default equal-rates adjustment factor `V_t / V̂(t, S_t)`.
///
/// `e^{(r_r - r_f)(T-t)} + α (r_f - r_c) ∫_t^T e^{(r_r - r_f)(s-t)} ds`; the
/// integral is evaluated in the exact-limit form so `r_f = r_r` is
/// well-defined.
fn piterbarg_factors(rates: &EqualRates, alpha: f64, dt: f64) -> (f64, f64) {
    let kappa = rates.r_r - rates.r_f;
    let funding_factor = (kappa * dt).exp();
    let collateral_factor = alpha * (rates.r_f - rates.r_c) * exp_integral(kappa, dt);
    (funding_factor, collateral_factor)
}

/// Total valuation adjustment of the no-default equal-rates model.
///
/// Default intensities are ignored: the transaction always runs to maturity.
pub fn piterbarg_xva(
    params: &MarketParams,
    claim: &ClaimSpec,
    t: f64,
    s: f64,
) -> Result<XvaBreakdown, XvaError> {
    let rates = equal_rates(params)?;
    let vhat = public_value(claim, rates.r_d, params.equity.sigma, t, s)?;
    let dt = claim.maturity - t;
    let (funding_factor, collateral_factor) = piterbarg_factors(&rates, params.alpha, dt);
    let factor = funding_factor + collateral_factor;
    Ok(XvaBreakdown {
        total: (factor - 1.0) * vhat,
        funding_leg: funding_factor * vhat,
        dva_leg: 0.0,
        cva_leg: 0.0,
        collateral_leg: collateral_factor * vhat,
        adjustment_factor: factor,
        vhat,
    })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn balance_positions(
    params: &MarketParams,
    t: f64,
    s: f64,
    value: f64,
    vhat: f64,
    xi_stock: f64,
    xi_bond_i: f64,
    xi_bond_c: f64,
    bond_price_i: f64,
    bond_price_c: f64,
) -> HedgeReport {
    let r = &params.rates;
    let stock_cash = xi_stock * s;
    let r_r_eff = if stock_cash > 0.0 {
        r.r_r_minus
    } else {
        r.r_r_plus
    };
    let psi_repo = -stock_cash / account(r_r_eff, t);
    let coll = params.alpha * vhat;
    let r_c_eff = if coll > 0.0 { r.r_c_plus } else { r.r_c_minus };
    let psi_collateral = -coll / account(r_c_eff, t);
    let funding_cash = value - xi_bond_i * bond_price_i - xi_bond_c * bond_price_c - coll;
    let r_f_eff = if funding_cash > 0.0 {
        r.r_f_plus
    } else {
        r.r_f_minus
    };
    let xi_funding = funding_cash / account(r_f_eff, t);
    HedgeReport {
        xi_stock,
        xi_bond_i,
        xi_bond_c,
        psi_repo,
        xi_funding,
        psi_collateral,
    }
}

/// Replicating strategy of the no-default equal-rates model:
/// `ξ = factor * Δ̂(t, S)`, no bond positions.
pub fn piterbarg_hedge(
    params: &MarketParams,
    claim: &ClaimSpec,
    t: f64,
    s: f64,
) -> Result<HedgeReport, XvaError> {
    let rates = equal_rates(params)?;
    let vhat = public_value(claim, rates.r_d, params.equity.sigma, t, s)?;
    let delta = public_delta(claim, rates.r_d, params.equity.sigma, t, s)?;
    let dt = claim.maturity - t;
    let (funding_factor, collateral_factor) = piterbarg_factors(&rates, params.alpha, dt);
    let factor = funding_factor + collateral_factor;
    let xi_stock = factor * delta;
    let value = factor * vhat;
    Ok(balance_positions(
        params, t, s, value, vhat, xi_stock, 0.0, 0.0, 1.0, 1.0,
    ))
}

struct DefaultModel {
    rates: EqualRates,
    credit: EffectiveCredit,
    lambda: f64,
    h_i: f64,
    h_c: f64,
}

fn default_model(params: &MarketParams) -> Result<DefaultModel, XvaError> {
    let rates = equal_rates(params)?;
    let credit = params.effective_credit()?;
    if !credit.defaults_enabled {
        return Err(XvaError::ClosedFormPrecondition(
            "no credit block present; the no-default closed form applies".into(),
        ));
    }
    let (h_i, h_c) = params.risk_neutral_intensities()?;
    let lambda = rates.r_f - rates.r_d;
    check_lemma_exclusions(lambda, h_i, h_c)?;
    Ok(DefaultModel {
        rates,
        credit,
        lambda,
        h_i,
        h_c,
    })
}

/// Leg factors of the defaults closed form, each expressed as a multiple of
/// the relevant compound value.
struct DefaultFactors {
    funding: f64,
    /// Γ jump coefficients `1 + (r_D - r_f)/h_i` for the two names.
    jump_i: f64,
    jump_c: f64,
    /// First-to-default functionals for "I first" and "C first".
    g_i: f64,
    g_c: f64,
    collateral: f64,
}

fn default_factors(m: &DefaultModel, dt: f64) -> Result<DefaultFactors, XvaError> {
    let DefaultModel {
        rates,
        lambda,
        h_i,
        h_c,
        ..
    } = m;
    // funding term exactly as printed: the account ratio times one doubled
    // per-name exponential
    let b_ratio = account(rates.r_d, dt) / account(rates.r_f, dt);
    let funding = b_ratio * ((lambda - h_i) * dt).exp() * ((lambda - h_c) * dt).exp();
    let jump_i = 1.0 + (rates.r_d - rates.r_f) / h_i;
    let jump_c = 1.0 + (rates.r_d - rates.r_f) / h_c;
    let g_i = first_default_functional(*lambda, *h_i, *h_c, dt)?;
    let g_c = first_default_functional(*lambda, *h_c, *h_i, dt)?;
    let collateral = m.credit_collateral_factor(dt);
    Ok(DefaultFactors {
        funding,
        jump_i,
        jump_c,
        g_i,
        g_c,
        collateral,
    })
}

impl DefaultModel {
    fn credit_collateral_factor(&self, dt: f64) -> f64 {
        // α (r_f - r_c) / (h_I + h_C - λ) (1 - e^{(λ - h_I - h_C)(T-t)}),
        // written through the guarded exponential integral so the
        // λ = h_I + h_C singularity is removable
        (self.rates.r_f - self.rates.r_c) * exp_integral(self.lambda - self.h_i - self.h_c, dt)
    }
}

/// Equal-rates total valuation adjustment with bilateral default risk,
/// decomposed into the four legs of the default-risky representation.
///
/// Sign-definite payoffs use the printed adjustment-factor form; mixed-sign
/// payoffs evaluate the credit legs by a 200-node quadrature over the default
/// time with the compound values as integrand.
pub fn default_xva(
    params: &MarketParams,
    claim: &ClaimSpec,
    t: f64,
    s: f64,
) -> Result<XvaBreakdown, XvaError> {
    let m = default_model(params)?;
    let sigma = params.equity.sigma;
    let dt = claim.maturity - t;
    let vhat = public_value(claim, m.rates.r_d, sigma, t, s)?;
    let f = default_factors(&m, dt)?;
    let alpha = params.alpha;
    let loss_mult_i = 1.0 - (1.0 - alpha) * m.credit.l_i;
    let loss_mult_c = 1.0 - (1.0 - alpha) * m.credit.l_c;

    let funding_leg = f.funding * vhat;
    let collateral_leg = alpha * f.collateral * vhat;

    let (dva_leg, cva_leg, factor) = match claim.payoff.sign() {
        PayoffSign::NonNegative | PayoffSign::NonPositive => {
            let (theta_plus_i, theta_minus_i) =
                compound_theta_pair(claim, m.rates.r_d, sigma, t, s, t)?;
            let (theta_plus_c, theta_minus_c) = (theta_plus_i, theta_minus_i);
            let dva = (loss_mult_i * f.jump_i * theta_plus_i + f.jump_c * theta_minus_i) * f.g_i;
            let cva = (loss_mult_c * f.jump_c * theta_minus_c + f.jump_c * theta_plus_c) * f.g_c;
            // factor assembled from the leg factors alone, valid even when
            // the quote is zero
            let credit_factor = match claim.payoff.sign() {
                PayoffSign::NonNegative => loss_mult_i * f.jump_i * f.g_i + f.jump_c * f.g_c,
                _ => f.jump_c * f.g_i + loss_mult_c * f.jump_c * f.g_c,
            };
            let factor = f.funding + credit_factor + alpha * f.collateral;
            (dva, cva, factor)
        }
        PayoffSign::Mixed => {
            // E[e^{λ(y-t)} Θ̂ terms] over the first-default time density
            // h e^{-(h_I + h_C)(y - t)} dy, discretized on a Gauss-Legendre
            // rule in the default time
            let (nodes, weights) = gauss_legendre(DEFAULT_TIME_NODES, t, claim.maturity);
            let mut q_plus = 0.0;
            let mut q_minus = 0.0;
            for (&y, &w) in nodes.iter().zip(&weights) {
                let (tp, tm) = compound_theta_pair(claim, m.rates.r_d, sigma, t, s, y)?;
                let decay = ((m.lambda - m.h_i - m.h_c) * (y - t)).exp();
                q_plus += w * decay * tp;
                q_minus += w * decay * tm;
            }
            let dva = loss_mult_i * f.jump_i * m.h_i * q_plus + f.jump_c * m.h_i * q_minus;
            let cva = loss_mult_c * f.jump_c * m.h_c * q_minus + f.jump_c * m.h_c * q_plus;
            let value = funding_leg + dva + cva + collateral_leg;
            let factor = if vhat.abs() > 0.0 {
                value / vhat
            } else {
                f64::NAN
            };
            (dva, cva, factor)
        }
    };

    let total = funding_leg + dva_leg + cva_leg + collateral_leg - vhat;
    Ok(XvaBreakdown {
        total,
        funding_leg,
        dva_leg,
        cva_leg,
        collateral_leg,
        adjustment_factor: factor,
        vhat,
    })
}

/// Replicating strategy of the defaults closed form:
/// `ξ = A Δ̂`, `ξ_i = (A V̂ - θ_i(V̂)) / P^i` with the pre-default bond price
/// `P^i = e^{-(r_D + h_i)(T-t)}`.
///
/// Requires a sign-definite payoff (the adjustment-factor path). At `t = T`
/// the report degenerates to the terminal delta with zero bond positions.
pub fn default_hedge(
    params: &MarketParams,
    claim: &ClaimSpec,
    t: f64,
    s: f64,
) -> Result<HedgeReport, XvaError> {
    let m = default_model(params)?;
    if claim.payoff.sign() == PayoffSign::Mixed {
        return Err(XvaError::ClosedFormPrecondition(
            "mixed-sign payoff has no adjustment-factor hedge".into(),
        ));
    }
    let sigma = params.equity.sigma;
    let vhat = public_value(claim, m.rates.r_d, sigma, t, s)?;
    let delta = public_delta(claim, m.rates.r_d, sigma, t, s)?;
    let dt = claim.maturity - t;
    if dt == 0.0 {
        return Ok(balance_positions(
            params, t, s, vhat, vhat, delta, 0.0, 0.0, 1.0, 1.0,
        ));
    }
    let breakdown = default_xva(params, claim, t, s)?;
    let a = breakdown.adjustment_factor;
    let value = a * vhat;
    let bond_price_i = (-(m.rates.r_d + m.h_i) * dt).exp();
    let bond_price_c = (-(m.rates.r_d + m.h_c) * dt).exp();
    let theta_i = theta_party(Party::Investor, vhat, params.alpha, m.credit.l_i);
    let theta_c = theta_party(Party::Counterparty, vhat, params.alpha, m.credit.l_c);
    let xi_bond_i = (value - theta_i) / bond_price_i;
    let xi_bond_c = (value - theta_c) / bond_price_c;
    Ok(balance_positions(
        params,
        t,
        s,
        value,
        vhat,
        a * delta,
        xi_bond_i,
        xi_bond_c,
        bond_price_i,
        bond_price_c,
    ))
}

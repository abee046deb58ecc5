//! Public (risk-free closeout) valuation: the Black-Scholes quote used by the
//! valuation agent, its delta, and the zero-strike compound-option values
//! entering the default-risk closed forms.
//!
//! Vanilla calls and puts price in closed form; custom piecewise-linear
//! payoffs integrate by adaptive Gauss-Hermite quadrature in log-price.

use crate::claim::{ClaimSpec, Payoff, PayoffSign};
use crate::error::XvaError;
use crate::math;

/// Relative tolerance for the adaptive quadrature refinement.
const QUAD_REL_TOL: f64 = 1e-8;

/// Public quote bundle at one evaluation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PublicQuote {
    pub value: f64,
    pub delta: f64,
    /// Zero-strike compound call `Θ̂^{s,+}`; together with `theta_minus` it
    /// splits the quote: `theta_plus + theta_minus = value`.
    pub theta_plus: f64,
    /// Zero-strike compound put `Θ̂^{s,-}` (nonpositive by construction).
    pub theta_minus: f64,
}

fn check_point(claim: &ClaimSpec, t: f64, s: f64) -> Result<(), XvaError> {
    if !(t >= 0.0) || t > claim.maturity {
        return Err(XvaError::Domain(format!(
            "evaluation time {t} outside [0, {}]",
            claim.maturity
        )));
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(XvaError::Domain(format!(
            "stock price {s} must be positive"
        )));
    }
    Ok(())
}

fn bs_call(s: f64, k: f64, r: f64, sigma: f64, dt: f64) -> f64 {
    if k <= 0.0 {
        // forward payoff: discounted expectation of S_T is the spot
        return s - k * (-r * dt).exp();
    }
    let sq = sigma * dt.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * dt) / sq;
    let d2 = d1 - sq;
    s * math::norm_cdf(d1) - k * (-r * dt).exp() * math::norm_cdf(d2)
}

fn bs_put(s: f64, k: f64, r: f64, sigma: f64, dt: f64) -> f64 {
    if k <= 0.0 {
        return 0.0;
    }
    let sq = sigma * dt.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * dt) / sq;
    let d2 = d1 - sq;
    k * (-r * dt).exp() * math::norm_cdf(-d2) - s * math::norm_cdf(-d1)
}

fn bs_call_delta(s: f64, k: f64, r: f64, sigma: f64, dt: f64) -> f64 {
    if k <= 0.0 {
        return 1.0;
    }
    let sq = sigma * dt.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * dt) / sq;
    math::norm_cdf(d1)
}

/// The quote `V̂(t, S) = e^{-r_D (T-t)} E^Q[Φ(S_T) | S_t = S]`.
///
/// At `t = T` this is the payoff itself, exactly.
pub fn public_value(
    claim: &ClaimSpec,
    r_d: f64,
    sigma: f64,
    t: f64,
    s: f64,
) -> Result<f64, XvaError> {
    check_point(claim, t, s)?;
    let dt = claim.maturity - t;
    if dt == 0.0 {
        return Ok(claim.payoff.eval(s));
    }
    match &claim.payoff {
        Payoff::Call { strike } => Ok(bs_call(s, *strike, r_d, sigma, dt)),
        Payoff::Put { strike } => Ok(bs_put(s, *strike, r_d, sigma, dt)),
        Payoff::Custom(p) => {
            let m = (r_d - 0.5 * sigma * sigma) * dt;
            let vol = sigma * dt.sqrt();
            let df = (-r_d * dt).exp();
            let kinks = kink_images(&claim.payoff, s, m, vol);
            Ok(df
                * math::adaptive_normal_expectation_kinks(QUAD_REL_TOL, &kinks, |z| {
                    p.eval(s * (m + vol * z).exp())
                }))
        }
    }
}

/// Payoff kink prices mapped into standard normal coordinates.
fn kink_images(payoff: &Payoff, s: f64, m: f64, vol: f64) -> Vec<f64> {
    payoff
        .kinks()
        .into_iter()
        .filter(|&k| k > 0.0)
        .map(|k| ((k / s).ln() - m) / vol)
        .collect()
}

/// Market delta `∂V̂/∂S`.
///
/// Closed form for vanillas; for custom payoffs the derivative is taken
/// under the integral sign (`∂S_T/∂S = S_T / S`). At `t = T` the kink
/// convention is the average of the one-sided payoff slopes.
pub fn public_delta(
    claim: &ClaimSpec,
    r_d: f64,
    sigma: f64,
    t: f64,
    s: f64,
) -> Result<f64, XvaError> {
    check_point(claim, t, s)?;
    let dt = claim.maturity - t;
    if dt == 0.0 {
        return Ok(claim.payoff.slope(s));
    }
    match &claim.payoff {
        Payoff::Call { strike } => Ok(bs_call_delta(s, *strike, r_d, sigma, dt)),
        Payoff::Put { strike } => {
            if *strike <= 0.0 {
                Ok(0.0)
            } else {
                Ok(bs_call_delta(s, *strike, r_d, sigma, dt) - 1.0)
            }
        }
        Payoff::Custom(p) => {
            let m = (r_d - 0.5 * sigma * sigma) * dt;
            let vol = sigma * dt.sqrt();
            let df = (-r_d * dt).exp();
            let kinks = kink_images(&claim.payoff, s, m, vol);
            let value = math::adaptive_normal_expectation_kinks(QUAD_REL_TOL, &kinks, |z| {
                let x = s * (m + vol * z).exp();
                let (l, r) = p.one_sided_slopes(x);
                0.5 * (l + r) * x
            });
            Ok(df * value / s)
        }
    }
}

/// Which side of the quote-sign indicator a compound option picks up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompoundSign {
    /// `Θ̂^{s,+}`: contribution of `{V̂(s, S_s) ≥ 0}`.
    Plus,
    /// `Θ̂^{s,-}`: contribution of `{V̂(s, S_s) < 0}`.
    Minus,
}

/// Zero-strike compound value
/// `Θ̂_t^{s,±} = E^Q[e^{-r_D (s-t)} V̂(s, S_s) 1{±}` given `S_t = S]`.
///
/// For sign-definite payoffs the indicator is redundant and the value
/// collapses to the quote itself (or zero) without quadrature.
pub fn compound_theta(
    claim: &ClaimSpec,
    r_d: f64,
    sigma: f64,
    t: f64,
    s: f64,
    horizon: f64,
    sign: CompoundSign,
) -> Result<f64, XvaError> {
    let (plus, minus) = compound_theta_pair(claim, r_d, sigma, t, s, horizon)?;
    Ok(match sign {
        CompoundSign::Plus => plus,
        CompoundSign::Minus => minus,
    })
}

/// Both compound legs at once, sharing quadrature nodes so that
/// `plus + minus` recovers the martingale identity exactly per rule.
pub fn compound_theta_pair(
    claim: &ClaimSpec,
    r_d: f64,
    sigma: f64,
    t: f64,
    s: f64,
    horizon: f64,
) -> Result<(f64, f64), XvaError> {
    check_point(claim, t, s)?;
    if horizon < t || horizon > claim.maturity {
        return Err(XvaError::Domain(format!(
            "compound horizon {horizon} outside [{t}, {}]",
            claim.maturity
        )));
    }
    match claim.payoff.sign() {
        PayoffSign::NonNegative => {
            let v = public_value(claim, r_d, sigma, t, s)?;
            return Ok((v, 0.0));
        }
        PayoffSign::NonPositive => {
            let v = public_value(claim, r_d, sigma, t, s)?;
            return Ok((0.0, v));
        }
        PayoffSign::Mixed => {}
    }
    let v_here = public_value(claim, r_d, sigma, t, s)?;
    if horizon == t {
        return if v_here >= 0.0 {
            Ok((v_here, 0.0))
        } else {
            Ok((0.0, v_here))
        };
    }
    let dt = horizon - t;
    let m = (r_d - 0.5 * sigma * sigma) * dt;
    let vol = sigma * dt.sqrt();
    let df = (-r_d * dt).exp();
    // split at the payoff kink images; they bracket the sign changes of the
    // horizon quote well enough for the adaptive refinement to settle
    let kinks = kink_images(&claim.payoff, s, m, vol);
    let mut prev = (f64::NAN, f64::NAN);
    let mut split = (0.0, 0.0);
    for level in 0..6 {
        let n = [16, 24, 32, 48, 64, 96][level];
        let mut plus = 0.0;
        let mut minus = 0.0;
        let eval = |z: f64| -> Result<f64, XvaError> {
            public_value(claim, r_d, sigma, horizon, s * (m + vol * z).exp())
        };
        let rule = math::gauss_legendre_cached(n);
        let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut edges = vec![-math::NORMAL_Z_MAX];
        edges.extend(
            kinks
                .iter()
                .copied()
                .filter(|z| z.abs() < math::NORMAL_Z_MAX),
        );
        edges.push(math::NORMAL_Z_MAX);
        edges.sort_by(|a, b| a.partial_cmp(b).expect("finite edges"));
        for pair in edges.windows(2) {
            let half = 0.5 * (pair[1] - pair[0]);
            let mid = 0.5 * (pair[0] + pair[1]);
            for (&x, &w) in rule.0.iter().zip(&rule.1) {
                let z = mid + half * x;
                let v = eval(z)?;
                let contribution = half * w * v * density(z);
                if v >= 0.0 {
                    plus += contribution;
                } else {
                    minus += contribution;
                }
            }
        }
        split = (df * plus, df * minus);
        let tol = QUAD_REL_TOL * v_here.abs().max(1.0);
        if prev.0.is_finite() && (split.0 - prev.0).abs() <= tol && (split.1 - prev.1).abs() <= tol
        {
            return Ok(split);
        }
        prev = split;
    }
    Ok(split)
}

/// Assembles value, delta and the compound split at one point.
pub fn public_quote(
    claim: &ClaimSpec,
    r_d: f64,
    sigma: f64,
    t: f64,
    s: f64,
    horizon: f64,
) -> Result<PublicQuote, XvaError> {
    let value = public_value(claim, r_d, sigma, t, s)?;
    let delta = public_delta(claim, r_d, sigma, t, s)?;
    let (theta_plus, theta_minus) = compound_theta_pair(claim, r_d, sigma, t, s, horizon)?;
    Ok(PublicQuote {
        value,
        delta,
        theta_plus,
        theta_minus,
    })
}

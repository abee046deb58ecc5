//! European claim descriptors: vanilla calls/puts plus custom piecewise-linear
//! payoffs of the terminal stock price.

use serde::{Deserialize, Serialize};

use crate::error::XvaError;

/// Whether the hedger sold the claim (replicates the payoff) or bought it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TradeSide {
    #[default]
    Sell,
    Buy,
}

/// Sign pattern of a payoff over the whole price half-line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PayoffSign {
    NonNegative,
    NonPositive,
    Mixed,
}

/// Piecewise-linear function of the terminal price, given by at least two
/// knots with strictly increasing abscissae. Outside the knot range the end
/// segments extend linearly.
///
/// The representation structurally enforces the standing payoff assumptions:
/// piecewise continuously differentiable and of at most polynomial (here
/// linear) growth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for PiecewiseLinear {
    type Error = XvaError;
    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self, XvaError> {
        PiecewiseLinear::new(knots)
    }
}

impl From<PiecewiseLinear> for Vec<(f64, f64)> {
    fn from(p: PiecewiseLinear) -> Self {
        p.knots
    }
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, XvaError> {
        if knots.len() < 2 {
            return Err(XvaError::InvalidParams(
                "piecewise-linear payoff needs at least two knots".into(),
            ));
        }
        for (x, y) in &knots {
            if !x.is_finite() || !y.is_finite() {
                return Err(XvaError::NonFinite { field: "knots" });
            }
        }
        if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(XvaError::InvalidParams(
                "piecewise-linear knots must have strictly increasing x".into(),
            ));
        }
        Ok(PiecewiseLinear { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn segment_slope(&self, i: usize) -> f64 {
        let (x0, y0) = self.knots[i];
        let (x1, y1) = self.knots[i + 1];
        (y1 - y0) / (x1 - x0)
    }

    /// Index of the segment whose linear extension covers `x`.
    fn segment_index(&self, x: f64) -> usize {
        let n = self.knots.len();
        if x <= self.knots[0].0 {
            return 0;
        }
        if x >= self.knots[n - 1].0 {
            return n - 2;
        }
        // binary search over knot abscissae
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid].0 <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment_index(x);
        let (x0, y0) = self.knots[i];
        y0 + self.segment_slope(i) * (x - x0)
    }

    /// One-sided slopes `(left, right)` at `x`; they differ only at interior
    /// knots.
    pub fn one_sided_slopes(&self, x: f64) -> (f64, f64) {
        let n = self.knots.len();
        for i in 1..n - 1 {
            if x == self.knots[i].0 {
                return (self.segment_slope(i - 1), self.segment_slope(i));
            }
        }
        let s = self.segment_slope(self.segment_index(x));
        (s, s)
    }

    /// Sign pattern over `(0, ∞)`, decided from knot values and end slopes.
    pub fn sign(&self) -> PayoffSign {
        let n = self.knots.len();
        let left_limit = self.eval(0.0);
        let right_slope = self.segment_slope(n - 2);
        let min_knot = self
            .knots
            .iter()
            .map(|&(_, y)| y)
            .fold(f64::INFINITY, f64::min);
        let max_knot = self
            .knots
            .iter()
            .map(|&(_, y)| y)
            .fold(f64::NEG_INFINITY, f64::max);
        let nonneg = min_knot >= 0.0 && left_limit >= 0.0 && right_slope >= 0.0;
        let nonpos = max_knot <= 0.0 && left_limit <= 0.0 && right_slope <= 0.0;
        match (nonneg, nonpos) {
            (true, _) => PayoffSign::NonNegative,
            (_, true) => PayoffSign::NonPositive,
            _ => PayoffSign::Mixed,
        }
    }
}

/// Terminal payoff of the claim.
#[derive(Clone, Debug, PartialEq)]
pub enum Payoff {
    Call { strike: f64 },
    Put { strike: f64 },
    Custom(PiecewiseLinear),
}

impl Payoff {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Payoff::Call { strike } => (x - strike).max(0.0),
            Payoff::Put { strike } => (strike - x).max(0.0),
            Payoff::Custom(p) => p.eval(x),
        }
    }

    /// One-sided slopes `(left, right)` of the payoff at `x`.
    pub fn one_sided_slopes(&self, x: f64) -> (f64, f64) {
        match self {
            Payoff::Call { strike } => {
                if x < *strike {
                    (0.0, 0.0)
                } else if x > *strike {
                    (1.0, 1.0)
                } else {
                    (0.0, 1.0)
                }
            }
            Payoff::Put { strike } => {
                if x < *strike {
                    (-1.0, -1.0)
                } else if x > *strike {
                    (0.0, 0.0)
                } else {
                    (-1.0, 0.0)
                }
            }
            Payoff::Custom(p) => p.one_sided_slopes(x),
        }
    }

    /// Average of the one-sided slopes; the delta convention at kinks.
    pub fn slope(&self, x: f64) -> f64 {
        let (l, r) = self.one_sided_slopes(x);
        0.5 * (l + r)
    }

    pub fn sign(&self) -> PayoffSign {
        match self {
            Payoff::Call { .. } | Payoff::Put { .. } => PayoffSign::NonNegative,
            Payoff::Custom(p) => p.sign(),
        }
    }

    /// Price abscissae where the slope jumps, used to steer quadrature and
    /// kink-aware checks.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Payoff::Call { strike } | Payoff::Put { strike } => vec![*strike],
            Payoff::Custom(p) => {
                let k = p.knots();
                (1..k.len() - 1).map(|i| k[i].0).collect()
            }
        }
    }
}

/// A European claim: payoff, maturity and the side of the trade.
#[derive(Clone, Debug, PartialEq)]
pub struct ClaimSpec {
    pub payoff: Payoff,
    pub maturity: f64,
    pub side: TradeSide,
}

impl ClaimSpec {
    pub fn call(strike: f64, maturity: f64) -> Result<Self, XvaError> {
        Self::vanilla(Payoff::Call { strike }, maturity)
    }

    pub fn put(strike: f64, maturity: f64) -> Result<Self, XvaError> {
        Self::vanilla(Payoff::Put { strike }, maturity)
    }

    pub fn custom(knots: Vec<(f64, f64)>, maturity: f64) -> Result<Self, XvaError> {
        Self::vanilla(Payoff::Custom(PiecewiseLinear::new(knots)?), maturity)
    }

    fn vanilla(payoff: Payoff, maturity: f64) -> Result<Self, XvaError> {
        if !(maturity > 0.0) || !maturity.is_finite() {
            return Err(XvaError::InvalidParams(format!(
                "maturity must be a positive finite year count, got {maturity}"
            )));
        }
        if let Payoff::Call { strike } | Payoff::Put { strike } = payoff {
            if !(strike >= 0.0) || !strike.is_finite() {
                return Err(XvaError::InvalidParams(format!(
                    "strike must be a nonnegative finite price, got {strike}"
                )));
            }
        }
        Ok(ClaimSpec {
            payoff,
            maturity,
            side: TradeSide::Sell,
        })
    }

    pub fn with_side(mut self, side: TradeSide) -> Self {
        self.side = side;
        self
    }
}

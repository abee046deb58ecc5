//! Monte Carlo oracle: exact log-normal stock stepping under the valuation
//! measure, independent exponential default draws, and pathwise evaluation
//! of the default-risky representation and of the plain CVA/DVA estimators.
//!
//! Reproducibility: every path (or antithetic pair) owns a counter-based
//! substream of one ChaCha8 generator keyed by the scenario seed, and block
//! results are reduced in fixed order, so estimates are bit-identical for a
//! given `(seed, n_paths, n_steps)` regardless of worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analytic::public_value;
use crate::claim::ClaimSpec;
use crate::closed_form::{equal_rates, XvaBreakdown};
use crate::closeout::TieBreak;
use crate::error::XvaError;
use crate::market::MarketParams;
use crate::math::{map_blocks, neg, pos, worker_threads};

const BLOCK: usize = 4096;

/// Simulation controls; the JSON `mc` block.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    /// Upper bound on `n_paths * n_steps`.
    pub resource_cap: u64,
    pub tie_break: TieBreak,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            n_paths: 100_000,
            n_steps: 250,
            seed: 42,
            antithetic: false,
            resource_cap: 50_000_000,
            tie_break: TieBreak::default(),
        }
    }
}

/// Simulated paths plus default-time draws and seed metadata.
#[derive(Clone, Debug)]
pub struct PathBundle {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
    pub tie_break: TieBreak,
    /// Row-major `n_paths × (n_steps + 1)` stock values on the step grid.
    pub stock: Vec<f64>,
    /// Raw exponential default times (may exceed the horizon; infinite when
    /// the intensity vanishes).
    pub tau_i: Vec<f64>,
    pub tau_c: Vec<f64>,
    /// Stock revalued exactly at the first default time; NaN when no default
    /// occurs before the horizon.
    pub stock_at_default: Vec<f64>,
}

/// Which name defaults first on a path, `None` when the horizon is reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathOutcome {
    Matured,
    InvestorFirst,
    CounterpartyFirst,
}

impl PathBundle {
    pub fn path(&self, p: usize) -> &[f64] {
        &self.stock[p * (self.n_steps + 1)..(p + 1) * (self.n_steps + 1)]
    }

    /// First-default time capped at the horizon.
    pub fn tau(&self, p: usize) -> f64 {
        self.tau_i[p].min(self.tau_c[p]).min(self.horizon)
    }

    pub fn outcome(&self, p: usize) -> PathOutcome {
        let (ti, tc) = (self.tau_i[p], self.tau_c[p]);
        let tau = ti.min(tc);
        if tau >= self.horizon {
            return PathOutcome::Matured;
        }
        if ti < tc {
            PathOutcome::InvestorFirst
        } else if tc < ti {
            PathOutcome::CounterpartyFirst
        } else {
            match self.tie_break {
                TieBreak::CounterpartyFirst => PathOutcome::CounterpartyFirst,
                TieBreak::InvestorFirst => PathOutcome::InvestorFirst,
            }
        }
    }
}

/// Point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Independent averaging units (pairs under antithetic sampling).
    pub n_effective: usize,
}

/// Per-leg estimates of the default-risky representation at time zero.
#[derive(Clone, Copy, Debug)]
pub struct McBreakdown {
    pub funding: McEstimate,
    pub dva: McEstimate,
    pub cva: McEstimate,
    pub collateral: McEstimate,
    /// Estimate of the total adjustment (replication value minus quote).
    pub total: McEstimate,
    pub vhat0: f64,
}

impl McBreakdown {
    pub fn to_breakdown(&self) -> XvaBreakdown {
        let value = self.funding.value + self.dva.value + self.cva.value + self.collateral.value;
        XvaBreakdown {
            total: self.total.value,
            funding_leg: self.funding.value,
            dva_leg: self.dva.value,
            cva_leg: self.cva.value,
            collateral_leg: self.collateral.value,
            adjustment_factor: if self.vhat0 != 0.0 {
                value / self.vhat0
            } else {
                f64::NAN
            },
            vhat: self.vhat0,
        }
    }
}

/// CVA/DVA estimates of the equal-rates reduction.
#[derive(Clone, Copy, Debug)]
pub struct CvaDvaEstimate {
    pub cva: McEstimate,
    pub dva: McEstimate,
}

fn draw_uniform(rng: &mut ChaCha8Rng, antithetic_leg: bool) -> f64 {
    let u: f64 = rng.random();
    let u = if antithetic_leg { u } else { 1.0 - u };
    if u <= 0.0 {
        f64::MIN_POSITIVE
    } else {
        u
    }
}

struct PathDraws {
    tau_i: f64,
    tau_c: f64,
    normals: Vec<f64>,
    extra: f64,
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_path(
    seed: u64,
    stream: u64,
    negate: bool,
    n_steps: usize,
    h_i: f64,
    h_c: f64,
    horizon: f64,
) -> PathDraws {
    let mut rng = path_rng(seed, stream);
    let u_i = draw_uniform(&mut rng, negate);
    let u_c = draw_uniform(&mut rng, negate);
    let tau_i = if h_i > 0.0 {
        -u_i.ln() / h_i
    } else {
        f64::INFINITY
    };
    let tau_c = if h_c > 0.0 {
        -u_c.ln() / h_c
    } else {
        f64::INFINITY
    };
    let sign = if negate { -1.0 } else { 1.0 };
    let normals: Vec<f64> = (0..n_steps)
        .map(|_| sign * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let extra = if tau_i.min(tau_c) < horizon {
        sign * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    } else {
        0.0
    };
    PathDraws {
        tau_i,
        tau_c,
        normals,
        extra,
    }
}

pub(crate) fn simulate_with_threads(
    params: &MarketParams,
    claim: &ClaimSpec,
    settings: &McSettings,
    threads: usize,
) -> Result<PathBundle, XvaError> {
    if settings.n_paths < 2 || settings.n_steps < 1 {
        return Err(XvaError::InvalidParams(
            "need at least 2 paths and 1 step".into(),
        ));
    }
    if settings.antithetic && settings.n_paths % 2 != 0 {
        return Err(XvaError::InvalidParams(
            "antithetic sampling needs an even path count".into(),
        ));
    }
    let work = settings.n_paths as u64 * settings.n_steps as u64;
    if work > settings.resource_cap {
        return Err(XvaError::ResourceCap(format!(
            "n_paths * n_steps = {work} exceeds cap {}",
            settings.resource_cap
        )));
    }
    let (h_i, h_c) = params.risk_neutral_intensities()?;
    let r = params.rates.r_d;
    let sigma = params.equity.sigma;
    let s0 = params.equity.s0;
    let horizon = claim.maturity;
    let m = settings.n_steps;
    let dt = horizon / m as f64;
    let drift = (r - 0.5 * sigma * sigma) * dt;
    let vol = sigma * dt.sqrt();

    struct Block {
        start: usize,
        stock: Vec<f64>,
        tau_i: Vec<f64>,
        tau_c: Vec<f64>,
        stock_at_default: Vec<f64>,
    }

    let blocks = map_blocks(settings.n_paths, BLOCK, threads, |range| {
        let start = range.start;
        let count = range.len();
        let mut stock = vec![0.0; count * (m + 1)];
        let mut tau_i = vec![0.0; count];
        let mut tau_c = vec![0.0; count];
        let mut stock_at_default = vec![f64::NAN; count];
        for (local, p) in range.enumerate() {
            let (stream, negate) = if settings.antithetic {
                ((p / 2) as u64, p % 2 == 1)
            } else {
                (p as u64, false)
            };
            let draws = draw_path(settings.seed, stream, negate, m, h_i, h_c, horizon);
            let row = &mut stock[local * (m + 1)..(local + 1) * (m + 1)];
            row[0] = s0;
            for k in 0..m {
                row[k + 1] = row[k] * (drift + vol * draws.normals[k]).exp();
            }
            tau_i[local] = draws.tau_i;
            tau_c[local] = draws.tau_c;
            let tau = draws.tau_i.min(draws.tau_c);
            if tau < horizon {
                // exact conditional step from the last grid time before τ
                let k = ((tau / dt).floor() as usize).min(m - 1);
                let gap = tau - k as f64 * dt;
                stock_at_default[local] = row[k]
                    * ((r - 0.5 * sigma * sigma) * gap + sigma * gap.sqrt() * draws.extra).exp();
            }
        }
        Block {
            start,
            stock,
            tau_i,
            tau_c,
            stock_at_default,
        }
    });

    let mut bundle = PathBundle {
        n_paths: settings.n_paths,
        n_steps: m,
        dt,
        horizon,
        seed: settings.seed,
        antithetic: settings.antithetic,
        tie_break: settings.tie_break,
        stock: vec![0.0; settings.n_paths * (m + 1)],
        tau_i: vec![0.0; settings.n_paths],
        tau_c: vec![0.0; settings.n_paths],
        stock_at_default: vec![f64::NAN; settings.n_paths],
    };
    for b in blocks {
        let n = b.tau_i.len();
        bundle.stock[b.start * (m + 1)..(b.start + n) * (m + 1)].copy_from_slice(&b.stock);
        bundle.tau_i[b.start..b.start + n].copy_from_slice(&b.tau_i);
        bundle.tau_c[b.start..b.start + n].copy_from_slice(&b.tau_c);
        bundle.stock_at_default[b.start..b.start + n].copy_from_slice(&b.stock_at_default);
    }
    Ok(bundle)
}

/// Simulates stock paths and default times under the valuation measure.
pub fn simulate(
    params: &MarketParams,
    claim: &ClaimSpec,
    settings: &McSettings,
) -> Result<PathBundle, XvaError> {
    simulate_with_threads(params, claim, settings, worker_threads())
}

/// Streaming mean/variance accumulator combined in fixed block order.
#[derive(Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn estimate(&self) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq / n - mean * mean) / (n - 1.0).max(1.0)).max(0.0);
        McEstimate {
            value: mean,
            std_error: var.sqrt(),
            n_effective: self.n,
        }
    }
}

/// Per-path terms of the four-leg representation at time zero.
struct LegTerms {
    funding: f64,
    dva: f64,
    cva: f64,
    collateral: f64,
}

fn representation_terms(
    bundle: &PathBundle,
    params: &MarketParams,
    claim: &ClaimSpec,
    lambda: f64,
    r_f: f64,
    r_c: f64,
    h_i: f64,
    h_c: f64,
    p: usize,
) -> Result<LegTerms, XvaError> {
    let r_d = params.rates.r_d;
    let sigma = params.equity.sigma;
    let alpha = params.alpha;
    let credit = params.effective_credit()?;
    let row = bundle.path(p);
    let tau = bundle.tau(p);
    let outcome = bundle.outcome(p);
    let m = bundle.n_steps;
    let dt = bundle.dt;

    let mut terms = LegTerms {
        funding: 0.0,
        dva: 0.0,
        cva: 0.0,
        collateral: 0.0,
    };

    // Γ on the pre-default stretch carries one e^{(r_f - r_D)(s - 0)} factor
    // per name, hence the doubled exponent
    let gamma_pre = |s: f64| (2.0 * lambda * s).exp();

    match outcome {
        PathOutcome::Matured => {
            let horizon = bundle.horizon;
            terms.funding = (-r_f * horizon).exp() * claim.payoff.eval(row[m]) * gamma_pre(horizon);
        }
        PathOutcome::InvestorFirst => {
            let s_tau = bundle.stock_at_default[p];
            let vhat = public_value(claim, r_d, sigma, tau, s_tau)?;
            let jump = 1.0 + (r_d - r_f) / h_i;
            let payout = if vhat >= 0.0 {
                (1.0 - (1.0 - alpha) * credit.l_i) * vhat
            } else {
                vhat
            };
            terms.dva = (-r_f * tau).exp() * gamma_pre(tau) * jump * payout;
        }
        PathOutcome::CounterpartyFirst => {
            let s_tau = bundle.stock_at_default[p];
            let vhat = public_value(claim, r_d, sigma, tau, s_tau)?;
            let jump = 1.0 + (r_d - r_f) / h_c;
            let payout = if vhat < 0.0 {
                (1.0 - (1.0 - alpha) * credit.l_c) * vhat
            } else {
                vhat
            };
            terms.cva = (-r_f * tau).exp() * gamma_pre(tau) * jump * payout;
        }
    }

    if alpha > 0.0 {
        // trapezoid of e^{(2λ - r_f)s} V̂(s, S_s) up to τ, exact at the
        // default-time endpoint
        let g = |s: f64, stock: f64| -> Result<f64, XvaError> {
            Ok(((2.0 * lambda - r_f) * s).exp() * public_value(claim, r_d, sigma, s, stock)?)
        };
        let mut integral = 0.0;
        let full_steps = if outcome == PathOutcome::Matured {
            m
        } else {
            ((tau / dt).floor() as usize).min(m - 1)
        };
        let mut prev = g(0.0, row[0])?;
        for k in 1..=full_steps {
            let here = g(k as f64 * dt, row[k])?;
            integral += 0.5 * (prev + here) * dt;
            prev = here;
        }
        if outcome != PathOutcome::Matured {
            let gap = tau - full_steps as f64 * dt;
            if gap > 0.0 {
                let end = g(tau, bundle.stock_at_default[p])?;
                integral += 0.5 * (prev + end) * gap;
            }
        }
        terms.collateral = alpha * (r_f - r_c) * integral;
    }

    Ok(terms)
}

/// Evaluates the four legs of the default-risky representation pathwise and
/// returns per-leg estimates with standard errors.
///
/// Requires the equal-rates regime; asymmetric rates belong to the
/// backward-equation engine.
pub fn estimate_representation(
    bundle: &PathBundle,
    params: &MarketParams,
    claim: &ClaimSpec,
) -> Result<McBreakdown, XvaError> {
    let rates = equal_rates(params)?;
    let (h_i, h_c) = params.risk_neutral_intensities()?;
    let lambda = rates.r_f - rates.r_d;
    let vhat0 = public_value(claim, rates.r_d, params.equity.sigma, 0.0, params.equity.s0)?;

    let unit = if bundle.antithetic { 2 } else { 1 };
    let n_units = bundle.n_paths / unit;

    let blocks = map_blocks(n_units, BLOCK, worker_threads(), |range| {
        let mut acc = [Moments::default(); 5];
        for u in range {
            let mut leg = [0.0f64; 5];
            for member in 0..unit {
                let p = u * unit + member;
                let t = representation_terms(
                    bundle, params, claim, lambda, rates.r_f, rates.r_c, h_i, h_c, p,
                )
                .expect("path evaluation");
                leg[0] += t.funding;
                leg[1] += t.dva;
                leg[2] += t.cva;
                leg[3] += t.collateral;
                leg[4] += t.funding + t.dva + t.cva + t.collateral;
            }
            for (a, l) in acc.iter_mut().zip(leg) {
                a.push(l / unit as f64);
            }
        }
        acc
    });

    let mut acc = [Moments::default(); 5];
    for b in &blocks {
        for (a, m) in acc.iter_mut().zip(b) {
            a.merge(m);
        }
    }
    let [funding, dva, cva, collateral, value] = acc.map(|m| m.estimate());
    let total = McEstimate {
        value: value.value - vhat0,
        std_error: value.std_error,
        n_effective: value.n_effective,
    };
    Ok(McBreakdown {
        funding,
        dva,
        cva,
        collateral,
        total,
        vhat0,
    })
}

/// Plain CVA/DVA estimators of the equal-rates reduction
/// (`r_D = r_f = r_c = r_r`): discounted loss legs triggered by the first
/// default.
pub fn estimate_cva_dva(
    bundle: &PathBundle,
    params: &MarketParams,
    claim: &ClaimSpec,
) -> Result<CvaDvaEstimate, XvaError> {
    let r = &params.rates;
    for (name, a) in [
        ("r_f_plus", r.r_f_plus),
        ("r_f_minus", r.r_f_minus),
        ("r_c_plus", r.r_c_plus),
        ("r_c_minus", r.r_c_minus),
        ("r_r_plus", r.r_r_plus),
        ("r_r_minus", r.r_r_minus),
    ] {
        if (a - r.r_d).abs() > 1e-12 {
            return Err(XvaError::ClosedFormPrecondition(format!(
                "CVA/DVA reduction needs all rates equal; {name} = {a} differs from r_D = {}",
                r.r_d
            )));
        }
    }
    let credit = params.effective_credit()?;
    let r_d = r.r_d;
    let sigma = params.equity.sigma;
    let alpha = params.alpha;

    let unit = if bundle.antithetic { 2 } else { 1 };
    let n_units = bundle.n_paths / unit;
    let blocks = map_blocks(n_units, BLOCK, worker_threads(), |range| {
        let mut acc = [Moments::default(); 2];
        for u in range {
            let mut leg = [0.0f64; 2];
            for member in 0..unit {
                let p = u * unit + member;
                let tau = bundle.tau(p);
                match bundle.outcome(p) {
                    PathOutcome::Matured => {}
                    PathOutcome::InvestorFirst => {
                        let vhat = public_value(claim, r_d, sigma, tau, bundle.stock_at_default[p])
                            .expect("path evaluation");
                        leg[1] += (-r_d * tau).exp() * credit.l_i * pos(vhat - alpha * vhat);
                    }
                    PathOutcome::CounterpartyFirst => {
                        let vhat = public_value(claim, r_d, sigma, tau, bundle.stock_at_default[p])
                            .expect("path evaluation");
                        leg[0] += (-r_d * tau).exp() * credit.l_c * neg(vhat - alpha * vhat);
                    }
                }
            }
            acc[0].push(leg[0] / unit as f64);
            acc[1].push(leg[1] / unit as f64);
        }
        acc
    });
    let mut acc = [Moments::default(); 2];
    for b in &blocks {
        acc[0].merge(&b[0]);
        acc[1].merge(&b[1]);
    }
    Ok(CvaDvaEstimate {
        cva: acc[0].estimate(),
        dva: acc[1].estimate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{CreditParams, EquityParams, RateSet};

    fn params(h_i: f64, h_c: f64) -> MarketParams {
        MarketParams {
            rates: RateSet::flat(0.05),
            credit: if h_i > 0.0 || h_c > 0.0 {
                Some(CreditParams {
                    h_i_p: None,
                    h_c_p: None,
                    r_bond_i: None,
                    r_bond_c: None,
                    l_i: 0.5,
                    l_c: 0.5,
                    h_i_q: Some(h_i),
                    h_c_q: Some(h_c),
                })
            } else {
                None
            },
            equity: EquityParams {
                s0: 100.0,
                mu: 0.05,
                sigma: 0.2,
            },
            alpha: 0.0,
        }
    }

    fn claim() -> ClaimSpec {
        ClaimSpec::call(100.0, 1.0).unwrap()
    }

    fn small(n: usize) -> McSettings {
        McSettings {
            n_paths: n,
            n_steps: 50,
            seed: 7,
            ..McSettings::default()
        }
    }

    #[test]
    fn degenerate_diffusion_paths_are_deterministic() {
        let mut p = params(0.0, 0.0);
        p.equity.sigma = 0.0;
        let bundle = simulate(&p, &claim(), &small(16)).unwrap();
        for i in 0..16 {
            let row = bundle.path(i);
            for (k, &s) in row.iter().enumerate() {
                let expect = 100.0 * (0.05 * k as f64 * bundle.dt).exp();
                assert!((s - expect).abs() < 1e-9, "path {i} step {k}");
            }
        }
    }

    #[test]
    fn zero_intensities_never_default() {
        let bundle = simulate(&params(0.0, 0.0), &claim(), &small(64)).unwrap();
        for p in 0..64 {
            assert_eq!(bundle.outcome(p), PathOutcome::Matured);
            assert_eq!(bundle.tau(p), 1.0);
        }
    }

    #[test]
    fn first_default_frequency_matches_functional() {
        let n = 40_000;
        let bundle = simulate(&params(0.15, 0.2), &claim(), &small(n)).unwrap();
        let hits = (0..n)
            .filter(|&p| bundle.outcome(p) == PathOutcome::InvestorFirst)
            .count() as f64;
        let freq = hits / n as f64;
        let expect = 0.126562; // first-default probability over one year
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!(
            (freq - expect).abs() <= 3.0 * se,
            "freq {freq} vs {expect} (se {se})"
        );
    }

    #[test]
    fn bit_identical_across_worker_counts() {
        let s = small(1000);
        let a = simulate_with_threads(&params(0.15, 0.2), &claim(), &s, 1).unwrap();
        let b = simulate_with_threads(&params(0.15, 0.2), &claim(), &s, 5).unwrap();
        assert_eq!(a.stock, b.stock);
        assert_eq!(a.tau_i, b.tau_i);
        // bitwise compare: the no-default slots hold NaN
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
        assert_eq!(bits(&a.stock_at_default), bits(&b.stock_at_default));
    }

    #[test]
    fn resource_cap_enforced() {
        let s = McSettings {
            n_paths: 1_000_000,
            n_steps: 1_000,
            resource_cap: 50_000_000,
            ..McSettings::default()
        };
        assert!(matches!(
            simulate(&params(0.0, 0.0), &claim(), &s),
            Err(XvaError::ResourceCap(_))
        ));
    }

    #[test]
    fn martingale_and_survival_checks() {
        let n = 50_000;
        let bundle = simulate(&params(0.15, 0.2), &claim(), &small(n)).unwrap();
        let m = bundle.n_steps;
        let disc = (-0.05f64).exp();
        let mut acc = Moments::default();
        for p in 0..n {
            acc.push(disc * bundle.path(p)[m]);
        }
        let est = acc.estimate();
        assert!(
            (est.value - 100.0).abs() <= 4.0 * est.std_error,
            "discounted terminal mean {} (se {})",
            est.value,
            est.std_error
        );
        for s in [0.25, 0.5, 1.0] {
            let survived = (0..n)
                .filter(|&p| bundle.tau_i[p].min(bundle.tau_c[p]) >= s)
                .count() as f64
                / n as f64;
            let expect = (-0.35 * s).exp();
            let se = (expect * (1.0 - expect) / n as f64).sqrt();
            assert!(
                (survived - expect).abs() <= 4.0 * se,
                "survival at {s}: {survived} vs {expect}"
            );
        }
    }

    #[test]
    fn equal_rates_fully_collateralized_total_vanishes() {
        let mut p = params(0.15, 0.2);
        p.alpha = 1.0;
        let bundle = simulate(&p, &claim(), &small(20_000)).unwrap();
        let est = estimate_representation(&bundle, &p, &claim()).unwrap();
        assert!(
            est.total.value.abs() <= 3.0 * est.total.std_error,
            "total {} (se {})",
            est.total.value,
            est.total.std_error
        );
    }

    #[test]
    fn antithetic_preserves_the_mean() {
        let p = params(0.15, 0.2);
        let plain = estimate_representation(
            &simulate(&p, &claim(), &small(30_000)).unwrap(),
            &p,
            &claim(),
        )
        .unwrap();
        let anti_settings = McSettings {
            antithetic: true,
            ..small(30_000)
        };
        let anti = estimate_representation(
            &simulate(&p, &claim(), &anti_settings).unwrap(),
            &p,
            &claim(),
        )
        .unwrap();
        let band = 3.0 * (plain.total.std_error.powi(2) + anti.total.std_error.powi(2)).sqrt();
        assert!(
            (plain.total.value - anti.total.value).abs() <= band,
            "{} vs {}",
            plain.total.value,
            anti.total.value
        );
        assert_eq!(anti.total.n_effective, 15_000);
    }

    #[test]
    fn estimates_are_reproducible_for_a_fixed_seed() {
        let p = params(0.15, 0.2);
        let run = || {
            let bundle = simulate(&p, &claim(), &small(6_000)).unwrap();
            let est = estimate_representation(&bundle, &p, &claim()).unwrap();
            (
                est.total.value.to_bits(),
                est.funding.value.to_bits(),
                est.collateral.std_error.to_bits(),
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn quadrupling_paths_halves_the_standard_error() {
        let p = params(0.15, 0.2);
        let se = |n: usize| {
            let bundle = simulate(&p, &claim(), &small(n)).unwrap();
            estimate_representation(&bundle, &p, &claim())
                .unwrap()
                .total
                .std_error
        };
        let ratio = se(8_000) / se(32_000);
        assert!(
            (ratio - 2.0).abs() <= 0.3,
            "SE ratio {ratio} not within 15% of 2"
        );
    }

    #[test]
    fn loss_free_cva_dva_vanish() {
        let mut p = params(0.15, 0.2);
        if let Some(c) = p.credit.as_mut() {
            c.l_i = 0.0;
            c.l_c = 0.0;
        }
        let bundle = simulate(&p, &claim(), &small(5_000)).unwrap();
        let est = estimate_cva_dva(&bundle, &p, &claim()).unwrap();
        assert_eq!(est.cva.value, 0.0);
        assert_eq!(est.dva.value, 0.0);
    }

    #[test]
    fn nonnegative_payoff_kills_the_cva_leg_exactly() {
        let p = params(0.15, 0.2);
        let bundle = simulate(&p, &claim(), &small(5_000)).unwrap();
        let est = estimate_cva_dva(&bundle, &p, &claim()).unwrap();
        assert_eq!(est.cva.value, 0.0);
        assert!(est.dva.value > 0.0);
    }

    #[test]
    fn rate_asymmetry_rejected_by_the_estimators() {
        let mut p = params(0.15, 0.2);
        p.rates.r_f_minus = 0.06;
        let bundle = simulate(&p, &claim(), &small(100)).unwrap();
        assert!(estimate_representation(&bundle, &p, &claim()).is_err());
        assert!(estimate_cva_dva(&bundle, &p, &claim()).is_err());
    }
}

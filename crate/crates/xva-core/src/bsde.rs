//! Backward-equation engine: solves the nonlinear pre-default valuation
//! equation on a time × log-price lattice for either side of the trade,
//! producing buyer and seller values, the no-arbitrage interval, and the
//! hedge integrands.
//!
//! The Markovian reduction turns the backward equation into the semilinear
//! PDE `v_t + r_D S v_S + σ²S²/2 v_SS + h_I (θ_I(V̂) - v) + h_C (θ_C(V̂) - v)
//! + f(t, v, σS v_S, θ_I(V̂)-v, θ_C(V̂)-v) = 0` with terminal data `Φ`.
//! The linear diffusion is treated implicitly (two Rannacher backward-Euler
//! startup steps, Crank-Nicolson afterwards); the driver is frozen at the
//! previous Picard iterate so every linear solve stays tridiagonal.

use crate::analytic::public_value;
use crate::claim::ClaimSpec;
use crate::closed_form::{balance_positions, HedgeReport};
use crate::closeout::{theta_party, Party};
use crate::error::XvaError;
use crate::market::{MarketParams, RateSet};
use crate::math::{neg, pos};

/// Which replication problem the solve targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Hedging a sold claim (upper price).
    Seller,
    /// Hedging a purchased claim (lower price).
    Buyer,
}

/// Lattice resolution and Picard controls.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSettings {
    pub n_time: usize,
    pub n_space: usize,
    /// Half-width of the log-price grid in units of `σ√T`.
    pub width_sigmas: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            n_time: 200,
            n_space: 400,
            width_sigmas: 6.0,
            picard_tol: 1e-10,
            picard_max: 50,
        }
    }
}

/// Nonlinear generator of the valuation equation.
#[derive(Clone, Copy, Debug)]
pub struct Driver {
    pub side: Side,
    pub rates: RateSet,
    pub alpha: f64,
    pub h_i_q: f64,
    pub h_c_q: f64,
    pub sigma: f64,
}

impl Driver {
    fn seller_form(&self, v: f64, z: f64, z_i: f64, z_c: f64, vhat: f64) -> f64 {
        let r = &self.rates;
        let w = v + z_i + z_c - self.alpha * vhat;
        let coll = self.alpha * vhat;
        -(r.r_f_plus * pos(w) - r.r_f_minus * neg(w) + (r.r_d - r.r_r_minus) * pos(z) / self.sigma
            - (r.r_d - r.r_r_plus) * neg(z) / self.sigma
            - r.r_d * z_i
            - r.r_d * z_c
            + r.r_c_plus * pos(coll)
            - r.r_c_minus * neg(coll))
    }

    /// Driver drift at one point. The buyer form is the reflection
    /// `f⁻(t, v, z, z_I, z_C; V̂) = -f⁺(t, -v, -z, -z_I, -z_C; -V̂)`.
    pub fn eval(&self, _t: f64, v: f64, z: f64, z_i: f64, z_c: f64, vhat: f64) -> f64 {
        match self.side {
            Side::Seller => self.seller_form(v, z, z_i, z_c, vhat),
            Side::Buyer => -self.seller_form(-v, -z, -z_i, -z_c, -vhat),
        }
    }
}

/// Solver health indicators recorded during the march.
#[derive(Clone, Debug, Default)]
pub struct SolveDiagnostics {
    /// Largest Picard iteration count over all time steps.
    pub max_picard_iterations: usize,
    /// Set when the grid is too coarse for the explicit driver treatment.
    pub coarse_grid_warning: Option<String>,
}

/// Pre-default value surface and the three martingale integrands on the
/// lattice. Immutable after construction; safe to share across workers.
#[derive(Clone, Debug)]
pub struct GridSolution {
    pub times: Vec<f64>,
    pub log_prices: Vec<f64>,
    /// Row-major `(n_time+1) × (n_space+1)` surface of `v̄`.
    pub values: Vec<f64>,
    /// Diffusion integrand `Z = σ S v̄_S`.
    pub z: Vec<f64>,
    /// Jump integrand `Z^I = θ_I(V̂) - v̄`.
    pub z_i: Vec<f64>,
    /// Jump integrand `Z^C = θ_C(V̂) - v̄`.
    pub z_c: Vec<f64>,
    /// Public quote on the same lattice.
    pub vhat: Vec<f64>,
    pub maturity: f64,
    pub diagnostics: SolveDiagnostics,
}

impl GridSolution {
    fn n_space(&self) -> usize {
        self.log_prices.len() - 1
    }

    fn index(&self, k: usize, j: usize) -> usize {
        k * (self.n_space() + 1) + j
    }

    fn locate(&self, t: f64, s: f64) -> Result<(usize, f64, usize, f64), XvaError> {
        if !(s > 0.0) {
            return Err(XvaError::OutsideGrid(format!("price {s} not positive")));
        }
        let x = s.ln();
        let (x0, x1) = (self.log_prices[0], *self.log_prices.last().unwrap());
        if !(0.0..=self.maturity).contains(&t) || x < x0 || x > x1 {
            return Err(XvaError::OutsideGrid(format!(
                "(t={t}, S={s}) outside [0, {}] x [{:.4}, {:.4}] in log-price",
                self.maturity,
                x0.exp(),
                x1.exp()
            )));
        }
        let nt = self.times.len() - 1;
        let dt = self.maturity / nt as f64;
        let kf = (t / dt).min(nt as f64 - 1.0).max(0.0);
        let k = kf.floor() as usize;
        let wt = t / dt - k as f64;
        let dx = (x1 - x0) / self.n_space() as f64;
        let jf = ((x - x0) / dx).min(self.n_space() as f64 - 1.0).max(0.0);
        let j = jf.floor() as usize;
        let wx = (x - x0) / dx - j as f64;
        Ok((k, wt, j, wx))
    }

    fn bilinear(&self, field: &[f64], k: usize, wt: f64, j: usize, wx: f64) -> f64 {
        let f00 = field[self.index(k, j)];
        let f01 = field[self.index(k, j + 1)];
        let f10 = field[self.index(k + 1, j)];
        let f11 = field[self.index(k + 1, j + 1)];
        (1.0 - wt) * ((1.0 - wx) * f00 + wx * f01) + wt * ((1.0 - wx) * f10 + wx * f11)
    }

    /// Bilinear read of the value surface at `(t, S)`.
    pub fn value_at(&self, t: f64, s: f64) -> Result<f64, XvaError> {
        let (k, wt, j, wx) = self.locate(t, s)?;
        Ok(self.bilinear(&self.values, k, wt, j, wx))
    }

    /// Value at the initial time and a given spot.
    pub fn initial_value(&self, s: f64) -> Result<f64, XvaError> {
        self.value_at(0.0, s)
    }
}

/// Buyer and seller initial values with the implied no-arbitrage interval.
///
/// `width = v0_plus - v0_minus` and `xva_sell = xva_buy + width`, so the
/// interval identity holds exactly by construction.
#[derive(Clone, Copy, Debug)]
pub struct IntervalReport {
    pub v0_minus: f64,
    pub v0_plus: f64,
    pub xva_buy: f64,
    pub xva_sell: f64,
    pub width: f64,
    pub vhat0: f64,
    /// Max-node refinement delta of the seller solve, the grid-error scale.
    pub grid_error: f64,
}

struct Lattice {
    xs: Vec<f64>,
    spots: Vec<f64>,
    dx: f64,
    dt: f64,
    n_time: usize,
}

fn build_lattice(claim: &ClaimSpec, params: &MarketParams, settings: &GridSettings) -> Lattice {
    let n_space = settings.n_space.max(4) & !1; // even node count keeps S0 on the grid
    let n_time = settings.n_time.max(2);
    let x0 = params.equity.s0.ln();
    let width = settings.width_sigmas * params.equity.sigma * claim.maturity.sqrt();
    let dx = 2.0 * width / n_space as f64;
    let xs: Vec<f64> = (0..=n_space).map(|j| x0 - width + j as f64 * dx).collect();
    let spots: Vec<f64> = xs.iter().map(|&x| x.exp()).collect();
    Lattice {
        xs,
        spots,
        dx,
        dt: claim.maturity / n_time as f64,
        n_time,
    }
}

/// Dirichlet boundary: discounted linear extrapolation of the payoff along
/// the forward at the boundary spot.
fn boundary_value(claim: &ClaimSpec, r_d: f64, t: f64, s_boundary: f64) -> f64 {
    let dt = claim.maturity - t;
    (-r_d * dt).exp() * claim.payoff.eval(s_boundary * (r_d * dt).exp())
}

/// Exact cell average of the payoff over `[x_lo, x_hi]` in log-price.
///
/// Piecewise-linear payoffs integrate in closed form segment by segment;
/// averaging the terminal data removes the O(Δx) kink-on-node error of the
/// first backward step.
fn cell_averaged_payoff(claim: &ClaimSpec, x_lo: f64, x_hi: f64) -> f64 {
    let mut cuts = vec![x_lo];
    for k in claim.payoff.kinks() {
        if k > 0.0 {
            let xk = k.ln();
            if xk > x_lo && xk < x_hi {
                cuts.push(xk);
            }
        }
    }
    cuts.push(x_hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
    let mut integral = 0.0;
    for pair in cuts.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        if v <= u {
            continue;
        }
        let (pu, pv) = (u.exp(), v.exp());
        let (fu, fv) = (claim.payoff.eval(pu), claim.payoff.eval(pv));
        // payoff is linear in price inside the segment
        let c1 = if pv > pu { (fv - fu) / (pv - pu) } else { 0.0 };
        let c0 = fu - c1 * pu;
        integral += c0 * (v - u) + c1 * (pv - pu);
    }
    integral / (x_hi - x_lo)
}

fn vhat_row(
    claim: &ClaimSpec,
    r_d: f64,
    sigma: f64,
    t: f64,
    spots: &[f64],
) -> Result<Vec<f64>, XvaError> {
    spots
        .iter()
        .map(|&s| public_value(claim, r_d, sigma, t, s))
        .collect()
}

struct StepContext<'a> {
    driver: &'a Driver,
    alpha: f64,
    l_i: f64,
    l_c: f64,
    h_i: f64,
    h_c: f64,
    /// Without a credit block there are no risky bonds: the jump integrands
    /// are identically zero rather than `θ_i(V̂) - v`.
    defaults_enabled: bool,
    dx: f64,
    spot_low: f64,
    spot_high: f64,
}

impl StepContext<'_> {
    /// Full source `G = h_I (θ_I - v) + h_C (θ_C - v) + f(...)` on the
    /// interior nodes, with `z = σ v_x` from central differences of `v`.
    fn source(&self, t: f64, v: &[f64], vhat: &[f64], out: &mut [f64]) {
        let n = v.len() - 1;
        for j in 1..n {
            let vx = (v[j + 1] - v[j - 1]) / (2.0 * self.dx);
            let z = self.driver.sigma * vx;
            let (z_i, z_c) = if self.defaults_enabled {
                let theta_i = theta_party(Party::Investor, vhat[j], self.alpha, self.l_i);
                let theta_c = theta_party(Party::Counterparty, vhat[j], self.alpha, self.l_c);
                (theta_i - v[j], theta_c - v[j])
            } else {
                (0.0, 0.0)
            };
            out[j] =
                self.h_i * z_i + self.h_c * z_c + self.driver.eval(t, v[j], z, z_i, z_c, vhat[j]);
        }
    }
}

fn thomas_solve(lower: f64, diag: f64, upper: f64, rhs: &mut [f64], scratch: &mut [f64]) {
    // constant-coefficient tridiagonal system
    let n = rhs.len();
    scratch[0] = upper / diag;
    rhs[0] /= diag;
    for i in 1..n {
        let m = diag - lower * scratch[i - 1];
        scratch[i] = upper / m;
        rhs[i] = (rhs[i] - lower * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

/// One θ-weighted step of size `h` from the known level `(t1, v1)` down to
/// `t0 = t1 - h`. Returns the new level and the Picard iteration count.
#[allow(clippy::too_many_arguments)]
fn theta_step(
    ctx: &StepContext,
    claim: &ClaimSpec,
    r_d: f64,
    theta: f64,
    t1: f64,
    h: f64,
    v1: &[f64],
    vhat1: &[f64],
    vhat0: &[f64],
    settings: &GridSettings,
) -> Result<(Vec<f64>, usize), XvaError> {
    let n = v1.len() - 1;
    let t0 = t1 - h;
    let sigma = ctx.driver.sigma;
    let a = r_d - 0.5 * sigma * sigma;
    let d = 0.5 * sigma * sigma;
    let lo = -a / (2.0 * ctx.dx) + d / (ctx.dx * ctx.dx);
    let di = -2.0 * d / (ctx.dx * ctx.dx);
    let up = a / (2.0 * ctx.dx) + d / (ctx.dx * ctx.dx);

    let bc_low = boundary_value(claim, r_d, t0, ctx.spot_low);
    let bc_high = boundary_value(claim, r_d, t0, ctx.spot_high);

    // explicit part (I + h(1-θ)L) v1 + h(1-θ) G(t1, v1)
    let mut g1 = vec![0.0; n + 1];
    if theta < 1.0 {
        ctx.source(t1, v1, vhat1, &mut g1);
    }
    let mut explicit = vec![0.0; n + 1];
    for j in 1..n {
        let lv = lo * v1[j - 1] + di * v1[j] + up * v1[j + 1];
        explicit[j] = v1[j] + h * (1.0 - theta) * (lv + g1[j]);
    }

    let diag = 1.0 - h * theta * di;
    let lower = -h * theta * lo;
    let upper = -h * theta * up;

    let mut v_iter = v1.to_vec();
    v_iter[0] = bc_low;
    v_iter[n] = bc_high;
    let mut g0 = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n - 1];
    let mut scratch = vec![0.0; n - 1];
    for iteration in 1..=settings.picard_max {
        ctx.source(t0, &v_iter, vhat0, &mut g0);
        for j in 1..n {
            rhs[j - 1] = explicit[j] + h * theta * g0[j];
        }
        rhs[0] -= lower * bc_low;
        rhs[n - 2] -= upper * bc_high;
        thomas_solve(lower, diag, upper, &mut rhs, &mut scratch);
        let mut delta = 0.0f64;
        for j in 1..n {
            delta = delta.max((rhs[j - 1] - v_iter[j]).abs());
            v_iter[j] = rhs[j - 1];
        }
        if delta < settings.picard_tol {
            return Ok((v_iter, iteration));
        }
    }
    Err(XvaError::PicardDiverged(format!(
        "step at t={t0:.6} exceeded {} iterations (tol {})",
        settings.picard_max, settings.picard_tol
    )))
}

/// Solves the valuation equation for one side of the trade.
pub fn solve(
    claim: &ClaimSpec,
    params: &MarketParams,
    side: Side,
    settings: &GridSettings,
) -> Result<GridSolution, XvaError> {
    let credit = params.effective_credit()?;
    let (h_i, h_c) = if credit.defaults_enabled {
        params.risk_neutral_intensities()?
    } else {
        (0.0, 0.0)
    };
    let sigma = params.equity.sigma;
    let r_d = params.rates.r_d;
    let lattice = build_lattice(claim, params, settings);
    let n = lattice.xs.len() - 1;
    let n_time = lattice.n_time;

    let driver = Driver {
        side,
        rates: params.rates,
        alpha: params.alpha,
        h_i_q: h_i,
        h_c_q: h_c,
        sigma,
    };
    let ctx = StepContext {
        driver: &driver,
        alpha: params.alpha,
        l_i: credit.l_i,
        l_c: credit.l_c,
        h_i,
        h_c,
        defaults_enabled: credit.defaults_enabled,
        dx: lattice.dx,
        spot_low: lattice.spots[0],
        spot_high: lattice.spots[n],
    };

    // public quote on every lattice level, reused by the driver and exported
    let mut vhat = vec![0.0; (n_time + 1) * (n + 1)];
    for k in 0..=n_time {
        let t = k as f64 * lattice.dt;
        let row = vhat_row(claim, r_d, sigma, t.min(claim.maturity), &lattice.spots)?;
        vhat[k * (n + 1)..(k + 1) * (n + 1)].copy_from_slice(&row);
    }

    // the exported terminal slice is the exact payoff; the march starts from
    // its cell average, which kills the kink-on-node error of the first step
    let mut values = vec![0.0; (n_time + 1) * (n + 1)];
    for (j, &s) in lattice.spots.iter().enumerate() {
        values[n_time * (n + 1) + j] = claim.payoff.eval(s);
    }
    let rannacher_steps = 2.min(n_time);
    let mut max_iters = 0usize;
    let mut level: Vec<f64> = lattice
        .xs
        .iter()
        .map(|&x| cell_averaged_payoff(claim, x - 0.5 * lattice.dx, x + 0.5 * lattice.dx))
        .collect();
    level[0] = claim.payoff.eval(lattice.spots[0]);
    level[n] = claim.payoff.eval(lattice.spots[n]);
    for k in (0..n_time).rev() {
        let t1 = (k + 1) as f64 * lattice.dt;
        let step_index = n_time - 1 - k; // 0 at maturity
        let vhat0 = &vhat[k * (n + 1)..(k + 1) * (n + 1)];
        let vhat1 = &vhat[(k + 1) * (n + 1)..(k + 2) * (n + 1)];
        if step_index < rannacher_steps {
            // two damped backward-Euler half steps
            let h = lattice.dt / 2.0;
            let t_mid = t1 - h;
            let vhat_mid = vhat_row(claim, r_d, sigma, t_mid, &lattice.spots)?;
            let (mid, it1) = theta_step(
                &ctx, claim, r_d, 1.0, t1, h, &level, vhat1, &vhat_mid, settings,
            )?;
            let (next, it2) = theta_step(
                &ctx, claim, r_d, 1.0, t_mid, h, &mid, &vhat_mid, vhat0, settings,
            )?;
            max_iters = max_iters.max(it1).max(it2);
            level = next;
        } else {
            let (next, iters) = theta_step(
                &ctx, claim, r_d, 0.5, t1, lattice.dt, &level, vhat1, vhat0, settings,
            )?;
            max_iters = max_iters.max(iters);
            level = next;
        }
        values[k * (n + 1)..(k + 1) * (n + 1)].copy_from_slice(&level);
    }

    // integrand surfaces from the final value surface
    let mut z = vec![0.0; values.len()];
    let mut z_i = vec![0.0; values.len()];
    let mut z_c = vec![0.0; values.len()];
    for k in 0..=n_time {
        let row = &values[k * (n + 1)..(k + 1) * (n + 1)];
        let vh = &vhat[k * (n + 1)..(k + 1) * (n + 1)];
        for j in 0..=n {
            let vx = if j == 0 {
                (row[1] - row[0]) / lattice.dx
            } else if j == n {
                (row[n] - row[n - 1]) / lattice.dx
            } else {
                (row[j + 1] - row[j - 1]) / (2.0 * lattice.dx)
            };
            z[k * (n + 1) + j] = sigma * vx;
            if credit.defaults_enabled {
                z_i[k * (n + 1) + j] =
                    theta_party(Party::Investor, vh[j], params.alpha, credit.l_i) - row[j];
                z_c[k * (n + 1) + j] =
                    theta_party(Party::Counterparty, vh[j], params.alpha, credit.l_c) - row[j];
            }
        }
    }

    let lipschitz = params
        .rates
        .r_f_minus
        .abs()
        .max(params.rates.r_f_plus.abs())
        + params.rates.r_d.abs()
        + h_i
        + h_c;
    let coarse_grid_warning = if lattice.dt * lipschitz > 0.5 {
        Some(format!(
            "time step {} too coarse for driver scale {:.3}; refine n_time",
            lattice.dt, lipschitz
        ))
    } else {
        None
    };

    Ok(GridSolution {
        times: (0..=n_time).map(|k| k as f64 * lattice.dt).collect(),
        log_prices: lattice.xs,
        values,
        z,
        z_i,
        z_c,
        vhat,
        maturity: claim.maturity,
        diagnostics: SolveDiagnostics {
            max_picard_iterations: max_iters,
            coarse_grid_warning,
        },
    })
}

/// Max-node difference between a solve and one at doubled resolution;
/// the measured grid-error scale.
pub fn refinement_delta(
    claim: &ClaimSpec,
    params: &MarketParams,
    side: Side,
    settings: &GridSettings,
) -> Result<f64, XvaError> {
    let coarse = solve(claim, params, side, settings)?;
    let fine_settings = GridSettings {
        n_time: settings.n_time * 2,
        n_space: settings.n_space * 2,
        ..*settings
    };
    let fine = solve(claim, params, side, &fine_settings)?;
    let n = coarse.log_prices.len() - 1;
    let mut delta = 0.0f64;
    for k in 0..coarse.times.len() {
        for j in 0..=n {
            let c = coarse.values[k * (n + 1) + j];
            let f = fine.values[(2 * k) * (2 * n + 1) + 2 * j];
            delta = delta.max((c - f).abs());
        }
    }
    Ok(delta)
}

/// Buyer and seller solves assembled into the no-arbitrage interval.
pub fn interval(
    claim: &ClaimSpec,
    params: &MarketParams,
    settings: &GridSettings,
) -> Result<IntervalReport, XvaError> {
    let s0 = params.equity.s0;
    let seller = solve(claim, params, Side::Seller, settings)?;
    let buyer = solve(claim, params, Side::Buyer, settings)?;
    let v0_plus = seller.initial_value(s0)?;
    let v0_minus = buyer.initial_value(s0)?;
    let vhat0 = public_value(claim, params.rates.r_d, params.equity.sigma, 0.0, s0)?;
    let grid_error = refinement_delta(claim, params, Side::Seller, settings)?;
    let width = v0_plus - v0_minus;
    let xva_buy = v0_minus - vhat0;
    Ok(IntervalReport {
        v0_minus,
        v0_plus,
        xva_buy,
        xva_sell: xva_buy + width,
        width,
        vhat0,
        grid_error,
    })
}

/// Reads the replicating positions off a solved surface at `(t, S)`.
///
/// `ξ = Z/(σS)`, `ξ_i = -Z^i / P^i` with the pre-default bond price
/// `P^i = e^{-(r_D + h_i)(T-t)}`; account shares follow from the balance
/// identities.
pub fn extract_hedge(
    solution: &GridSolution,
    params: &MarketParams,
    t: f64,
    s: f64,
) -> Result<HedgeReport, XvaError> {
    if t >= solution.maturity {
        return Err(XvaError::Domain(format!(
            "hedge extraction needs t < maturity, got t={t}"
        )));
    }
    let (k, wt, j, wx) = solution.locate(t, s)?;
    let value = solution.bilinear(&solution.values, k, wt, j, wx);
    let z = solution.bilinear(&solution.z, k, wt, j, wx);
    let z_i = solution.bilinear(&solution.z_i, k, wt, j, wx);
    let z_c = solution.bilinear(&solution.z_c, k, wt, j, wx);
    let vhat = solution.bilinear(&solution.vhat, k, wt, j, wx);
    let credit = params.effective_credit()?;
    let (h_i, h_c) = if credit.defaults_enabled {
        params.risk_neutral_intensities()?
    } else {
        (0.0, 0.0)
    };
    let dt = solution.maturity - t;
    let bond_price_i = (-(params.rates.r_d + h_i) * dt).exp();
    let bond_price_c = (-(params.rates.r_d + h_c) * dt).exp();
    let xi_stock = z / (params.equity.sigma * s);
    let (xi_bond_i, xi_bond_c) = if credit.defaults_enabled {
        (-z_i / bond_price_i, -z_c / bond_price_c)
    } else {
        (0.0, 0.0)
    };
    Ok(balance_positions(
        params,
        t,
        s,
        value,
        vhat,
        xi_stock,
        xi_bond_i,
        xi_bond_c,
        bond_price_i,
        bond_price_c,
    ))
}

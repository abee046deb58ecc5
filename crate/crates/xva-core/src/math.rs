//! Shared numerical kernels: normal distribution, Gaussian quadrature rules,
//! and stable exponential integrals.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Stable evaluation of `∫_0^dt e^{kappa u} du`.
///
/// The quotient form `(e^{kappa dt} - 1) / kappa` has a removable singularity
/// at `kappa = 0`; the limit branch `dt` is selected when `|kappa| < 1e-12`.
pub fn exp_integral(kappa: f64, dt: f64) -> f64 {
    if kappa.abs() < 1e-12 {
        dt
    } else {
        f64::exp_m1(kappa * dt) / kappa
    }
}

fn positive(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Positive part `x⁺ = max(x, 0)`.
pub fn pos(x: f64) -> f64 {
    positive(x)
}

/// Negative part `x⁻ = max(-x, 0)`, so that `x = x⁺ - x⁻`.
pub fn neg(x: f64) -> f64 {
    positive(-x)
}

/// Orthonormal Hermite value `H̃_n(x)` and the scaled derivative input
/// `H̃_{n-1}(x)`; `H̃_n'(x) = sqrt(2n) H̃_{n-1}(x)`.
fn hermite_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// Number of Hermite-Jacobi eigenvalues strictly below `x`, by the Sturm
/// sequence of the symmetric tridiagonal matrix (zero diagonal, off-diagonal
/// `sqrt(j/2)`).
fn hermite_sturm_count(n: usize, x: f64) -> usize {
    let mut count = 0usize;
    let mut d = -x;
    if d < 0.0 {
        count += 1;
    }
    for j in 1..n {
        let denom = if d.abs() < 1e-300 { -1e-300 } else { d };
        d = -x - (j as f64 * 0.5) / denom;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gauss-Hermite nodes and weights for weight function `e^{-x²}`.
///
/// Nodes are the Jacobi-matrix eigenvalues, bracketed by Sturm bisection
/// (robust for any order) and polished with a couple of guarded Newton
/// steps; weights come from the orthonormal recurrence. Exceeds f64 range
/// beyond roughly 550 nodes, which is more than the adaptive ladder uses.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let bound = (2.0 * nf + 1.0).sqrt();
    // positive roots; the negative half is the mirror image
    for k in n.div_ceil(2)..n {
        let (mut lo, mut hi) = (-bound, bound);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if hermite_sturm_count(n, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut z = 0.5 * (lo + hi);
        for _ in 0..4 {
            let (p1, p2) = hermite_pair(n, z);
            let dz = p1 / ((2.0 * nf).sqrt() * p2);
            if !dz.is_finite() || dz.abs() > 1e-6 {
                break;
            }
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, p2) = hermite_pair(n, z);
        let pp = (2.0 * nf).sqrt() * p2;
        let w = 2.0 / (pp * pp);
        nodes[k] = z;
        nodes[n - 1 - k] = -z;
        // far tail nodes can exceed f64 range in the recurrence; their true
        // weights underflow anyway
        let w = if w.is_finite() { w } else { 0.0 };
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        let mid = n / 2;
        nodes[mid] = 0.0;
        let (_, p2) = hermite_pair(n, 0.0);
        let pp = (2.0 * nf).sqrt() * p2;
        weights[mid] = 2.0 / (pp * pp);
    }
    (nodes, weights)
}

fn hermite_cache() -> &'static Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached Gauss-Hermite rule shared across evaluation points.
pub fn gauss_hermite_cached(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    let mut cache = hermite_cache().lock().expect("hermite cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| Arc::new(gauss_hermite(n)))
        .clone()
}

/// Expectation `E[g(Z)]` for `Z ~ N(0,1)` by an `n`-node Gauss-Hermite rule.
pub fn gauss_normal_expectation(n: usize, mut g: impl FnMut(f64) -> f64) -> f64 {
    let rule = gauss_hermite_cached(n);
    let (nodes, weights) = (&rule.0, &rule.1);
    let scale = std::f64::consts::PI.sqrt();
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        acc += w * g(std::f64::consts::SQRT_2 * x);
    }
    acc / scale
}

/// Node ladder used by the adaptive quadratures.
pub const ADAPTIVE_LADDER: [usize; 7] = [64, 96, 128, 192, 256, 384, 512];

/// Truncation of the standard normal range; the discarded mass is below
/// 1e-21 even against linearly growing payoffs.
pub const NORMAL_Z_MAX: f64 = 10.0;

/// Per-segment node ladder of the kink-split quadrature.
const SEGMENT_LADDER: [usize; 6] = [16, 24, 32, 48, 64, 96];

/// Expectation `E[g(Z)]`, `Z ~ N(0,1)`, for integrands that are smooth
/// between known kink abscissae: composite Gauss-Legendre against the
/// normal density on the segments between kinks, refined until two levels
/// agree to `rel_tol` relative (floor 1.0).
///
/// Plain Gauss-Hermite stalls near 1e-3 on kinked integrands; splitting at
/// the kinks restores spectral convergence.
pub fn adaptive_normal_expectation_kinks(
    rel_tol: f64,
    kinks: &[f64],
    mut g: impl FnMut(f64) -> f64,
) -> f64 {
    let mut cuts: Vec<f64> = kinks
        .iter()
        .copied()
        .filter(|z| z.is_finite() && z.abs() < NORMAL_Z_MAX)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite kinks"));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(-NORMAL_Z_MAX);
    edges.extend(cuts);
    edges.push(NORMAL_Z_MAX);

    let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut prev = f64::NAN;
    let mut value = 0.0;
    for &n in SEGMENT_LADDER.iter() {
        let rule = gauss_legendre_cached(n);
        value = 0.0;
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&x, &w) in rule.0.iter().zip(&rule.1) {
                let z = mid + half * x;
                value += half * w * g(z) * density(z);
            }
        }
        if prev.is_finite() && (value - prev).abs() <= rel_tol * value.abs().max(1.0) {
            return value;
        }
        prev = value;
    }
    value
}

fn legendre_cache() -> &'static Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached Gauss-Legendre rule on the reference interval `[-1, 1]`.
pub fn gauss_legendre_cached(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    let mut cache = legendre_cache().lock().expect("legendre cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| Arc::new(gauss_legendre(n, -1.0, 1.0)))
        .clone()
}

/// Refines `E[g(Z)]` over the node ladder until two successive levels agree
/// to `rel_tol` relative (floor 1.0 on the denominator), returning the finest
/// evaluation either way.
pub fn adaptive_normal_expectation(rel_tol: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    let mut prev = f64::NAN;
    let mut value = 0.0;
    for &n in ADAPTIVE_LADDER.iter() {
        value = gauss_normal_expectation(n, &mut g);
        if prev.is_finite() && (value - prev).abs() <= rel_tol * value.abs().max(1.0) {
            return value;
        }
        prev = value;
    }
    value
}

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let m = n.div_ceil(2);
    let xm = 0.5 * (b + a);
    let xl = 0.5 * (b - a);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = xm - xl * z;
        nodes[n - 1 - i] = xm + xl * z;
        weights[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Splits `0..n_items` into fixed-size blocks, maps each block on a worker
/// pool, and returns results in block order so reductions are deterministic
/// regardless of worker count.
pub fn map_blocks<T, F>(n_items: usize, block_size: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    assert!(block_size > 0);
    let n_blocks = n_items.div_ceil(block_size);
    let ranges: Vec<std::ops::Range<usize>> = (0..n_blocks)
        .map(|b| (b * block_size)..((b + 1) * block_size).min(n_items))
        .collect();
    let threads = threads.max(1).min(n_blocks.max(1));
    if threads <= 1 || n_blocks <= 1 {
        return ranges.into_iter().map(f).collect();
    }
    let mut results: Vec<Option<T>> = Vec::with_capacity(n_blocks);
    results.resize_with(n_blocks, || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let b = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if b >= n_blocks {
                    break;
                }
                let out = f(ranges[b].clone());
                let mut guard = slots.lock().expect("worker slot lock poisoned");
                guard[b] = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|slot| slot.expect("every block filled"))
        .collect()
}

/// Worker count: `XVA_THREADS` if set, otherwise available parallelism.
pub fn worker_threads() -> usize {
    if let Ok(v) = std::env::var("XVA_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

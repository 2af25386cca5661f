//! Gaussian random walks below a barrier: the ballot-type bound
//! `min{1, a/sqrt n} min{1, b/sqrt n}^2`, a Monte Carlo estimator and a
//! dynamic-programming oracle for
//! `P(S_j <= a for all j <= n, a - b <= S_n <= a)`.

use crate::error::{Error, Result};
use crate::numeric::{derive_seed, normal_cdf, KahanSum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Default step variance.
pub const DEFAULT_VARIANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct WalkSpec {
    pub n: usize,
    pub variances: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl WalkSpec {
    pub fn new(variances: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::param("walk needs at least one step"));
        }
        if let Some(v) = variances.iter().find(|v| !(0.05..=20.0).contains(*v)) {
            return Err(Error::param(format!("step variance {v} outside [1/20, 20]")));
        }
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::param(format!("need a, b > 0 (a = {a}, b = {b})")));
        }
        Ok(Self {
            n: variances.len(),
            variances,
            a,
            b,
        })
    }

    pub fn uniform(n: usize, variance: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![variance; n], a, b)
    }

    pub fn total_variance(&self) -> f64 {
        self.variances.iter().sum()
    }

    pub fn min_sd(&self) -> f64 {
        self.variances.iter().cloned().fold(f64::INFINITY, f64::min).sqrt()
    }
}

/// `min{1, a/sqrt n} min{1, b/sqrt n}^2`.
pub fn ballot_bound(n: usize, a: f64, b: f64) -> f64 {
    let r = (n.max(1) as f64).sqrt();
    let mb = (b / r).min(1.0);
    (a / r).min(1.0) * mb * mb
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Binomial standard error `sqrt(p (1 - p) / n)`.
pub fn normal_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Trial `i` draws its increments from a ChaCha8 stream keyed by `(seed, i)`.
pub fn walk_probability_mc(spec: &WalkSpec, trials: usize, seed: u64) -> Result<McEstimate> {
    if trials < 1000 {
        return Err(Error::param("walk Monte Carlo needs at least 1000 trials"));
    }
    let sds: Vec<f64> = spec.variances.iter().map(|v| v.sqrt()).collect();
    let hits: usize = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i));
            let mut s = 0.0;
            for sd in &sds {
                let g: f64 = StandardNormal.sample(&mut rng);
                s += sd * g;
                if s > spec.a {
                    return 0;
                }
            }
            usize::from(s >= spec.a - spec.b)
        })
        .sum();
    let p = hits as f64 / trials as f64;
    Ok(McEstimate {
        p_hat: p,
        std_err: normal_se(p, trials),
        trials,
    })
}

/// Grid defaults: step `sigma_min / 8`, support down to `-(a + 6 sqrt(total variance))`.
pub fn default_grid(spec: &WalkSpec) -> (f64, f64) {
    (spec.min_sd() / 8.0, spec.a + 6.0 * spec.total_variance().sqrt())
}

/// Barrier-only or barrier-and-window probability on one grid.
///
/// Cells `[a - (i+1) dx, a - i dx]` carry the mass of the sub-barrier walk at
/// their centres; the first step is integrated exactly from the origin and
/// the last step integrates the exact Gaussian over the end window.
fn dp_probability(variances: &[f64], a: f64, window: Option<f64>, dx: f64, lower: f64) -> f64 {
    let n = variances.len();
    let sd1 = variances[0].sqrt();
    let end_mass = |x: f64, sd: f64| -> f64 {
        match window {
            Some(b) => normal_cdf((a - x) / sd) - normal_cdf((a - b - x) / sd),
            None => normal_cdf((a - x) / sd),
        }
    };
    if n == 1 {
        return end_mass(0.0, sd1);
    }
    let cells = ((a + lower) / dx).ceil() as usize;
    let centre = |i: usize| a - (i as f64 + 0.5) * dx;
    let mut p: Vec<f64> = (0..cells)
        .map(|i| normal_cdf((a - i as f64 * dx) / sd1) - normal_cdf((a - (i + 1) as f64 * dx) / sd1))
        .collect();
    let mut kernel: Vec<f64> = Vec::new();
    let mut reach = 0usize;
    let mut kernel_var = f64::NAN;
    let mut next = vec![0.0; cells];
    for &var in &variances[1..n - 1] {
        if var != kernel_var {
            let sd = var.sqrt();
            reach = (9.0 * sd / dx).ceil() as usize + 1;
            // weight of moving d cells: mass of N(d dx, sd^2) in one cell
            kernel = (0..=2 * reach)
                .map(|k| {
                    let d = k as f64 - reach as f64;
                    normal_cdf((d * dx + 0.5 * dx) / sd) - normal_cdf((d * dx - 0.5 * dx) / sd)
                })
                .collect();
            kernel_var = var;
        }
        for (j, slot) in next.iter_mut().enumerate() {
            let lo = j.saturating_sub(reach);
            let hi = (j + reach).min(cells - 1);
            let mut acc = 0.0;
            for i in lo..=hi {
                // moving from cell i to cell j shifts by (i - j) dx
                acc += p[i] * kernel[i + reach - j];
            }
            *slot = acc;
        }
        std::mem::swap(&mut p, &mut next);
    }
    let sdn = variances[n - 1].sqrt();
    let mut acc = KahanSum::new();
    for (i, &m) in p.iter().enumerate() {
        if m != 0.0 {
            acc.add(m * end_mass(centre(i), sdn));
        }
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpResult {
    /// Value on the refined grid.
    pub value: f64,
    /// Value on the requested grid.
    pub coarse: f64,
    /// `|value - coarse|`, the step-halving error estimate.
    pub err_estimate: f64,
}

fn check_grid(spec: &WalkSpec, grid_step: f64, grid_halfwidth: f64) -> Result<()> {
    if spec.n > 1000 {
        return Err(Error::param(format!("walk length {} above 1000", spec.n)));
    }
    if !(grid_step > 0.0 && grid_step <= spec.min_sd() / 8.0 * (1.0 + 1e-12)) {
        return Err(Error::Numeric(format!(
            "grid step {grid_step} too coarse: must be <= sigma_min/8 = {}",
            spec.min_sd() / 8.0
        )));
    }
    if !(grid_halfwidth > 0.0) {
        return Err(Error::param("grid half-width must be positive"));
    }
    Ok(())
}

/// DP value on a single grid.
pub fn walk_probability_dp(spec: &WalkSpec, grid_step: f64, grid_halfwidth: f64) -> Result<f64> {
    check_grid(spec, grid_step, grid_halfwidth)?;
    Ok(dp_probability(&spec.variances, spec.a, Some(spec.b), grid_step, grid_halfwidth).clamp(0.0, 1.0))
}

/// DP value with a step-halving error estimate.
pub fn walk_probability_exact(spec: &WalkSpec, grid_step: f64, grid_halfwidth: f64) -> Result<DpResult> {
    let coarse = walk_probability_dp(spec, grid_step, grid_halfwidth)?;
    let value = walk_probability_dp(spec, grid_step / 2.0, grid_halfwidth)?;
    Ok(DpResult {
        value,
        coarse,
        err_estimate: (value - coarse).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationReport {
    pub dp: f64,
    /// `P(S_j <= a for j <= n/3)`.
    pub prefix: f64,
    /// `P(S_n - S_{n-k} >= -b for k <= n/3)`.
    pub suffix: f64,
    pub middle: f64,
    pub ratio: f64,
}

/// Compares the DP value with `min{1, b/sqrt n}` times the independent
/// prefix-barrier and suffix-barrier probabilities of the outer thirds.
pub fn factorization_check(spec: &WalkSpec) -> Result<FactorizationReport> {
    if spec.n < 3 {
        return Err(Error::param("factorization needs n >= 3"));
    }
    let (dx, lower) = default_grid(spec);
    let dp = walk_probability_dp(spec, dx, lower)?;
    let third = spec.n / 3;
    let prefix = dp_probability(&spec.variances[..third], spec.a, None, dx, lower);
    let tail: Vec<f64> = spec.variances[spec.n - third..].iter().rev().copied().collect();
    // reflect the reversed increments: R_k >= -b  <=>  -R_k <= b
    let suffix = dp_probability(&tail, spec.b, None, dx, spec.b + 6.0 * spec.total_variance().sqrt());
    let middle = (spec.b / (spec.n as f64).sqrt()).min(1.0);
    Ok(FactorizationReport {
        dp,
        prefix,
        suffix,
        middle,
        ratio: dp / (middle * prefix * suffix),
    })
}

/// One row of the ballot table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallotRow {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub p_mc: f64,
    pub se: f64,
    pub p_dp: f64,
    pub dp_err: f64,
    pub bound: f64,
    pub ratio: f64,
}

pub fn ballot_row(spec: &WalkSpec, trials: usize, seed: u64) -> Result<BallotRow> {
    let mc = walk_probability_mc(spec, trials, seed)?;
    let (dx, lower) = default_grid(spec);
    let dp = walk_probability_exact(spec, dx, lower)?;
    let bound = ballot_bound(spec.n, spec.a, spec.b);
    Ok(BallotRow {
        n: spec.n,
        a: spec.a,
        b: spec.b,
        p_mc: mc.p_hat,
        se: mc.std_err,
        p_dp: dp.value,
        dp_err: dp.err_estimate,
        bound,
        ratio: dp.value / bound,
    })
}

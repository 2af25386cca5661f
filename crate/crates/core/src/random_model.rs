//! Steinhaus random multiplicative functions and the random Euler products
//! `F(1/2 + ih) = prod_{p <= P} (1 - f(p) p^{-1/2-ih})^{-1}`.
//!
//! `f(p)` is a pure function of `(seed, p)`: the angle is a SplitMix64 hash
//! of the pair scaled to `[0, 2pi)`. Trial `i` of an experiment uses the
//! sampler seeded by `derive_seed(master, i)`, so results never depend on
//! scheduling.

use crate::dirichlet_poly::{neg_log_one_minus, smooth_poly, rough_poly, DirichletPolySpec};
use crate::error::{Error, Result};
use crate::ladders::{
    build_hpoints, event_g_at_h, BarrierSchedule, EulerLadder, LadderGrid, LadderMode, LadderValues,
};
use crate::numeric::{derive_seed, mix64, unit_f64, ComplexKahan, KahanSum, MeanSe};
use crate::primes::PrimeTable;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SteinhausSampler {
    pub master_seed: u64,
    pub draw_index: u64,
}

impl SteinhausSampler {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            draw_index: 0,
        }
    }

    /// Independent sampler number `i` of the same master seed.
    pub fn draw(master_seed: u64, i: u64) -> Self {
        Self {
            master_seed,
            draw_index: i,
        }
    }

    fn key(&self) -> u64 {
        derive_seed(self.master_seed, self.draw_index)
    }

    /// Angle of `f(p)` in `[0, 2pi)`.
    pub fn angle(&self, p: u64) -> f64 {
        TAU * unit_f64(mix64(self.key() ^ mix64(p)))
    }

    pub fn f_prime(&self, p: u64) -> Complex64 {
        let (s, c) = self.angle(p).sin_cos();
        Complex64::new(c, s)
    }

    /// `f(p)` for every prime `p <= P` in table order.
    pub fn phases(&self, table: &PrimeTable, bound: f64) -> Result<Vec<Complex64>> {
        table.require(bound)?;
        let n = table.count_upto(bound);
        Ok(table.primes()[..n].iter().map(|&p| self.f_prime(p)).collect())
    }
}

/// Angle of `f(n)` reduced to `[0, 2pi)`.
pub fn f_angle(sampler: &SteinhausSampler, n: u64) -> f64 {
    let mut acc = 0.0;
    let mut m = n;
    let mut d = 2u64;
    while d * d <= m {
        while m.is_multiple_of(d) {
            acc += sampler.angle(d);
            m /= d;
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m > 1 {
        acc += sampler.angle(m);
    }
    acc.rem_euclid(TAU)
}

pub fn f_at(sampler: &SteinhausSampler, n: u64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::param("f(n) needs n >= 1"));
    }
    let (s, c) = f_angle(sampler, n).sin_cos();
    Ok(Complex64::new(c, s))
}

/// Factorization links of a divisor-closed support: `n = prime[i] * support[parent[i]]`.
#[derive(Debug, Clone)]
pub struct MultiplicativeIndex {
    prime: Vec<u64>,
    parent: Vec<usize>,
}

impl MultiplicativeIndex {
    /// Requires `1` in the support and `n / spf(n)` in the support for every `n`.
    pub fn new(support: &[u64]) -> Result<Self> {
        if support.first() != Some(&1) {
            return Err(Error::param("support must start at 1"));
        }
        let mut prime = vec![1];
        let mut parent = vec![0];
        for &n in &support[1..] {
            let mut d = 2u64;
            let p = loop {
                if d * d > n {
                    break n;
                }
                if n % d == 0 {
                    break d;
                }
                d += if d == 2 { 1 } else { 2 };
            };
            let idx = support
                .binary_search(&(n / p))
                .map_err(|_| Error::param(format!("support not closed: {} missing", n / p)))?;
            prime.push(p);
            parent.push(idx);
        }
        Ok(Self { prime, parent })
    }

    /// `f(n)` for every element of the support.
    pub fn values(&self, sampler: &SteinhausSampler) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.prime.len());
        out.push(Complex64::new(1.0, 0.0));
        for i in 1..self.prime.len() {
            let v = out[self.parent[i]] * sampler.f_prime(self.prime[i]);
            out.push(v);
        }
        out
    }
}

/// `sum a_n f(n) n^{-sigma - ih}` with the `n^{-1/2}` already in `a_n`.
fn random_sum(spec: &DirichletPolySpec, f: &[Complex64], sigma: f64, h: f64) -> Complex64 {
    let mut acc = ComplexKahan::new();
    for ((n, a), fv) in spec.support().iter().zip(f) {
        let ln = (*n as f64).ln();
        let (s, c) = (h * ln).sin_cos();
        acc.add(a * fv * Complex64::new(c, -s) * (-sigma * ln).exp());
    }
    acc.value()
}

/// `F(1/2 + ih)` over `p <= P` via per-factor principal logs.
pub fn f_product(sampler: &SteinhausSampler, table: &PrimeTable, h: f64, bound: f64) -> Result<Complex64> {
    if bound < 2.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let phases = sampler.phases(table, bound)?;
    Ok(log_f_from_phases(table, &phases, h).exp())
}

fn log_f_from_phases(table: &PrimeTable, phases: &[Complex64], h: f64) -> Complex64 {
    let mut acc = ComplexKahan::new();
    for (u, &lp) in phases.iter().zip(table.logp()) {
        let mag = (-0.5 * lp).exp();
        let (s, c) = (h * lp).sin_cos();
        acc.add(neg_log_one_minus(u * Complex64::new(mag * c, -mag * s)));
    }
    acc.value()
}

/// `log F(1/2 + i h_k)` on `h_k = h0 + k dh`, `k = 0..n`, by rotating each factor.
pub fn log_f_grid(table: &PrimeTable, phases: &[Complex64], h0: f64, dh: f64, n: usize) -> Vec<Complex64> {
    let mut acc = vec![ComplexKahan::new(); n];
    for (u, &lp) in phases.iter().zip(table.logp()) {
        let mag = (-0.5 * lp).exp();
        let (s, c) = (dh * lp).sin_cos();
        let step = Complex64::new(c, -s);
        let mut z = Complex64::new(0.0, 0.0);
        for (k, slot) in acc.iter_mut().enumerate() {
            if k % 32 == 0 {
                let (s, c) = ((h0 + k as f64 * dh) * lp).sin_cos();
                z = u * Complex64::new(mag * c, -mag * s);
            } else {
                z *= step;
            }
            slot.add(neg_log_one_minus(z));
        }
    }
    acc.iter().map(|a| a.value()).collect()
}

/// Default h-grid density: points per correlation length `1/log P`.
pub const DEFAULT_GRID_DENSITY: f64 = 16.0;

/// Trapezoid integral of `|F(1/2+ih)|^{2 beta}` over `|h| <= 1/2` with
/// `ceil(grid_density log P)` intervals.
pub fn rand_partition_integral(
    sampler: &SteinhausSampler,
    table: &PrimeTable,
    bound: f64,
    beta: f64,
    grid_density: f64,
) -> Result<f64> {
    if !(grid_density >= 4.0) {
        return Err(Error::param(format!("grid density {grid_density} below 4 per 1/log P")));
    }
    let intervals = (grid_density * bound.ln().max(1.0)).ceil() as usize;
    if beta == 0.0 {
        return Ok(1.0);
    }
    let phases = sampler.phases(table, bound)?;
    let logs = log_f_grid(table, &phases, -0.5, 1.0 / intervals as f64, intervals + 1);
    let mut acc = KahanSum::new();
    for (k, l) in logs.iter().enumerate() {
        let v = (2.0 * beta * l.re).exp();
        acc.add(if k == 0 || k == intervals { 0.5 * v } else { v });
    }
    Ok(acc.value() / intervals as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub q: f64,
    pub estimate: f64,
    pub std_err: f64,
}

/// `E (int |F|^2 dh)^q` for each `q`, all from the same samplers.
pub fn moments_of_moments_mc(
    table: &PrimeTable,
    bound: f64,
    q_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<MomentRow>> {
    if trials < 100 {
        return Err(Error::param("moments of moments need at least 100 trials"));
    }
    if q_grid.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(Error::param("q values must lie in [0, 1]"));
    }
    let integrals: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            rand_partition_integral(&SteinhausSampler::draw(seed, i), table, bound, 1.0, DEFAULT_GRID_DENSITY)
        })
        .collect::<Result<_>>()?;
    Ok(q_grid
        .iter()
        .map(|&q| {
            let vals: Vec<f64> = integrals.iter().map(|x| x.powf(q)).collect();
            let s = MeanSe::from_samples(&vals);
            MomentRow {
                q,
                estimate: s.mean,
                std_err: s.std_err,
            }
        })
        .collect())
}

/// `(log P / (1 + (1-q) sqrt(log log P)))^q`, with `log log P` floored at 0.
pub fn moments_shape(bound: f64, q: f64) -> f64 {
    let lp = bound.ln();
    (lp / (1.0 + (1.0 - q) * lp.ln().max(0.0).sqrt())).powf(q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierRate {
    pub u: f64,
    /// Failure fraction of the event at `h = 0`.
    pub rate: f64,
    pub std_err: f64,
    /// Failure fraction over all `|h| <= 1/2`, when computed.
    pub rate_all: Option<f64>,
    pub std_err_all: Option<f64>,
}

fn binomial(fails: usize, n: usize) -> (f64, f64) {
    let r = fails as f64 / n as f64;
    (r, (r * (1.0 - r) / n as f64).sqrt())
}

/// Random-model schedule: `G'` for thm1 (uses `C`, `q`), `G~'` without its
/// `V`-dependent lower bound for thm2.
pub fn random_schedule(mode: LadderMode, bound: f64, u: f64, c: f64, q: f64, b: usize) -> Result<BarrierSchedule> {
    Ok(match mode {
        LadderMode::Thm1 => BarrierSchedule::thm1(bound, c, b, q)?,
        LadderMode::Thm2 => BarrierSchedule::thm2(bound, b, u)?,
    }
    .random_variant())
}

/// Failure frequencies of each schedule over the same `trials` samplers.
pub fn failure_rates_with(
    table: &PrimeTable,
    schedules: &[BarrierSchedule],
    trials: usize,
    seed: u64,
    all_grid: bool,
) -> Result<Vec<BarrierRate>> {
    let first = schedules.first().ok_or_else(|| Error::param("no schedules"))?;
    if schedules.iter().any(|s| s.bound != first.bound || s.mode != first.mode || s.b != first.b) {
        return Err(Error::param("schedules must share P, mode and B"));
    }
    let (bound, mode, b) = (first.bound, first.mode, first.b);
    let n_scales = schedules.iter().map(|s| s.n_scales()).max().unwrap_or(0);
    let hp = if n_scales > 0 {
        Some(build_hpoints(0.0, bound, 1e3, mode)?)
    } else {
        None
    };
    let grid = if all_grid && n_scales > 0 {
        Some(LadderGrid::new(mode, bound, n_scales)?)
    } else {
        None
    };
    // per trial: (fails at h = 0, fails over the grid) for each schedule
    let flags: Vec<Vec<(bool, bool)>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<(bool, bool)>> {
            let Some(hp) = &hp else {
                return Ok(vec![(false, false); schedules.len()]);
            };
            let phases = SteinhausSampler::draw(seed, i).phases(table, bound)?;
            let ladder = EulerLadder::from_phases(table, &phases, hp, b)?;
            let values = match &grid {
                Some(g) => Some(LadderValues::evaluate(table, &phases, g.clone())?),
                None => None,
            };
            Ok(schedules
                .iter()
                .map(|s| {
                    let at0 = !event_g_at_h(&ladder, s).holds;
                    let all = values.as_ref().is_some_and(|v| !v.check(s).holds);
                    (at0, all)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(schedules
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let f0 = flags.iter().filter(|f| f[k].0).count();
            let (rate, std_err) = binomial(f0, trials);
            let (rate_all, std_err_all) = if all_grid {
                let fa = flags.iter().filter(|f| f[k].1).count();
                let (r, e) = binomial(fa, trials);
                (Some(r), Some(e))
            } else {
                (None, None)
            };
            BarrierRate {
                u: s.u,
                rate,
                std_err,
                rate_all,
                std_err_all,
            }
        })
        .collect())
}

/// Failure frequency of the random `G'` / `G~'` event at each `U`.
#[allow(clippy::too_many_arguments)]
pub fn barrier_failure_rates(
    table: &PrimeTable,
    bound: f64,
    us: &[f64],
    mode: LadderMode,
    c: f64,
    b: usize,
    trials: usize,
    seed: u64,
    all_grid: bool,
) -> Result<Vec<BarrierRate>> {
    if trials < 1000 {
        return Err(Error::param("barrier frequencies need at least 1000 trials"));
    }
    let schedules = us
        .iter()
        .map(|&u| random_schedule(mode, bound, u, c, 1.0, b))
        .collect::<Result<Vec<_>>>()?;
    let mut rates = failure_rates_with(table, &schedules, trials, seed, all_grid)?;
    // thm1 schedules ignore U
    for (r, &u) in rates.iter_mut().zip(us) {
        r.u = u;
    }
    Ok(rates)
}

#[allow(clippy::too_many_arguments)]
pub fn barrier_failure_rate(
    table: &PrimeTable,
    bound: f64,
    u: f64,
    mode: LadderMode,
    c: f64,
    b: usize,
    trials: usize,
    seed: u64,
) -> Result<BarrierRate> {
    Ok(barrier_failure_rates(table, bound, &[u], mode, c, b, trials, seed, false)?.remove(0))
}

/// Inputs of the restricted random mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedMeanSpec {
    pub bound: f64,
    pub big_t: f64,
    pub eps: f64,
    pub u: f64,
    pub v: f64,
    pub h: f64,
    pub sigma: f64,
    pub b: usize,
    pub b0: f64,
    pub trials: usize,
    pub seed: u64,
    /// Replace the event indicator by 1.
    pub force_indicator: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedMean {
    pub estimate: f64,
    pub std_err: f64,
    pub bound: f64,
    pub ratio: f64,
    /// Fraction of trials in which the event held.
    pub event_rate: f64,
}

/// `log T (min{1, (lllP + U)/sqrt(llP)} min{1, (lllP + U + log V)/sqrt(llP)}^2 + e^{-eps log T / log P})`,
/// with the minima clamped at 0.
pub fn restricted_mean_bound(bound: f64, big_t: f64, eps: f64, u: f64, v: f64) -> f64 {
    let llp = bound.ln().ln();
    let lllp = llp.ln();
    let m1 = ((lllp + u) / llp.sqrt()).clamp(0.0, 1.0);
    let m2 = ((lllp + u + v.ln()) / llp.sqrt()).clamp(0.0, 1.0);
    big_t.ln() * (m1 * m2 * m2 + (-eps * big_t.ln() / bound.ln()).exp())
}

/// `E 1_{G~'(h)} |sum_smooth f(m) m^{-1/2-ih}|^2 |sum_rough f(n) n^{-sigma-ih}|^2`.
pub fn restricted_mean_mc(table: &PrimeTable, spec: &RestrictedMeanSpec) -> Result<RestrictedMean> {
    if !(spec.v >= (-spec.u).exp()) {
        return Err(Error::param(format!("need V >= e^(-U), got V = {}", spec.v)));
    }
    if !(spec.bound <= spec.big_t.sqrt()) {
        return Err(Error::param("need P <= sqrt(T)"));
    }
    if !(spec.eps > 0.0 && spec.eps < 0.5) {
        return Err(Error::param("eps outside (0, 1/2)"));
    }
    if !(spec.h.abs() <= 0.5) {
        return Err(Error::param("need |h| <= 1/2"));
    }
    let smooth = smooth_poly(table, spec.big_t, spec.eps, spec.bound)?;
    let rough = rough_poly(table, spec.big_t, spec.eps, spec.bound)?;
    let s_idx = MultiplicativeIndex::new(&smooth.support().iter().map(|x| x.0).collect::<Vec<_>>())?;
    let r_idx = MultiplicativeIndex::new(&rough.support().iter().map(|x| x.0).collect::<Vec<_>>())?;
    let sched = BarrierSchedule::thm2(spec.bound, spec.b, spec.u)?
        .random_variant()
        .with_lower_bound(spec.v, spec.b0)?;
    let hp = if sched.n_scales() > 0 {
        Some(build_hpoints(spec.h, spec.bound, spec.big_t, LadderMode::Thm2)?)
    } else {
        None
    };
    let rows: Vec<(f64, bool)> = (0..spec.trials as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, bool)> {
            let sampler = SteinhausSampler::draw(spec.seed, i);
            let holds = match &hp {
                Some(hp) if !spec.force_indicator => {
                    let phases = sampler.phases(table, spec.bound)?;
                    event_g_at_h(&EulerLadder::from_phases(table, &phases, hp, spec.b)?, &sched).holds
                }
                _ => true,
            };
            if !holds {
                return Ok((0.0, false));
            }
            let s = random_sum(&smooth, &s_idx.values(&sampler), 0.0, spec.h);
            let r = random_sum(&rough, &r_idx.values(&sampler), spec.sigma - 0.5, spec.h);
            Ok((s.norm_sqr() * r.norm_sqr(), true))
        })
        .collect::<Result<_>>()?;
    let vals: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let stats = MeanSe::from_samples(&vals);
    let b = restricted_mean_bound(spec.bound, spec.big_t, spec.eps, spec.u, spec.v);
    Ok(RestrictedMean {
        estimate: stats.mean,
        std_err: stats.std_err,
        bound: b,
        ratio: stats.mean / b,
        event_rate: rows.iter().filter(|r| r.1).count() as f64 / rows.len().max(1) as f64,
    })
}

/// `|sum a_n f(n) n^{-sigma}|^2` for sampler `i`; the building block of the
/// orthogonality checks.
pub fn random_poly_sq(spec: &DirichletPolySpec, sampler: &SteinhausSampler, sigma: f64) -> Result<f64> {
    let f = spec
        .support()
        .iter()
        .map(|(n, _)| f_at(sampler, *n))
        .collect::<Result<Vec<_>>>()?;
    Ok(random_sum(spec, &f, sigma, 0.0).norm_sqr())
}

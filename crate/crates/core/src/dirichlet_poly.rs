//! Dirichlet polynomials over smooth and rough supports, partial Euler
//! products, and Monte Carlo / quadrature checkers for the mean value
//! estimates they satisfy.
//!
//! Coefficients carry their `n^{-1/2}` weight, so evaluating at `sigma = 0`
//! gives the critical-line value `sum a_n n^{-it}`. A rough sum at real part
//! `s` is evaluated at `sigma = s - 1/2`.

use crate::error::{Error, Result};
use crate::ladders::HPoints;
use crate::numeric::{derive_seed, dirichlet_term, unit_f64, ComplexKahan, GaussLegendre, KahanSum, MeanSe};
use crate::primes::{self, PrimeTable};
use crate::zeta_eval;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Sparse Dirichlet polynomial `sum a_n n^{-s}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPolySpec {
    support: Vec<(u64, Complex64)>,
    ln_n: Vec<f64>,
    norm2: f64,
}

impl DirichletPolySpec {
    pub fn new(support: Vec<(u64, Complex64)>) -> Result<Self> {
        if support.iter().any(|&(n, _)| n == 0) {
            return Err(Error::param("Dirichlet support index must be >= 1"));
        }
        if support.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::param("Dirichlet support must be strictly increasing"));
        }
        let ln_n = support.iter().map(|&(n, _)| (n as f64).ln()).collect();
        let norm2 = support.iter().map(|(_, a)| a.norm_sqr()).collect::<KahanSum>().value();
        Ok(Self {
            support,
            ln_n,
            norm2,
        })
    }

    /// Coefficients `a_n = n^{-1/2}` on the given indices.
    pub fn critical(indices: &[u64]) -> Result<Self> {
        Self::new(
            indices
                .iter()
                .map(|&n| (n, Complex64::new((n as f64).powf(-0.5), 0.0)))
                .collect(),
        )
    }

    pub fn support(&self) -> &[(u64, Complex64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn max_n(&self) -> u64 {
        self.support.last().map_or(0, |x| x.0)
    }

    /// Cached `sum |a_n|^2`.
    pub fn norm2(&self) -> f64 {
        self.norm2
    }

    /// `sum a_n n^{-(sigma + it)}`.
    pub fn eval(&self, sigma: f64, t: f64) -> Complex64 {
        let mut acc = ComplexKahan::new();
        for ((_, a), &l) in self.support.iter().zip(&self.ln_n) {
            acc.add(a * dirichlet_term(l, sigma, t));
        }
        acc.value()
    }

    /// `sum a_n f(n) n^{-sigma}` for an arbitrary unimodular weight `f`.
    pub fn eval_weighted<F: Fn(u64) -> Complex64>(&self, sigma: f64, f: F) -> Complex64 {
        let mut acc = ComplexKahan::new();
        for ((n, a), &l) in self.support.iter().zip(&self.ln_n) {
            acc.add(a * f(*n) * (-sigma * l).exp());
        }
        acc.value()
    }
}

pub fn eval_poly(spec: &DirichletPolySpec, sigma: f64, t: f64) -> Complex64 {
    spec.eval(sigma, t)
}

fn require_budget(len: f64, what: &str) -> Result<()> {
    if len > primes::DEFAULT_ENUM_BUDGET as f64 {
        return Err(Error::Resource {
            what: what.into(),
            estimate: len,
            budget: primes::DEFAULT_ENUM_BUDGET as f64,
        });
    }
    Ok(())
}

/// Smooth length `T^eps`.
pub fn smooth_length(big_t: f64, eps: f64) -> f64 {
    big_t.powf(eps)
}

/// Rough length `T^{1/2 - 2 eps}`.
pub fn rough_length(big_t: f64, eps: f64) -> f64 {
    big_t.powf(0.5 - 2.0 * eps)
}

/// `sum_{m <= T^eps, m P-smooth} m^{-1/2-it}` as coefficients.
pub fn smooth_poly(table: &PrimeTable, big_t: f64, eps: f64, bound: f64) -> Result<DirichletPolySpec> {
    let x = smooth_length(big_t, eps);
    require_budget(x.min(1e300), "smooth polynomial length")?;
    DirichletPolySpec::critical(&primes::enumerate_smooth(table, x, bound)?)
}

/// `sum_{n <= T^{1/2-2eps}, n P-rough} n^{-1/2-it}` as coefficients.
pub fn rough_poly(table: &PrimeTable, big_t: f64, eps: f64, bound: f64) -> Result<DirichletPolySpec> {
    let x = rough_length(big_t, eps);
    require_budget(x, "rough polynomial length")?;
    DirichletPolySpec::critical(&primes::enumerate_rough(table, x, bound)?)
}

/// `-Log(1 - z)`, principal branch; series for small `|z|`.
#[inline]
pub fn neg_log_one_minus(z: Complex64) -> Complex64 {
    let r = z.norm_sqr();
    if r < 0.0025 {
        // |z| < 0.05: 12 terms reach 0.05^13 / 13 < 1e-18
        let mut acc = Complex64::new(0.0, 0.0);
        for k in (1..=12).rev() {
            acc = acc * z + Complex64::new(1.0 / k as f64, 0.0);
        }
        acc * z
    } else {
        -(Complex64::new(1.0, 0.0) - z).ln()
    }
}

/// Principal-branch `log I_{l,t}(h) = -sum_{scale l} Log(1 - p^{-(1/2 + it + ih)})`.
pub fn euler_partial(table: &PrimeTable, l: usize, t: f64, h: f64, bound: f64) -> Result<Complex64> {
    table.require(bound)?;
    let mut acc = ComplexKahan::new();
    for &lp in &table.logp()[table.scale_range(l, bound)] {
        acc.add(neg_log_one_minus(dirichlet_term(lp, 0.5, t + h)));
    }
    Ok(acc.value())
}

/// `prod_{p <= P} (1 - p^{-(1/2 + it + ih)})^{-1}` multiplied out directly.
pub fn euler_direct(table: &PrimeTable, t: f64, h: f64, bound: f64) -> Result<Complex64> {
    table.require(bound)?;
    let n = table.count_upto(bound);
    let mut prod = Complex64::new(1.0, 0.0);
    for &lp in &table.logp()[..n] {
        prod /= Complex64::new(1.0, 0.0) - dirichlet_term(lp, 0.5, t + h);
    }
    Ok(prod)
}

/// `sum_{k=0}^{K} z^k / k!`.
pub fn truncated_exp(z: Complex64, k_max: usize) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut acc = ComplexKahan::new();
    acc.add(term);
    for k in 1..=k_max {
        term *= z / k as f64;
        acc.add(term);
    }
    acc.value()
}

/// Prime-power sum `sum_{p^j <= P} 1/(j p^{j(1/2 + it + i h~(l(p)))})` with each
/// prime shifted by the ladder point of its own scale.
pub fn ladder_prime_power_sum(table: &PrimeTable, t: f64, bound: f64, ladder: &HPoints) -> Result<Complex64> {
    let mut acc = ComplexKahan::new();
    for (p, j, _) in table.prime_powers(bound)? {
        let l = primes::scale_index(p, bound)?;
        let h = ladder.at(l).ok_or_else(|| {
            Error::param(format!("ladder has no point at scale {l} (prime {p})"))
        })?;
        let jf = j as f64;
        acc.add(dirichlet_term(jf * (p as f64).ln(), 0.5, t + h) / jf);
    }
    Ok(acc.value())
}

/// Truncated exponential of the ladder-shifted prime-power sum.
pub fn truncated_exp_proxy(
    table: &PrimeTable,
    t: f64,
    bound: f64,
    k_max: usize,
    ladder: &HPoints,
) -> Result<Complex64> {
    Ok(truncated_exp(ladder_prime_power_sum(table, t, bound, ladder)?, k_max))
}

/// Uniform sample `t_i` in `[T, 2T]`, a pure function of `(seed, i)`.
pub fn sample_t(big_t: f64, seed: u64, i: usize) -> f64 {
    big_t * (1.0 + unit_f64(derive_seed(seed, i as u64)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanValueReport {
    pub lhs: Complex64,
    pub rhs_main: Complex64,
    pub deviation: f64,
    pub bound: f64,
    pub constant: f64,
    pub nodes: usize,
    pub pass: bool,
}

/// Constant multiplying the off-diagonal bound in [`mean_value_check`].
pub const MEAN_VALUE_CONSTANT: f64 = 10.0;

/// `(1/H) int_T^{T+H} A(t) conj(B(t)) dt` against its diagonal `sum a_n conj b_n`.
///
/// Composite Gauss–Legendre with at least eight nodes per period of the
/// fastest frequency `ln x`; the node count doubles until two successive
/// estimates agree.
pub fn mean_value_check(
    a: &DirichletPolySpec,
    b: &DirichletPolySpec,
    big_t: f64,
    big_h: f64,
    quad_points: usize,
) -> Result<MeanValueReport> {
    if !(big_h > 0.0) {
        return Err(Error::param("mean_value_check needs H > 0"));
    }
    let x = a.max_n().max(b.max_n()).max(1) as f64;
    let omega = x.ln().max(1e-3);
    let period = 2.0 * PI / omega;
    let gl = GaussLegendre::sixteen();
    // 16 nodes per panel of two periods = 8 per period
    let mut panels = ((big_h / (2.0 * period)).ceil() as usize).max(quad_points.div_ceil(16)).max(1);
    let integrand = |t: f64| a.eval(0.0, t) * b.eval(0.0, t).conj();
    let integrate = |panels: usize| -> Complex64 {
        let width = big_h / panels as f64;
        let parts: Vec<Complex64> = (0..panels)
            .into_par_iter()
            .map(|k| {
                let lo = big_t + width * k as f64;
                let re = gl.integrate(lo, lo + width, |t| integrand(t).re);
                let im = gl.integrate(lo, lo + width, |t| integrand(t).im);
                Complex64::new(re, im)
            })
            .collect();
        parts.into_iter().collect::<ComplexKahan>().value() / big_h
    };
    let mut prev = integrate(panels);
    let scale = (a.norm2() * b.norm2()).sqrt().max(1e-300);
    let mut converged = false;
    for _ in 0..6 {
        panels *= 2;
        let cur = integrate(panels);
        let diff = (cur - prev).norm();
        prev = cur;
        if diff <= 1e-11 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "mean value quadrature did not converge with {} panels",
            panels
        )));
    }
    let lhs = prev;
    let mut diag = ComplexKahan::new();
    let (mut i, mut j) = (0, 0);
    let (sa, sb) = (a.support(), b.support());
    while i < sa.len() && j < sb.len() {
        match sa[i].0.cmp(&sb[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                diag.add(sa[i].1 * sb[j].1.conj());
                i += 1;
                j += 1;
            }
        }
    }
    let rhs_main = diag.value();
    let deviation = (lhs - rhs_main).norm();
    let bound = x / big_h * (a.norm2() * b.norm2()).sqrt();
    Ok(MeanValueReport {
        lhs,
        rhs_main,
        deviation,
        bound,
        constant: MEAN_VALUE_CONSTANT,
        nodes: panels * 16,
        pass: deviation <= MEAN_VALUE_CONSTANT * bound + 1e-10 * scale,
    })
}

/// One term `a(q) q^{-1/2-it}` of a prime / prime-square polynomial; `v` is 1
/// for a prime and 6 for the square of a prime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QTerm {
    pub q: u64,
    pub a: Complex64,
    pub v: f64,
}

impl QTerm {
    pub fn new(q: u64, a: Complex64) -> Result<Self> {
        let is_prime = |n: u64| n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d));
        let v = if is_prime(q) {
            1.0
        } else {
            let r = (q as f64).sqrt().round() as u64;
            if r * r == q && is_prime(r) {
                6.0
            } else {
                return Err(Error::param(format!("{q} is neither a prime nor a prime square")));
            }
        };
        Ok(Self { q, a, v })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub empirical_moment: f64,
    pub std_err: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Monte Carlo estimate of `(1/T) int_T^{2T} |Q(t)|^{2k} dt` against
/// `k! (sum v_q |a_q|^2 / q)^k`.
pub fn high_moment_check(terms: &[QTerm], k: u32, big_t: f64, samples: usize, seed: u64) -> Result<MomentReport> {
    if terms.is_empty() {
        return Err(Error::param("Q must be non-empty"));
    }
    let u = terms.iter().map(|x| x.q).max().unwrap() as f64;
    if !(u.powi(k as i32) < big_t) {
        return Err(Error::param(format!("need U^k < T (U = {u}, k = {k}, T = {big_t})")));
    }
    let spec = DirichletPolySpec::new({
        let mut v: Vec<(u64, Complex64)> = terms
            .iter()
            .map(|x| (x.q, x.a * (x.q as f64).powf(-0.5)))
            .collect();
        v.sort_by_key(|x| x.0);
        v
    })?;
    let vals: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| spec.eval(0.0, sample_t(big_t, seed, i)).norm_sqr().powi(k as i32))
        .collect();
    let stats = MeanSe::from_samples(&vals);
    let base: f64 = terms.iter().map(|x| x.v * x.a.norm_sqr() / x.q as f64).sum();
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    let bound = fact * base.powi(k as i32);
    Ok(MomentReport {
        empirical_moment: stats.mean,
        std_err: stats.std_err,
        bound,
        ratio: stats.mean / bound,
    })
}

/// Largest admissible smoothing exponent: `1/10`, or the default
/// `1/(log log T)^2` when that is larger.
pub fn eps_upper(big_t: f64) -> f64 {
    let ll = big_t.ln().ln();
    (0.1f64).max(1.0 / (ll * ll))
}

/// `eps < 1/10`, or `eps` at most the default `1/(log log T)^2`.
pub fn eps_admissible(big_t: f64, eps: f64) -> bool {
    let ll = big_t.ln().ln();
    eps < 0.1 || eps <= 1.0 / (ll * ll)
}

fn check_ranges(big_t: f64, eps: f64, bound: f64, sigma: f64, lower_eps: f64) -> Result<()> {
    let log_t = big_t.ln();
    if !(bound >= 2.0 && bound <= big_t.sqrt()) {
        return Err(Error::param(format!("need 2 <= P <= sqrt(T), got P = {bound}")));
    }
    if !(eps > lower_eps && eps_admissible(big_t, eps)) {
        return Err(Error::param(format!(
            "eps = {eps} outside ({lower_eps}, {})",
            eps_upper(big_t)
        )));
    }
    if (sigma - 0.5).abs() > 1.0 / log_t + 1e-15 {
        return Err(Error::param(format!("need |sigma - 1/2| <= 1/log T, got sigma = {sigma}")));
    }
    Ok(())
}

/// Smooth and rough polynomials of one experiment, built once.
#[derive(Debug, Clone)]
pub struct SmoothRough {
    pub smooth: DirichletPolySpec,
    pub rough: DirichletPolySpec,
}

impl SmoothRough {
    pub fn build(table: &PrimeTable, big_t: f64, eps: f64, bound: f64) -> Result<Self> {
        Ok(Self {
            smooth: smooth_poly(table, big_t, eps, bound)?,
            rough: rough_poly(table, big_t, eps, bound)?,
        })
    }

    /// `(smooth at 1/2 + it, rough at sigma + it)`.
    pub fn eval(&self, t: f64, sigma: f64) -> (Complex64, Complex64) {
        (self.smooth.eval(0.0, t), self.rough.eval(sigma - 0.5, t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub estimate: f64,
    pub std_err: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Mean square of `main_sum(t, sigma, sqrt(t/2pi)) - smooth * rough` over `t` in `[T, 2T]`.
pub fn poly_edit_discrepancy(
    table: &PrimeTable,
    big_t: f64,
    eps: f64,
    bound: f64,
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<RatioReport> {
    let log_t = big_t.ln();
    check_ranges(big_t, eps, bound, sigma, 1.0 / log_t)?;
    let sr = SmoothRough::build(table, big_t, eps, bound)?;
    let vals: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let t = sample_t(big_t, seed, i);
            let full = zeta_eval::main_sum_unchecked(t, sigma, zeta_eval::afe_length(t).floor() as u64);
            let (s, r) = sr.eval(t, sigma);
            (full - s * r).norm_sqr()
        })
        .collect();
    let stats = MeanSe::from_samples(&vals);
    let b = log_t * ((-eps * log_t / bound.ln()).exp() + eps);
    Ok(RatioReport {
        estimate: stats.mean,
        std_err: stats.std_err,
        bound: b,
        ratio: stats.mean / b,
    })
}

/// Restricted fourth moment `(1/T) int 1{|S| <= log P / V} |S R|^4` for each `V`,
/// all from the same `t` samples.
#[allow(clippy::too_many_arguments)]
pub fn fourth_moment_restricted_multi(
    table: &PrimeTable,
    big_t: f64,
    eps: f64,
    bound: f64,
    vs: &[f64],
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<RatioReport>> {
    check_ranges(big_t, eps, bound, sigma, 0.0)?;
    if vs.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::param("V must be positive"));
    }
    let sr = SmoothRough::build(table, big_t, eps, bound)?;
    let pairs: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let (s, r) = sr.eval(sample_t(big_t, seed, i), sigma);
            (s.norm(), (s * r).norm_sqr().powi(2))
        })
        .collect();
    let log_t = big_t.ln();
    let log_p = bound.ln();
    Ok(vs
        .iter()
        .map(|&v| {
            let cut = log_p / v;
            let vals: Vec<f64> = pairs
                .iter()
                .map(|&(s, q)| if s <= cut { q } else { 0.0 })
                .collect();
            let stats = MeanSe::from_samples(&vals);
            let b = log_t.powi(3) * (log_t / log_p) / (v * v);
            RatioReport {
                estimate: stats.mean,
                std_err: stats.std_err,
                bound: b,
                ratio: stats.mean / b,
            }
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn fourth_moment_restricted(
    table: &PrimeTable,
    big_t: f64,
    eps: f64,
    bound: f64,
    v: f64,
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<RatioReport> {
    Ok(fourth_moment_restricted_multi(table, big_t, eps, bound, &[v], sigma, samples, seed)?.remove(0))
}

/// `floor(eps log T / log P)`, the truncation order of the exponential proxy.
pub fn proxy_order(big_t: f64, eps: f64, bound: f64) -> usize {
    (eps * big_t.ln() / bound.ln()).floor().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyReport {
    pub mean_sq_diff: f64,
    pub std_err: f64,
    pub k_max: usize,
    /// `mean_sq_diff * (log log P)^2 / log T`
    pub scaled: f64,
}

/// Mean square of `(smooth(t + h) - proxy(t)) * rough(t + h)` with the proxy's
/// primes shifted by the `h~` ladder of `h`.
#[allow(clippy::too_many_arguments)]
pub fn euler_proxy_discrepancy(
    table: &PrimeTable,
    big_t: f64,
    eps: f64,
    bound: f64,
    ladder: &HPoints,
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<ProxyReport> {
    let sr = SmoothRough::build(table, big_t, eps, bound)?;
    let k_max = proxy_order(big_t, eps, bound);
    let h = ladder.h();
    let vals: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let t = sample_t(big_t, seed, i);
            let (s, r) = sr.eval(t + h, sigma);
            let proxy = truncated_exp_proxy(table, t, bound, k_max, ladder)?;
            Ok(((s - proxy) * r).norm_sqr())
        })
        .collect::<Result<_>>()?;
    let stats = MeanSe::from_samples(&vals);
    let llp = bound.ln().ln();
    Ok(ProxyReport {
        mean_sq_diff: stats.mean,
        std_err: stats.std_err,
        k_max,
        scaled: stats.mean * llp * llp / big_t.ln(),
    })
}

//! Zeta on the critical line through the approximate functional equation
//!
//! `zeta(1/2 + it) ~ S(t) + chi(1/2 + it) * conj(S(t))` with
//! `S(t) = sum_{n <= sqrt(t / 2 pi)} n^{-1/2 - it}` and `chi = exp(-2 i theta(t))`.
//! No Riemann–Siegel remainder terms are added, so the error is `O(t^{-1/4})`.
//!
//! An Euler–Maclaurin evaluator is provided as an independent reference for
//! moderate `t`.

use crate::error::{Error, Result};
use crate::numeric::{dirichlet_term, ComplexKahan};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Longest Dirichlet sum evaluated term by term.
pub const MAIN_SUM_BUDGET: f64 = 2.0e9;

/// Smallest `t` accepted by [`zeta_afe`].
pub const AFE_MIN_T: f64 = 50.0;

/// Riemann–Siegel phase and the critical-line factor `chi(1/2 + it)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiTheta {
    pub t: f64,
    pub theta: f64,
    pub chi: Complex64,
}

impl ChiTheta {
    pub fn new(t: f64) -> Result<Self> {
        let theta = theta_rs(t)?;
        let (s, c) = (2.0 * theta).sin_cos();
        Ok(Self {
            t,
            theta,
            chi: Complex64::new(c, -s),
        })
    }
}

/// Riemann–Siegel theta by its Stirling expansion through `t^{-9}`.
pub fn theta_rs(t: f64) -> Result<f64> {
    if !(t >= 2.0) {
        return Err(Error::param(format!("theta_rs needs t >= 2, got {t}")));
    }
    let inv = 1.0 / t;
    let inv2 = inv * inv;
    // 1/48, 7/5760, 31/80640, 127/430080, 511/1216512
    let tail = inv
        * (1.0 / 48.0
            + inv2
                * (7.0 / 5760.0
                    + inv2 * (31.0 / 80640.0 + inv2 * (127.0 / 430080.0 + inv2 * 511.0 / 1216512.0))));
    Ok(0.5 * t * (t / (2.0 * PI)).ln() - 0.5 * t - PI / 8.0 + tail)
}

/// `sum_{n <= length} n^{-(sigma + i t)}` with compensated summation.
pub fn main_sum(t: f64, sigma: f64, length: f64) -> Result<Complex64> {
    if !(length >= 1.0) {
        return Err(Error::param(format!("main_sum length {length} < 1")));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::param(format!("main_sum sigma {sigma} outside (0, 1)")));
    }
    if length > MAIN_SUM_BUDGET {
        return Err(Error::Resource {
            what: "Dirichlet main sum".into(),
            estimate: length,
            budget: MAIN_SUM_BUDGET,
        });
    }
    Ok(main_sum_unchecked(t, sigma, length.floor() as u64))
}

pub(crate) fn main_sum_unchecked(t: f64, sigma: f64, n_max: u64) -> Complex64 {
    let mut acc = ComplexKahan::new();
    acc.add(Complex64::new(1.0, 0.0));
    for n in 2..=n_max {
        acc.add(dirichlet_term((n as f64).ln(), sigma, t));
    }
    acc.value()
}

/// Truncation point `sqrt(t / 2 pi)` of the approximate functional equation.
pub fn afe_length(t: f64) -> f64 {
    (t / (2.0 * PI)).sqrt()
}

/// `zeta(1/2 + it)` from the two main sums of the approximate functional equation.
pub fn zeta_afe(t: f64) -> Result<Complex64> {
    if !(t >= AFE_MIN_T) {
        return Err(Error::param(format!(
            "zeta_afe needs t >= {AFE_MIN_T} (got {t}); use zeta_euler_maclaurin below that"
        )));
    }
    let s = main_sum(t, 0.5, afe_length(t))?;
    let ct = ChiTheta::new(t)?;
    Ok(s + ct.chi * s.conj())
}

const BERNOULLI_2K: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Euler–Maclaurin evaluation of `zeta(sigma + it)` with `n_terms` explicit
/// terms and ten Bernoulli corrections.
pub fn zeta_em_with(sigma: f64, t: f64, n_terms: u64) -> Complex64 {
    let s = Complex64::new(sigma, t);
    let n = n_terms.max(2);
    let mut acc = ComplexKahan::new();
    acc.add(Complex64::new(1.0, 0.0));
    for k in 2..n {
        acc.add(dirichlet_term((k as f64).ln(), sigma, t));
    }
    let ln_n = (n as f64).ln();
    let n_pow_minus_s = dirichlet_term(ln_n, sigma, t);
    let big_n = n as f64;
    acc.add(n_pow_minus_s * big_n / (s - 1.0));
    acc.add(n_pow_minus_s * 0.5);
    // T_k = B_2k / (2k)! * s (s+1) ... (s+2k-2) * N^{-s-2k+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut npow = n_pow_minus_s / big_n;
    for (k, b) in BERNOULLI_2K.iter().enumerate() {
        let kk = k as f64 + 1.0;
        if k > 0 {
            rising *= (s + (2.0 * kk - 3.0)) * (s + (2.0 * kk - 2.0));
            fact *= (2.0 * kk - 1.0) * (2.0 * kk);
            npow /= big_n * big_n;
        }
        acc.add(rising * npow * (b / fact));
    }
    acc.value()
}

/// Independent reference value of `zeta(1/2 + it)`, valid for any `t >= 0`.
pub fn zeta_euler_maclaurin(t: f64) -> Complex64 {
    let n = ((t.abs() / 2.0).ceil() as u64).max(20);
    zeta_em_with(0.5, t, n)
}

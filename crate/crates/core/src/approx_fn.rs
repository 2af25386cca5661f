//! Selberg's majorant of `1_{|x| <= 1/2}` with Fourier support in
//! `[-1/delta, 1/delta]`, and the smoothed window
//! `gamma(x) = int 1_{|u| <= R + 1/2} b(x - u) du`.
//!
//! Beurling's function `B(z) = (sin pi z / pi)^2 (psi1(-z) - psi1(z+1) + 2/z)`
//! is evaluated through the reflection `psi1(-z) + psi1(1+z) = pi^2 / sin^2(pi z)`,
//! which removes the double poles at the integers:
//! `B(z) = 1 + (sin pi z / pi)^2 (2/z - 2 psi1(z+1))` for `z > 0` and
//! `B(z) = -1 + (sin pi z / pi)^2 (2/z + 2 psi1(-z))` for `z < 0`.

use crate::error::{Error, Result};
use crate::numeric::{GaussLegendre, KahanSum};
use std::f64::consts::PI;

/// Trigamma `psi1(x) = sum_{n >= 0} (x + n)^{-2}` for `x > 0`.
pub fn trigamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = KahanSum::new();
    let mut y = x;
    while y < 10.0 {
        acc.add(1.0 / (y * y));
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    // 1/y + 1/(2y^2) + sum B_2k / y^{2k+1}
    let series = inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                + inv2
                    * (-1.0 / 30.0
                        + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0 - inv2 * 691.0 / 2730.0)))));
    acc.add(series);
    acc.value()
}

/// Beurling's entire majorant of `sgn(z)`.
pub fn beurling_big_b(z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    let s = (PI * z).sin() / PI;
    let s2 = s * s;
    if z > 0.0 {
        1.0 + s2 * (2.0 / z - 2.0 * trigamma(z + 1.0))
    } else {
        -1.0 + s2 * (2.0 / z + 2.0 * trigamma(-z))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param(format!("delta = {delta} outside (0, 1]")));
    }
    Ok(())
}

/// `b(x) = (B(D(x + 1/2)) + B(D(1/2 - x))) / 2` with `D = 1/delta`; `int b = 1 + delta`.
pub fn beurling_b(x: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(b_unchecked(x, 1.0 / delta))
}

#[inline]
fn b_unchecked(x: f64, big_d: f64) -> f64 {
    0.5 * (beurling_big_b(big_d * (x + 0.5)) + beurling_big_b(big_d * (0.5 - x)))
}

/// `int_{-L}^{L} b` plus the asymptotic tail `1 / (pi^2 D^2 L)` beyond `|x| > L`.
pub fn beurling_mass(delta: f64, half_width: f64) -> Result<f64> {
    check_delta(delta)?;
    let big_d = 1.0 / delta;
    let panels = (2.0 * half_width / (delta / 4.0)).ceil() as usize;
    let core = GaussLegendre::sixteen().integrate_panels(-half_width, half_width, panels, |x| b_unchecked(x, big_d));
    Ok(core + 1.0 / (PI * PI * big_d * big_d * half_width))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaApprox {
    pub r: f64,
    pub delta: f64,
    /// Width of each Gauss–Legendre panel.
    pub panel_width: f64,
}

impl GammaApprox {
    pub fn new(r: f64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if !(r >= 0.0) {
            return Err(Error::param(format!("R = {r} must be >= 0")));
        }
        Ok(Self {
            r,
            delta,
            panel_width: delta / 4.0,
        })
    }

    /// `(2R + 1)(1 + delta) / (pi (l + 1)) (2 pi / delta)^{l+1}`.
    pub fn derivative_bound(&self, l: u32) -> f64 {
        (2.0 * self.r + 1.0) * (1.0 + self.delta) / (PI * (l as f64 + 1.0))
            * (2.0 * PI / self.delta).powi(l as i32 + 1)
    }

    fn integrate_with(&self, x: f64, width: f64) -> f64 {
        let a = x - self.r - 0.5;
        let b = x + self.r + 0.5;
        let panels = ((b - a) / width).ceil() as usize;
        let big_d = 1.0 / self.delta;
        GaussLegendre::sixteen().integrate_panels(a, b, panels, |v| b_unchecked(v, big_d))
    }
}

/// `gamma(x) = int_{x - R - 1/2}^{x + R + 1/2} b(v) dv`, cross-checked at half the panel width.
pub fn gamma_fn(ga: &GammaApprox, x: f64) -> Result<f64> {
    let coarse = ga.integrate_with(x, ga.panel_width);
    let fine = ga.integrate_with(x, ga.panel_width / 2.0);
    if (coarse - fine).abs() > 1e-10 {
        return Err(Error::Numeric(format!(
            "gamma quadrature unsettled at x = {x}: {coarse} vs {fine}"
        )));
    }
    Ok(fine)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    /// Smallest `gamma` on `|x| <= R`.
    pub min_inside: f64,
    /// Largest `gamma` on `|x| > R + 1`.
    pub max_outside: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub points: usize,
    pub pass: bool,
}

/// `gamma >= 1` on `|x| <= R`, `gamma <= delta` beyond `R + 1`, and `0 <= gamma <= 1 + delta`,
/// each to `1e-9`.
pub fn gamma_sandwich_check(ga: &GammaApprox, grid: &[f64]) -> Result<SandwichReport> {
    let mut rep = SandwichReport {
        min_inside: f64::INFINITY,
        max_outside: f64::NEG_INFINITY,
        min_value: f64::INFINITY,
        max_value: f64::NEG_INFINITY,
        points: grid.len(),
        pass: true,
    };
    for &x in grid {
        let g = gamma_fn(ga, x)?;
        if x.abs() <= ga.r {
            rep.min_inside = rep.min_inside.min(g);
        }
        if x.abs() > ga.r + 1.0 {
            rep.max_outside = rep.max_outside.max(g);
        }
        rep.min_value = rep.min_value.min(g);
        rep.max_value = rep.max_value.max(g);
    }
    let tol = 1e-9;
    rep.pass = rep.min_inside >= 1.0 - tol
        && rep.max_outside <= ga.delta + tol
        && rep.min_value >= -tol
        && rep.max_value <= 1.0 + ga.delta + tol;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub l: u32,
    pub max_fd_derivative: f64,
    pub argmax: f64,
    pub bound: f64,
    pub step: f64,
    pub pass: bool,
}

/// `k`-th central difference of `f` at `x` with step `s` (second order).
fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, s: f64, k: u32) -> f64 {
    match k {
        0 => f(x),
        1 => (f(x + s) - f(x - s)) / (2.0 * s),
        2 => (f(x + s) - 2.0 * f(x) + f(x - s)) / (s * s),
        3 => (f(x + 2.0 * s) - 2.0 * f(x + s) + 2.0 * f(x - s) - f(x - 2.0 * s)) / (2.0 * s * s * s),
        _ => unreachable!(),
    }
}

/// Finite-difference `l`-th derivatives on `grid` against the closed-form bound.
///
/// `gamma' (x) = b(x + R + 1/2) - b(x - R - 1/2)`, so the `l`-th derivative is the
/// difference of `(l-1)`-th central differences of `b` at the window ends.
pub fn gamma_derivative_check(ga: &GammaApprox, l: u32, grid: &[f64]) -> Result<DerivativeReport> {
    if !(1..=4).contains(&l) {
        return Err(Error::param(format!("derivative order {l} outside 1..=4")));
    }
    let big_d = 1.0 / ga.delta;
    let step = ga.delta / 64.0;
    let b = |v: f64| b_unchecked(v, big_d);
    let mut best = (0.0f64, 0.0f64);
    for &x in grid {
        let d = central_difference(b, x + ga.r + 0.5, step, l - 1) - central_difference(b, x - ga.r - 0.5, step, l - 1);
        if !d.is_finite() {
            return Err(Error::Numeric(format!("non-finite difference at x = {x}")));
        }
        if d.abs() > best.0 {
            best = (d.abs(), x);
        }
    }
    let bound = ga.derivative_bound(l);
    Ok(DerivativeReport {
        l,
        max_fd_derivative: best.0,
        argmax: best.1,
        bound,
        step,
        pass: best.0 <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigamma_values() {
        assert!((trigamma(1.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((trigamma(0.5) - PI * PI / 2.0).abs() < 1e-13);
        // psi1(x) = psi1(x + 1) + 1/x^2
        for &x in &[0.3, 2.7, 9.99, 14.2, 1234.5] {
            assert!((trigamma(x) - trigamma(x + 1.0) - 1.0 / (x * x)).abs() < 1e-13 * trigamma(x));
        }
    }

    #[test]
    fn big_b_majorizes_sign_and_matches_series() {
        for i in -4000..=4000 {
            let z = i as f64 * 0.01 + 0.003;
            let s = if z > 0.0 { 1.0 } else { -1.0 };
            assert!(beurling_big_b(z) >= s - 1e-12, "z = {z}");
        }
        // direct truncated series away from integers
        let z: f64 = 0.37;
        let mut sum = 2.0 / z;
        for n in 0..200_000 {
            sum += 1.0 / (z - n as f64).powi(2);
            sum -= 1.0 / (z + (n + 1) as f64).powi(2);
        }
        let direct = ((PI * z).sin() / PI).powi(2) * sum;
        assert!((direct - beurling_big_b(z)).abs() < 1e-9);
        // continuity through the integers
        for k in [-3.0, -1.0, 0.0, 1.0, 5.0] {
            assert!((beurling_big_b(k + 1e-7) - beurling_big_b(k - 1e-7)).abs() < 1e-5);
        }
    }

    #[test]
    fn b_majorant_and_nonnegative() {
        for &delta in &[0.1, 0.5, 1.0] {
            for i in 0..10_000 {
                let x = -5.0 + 10.0 * i as f64 / 9999.0;
                let b = beurling_b(x, delta).unwrap();
                let ind = if x.abs() <= 0.5 { 1.0 } else { 0.0 };
                assert!(b - ind >= -1e-9, "x = {x}, delta = {delta}");
                assert!(b >= -1e-12);
            }
        }
        assert!(beurling_b(0.0, 0.3).unwrap() >= 1.0);
        assert!(beurling_b(0.0, 0.0).is_err());
        assert!(beurling_b(0.0, 1.5).is_err());
    }

    #[test]
    fn b_mass_is_one_plus_delta() {
        for &delta in &[0.1, 0.5] {
            let m = beurling_mass(delta, 50.0 / delta).unwrap();
            assert!((m - (1.0 + delta)).abs() < 1e-4, "{delta}: {m}");
        }
    }

    #[test]
    fn gamma_examples() {
        let ga = GammaApprox::new(2.0, 0.1).unwrap();
        assert!(gamma_fn(&ga, 0.0).unwrap() >= 1.0);
        assert!(gamma_fn(&ga, 3.5).unwrap() <= 0.1);
        for &x in &[0.3, 1.7, 2.9, 4.4] {
            assert!((gamma_fn(&ga, x).unwrap() - gamma_fn(&ga, -x).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn sandwich_holds() {
        let ga = GammaApprox::new(1.0, 0.5).unwrap();
        let grid: Vec<f64> = (0..=120).map(|i| -6.0 + 0.1 * i as f64).collect();
        let r = gamma_sandwich_check(&ga, &grid).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn derivative_bound_arithmetic() {
        let ga = GammaApprox::new(0.0, 1.0).unwrap();
        assert!((ga.derivative_bound(1) - 4.0 * PI).abs() < 1e-12);
        let ga = GammaApprox::new(1.0, 0.5).unwrap();
        assert!((ga.derivative_bound(1) - 36.0 * PI).abs() < 1e-10);
        assert!((ga.derivative_bound(1) - 113.1).abs() < 0.05);
    }

    #[test]
    fn first_derivative_matches_exact_difference() {
        let ga = GammaApprox::new(1.0, 0.5).unwrap();
        let h = 1e-5;
        for &x in &[0.2, 1.3, 2.6] {
            let fd = (gamma_fn(&ga, x + h).unwrap() - gamma_fn(&ga, x - h).unwrap()) / (2.0 * h);
            let exact = beurling_b(x + 1.5, 0.5).unwrap() - beurling_b(x - 1.5, 0.5).unwrap();
            assert!((fd - exact).abs() < 1e-5);
        }
        let grid: Vec<f64> = (0..200).map(|i| -4.0 + 0.04 * i as f64).collect();
        let r = gamma_derivative_check(&ga, 1, &grid).unwrap();
        assert!(r.pass && r.max_fd_derivative < r.bound / 10.0);
        assert!(gamma_derivative_check(&ga, 5, &grid).is_err());
    }
}

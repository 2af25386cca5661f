//! Check suites with their frozen constants, shared by the command line and
//! the acceptance tests.

use crate::approx_fn::{beurling_b, beurling_mass, gamma_derivative_check, gamma_sandwich_check, GammaApprox};
use crate::ballot::{ballot_row, normal_se, BallotRow, WalkSpec};
use crate::dirichlet_poly::{
    euler_proxy_discrepancy, fourth_moment_restricted_multi, high_moment_check, mean_value_check, DirichletPolySpec,
    QTerm,
};
use crate::ladders::{build_hpoints, LadderMode};
use crate::numeric::unit_f64;
use crate::partition::{box_tolerance, cauchy_box_check};
use crate::primes::PrimeTable;
use crate::zeta_eval::{zeta_afe, zeta_euler_maclaurin, ChiTheta};
use rayon::prelude::*;
use crate::error::Result;
use crate::numeric::{derive_seed, ComplexKahan};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `|lhs - diagonal| <= MEAN_VALUE_CONSTANT (x/H) sqrt(sum|a|^2 sum|b|^2)`.
pub use crate::dirichlet_poly::MEAN_VALUE_CONSTANT;
/// Moment ratio ceiling for prime / prime-square polynomials.
pub const HIGH_MOMENT_CONSTANT: f64 = 4.0;
/// Factorization discrepancy ratio ceiling.
pub const POLY_EDIT_CONSTANT: f64 = 20.0;
/// Walk probability over the ballot bound.
pub const BALLOT_CONSTANT: f64 = 10.0;
/// `lambda * tail fraction` ceiling.
pub const TAIL_CONSTANT: f64 = 20.0;
/// Restricted fourth moment over `(1/V^2) log^3 T (log T / log P)`; pilot
/// ratios stayed below 4e-3 at `T = 1e6`, `P = 100`.
pub const FOURTH_MOMENT_CONSTANT: f64 = 0.05;
/// Scaled proxy discrepancy ceiling; pilot values were near 0.5 at `P = 1e3`.
pub const PROXY_CONSTANT: f64 = 2.0;
/// `log max |zeta| <= log log T + MAX_SLACK` on most of the samples.
pub const MAX_SLACK: f64 = 3.0;
/// `|zeta_afe - oracle| t^{1/4}` ceiling.
pub const AFE_SCALED_TOLERANCE: f64 = 5.0;
/// Smallest `T` at which every prime-square moment spec satisfies `U^3 < T`.
pub const HIGH_MOMENT_MIN_T: f64 = 1.0e8;
/// `lim (sum_{p <= x} 1/p - log log x)`.
pub const MERTENS_CONSTANT: f64 = 0.261_497_212_847_642_8;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanValueRow {
    pub instance: usize,
    /// `"random"` or `"diagonal"`.
    pub kind: &'static str,
    pub x: u64,
    pub big_t: f64,
    pub big_h: f64,
    pub lhs: Complex64,
    pub rhs_main: Complex64,
    pub deviation: f64,
    pub bound: f64,
    /// Distance from the closed-form integral of every cross term.
    pub oracle_err: f64,
    pub pass: bool,
}

/// `(1/H) int_T^{T+H} A conj(B)` integrated term by term in closed form.
pub fn mean_value_oracle(a: &DirichletPolySpec, b: &DirichletPolySpec, big_t: f64, big_h: f64) -> Complex64 {
    let mut acc = ComplexKahan::new();
    for (n, an) in a.support() {
        for (m, bm) in b.support() {
            let w = an * bm.conj();
            if n == m {
                acc.add(w);
            } else {
                // (n/m)^{-it} = e^{i t ln(m/n)}
                let l = (*m as f64 / *n as f64).ln();
                let e = |t: f64| Complex64::new(0.0, t * l).exp();
                acc.add(w * (e(big_t + big_h) - e(big_t)) / (Complex64::new(0.0, l) * big_h));
            }
        }
    }
    acc.value()
}

fn random_poly(rng: &mut ChaCha8Rng, x: u64) -> Result<DirichletPolySpec> {
    let mut support = Vec::new();
    for n in 1..=x {
        if n == x || rng.random::<f64>() < 0.5 {
            let r = rng.random::<f64>().sqrt();
            let th = std::f64::consts::TAU * rng.random::<f64>();
            support.push((n, Complex64::from_polar(r, th)));
        }
    }
    DirichletPolySpec::new(support)
}

/// `instances` random pairs plus three single-term diagonal cases whose mean is exact.
pub fn mean_value_suite(instances: usize, seed: u64) -> Result<Vec<MeanValueRow>> {
    let mut rows = Vec::with_capacity(instances + 3);
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let x = rng.random_range(5..=150u64);
        let a = random_poly(&mut rng, x)?;
        let b = random_poly(&mut rng, x)?;
        let big_t = 10f64.powf(rng.random_range(3.0..6.0));
        let big_h = x as f64 * 10f64.powf(rng.random_range(-0.5..1.5));
        let r = mean_value_check(&a, &b, big_t, big_h, 0)?;
        let scale = (a.norm2() * b.norm2()).sqrt();
        let oracle_err = (r.lhs - mean_value_oracle(&a, &b, big_t, big_h)).norm();
        rows.push(MeanValueRow {
            instance: i,
            kind: "random",
            x,
            big_t,
            big_h,
            lhs: r.lhs,
            rhs_main: r.rhs_main,
            deviation: r.deviation,
            bound: r.bound * MEAN_VALUE_CONSTANT,
            oracle_err,
            pass: r.pass && oracle_err <= 1e-7 * scale,
        });
    }
    for (k, &n) in [1u64, 7, 97].iter().enumerate() {
        let a = DirichletPolySpec::new(vec![(n, Complex64::new(0.6, -0.3))])?;
        let (big_t, big_h) = (1e4 * (k + 1) as f64, 50.0);
        let r = mean_value_check(&a, &a, big_t, big_h, 0)?;
        rows.push(MeanValueRow {
            instance: instances + k,
            kind: "diagonal",
            x: n,
            big_t,
            big_h,
            lhs: r.lhs,
            rhs_main: r.rhs_main,
            deviation: r.deviation,
            bound: 1e-10,
            oracle_err: 0.0,
            pass: r.deviation <= 1e-10,
        });
    }
    Ok(rows)
}

/// Three coefficient sets: primes in `[100, 200]`, primes below 50 with
/// twisted phases, and prime squares with a few primes.
pub fn q_specs() -> Result<Vec<Vec<QTerm>>> {
    let is_prime = |n: u64| n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d));
    let one = Complex64::new(1.0, 0.0);
    let a: Vec<QTerm> = (100..=200u64).filter(|&n| is_prime(n)).map(|p| QTerm::new(p, one)).collect::<Result<_>>()?;
    let b: Vec<QTerm> = (2..50u64)
        .filter(|&n| is_prime(n))
        .map(|p| QTerm::new(p, Complex64::from_polar(1.0 + (p % 3) as f64, p as f64)))
        .collect::<Result<_>>()?;
    let mut c: Vec<QTerm> = [2u64, 3, 5, 7, 11, 13]
        .iter()
        .map(|p| QTerm::new(p * p, one))
        .collect::<Result<_>>()?;
    c.extend([17u64, 19, 23].iter().map(|&p| QTerm::new(p, Complex64::new(0.5, 0.5))).collect::<Result<Vec<_>>>()?);
    Ok(vec![a, b, c])
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighMomentRow {
    pub spec: usize,
    pub k: u32,
    pub moment: f64,
    pub std_err: f64,
    pub bound: f64,
    pub ratio: f64,
    /// `sum |a_q|^2 / q`, the exact second moment (`k = 1` only).
    pub orthogonal: Option<f64>,
    pub pass: bool,
}

pub fn high_moment_suite(big_t: f64, samples: usize, seed: u64) -> Result<Vec<HighMomentRow>> {
    let mut rows = Vec::new();
    for (s, terms) in q_specs()?.iter().enumerate() {
        for k in 1..=3u32 {
            let r = high_moment_check(terms, k, big_t, samples, derive_seed(seed, s as u64))?;
            let orthogonal = (k == 1).then(|| terms.iter().map(|x| x.a.norm_sqr() / x.q as f64).sum::<f64>());
            let exact_ok = orthogonal.is_none_or(|o| (r.empirical_moment - o).abs() <= 3.0 * r.std_err + 1e-12 * o);
            rows.push(HighMomentRow {
                spec: s,
                k,
                moment: r.empirical_moment,
                std_err: r.std_err,
                bound: r.bound,
                ratio: r.ratio,
                orthogonal,
                pass: r.ratio <= HIGH_MOMENT_CONSTANT && exact_ok,
            });
        }
    }
    Ok(rows)
}

/// `n in {10, 100, 1000}`, `a, b in {1, sqrt(n)/2, sqrt(n)}`.
pub fn ballot_grid(variance: f64) -> Result<Vec<WalkSpec>> {
    let mut out = Vec::with_capacity(27);
    for n in [10usize, 100, 1000] {
        let r = (n as f64).sqrt();
        for a in [1.0, r / 2.0, r] {
            for b in [1.0, r / 2.0, r] {
                out.push(WalkSpec::uniform(n, variance, a, b)?);
            }
        }
    }
    Ok(out)
}

/// MC within 3 standard errors of the DP value (plus its discretization
/// estimate) and DP at most [`BALLOT_CONSTANT`] times the bound.
pub fn ballot_row_pass(row: &BallotRow, trials: usize) -> bool {
    let se = normal_se(row.p_dp, trials).max(row.se);
    (row.p_mc - row.p_dp).abs() <= 3.0 * se + row.dp_err && row.ratio <= BALLOT_CONSTANT
}

pub fn ballot_suite(variance: f64, trials: usize, seed: u64) -> Result<Vec<(BallotRow, bool)>> {
    ballot_grid(variance)?
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let row = ballot_row(spec, trials, derive_seed(seed, i as u64))?;
            Ok((row, ballot_row_pass(&row, trials)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxRow {
    pub r: f64,
    pub delta: f64,
    /// `sandwich`, `majorant`, `mass`, or `derivative-l`.
    pub check: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

/// Every property of `b` and `gamma` on `R in {0, 1, 2}`, `delta in {0.1, 0.5}`.
pub fn approx_suite() -> Result<Vec<ApproxRow>> {
    let mut rows = Vec::new();
    for &delta in &[0.1, 0.5] {
        let mut worst = f64::INFINITY;
        for i in 0..10_000 {
            let x = -5.0 + 10.0 * i as f64 / 9999.0;
            let ind = if x.abs() <= 0.5 { 1.0 } else { 0.0 };
            worst = worst.min(beurling_b(x, delta)? - ind);
        }
        rows.push(ApproxRow {
            r: f64::NAN,
            delta,
            check: "majorant".into(),
            value: worst,
            limit: -1e-9,
            pass: worst >= -1e-9,
        });
        let mass = beurling_mass(delta, 50.0 / delta)?;
        rows.push(ApproxRow {
            r: f64::NAN,
            delta,
            check: "mass".into(),
            value: mass - 1.0,
            limit: delta,
            pass: (mass - 1.0 - delta).abs() <= 1e-4,
        });
        for r in [0.0, 1.0, 2.0] {
            let ga = GammaApprox::new(r, delta)?;
            let span = r + 3.0;
            let grid: Vec<f64> = (0..=(40.0 * span) as usize).map(|i| -span + i as f64 / 20.0).collect();
            let s = gamma_sandwich_check(&ga, &grid)?;
            rows.push(ApproxRow {
                r,
                delta,
                check: "sandwich-inside".into(),
                value: s.min_inside,
                limit: 1.0,
                pass: s.min_inside >= 1.0 - 1e-9,
            });
            rows.push(ApproxRow {
                r,
                delta,
                check: "sandwich-outside".into(),
                value: s.max_outside,
                limit: delta,
                pass: s.max_outside <= delta + 1e-9,
            });
            rows.push(ApproxRow {
                r,
                delta,
                check: "range".into(),
                value: s.max_value,
                limit: 1.0 + delta,
                pass: s.pass,
            });
            let fine: Vec<f64> = (0..=(200.0 * span) as usize).map(|i| -span + i as f64 / 100.0).collect();
            for l in 1..=4 {
                let d = gamma_derivative_check(&ga, l, &fine)?;
                rows.push(ApproxRow {
                    r,
                    delta,
                    check: format!("derivative-{l}"),
                    value: d.max_fd_derivative,
                    limit: d.bound,
                    pass: d.pass,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourthMomentRow {
    pub v: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub bound: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// One row per `V`, all from shared samples, plus whether the estimates are
/// nonincreasing in `V` (sorted ascending).
#[allow(clippy::too_many_arguments)]
pub fn fourth_moment_suite(
    table: &PrimeTable,
    big_t: f64,
    eps: f64,
    bound: f64,
    vs: &[f64],
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<(Vec<FourthMomentRow>, bool)> {
    let mut vs = vs.to_vec();
    vs.sort_by(f64::total_cmp);
    let reports = fourth_moment_restricted_multi(table, big_t, eps, bound, &vs, sigma, samples, seed)?;
    let rows: Vec<FourthMomentRow> = vs
        .iter()
        .zip(&reports)
        .map(|(&v, r)| FourthMomentRow {
            v,
            estimate: r.estimate,
            std_err: r.std_err,
            bound: r.bound,
            ratio: r.ratio,
            pass: r.ratio <= FOURTH_MOMENT_CONSTANT,
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].estimate <= w[0].estimate);
    Ok((rows, monotone))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyRow {
    pub h: f64,
    pub k_max: usize,
    pub mean_sq_diff: f64,
    pub std_err: f64,
    pub scaled: f64,
    pub pass: bool,
}

/// Truncated-exponential proxy on the coarsest ladder against the smooth
/// polynomial, at each shift `h`.
#[allow(clippy::too_many_arguments)]
pub fn proxy_suite(
    table: &PrimeTable,
    big_t: f64,
    eps: f64,
    bound: f64,
    hs: &[f64],
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<ProxyRow>> {
    hs.iter()
        .enumerate()
        .map(|(i, &h)| {
            let hp = build_hpoints(h, bound, big_t, LadderMode::Thm2)?;
            let r = euler_proxy_discrepancy(table, big_t, eps, bound, &hp, sigma, samples, derive_seed(seed, i as u64))?;
            Ok(ProxyRow {
                h,
                k_max: r.k_max,
                mean_sq_diff: r.mean_sq_diff,
                std_err: r.std_err,
                scaled: r.scaled,
                pass: r.scaled <= PROXY_CONSTANT,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaEvalRow {
    pub t: f64,
    pub afe: Complex64,
    pub oracle: Complex64,
    pub abs_err: f64,
    /// `abs_err * t^{1/4}`
    pub scaled_err: f64,
    /// `||chi| - 1|`
    pub chi_err: f64,
    pub pass: bool,
}

/// Approximate functional equation against Euler–Maclaurin at `points`
/// log-spaced heights in `[100, T]`.
pub fn zeta_eval_suite(big_t: f64, points: usize) -> Result<Vec<ZetaEvalRow>> {
    if !(big_t > 100.0) || points < 2 {
        return Err(crate::Error::Parameter("need T > 100 and at least two points".into()));
    }
    let (lo, hi) = (100f64.ln(), big_t.ln());
    (0..points)
        .into_par_iter()
        .map(|i| {
            let t = (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp();
            let afe = zeta_afe(t)?;
            let oracle = zeta_euler_maclaurin(t);
            let abs_err = (afe - oracle).norm();
            let scaled_err = abs_err * t.powf(0.25);
            let chi_err = (ChiTheta::new(t)?.chi.norm() - 1.0).abs();
            Ok(ZetaEvalRow {
                t,
                afe,
                oracle,
                abs_err,
                scaled_err,
                chi_err,
                pass: scaled_err <= AFE_SCALED_TOLERANCE && chi_err <= 1e-12,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SieveRow {
    pub x: f64,
    pub pi_x: usize,
    pub sum_inv_p: f64,
    pub loglog: f64,
    /// `sum_inv_p - log log x - MERTENS_CONSTANT`
    pub residual: f64,
}

/// Prime counts and reciprocal sums at every power of ten up to `limit`, and at `limit`.
pub fn sieve_rows(limit: f64) -> Result<Vec<SieveRow>> {
    let table = PrimeTable::covering(limit)?;
    let mut xs: Vec<f64> = (1..).map(|k| 10f64.powi(k)).take_while(|&x| x <= limit).collect();
    if xs.last() != Some(&limit) {
        xs.push(limit);
    }
    xs.into_iter()
        .map(|x| {
            let sum_inv_p = table.mertens_sum(x)?;
            let loglog = x.ln().ln();
            Ok(SieveRow {
                x,
                pi_x: table.count_upto(x),
                sum_inv_p,
                loglog,
                residual: sum_inv_p - loglog - MERTENS_CONSTANT,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRow {
    pub t: f64,
    pub h: f64,
    pub report: crate::partition::BoxReport,
    pub tolerance: f64,
    pub pass: bool,
}

/// Contour reconstruction at `points` random `(t, h)` with `t` in `[T, 2T]`, `|h| <= 1/2`.
pub fn cauchy_box_suite(big_t: f64, points: usize, seed: u64) -> Result<Vec<BoxRow>> {
    let (ts, hs) = (derive_seed(seed, 0), derive_seed(seed, 1));
    (0..points)
        .into_par_iter()
        .map(|i| {
            let t = crate::dirichlet_poly::sample_t(big_t, ts, i);
            let h = unit_f64(derive_seed(hs, i as u64)) - 0.5;
            let report = cauchy_box_check(t, h, big_t)?;
            let tolerance = box_tolerance(&report, big_t);
            Ok(BoxRow {
                t,
                h,
                report,
                tolerance,
                pass: report.abs_err <= tolerance,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_value_suite_small() {
        let rows = mean_value_suite(4, 3).unwrap();
        assert_eq!(rows.len(), 7);
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
    }

    #[test]
    fn q_specs_are_valid() {
        let s = q_specs().unwrap();
        assert_eq!(s.len(), 3);
        assert!(s[2].iter().any(|q| q.v == 6.0));
        // U^3 < 1e8 for every spec
        for terms in &s {
            let u = terms.iter().map(|q| q.q).max().unwrap() as f64;
            assert!(u.powi(3) < 1e8);
        }
    }

    #[test]
    fn ballot_grid_shape() {
        let g = ballot_grid(1.0).unwrap();
        assert_eq!(g.len(), 27);
        assert!(g.iter().all(|w| w.variances.len() == w.n));
    }

    #[test]
    fn fourth_moment_rows_sorted_by_v() {
        let table = PrimeTable::sieve(1000).unwrap();
        let (rows, monotone) = fourth_moment_suite(&table, 1e6, 0.05, 30.0, &[4.0, 1.0], 0.5, 50, 1).unwrap();
        assert_eq!(rows.iter().map(|r| r.v).collect::<Vec<_>>(), vec![1.0, 4.0]);
        assert!(monotone);
    }

    #[test]
    fn sieve_rows_known_counts() {
        let rows = sieve_rows(1000.0).unwrap();
        assert_eq!(rows.iter().map(|r| r.pi_x).collect::<Vec<_>>(), vec![4, 25, 168]);
        assert!(rows[2].residual.abs() < 0.02);
        assert_eq!(sieve_rows(500.0).unwrap().last().unwrap().pi_x, 95);
    }

    #[test]
    fn zeta_eval_endpoints() {
        let rows = zeta_eval_suite(1e3, 3).unwrap();
        assert!((rows[0].t - 100.0).abs() < 1e-9 && (rows[2].t - 1e3).abs() < 1e-9);
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
    }
}

//! Zeta over short intervals: partition integrals `int_{-1/2}^{1/2} |zeta(1/2 + i(t+h))|^{2 beta} dh`,
//! local maxima, barrier-event flags, tail and centering statistics, the
//! contour-integral check around the `n / log T` grid, and indicator-restricted
//! means of the smooth-times-rough factorization.

use crate::config::ExperimentConfig;
use crate::dirichlet_poly::{sample_t, smooth_poly, DirichletPolySpec, SmoothRough};
use crate::error::{Error, Result};
use crate::ladders::{
    build_hpoints, event_g_all_h, event_g_at_h, BarrierSchedule, EulerLadder, LadderMode,
};
use crate::numeric::{dirichlet_term, golden_max, GaussLegendre, KahanSum, MeanSe};
use crate::primes::PrimeTable;
use crate::zeta_eval::{afe_length, zeta_afe, AFE_MIN_T};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Points of the max scan per `1/log T`.
pub const SCAN_PER_INVLOGT: usize = 8;
/// Coarse peaks refined by golden-section search.
pub const REFINED_PEAKS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub index: usize,
    pub t: f64,
    pub partition_integral: f64,
    pub local_max: f64,
    pub argmax_h: f64,
    pub event_g: bool,
    pub event_g_tilde: bool,
    pub smooth_modulus_at_argmax: f64,
}

fn check_t(t: f64) -> Result<()> {
    if !(t - 0.5 >= AFE_MIN_T) {
        return Err(Error::param(format!(
            "t = {t}: the window t + [-1/2, 1/2] must stay above {AFE_MIN_T}"
        )));
    }
    Ok(())
}

/// `n + 1` equispaced points on `[-1/2, 1/2]` with `n = ceil(per * log T)`.
pub fn h_grid(big_t: f64, per: usize) -> Vec<f64> {
    let n = ((per as f64) * big_t.ln()).ceil().max(1.0) as usize;
    (0..=n).map(|k| -0.5 + k as f64 / n as f64).collect()
}

/// `|zeta(1/2 + i(t + h))|` at each `h`.
pub fn zeta_abs_on_grid(t: f64, hs: &[f64]) -> Result<Vec<f64>> {
    check_t(t)?;
    hs.iter().map(|&h| zeta_afe(t + h).map(|z| z.norm())).collect()
}

/// Trapezoid rule for `int_{-1/2}^{1/2} v(h)^{2 beta} dh` on an equispaced grid.
pub fn trapezoid_unit(values: &[f64], beta: f64) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    let n = values.len() - 1;
    let mut acc = KahanSum::new();
    for (k, &v) in values.iter().enumerate() {
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc.add(w * v.powf(2.0 * beta));
    }
    acc.value() / n as f64
}

pub fn partition_integral_with(t: f64, beta: f64, big_t: f64, per: usize) -> Result<f64> {
    if beta == 0.0 {
        check_t(t)?;
        return Ok(1.0);
    }
    Ok(trapezoid_unit(&zeta_abs_on_grid(t, &h_grid(big_t, per))?, beta))
}

pub fn partition_integral(t: f64, beta: f64, cfg: &ExperimentConfig) -> Result<f64> {
    partition_integral_with(t, beta, cfg.big_t, cfg.h_grid_per_invlogt)
}

/// Refines the top coarse peaks of a scan; never returns less than the scan maximum.
fn refine_scan(t: f64, hs: &[f64], vals: &[f64], log_t: f64) -> (f64, f64) {
    let n = vals.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&k| (k == 0 || vals[k] >= vals[k - 1]) && (k + 1 == n || vals[k] >= vals[k + 1]))
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut best = (hs[peaks[0]], vals[peaks[0]]);
    let dh = if n > 1 { hs[1] - hs[0] } else { 0.0 };
    let tol = 1e-3 / log_t;
    for &k in peaks.iter().take(REFINED_PEAKS) {
        let lo = (hs[k] - dh).max(-0.5);
        let hi = (hs[k] + dh).min(0.5);
        let (h, v) = golden_max(
            |h| zeta_afe(t + h).map(|z| z.norm()).unwrap_or(f64::NEG_INFINITY),
            lo,
            hi,
            tol,
        );
        if v > best.1 {
            best = (h, v);
        }
    }
    best
}

/// `(h*, max |zeta(1/2 + i(t + h))|)` over `|h| <= 1/2`.
pub fn local_max(t: f64, cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    let hs = h_grid(cfg.big_t, SCAN_PER_INVLOGT);
    let vals = zeta_abs_on_grid(t, &hs)?;
    Ok(refine_scan(t, &hs, &vals, cfg.log_t()))
}

/// Everything a sweep record needs, built once.
#[derive(Debug, Clone)]
pub struct SweepContext {
    pub cfg: ExperimentConfig,
    pub table: PrimeTable,
    smooth: DirichletPolySpec,
    sched_g: BarrierSchedule,
    sched_g_tilde: BarrierSchedule,
}

impl SweepContext {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let table = PrimeTable::covering(cfg.bound)?;
        let smooth = smooth_poly(&table, cfg.big_t, cfg.eps, cfg.bound)?;
        let q = cfg
            .q_grid
            .iter()
            .copied()
            .filter(|q| (2.0 / 3.0..=1.0).contains(q))
            .fold(f64::NAN, f64::max);
        let q = if q.is_nan() { 1.0 } else { q };
        Ok(Self {
            cfg: cfg.clone(),
            sched_g: BarrierSchedule::thm1(cfg.bound, cfg.c, cfg.b, q)?,
            sched_g_tilde: BarrierSchedule::thm2(cfg.bound, cfg.b, cfg.u)?,
            table,
            smooth,
        })
    }

    pub fn record(&self, index: usize) -> Result<SweepRecord> {
        let cfg = &self.cfg;
        let t = sample_t(cfg.big_t, cfg.seed, index);
        let scan_h = h_grid(cfg.big_t, SCAN_PER_INVLOGT);
        let scan = zeta_abs_on_grid(t, &scan_h)?;
        let partition_integral = if cfg.h_grid_per_invlogt == SCAN_PER_INVLOGT {
            trapezoid_unit(&scan, cfg.beta)
        } else {
            partition_integral(t, cfg.beta, cfg)?
        };
        let (argmax_h, local_max) = refine_scan(t, &scan_h, &scan, cfg.log_t());
        let event_g = event_g_all_h(&self.table, t, &self.sched_g)?.holds;
        let event_g_tilde = if self.sched_g_tilde.n_scales() == 0 {
            true
        } else {
            let hp = build_hpoints(argmax_h, cfg.bound, cfg.big_t, LadderMode::Thm2)?;
            let ladder = EulerLadder::deterministic(&self.table, t, &hp, cfg.b)?;
            event_g_at_h(&ladder, &self.sched_g_tilde).holds
        };
        Ok(SweepRecord {
            index,
            t,
            partition_integral,
            local_max,
            argmax_h,
            event_g,
            event_g_tilde,
            smooth_modulus_at_argmax: self.smooth.eval(0.0, t + argmax_h).norm(),
        })
    }
}

/// Records `start..cfg.samples` in index order, handed to `sink` one at a time.
/// Work is done in parallel blocks; an error stops the sweep after every
/// earlier record has been delivered.
pub fn sweep_with<F>(ctx: &SweepContext, start: usize, mut sink: F) -> Result<usize>
where
    F: FnMut(&SweepRecord) -> Result<()>,
{
    let block = (rayon::current_num_threads() * 4).max(16);
    let mut done = 0;
    let mut i = start;
    while i < ctx.cfg.samples {
        let end = (i + block).min(ctx.cfg.samples);
        let recs: Vec<Result<SweepRecord>> = (i..end).into_par_iter().map(|k| ctx.record(k)).collect();
        for r in recs {
            sink(&r?)?;
            done += 1;
        }
        i = end;
    }
    Ok(done)
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let ctx = SweepContext::new(cfg)?;
    let mut out = Vec::with_capacity(cfg.samples);
    sweep_with(&ctx, 0, |r| {
        out.push(*r);
        Ok(())
    })?;
    Ok(out)
}

/// Fraction of records with partition integral `>= lambda log T / sqrt(log log T)`.
pub fn tail_fraction(records: &[SweepRecord], lambda: f64, big_t: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::param("tail fraction of an empty sweep"));
    }
    let cut = lambda * big_t.ln() / big_t.ln().ln().sqrt();
    Ok(records.iter().filter(|r| r.partition_integral >= cut).count() as f64 / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats {
    pub centering: f64,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q25: f64,
    pub q75: f64,
    pub q95: f64,
    pub n: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn residual_stats(records: &[SweepRecord], centering: f64) -> ResidualStats {
    let mut r: Vec<f64> = records.iter().map(|x| x.local_max.ln() - centering).collect();
    let mean = MeanSe::from_samples(&r).mean;
    r.sort_by(f64::total_cmp);
    ResidualStats {
        centering,
        mean,
        median: quantile(&r, 0.5),
        q05: quantile(&r, 0.05),
        q25: quantile(&r, 0.25),
        q75: quantile(&r, 0.75),
        q95: quantile(&r, 0.95),
        n: r.len(),
    }
}

/// Residuals of `log max|zeta|` against `llT - (3/4) lllT` and against `llT - (1/4) lllT`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhkResiduals {
    pub three_quarters: ResidualStats,
    pub one_quarter: ResidualStats,
}

pub fn fhk_residuals(records: &[SweepRecord], big_t: f64) -> Result<FhkResiduals> {
    if records.is_empty() {
        return Err(Error::param("residuals of an empty sweep"));
    }
    let ll = big_t.ln().ln();
    let lll = ll.ln();
    Ok(FhkResiduals {
        three_quarters: residual_stats(records, ll - 0.75 * lll),
        one_quarter: residual_stats(records, ll - 0.25 * lll),
    })
}

/// `(1/(2 pi i)) oint f(s) / (s - c - z0) ds` counterclockwise around the square of
/// half-side `r` centred at `c`, `nodes` Gauss–Legendre points per side.
/// The pole is given by its offset `z0` from the centre so that `s - s0` is
/// never formed from two large numbers. Also returns `sum |w f / (s - s0)| / (2 pi)`,
/// the scale for rounding error.
pub fn box_contour_integral<F>(c: Complex64, r: f64, z0: Complex64, nodes: usize, f: F) -> (Complex64, f64)
where
    F: Fn(Complex64) -> Complex64,
{
    let gl = GaussLegendre::new(nodes);
    let i = Complex64::i();
    // (start corner, direction) of each side
    let sides = [
        (Complex64::new(-r, -r), Complex64::new(1.0, 0.0)),
        (Complex64::new(r, -r), i),
        (Complex64::new(r, r), Complex64::new(-1.0, 0.0)),
        (Complex64::new(-r, r), -i),
    ];
    let mut acc = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    for (start, dir) in sides {
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            // parameter u = r (x + 1) runs over [0, 2r]
            let z = start + dir * (r * (x + 1.0));
            let term = f(c + z) / (z - z0) * dir * (w * r);
            mass += term.norm();
            acc += term;
        }
    }
    (acc / (2.0 * PI * i), mass / (2.0 * PI))
}

/// Nodes per side in the box check.
pub const BOX_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxReport {
    pub direct: Complex64,
    pub boxed: Complex64,
    pub abs_err: f64,
    /// Quadrature-refinement difference plus a rounding allowance.
    pub err_estimate: f64,
    /// `h~(*)`, the imaginary offset of the box centre.
    pub hstar: f64,
}

/// Partial sum at the box, `sum_{n <= N} n^{-s}` with `N = floor(sqrt((t + h*)/2 pi))`
/// fixed so the integrand is entire.
fn box_sum(n_max: u64, s: Complex64) -> Complex64 {
    let mut acc = crate::numeric::ComplexKahan::new();
    for n in 1..=n_max {
        acc.add(dirichlet_term((n as f64).ln(), s.re, s.im));
    }
    acc.value()
}

/// Cauchy's formula over a box of half-side `half_side` centred at `1/2 + i(t + h*)`.
pub fn cauchy_box_with(t: f64, h: f64, big_t: f64, half_side: f64, nodes: usize) -> Result<BoxReport> {
    if !(h.abs() <= 0.5) {
        return Err(Error::param(format!("need |h| <= 1/2, got {h}")));
    }
    if !(t >= AFE_MIN_T && big_t > std::f64::consts::E) {
        return Err(Error::param("need t >= 50 and T > e"));
    }
    let log_t = big_t.ln();
    let hstar = (h * log_t).round() / log_t;
    if (h - hstar).abs() >= half_side {
        return Err(Error::param("point is not inside the box"));
    }
    let n_max = afe_length(t + hstar).floor() as u64;
    let c = Complex64::new(0.5, t + hstar);
    let z0 = Complex64::new(0.0, h - hstar);
    let direct = box_sum(n_max, Complex64::new(0.5, t + h));
    let (boxed, mass) = box_contour_integral(c, half_side, z0, nodes, |s| box_sum(n_max, s));
    let (finer, _) = box_contour_integral(c, half_side, z0, 2 * nodes, |s| box_sum(n_max, s));
    if !(boxed.re.is_finite() && boxed.im.is_finite()) {
        return Err(Error::Numeric(format!("non-finite contour integral at t = {t}, h = {h}")));
    }
    // each term's phase Im(s) ln n carries a relative rounding error of ~eps
    let sigma_min = 0.5 - half_side;
    let phase_noise: f64 = f64::EPSILON
        * (c.im + half_side)
        * (2..=n_max).map(|n| (n as f64).ln() * (n as f64).powf(-sigma_min)).sum::<f64>();
    let (_, kernel_mass) = box_contour_integral(c, half_side, z0, nodes, |_| Complex64::new(1.0, 0.0));
    let rounding = phase_noise * (1.0 + kernel_mass) + 4.0 * n_max as f64 * f64::EPSILON * mass;
    Ok(BoxReport {
        direct,
        boxed,
        abs_err: (boxed - direct).norm(),
        err_estimate: (finer - boxed).norm() + rounding,
        hstar,
    })
}

/// The box of half-side `1/log T`, which contains `1/2 + i(t + h)` since `|h - h*| <= 1/(2 log T)`.
pub fn cauchy_box_check(t: f64, h: f64, big_t: f64) -> Result<BoxReport> {
    cauchy_box_with(t, h, big_t, 1.0 / big_t.ln(), BOX_NODES)
}

/// `abs_err <= 1e-3 |direct| + 10 T^{-1/4}`.
pub fn box_tolerance(report: &BoxReport, big_t: f64) -> f64 {
    1e-3 * report.direct.norm() + 10.0 * big_t.powf(-0.25)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestrictionMode {
    /// `1_{G_t}` times the `q`-th power of the `h`-integral.
    Kp1,
    /// `1_{G~_t(h)} 1_{|smooth| > log P / V}` at a single `h`.
    Kp4,
}

impl std::str::FromStr for RestrictionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kp1" => Ok(Self::Kp1),
            "kp4" => Ok(Self::Kp4),
            _ => Err(Error::param(format!("unknown restriction {s:?} (kp1 | kp4)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedRow {
    pub q: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub bound: f64,
    pub ratio: f64,
    pub event_rate: f64,
    /// `sum_smooth 1/m * sum_rough 1/n`, the orthogonality scale of the unrestricted mean.
    pub orthogonal_scale: f64,
}

/// `(C log T min{1, 1/((1-q) sqrt(llP))})^q`.
pub fn kp1_bound(big_t: f64, bound: f64, c: f64, q: f64) -> f64 {
    let llp = bound.ln().ln();
    let m = if llp > 0.0 && q < 1.0 {
        (1.0 / ((1.0 - q) * llp.sqrt())).min(1.0)
    } else {
        1.0
    };
    (c * big_t.ln() * m).powf(q)
}

/// `log T min{1, (lllP + U)/sqrt(llP)} min{1, (lllP + U + log V)/sqrt(llP)}^2`,
/// minima clamped to `[0, 1]` and set to 1 when `log log P <= 0`.
pub fn kp4_bound(big_t: f64, bound: f64, u: f64, v: f64) -> f64 {
    let llp = bound.ln().ln();
    let (m1, m2) = if llp > 0.0 {
        let lllp = llp.ln();
        (
            ((lllp + u) / llp.sqrt()).clamp(0.0, 1.0),
            ((lllp + u + v.ln()) / llp.sqrt()).clamp(0.0, 1.0),
        )
    } else {
        (1.0, 1.0)
    };
    big_t.ln() * m1 * m2 * m2
}

/// Monte Carlo over `t` of the indicator-restricted mean square of smooth times rough.
///
/// `kp1` gives one row per `q` of the configuration in `[2/3, 1]`; `kp4` one row
/// at `h = 0`. `unrestricted` replaces every indicator by 1.
pub fn restricted_partition_mean(
    cfg: &ExperimentConfig,
    mode: RestrictionMode,
    unrestricted: bool,
) -> Result<Vec<RestrictedRow>> {
    cfg.validate()?;
    let table = PrimeTable::covering(cfg.bound)?;
    let sr = SmoothRough::build(&table, cfg.big_t, cfg.eps, cfg.bound)?;
    let scale = sr.smooth.norm2() * sr.rough.norm2();
    let samples = cfg.samples.max(1);
    match mode {
        RestrictionMode::Kp1 => {
            let qs: Vec<f64> = cfg
                .q_grid
                .iter()
                .copied()
                .filter(|q| (2.0 / 3.0..=1.0).contains(q))
                .collect();
            if qs.is_empty() {
                return Err(Error::param("kp1 needs some q in [2/3, 1]"));
            }
            let hs = h_grid(cfg.big_t, cfg.h_grid_per_invlogt);
            let mut rows = Vec::new();
            for &q in &qs {
                let sched = BarrierSchedule::thm1(cfg.bound, cfg.c, cfg.b, q)?;
                let vals: Vec<(f64, bool)> = (0..samples)
                    .into_par_iter()
                    .map(|i| -> Result<(f64, bool)> {
                        let t = sample_t(cfg.big_t, cfg.seed, i);
                        let holds = unrestricted || event_g_all_h(&table, t, &sched)?.holds;
                        if !holds {
                            return Ok((0.0, false));
                        }
                        let sq: Vec<f64> = hs
                            .iter()
                            .map(|&h| {
                                let (s, r) = sr.eval(t + h, cfg.sigma);
                                (s * r).norm()
                            })
                            .collect();
                        Ok((trapezoid_unit(&sq, 1.0).powf(q), true))
                    })
                    .collect::<Result<_>>()?;
                rows.push(summarize(q, &vals, kp1_bound(cfg.big_t, cfg.bound, cfg.c, q), scale));
            }
            Ok(rows)
        }
        RestrictionMode::Kp4 => {
            let sched = BarrierSchedule::thm2(cfg.bound, cfg.b, cfg.u)?;
            let hp = if sched.n_scales() > 0 {
                Some(build_hpoints(0.0, cfg.bound, cfg.big_t, LadderMode::Thm2)?)
            } else {
                None
            };
            let cut = cfg.bound.ln() / cfg.v;
            let vals: Vec<(f64, bool)> = (0..samples)
                .into_par_iter()
                .map(|i| -> Result<(f64, bool)> {
                    let t = sample_t(cfg.big_t, cfg.seed, i);
                    let (s, r) = sr.eval(t, cfg.sigma);
                    if unrestricted {
                        return Ok(((s * r).norm_sqr(), true));
                    }
                    let holds = match &hp {
                        Some(hp) => event_g_at_h(&EulerLadder::deterministic(&table, t, hp, cfg.b)?, &sched).holds,
                        None => true,
                    };
                    if holds && s.norm() > cut {
                        Ok(((s * r).norm_sqr(), true))
                    } else {
                        Ok((0.0, false))
                    }
                })
                .collect::<Result<_>>()?;
            Ok(vec![summarize(1.0, &vals, kp4_bound(cfg.big_t, cfg.bound, cfg.u, cfg.v), scale)])
        }
    }
}

fn summarize(q: f64, vals: &[(f64, bool)], bound: f64, scale: f64) -> RestrictedRow {
    let xs: Vec<f64> = vals.iter().map(|v| v.0).collect();
    let stats = MeanSe::from_samples(&xs);
    RestrictedRow {
        q,
        estimate: stats.mean,
        std_err: stats.std_err,
        bound,
        ratio: stats.mean / bound,
        event_rate: vals.iter().filter(|v| v.1).count() as f64 / vals.len() as f64,
        orthogonal_scale: scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigOverrides;

    fn cfg(text: &str) -> ExperimentConfig {
        ConfigOverrides::parse(text).unwrap().resolve().unwrap()
    }

    #[test]
    fn beta_zero_is_one() {
        let c = cfg("");
        assert_eq!(partition_integral(1.3e6, 0.0, &c).unwrap(), 1.0);
        assert!(partition_integral(40.0, 1.0, &c).is_err());
    }

    #[test]
    fn grid_doubling_is_stable() {
        let c = cfg("");
        for i in 0..20 {
            let t = sample_t(1e6, 3, i);
            let a = partition_integral_with(t, 1.0, 1e6, 8).unwrap();
            let b = partition_integral_with(t, 1.0, 1e6, 16).unwrap();
            assert!((a - b).abs() < 0.02 * b, "t = {t}: {a} vs {b}");
            assert!(a >= 0.0);
            let _ = &c;
        }
    }

    #[test]
    fn local_max_dominates_scan_and_origin() {
        let c = cfg("");
        for i in 0..5 {
            let t = sample_t(1e6, 11, i);
            let (h, v) = local_max(t, &c).unwrap();
            assert!(h.abs() <= 0.5);
            assert!(v >= zeta_afe(t).unwrap().norm() - 1e-9);
            let scan = zeta_abs_on_grid(t, &h_grid(1e6, SCAN_PER_INVLOGT)).unwrap();
            assert!(v >= scan.iter().cloned().fold(0.0, f64::max));
            assert!((zeta_afe(t + h).unwrap().norm() - v).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_records_are_consistent() {
        let c = cfg("samples = 6");
        let recs = sweep(&c).unwrap();
        assert_eq!(recs.len(), 6);
        for r in &recs {
            assert!(r.partition_integral <= r.local_max * r.local_max);
            assert!(r.partition_integral >= 0.0);
            assert!(r.event_g && r.event_g_tilde);
            assert!((1e6..=2e6).contains(&r.t));
        }
        assert_eq!(recs, sweep(&c).unwrap());
        assert!(sweep(&cfg("samples = 0")).unwrap().is_empty());
    }

    #[test]
    fn fubini_identity() {
        let c = cfg("samples = 4");
        let recs = sweep(&c).unwrap();
        let hs = h_grid(c.big_t, c.h_grid_per_invlogt);
        let n = hs.len() - 1;
        let mut acc = KahanSum::new();
        for r in &recs {
            let vals = zeta_abs_on_grid(r.t, &hs).unwrap();
            for (k, v) in vals.iter().enumerate() {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                acc.add(w * v * v / n as f64);
            }
        }
        let product_mean = acc.value() / recs.len() as f64;
        let record_mean = recs.iter().map(|r| r.partition_integral).sum::<f64>() / recs.len() as f64;
        assert!((product_mean - record_mean).abs() <= 1e-10 * record_mean);
    }

    #[test]
    fn tails_and_residuals() {
        let mk = |pi: f64, m: f64| SweepRecord {
            index: 0,
            t: 1e6,
            partition_integral: pi,
            local_max: m,
            argmax_h: 0.0,
            event_g: true,
            event_g_tilde: true,
            smooth_modulus_at_argmax: 1.0,
        };
        let recs: Vec<_> = (1..=10).map(|k| mk(k as f64, k as f64)).collect();
        assert_eq!(tail_fraction(&recs, 1e-9, 1e6).unwrap(), 1.0);
        let mut prev = 1.0;
        for l in [0.1, 0.5, 1.0, 2.0, 4.0] {
            let f = tail_fraction(&recs, l, 1e6).unwrap();
            assert!(f <= prev);
            prev = f;
        }
        let one = fhk_residuals(&recs[3..4], 1e6).unwrap();
        let ll = (1e6f64).ln().ln();
        let want = 4f64.ln() - (ll - 0.75 * ll.ln());
        for x in [one.three_quarters.mean, one.three_quarters.median, one.three_quarters.q05] {
            assert!((x - want).abs() < 1e-12);
        }
        assert!(tail_fraction(&[], 1.0, 1e6).is_err());
    }

    #[test]
    fn constant_integrand_gives_one() {
        let c = Complex64::new(0.5, 1e6);
        for &off in &[0.0, 0.03, -0.03] {
            let (v, _) = box_contour_integral(c, 0.07, Complex64::new(0.01, off), BOX_NODES, |_| Complex64::new(1.0, 0.0));
            assert!((v - 1.0).norm() < 1e-12, "{v}");
        }
        let (v, _) = box_contour_integral(c, 0.07, Complex64::new(0.2, 0.0), BOX_NODES, |_| Complex64::new(1.0, 0.0));
        assert!(v.norm() < 1e-12);
    }

    #[test]
    fn box_matches_direct_and_is_stable_under_shrinking() {
        for i in 0..5 {
            let t = sample_t(1e6, 21, i);
            let h = crate::numeric::unit_f64(crate::numeric::derive_seed(22, i as u64)) - 0.5;
            let r = cauchy_box_check(t, h, 1e6).unwrap();
            assert!(r.abs_err <= box_tolerance(&r, 1e6));
            assert!((h - r.hstar).abs() <= 0.5 / (1e6f64).ln() + 1e-15);
        }
        // centred point: the half-size box still contains it
        let t = sample_t(1e6, 23, 0);
        let h = 3.0 / (1e6f64).ln();
        let big = cauchy_box_check(t, h, 1e6).unwrap();
        let small = cauchy_box_with(t, h, 1e6, 0.5 / (1e6f64).ln(), BOX_NODES).unwrap();
        assert!(
            (big.boxed - small.boxed).norm() <= big.err_estimate + small.err_estimate,
            "{big:?} {small:?}"
        );
    }

    #[test]
    fn restricted_means() {
        let c = cfg("samples = 200\nT = 1e6");
        let free = restricted_partition_mean(&c, RestrictionMode::Kp4, true).unwrap();
        let r = free[0];
        assert!(r.estimate > r.orthogonal_scale / 3.0 && r.estimate < 3.0 * r.orthogonal_scale);
        // V = e^{-U} = 1: |smooth| > log P almost never fails to be rare
        let tight = restricted_partition_mean(&cfg("samples = 200\nV = 1"), RestrictionMode::Kp4, false).unwrap();
        assert!(tight[0].estimate <= r.estimate);
        let kp1 = restricted_partition_mean(&c, RestrictionMode::Kp1, false).unwrap();
        assert!(kp1.iter().all(|row| row.ratio.is_finite() && row.event_rate == 1.0));
    }
}

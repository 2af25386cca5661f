//! Multiscale approximating points and the barrier events built on the
//! partial Euler products
//!
//! `I_l(h) = prod_{P^{e^{-(l+1)}} < p <= P^{e^{-l}}} (1 - p^{-(1/2+it+ih)})^{-1}`.
//!
//! Each scale `l` carries its own grid of points `n * spacing(l)`; the point
//! used at scale `l` is the largest grid point not exceeding the point of the
//! previous scale, so the whole ladder is fixed once its value at any scale is.
//! Events "for all |h| <= 1/2" therefore reduce to finitely many grid chains,
//! which [`LadderValues`] evaluates once per grid point.

use crate::dirichlet_poly::neg_log_one_minus;
use crate::error::{Error, Result};
use crate::numeric::ComplexKahan;
use crate::primes::{self, PrimeTable};
use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;

/// Shift absorbing the prime-cube tail and the approximation constants in the
/// random events (`11/3 + 8/3`).
pub const RANDOM_EVENT_SLACK: f64 = 19.0 / 3.0;

/// Trivial bound on the `v >= 3` terms of `sum_p sum_v 1/(v p^{v/2})`.
pub const PRIME_CUBE_TAIL: f64 = 8.0 / 3.0;

/// Upper limit on `(grid points) x (primes)` evaluated by a single all-h event.
pub const GRID_WORK_BUDGET: f64 = 2.0e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LadderMode {
    /// Grid `n / ((log P / e^j) log(log P / e^j))`, two-sided barrier on `|prod I_l|`.
    Thm1,
    /// Grid `n / ((log P / e^j)(log log P)^3)`, barrier on `|sum log I_l|`.
    Thm2,
}

impl fmt::Display for LadderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LadderMode::Thm1 => "thm1",
            LadderMode::Thm2 => "thm2",
        })
    }
}

impl FromStr for LadderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thm1" => Ok(LadderMode::Thm1),
            "thm2" => Ok(LadderMode::Thm2),
            _ => Err(Error::param(format!("unknown ladder mode {s:?} (expected thm1 or thm2)"))),
        }
    }
}

fn loglog(bound: f64) -> f64 {
    bound.ln().ln()
}

/// Grid spacing at scale `j`.
pub fn grid_spacing(mode: LadderMode, j: usize, bound: f64) -> f64 {
    let x = bound.ln() / (j as f64).exp();
    match mode {
        LadderMode::Thm1 => 1.0 / (x * x.ln()),
        LadderMode::Thm2 => 1.0 / (x * loglog(bound).powi(3)),
    }
}

/// Number of scales carried by a ladder. `thm2` ladders reach the scale of
/// the prime 2 so that every prime up to `P` has a point.
pub fn ladder_scales(mode: LadderMode, bound: f64) -> Result<usize> {
    let llp = loglog(bound);
    if !(llp >= 1.0) {
        return Err(Error::param(format!("P = {bound} too small for a ladder (need log log P >= 1)")));
    }
    let base = llp.floor() as usize;
    Ok(match mode {
        LadderMode::Thm1 => base,
        LadderMode::Thm2 => base.max(primes::scale_index(2, bound)? + 1),
    })
}

/// Scales `0 .. floor(log log P) - B` entering the barrier events.
pub fn event_scales(bound: f64, b: usize) -> usize {
    let llp = loglog(bound);
    if llp.is_finite() && llp >= 1.0 {
        (llp.floor() as usize).saturating_sub(b)
    } else {
        0
    }
}

/// Largest `n` with `n * d <= v`.
pub fn floor_index(v: f64, d: f64) -> i64 {
    let mut n = (v / d).floor() as i64;
    while n as f64 * d > v {
        n -= 1;
    }
    while (n + 1) as f64 * d <= v {
        n += 1;
    }
    n
}

/// The points `h(-1) = h, h(0), h(1), ...` of one ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct HPoints {
    h: f64,
    mode: LadderMode,
    bound: f64,
    points: Vec<f64>,
    indices: Vec<i64>,
    spacings: Vec<f64>,
    hstar: Option<f64>,
}

impl HPoints {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn mode(&self) -> LadderMode {
        self.mode
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `h(j)` for `j >= 0`.
    pub fn at(&self, j: usize) -> Option<f64> {
        self.points.get(j).copied()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Grid integer `n` with `h(j) = n * spacing(j)`.
    pub fn index(&self, j: usize) -> Option<i64> {
        self.indices.get(j).copied()
    }

    pub fn spacing(&self, j: usize) -> Option<f64> {
        self.spacings.get(j).copied()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point `n / log T` (thm2 ladders only).
    pub fn hstar(&self) -> Option<f64> {
        self.hstar
    }
}

pub fn build_hpoints(h: f64, bound: f64, big_t: f64, mode: LadderMode) -> Result<HPoints> {
    if !(h.abs() <= 0.5) {
        return Err(Error::param(format!("need |h| <= 1/2, got {h}")));
    }
    let n = ladder_scales(mode, bound)?;
    let mut points = Vec::with_capacity(n);
    let mut indices = Vec::with_capacity(n);
    let mut spacings = Vec::with_capacity(n);
    let mut prev = h;
    for j in 0..n {
        let d = grid_spacing(mode, j, bound);
        let k = floor_index(prev, d);
        prev = k as f64 * d;
        points.push(prev);
        indices.push(k);
        spacings.push(d);
    }
    let hstar = match mode {
        LadderMode::Thm2 => {
            if !(big_t > std::f64::consts::E) {
                return Err(Error::param(format!("T = {big_t} too small for h~(*)")));
            }
            let lt = big_t.ln();
            Some((h * lt).round() / lt)
        }
        LadderMode::Thm1 => None,
    };
    Ok(HPoints {
        h,
        mode,
        bound,
        points,
        indices,
        spacings,
        hstar,
    })
}

/// Which quantity the barrier constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// `|Re sum log I_l| = |log prod |I_l||`: the two-sided product barrier.
    RealPart,
    /// `|sum log I_l|`.
    Modulus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSchedule {
    pub mode: LadderMode,
    pub c: f64,
    pub b: usize,
    pub q: f64,
    pub u: f64,
    pub bound: f64,
    /// Additive shift of every threshold.
    pub slack: f64,
    pub statistic: Statistic,
    /// Lower limit on `Re sum_{l >= 0} log I_l`, if any.
    pub lower_j0: Option<f64>,
}

impl BarrierSchedule {
    /// `G_t`: `|Re sum_{l >= j} log I_l(h(l))| <= log log P - j + g(j)`.
    pub fn thm1(bound: f64, c: f64, b: usize, q: f64) -> Result<Self> {
        if !(2.0 / 3.0..=1.0).contains(&q) {
            return Err(Error::param(format!("q = {q} outside [2/3, 1]")));
        }
        if !(c >= 0.0) {
            return Err(Error::param("C must be nonnegative"));
        }
        Ok(Self {
            mode: LadderMode::Thm1,
            c,
            b,
            q,
            u: 0.0,
            bound,
            slack: 0.0,
            statistic: Statistic::RealPart,
            lower_j0: None,
        })
    }

    /// `G~_t(h)`: `|sum_{l >= j} log I_l(h~(l))| <= log log P - j + 3 log log log P + U`.
    pub fn thm2(bound: f64, b: usize, u: f64) -> Result<Self> {
        if !(u >= 0.0) {
            return Err(Error::param(format!("U = {u} must be >= 0")));
        }
        Ok(Self {
            mode: LadderMode::Thm2,
            c: 0.0,
            b,
            q: 1.0,
            u,
            bound,
            slack: 0.0,
            statistic: Statistic::Modulus,
            lower_j0: None,
        })
    }

    pub fn with_slack(mut self, slack: f64) -> Self {
        self.slack = slack;
        self
    }

    /// The random-model event: two-sided product barrier shifted by 19/3.
    pub fn random_variant(mut self) -> Self {
        self.slack = RANDOM_EVENT_SLACK;
        self.statistic = Statistic::RealPart;
        self
    }

    /// Adds `prod_{l >= 0} |I_l| >= log P / (V B0 e^{slack})`.
    pub fn with_lower_bound(mut self, v: f64, b0: f64) -> Result<Self> {
        if !(v > 0.0 && b0 > 0.0) {
            return Err(Error::param("V and B0 must be positive"));
        }
        self.lower_j0 = Some(loglog(self.bound) - (v * b0).ln() - self.slack);
        Ok(self)
    }

    pub fn n_scales(&self) -> usize {
        event_scales(self.bound, self.b)
    }

    /// `g(j) = C min{sqrt(log log P), 1/(1-q)} + 2 log log((log P)/e^j)`.
    pub fn g(&self, j: usize) -> f64 {
        let llp = loglog(self.bound);
        let inv = if self.q < 1.0 { 1.0 / (1.0 - self.q) } else { f64::INFINITY };
        self.c * llp.sqrt().min(inv) + 2.0 * (llp - j as f64).ln()
    }

    /// Upper limit on the scale-`j` statistic.
    pub fn threshold(&self, j: usize) -> f64 {
        let llp = loglog(self.bound);
        let base = llp - j as f64;
        self.slack
            + match self.mode {
                LadderMode::Thm1 => base + self.g(j),
                LadderMode::Thm2 => base + 3.0 * llp.ln() + self.u,
            }
    }

    /// Signed distance from the barrier for suffix sum `s` at scale `j`.
    pub fn margin(&self, j: usize, s: Complex64) -> f64 {
        let stat = match self.statistic {
            Statistic::RealPart => s.re.abs(),
            Statistic::Modulus => s.norm(),
        };
        let mut m = self.threshold(j) - stat;
        if j == 0 {
            if let Some(lo) = self.lower_j0 {
                m = m.min(s.re - lo);
            }
        }
        m
    }
}

/// `e^{-it ln p}` for every prime `p <= P`, the deterministic analogue of `f(p)`.
pub fn deterministic_phases(table: &PrimeTable, t: f64, bound: f64) -> Result<Vec<Complex64>> {
    table.require(bound)?;
    let n = table.count_upto(bound);
    Ok(table.logp()[..n]
        .iter()
        .map(|&lp| {
            let (s, c) = (t * lp).sin_cos();
            Complex64::new(c, -s)
        })
        .collect())
}

/// `p^{-1/2} e^{-i h ln p}`.
#[inline]
fn shift_factor(lp: f64, h: f64) -> Complex64 {
    let mag = (-0.5 * lp).exp();
    let (s, c) = (h * lp).sin_cos();
    Complex64::new(mag * c, -mag * s)
}

/// `log I_l(h)` with phases `u_p` standing in for `p^{-it}`.
pub fn log_i_with_phases(
    table: &PrimeTable,
    phases: &[Complex64],
    l: usize,
    h: f64,
    bound: f64,
) -> Result<Complex64> {
    table.require(bound)?;
    let range = table.scale_range(l, bound);
    if range.end > phases.len() {
        return Err(Error::param("phase table shorter than the prime range"));
    }
    let mut acc = ComplexKahan::new();
    for i in range {
        acc.add(neg_log_one_minus(phases[i] * shift_factor(table.logp()[i], h)));
    }
    Ok(acc.value())
}

/// Values `log I_l(h(l))` of one ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerLadder {
    pub bound: f64,
    pub b: usize,
    log_i: Vec<Complex64>,
    hpoints: Vec<f64>,
}

impl EulerLadder {
    pub fn from_phases(table: &PrimeTable, phases: &[Complex64], hp: &HPoints, b: usize) -> Result<Self> {
        let bound = hp.bound();
        let n = event_scales(bound, b).min(hp.len());
        let log_i = (0..n)
            .map(|l| log_i_with_phases(table, phases, l, hp.points()[l], bound))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            bound,
            b,
            log_i,
            hpoints: hp.points()[..n].to_vec(),
        })
    }

    /// Ladder of the deterministic products at height `t`.
    pub fn deterministic(table: &PrimeTable, t: f64, hp: &HPoints, b: usize) -> Result<Self> {
        Self::from_phases(table, &deterministic_phases(table, t, hp.bound())?, hp, b)
    }

    /// Ladder from explicit values (tests and constructed cases).
    pub fn from_values(bound: f64, b: usize, log_i: Vec<Complex64>, hpoints: Vec<f64>) -> Self {
        Self {
            bound,
            b,
            log_i,
            hpoints,
        }
    }

    pub fn log_i(&self) -> &[Complex64] {
        &self.log_i
    }

    pub fn hpoints(&self) -> &[f64] {
        &self.hpoints
    }

    /// `sum_{l >= j} log I_l`.
    pub fn suffix(&self, j: usize) -> Complex64 {
        self.log_i[j.min(self.log_i.len())..].iter().copied().collect::<ComplexKahan>().value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOutcome {
    pub holds: bool,
    pub worst_j: usize,
    pub margin: f64,
}

/// The barrier event at one `h`; vacuously true when there are no scales.
pub fn event_g_at_h(ladder: &EulerLadder, sched: &BarrierSchedule) -> EventOutcome {
    let n = sched.n_scales().min(ladder.log_i.len());
    let mut worst = EventOutcome {
        holds: true,
        worst_j: 0,
        margin: f64::INFINITY,
    };
    let mut suffix = Complex64::new(0.0, 0.0);
    for j in (0..n).rev() {
        suffix += ladder.log_i[j];
        let m = sched.margin(j, suffix);
        if m < worst.margin || (m == worst.margin && j < worst.worst_j) {
            worst.margin = m;
            worst.worst_j = j;
        }
    }
    worst.holds = worst.margin >= 0.0;
    worst
}

/// Realized grid values at every scale as `h` ranges over `[-1/2, 1/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderGrid {
    pub mode: LadderMode,
    pub bound: f64,
    spacings: Vec<f64>,
    /// Inclusive index ranges per scale.
    ranges: Vec<(i64, i64)>,
    /// Some `h` in `[-1/2, 1/2]` whose ladder passes through each grid value.
    reps: Vec<Vec<f64>>,
}

impl LadderGrid {
    pub fn new(mode: LadderMode, bound: f64, n_scales: usize) -> Result<Self> {
        let avail = ladder_scales(mode, bound)?;
        if n_scales > avail {
            return Err(Error::param(format!("{n_scales} scales requested, ladder has {avail}")));
        }
        let mut spacings = Vec::with_capacity(n_scales);
        let mut ranges: Vec<(i64, i64)> = Vec::with_capacity(n_scales);
        let mut reps: Vec<Vec<f64>> = Vec::with_capacity(n_scales);
        for j in 0..n_scales {
            let d = grid_spacing(mode, j, bound);
            if j == 0 {
                let r = (floor_index(-0.5, d), floor_index(0.5, d));
                reps.push((r.0..=r.1).map(|n| (n as f64 * d).max(-0.5)).collect());
                ranges.push(r);
            } else {
                let pd = spacings[j - 1];
                let (plo, phi) = ranges[j - 1];
                let r = (floor_index(plo as f64 * pd, d), floor_index(phi as f64 * pd, d));
                let mut rep = vec![f64::NAN; (r.1 - r.0 + 1) as usize];
                for (k, n) in (plo..=phi).enumerate() {
                    let c = (floor_index(n as f64 * pd, d) - r.0) as usize;
                    if rep[c].is_nan() {
                        rep[c] = reps[j - 1][k];
                    }
                }
                reps.push(rep);
                ranges.push(r);
            }
            spacings.push(d);
        }
        Ok(Self {
            mode,
            bound,
            spacings,
            ranges,
            reps,
        })
    }

    pub fn n_scales(&self) -> usize {
        self.spacings.len()
    }

    pub fn spacing(&self, j: usize) -> f64 {
        self.spacings[j]
    }

    pub fn range(&self, j: usize) -> (i64, i64) {
        self.ranges[j]
    }

    pub fn count(&self, j: usize) -> usize {
        (self.ranges[j].1 - self.ranges[j].0 + 1) as usize
    }

    pub fn value(&self, j: usize, n: i64) -> f64 {
        n as f64 * self.spacings[j]
    }

    /// An `h` in `[-1/2, 1/2]` whose ladder has `h(j) = n * spacing(j)`.
    pub fn representative(&self, j: usize, n: i64) -> f64 {
        self.reps[j][(n - self.ranges[j].0) as usize]
    }

    fn child(&self, j: usize, n: i64) -> i64 {
        floor_index(n as f64 * self.spacings[j], self.spacings[j + 1])
    }
}

/// `log I_l` at every realized grid value, with the chained suffix sums.
#[derive(Debug, Clone)]
pub struct LadderValues {
    pub grid: LadderGrid,
    log_i: Vec<Vec<Complex64>>,
    suffix: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllHOutcome {
    pub holds: bool,
    pub worst_j: usize,
    /// Grid value `h(worst_j)`.
    pub worst_point: f64,
    /// An `h` whose ladder passes through the witness.
    pub witness_h: f64,
    pub margin: f64,
    pub points_checked: usize,
}

impl LadderValues {
    pub fn evaluate(table: &PrimeTable, phases: &[Complex64], grid: LadderGrid) -> Result<Self> {
        let bound = grid.bound;
        table.require(bound)?;
        let mut work = 0.0;
        for l in 0..grid.n_scales() {
            work += table.scale_range(l, bound).len() as f64 * grid.count(l) as f64;
        }
        if work > GRID_WORK_BUDGET {
            return Err(Error::Resource {
                what: "ladder grid evaluation".into(),
                estimate: work,
                budget: GRID_WORK_BUDGET,
            });
        }
        let mut log_i = Vec::with_capacity(grid.n_scales());
        for l in 0..grid.n_scales() {
            let range = table.scale_range(l, bound);
            if range.end > phases.len() {
                return Err(Error::param("phase table shorter than the prime range"));
            }
            let (n0, n1) = grid.range(l);
            let d = grid.spacing(l);
            let mut acc = vec![ComplexKahan::new(); (n1 - n0 + 1) as usize];
            for i in range {
                let lp = table.logp()[i];
                let u = phases[i];
                let (s, c) = (d * lp).sin_cos();
                let step = Complex64::new(c, -s);
                let mut z = Complex64::new(0.0, 0.0);
                for (k, slot) in acc.iter_mut().enumerate() {
                    // rotate by e^{-i d ln p}, resynchronizing periodically
                    if k % 32 == 0 {
                        z = u * shift_factor(lp, (n0 + k as i64) as f64 * d);
                    } else {
                        z *= step;
                    }
                    slot.add(neg_log_one_minus(z));
                }
            }
            log_i.push(acc.iter().map(|a| a.value()).collect::<Vec<_>>());
        }
        let mut suffix: Vec<Vec<Complex64>> = vec![Vec::new(); grid.n_scales()];
        for j in (0..grid.n_scales()).rev() {
            let (n0, n1) = grid.range(j);
            suffix[j] = (n0..=n1)
                .map(|n| {
                    let own = log_i[j][(n - n0) as usize];
                    if j + 1 < grid.n_scales() {
                        let c = grid.child(j, n);
                        own + suffix[j + 1][(c - grid.range(j + 1).0) as usize]
                    } else {
                        own
                    }
                })
                .collect();
        }
        Ok(Self { grid, log_i, suffix })
    }

    pub fn log_i_at(&self, j: usize, n: i64) -> Complex64 {
        self.log_i[j][(n - self.grid.range(j).0) as usize]
    }

    pub fn suffix_at(&self, j: usize, n: i64) -> Complex64 {
        self.suffix[j][(n - self.grid.range(j).0) as usize]
    }

    /// Every `(j, grid value)` barrier; the tightest one is the witness.
    pub fn check(&self, sched: &BarrierSchedule) -> AllHOutcome {
        let n = sched.n_scales().min(self.grid.n_scales());
        let mut out = AllHOutcome {
            holds: true,
            worst_j: 0,
            worst_point: 0.0,
            witness_h: 0.0,
            margin: f64::INFINITY,
            points_checked: 0,
        };
        for j in 0..n {
            let (n0, n1) = self.grid.range(j);
            for k in n0..=n1 {
                let m = sched.margin(j, self.suffix_at(j, k));
                out.points_checked += 1;
                if m < out.margin {
                    out.margin = m;
                    out.worst_j = j;
                    out.worst_point = self.grid.value(j, k);
                    out.witness_h = self.grid.representative(j, k);
                }
            }
        }
        out.holds = out.margin >= 0.0;
        out
    }
}

/// Whether the barrier holds for every `|h| <= 1/2` at height `t`.
pub fn event_g_all_h(table: &PrimeTable, t: f64, sched: &BarrierSchedule) -> Result<AllHOutcome> {
    let n = sched.n_scales();
    if n == 0 {
        return Ok(AllHOutcome {
            holds: true,
            worst_j: 0,
            worst_point: 0.0,
            witness_h: 0.0,
            margin: f64::INFINITY,
            points_checked: 0,
        });
    }
    let grid = LadderGrid::new(sched.mode, sched.bound, n)?;
    let phases = deterministic_phases(table, t, sched.bound)?;
    Ok(LadderValues::evaluate(table, &phases, grid)?.check(sched))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{derive_seed, unit_f64};

    #[test]
    fn zero_h_is_on_every_grid() {
        for mode in [LadderMode::Thm1, LadderMode::Thm2] {
            let hp = build_hpoints(0.0, 1e6, 1e8, mode).unwrap();
            assert!(hp.points().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn thm1_example_point() {
        let bound = 100f64.exp();
        let hp = build_hpoints(0.35, bound, 1e300, LadderMode::Thm1).unwrap();
        assert_eq!(hp.index(0), Some(161));
        assert!((hp.at(0).unwrap() - 161.0 / (100.0 * 100f64.ln())).abs() < 1e-15);
        assert!((hp.at(0).unwrap() - 0.349_607).abs() < 1e-6);
    }

    #[test]
    fn hpoints_invariants_on_random_h() {
        let big_t = 1e8;
        for &bound in &[1e3, 1e5, 1e9] {
            for mode in [LadderMode::Thm1, LadderMode::Thm2] {
                for i in 0..1000 {
                    let h = unit_f64(derive_seed(77, i)) - 0.5;
                    let hp = build_hpoints(h, bound, big_t, mode).unwrap();
                    let mut prev = h;
                    for j in 0..hp.len() {
                        let (x, d, n) = (hp.at(j).unwrap(), hp.spacing(j).unwrap(), hp.index(j).unwrap());
                        assert!(x <= prev);
                        assert!(x + d > prev);
                        assert_eq!(x, n as f64 * d);
                        assert!((d - grid_spacing(mode, j, bound)).abs() == 0.0);
                        prev = x;
                    }
                    if mode == LadderMode::Thm2 {
                        assert!((hp.hstar().unwrap() - h).abs() <= 0.5 / big_t.ln() + 1e-15);
                        // spacing bound with explicit constant e/(e-1)
                        let s0 = 1.0 / (bound.ln() * bound.ln().ln().powi(3));
                        let k = std::f64::consts::E / (std::f64::consts::E - 1.0);
                        for l in 0..hp.len() {
                            assert!(h - hp.at(l).unwrap() <= k * (l as f64).exp() * s0 * (1.0 + 1e-12));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn thm2_ladder_covers_every_prime() {
        for &bound in &[20.0, 1e3, 1e5, 1e7] {
            let hp = build_hpoints(0.1, bound, 1e8, LadderMode::Thm2).unwrap();
            assert!(primes::scale_index(2, bound).unwrap() < hp.len());
        }
    }

    #[test]
    fn small_p_rejected() {
        assert!(build_hpoints(0.0, 10.0, 1e8, LadderMode::Thm1).is_err());
        assert!(build_hpoints(0.7, 1e5, 1e8, LadderMode::Thm1).is_err());
    }

    #[test]
    fn schedule_formulas() {
        let bound: f64 = 1e8;
        let llp = bound.ln().ln();
        let s = BarrierSchedule::thm1(bound, 2.0, 0, 0.8).unwrap();
        let want = 2.0 * llp.sqrt().min(5.0) + 2.0 * (llp - 1.0).ln();
        assert!((s.g(1) - want).abs() < 1e-14);
        assert!((s.threshold(1) - (llp - 1.0 + want)).abs() < 1e-14);
        let s = BarrierSchedule::thm2(bound, 0, 1.5).unwrap();
        assert!((s.threshold(2) - (llp - 2.0 + 3.0 * llp.ln() + 1.5)).abs() < 1e-14);
        assert!(BarrierSchedule::thm1(bound, 1.0, 0, 0.5).is_err());
    }

    #[test]
    fn zero_ladder_holds_and_constructed_violation_fails() {
        let bound = 1e6;
        let s = BarrierSchedule::thm1(bound, 1.0, 0, 1.0).unwrap();
        let n = s.n_scales();
        assert!(n >= 1);
        let zero = EulerLadder::from_values(bound, 0, vec![Complex64::new(0.0, 0.0); n], vec![0.0; n]);
        assert!(event_g_at_h(&zero, &s).holds);
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[0] = Complex64::new(bound.ln().ln() + s.g(0) + 1.0, 0.0);
        let bad = EulerLadder::from_values(bound, 0, v, vec![0.0; n]);
        let o = event_g_at_h(&bad, &s);
        assert!(!o.holds);
        assert_eq!(o.worst_j, 0);
        assert!((o.margin + 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_counts_at_scale_zero() {
        for &bound in &[1e3, 1e4, 1e5, 1e6, 1e8] {
            for mode in [LadderMode::Thm1, LadderMode::Thm2] {
                let g = LadderGrid::new(mode, bound, 1).unwrap();
                let c = (1.0 / g.spacing(0)).ceil() as usize;
                assert!(g.count(0) == c || g.count(0) == c + 1, "{bound} {mode}");
            }
        }
    }

    #[test]
    fn grid_representatives_realize_their_points() {
        let bound = 1e5;
        let mode = LadderMode::Thm2;
        let g = LadderGrid::new(mode, bound, ladder_scales(mode, bound).unwrap()).unwrap();
        for j in 0..g.n_scales() {
            let (n0, n1) = g.range(j);
            for n in n0..=n1 {
                let h = g.representative(j, n);
                assert!(h.abs() <= 0.5);
                let hp = build_hpoints(h, bound, 1e10, mode).unwrap();
                assert_eq!(hp.index(j), Some(n));
            }
        }
    }

    #[test]
    fn all_h_event_is_the_conjunction_over_scale_zero_chains() {
        let table = PrimeTable::sieve(100_000).unwrap();
        let bound = 1e5;
        for (mode, sched) in [
            (LadderMode::Thm1, BarrierSchedule::thm1(bound, 0.0, 0, 1.0).unwrap().with_slack(-2.0)),
            (LadderMode::Thm2, BarrierSchedule::thm2(bound, 0, 0.0).unwrap().with_slack(-4.0)),
        ] {
            for i in 0..4 {
                let t = 1e6 * (1.0 + unit_f64(derive_seed(3, i)));
                let all = event_g_all_h(&table, t, &sched).unwrap();
                let grid = LadderGrid::new(mode, bound, sched.n_scales()).unwrap();
                let (n0, n1) = grid.range(0);
                let mut conj = true;
                let mut worst = f64::INFINITY;
                for n in n0..=n1 {
                    let hp = build_hpoints(grid.representative(0, n), bound, 1e6, mode).unwrap();
                    let lad = EulerLadder::deterministic(&table, t, &hp, 0).unwrap();
                    let o = event_g_at_h(&lad, &sched);
                    conj &= o.holds;
                    worst = worst.min(o.margin);
                }
                assert_eq!(all.holds, conj);
                assert!((all.margin - worst).abs() < 1e-8, "{} vs {}", all.margin, worst);
                // witness is re-checkable in isolation
                let hp = build_hpoints(all.witness_h, bound, 1e6, mode).unwrap();
                assert_eq!(hp.at(all.worst_j), Some(all.worst_point));
                let lad = EulerLadder::deterministic(&table, t, &hp, 0).unwrap();
                let m = sched.margin(all.worst_j, lad.suffix(all.worst_j));
                assert!((m - all.margin).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn modulus_event_implies_real_part_event() {
        let table = PrimeTable::sieve(100_000).unwrap();
        let bound = 1e5;
        let modulus = BarrierSchedule::thm2(bound, 0, 0.0).unwrap().with_slack(-4.5);
        let mut real = modulus.clone();
        real.statistic = Statistic::RealPart;
        for i in 0..200 {
            let t = 1e7 * (1.0 + unit_f64(derive_seed(11, i)));
            let hp = build_hpoints(0.0, bound, 1e7, LadderMode::Thm2).unwrap();
            let lad = EulerLadder::deterministic(&table, t, &hp, 0).unwrap();
            let (a, b) = (event_g_at_h(&lad, &modulus), event_g_at_h(&lad, &real));
            assert!(b.margin >= a.margin);
            if a.holds {
                assert!(b.holds);
            }
        }
    }

    #[test]
    fn vacuous_event_without_scales() {
        let table = PrimeTable::sieve(100).unwrap();
        let s = BarrierSchedule::thm1(2.0, 1.0, 0, 1.0).unwrap();
        assert_eq!(s.n_scales(), 0);
        assert!(event_g_all_h(&table, 1e6, &s).unwrap().holds);
    }

    #[test]
    fn ladder_suffix_sums_are_reproducible() {
        let table = PrimeTable::sieve(1_000_000).unwrap();
        let hp = build_hpoints(-0.2, 1e6, 1e8, LadderMode::Thm2).unwrap();
        let lad = EulerLadder::deterministic(&table, 123_456.0, &hp, 0).unwrap();
        for j in 0..lad.log_i().len() {
            let manual: Complex64 = lad.log_i()[j..].iter().sum();
            assert!((lad.suffix(j) - manual).norm() < 1e-12);
        }
    }
}

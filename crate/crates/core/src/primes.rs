//! Prime tables, smooth/rough splitting and the multiscale index `l(p)`.
//!
//! A prime `p <= P` sits at scale `l` when `P^{e^{-(l+1)}} < p <= P^{e^{-l}}`,
//! equivalently `l = floor(ln(ln P / ln p))`. Scale 0 holds the largest primes.

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

/// Largest sieve limit accepted (memory guard).
pub const MAX_SIEVE_LIMIT: u64 = 1 << 40;

/// Default cap on how many integers an enumeration may produce.
pub const DEFAULT_ENUM_BUDGET: usize = 50_000_000;

const SEGMENT: usize = 1 << 18;

/// Immutable table of all primes up to `limit` with cached natural logs.
#[derive(Debug, Clone)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
    logp: Vec<f64>,
}

impl PrimeTable {
    /// Segmented sieve of Eratosthenes.
    pub fn sieve(limit: u64) -> Result<Self> {
        if !(2..=MAX_SIEVE_LIMIT).contains(&limit) {
            return Err(Error::param(format!(
                "sieve limit {limit} outside [2, 2^40]"
            )));
        }
        let primes = segmented_sieve(limit);
        let logp = primes.iter().map(|&p| (p as f64).ln()).collect();
        Ok(Self {
            limit,
            primes,
            logp,
        })
    }

    /// Table covering every prime `<= x` for a real bound `x`.
    pub fn covering(x: f64) -> Result<Self> {
        Self::sieve((x.floor() as u64).max(2))
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn logp(&self) -> &[f64] {
        &self.logp
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// Number of primes `<= x`.
    pub fn count_upto(&self, x: f64) -> usize {
        self.primes.partition_point(|&p| (p as f64) <= x)
    }

    /// Index range of primes `p` with `lo < p <= hi`.
    pub fn range_between(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.primes.partition_point(|&p| (p as f64) <= lo);
        let b = self.primes.partition_point(|&p| (p as f64) <= hi);
        a..b.max(a)
    }

    /// Index range of the primes `p <= P` in scale `l`, using the same
    /// comparisons as [`scale_index`].
    pub fn scale_range(&self, l: usize, bound: f64) -> std::ops::Range<usize> {
        let ln_big = bound.ln();
        let upper = (-(l as f64)).exp() * ln_big;
        let lower = (-(l as f64 + 1.0)).exp() * ln_big;
        let logp = &self.logp[..self.count_upto(bound)];
        let a = logp.partition_point(|&x| x <= lower);
        let b = logp.partition_point(|&x| x <= upper);
        a..b.max(a)
    }

    pub(crate) fn require(&self, x: f64) -> Result<()> {
        if x.floor() > self.limit as f64 {
            return Err(Error::param(format!(
                "prime table limit {} below required {x}",
                self.limit
            )));
        }
        Ok(())
    }

    /// `sum_{p <= P} 1/p`, summed over the sieved primes in ascending order.
    pub fn mertens_sum(&self, bound: f64) -> Result<f64> {
        self.require(bound)?;
        let n = self.count_upto(bound);
        Ok(self.primes[..n]
            .iter()
            .map(|&p| 1.0 / p as f64)
            .collect::<KahanSum>()
            .value())
    }

    /// All prime powers `p^j <= bound` as `(p, j, p^j)`, ordered by prime then exponent.
    pub fn prime_powers(&self, bound: f64) -> Result<Vec<(u64, u32, u64)>> {
        self.require(bound)?;
        let n = self.count_upto(bound);
        let mut out = Vec::new();
        for &p in &self.primes[..n] {
            let mut q = p;
            let mut j = 1;
            while (q as f64) <= bound {
                out.push((p, j, q));
                match q.checked_mul(p) {
                    Some(next) => q = next,
                    None => break,
                }
                j += 1;
            }
        }
        Ok(out)
    }
}

fn simple_sieve(limit: usize) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn segmented_sieve(limit: u64) -> Vec<u64> {
    let root = (limit as f64).sqrt() as u64 + 1;
    let base = simple_sieve(root as usize);
    if limit <= root {
        return base.into_iter().filter(|&p| p <= limit).collect();
    }
    let mut primes: Vec<u64> = base.clone();
    let mut mark = vec![false; SEGMENT];
    let mut low = root + 1;
    while low <= limit {
        let high = (low + SEGMENT as u64 - 1).min(limit);
        let span = (high - low + 1) as usize;
        mark[..span].iter_mut().for_each(|m| *m = false);
        for &p in &base {
            if p * p > high {
                break;
            }
            let mut start = low.div_ceil(p) * p;
            if start < p * p {
                start = p * p;
            }
            let mut k = start;
            while k <= high {
                mark[(k - low) as usize] = true;
                k += p;
            }
        }
        primes.extend(
            mark[..span]
                .iter()
                .enumerate()
                .filter(|(_, &m)| !m)
                .map(|(i, _)| low + i as u64),
        );
        low = high + 1;
    }
    primes
}

/// Split `n = m * r` with `m` P-smooth and `r` P-rough, by trial division.
pub fn smooth_rough_split(n: u64, bound: f64) -> (u64, u64) {
    assert!(n >= 1, "smooth_rough_split needs n >= 1");
    let mut rest = n;
    let mut smooth = 1u64;
    let mut rough = 1u64;
    let mut take = |p: u64, rest: &mut u64| {
        while (*rest).is_multiple_of(p) {
            *rest /= p;
            if (p as f64) <= bound {
                smooth *= p;
            } else {
                rough *= p;
            }
        }
    };
    take(2, &mut rest);
    let mut d = 3u64;
    while d.saturating_mul(d) <= rest {
        take(d, &mut rest);
        d += 2;
    }
    if rest > 1 {
        take(rest, &mut rest);
    }
    (smooth, rough)
}

/// Scale index `l(p)`: the unique `l >= 0` with `P^{e^{-(l+1)}} < p <= P^{e^{-l}}`.
pub fn scale_index(p: u64, bound: f64) -> Result<usize> {
    if p < 2 || (p as f64) > bound {
        return Err(Error::param(format!(
            "scale_index needs 2 <= p <= P, got p = {p}, P = {bound}"
        )));
    }
    let ln_p = (p as f64).ln();
    let ln_big = bound.ln();
    let mut l = (ln_big / ln_p).ln().max(0.0).floor() as i64;
    // the floor can land one off at the boundaries; settle with direct comparisons
    loop {
        let upper = (-(l as f64)).exp() * ln_big;
        let lower = (-(l as f64 + 1.0)).exp() * ln_big;
        if ln_p > upper {
            l -= 1;
        } else if ln_p <= lower {
            l += 1;
        } else {
            break;
        }
        if l < 0 {
            return Ok(0);
        }
    }
    Ok(l as usize)
}

/// Lower and upper prime bounds `(P^{e^{-(l+1)}}, P^{e^{-l}}]` of scale `l`.
pub fn scale_bounds(l: usize, bound: f64) -> (f64, f64) {
    let ln_big = bound.ln();
    (
        ((-(l as f64 + 1.0)).exp() * ln_big).exp(),
        ((-(l as f64)).exp() * ln_big).exp(),
    )
}

/// Every P-smooth integer in `[1, x]`, ascending, built as a product tree over
/// prime powers rather than by filtering.
pub fn enumerate_smooth(table: &PrimeTable, x: f64, bound: f64) -> Result<Vec<u64>> {
    enumerate_smooth_budget(table, x, bound, DEFAULT_ENUM_BUDGET)
}

pub fn enumerate_smooth_budget(
    table: &PrimeTable,
    x: f64,
    bound: f64,
    budget: usize,
) -> Result<Vec<u64>> {
    if x < 1.0 {
        return Ok(Vec::new());
    }
    if bound < 2.0 {
        return Ok(vec![1]);
    }
    let cap = x.floor().min(u64::MAX as f64) as u64;
    let pmax = bound.min(x);
    table.require(pmax)?;
    let primes = &table.primes()[..table.count_upto(pmax)];
    let mut out = vec![1u64];
    // extend by each prime in turn: every smooth number is a product of its
    // prime-power factors, so multiplying the running set by p, p^2, ... is exhaustive
    for &p in primes {
        let current = out.len();
        for i in 0..current {
            let mut v = out[i];
            while let Some(next) = v.checked_mul(p) {
                if next > cap {
                    break;
                }
                out.push(next);
                v = next;
            }
            if out.len() > budget {
                let done = p as f64 / pmax;
                return Err(Error::Resource {
                    what: format!("{}-smooth integers up to {x}", bound),
                    estimate: out.len() as f64 / done.max(1e-9),
                    budget: budget as f64,
                });
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Every P-rough integer in `[1, x]` (including 1), ascending.
pub fn enumerate_rough(table: &PrimeTable, x: f64, bound: f64) -> Result<Vec<u64>> {
    enumerate_rough_budget(table, x, bound, DEFAULT_ENUM_BUDGET)
}

pub fn enumerate_rough_budget(
    table: &PrimeTable,
    x: f64,
    bound: f64,
    budget: usize,
) -> Result<Vec<u64>> {
    if x < 1.0 {
        return Ok(Vec::new());
    }
    let cap = x.floor() as u64;
    if cap as usize > budget {
        return Err(Error::Resource {
            what: format!("{}-rough integers up to {x}", bound),
            estimate: cap as f64,
            budget: budget as f64,
        });
    }
    let pmax = bound.min(x);
    if pmax >= 2.0 {
        table.require(pmax)?;
    }
    let mut keep = vec![true; cap as usize + 1];
    keep[0] = false;
    if pmax >= 2.0 {
        for &p in &table.primes()[..table.count_upto(pmax)] {
            let mut k = p;
            while k <= cap {
                keep[k as usize] = false;
                k += p;
            }
        }
    }
    Ok(keep
        .iter()
        .enumerate()
        .filter(|(_, &k)| k)
        .map(|(i, _)| i as u64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_prime_td(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n.is_multiple_of(d) {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn sieve_small_cases() {
        assert_eq!(PrimeTable::sieve(10).unwrap().primes(), &[2, 3, 5, 7]);
        assert_eq!(PrimeTable::sieve(2).unwrap().primes(), &[2]);
        let t = PrimeTable::sieve(100).unwrap();
        assert_eq!(t.len(), 25);
        assert_eq!(*t.primes().last().unwrap(), 97);
    }

    #[test]
    fn sieve_rejects_out_of_range() {
        assert!(matches!(PrimeTable::sieve(1), Err(Error::Parameter(_))));
        assert!(matches!(
            PrimeTable::sieve(MAX_SIEVE_LIMIT + 1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn segmented_matches_trial_division_across_segments() {
        let limit = 3 * SEGMENT as u64 + 12_345;
        let t = PrimeTable::sieve(limit).unwrap();
        let oracle: Vec<u64> = (2..=limit).filter(|&n| is_prime_td(n)).collect();
        assert_eq!(t.primes(), oracle.as_slice());
        for (p, l) in t.primes().iter().zip(t.logp()) {
            let exact = (*p as f64).ln();
            assert!(((l - exact) / exact).abs() <= 1e-14);
        }
    }

    #[test]
    fn split_examples() {
        assert_eq!(smooth_rough_split(12, 2.0), (4, 3));
        assert_eq!(smooth_rough_split(1, 100.0), (1, 1));
        assert_eq!(smooth_rough_split(210, 5.0), (30, 7));
    }

    #[test]
    fn mertens_examples() {
        let t = PrimeTable::sieve(1_000_000).unwrap();
        assert!((t.mertens_sum(10.0).unwrap() - 247.0 / 210.0).abs() < 1e-15);
        assert_eq!(t.mertens_sum(2.0).unwrap(), 0.5);
        let m = t.mertens_sum(1e6).unwrap() - (1e6f64).ln().ln();
        assert!((m - 0.2615).abs() < 0.01, "{m}");
        assert!(t.mertens_sum(2e6).is_err());
    }

    #[test]
    fn scale_index_examples() {
        assert_eq!(scale_index(97, 97.0).unwrap(), 0);
        assert_eq!(scale_index(2, std::f64::consts::E.exp()).unwrap(), 1);
        assert!(scale_index(11, 10.0).is_err());
    }

    #[test]
    fn scale_index_exhaustive_bracket() {
        let big = 1e5;
        let t = PrimeTable::sieve(100_000).unwrap();
        for &p in t.primes() {
            let l = scale_index(p, big).unwrap();
            let ln_p = (p as f64).ln();
            let ln_big = big.ln();
            assert!(ln_p <= (-(l as f64)).exp() * ln_big);
            assert!(ln_p > (-(l as f64 + 1.0)).exp() * ln_big);
        }
    }

    #[test]
    fn enumerate_smooth_examples() {
        let t = PrimeTable::sieve(100).unwrap();
        assert_eq!(enumerate_smooth(&t, 10.0, 2.0).unwrap(), vec![1, 2, 4, 8]);
        assert_eq!(enumerate_smooth(&t, 1.0, 50.0).unwrap(), vec![1]);
        let fast = enumerate_smooth(&t, 1e4, 7.0).unwrap();
        let brute: Vec<u64> = (1..=10_000u64)
            .filter(|&n| smooth_rough_split(n, 7.0).1 == 1)
            .collect();
        assert_eq!(fast, brute);
    }

    #[test]
    fn enumerate_smooth_budget_error() {
        let t = PrimeTable::sieve(1000).unwrap();
        let err = enumerate_smooth_budget(&t, 1e6, 1000.0, 1000).unwrap_err();
        assert!(matches!(err, Error::Resource { .. }));
    }

    #[test]
    fn smooth_times_rough_reconstructs_interval() {
        let t = PrimeTable::sieve(10_000).unwrap();
        for &bound in &[2.0, 10.0, 100.0] {
            let smooth = enumerate_smooth(&t, 1e4, bound).unwrap();
            let rough = enumerate_rough(&t, 1e4, bound).unwrap();
            let mut hits = vec![0u8; 10_001];
            for &m in &smooth {
                for &r in &rough {
                    if m * r > 10_000 {
                        break;
                    }
                    hits[(m * r) as usize] += 1;
                }
            }
            assert!(hits[1..].iter().all(|&h| h == 1), "P = {bound}");
        }
    }

    #[test]
    fn rough_enumeration_matches_split() {
        let t = PrimeTable::sieve(100).unwrap();
        let rough = enumerate_rough(&t, 5000.0, 30.0).unwrap();
        let brute: Vec<u64> = (1..=5000u64)
            .filter(|&n| smooth_rough_split(n, 30.0).0 == 1)
            .collect();
        assert_eq!(rough, brute);
    }

    #[test]
    fn prime_powers_up_to_bound() {
        let t = PrimeTable::sieve(100).unwrap();
        let pp: Vec<u64> = t.prime_powers(20.0).unwrap().iter().map(|x| x.2).collect();
        assert_eq!(pp, vec![2, 4, 8, 16, 3, 9, 5, 7, 11, 13, 17, 19]);
    }
}

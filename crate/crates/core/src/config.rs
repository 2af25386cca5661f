//! Experiment configuration: `key = value` text, defaults that depend on `T`,
//! and load-time validation.

use crate::dirichlet_poly::{eps_admissible, eps_upper};
use crate::error::{Error, Result};
use crate::ladders::LadderMode;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub big_t: f64,
    pub samples: usize,
    pub bound: f64,
    pub eps: f64,
    pub q_grid: Vec<f64>,
    pub u: f64,
    pub v: f64,
    pub c: f64,
    pub b: usize,
    pub b0: f64,
    pub sigma: f64,
    pub beta: f64,
    pub h_grid_per_invlogt: usize,
    pub seed: u64,
    /// Which set of parameter constraints applies.
    pub mode: LadderMode,
    /// Monte Carlo trials for the random-model and walk experiments.
    pub trials: usize,
    pub u_grid: Vec<f64>,
    pub v_grid: Vec<f64>,
}

/// Values given explicitly; everything else is derived from `T`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub big_t: Option<f64>,
    pub samples: Option<usize>,
    pub bound: Option<f64>,
    pub eps: Option<f64>,
    pub q_grid: Option<Vec<f64>>,
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub c: Option<f64>,
    pub b: Option<usize>,
    pub b0: Option<f64>,
    pub sigma: Option<f64>,
    pub beta: Option<f64>,
    pub h_grid_per_invlogt: Option<usize>,
    pub seed: Option<u64>,
    pub mode: Option<LadderMode>,
    pub trials: Option<usize>,
    pub u_grid: Option<Vec<f64>>,
    pub v_grid: Option<Vec<f64>>,
}

pub const DEFAULT_T: f64 = 1.0e6;
pub const DEFAULT_SEED: u64 = 20_260_101;

pub const KEYS: [&str; 18] = [
    "T",
    "samples",
    "P",
    "eps",
    "q_grid",
    "U",
    "V",
    "C",
    "B",
    "B0",
    "sigma",
    "beta",
    "h_grid_per_invlogT",
    "seed",
    "mode",
    "trials",
    "U_grid",
    "V_grid",
];

/// `1/(log log T)^2`.
pub fn default_eps(big_t: f64) -> f64 {
    let ll = big_t.ln().ln();
    1.0 / (ll * ll)
}

/// `T^{1/(log log T)^8}`, floored at 2.
pub fn default_bound(big_t: f64) -> f64 {
    let ll = big_t.ln().ln();
    (big_t.ln() / ll.powi(8)).exp().max(2.0)
}

/// `e^{-U} (log log T)^6`.
pub fn default_v(big_t: f64, u: f64) -> f64 {
    (-u).exp() * big_t.ln().ln().powi(6)
}

fn parse_list(raw: &str) -> std::result::Result<Vec<f64>, String> {
    let body = raw.trim().trim_start_matches('[').trim_end_matches(']');
    if body.trim().is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}")))
        .collect()
}

fn parse_real(raw: &str) -> std::result::Result<f64, String> {
    raw.parse::<f64>().map_err(|e| format!("expected a real, got {raw:?}: {e}"))
}

fn parse_count(raw: &str) -> std::result::Result<usize, String> {
    // accept "1e4" as well as "10000"
    if let Ok(n) = raw.parse::<usize>() {
        return Ok(n);
    }
    let x = parse_real(raw)?;
    if x >= 0.0 && x.fract() == 0.0 && x < 1e18 {
        Ok(x as usize)
    } else {
        Err(format!("expected a nonnegative integer, got {raw:?}"))
    }
}

impl ConfigOverrides {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut o = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line: line_no, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            let value = value.trim();
            let Some(&canon) = KEYS.iter().find(|k| **k == key) else {
                return Err(err(format!("unknown key {key:?}")));
            };
            if seen.contains(&canon) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            seen.push(canon);
            o.set(canon, value).map_err(err)?;
        }
        Ok(o)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "T" => self.big_t = Some(parse_real(value)?),
            "samples" => self.samples = Some(parse_count(value)?),
            "P" => self.bound = Some(parse_real(value)?),
            "eps" => self.eps = Some(parse_real(value)?),
            "q_grid" => self.q_grid = Some(parse_list(value)?),
            "U" => self.u = Some(parse_real(value)?),
            "V" => self.v = Some(parse_real(value)?),
            "C" => self.c = Some(parse_real(value)?),
            "B" => self.b = Some(parse_count(value)?),
            "B0" => self.b0 = Some(parse_real(value)?),
            "sigma" => self.sigma = Some(parse_real(value)?),
            "beta" => self.beta = Some(parse_real(value)?),
            "h_grid_per_invlogT" => self.h_grid_per_invlogt = Some(parse_count(value)?),
            "seed" => {
                self.seed = Some(
                    value
                        .parse::<u64>()
                        .map_err(|e| format!("expected a 64-bit unsigned seed, got {value:?}: {e}"))?,
                )
            }
            "mode" => self.mode = Some(value.parse::<LadderMode>().map_err(|e| e.to_string())?),
            "trials" => self.trials = Some(parse_count(value)?),
            "U_grid" => self.u_grid = Some(parse_list(value)?),
            "V_grid" => self.v_grid = Some(parse_list(value)?),
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Fills defaults and validates.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let big_t = self.big_t.unwrap_or(DEFAULT_T);
        if !(big_t >= 1.0e3 && big_t.is_finite()) {
            return Err(Error::param(format!("T = {big_t} must be at least 1e3")));
        }
        let u = self.u.unwrap_or(0.0);
        let mut defaulted = Vec::new();
        macro_rules! pick {
            ($field:ident, $name:expr, $default:expr) => {
                match &self.$field {
                    Some(v) => v.clone(),
                    None => {
                        let d = $default;
                        defaulted.push(format!("{} = {:?}", $name, d));
                        d
                    }
                }
            };
        }
        let cfg = ExperimentConfig {
            big_t,
            samples: pick!(samples, "samples", 1000usize),
            bound: pick!(bound, "P", default_bound(big_t)),
            eps: pick!(eps, "eps", default_eps(big_t)),
            q_grid: pick!(q_grid, "q_grid", vec![0.0, 0.25, 0.5, 2.0 / 3.0, 0.75, 1.0]),
            u,
            v: pick!(v, "V", default_v(big_t, u)),
            c: pick!(c, "C", 1.0),
            b: pick!(b, "B", 0usize),
            b0: pick!(b0, "B0", 8.0),
            sigma: pick!(sigma, "sigma", 0.5),
            beta: pick!(beta, "beta", 1.0),
            h_grid_per_invlogt: pick!(h_grid_per_invlogt, "h_grid_per_invlogT", 8usize),
            seed: pick!(seed, "seed", DEFAULT_SEED),
            mode: pick!(mode, "mode", LadderMode::Thm1),
            trials: pick!(trials, "trials", 1000usize),
            u_grid: pick!(u_grid, "U_grid", vec![0.0, 1.0, 2.0, 3.0]),
            v_grid: pick!(v_grid, "V_grid", vec![1.0, 4.0, 16.0]),
        };
        for d in &defaulted {
            log::info!("default {d}");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn defaults() -> Self {
        ConfigOverrides::default()
            .resolve()
            .expect("built-in defaults are valid")
    }

    pub fn log_t(&self) -> f64 {
        self.big_t.ln()
    }

    pub fn validate(&self) -> Result<()> {
        let log_t = self.log_t();
        let bad = |m: String| Err(Error::param(m));
        if !(self.bound >= 2.0 && self.bound <= self.big_t.sqrt()) {
            return bad(format!("P = {} outside [2, sqrt T]", self.bound));
        }
        let upper = eps_upper(self.big_t);
        if !(self.eps > 1.0 / log_t && eps_admissible(self.big_t, self.eps)) {
            return bad(format!("eps = {} outside (1/log T, {upper:.6})", self.eps));
        }
        let log_p = self.bound.ln();
        let llp = log_p.ln();
        if llp > 0.0 {
            let (need, what) = match self.mode {
                LadderMode::Thm1 => (log_p * llp.ln().max(0.0) / log_t, "log P log log log P / log T"),
                LadderMode::Thm2 => (20.0 * log_p * llp / log_t, "20 log P log log P / log T"),
            };
            if !(self.eps > need) {
                return bad(format!("eps = {} must exceed {what} = {need:.6}", self.eps));
            }
        }
        if !(self.u >= 0.0) {
            return bad(format!("U = {} must be >= 0", self.u));
        }
        if llp > 0.0 && self.mode == LadderMode::Thm2 && self.u > 2.0 * llp {
            return bad(format!("U = {} exceeds 2 log log P = {:.4}", self.u, 2.0 * llp));
        }
        if !(self.v >= (-self.u).exp() * (1.0 - 1e-12)) {
            return bad(format!("V = {} below e^(-U)", self.v));
        }
        if !(self.c >= 0.0) {
            return bad("C must be >= 0".into());
        }
        if !(self.b0 > 0.0) {
            return bad("B0 must be > 0".into());
        }
        if (self.sigma - 0.5).abs() > 1.0 / log_t + 1e-15 {
            return bad(format!("sigma = {} not within 1/log T of 1/2", self.sigma));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta = {} must be >= 0", self.beta));
        }
        if self.h_grid_per_invlogt == 0 {
            return bad("h_grid_per_invlogT must be >= 1".into());
        }
        if self.q_grid.is_empty() || self.q_grid.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return bad("q_grid must be a nonempty list in [0, 1]".into());
        }
        if self.u_grid.iter().any(|u| !(*u >= 0.0)) {
            return bad("U_grid entries must be >= 0".into());
        }
        if self.v_grid.iter().any(|v| !(*v > 0.0)) {
            return bad("V_grid entries must be > 0".into());
        }
        Ok(())
    }

    /// One `key = value` line per key, in fixed order, with round-trip floats.
    pub fn canonical(&self) -> String {
        let list = |xs: &[f64]| xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "T = {:?}", self.big_t);
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "P = {:?}", self.bound);
        let _ = writeln!(s, "eps = {:?}", self.eps);
        let _ = writeln!(s, "q_grid = {}", list(&self.q_grid));
        let _ = writeln!(s, "U = {:?}", self.u);
        let _ = writeln!(s, "V = {:?}", self.v);
        let _ = writeln!(s, "C = {:?}", self.c);
        let _ = writeln!(s, "B = {}", self.b);
        let _ = writeln!(s, "B0 = {:?}", self.b0);
        let _ = writeln!(s, "sigma = {:?}", self.sigma);
        let _ = writeln!(s, "beta = {:?}", self.beta);
        let _ = writeln!(s, "h_grid_per_invlogT = {}", self.h_grid_per_invlogt);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "mode = {}", self.mode);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "U_grid = {}", list(&self.u_grid));
        let _ = writeln!(s, "V_grid = {}", list(&self.v_grid));
        s
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

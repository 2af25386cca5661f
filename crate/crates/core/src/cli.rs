//! Command-line front end: config loading, subcommand dispatch and CSV output
//! behind a `#` metadata header. Sweeps flush every record and can resume.

use crate::ballot::DEFAULT_VARIANCE;
use crate::checks;
use crate::config::{ConfigOverrides, ExperimentConfig};
use crate::dirichlet_poly::poly_edit_discrepancy;
use crate::error::{Error, Result};
use crate::partition::{self, fhk_residuals, tail_fraction, ResidualStats, RestrictionMode, SweepContext, SweepRecord};
use crate::primes::PrimeTable;
use crate::random_model::{barrier_failure_rates, moments_of_moments_mc, moments_shape};
use chrono::{SecondsFormat, Utc};
use clap::Parser;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Last row of a sweep that stopped early.
pub const TRUNCATED: &str = "TRUNCATED";

pub const SWEEP_COLUMNS: [&str; 8] = [
    "index",
    "t",
    "partition_integral",
    "local_max",
    "argmax_h",
    "event_g",
    "event_g_tilde",
    "smooth_modulus_at_argmax",
];

pub const BALLOT_COLUMNS: [&str; 8] = ["n", "a", "b", "p_mc", "se", "p_dp", "bound", "ratio"];

/// Tail levels reported by `partition-sweep`.
pub const TAIL_LAMBDAS: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

/// Number of heights checked by `zeta-eval`.
pub const ZETA_EVAL_POINTS: usize = 100;
pub const MEAN_VALUE_INSTANCES: usize = 50;
pub const BOX_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Sieve,
    ZetaEval,
    PartitionSweep,
    MaxSweep,
    RandomMoments,
    BarrierFreq,
    Ballot,
    ApproxCheck,
    MeanValue,
    HighMoment,
    PolyEdit,
    FourthMoment,
    CauchyBox,
    RestrictedMean,
}

impl Command {
    pub const ALL: [Command; 14] = [
        Command::Sieve,
        Command::ZetaEval,
        Command::PartitionSweep,
        Command::MaxSweep,
        Command::RandomMoments,
        Command::BarrierFreq,
        Command::Ballot,
        Command::ApproxCheck,
        Command::MeanValue,
        Command::HighMoment,
        Command::PolyEdit,
        Command::FourthMoment,
        Command::CauchyBox,
        Command::RestrictedMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Sieve => "sieve",
            Command::ZetaEval => "zeta-eval",
            Command::PartitionSweep => "partition-sweep",
            Command::MaxSweep => "max-sweep",
            Command::RandomMoments => "random-moments",
            Command::BarrierFreq => "barrier-freq",
            Command::Ballot => "ballot",
            Command::ApproxCheck => "approx-check",
            Command::MeanValue => "lemma-check:mean-value",
            Command::HighMoment => "lemma-check:high-moment",
            Command::PolyEdit => "lemma-check:poly-edit",
            Command::FourthMoment => "lemma-check:fourth-moment",
            Command::CauchyBox => "cauchy-box",
            Command::RestrictedMean => "restricted-mean",
        }
    }

    /// Experiment tag written to every header.
    pub fn experiment(self) -> &'static str {
        match self {
            Command::Sieve => "prime-reciprocal-sums",
            Command::ZetaEval => "critical-line-evaluation",
            Command::PartitionSweep => "short-interval-partition-function",
            Command::MaxSweep => "short-interval-maximum",
            Command::RandomMoments => "random-model-moments",
            Command::BarrierFreq => "random-barrier-frequency",
            Command::Ballot => "gaussian-walk-barrier",
            Command::ApproxCheck => "smoothed-indicator-approximant",
            Command::MeanValue => "dirichlet-mean-value",
            Command::HighMoment => "prime-polynomial-moments",
            Command::PolyEdit => "smooth-rough-factorization",
            Command::FourthMoment => "restricted-fourth-moment",
            Command::CauchyBox => "contour-reconstruction",
            Command::RestrictedMean => "restricted-partition-mean",
        }
    }

    /// Output file stem, the name with `:` replaced by `-`.
    pub fn file_stem(self) -> String {
        self.name().replace(':', "-")
    }

    pub fn is_sweep(self) -> bool {
        matches!(self, Command::PartitionSweep | Command::MaxSweep)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Command::ALL.iter().copied().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
            format!("unknown command `{s}` (expected one of: {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "zeta-lab", version, about = "Numerical experiments on zeta and its random model")]
pub struct Cli {
    /// sieve, zeta-eval, partition-sweep, max-sweep, random-moments, barrier-freq,
    /// ballot, approx-check, lemma-check:{mean-value,high-moment,poly-edit,fourth-moment},
    /// cauchy-box or restricted-mean
    pub command: Command,
    /// `key = value` experiment config; defaults throughout when omitted
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads
    #[arg(long, env = "ZEL_THREADS")]
    pub threads: Option<usize>,
    /// Continue an interrupted sweep in the output directory
    #[arg(long)]
    pub resume: bool,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    read_overrides(path)?.resolve()
}

fn read_overrides(path: &Path) -> Result<ConfigOverrides> {
    let text = fs::read_to_string(path).map_err(|e| Error::param(format!("{}: {e}", path.display())))?;
    ConfigOverrides::parse(&text)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut ov = match &cli.config {
        Some(p) => read_overrides(p)?,
        None => ConfigOverrides::default(),
    };
    if cli.seed.is_some() {
        ov.seed = cli.seed;
    }
    ov.resolve()
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: Command,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub started: String,
    pub finished: Option<String>,
    pub outputs: Vec<PathBuf>,
    /// Canonical config text.
    pub params: String,
}

impl RunManifest {
    pub fn new(command: Command, cfg: &ExperimentConfig) -> Self {
        Self {
            command,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: now(),
            finished: None,
            outputs: Vec::new(),
            params: cfg.canonical(),
        }
    }

    /// `#` lines opening every CSV file.
    pub fn header(&self) -> String {
        let mut s = format!(
            "# zeta-lab {}\n# command = {}\n# experiment = {}\n# config_hash = {}\n# seed = {}\n# started = {}\n",
            self.tool_version,
            self.command,
            self.command.experiment(),
            self.config_hash,
            self.seed,
            self.started
        );
        for line in self.params.lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let outputs: Vec<String> = self.outputs.iter().map(|p| p.display().to_string()).collect();
        format!(
            "command = {}\nconfig_hash = {}\nseed = {}\ntool_version = {}\nstarted = {}\nfinished = {}\noutputs = {}\n",
            self.command,
            self.config_hash,
            self.seed,
            self.tool_version,
            self.started,
            self.finished.as_deref().unwrap_or(""),
            outputs.join(", ")
        )
    }

    pub fn path(&self, out_dir: &Path) -> PathBuf {
        out_dir.join(format!("{}.manifest", self.command.file_stem()))
    }
}

/// Header value `# key = value`, if present.
pub fn header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# ")?.strip_prefix(key)?.strip_prefix(" = "))
}

fn f(x: f64) -> String {
    format!("{x:?}")
}

struct Output {
    suffix: &'static str,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Output {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            suffix: "",
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }
}

fn csv_writer(file: File) -> csv::Writer<File> {
    csv::WriterBuilder::new().flexible(true).has_headers(false).from_writer(file)
}

fn write_output(out_dir: &Path, manifest: &mut RunManifest, out: &Output) -> Result<()> {
    let path = out_dir.join(format!("{}{}.csv", manifest.command.file_stem(), out.suffix));
    let mut file = File::create(&path)?;
    file.write_all(manifest.header().as_bytes())?;
    let mut w = csv_writer(file);
    w.write_record(&out.columns)?;
    for row in &out.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    manifest.outputs.push(path);
    Ok(())
}

pub fn run(cli: &Cli) -> i32 {
    run_until(cli, &AtomicBool::new(false))
}

/// As [`run`]; a sweep stops at the next record once `stop` is set, leaving
/// a [`TRUNCATED`] row.
pub fn run_until(cli: &Cli, stop: &AtomicBool) -> i32 {
    match execute(cli, stop) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            log::warn!("{}: checks failed", cli.command);
            EXIT_CHECK_FAILED
        }
        Err(e) => {
            eprintln!("zeta-lab {}: {e}", cli.command);
            EXIT_ERROR
        }
    }
}

fn execute(cli: &Cli, stop: &AtomicBool) -> Result<bool> {
    let cfg = load_config(cli)?;
    fs::create_dir_all(&cli.out)?;
    let mut manifest = RunManifest::new(cli.command, &cfg);
    let pass = match cli.threads {
        Some(0) => return Err(Error::param("--threads must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::param(e.to_string()))?
            .install(|| dispatch(cli, &cfg, &mut manifest, stop))?,
        None => dispatch(cli, &cfg, &mut manifest, stop)?,
    };
    manifest.finished = Some(now());
    fs::write(manifest.path(&cli.out), manifest.to_text())?;
    Ok(pass)
}

fn dispatch(cli: &Cli, cfg: &ExperimentConfig, manifest: &mut RunManifest, stop: &AtomicBool) -> Result<bool> {
    let (outputs, pass) = match cli.command {
        Command::PartitionSweep | Command::MaxSweep => return run_sweep(cli, cfg, manifest, stop),
        Command::Sieve => sieve(cfg)?,
        Command::ZetaEval => zeta_eval(cfg)?,
        Command::RandomMoments => random_moments(cfg)?,
        Command::BarrierFreq => barrier_freq(cfg)?,
        Command::Ballot => ballot(cfg)?,
        Command::ApproxCheck => approx_check()?,
        Command::MeanValue => mean_value(cfg)?,
        Command::HighMoment => high_moment(cfg)?,
        Command::PolyEdit => poly_edit(cfg)?,
        Command::FourthMoment => fourth_moment(cfg)?,
        Command::CauchyBox => cauchy_box(cfg)?,
        Command::RestrictedMean => restricted_mean(cfg)?,
    };
    for out in &outputs {
        write_output(&cli.out, manifest, out)?;
    }
    Ok(pass)
}

type Outcome = (Vec<Output>, bool);

fn sieve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Output::new(&["x", "pi_x", "sum_inv_p", "loglog", "residual"]);
    for r in checks::sieve_rows(cfg.bound.max(1e7))? {
        out.rows.push(vec![f(r.x), r.pi_x.to_string(), f(r.sum_inv_p), f(r.loglog), f(r.residual)]);
    }
    Ok((vec![out], true))
}

fn zeta_eval(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rows = checks::zeta_eval_suite(cfg.big_t, ZETA_EVAL_POINTS)?;
    let mut out = Output::new(&[
        "t",
        "afe_re",
        "afe_im",
        "oracle_re",
        "oracle_im",
        "abs_err",
        "scaled_err",
        "chi_err",
        "pass",
    ]);
    for r in &rows {
        out.rows.push(vec![
            f(r.t),
            f(r.afe.re),
            f(r.afe.im),
            f(r.oracle.re),
            f(r.oracle.im),
            f(r.abs_err),
            f(r.scaled_err),
            f(r.chi_err),
            r.pass.to_string(),
        ]);
    }
    Ok((vec![out], rows.iter().all(|r| r.pass)))
}

fn random_moments(cfg: &ExperimentConfig) -> Result<Outcome> {
    let table = PrimeTable::covering(cfg.bound)?;
    let rows = moments_of_moments_mc(&table, cfg.bound, &cfg.q_grid, cfg.trials, cfg.seed)?;
    let mut out = Output::new(&["q", "estimate", "std_err", "shape"]);
    for r in rows {
        out.rows.push(vec![f(r.q), f(r.estimate), f(r.std_err), f(moments_shape(cfg.bound, r.q))]);
    }
    Ok((vec![out], true))
}

fn barrier_freq(cfg: &ExperimentConfig) -> Result<Outcome> {
    let table = PrimeTable::covering(cfg.bound)?;
    let rows = barrier_failure_rates(&table, cfg.bound, &cfg.u_grid, cfg.mode, cfg.c, cfg.b, cfg.trials, cfg.seed, false)?;
    let mut out = Output::new(&["U", "rate", "std_err"]);
    for r in rows {
        out.rows.push(vec![f(r.u), f(r.rate), f(r.std_err)]);
    }
    Ok((vec![out], true))
}

fn ballot(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rows = checks::ballot_suite(DEFAULT_VARIANCE, cfg.trials, cfg.seed)?;
    let mut out = Output::new(&BALLOT_COLUMNS);
    for (r, _) in &rows {
        out.rows.push(vec![
            r.n.to_string(),
            f(r.a),
            f(r.b),
            f(r.p_mc),
            f(r.se),
            f(r.p_dp),
            f(r.bound),
            f(r.ratio),
        ]);
    }
    Ok((vec![out], rows.iter().all(|(_, ok)| *ok)))
}

fn approx_check() -> Result<Outcome> {
    let rows = checks::approx_suite()?;
    let mut out = Output::new(&["R", "delta", "check", "value", "limit", "pass"]);
    for r in &rows {
        out.rows.push(vec![f(r.r), f(r.delta), r.check.clone(), f(r.value), f(r.limit), r.pass.to_string()]);
    }
    Ok((vec![out], rows.iter().all(|r| r.pass)))
}

fn mean_value(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rows = checks::mean_value_suite(MEAN_VALUE_INSTANCES, cfg.seed)?;
    let mut out = Output::new(&[
        "instance",
        "kind",
        "x",
        "T",
        "H",
        "lhs_re",
        "lhs_im",
        "diagonal_re",
        "diagonal_im",
        "deviation",
        "bound",
        "oracle_err",
        "pass",
    ]);
    for r in &rows {
        out.rows.push(vec![
            r.instance.to_string(),
            r.kind.to_string(),
            r.x.to_string(),
            f(r.big_t),
            f(r.big_h),
            f(r.lhs.re),
            f(r.lhs.im),
            f(r.rhs_main.re),
            f(r.rhs_main.im),
            f(r.deviation),
            f(r.bound),
            f(r.oracle_err),
            r.pass.to_string(),
        ]);
    }
    Ok((vec![out], rows.iter().all(|r| r.pass)))
}

fn high_moment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let big_t = cfg.big_t.max(checks::HIGH_MOMENT_MIN_T);
    if big_t > cfg.big_t {
        log::info!("high moments evaluated at T = {big_t:e}");
    }
    let rows = checks::high_moment_suite(big_t, cfg.samples, cfg.seed)?;
    let mut out = Output::new(&["spec", "k", "T", "moment", "std_err", "bound", "ratio", "orthogonal", "pass"]);
    for r in &rows {
        out.rows.push(vec![
            r.spec.to_string(),
            r.k.to_string(),
            f(big_t),
            f(r.moment),
            f(r.std_err),
            f(r.bound),
            f(r.ratio),
            r.orthogonal.map(f).unwrap_or_default(),
            r.pass.to_string(),
        ]);
    }
    Ok((vec![out], rows.iter().all(|r| r.pass)))
}

fn poly_edit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let table = PrimeTable::covering(cfg.bound)?;
    let r = poly_edit_discrepancy(&table, cfg.big_t, cfg.eps, cfg.bound, cfg.sigma, cfg.samples, cfg.seed)?;
    let pass = r.ratio <= checks::POLY_EDIT_CONSTANT;
    let mut out = Output::new(&["estimate", "std_err", "bound", "ratio", "pass"]);
    out.rows.push(vec![f(r.estimate), f(r.std_err), f(r.bound), f(r.ratio), pass.to_string()]);
    Ok((vec![out], pass))
}

fn fourth_moment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let table = PrimeTable::covering(cfg.bound)?;
    let (rows, monotone) = checks::fourth_moment_suite(
        &table,
        cfg.big_t,
        cfg.eps,
        cfg.bound,
        &cfg.v_grid,
        cfg.sigma,
        cfg.samples,
        cfg.seed,
    )?;
    if !monotone {
        log::warn!("restricted fourth moment increases with V");
    }
    let mut out = Output::new(&["V", "estimate", "std_err", "bound", "ratio", "pass"]);
    for r in &rows {
        out.rows.push(vec![f(r.v), f(r.estimate), f(r.std_err), f(r.bound), f(r.ratio), r.pass.to_string()]);
    }
    Ok((vec![out], monotone && rows.iter().all(|r| r.pass)))
}

fn cauchy_box(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rows = checks::cauchy_box_suite(cfg.big_t, BOX_POINTS, cfg.seed)?;
    let mut out = Output::new(&[
        "t",
        "h",
        "hstar",
        "direct_re",
        "direct_im",
        "boxed_re",
        "boxed_im",
        "abs_err",
        "err_estimate",
        "tolerance",
        "pass",
    ]);
    for r in &rows {
        let b = &r.report;
        out.rows.push(vec![
            f(r.t),
            f(r.h),
            f(b.hstar),
            f(b.direct.re),
            f(b.direct.im),
            f(b.boxed.re),
            f(b.boxed.im),
            f(b.abs_err),
            f(b.err_estimate),
            f(r.tolerance),
            r.pass.to_string(),
        ]);
    }
    Ok((vec![out], rows.iter().all(|r| r.pass)))
}

fn restricted_mean(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Output::new(&[
        "mode",
        "q",
        "estimate",
        "std_err",
        "bound",
        "ratio",
        "event_rate",
        "orthogonal_scale",
    ]);
    for (name, mode) in [("kp1", RestrictionMode::Kp1), ("kp4", RestrictionMode::Kp4)] {
        for r in partition::restricted_partition_mean(cfg, mode, false)? {
            out.rows.push(vec![
                name.to_string(),
                f(r.q),
                f(r.estimate),
                f(r.std_err),
                f(r.bound),
                f(r.ratio),
                f(r.event_rate),
                f(r.orthogonal_scale),
            ]);
        }
    }
    Ok((vec![out], true))
}

fn record_fields(r: &SweepRecord) -> [String; 8] {
    [
        r.index.to_string(),
        f(r.t),
        f(r.partition_integral),
        f(r.local_max),
        f(r.argmax_h),
        r.event_g.to_string(),
        r.event_g_tilde.to_string(),
        f(r.smooth_modulus_at_argmax),
    ]
}

/// Cut a sweep file back to its last complete record and return how many
/// records it keeps. The file must come from the same command and config.
pub fn prepare_resume(path: &Path, manifest: &RunManifest) -> Result<usize> {
    let text = fs::read_to_string(path)?;
    let bad = |msg: String| Error::param(format!("cannot resume {}: {msg}", path.display()));
    match header_value(&text, "config_hash") {
        Some(h) if h == manifest.config_hash => {}
        Some(h) => return Err(bad(format!("config hash {h} differs from {}", manifest.config_hash))),
        None => return Err(bad("no config hash in header".into())),
    }
    if header_value(&text, "command") != Some(manifest.command.name()) {
        return Err(bad("written by a different command".into()));
    }
    let mut lines = text.split_inclusive('\n');
    let mut kept = String::new();
    for line in lines.by_ref() {
        kept.push_str(line);
        if !line.starts_with('#') {
            if line.trim_end() != SWEEP_COLUMNS.join(",") {
                return Err(bad("unexpected column row".into()));
            }
            break;
        }
    }
    let mut count = 0;
    for line in lines {
        let body = line.trim_end();
        if !line.ends_with('\n') || body == TRUNCATED {
            break;
        }
        let index = body.split(',').next().and_then(|s| s.parse::<usize>().ok());
        if index != Some(count) {
            return Err(bad(format!("record {} is out of order", count + 1)));
        }
        kept.push_str(line);
        count += 1;
    }
    let tmp = path.with_extension("csv.tmp");
    fs::write(&tmp, kept)?;
    fs::rename(&tmp, path)?;
    Ok(count)
}

/// Records of a sweep file, ignoring a trailing [`TRUNCATED`] row.
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.get(0) == Some(TRUNCATED) {
            break;
        }
        let field = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| Error::param(format!("{}: short record {}", path.display(), out.len())))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .parse::<f64>()
                .map_err(|e| Error::param(format!("{}: {e}", path.display())))
        };
        let flag = |i: usize| -> Result<bool> {
            field(i)?
                .parse::<bool>()
                .map_err(|e| Error::param(format!("{}: {e}", path.display())))
        };
        out.push(SweepRecord {
            index: field(0)?
                .parse()
                .map_err(|e| Error::param(format!("{}: {e}", path.display())))?,
            t: num(1)?,
            partition_integral: num(2)?,
            local_max: num(3)?,
            argmax_h: num(4)?,
            event_g: flag(5)?,
            event_g_tilde: flag(6)?,
            smooth_modulus_at_argmax: num(7)?,
        });
    }
    Ok(out)
}

fn run_sweep(cli: &Cli, cfg: &ExperimentConfig, manifest: &mut RunManifest, stop: &AtomicBool) -> Result<bool> {
    let path = cli.out.join(format!("{}.csv", manifest.command.file_stem()));
    let start = if cli.resume && path.exists() {
        let n = prepare_resume(&path, manifest)?;
        log::info!("resuming {} after {n} records", path.display());
        n
    } else {
        let mut file = File::create(&path)?;
        file.write_all(manifest.header().as_bytes())?;
        writeln!(file, "{}", SWEEP_COLUMNS.join(","))?;
        0
    };
    let ctx = SweepContext::new(cfg)?;
    let mut w = csv_writer(OpenOptions::new().append(true).open(&path)?);
    let res = partition::sweep_with(&ctx, start, |r| {
        if stop.load(Ordering::SeqCst) {
            return Err(Error::Interrupted);
        }
        w.write_record(record_fields(r))?;
        w.flush()?;
        Ok(())
    });
    if let Err(e) = res {
        w.write_record([TRUNCATED])?;
        w.flush()?;
        return Err(e);
    }
    drop(w);
    manifest.outputs.push(path.clone());
    let records = read_records(&path)?;
    let summary = match manifest.command {
        Command::PartitionSweep => tail_summary(&records, cfg.big_t)?,
        _ => max_summary(&records, cfg.big_t)?,
    };
    write_output(&cli.out, manifest, &summary.0)?;
    Ok(summary.1)
}

fn tail_summary(records: &[SweepRecord], big_t: f64) -> Result<(Output, bool)> {
    let mut out = Output::new(&["lambda", "tail_fraction", "lambda_times_fraction", "pass"]);
    out.suffix = ".summary";
    let mut pass = true;
    let mut prev = f64::INFINITY;
    for lambda in TAIL_LAMBDAS {
        let frac = tail_fraction(records, lambda, big_t)?;
        let ok = lambda * frac <= checks::TAIL_CONSTANT && frac <= prev;
        pass &= ok;
        prev = frac;
        out.rows.push(vec![f(lambda), f(frac), f(lambda * frac), ok.to_string()]);
    }
    Ok((out, pass))
}

/// Fraction of records with `log max |zeta| <= log log T + MAX_SLACK`.
pub fn below_slack_fraction(records: &[SweepRecord], big_t: f64) -> f64 {
    let cut = big_t.ln().ln() + checks::MAX_SLACK;
    records.iter().filter(|r| r.local_max.ln() <= cut).count() as f64 / records.len().max(1) as f64
}

fn max_summary(records: &[SweepRecord], big_t: f64) -> Result<(Output, bool)> {
    let mut out = Output::new(&["statistic", "value"]);
    out.suffix = ".summary";
    let frac = below_slack_fraction(records, big_t);
    out.rows.push(vec!["below_slack_fraction".into(), f(frac)]);
    let res = fhk_residuals(records, big_t)?;
    let mut push = |name: &str, s: &ResidualStats| {
        for (k, v) in [
            ("centering", s.centering),
            ("mean", s.mean),
            ("median", s.median),
            ("q05", s.q05),
            ("q25", s.q25),
            ("q75", s.q75),
            ("q95", s.q95),
        ] {
            out.rows.push(vec![format!("{name}_{k}"), f(v)]);
        }
        out.rows.push(vec![format!("{name}_n"), s.n.to_string()]);
    };
    push("three_quarters", &res.three_quarters);
    push("one_quarter", &res.one_quarter);
    Ok((out, frac >= 0.95))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert_eq!(Command::MeanValue.file_stem(), "lemma-check-mean-value");
        assert!("lemma-check".parse::<Command>().is_err());
    }

    #[test]
    fn header_carries_hash_and_params() {
        let cfg = ExperimentConfig::defaults();
        let m = RunManifest::new(Command::Ballot, &cfg);
        let h = m.header();
        assert_eq!(header_value(&h, "config_hash"), Some(cfg.hash().as_str()));
        assert_eq!(header_value(&h, "experiment"), Some("gaussian-walk-barrier"));
        assert_eq!(header_value(&h, "T"), Some("1000000.0"));
        assert!(h.lines().all(|l| l.starts_with("# ")));
    }

    #[test]
    fn cli_flags_parse() {
        let cli = Cli::try_parse_from(["zeta-lab", "lemma-check:poly-edit", "--seed", "9", "--resume"]).unwrap();
        assert_eq!(cli.command, Command::PolyEdit);
        assert_eq!(cli.seed, Some(9));
        assert!(cli.resume);
        assert!(Cli::try_parse_from(["zeta-lab", "nope"]).is_err());
    }

    #[test]
    fn seed_flag_overrides_config() {
        let cli = Cli::try_parse_from(["zeta-lab", "sieve", "--seed", "77"]).unwrap();
        let cfg = load_config(&cli).unwrap();
        assert_eq!(cfg.seed, 77);
        assert_ne!(cfg.hash(), ExperimentConfig::defaults().hash());
    }
}

//! The `gl3kuz` command line: one subcommand per computable object, the
//! verification suites, parameter sweeps, a TOML configuration file and an
//! append-only result cache.
//!
//! Exit codes: 0 success, 1 failed verification or non-convergence, 2 usage
//! error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::kernels::{k_w4, k_w6, whittaker_w_at, KernelSettings, Representation};
use crate::kloosterman::{hat_s, hat_s_literal, s_long, s_tilde, HatParams, W4Params, W6Params};
use crate::kuznetsov::{arithmetic_side, Caps, KuznetsovRequest};
use crate::lfunction::{
    analytic_conductor, archimedean_factor, convexity_benchmark, eigenvalue_at, hecke_multiplicativity_check,
    hecke_relation_residual, SatakeParams,
};
use crate::phase::{calibration_regions, phase_g, phase_g1, phase_g1_t1, phase_g1_t2, phase_g2, phase_g2_t2, phase_h, stationary_point, sublemma_check, PhaseParams, PhasePoint};
use crate::quad::BumpSpec;
use crate::transforms::{kfull, ktilde, phi_w4, phi_w5, phi_w6, DualVars, TestFunctionSpec};
use crate::verify::{run_suite_with, Check, Suite, VerifyOptions, VerifyReport};
use crate::{Error, QuadResult, QuadratureSettings, SpectralPoint, C64};

pub const RECORD_SCHEMA_VERSION: u32 = 1;
pub const CACHE_ENV: &str = "GL3KUZ_CACHE";
pub const DEFAULT_CONFIG: &str = "gl3kuz.toml";

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
    pub max_height: f64,
    pub max_nodes: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let q = QuadratureSettings::default();
        Self { abs: q.abs_tol, rel: q.rel_tol, max_height: q.max_height, max_nodes: q.max_nodes }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContourOverrides {
    /// Abscissae `(c1, c2)` of the Whittaker double integral.
    pub whittaker: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapDefaults {
    pub cap45: Option<u64>,
    pub cap6: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub tolerances: Tolerances,
    /// Default width of the spectral test function.
    pub width: f64,
    pub contour: ContourOverrides,
    pub caps: CapDefaults,
    /// Cache file; the environment variable takes precedence. No cache when unset.
    pub cache_path: Option<PathBuf>,
    /// Worker threads for table rows.
    pub parallelism: usize,
    /// Node budget above which `table` refuses to run.
    pub table_budget: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            width: 4.0,
            contour: ContourOverrides::default(),
            caps: CapDefaults::default(),
            cache_path: None,
            parallelism: 1,
            table_budget: 2e9,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        let c: Config = toml::from_str(text).map_err(|e| format!("config: {e}"))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.quad().validate().map_err(|e| format!("config tolerances: {e}"))?;
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err("config width must be positive".into());
        }
        if !(1..=256).contains(&self.parallelism) {
            return Err("config parallelism must lie in 1..=256".into());
        }
        if let Some([a, b]) = self.contour.whittaker {
            if !(a > 0.0 && b > 0.0) {
                return Err("config contour.whittaker abscissae must be positive".into());
            }
        }
        if matches!(self.caps.cap45, Some(0)) || matches!(self.caps.cap6, Some(0)) {
            return Err("config caps must be positive".into());
        }
        if !(self.table_budget > 0.0) {
            return Err("config table_budget must be positive".into());
        }
        Ok(())
    }

    pub fn quad(&self) -> QuadratureSettings {
        QuadratureSettings {
            abs_tol: self.tolerances.abs,
            rel_tol: self.tolerances.rel,
            max_height: self.tolerances.max_height,
            max_nodes: self.tolerances.max_nodes,
            ..QuadratureSettings::default()
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex16(serde_json::to_string(self).unwrap_or_default().as_bytes())
    }

    fn tier(&self) -> String {
        format!("{:e}/{:e}/{:e}/{}", self.tolerances.abs, self.tolerances.rel, self.tolerances.max_height, self.tolerances.max_nodes)
    }
}

fn hex16(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------- records

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueOut {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for ValueOut {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub command: String,
    pub params: Map<String, Value>,
    pub value: Option<ValueOut>,
    pub err_est: Option<f64>,
    pub nodes: Option<u64>,
    pub converged: Option<bool>,
    /// Outcome of a verification; absent for plain evaluations.
    pub pass: Option<bool>,
    pub wall_time: f64,
    pub version: String,
    pub config_hash: String,
    pub detail: Value,
}

impl ResultRecord {
    fn new(command: &str, params: Value) -> Self {
        Self {
            schema_version: RECORD_SCHEMA_VERSION,
            command: command.into(),
            params: match params {
                Value::Object(m) => m,
                _ => Map::new(),
            },
            value: None,
            err_est: None,
            nodes: None,
            converged: None,
            pass: None,
            wall_time: 0.0,
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: String::new(),
            detail: Value::Null,
        }
    }

    fn quad(mut self, q: &QuadResult) -> Self {
        self.value = Some(q.value.into());
        self.err_est = Some(q.err_est);
        self.nodes = Some(q.nodes_used as u64);
        self.converged = Some(q.converged);
        self
    }

    fn exact(mut self, z: C64) -> Self {
        self.value = Some(z.into());
        self.err_est = Some(0.0);
        self.converged = Some(true);
        self
    }

    fn detail(mut self, d: Value) -> Self {
        self.detail = d;
        self
    }

    fn pass(mut self, ok: bool) -> Self {
        self.pass = Some(ok);
        self
    }

    fn failed(&self) -> bool {
        self.pass == Some(false) || self.converged == Some(false)
    }
}

/// Cache key of a command: its name, canonical parameters and tolerance tier.
pub fn cache_key(command: &str, params: &Map<String, Value>, cfg: &Config) -> String {
    let canon = serde_json::to_string(params).unwrap_or_default();
    hex16(format!("{command}\n{canon}\n{}", cfg.tier()).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub record: ResultRecord,
}

/// JSON-lines log loaded once; later lines win.
pub struct Cache {
    path: PathBuf,
    entries: BTreeMap<String, ResultRecord>,
}

impl Cache {
    pub fn open(path: &Path, warn: &mut dyn Write) -> Self {
        let mut entries = BTreeMap::new();
        if let Ok(f) = File::open(path) {
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(e) => {
                        entries.insert(e.key, e.record);
                    }
                    Err(e) => {
                        let _ = writeln!(warn, "warning: {}:{}: skipping corrupt cache line ({e})", path.display(), i + 1);
                    }
                }
            }
        }
        Self { path: path.to_path_buf(), entries }
    }

    pub fn get(&self, key: &str) -> Option<&ResultRecord> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn append(&mut self, key: &str, record: &ResultRecord) -> std::io::Result<()> {
        let line = serde_json::to_string(&CacheEntry { key: key.into(), record: record.clone() })?;
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        writeln!(f, "{line}")?;
        self.entries.insert(key.into(), record.clone());
        Ok(())
    }
}

// ---------------------------------------------------------------- argv

#[derive(Parser, Debug)]
#[command(name = "gl3kuz", version, about = "GL(3) Kuznetsov numerics: Kloosterman sums, kernels, transforms, verification suites")]
pub struct Cli {
    /// TOML configuration (default ./gl3kuz.toml when present).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Emit CSV instead of JSON.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Bypass the result cache.
    #[arg(long, global = true)]
    pub no_cache: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact Kloosterman sums and their finite Fourier transform.
    #[command(subcommand)]
    Kloosterman(KloostermanCmd),
    /// Archimedean Bessel kernels.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Completed Whittaker function component.
    Whittaker(WhittakerArgs),
    /// Spectral transforms of the test function.
    #[command(subcommand)]
    Phi(PhiCmd),
    /// Dual-variable transforms of the weighted kernels.
    #[command(subcommand)]
    Ktransform(KtransformCmd),
    /// Arithmetic side of the summation formula.
    Kuznetsov(KuznetsovArgs),
    /// The stationary-phase surface.
    #[command(subcommand)]
    Phase(PhaseCmd),
    /// Hecke eigenvalues, gamma factors and conductors.
    #[command(subcommand)]
    Lfunction(LfunctionCmd),
    /// Invariant suites.
    Verify(VerifyArgs),
    /// One- or two-parameter sweep as CSV.
    Table(TableArgs),
}

#[derive(Subcommand, Debug)]
pub enum KloostermanCmd {
    /// The sum attached to the w4 Weyl element (requires D1 | D2).
    Tilde {
        #[arg(long, allow_negative_numbers = true)]
        n1: i64,
        #[arg(long, allow_negative_numbers = true)]
        n2: i64,
        #[arg(long, allow_negative_numbers = true)]
        m1: i64,
        #[arg(long)]
        d1: i64,
        #[arg(long)]
        d2: i64,
    },
    /// The long-element sum.
    Long {
        #[arg(long, allow_negative_numbers = true)]
        n1: i64,
        #[arg(long, allow_negative_numbers = true)]
        m2: i64,
        #[arg(long, allow_negative_numbers = true)]
        m1: i64,
        #[arg(long, allow_negative_numbers = true)]
        n2: i64,
        #[arg(long)]
        d1: i64,
        #[arg(long)]
        d2: i64,
    },
    /// Finite Fourier transform of the long-element sum.
    Hat {
        /// r1,s1,r2,s2
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        r: Vec<i64>,
        /// x1,y1,x2,y2
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        xy: Vec<i64>,
        #[arg(long)]
        d1: i64,
        #[arg(long)]
        d2: i64,
        #[arg(long, value_enum, default_value_t = HatMethod::Count)]
        method: HatMethod,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HatMethod {
    Count,
    Literal,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq)]
pub enum Method {
    Mb,
    Bessel,
    Auto,
    Both,
}

#[derive(Args, Debug)]
pub struct SpectralArgs {
    #[arg(long)]
    pub d: u32,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub rho: f64,
}

impl SpectralArgs {
    fn point(&self) -> Result<SpectralPoint, Error> {
        SpectralPoint::new(self.d, self.rho)
    }
}

#[derive(Subcommand, Debug)]
pub enum KernelCmd {
    W4 {
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[command(flatten)]
        sp: SpectralArgs,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
    },
    W6 {
        #[arg(long, allow_negative_numbers = true)]
        y1: f64,
        #[arg(long, allow_negative_numbers = true)]
        y2: f64,
        #[command(flatten)]
        sp: SpectralArgs,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
    },
}

#[derive(Args, Debug)]
pub struct WhittakerArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub m: i32,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1)]
    pub sign: i8,
    #[arg(long)]
    pub y1: f64,
    #[arg(long)]
    pub y2: f64,
    #[command(flatten)]
    pub sp: SpectralArgs,
    /// Contour abscissae c1,c2.
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct TestFnArgs {
    #[arg(long)]
    pub d: u32,
    /// Centre of the test function (default: d).
    #[arg(long, allow_negative_numbers = true)]
    pub rho_center: Option<f64>,
    /// Width (default from config).
    #[arg(long)]
    pub width: Option<f64>,
}

impl TestFnArgs {
    fn spec(&self, cfg: &Config) -> Result<TestFunctionSpec, Error> {
        TestFunctionSpec::new(self.rho_center.unwrap_or(self.d as f64), self.width.unwrap_or(cfg.width))
    }

    fn json(&self, cfg: &Config) -> Value {
        json!({"d": self.d, "rho_center": self.rho_center.unwrap_or(self.d as f64), "width": self.width.unwrap_or(cfg.width)})
    }
}

#[derive(Subcommand, Debug)]
pub enum PhiCmd {
    W4 {
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[command(flatten)]
        f: TestFnArgs,
    },
    W5 {
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[command(flatten)]
        f: TestFnArgs,
    },
    W6 {
        #[arg(long, allow_negative_numbers = true)]
        y1: f64,
        #[arg(long, allow_negative_numbers = true)]
        y2: f64,
        #[command(flatten)]
        f: TestFnArgs,
    },
}

#[derive(Subcommand, Debug)]
pub enum KtransformCmd {
    /// One-variable transform of the bump-weighted w4 kernel.
    Tilde {
        #[arg(long, allow_negative_numbers = true)]
        xi: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        u: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        v: f64,
        #[command(flatten)]
        sp: SpectralArgs,
    },
    /// Two-variable transform of the bump-weighted w6 kernel.
    Full {
        #[arg(long, allow_negative_numbers = true)]
        xi1: f64,
        #[arg(long, allow_negative_numbers = true)]
        xi2: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        u1: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        v1: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        u2: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        v2: f64,
        #[command(flatten)]
        sp: SpectralArgs,
    },
}

#[derive(Args, Debug)]
pub struct KuznetsovArgs {
    /// n1,n2
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<u64>,
    /// m1,m2
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<u64>,
    #[command(flatten)]
    pub f: TestFnArgs,
    /// Spectral parameter of the kernels (default: the test-function centre).
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub cap45: Option<u64>,
    #[arg(long)]
    pub cap6: Option<u64>,
    /// Include every term in the output.
    #[arg(long)]
    pub terms: bool,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct PhaseParamArgs {
    #[arg(long)]
    pub d: u32,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub ups1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub ups2: f64,
}

#[derive(Subcommand, Debug)]
pub enum PhaseCmd {
    /// Phase and its derivatives at one point.
    Eval {
        #[arg(long, allow_negative_numbers = true)]
        t1: f64,
        #[arg(long, allow_negative_numbers = true)]
        t2: f64,
        #[command(flatten)]
        p: PhaseParamArgs,
    },
    /// Stationary point with the given first coordinate.
    Stationary {
        #[arg(long)]
        d: u32,
        #[arg(long, allow_negative_numbers = true)]
        rho: f64,
        #[arg(long, allow_negative_numbers = true)]
        t1: f64,
    },
    /// Sampled region measure against the measure bounds at a calibration spec.
    Region {
        #[arg(long, default_value_t = 50)]
        t: u32,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 128)]
        grid: usize,
        #[arg(long, default_value_t = 10.0)]
        envelope: f64,
    },
}

#[derive(Args, Debug)]
pub struct SatakeArgs {
    /// Unitary triple from two angles theta1,theta2.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with_all = ["alpha", "beta"])]
    pub theta: Option<Vec<f64>>,
    /// alpha as re,im (with beta; gamma = 1/(alpha beta)).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "beta")]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "alpha")]
    pub beta: Option<Vec<f64>>,
}

impl SatakeArgs {
    fn params(&self) -> SatakeParams {
        match (&self.theta, &self.alpha, &self.beta) {
            (_, Some(a), Some(b)) => SatakeParams::from_pair(C64::new(a[0], a[1]), C64::new(b[0], b[1])),
            (Some(t), ..) => SatakeParams::unitary(t[0], t[1]),
            _ => SatakeParams::unitary(0.0, 0.0),
        }
    }

    fn check(&self) -> Res<()> {
        for (v, flag) in [(&self.theta, "--theta"), (&self.alpha, "--alpha"), (&self.beta, "--beta")] {
            if let Some(v) = v {
                arity(v, 2, flag)?;
            }
        }
        Ok(())
    }

    fn json(&self) -> Value {
        json!({"theta": self.theta, "alpha": self.alpha, "beta": self.beta})
    }
}

#[derive(Subcommand, Debug)]
pub enum LfunctionCmd {
    /// A(n1, n2) with the same Satake triple at every prime.
    Eigenvalue {
        #[arg(long, default_value_t = 1)]
        n1: u64,
        #[arg(long)]
        n2: u64,
        #[command(flatten)]
        s: SatakeArgs,
    },
    /// Residual of the Hecke relation at one prime.
    Relation {
        #[command(flatten)]
        s: SatakeArgs,
    },
    /// Multiplicativity identity for a pair (n, m).
    Multiplicativity {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        m: u64,
        #[command(flatten)]
        s: SatakeArgs,
    },
    /// Archimedean gamma factor at s.
    Gamma {
        /// s as re,im
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        s: Vec<f64>,
        #[command(flatten)]
        sp: SpectralArgs,
    },
    /// Analytic conductor and the convexity benchmark.
    Conductor {
        #[command(flatten)]
        sp: SpectralArgs,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Suite name or "all".
    pub suite: String,
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 12)]
    pub max_modulus: i64,
    /// T of the decay scans.
    #[arg(long, default_value_t = 40)]
    pub t: u32,
    /// Suppress per-check progress on stderr.
    #[arg(long)]
    pub silent: bool,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    /// k-w4, k-w6, phi-w4, phi-w5, phi-w6, ktilde
    pub target: String,
    /// name=lin:a:b:n, name=log:a:b:n (base-10 exponents) or name=v1,v2,...
    #[arg(long, required = true)]
    pub sweep: Vec<String>,
    /// name=value for a fixed parameter.
    #[arg(long)]
    pub set: Vec<String>,
    /// Override the configured node budget.
    #[arg(long)]
    pub budget: Option<f64>,
}

// ---------------------------------------------------------------- driver

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence(_) => Failure::Compute(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

struct Ctx<'a> {
    cfg: Config,
    cache: Option<Cache>,
    err: &'a mut dyn Write,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    let cfg = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    let cache_path = std::env::var_os(CACHE_ENV).map(PathBuf::from).or_else(|| cfg.cache_path.clone());
    let cache = match (&cache_path, cli.no_cache) {
        (Some(p), false) => Some(Cache::open(p, stderr)),
        _ => None,
    };
    let mut ctx = Ctx { cfg, cache, err: stderr };
    let out = match dispatch(&cli, &mut ctx) {
        Ok(o) => o,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(ctx.err, "error: {m}");
            return 2;
        }
        Err(Failure::Compute(m)) => {
            let _ = writeln!(ctx.err, "error: {m}");
            return 1;
        }
    };
    let failed = out.failed();
    let text = if cli.csv || matches!(out, Output::Table(..)) { out.csv() } else { out.json() };
    let written = match &cli.out {
        Some(p) => std::fs::write(p, text.as_bytes()),
        None => stdout.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(ctx.err, "error: writing output: {e}");
        return 2;
    }
    i32::from(failed)
}

fn load_config(path: Option<&Path>) -> std::result::Result<Config, String> {
    match path {
        Some(p) => Config::load(p),
        None if Path::new(DEFAULT_CONFIG).exists() => Config::load(Path::new(DEFAULT_CONFIG)),
        None => Ok(Config::default()),
    }
}

enum Output {
    Record(Box<ResultRecord>),
    Table(Vec<String>, Vec<Vec<f64>>),
}

impl Output {
    fn failed(&self) -> bool {
        match self {
            Output::Record(r) => r.failed(),
            Output::Table(..) => false,
        }
    }

    fn json(&self) -> String {
        match self {
            Output::Record(r) => serde_json::to_string_pretty(r).unwrap_or_default() + "\n",
            Output::Table(h, rows) => serde_json::to_string_pretty(&json!({"columns": h, "rows": rows})).unwrap_or_default() + "\n",
        }
    }

    fn csv(&self) -> String {
        match self {
            Output::Table(h, rows) => {
                let mut s = h.join(",") + "\n";
                for r in rows {
                    s += &r.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(",");
                    s += "\n";
                }
                s
            }
            Output::Record(r) => record_csv(r),
        }
    }
}

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn json_scalar(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().filter(|_| n.is_f64()).map(fmt17).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn record_csv(r: &ResultRecord) -> String {
    if let Some(checks) = r.detail.get("checks").and_then(|c| c.as_array()) {
        let mut s = String::from("suite,name,criterion,pass,wall_time,detail\n");
        for c in checks {
            let g = |k: &str| c.get(k).map(json_scalar).unwrap_or_default();
            s += &format!("{},{},{},{},{},{}\n", g("suite"), g("name"), g("criterion"), g("pass"), g("wall_time"), csv_field(&g("detail")));
        }
        return s;
    }
    let mut head: Vec<String> = vec!["command".into()];
    let mut row = vec![csv_field(&r.command)];
    for (k, v) in &r.params {
        head.push(k.clone());
        row.push(csv_field(&json_scalar(v)));
    }
    let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
    head.extend(["re", "im", "err_est", "nodes", "converged", "pass", "wall_time"].map(String::from));
    row.push(opt(r.value.map(|v| v.re)));
    row.push(opt(r.value.map(|v| v.im)));
    row.push(opt(r.err_est));
    row.push(r.nodes.map(|n| n.to_string()).unwrap_or_default());
    row.push(r.converged.map(|b| b.to_string()).unwrap_or_default());
    row.push(r.pass.map(|b| b.to_string()).unwrap_or_default());
    row.push(fmt17(r.wall_time));
    format!("{}\n{}\n", head.join(","), row.join(","))
}

fn kernel_settings(cfg: &Config, rep: Representation) -> KernelSettings {
    KernelSettings { quad: cfg.quad(), representation: rep }
}

fn qjson(q: &QuadResult) -> Value {
    json!({"re": q.value.re, "im": q.value.im, "err_est": q.err_est, "nodes": q.nodes_used, "converged": q.converged})
}

/// Evaluates `compute` unless the cache already holds the record.
fn cached(ctx: &mut Ctx, command: &str, params: Value, compute: impl FnOnce(ResultRecord) -> Res<ResultRecord>) -> Res<Output> {
    let rec = ResultRecord::new(command, params);
    let key = cache_key(command, &rec.params, &ctx.cfg);
    if let Some(hit) = ctx.cache.as_ref().and_then(|c| c.get(&key)) {
        let _ = writeln!(ctx.err, "cache hit {key}");
        return Ok(Output::Record(Box::new(hit.clone())));
    }
    let t0 = Instant::now();
    let mut rec = compute(rec)?;
    rec.wall_time = t0.elapsed().as_secs_f64();
    rec.config_hash = ctx.cfg.hash();
    if let Some(c) = ctx.cache.as_mut() {
        if !rec.failed() {
            if let Err(e) = c.append(&key, &rec) {
                let _ = writeln!(ctx.err, "warning: cache write failed: {e}");
            }
        }
    }
    Ok(Output::Record(Box::new(rec)))
}

fn dual_method(ctx: &Ctx, method: Method, eval: impl Fn(&KernelSettings) -> Result<QuadResult, Error>, rec: ResultRecord) -> Res<ResultRecord> {
    let rep = match method {
        Method::Mb => Representation::MellinBarnes,
        Method::Bessel => Representation::BesselIntegral,
        Method::Auto => Representation::Auto,
        Method::Both => {
            let a = eval(&kernel_settings(&ctx.cfg, Representation::MellinBarnes))?;
            let b = eval(&kernel_settings(&ctx.cfg, Representation::BesselIntegral))?;
            let delta = (a.value - b.value).norm();
            let rel = delta / b.value.norm().max(f64::MIN_POSITIVE);
            let ok = delta <= 1e-6 * (1.0 + b.value.norm()) || delta <= a.err_est + b.err_est;
            let mut r = rec.quad(&a).detail(json!({"mellin_barnes": qjson(&a), "bessel_integral": qjson(&b), "delta": delta, "relative_delta": rel}));
            r.err_est = Some(a.err_est.max(delta));
            r.converged = Some(a.converged && b.converged);
            return Ok(r.pass(ok));
        }
    };
    let q = eval(&kernel_settings(&ctx.cfg, rep))?;
    Ok(rec.quad(&q))
}

fn dispatch(cli: &Cli, ctx: &mut Ctx) -> Res<Output> {
    match &cli.command {
        Command::Kloosterman(k) => kloosterman(k, ctx),
        Command::Kernel(KernelCmd::W4 { y, sp, method }) => {
            let pt = sp.point()?;
            let m = *method;
            let (y, st) = (*y, ctx.cfg.clone());
            let params = json!({"y": y, "d": sp.d, "rho": sp.rho, "method": format!("{m:?}").to_lowercase()});
            cached(ctx, "kernel w4", params, |rec| {
                let c = Ctx { cfg: st, cache: None, err: &mut std::io::sink() };
                dual_method(&c, m, |ks| k_w4(y, &pt, ks), rec)
            })
        }
        Command::Kernel(KernelCmd::W6 { y1, y2, sp, method }) => {
            let pt = sp.point()?;
            let m = *method;
            let (y1, y2, st) = (*y1, *y2, ctx.cfg.clone());
            let params = json!({"y1": y1, "y2": y2, "d": sp.d, "rho": sp.rho, "method": format!("{m:?}").to_lowercase()});
            cached(ctx, "kernel w6", params, |rec| {
                let c = Ctx { cfg: st, cache: None, err: &mut std::io::sink() };
                dual_method(&c, m, |ks| k_w6(y1, y2, &pt, ks), rec)
            })
        }
        Command::Whittaker(a) => {
            if let Some(c) = &a.c {
                arity(c, 2, "--c")?;
            }
            let pt = a.sp.point()?;
            let c = match &a.c {
                Some(v) => (v[0], v[1]),
                None => ctx.cfg.contour.whittaker.map(|[x, y]| (x, y)).unwrap_or((2.0, 2.0)),
            };
            let q = ctx.cfg.quad();
            let params = json!({"m": a.m, "sign": a.sign, "y1": a.y1, "y2": a.y2, "d": a.sp.d, "rho": a.sp.rho, "c": [c.0, c.1]});
            cached(ctx, "whittaker", params, |rec| Ok(rec.quad(&whittaker_w_at(a.m, a.sign, a.y1, a.y2, &pt, c, &q)?)))
        }
        Command::Phi(p) => {
            let q = ctx.cfg.quad();
            let (name, f, mut params, eval): (&str, &TestFnArgs, Value, Box<dyn Fn(&TestFunctionSpec, u32) -> Result<QuadResult, Error>>) = match p {
                PhiCmd::W4 { y, f } => ("phi w4", f, json!({"y": y}), Box::new(move |s, d| phi_w4(*y, d, s, &q))),
                PhiCmd::W5 { y, f } => ("phi w5", f, json!({"y": y}), Box::new(move |s, d| phi_w5(*y, d, s, &q))),
                PhiCmd::W6 { y1, y2, f } => ("phi w6", f, json!({"y1": y1, "y2": y2}), Box::new(move |s, d| phi_w6(*y1, *y2, d, s, &q))),
            };
            let spec = f.spec(&ctx.cfg)?;
            merge(&mut params, f.json(&ctx.cfg));
            let d = f.d;
            cached(ctx, name, params, |rec| Ok(rec.quad(&eval(&spec, d)?)))
        }
        Command::Ktransform(KtransformCmd::Tilde { xi, u, v, sp }) => {
            let pt = sp.point()?;
            let q = ctx.cfg.quad();
            let params = json!({"xi": xi, "u": u, "v": v, "d": sp.d, "rho": sp.rho});
            cached(ctx, "ktransform tilde", params, |rec| Ok(rec.quad(&ktilde(*xi, *u, *v, &pt, &BumpSpec::default(), &q)?)))
        }
        Command::Ktransform(KtransformCmd::Full { xi1, xi2, u1, v1, u2, v2, sp }) => {
            let pt = sp.point()?;
            let q = ctx.cfg.quad();
            let params = json!({"xi1": xi1, "xi2": xi2, "u1": u1, "v1": v1, "u2": u2, "v2": v2, "d": sp.d, "rho": sp.rho});
            let dv = DualVars::new(*u1, *v1, *u2, *v2);
            cached(ctx, "ktransform full", params, |rec| Ok(rec.quad(&kfull(*xi1, *xi2, &dv, &pt, &BumpSpec::default(), &q)?)))
        }
        Command::Kuznetsov(a) => kuznetsov(a, ctx),
        Command::Phase(p) => phase(p, ctx),
        Command::Lfunction(l) => lfunction(l, ctx),
        Command::Verify(v) => verify(v, ctx),
        Command::Table(t) => table(t, ctx),
    }
}

fn arity<T>(v: &[T], n: usize, flag: &str) -> Res<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{flag} takes {n} comma-separated values, got {}", v.len())))
    }
}

fn merge(a: &mut Value, b: Value) {
    if let (Value::Object(x), Value::Object(y)) = (a, b) {
        x.extend(y);
    }
}

fn plain(ctx: &Ctx, rec: ResultRecord, t0: Instant) -> Res<Output> {
    let mut rec = rec;
    rec.wall_time = t0.elapsed().as_secs_f64();
    rec.config_hash = ctx.cfg.hash();
    Ok(Output::Record(Box::new(rec)))
}

fn kloosterman(k: &KloostermanCmd, ctx: &mut Ctx) -> Res<Output> {
    let t0 = Instant::now();
    let rec = match *k {
        KloostermanCmd::Tilde { n1, n2, m1, d1, d2 } => ResultRecord::new("kloosterman tilde", json!({"n1": n1, "n2": n2, "m1": m1, "d1": d1, "d2": d2}))
            .exact(s_tilde(&W4Params { n1, n2, m1, d1, d2 })?),
        KloostermanCmd::Long { n1, m2, m1, n2, d1, d2 } => {
            ResultRecord::new("kloosterman long", json!({"n1": n1, "m2": m2, "m1": m1, "n2": n2, "d1": d1, "d2": d2}))
                .exact(s_long(&W6Params { n1, m2, m1, n2, d1, d2 })?)
        }
        KloostermanCmd::Hat { ref r, ref xy, d1, d2, method } => {
            arity(r, 4, "--r")?;
            arity(xy, 4, "--xy")?;
            let p = HatParams { r1: r[0], s1: r[1], r2: r[2], s2: r[3], x1: xy[0], y1: xy[1], x2: xy[2], y2: xy[3], d1, d2 };
            let rec = ResultRecord::new("kloosterman hat", json!({"r": r, "xy": xy, "d1": d1, "d2": d2, "method": format!("{method:?}").to_lowercase()}));
            match method {
                HatMethod::Count => rec.exact(hat_s(&p)?),
                HatMethod::Literal => rec.exact(hat_s_literal(&p)?),
                HatMethod::Both => {
                    let (a, b) = (hat_s(&p)?, hat_s_literal(&p)?);
                    let dev = (a - b).norm();
                    rec.exact(a).detail(json!({"literal": {"re": b.re, "im": b.im}, "delta": dev})).pass(dev <= 1e-9)
                }
            }
        }
    };
    plain(ctx, rec, t0)
}

fn kuznetsov(a: &KuznetsovArgs, ctx: &mut Ctx) -> Res<Output> {
    arity(&a.n, 2, "--n")?;
    arity(&a.m, 2, "--m")?;
    let f = a.f.spec(&ctx.cfg)?;
    let pt = SpectralPoint::new(a.f.d, a.rho.unwrap_or(f.rho_center))?;
    let mut req = KuznetsovRequest::new((a.n[0], a.n[1]), (a.m[0], a.m[1]), pt, f)?;
    let cap45 = a.cap45.or(ctx.cfg.caps.cap45).unwrap_or(req.caps.cap45);
    let cap6 = a.cap6.or(ctx.cfg.caps.cap6).unwrap_or(req.caps.cap6);
    req = req.with_caps(Caps { cap45, cap6 });
    let mut params = json!({"n": a.n, "m": a.m, "rho": pt.rho, "cap45": cap45, "cap6": cap6, "terms": a.terms});
    merge(&mut params, a.f.json(&ctx.cfg));
    let q = ctx.cfg.quad();
    let with_terms = a.terms;
    cached(ctx, "kuznetsov", params, |rec| {
        let s = arithmetic_side(&req, &q)?;
        let part = |b: &crate::kuznetsov::Breakdown| {
            let mut v = json!({"sum": qjson(&b.partial_sum), "terms": b.terms.len(), "max_term": b.max_term()});
            if with_terms {
                v["list"] = serde_json::to_value(&b.terms).unwrap_or_default();
            }
            v
        };
        let detail = json!({"delta": qjson(&s.delta), "sigma4": part(&s.sigma4), "sigma5": part(&s.sigma5), "sigma6": part(&s.sigma6)});
        Ok(rec.quad(&s.total).detail(detail))
    })
}

fn phase(p: &PhaseCmd, ctx: &mut Ctx) -> Res<Output> {
    let t0 = Instant::now();
    let rec = match *p {
        PhaseCmd::Eval { t1, t2, p } => {
            let pp = PhaseParams::new(p.d, p.rho, p.ups1, p.ups2)?;
            let pt = PhasePoint::new(t1, t2);
            let g = phase_g(&pt, &pp)?;
            let detail = json!({
                "g1": phase_g1(&pt, &pp)?, "g2": phase_g2(&pt, &pp)?, "h": phase_h(&pt, &pp)?,
                "g1_t1": phase_g1_t1(&pt, &pp)?, "g2_t2": phase_g2_t2(&pt, &pp)?, "g1_t2": phase_g1_t2(&pt, &pp)?,
            });
            ResultRecord::new("phase eval", json!({"t1": t1, "t2": t2, "d": p.d, "rho": p.rho, "ups1": p.ups1, "ups2": p.ups2}))
                .exact(C64::new(g, 0.0))
                .detail(detail)
        }
        PhaseCmd::Stationary { d, rho, t1 } => {
            let (pt, pp) = stationary_point(d, rho, t1)?;
            ResultRecord::new("phase stationary", json!({"d": d, "rho": rho, "t1": t1}))
                .exact(C64::new(phase_g(&pt, &pp)?, 0.0))
                .detail(json!({"point": pt, "params": pp}))
        }
        PhaseCmd::Region { t, index, grid, envelope } => {
            let specs = calibration_regions(t)?;
            let (rs, pp) = specs.get(index).ok_or_else(|| Failure::Usage(format!("--index must be below {}", specs.len())))?;
            let rep = sublemma_check(rs, pp, grid, envelope)?;
            ResultRecord::new("phase region", json!({"t": t, "index": index, "grid": grid, "envelope": envelope}))
                .exact(C64::new(rep.sample.measure, 0.0))
                .pass(rep.pass)
                .detail(json!({"region": rs, "params": pp, "bounds": rep.bounds, "shell_measure": rep.sample.shell_measure, "points_in": rep.sample.points_in}))
        }
    };
    plain(ctx, rec, t0)
}

fn lfunction(l: &LfunctionCmd, ctx: &mut Ctx) -> Res<Output> {
    let t0 = Instant::now();
    if let LfunctionCmd::Eigenvalue { s, .. } | LfunctionCmd::Relation { s } | LfunctionCmd::Multiplicativity { s, .. } = l {
        s.check()?;
    }
    let rec = match l {
        LfunctionCmd::Eigenvalue { n1, n2, s } => {
            if *n1 == 0 || *n2 == 0 {
                return Err(Failure::Usage("--n1 and --n2 must be positive".into()));
            }
            let mut p = s.json();
            merge(&mut p, json!({"n1": n1, "n2": n2}));
            ResultRecord::new("lfunction eigenvalue", p).exact(eigenvalue_at(&s.params(), *n1, *n2))
        }
        LfunctionCmd::Relation { s } => {
            let r = hecke_relation_residual(&s.params());
            ResultRecord::new("lfunction relation", s.json()).exact(r).pass(r.norm() <= 1e-10)
        }
        LfunctionCmd::Multiplicativity { n, m, s } => {
            let rep = hecke_multiplicativity_check(&s.params(), *n, *m)?;
            let mut p = s.json();
            merge(&mut p, json!({"n": n, "m": m}));
            ResultRecord::new("lfunction multiplicativity", p)
                .exact(rep.lhs)
                .pass(rep.pass)
                .detail(json!({"rhs": {"re": rep.rhs.re, "im": rep.rhs.im}, "residual": rep.residual}))
        }
        LfunctionCmd::Gamma { s, sp } => {
            arity(s, 2, "--s")?;
            let v = archimedean_factor(C64::new(s[0], s[1]), &sp.point()?)?;
            let rec = ResultRecord::new("lfunction gamma", json!({"s": s, "d": sp.d, "rho": sp.rho})).detail(json!({"log_abs": v.log_abs, "phase": v.phase}));
            match v.value {
                Some(z) => rec.exact(z),
                None => rec,
            }
        }
        LfunctionCmd::Conductor { sp, eps } => {
            let pt = sp.point()?;
            ResultRecord::new("lfunction conductor", json!({"d": sp.d, "rho": sp.rho, "eps": eps}))
                .exact(C64::new(analytic_conductor(&pt), 0.0))
                .detail(serde_json::to_value(convexity_benchmark(&pt, *eps)).unwrap_or_default())
        }
    };
    plain(ctx, rec, t0)
}

fn verify(v: &VerifyArgs, ctx: &mut Ctx) -> Res<Output> {
    let t0 = Instant::now();
    let suites: Vec<Suite> = if v.suite == "all" { Suite::ALL.to_vec() } else { vec![v.suite.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?] };
    if v.max_modulus < 1 || v.max_modulus > 40 {
        return Err(Failure::Usage("--max-modulus must lie in 1..=40".into()));
    }
    let opts = VerifyOptions { seed: v.seed, quick: v.quick, max_modulus: v.max_modulus, t: v.t };
    if !(20..=60).contains(&v.t) {
        return Err(Failure::Usage("--t must lie in 20..=60".into()));
    }
    let silent = v.silent;
    let err = &mut *ctx.err;
    let mut progress = |c: &Check| {
        if !silent {
            let _ = writeln!(err, "{} {}/{} ({:.1}s): {}", if c.pass { "PASS" } else { "FAIL" }, c.suite, c.name, c.wall_time, c.detail);
        }
    };
    let checks: Vec<Check> = suites.iter().flat_map(|&s| run_suite_with(s, &opts, &mut progress)).collect();
    let report = VerifyReport::new(opts, checks);
    let violations = report.checks.iter().filter(|c| !c.pass).count();
    let rec = ResultRecord::new("verify", json!({"suite": v.suite, "quick": v.quick, "seed": v.seed, "max_modulus": v.max_modulus, "t": v.t}))
        .pass(report.pass)
        .detail(json!({"failed_checks": violations, "checks": report.checks}));
    plain(ctx, rec, t0)
}

// ---------------------------------------------------------------- table

/// Parameters, per-row node estimate and evaluator of each sweep target.
struct Target {
    params: &'static [(&'static str, Option<f64>)],
    nodes_per_row: f64,
    eval: fn(&BTreeMap<String, f64>, &Config) -> Result<QuadResult, Error>,
}

fn point(p: &BTreeMap<String, f64>, rho: &str) -> Result<SpectralPoint, Error> {
    let d = p["d"];
    if d < 0.0 || d.fract() != 0.0 {
        return Err(Error::Invalid(format!("d must be a nonnegative integer, got {d}")));
    }
    SpectralPoint::new(d as u32, p[rho])
}

fn test_fn(p: &BTreeMap<String, f64>) -> Result<TestFunctionSpec, Error> {
    TestFunctionSpec::new(p["rho_center"], p["width"])
}

fn target(name: &str) -> Option<Target> {
    Some(match name {
        "k-w4" => Target {
            params: &[("y", None), ("d", None), ("rho", Some(0.0))],
            nodes_per_row: 2e4,
            eval: |p, c| k_w4(p["y"], &point(p, "rho")?, &kernel_settings(c, Representation::Auto)),
        },
        "k-w6" => Target {
            params: &[("y1", None), ("y2", None), ("d", None), ("rho", Some(0.0))],
            nodes_per_row: 1e6,
            eval: |p, c| k_w6(p["y1"], p["y2"], &point(p, "rho")?, &kernel_settings(c, Representation::Auto)),
        },
        "phi-w4" => Target {
            params: &[("y", None), ("d", None), ("rho_center", None), ("width", None)],
            nodes_per_row: 5e4,
            eval: |p, c| phi_w4(p["y"], p["d"] as u32, &test_fn(p)?, &c.quad()),
        },
        "phi-w5" => Target {
            params: &[("y", None), ("d", None), ("rho_center", None), ("width", None)],
            nodes_per_row: 5e4,
            eval: |p, c| phi_w5(p["y"], p["d"] as u32, &test_fn(p)?, &c.quad()),
        },
        "phi-w6" => Target {
            params: &[("y1", None), ("y2", None), ("d", None), ("rho_center", None), ("width", None)],
            nodes_per_row: 2e6,
            eval: |p, c| phi_w6(p["y1"], p["y2"], p["d"] as u32, &test_fn(p)?, &c.quad()),
        },
        "ktilde" => Target {
            params: &[("xi", None), ("u", Some(0.0)), ("v", Some(0.0)), ("d", None), ("rho", None)],
            nodes_per_row: 2e5,
            eval: |p, c| ktilde(p["xi"], p["u"], p["v"], &point(p, "rho")?, &BumpSpec::default(), &c.quad()),
        },
        _ => return None,
    })
}

/// Parses `name=lin:a:b:n`, `name=log:a:b:n` or `name=v1,v2,...`.
pub fn parse_sweep(s: &str) -> std::result::Result<(String, Vec<f64>), String> {
    let (name, spec) = s.split_once('=').ok_or_else(|| format!("--sweep {s:?}: expected name=spec"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("--sweep {s:?}: bad number {t:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [kind @ ("lin" | "log"), a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| format!("--sweep {s:?}: bad count {n:?}"))?;
            (0..n)
                .map(|i| {
                    let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                    let x = a + (b - a) * t;
                    if *kind == "log" {
                        10f64.powf(x)
                    } else {
                        x
                    }
                })
                .collect()
        }
        [list] if list.trim().is_empty() => Vec::new(),
        [list] => list.split(',').map(num).collect::<std::result::Result<_, _>>()?,
        _ => return Err(format!("--sweep {s:?}: expected lin:a:b:n, log:a:b:n or a comma list")),
    };
    Ok((name.trim().to_string(), values))
}

fn table(t: &TableArgs, ctx: &mut Ctx) -> Res<Output> {
    let tg = target(&t.target).ok_or_else(|| Failure::Usage(format!("unknown table target {:?}; expected k-w4, k-w6, phi-w4, phi-w5, phi-w6 or ktilde", t.target)))?;
    if t.sweep.len() > 2 {
        return Err(Failure::Usage("at most two --sweep parameters".into()));
    }
    let known = |n: &str| tg.params.iter().any(|(k, _)| *k == n);
    let sweeps: Vec<(String, Vec<f64>)> = t.sweep.iter().map(|s| parse_sweep(s)).collect::<std::result::Result<_, _>>().map_err(Failure::Usage)?;
    let mut fixed = BTreeMap::new();
    for (k, v) in tg.params {
        if let Some(v) = v {
            fixed.insert(k.to_string(), *v);
        }
    }
    if known("width") {
        fixed.insert("width".into(), ctx.cfg.width);
    }
    for s in &t.set {
        let (k, v) = s.split_once('=').ok_or_else(|| Failure::Usage(format!("--set {s:?}: expected name=value")))?;
        let v: f64 = v.trim().parse().map_err(|_| Failure::Usage(format!("--set {s:?}: bad number")))?;
        fixed.insert(k.trim().to_string(), v);
    }
    if !fixed.contains_key("rho_center") && known("rho_center") {
        if let Some(&d) = fixed.get("d") {
            fixed.insert("rho_center".into(), d);
        }
    }
    for (k, _) in &sweeps {
        fixed.remove(k);
    }
    for k in fixed.keys().chain(sweeps.iter().map(|(k, _)| k)) {
        if !known(k) {
            return Err(Failure::Usage(format!("parameter {k:?} does not belong to target {}", t.target)));
        }
    }
    let missing: Vec<&str> = tg.params.iter().map(|(k, _)| *k).filter(|k| !fixed.contains_key(*k) && !sweeps.iter().any(|(s, _)| s == k)).collect();
    if !missing.is_empty() {
        return Err(Failure::Usage(format!("missing parameters for {}: {}", t.target, missing.join(", "))));
    }
    let mut rows: Vec<BTreeMap<String, f64>> = vec![fixed.clone()];
    for (k, vals) in &sweeps {
        rows = rows.iter().flat_map(|r| vals.iter().map(move |&v| {
            let mut r = r.clone();
            r.insert(k.clone(), v);
            r
        })).collect();
    }
    let budget = t.budget.unwrap_or(ctx.cfg.table_budget);
    let estimate = rows.len() as f64 * tg.nodes_per_row;
    if estimate > budget {
        return Err(Failure::Usage(format!("table refused: estimated {estimate:.3e} nodes exceeds the budget {budget:.3e} (raise with --budget)")));
    }
    let mut header: Vec<String> = sweeps.iter().map(|(k, _)| k.clone()).collect();
    header.extend(fixed.keys().cloned());
    let cfg = ctx.cfg.clone();
    let threads = cfg.parallelism.min(rows.len()).max(1);
    let mut results: Vec<Option<Result<QuadResult, Error>>> = (0..rows.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunk = rows.len().div_ceil(threads).max(1);
        for (rs, out) in rows.chunks(chunk).zip(results.chunks_mut(chunk)) {
            let cfg = &cfg;
            s.spawn(move || {
                for (r, o) in rs.iter().zip(out.iter_mut()) {
                    *o = Some((tg.eval)(r, cfg));
                }
            });
        }
    });
    let mut table = Vec::with_capacity(rows.len());
    for (r, res) in rows.iter().zip(results) {
        let q = res.unwrap_or_else(|| Err(Error::Invalid("row not evaluated".into())))?;
        let mut line: Vec<f64> = header.iter().map(|k| r[k]).collect();
        line.extend([q.value.re, q.value.im, q.err_est]);
        table.push(line);
    }
    header.extend(["re", "im", "err_est"].map(String::from));
    Ok(Output::Table(header, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("gl3kuz").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn hat_example_gives_phi_of_six() {
        let (code, out, _) = run_capture(&["kloosterman", "hat", "--r", "1,1,1,1", "--xy", "0,0,0,0", "--d1", "6", "--d2", "6"]);
        assert_eq!(code, 0);
        let rec: ResultRecord = serde_json::from_str(&out).unwrap();
        assert_eq!(rec.value.unwrap().re, 2.0);
        assert_eq!(rec.command, "kloosterman hat");
    }

    #[test]
    fn usage_errors_exit_two_and_name_the_flag() {
        let (code, _, err) = run_capture(&["kernel", "w4", "--y", "1", "--d", "4", "--bogus", "3"]);
        assert_eq!(code, 2);
        assert!(err.contains("--bogus"), "{err}");
        let (code, _, _) = run_capture(&["kloosterman", "tilde", "--n1", "1", "--n2", "1", "--m1", "1", "--d1", "2", "--d2", "3"]);
        assert_eq!(code, 2);
        let (code, _, err) = run_capture(&["verify", "nosuch"]);
        assert_eq!(code, 2);
        assert!(err.contains("nosuch"));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(Config::parse("width = 2.0\n[tolerances]\nabs = 1e-10\n").is_ok());
        let e = Config::parse("widht = 2.0\n").unwrap_err();
        assert!(e.contains("widht"), "{e}");
        assert!(Config::parse("parallelism = 0\n").is_err());
        assert!(Config::parse("[caps]\ncap6 = 0\n").is_err());
    }

    #[test]
    fn sweep_specs() {
        let (n, v) = parse_sweep("y=log:0:6:25").unwrap();
        assert_eq!(n, "y");
        assert_eq!(v.len(), 25);
        assert_eq!(v[0], 1.0);
        assert!((v[24] - 1e6).abs() < 1e-6);
        assert_eq!(parse_sweep("y=lin:1:2:0").unwrap().1.len(), 0);
        assert_eq!(parse_sweep("y=1,2,5").unwrap().1, vec![1.0, 2.0, 5.0]);
        assert!(parse_sweep("y=cube:1:2:3").is_err());
    }

    #[test]
    fn empty_range_gives_header_only() {
        let (code, out, _) = run_capture(&["table", "k-w4", "--sweep", "y=lin:1:2:0", "--set", "d=4"]);
        assert_eq!(code, 0);
        assert_eq!(out, "y,d,rho,re,im,err_est\n");
    }

    #[test]
    fn table_cost_guard() {
        let (code, _, err) = run_capture(&["table", "k-w6", "--sweep", "y1=lin:-10:-1:100", "--sweep", "y2=lin:-10:-1:100", "--set", "d=5"]);
        assert_eq!(code, 2);
        assert!(err.contains("estimated"), "{err}");
    }

    #[test]
    fn csv_uses_seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        let v: f64 = fmt17(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn cache_round_trip_skips_corrupt_lines() {
        let dir = std::env::temp_dir().join(format!("gl3kuz-cache-{}", std::process::id()));
        let _ = std::fs::remove_file(&dir);
        let mut sink = Vec::new();
        let mut c = Cache::open(&dir, &mut sink);
        assert!(c.is_empty());
        let rec = ResultRecord::new("kernel w4", json!({"y": 1.5})).exact(C64::new(0.1, -0.3));
        let key = cache_key("kernel w4", &rec.params, &Config::default());
        c.append(&key, &rec).unwrap();
        std::fs::OpenOptions::new().append(true).open(&dir).unwrap().write_all(b"{not json\n").unwrap();
        let mut warn = Vec::new();
        let c2 = Cache::open(&dir, &mut warn);
        assert_eq!(c2.get(&key), Some(&rec));
        assert!(String::from_utf8(warn).unwrap().contains("corrupt"));
        let _ = std::fs::remove_file(&dir);
    }
}

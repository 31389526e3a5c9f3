//! Flat key-value run configuration shared by every subcommand.
//!
//! Values come from an optional config file and from command-line flags (flags win).
//! [`validate_config`] fills defaults, checks every key and reports all problems at once.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use geodesy_core::msm::Basis;
use geodesy_core::nuisance::{Bandwidth, NuisanceConfig, SplineConfig};
use geodesy_core::simbench::{Dgp, DgpName, NuisanceMode};
use geodesy_core::{make_tgrid, Family, Support, TGrid};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Prefix of the metadata line written at the top of every output CSV.
pub const HEADER_PREFIX: &str = "# geodesy";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Paths,
    Estimate,
    Msm,
    Simulate,
    Truecurve,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::Paths, Command::Estimate, Command::Msm, Command::Simulate, Command::Truecurve];

    pub fn name(self) -> &'static str {
        match self {
            Command::Paths => "paths",
            Command::Estimate => "estimate",
            Command::Msm => "msm",
            Command::Simulate => "simulate",
            Command::Truecurve => "truecurve",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::Paths => "Tabulate path densities for one covariate row",
            Command::Estimate => "One-step estimate of an incremental effect curve from data",
            Command::Msm => "Fit the marginal structural model and extrapolate to t = 1",
            Command::Simulate => "Coverage experiment on a simulated design",
            Command::Truecurve => "True effect curve of a simulated design by Monte Carlo",
        }
    }

    /// Keys accepted by this command, in help order.
    pub fn keys(self) -> Vec<&'static Key> {
        let names: &[&str] = match self {
            Command::Paths => &[
                "dgp", "families", "a_star", "epsilon", "split_point", "x", "t_max", "t_step", "points",
                "nodes",
            ],
            Command::Estimate => &[
                "data", "support", "oracle", "nuisance", "family", "a_star", "epsilon", "t_max", "t_step",
                "folds", "knots", "covariate_knots", "ridge_grid", "kde_bandwidth", "chi_square", "nodes",
            ],
            Command::Msm => &[
                "data", "support", "oracle", "nuisance", "a_star", "t_cut", "basis", "folds", "knots",
                "covariate_knots", "ridge_grid", "kde_bandwidth", "nodes", "beta_out",
            ],
            Command::Simulate => &[
                "dgp", "n", "reps", "families", "mode", "a_star", "epsilon", "t_max", "t_step", "folds",
                "knots", "covariate_knots", "ridge_grid", "kde_bandwidth", "truth_mc", "truth_seed",
                "cache_dir",
            ],
            Command::Truecurve => {
                &["dgp", "family", "a_star", "epsilon", "t_max", "t_step", "mc_n", "nodes"]
            }
        };
        names
            .iter()
            .chain(["seed", "threads", "out"].iter())
            .map(|n| KEYS.iter().find(|k| k.name == *n).expect("key table covers every command"))
            .collect()
    }

    /// Default of `key` for this command.
    pub fn default_for(self, key: &str) -> Option<&'static str> {
        match (self, key) {
            (Command::Paths, "t_step") => Some("0.25"),
            (Command::Estimate, "t_step") => Some("0.01"),
            (Command::Simulate, "families") => Some("w,h,e"),
            _ => KEYS.iter().find(|k| k.name == key).and_then(|k| k.default),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// A configuration key. Its flag is the key with `-` in place of `_`.
#[derive(Debug)]
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
    /// Whether the key is written to the output header. Keys that only decide where
    /// output goes or how fast it is computed are left out.
    pub replay: bool,
}

impl Key {
    pub fn flag(&self) -> String {
        self.name.replace('_', "-")
    }
}

const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, default, help, replay: true }
}

const DEFAULT_RIDGE_GRID: &str = "1e-6,1e-5,1e-4,1e-3,1e-2,1e-1,1,1e1,1e2,1e3";

pub static KEYS: &[Key] = &[
    key("data", None, "dataset CSV with header x1,...,xd,a,y"),
    key("support", None, "treatment support as lo,hi (default: the oracle design's, else the range of a)"),
    key("oracle", None, "design whose true nuisances may be used: sim7, msm6 or constant"),
    key("nuisance", None, "nuisances: fitted, oracle-pi or oracle (default: oracle when --oracle is set)"),
    key("dgp", Some("sim7"), "simulated design: sim7, msm6 or constant"),
    key("family", Some("wasserstein"), "path family: wasserstein, hellinger, exptilt or reflected"),
    key("families", Some("all"), "comma-separated path families, or all"),
    key("a_star", None, "target exposure"),
    key("epsilon", Some("0.05"), "width of the Gaussian target of the Hellinger path"),
    key("split_point", None, "split point of the reflected tilt (default: a_star when interior)"),
    key("x", None, "covariate row as comma-separated values (default: the design's covariate mean)"),
    key("t_max", Some("0.99"), "last point of the t-grid, below 1"),
    key("t_step", Some("0.05"), "spacing of the t-grid"),
    key("points", Some("201"), "number of exposure points"),
    key("nodes", Some("201"), "Gauss-Legendre nodes of the base quadrature rule"),
    key("folds", Some("5"), "cross-fitting folds"),
    key("knots", Some("8"), "interior knots of the exposure spline basis"),
    key("covariate_knots", Some("5"), "interior knots of each covariate spline basis"),
    key("ridge_grid", Some(DEFAULT_RIDGE_GRID), "candidate smoothing parameters, comma-separated"),
    key("kde_bandwidth", Some("silverman"), "residual kernel bandwidth: silverman or a positive number"),
    key("chi_square", Some("true"), "compute the chi-square diagnostic column"),
    key("t_cut", Some("0.3"), "cutoff of the fitted surface; a comma-separated list fits each"),
    key("basis", Some("poly2"), "MSM basis polyK in the standardized exposure"),
    Key { replay: false, ..key("beta_out", None, "coefficient CSV (default: beta.csv next to --out)") },
    key("n", Some("250"), "sample size of each replication"),
    key("reps", Some("300"), "number of replications"),
    key("mode", Some("oracle-pi"), "nuisances of each replication: oracle-pi, fitted or oracle"),
    key("truth_mc", Some("1000000"), "covariate draws for the true curves"),
    key("truth_seed", Some("0"), "seed of the covariate draws for the true curves"),
    Key { replay: false, ..key("cache_dir", Some(".geodesy-cache"), "cache of true curves, or none") },
    key("mc_n", Some("1000000"), "covariate draws"),
    key("seed", Some("0"), "master seed"),
    Key { replay: false, ..key("threads", Some("0"), "worker threads, 0 for one per core") },
    Key { replay: false, ..key("out", Some("-"), "output CSV, - for standard output") },
];

/// Raw key-value settings of one run, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self { command, values: BTreeMap::new() }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalize_key(key), value.into());
    }

    /// Loads a config file under the values already set.
    ///
    /// The file is either `key = value` lines or any output CSV of this tool, whose
    /// metadata line is replayed.
    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        let (command, values) = parse_config_text(&text).map_err(CliError::Config)?;
        if let Some(c) = command {
            if c != self.command.name() {
                return Err(CliError::Usage(format!(
                    "{} was written by `{c}`, not `{}`",
                    path.display(),
                    self.command
                )));
            }
        }
        for (k, v) in values {
            self.values.entry(k).or_insert(v);
        }
        Ok(())
    }
}

fn normalize_key(k: &str) -> String {
    k.trim().trim_start_matches("--").replace('-', "_")
}

/// Parses config text into an optional command name and key-value pairs.
pub fn parse_config_text(text: &str) -> Result<(Option<String>, Vec<(String, String)>), ConfigErrors> {
    let mut issues = ConfigErrors::default();
    let first = text.lines().next().unwrap_or("");
    if let Some(rest) = first.strip_prefix(HEADER_PREFIX).filter(|r| r.starts_with(' ')) {
        let mut tokens = rest.split_whitespace();
        let _version = tokens.next();
        let mut command = None;
        let mut values = Vec::new();
        for tok in tokens {
            match tok.split_once('=') {
                Some(("command", c)) => command = Some(c.to_string()),
                Some((k, v)) => values.push((normalize_key(k), unescape(v))),
                None => issues.push("header", format!("malformed entry `{tok}`")),
            }
        }
        return issues.into_result((command, values));
    }
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => values.push((normalize_key(k), v.trim().to_string())),
            None => issues.push("config", format!("line {}: expected key = value, found `{line}`", i + 1)),
        }
    }
    issues.into_result((None, values))
}

fn escape(v: &str) -> String {
    let mut s = String::with_capacity(v.len());
    for c in v.chars() {
        match c {
            '%' => s.push_str("%25"),
            ' ' => s.push_str("%20"),
            '\t' => s.push_str("%09"),
            '\n' => s.push_str("%0A"),
            '\r' => s.push_str("%0D"),
            _ => s.push(c),
        }
    }
    s
}

fn unescape(v: &str) -> String {
    v.replace("%20", " ").replace("%09", "\t").replace("%0A", "\n").replace("%0D", "\r").replace("%25", "%")
}

/// One violation of a configuration rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

/// Every violation found in a configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl ConfigErrors {
    fn push(&mut self, key: &str, message: impl Into<String>) {
        self.0.push(ConfigIssue { key: key.to_string(), message: message.into() });
    }

    fn into_result<T>(self, value: T) -> Result<T, ConfigErrors> {
        if self.0.is_empty() {
            Ok(value)
        } else {
            Err(self)
        }
    }

    pub fn keys(&self) -> Vec<&str> {
        self.0.iter().map(|i| i.key.as_str()).collect()
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration ({} problem{})", self.0.len(), if self.0.len() == 1 { "" } else { "s" })?;
        for i in &self.0 {
            write!(f, "\n  {}: {}", i.key, i.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Where the main CSV goes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Output {
    Stdout,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Common {
    pub seed: u64,
    pub threads: usize,
    pub out: Output,
}

/// Settings of fitted nuisances.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub folds: usize,
    pub nuisance: NuisanceConfig,
}

#[derive(Debug, Clone)]
pub struct PathsJob {
    pub dgp: Dgp,
    pub families: Vec<Family>,
    pub a_star: f64,
    pub epsilon: f64,
    pub split_point: Option<f64>,
    pub x: Vec<f64>,
    pub grid: TGrid,
    pub points: usize,
    pub nodes: usize,
}

/// Data source and nuisance choice shared by `estimate` and `msm`.
#[derive(Debug, Clone)]
pub struct DataSettings {
    pub data: PathBuf,
    pub support: Option<Support>,
    pub oracle: Option<Dgp>,
    pub nuisance: NuisanceMode,
    pub fit: FitSettings,
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub struct EstimateJob {
    pub source: DataSettings,
    pub family: Family,
    pub a_star: f64,
    pub epsilon: f64,
    pub grid: TGrid,
    pub chi_square: bool,
}

#[derive(Debug, Clone)]
pub struct MsmJob {
    pub source: DataSettings,
    pub a_star: f64,
    pub t_cuts: Vec<f64>,
    pub basis: Basis,
    pub beta_out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SimulateJob {
    pub dgp: Dgp,
    pub n: usize,
    pub reps: usize,
    pub families: Vec<Family>,
    pub mode: NuisanceMode,
    pub a_star: f64,
    pub epsilon: f64,
    pub grid: TGrid,
    pub fit: FitSettings,
    pub truth_mc: usize,
    pub truth_seed: u64,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TruecurveJob {
    pub dgp: Dgp,
    pub family: Family,
    pub a_star: f64,
    pub epsilon: f64,
    pub grid: TGrid,
    pub mc_n: usize,
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub enum Job {
    Paths(PathsJob),
    Estimate(EstimateJob),
    Msm(MsmJob),
    Simulate(SimulateJob),
    Truecurve(TruecurveJob),
}

/// A validated configuration: every key resolved, typed settings for the command.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub command: Command,
    /// All keys of the command with defaults filled in.
    pub values: BTreeMap<String, String>,
    pub common: Common,
    pub job: Job,
}

impl Resolved {
    /// Metadata line that replays this run when passed back through `--config`.
    pub fn header(&self) -> String {
        let mut s = format!("{HEADER_PREFIX} {VERSION} command={}", self.command);
        for (k, v) in &self.values {
            let replay = KEYS.iter().find(|key| key.name == k).map_or(true, |key| key.replay);
            if replay {
                s.push(' ');
                s.push_str(k);
                s.push('=');
                s.push_str(&escape(v));
            }
        }
        s
    }
}

/// Typed reads that record a named issue instead of failing.
struct Reader<'a> {
    values: &'a BTreeMap<String, String>,
    issues: ConfigErrors,
}

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> Option<&'a str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let raw = self.raw(key)?;
        match raw.trim().parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.issues.push(key, format!("expected {what}, found `{raw}`"));
                None
            }
        }
    }

    fn required<T: FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        if self.raw(key).is_none() {
            self.issues.push(key, format!("is required (--{})", key.replace('_', "-")));
            return None;
        }
        self.parse(key, what)
    }

    fn real(&mut self, key: &str) -> Option<f64> {
        let v: f64 = self.parse(key, "a number")?;
        if !v.is_finite() {
            self.issues.push(key, format!("must be finite (got {v})"));
            return None;
        }
        Some(v)
    }

    fn count(&mut self, key: &str, min: usize) -> Option<usize> {
        let v: usize = self.parse(key, "a non-negative integer")?;
        if v < min {
            self.issues.push(key, format!("must be at least {min} (got {v})"));
            return None;
        }
        Some(v)
    }

    fn list<T: FromStr>(&mut self, key: &str, what: &str) -> Option<Vec<T>> {
        let raw = self.raw(key)?;
        let mut out = Vec::new();
        for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.parse() {
                Ok(v) => out.push(v),
                Err(_) => {
                    self.issues.push(key, format!("expected a comma-separated list of {what}, found `{part}`"));
                    return None;
                }
            }
        }
        if out.is_empty() {
            self.issues.push(key, "must not be empty");
            return None;
        }
        Some(out)
    }

    fn epsilon(&mut self) -> Option<f64> {
        let e = self.real("epsilon")?;
        if e <= 0.0 {
            self.issues.push("epsilon", format!("must be positive (got {e})"));
            return None;
        }
        Some(e)
    }

    fn folds(&mut self) -> Option<usize> {
        let v: usize = self.parse("folds", "an integer")?;
        if v < 2 {
            self.issues.push("folds", format!("cross-fitting needs at least 2 folds (got {v})"));
            return None;
        }
        Some(v)
    }

    fn dgp(&mut self, key: &str) -> Option<Dgp> {
        let raw = self.raw(key)?;
        match raw.parse::<DgpName>() {
            Ok(name) => Some(Dgp::new(name)),
            Err(e) => {
                self.issues.push(key, format!("{e} (sim7, msm6, constant)"));
                None
            }
        }
    }

    fn family(&mut self, key: &str) -> Option<Family> {
        let raw = self.raw(key)?;
        match raw.parse::<Family>() {
            Ok(f) => Some(f),
            Err(e) => {
                self.issues.push(key, e.to_string());
                None
            }
        }
    }

    fn families(&mut self, key: &str) -> Option<Vec<Family>> {
        if self.raw(key).map(str::trim) == Some("all") {
            return Some(Family::ALL.to_vec());
        }
        let raw = self.raw(key)?;
        let mut out: Vec<Family> = Vec::new();
        for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.parse::<Family>() {
                Ok(f) if !out.contains(&f) => out.push(f),
                Ok(f) => self.issues.push(key, format!("family {f} listed twice")),
                Err(e) => self.issues.push(key, e.to_string()),
            }
        }
        if out.is_empty() {
            self.issues.push(key, "must name at least one family");
            return None;
        }
        Some(out)
    }

    fn support(&mut self) -> Option<Support> {
        let v: Vec<f64> = self.list("support", "numbers")?;
        if v.len() != 2 {
            self.issues.push("support", "expected lo,hi");
            return None;
        }
        match Support::new(v[0], v[1]) {
            Ok(s) => Some(s),
            Err(e) => {
                self.issues.push("support", e.to_string());
                None
            }
        }
    }

    fn grid(&mut self) -> Option<TGrid> {
        let t_max = self.real("t_max");
        let t_step = self.real("t_step");
        let t_max = t_max.filter(|&t| {
            if t >= 1.0 {
                self.issues.push("t_max", format!("must be below 1; path estimands are only defined for t < 1 (got {t})"));
                false
            } else if t <= 0.0 {
                self.issues.push("t_max", format!("must be positive (got {t})"));
                false
            } else {
                true
            }
        });
        let t_step = t_step.filter(|&s| {
            if s <= 0.0 {
                self.issues.push("t_step", format!("must be positive (got {s})"));
                false
            } else {
                true
            }
        });
        let (t_max, t_step) = (t_max?, t_step?);
        if t_step > t_max {
            self.issues.push("t_step", format!("exceeds t_max ({t_step} > {t_max})"));
            return None;
        }
        match make_tgrid(t_max, t_step) {
            Ok(g) => Some(g),
            Err(e) => {
                self.issues.push("t_step", e.to_string());
                None
            }
        }
    }

    fn fit(&mut self) -> Option<FitSettings> {
        let folds = self.folds();
        let exposure_knots = self.count("knots", 1);
        let covariate_knots = self.count("covariate_knots", 1);
        let ridge_grid = self.list::<f64>("ridge_grid", "numbers").filter(|g| {
            let ok = g.iter().all(|l| l.is_finite() && *l > 0.0);
            if !ok {
                self.issues.push("ridge_grid", "values must be positive and finite");
            }
            ok
        });
        let bandwidth = match self.raw("kde_bandwidth").map(str::trim) {
            Some("silverman") => Some(Bandwidth::Silverman),
            Some(other) => match other.parse::<f64>() {
                Ok(h) if h > 0.0 && h.is_finite() => Some(Bandwidth::Fixed(h)),
                _ => {
                    self.issues.push("kde_bandwidth", format!("expected silverman or a positive number, found `{other}`"));
                    None
                }
            },
            None => None,
        };
        Some(FitSettings {
            folds: folds?,
            nuisance: NuisanceConfig {
                spline: SplineConfig {
                    exposure_knots: exposure_knots?,
                    covariate_knots: covariate_knots?,
                    ridge_grid: ridge_grid?,
                },
                bandwidth: bandwidth?,
                heteroscedastic: false,
            },
        })
    }

    fn nodes(&mut self) -> Option<usize> {
        self.count("nodes", 5)
    }

    fn common(&mut self) -> Option<Common> {
        let seed = self.parse("seed", "a non-negative integer");
        let threads = self.parse("threads", "a non-negative integer");
        let out = match self.raw("out").map(str::trim) {
            None | Some("-") => Output::Stdout,
            Some(p) => Output::File(PathBuf::from(p)),
        };
        Some(Common { seed: seed?, threads: threads?, out })
    }

    fn data_settings(&mut self) -> Option<DataSettings> {
        let data = self.required::<PathBuf>("data", "a path");
        let support = if self.raw("support").is_some() { Some(self.support()?) } else { None };
        let oracle = if self.raw("oracle").is_some() { Some(self.dgp("oracle")?) } else { None };
        let nuisance: Option<NuisanceMode> = self.parse("nuisance", "fitted, oracle-pi or oracle");
        if let (Some(mode), None) = (nuisance, oracle) {
            if mode != NuisanceMode::AllFitted {
                self.issues.push("nuisance", format!("`{mode}` needs --oracle to name the design"));
            }
        }
        let fit = self.fit();
        let nodes = self.nodes();
        Some(DataSettings { data: data?, support, oracle, nuisance: nuisance?, fit: fit?, nodes: nodes? })
    }
}

/// Default covariate row of a design: its covariate mean.
pub fn default_covariates(dgp: &Dgp) -> Vec<f64> {
    match dgp.name() {
        DgpName::Sim7 => vec![1.0, 1.0],
        DgpName::Msm6 => vec![0.0],
        DgpName::Constant => vec![0.5],
    }
}

/// Fills defaults and checks every key, reporting all violations together.
pub fn validate_config(cfg: &RunConfig) -> Result<Resolved, ConfigErrors> {
    let command = cfg.command;
    let keys = command.keys();
    let mut issues = ConfigErrors::default();
    for k in cfg.values.keys() {
        if !keys.iter().any(|key| key.name == k) {
            issues.push(k, format!("unknown key for `{command}`"));
        }
    }
    let mut values: BTreeMap<String, String> =
        cfg.values.iter().filter(|(k, _)| keys.iter().any(|key| key.name == k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
    for key in &keys {
        if let Some(d) = command.default_for(key.name) {
            values.entry(key.name.to_string()).or_insert_with(|| d.to_string());
        }
    }
    // Defaults that depend on other keys.
    let dgp = values.get("dgp").and_then(|d| d.parse::<DgpName>().ok()).map(Dgp::new);
    if let Some(dgp) = dgp {
        if keys.iter().any(|k| k.name == "a_star") && command != Command::Estimate && command != Command::Msm {
            values.entry("a_star".into()).or_insert_with(|| dgp.default_a_star().to_string());
        }
        if command == Command::Paths {
            let x = default_covariates(&dgp).iter().map(f64::to_string).collect::<Vec<_>>().join(",");
            values.entry("x".into()).or_insert(x);
        }
    }
    if matches!(command, Command::Estimate | Command::Msm) {
        let mode = if values.contains_key("oracle") { "oracle" } else { "fitted" };
        values.entry("nuisance".into()).or_insert_with(|| mode.into());
        if command == Command::Msm && !values.contains_key("beta_out") {
            let dir = match values.get("out").map(String::as_str) {
                Some(p) if p != "-" => Path::new(p).parent().map(Path::to_path_buf).unwrap_or_default(),
                _ => PathBuf::new(),
            };
            values.insert("beta_out".into(), dir.join("beta.csv").to_string_lossy().into_owned());
        }
    }

    let mut r = Reader { values: &values, issues };
    let common = r.common();
    let job = match command {
        Command::Paths => (|| {
            let dgp = r.dgp("dgp");
            let families = r.families("families");
            let a_star = r.real("a_star");
            let epsilon = r.epsilon();
            let split_point = if r.raw("split_point").is_some() { r.real("split_point").map(Some) } else { Some(None) };
            let x: Option<Vec<f64>> = r.list("x", "numbers");
            let grid = r.grid();
            let points = r.count("points", 2);
            let nodes = r.nodes();
            let dgp = dgp?;
            let x = x?;
            if x.len() != dgp.d() {
                r.issues.push("x", format!("{} has {} covariates, got {}", dgp.name(), dgp.d(), x.len()));
                return None;
            }
            Some(Job::Paths(PathsJob {
                dgp,
                families: families?,
                a_star: a_star?,
                epsilon: epsilon?,
                split_point: split_point?,
                x,
                grid: grid?,
                points: points?,
                nodes: nodes?,
            }))
        })(),
        Command::Estimate => (|| {
            let source = r.data_settings();
            let family = r.family("family");
            let a_star = r.required::<f64>("a_star", "a number");
            let epsilon = r.epsilon();
            let grid = r.grid();
            let chi_square = r.parse::<bool>("chi_square", "true or false");
            Some(Job::Estimate(EstimateJob {
                source: source?,
                family: family?,
                a_star: a_star?,
                epsilon: epsilon?,
                grid: grid?,
                chi_square: chi_square?,
            }))
        })(),
        Command::Msm => (|| {
            let source = r.data_settings();
            let a_star = r.required::<f64>("a_star", "a number");
            let t_cuts = r.list::<f64>("t_cut", "numbers").filter(|v| {
                let ok = v.iter().all(|&t| t > 0.0 && t < 1.0);
                if !ok {
                    r.issues.push("t_cut", "every cutoff must lie in (0, 1)");
                }
                ok
            });
            let basis = match r.raw("basis").map(Basis::parse) {
                Some(Ok(b)) => Some(b),
                Some(Err(e)) => {
                    r.issues.push("basis", e.to_string());
                    None
                }
                None => None,
            };
            let beta_out = r.parse::<PathBuf>("beta_out", "a path");
            Some(Job::Msm(MsmJob {
                source: source?,
                a_star: a_star?,
                t_cuts: t_cuts?,
                basis: basis?,
                beta_out: beta_out?,
            }))
        })(),
        Command::Simulate => (|| {
            let dgp = r.dgp("dgp");
            let n = r.count("n", 1);
            let reps = r.count("reps", 1);
            let families = r.families("families").map(|fs| {
                // `all` here means every family with a one-step estimator.
                if r.raw("families").map(str::trim) == Some("all") {
                    fs.into_iter().filter(|f| f.has_eif()).collect()
                } else {
                    fs
                }
            });
            let families = families.filter(|fs| {
                let ok = fs.iter().all(|f| f.has_eif());
                if !ok {
                    r.issues.push("families", "the reflected tilt has no one-step estimator; use w, h and e");
                }
                ok
            });
            let mode = r.parse::<NuisanceMode>("mode", "oracle-pi, fitted or oracle");
            let a_star = r.real("a_star");
            let epsilon = r.epsilon();
            let grid = r.grid();
            let fit = r.fit();
            let truth_mc = r.count("truth_mc", 1);
            let truth_seed = r.parse::<u64>("truth_seed", "a non-negative integer");
            let cache_dir = match r.raw("cache_dir").map(str::trim) {
                None | Some("none") | Some("") => None,
                Some(p) => Some(PathBuf::from(p)),
            };
            Some(Job::Simulate(SimulateJob {
                dgp: dgp?,
                n: n?,
                reps: reps?,
                families: families?,
                mode: mode?,
                a_star: a_star?,
                epsilon: epsilon?,
                grid: grid?,
                fit: fit?,
                truth_mc: truth_mc?,
                truth_seed: truth_seed?,
                cache_dir,
            }))
        })(),
        Command::Truecurve => (|| {
            let dgp = r.dgp("dgp");
            let family = r.family("family");
            let a_star = r.real("a_star");
            let epsilon = r.epsilon();
            let grid = r.grid();
            let mc_n = r.count("mc_n", 1);
            let nodes = r.nodes();
            Some(Job::Truecurve(TruecurveJob {
                dgp: dgp?,
                family: family?,
                a_star: a_star?,
                epsilon: epsilon?,
                grid: grid?,
                mc_n: mc_n?,
                nodes: nodes?,
            }))
        })(),
    };
    let issues = r.issues;
    match (common, job) {
        (Some(common), Some(job)) if issues.0.is_empty() => Ok(Resolved { command, values, common, job }),
        _ => {
            debug_assert!(!issues.0.is_empty(), "every failed read records an issue");
            Err(issues)
        }
    }
}

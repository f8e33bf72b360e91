//! Command-line front end: builds φ for a (p, case, level), runs the
//! verification passes and writes one JSON report.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::path::PathBuf;
use std::time::Instant;
use thetalift_core::gsp4cosets::{closure_scan, cosets, disjointness_scan, generators_k, generators_klingen, CosetKind};
use thetalift_core::localfield::{ExtKind, FieldError, FieldParams};
use thetalift_core::oracle::{gauss_suite, representation_check, resolve_constants, scan_support};
use thetalift_core::quadspace::QuadSpace;
use thetalift_core::schwartz::SchwartzFunction;
use thetalift_core::thetalift::{
    bessel_at_identity, build_phi, fourier_identities, invariance_report, summand_overlaps, Case, Lift, LiftError, PhiBundle,
};
use thetalift_core::weilrep::involution_report;
use thiserror::Error;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_BUDGET: u64 = 20_000;
pub const DEFAULT_WORDS: usize = 100;
/// Members per Bessel support family before sampling kicks in.
pub const BESSEL_BUDGET: usize = 4_000;

#[derive(Parser, Debug)]
#[command(name = "thetalift", version, about = "Explicit theta-lift test functions: construction and verification reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Construct φ and serialize it.
    BuildPhi,
    /// Sweep the paramodular generators against φ.
    VerifyInvariance,
    /// Fourier involution on a test library, Haar constant and (ramified) the Fourier identities.
    Fourier,
    /// Coset representatives with closure and disjointness scans.
    Cosets,
    /// The Bessel integral at the identity.
    Bessel,
    /// Gauss sums, representation check and support scan against the numeric oracle.
    OracleCrosscheck,
    /// Everything above in one report.
    FullReport,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::BuildPhi => "build-phi",
            Command::VerifyInvariance => "verify-invariance",
            Command::Fourier => "fourier",
            Command::Cosets => "cosets",
            Command::Bessel => "bessel",
            Command::OracleCrosscheck => "oracle-crosscheck",
            Command::FullReport => "full-report",
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct Opts {
    /// Residue characteristic (odd prime).
    #[arg(long, global = true, default_value_t = 3)]
    pub p: u32,
    /// split, inert or ramified.
    #[arg(long, global = true)]
    pub case: Option<String>,
    #[arg(long, global = true)]
    pub n: Option<u32>,
    #[arg(long, global = true)]
    pub n1: Option<u32>,
    #[arg(long, global = true)]
    pub n2: Option<u32>,
    /// Sign of χ(δ) used in the ramified closed form.
    #[arg(long = "chi-delta", global = true, allow_hyphen_values = true)]
    pub chi_delta: Option<i8>,
    /// Level for `cosets` (defaults to the level of --case).
    #[arg(long = "N", global = true)]
    pub big_n: Option<i32>,
    /// K_mod_Kl, Kl_mod_KlT or K_mod_KT.
    #[arg(long, global = true)]
    pub kind: Option<String>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Residue depth for sweeps and scans.
    #[arg(long, global = true)]
    pub depth: Option<u32>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Point budget for the support scan.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    /// Random words for the representation check.
    #[arg(long, global = true, default_value_t = DEFAULT_WORDS)]
    pub words: usize,
    /// Include wall-clock timings (makes the report non-reproducible).
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Runtime(_) => "runtime",
        };
        json!({ "error": { "kind": kind, "message": self.to_string() } })
    }
}

impl From<LiftError> for CliError {
    fn from(e: LiftError) -> Self {
        match e {
            LiftError::Config(m) => CliError::Config(m),
            LiftError::Field(FieldError::Config(m)) => CliError::Config(m),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Validated run configuration.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub p: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Value>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub level: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_delta_sign: Option<i8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coset_kind: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    pub seed: u64,
    pub budget: u64,
    pub words: usize,
    #[serde(skip)]
    pub command: Option<Command>,
    #[serde(skip)]
    pub lift_case: Option<Case>,
    #[serde(skip)]
    pub kind: Option<CosetKind>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub timings: bool,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<RunConfig, CliError> {
        let o = &cli.opts;
        let cmd = cli.command;
        FieldParams::new(o.p, ExtKind::Split).map_err(|e| CliError::Config(e.to_string()))?;
        let lift_case = match &o.case {
            Some(s) => {
                let kind = ExtKind::parse(s).ok_or_else(|| CliError::Config(format!("unknown case {:?}", s)))?;
                Some(Case::new(kind, o.n, o.n1, o.n2)?)
            }
            None => {
                if cmd != Command::Cosets {
                    return Err(CliError::Config(format!("{} needs --case", cmd.name())));
                }
                None
            }
        };
        if let Some(s) = o.chi_delta {
            if s != 1 && s != -1 {
                return Err(CliError::Config("--chi-delta must be 1 or -1".into()));
            }
            if lift_case.map(|c| c.kind()) != Some(ExtKind::Ramified) {
                return Err(CliError::Config("--chi-delta applies to the ramified case only".into()));
            }
        }
        let (level, kind) = if cmd == Command::Cosets {
            let kind = match &o.kind {
                Some(k) => CosetKind::parse(k).ok_or_else(|| CliError::Config(format!("unknown coset kind {:?}", k)))?,
                None => CosetKind::KModKl,
            };
            let n = o.big_n.or(lift_case.map(|c| c.level())).ok_or_else(|| CliError::Config("cosets needs --N or --case".into()))?;
            if n < 1 {
                return Err(CliError::Config("cosets needs N >= 1".into()));
            }
            if n > 8 {
                return Err(CliError::Config("cosets supports N <= 8".into()));
            }
            (Some(n), Some(kind))
        } else {
            if o.big_n.is_some() || o.kind.is_some() {
                return Err(CliError::Config("--N and --kind apply to cosets only".into()));
            }
            (lift_case.map(|c| c.level()), None)
        };
        Ok(RunConfig {
            subcommand: cmd.name(),
            p: o.p,
            case: lift_case.map(|c| c.name()),
            levels: lift_case.map(|c| c.levels_json()),
            level,
            chi_delta_sign: o.chi_delta,
            coset_kind: kind.map(|k| k.name()),
            depth: o.depth,
            seed: o.seed,
            budget: o.budget.unwrap_or(DEFAULT_BUDGET),
            words: o.words,
            command: Some(cmd),
            lift_case,
            kind,
            output: o.output.clone(),
            timings: o.timings,
        })
    }
}

/// Report under construction. serde_json's map is ordered by key, so the
/// serialized report depends only on the content.
struct Report {
    artifacts: Map<String, Value>,
    verdicts: Map<String, Value>,
    extra: Map<String, Value>,
    timings: Map<String, Value>,
    passed: bool,
}

impl Report {
    fn new() -> Self {
        Report { artifacts: Map::new(), verdicts: Map::new(), extra: Map::new(), timings: Map::new(), passed: true }
    }

    fn verdict<T: Serialize>(&mut self, name: &str, passed: bool, detail: &T) {
        self.passed &= passed;
        let detail = serde_json::to_value(detail).unwrap_or(Value::Null);
        self.verdicts.insert(name.into(), json!({ "passed": passed, "detail": detail }));
    }

    fn timed<T>(&mut self, name: &str, f: impl FnOnce(&mut Report) -> Result<T, CliError>) -> Result<T, CliError> {
        let t = Instant::now();
        let out = f(self)?;
        self.timings.insert(name.into(), json!(t.elapsed().as_secs_f64()));
        Ok(out)
    }
}

/// Outcome of a run: the report and whether every verdict passed.
pub struct RunOutput {
    pub report: Value,
    pub passed: bool,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn to_string_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }
}

fn lift_of(cfg: &RunConfig) -> Result<(Lift, PhiBundle), CliError> {
    let case = cfg.lift_case.ok_or_else(|| CliError::Config("missing --case".into()))?;
    let lift = Lift::new(cfg.p, case)?;
    let bundle = build_phi(&lift)?;
    Ok((lift, bundle))
}

fn do_build_phi(r: &mut Report, lift: &Lift, bundle: &PhiBundle) -> Result<(), CliError> {
    r.artifacts.insert("phi".into(), bundle.to_json());
    let back = SchwartzFunction::from_json(&bundle.phi.to_json()).map_err(CliError::Runtime)?;
    let v = back.equal(&bundle.phi);
    r.verdict("phiJsonRoundTrip", v.equal, &v);
    if lift.case.kind() == ExtKind::Ramified {
        let o = summand_overlaps(bundle);
        r.verdict("summandSupportsDisjoint", o.is_empty(), &json!({ "overlappingPairs": o }));
    }
    Ok(())
}

fn do_invariance(r: &mut Report, cfg: &RunConfig, lift: &Lift, bundle: &PhiBundle) -> Result<(), CliError> {
    let depth = cfg.depth.unwrap_or(lift.level() as u32 + 1);
    let rep = invariance_report(lift, bundle, depth)?;
    r.verdict("invariance", rep.passed, &rep);
    Ok(())
}

fn do_fourier(r: &mut Report, lift: &Lift) -> Result<(), CliError> {
    let inv = involution_report(lift.space).map_err(runtime)?;
    r.verdict("fourierInvolution", inv.passed, &inv);
    if lift.case.kind() == ExtKind::Ramified {
        let consts = resolve_constants(&lift.space).map_err(runtime)?;
        let ids = fourier_identities(lift, &consts)?;
        let ok = !ids.is_empty() && ids.iter().all(|f| f.passed);
        r.verdict("fourierIdentities", ok, &ids);
    }
    Ok(())
}

fn do_cosets(r: &mut Report, p: u32, kind: CosetKind, n: i32, depth: Option<u32>) -> Result<(), CliError> {
    let list = cosets(kind, p, n);
    let q = p as u64;
    let expected = match kind {
        CosetKind::KModKl => Some(q.pow(n as u32) + q.pow(n as u32 - 1)),
        CosetKind::KModKT => Some((q + 1) * (q + 1)),
        CosetKind::KlModKlT => None,
    };
    let name = kind.name();
    r.artifacts.insert(format!("cosets.{}", name), list.to_json());
    let count_ok = expected.map_or(true, |e| e == list.len() as u64);
    r.verdict(&format!("cosetCount.{}", name), count_ok, &json!({ "count": list.len(), "expected": expected }));
    let depth = depth.unwrap_or(n as u32 + 1);
    let fams = if kind == CosetKind::KlModKlT { generators_klingen(p, n, depth) } else { generators_k(p, n, depth) };
    let c = closure_scan(&list, &fams);
    r.verdict(&format!("cosetClosure.{}", name), c.passed(), &json!({ "depth": depth, "scan": c }));
    let d = disjointness_scan(&list);
    r.verdict(&format!("cosetDisjointness.{}", name), d.overlaps == 0 && d.undecided == 0, &d);
    Ok(())
}

fn do_bessel(r: &mut Report, cfg: &RunConfig, lift: &Lift, bundle: &PhiBundle) -> Result<(), CliError> {
    let b = bessel_at_identity(lift, bundle, cfg.chi_delta_sign, BESSEL_BUDGET)?;
    r.extra.insert("besselCoefficient".into(), json!(b.coefficient));
    r.extra.insert("nonzero".into(), json!(b.nonzero));
    r.verdict("besselNonzero", b.nonzero, &json!({ "coefficient": b.coefficient, "factored": b.factored }));
    r.verdict("besselFamiliesCertified", b.certified, &b.families);
    r.verdict(
        "besselAssemblyMatchesClosedForm",
        b.consistent,
        &json!({ "coefficient": b.coefficient, "assembled": b.assembled, "assembledCosetSum": b.assembled_coset_sum, "notes": b.notes }),
    );
    Ok(())
}

fn do_oracle(r: &mut Report, cfg: &RunConfig, lift: &Lift, bundle: &PhiBundle) -> Result<(), CliError> {
    r.timed("gaussSuite", |r| {
        let g = gauss_suite(cfg.p).map_err(runtime)?;
        r.verdict("gaussSuite", g.passed, &g);
        Ok(())
    })?;
    r.timed("representationCheck", |r| {
        let rc = representation_check(&QuadSpace::new(*lift.fp()), cfg.words, cfg.seed).map_err(runtime)?;
        r.verdict("representationCheck", rc.passed, &rc);
        Ok(())
    })?;
    r.timed("supportScan", |r| {
        let depth = cfg.depth.unwrap_or(lift.case.n_max() + 3);
        let s = scan_support(lift, bundle, depth, 1, cfg.budget, cfg.seed).map_err(runtime)?;
        r.verdict("supportScan", s.passed, &s);
        Ok(())
    })
}

/// Run one subcommand and assemble its report.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let cmd = cfg.command.ok_or_else(|| CliError::Config("no subcommand".into()))?;
    let mut r = Report::new();
    match cmd {
        Command::Cosets => {
            let kind = cfg.kind.unwrap_or(CosetKind::KModKl);
            let n = cfg.level.ok_or_else(|| CliError::Config("cosets needs --N".into()))?;
            r.timed("cosets", |r| do_cosets(r, cfg.p, kind, n, cfg.depth))?;
        }
        _ => {
            let (lift, bundle) = r.timed("buildPhi", |_| lift_of(cfg))?;
            let all = cmd == Command::FullReport;
            if all || cmd == Command::BuildPhi {
                do_build_phi(&mut r, &lift, &bundle)?;
            }
            if all || cmd == Command::VerifyInvariance {
                r.timed("invariance", |r| do_invariance(r, cfg, &lift, &bundle))?;
            }
            if all || cmd == Command::Fourier {
                r.timed("fourier", |r| do_fourier(r, &lift))?;
            }
            if all {
                let n = lift.level();
                if n >= 1 {
                    r.timed("cosets.K_mod_Kl", |r| do_cosets(r, cfg.p, CosetKind::KModKl, n, None))?;
                }
                if lift.case.kind() == ExtKind::Ramified {
                    r.timed("cosets.K_mod_KT", |r| do_cosets(r, cfg.p, CosetKind::KModKT, n, None))?;
                }
            }
            if all || cmd == Command::Bessel {
                r.timed("bessel", |r| do_bessel(r, cfg, &lift, &bundle))?;
            }
            if all || cmd == Command::OracleCrosscheck {
                do_oracle(&mut r, cfg, &lift, &bundle)?;
            }
        }
    }
    let mut out = Map::new();
    out.insert("config".into(), serde_json::to_value(cfg).map_err(runtime)?);
    out.insert("artifacts".into(), Value::Object(r.artifacts));
    out.insert("verdicts".into(), Value::Object(r.verdicts));
    out.insert("passed".into(), json!(r.passed));
    for (k, v) in r.extra {
        out.insert(k, v);
    }
    if cfg.timings {
        out.insert("timings".into(), Value::Object(r.timings));
    }
    Ok(RunOutput { report: Value::Object(out), passed: r.passed })
}

/// Size the rayon pool from THETALIFT_THREADS, if set.
pub fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("THETALIFT_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| CliError::Config(format!("THETALIFT_THREADS={:?} is not a count", v)))?;
        if n == 0 {
            return Err(CliError::Config("THETALIFT_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(runtime)?;
    }
    Ok(())
}

/// Parse, run and write; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{}", e);
                return 0;
            }
            let err = CliError::Config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return 2;
        }
    };
    let result = init_threads().and_then(|_| RunConfig::from_cli(&cli)).and_then(|cfg| {
        let out = run(&cfg)?;
        let text = out.to_string_pretty();
        match &cfg.output {
            Some(path) => std::fs::write(path, text).map_err(runtime)?,
            None => print!("{}", text),
        }
        Ok(out.exit_code())
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

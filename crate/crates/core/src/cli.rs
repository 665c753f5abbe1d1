//! Run configuration, the `run` driver and the command-line front end.
//!
//! A [`RunConfig`] is plain TOML; `--config` loads one, flags override its
//! fields and `--dump-config` writes the merged result back out.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::basis::ReferenceBasis;
use crate::custom::CustomProblem;
use crate::error::{HdgError, Result};
use crate::global::SolverOptions;
use crate::local::Var;
use crate::mesh::{BoundaryKind, Mesh};
use crate::problem::{builtin_problem, BuiltinProblem, ProblemSpec};
use crate::stabilization::{check_stability, StabilityVerdict, StabilizationConfig};
use crate::time::TimeIntegrator;
use crate::verification::{
    error_norms, error_quadrature, run_convergence_study, superconvergence_study, DtPolicy, ErrorReport,
    LevelResult,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_UNSTABLE: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// March one mesh and dump the final field.
    #[default]
    Solve,
    /// Convergence table over `levels`.
    Study,
    /// Stationary superconvergence table over `levels`.
    Superconvergence,
    /// Report the L2-stability conditions of the chosen `tau`.
    StabilityCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StepPolicy {
    /// `0.1 h` for `k <= 1`, `0.1 h^2` otherwise.
    Paper,
}

/// `dt = "paper"` or `dt = <value>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeStep {
    Policy(StepPolicy),
    Value(f64),
}

impl TimeStep {
    fn policy(self) -> DtPolicy {
        match self {
            TimeStep::Policy(StepPolicy::Paper) => DtPolicy::Paper,
            TimeStep::Value(v) => DtPolicy::Fixed(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TauPreset {
    PaperPeriodic,
    PaperDirichlet,
    Zero,
    /// Table read from `--tau-file`.
    CustomFile,
}

/// A named preset or an explicit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauSetting {
    Preset(TauPreset),
    Table(StabilizationConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<BuiltinProblem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem_file: Option<PathBuf>,
    pub k: usize,
    /// Element count for `solve`.
    pub n_elements: usize,
    /// Studies use `2^n` elements for `n` in `levels[0]..=levels[1]`.
    pub levels: [u32; 2],
    pub dt: TimeStep,
    pub t_final: f64,
    /// Defaults to the preset matching the problem's boundary kind.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<TauSetting>,
    pub allow_unstable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Solve,
            problem: None,
            problem_file: None,
            k: 1,
            n_elements: 32,
            levels: [3, 7],
            dt: TimeStep::Policy(StepPolicy::Paper),
            t_final: 0.1,
            tau: None,
            allow_unstable: false,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HdgError::InvalidConfig(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HdgError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| HdgError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HdgError::InvalidConfig(m));
        if self.k > 8 {
            return bad(format!("k must be in 0..=8, got {}", self.k));
        }
        if self.n_elements < 2 {
            return bad(format!("N must be >= 2, got {}", self.n_elements));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return bad(format!("T must be positive, got {}", self.t_final));
        }
        if let TimeStep::Value(v) = self.dt {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("dt must be positive, got {v}"));
            }
        }
        let [a, b] = self.levels;
        if a > b || b > 20 {
            return bad(format!("levels must satisfy A <= B <= 20, got {a}:{b}"));
        }
        if self.problem.is_some() && self.problem_file.is_some() {
            return bad("give either problem or problem_file, not both".into());
        }
        if self.tau == Some(TauSetting::Preset(TauPreset::CustomFile)) {
            return bad("tau preset custom-file needs a table (use --tau-file)".into());
        }
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        match (&self.problem_file, self.problem) {
            (Some(path), _) => CustomProblem::load(path)?.to_spec(),
            (None, p) => Ok(builtin_problem(p.unwrap_or(BuiltinProblem::P1))),
        }
    }

    pub fn stabilization(&self, boundary: BoundaryKind) -> StabilizationConfig {
        match &self.tau {
            None => match boundary {
                BoundaryKind::Periodic => StabilizationConfig::paper_periodic(),
                BoundaryKind::Dirichlet => StabilizationConfig::paper_dirichlet(),
            },
            Some(TauSetting::Preset(p)) => match p {
                TauPreset::PaperPeriodic => StabilizationConfig::paper_periodic(),
                TauPreset::PaperDirichlet => StabilizationConfig::paper_dirichlet(),
                TauPreset::Zero => StabilizationConfig::zero(),
                TauPreset::CustomFile => unreachable!("rejected by validate"),
            },
            Some(TauSetting::Table(t)) => *t,
        }
    }
}

/// Read a stabilization table from TOML.
pub fn load_tau_file(path: &Path) -> Result<StabilizationConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HdgError::InvalidConfig(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| HdgError::InvalidConfig(format!("{}: {e}", path.display())))
}

/// How a successful `run` ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done,
    /// Some study levels failed; their rows carry `-`.
    LevelFailures(Vec<String>),
    /// `stability-check` found violated conditions.
    Unstable(Vec<String>),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Done => EXIT_OK,
            Outcome::LevelFailures(_) => EXIT_SOLVER,
            Outcome::Unstable(_) => EXIT_UNSTABLE,
        }
    }
}

pub fn exit_code(err: &HdgError) -> i32 {
    match err {
        HdgError::InvalidConfig(_) | HdgError::InvalidProblem(_) | HdgError::InvalidMesh(_) | HdgError::Io(_) => {
            EXIT_CONFIG
        }
        HdgError::Unstable(_) => EXIT_UNSTABLE,
        _ => EXIT_SOLVER,
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn require_stable(cfg: &StabilizationConfig, alpha: f64, beta: f64, allow: bool) -> Result<()> {
    match check_stability(cfg, alpha, beta)? {
        StabilityVerdict::Fail(v) if !allow => Err(HdgError::Unstable(v)),
        _ => Ok(()),
    }
}

/// Execute one configuration. Tables go to `config.out` or `stdout`.
pub fn run(config: &RunConfig, stdout: &mut dyn Write) -> Result<Outcome> {
    config.validate()?;
    match config.mode {
        Mode::Superconvergence => return run_superconvergence(config, stdout),
        Mode::StabilityCheck => return run_stability_check(config, stdout),
        _ => {}
    }
    let problem = config.problem_spec()?;
    let cfg = config.stabilization(problem.boundary);
    require_stable(&cfg, problem.alpha, problem.beta, config.allow_unstable)?;
    match config.mode {
        Mode::Solve => run_solve(config, &problem, &cfg, stdout),
        Mode::Study => {
            let [a, b] = config.levels;
            let report = run_convergence_study(&problem, config.k, a..=b, config.dt.policy(), &cfg, config.t_final)?;
            emit(&config.out, &report.to_csv(), stdout)?;
            let failures: Vec<String> = report
                .levels
                .iter()
                .filter_map(|l| l.failure.as_ref().map(|f| format!("N={}: {f}", l.n_elements)))
                .collect();
            Ok(if failures.is_empty() {
                Outcome::Done
            } else {
                Outcome::LevelFailures(failures)
            })
        }
        _ => unreachable!(),
    }
}

fn run_solve(
    config: &RunConfig,
    problem: &ProblemSpec,
    cfg: &StabilizationConfig,
    stdout: &mut dyn Write,
) -> Result<Outcome> {
    let (a, b) = problem.domain;
    let mesh = Mesh::uniform(a, b, config.n_elements, problem.boundary)?;
    let dt = config.dt.policy().step(config.k, mesh.h());
    let mut ti = TimeIntegrator::new(problem, &mesh, config.k, cfg, dt, SolverOptions::default())?;
    let out = ti.march(config.t_final, |_| {})?;
    let field = &out.state.field;

    let sample = ReferenceBasis::with_quadrature(config.k, config.k + 2);
    let coeffs: Vec<_> = Var::ALL.iter().map(|&v| field.field(v)).collect();
    let mut dump = String::from("element,x,u,q,p,r,s\n");
    for e in 0..mesh.n_elements() {
        for (q, &xi) in sample.quadrature().nodes.iter().enumerate() {
            let _ = write!(dump, "{e},{:.12e}", mesh.to_physical(e, xi));
            for c in &coeffs {
                let _ = write!(dump, ",{:.12e}", sample.eval_at_quad(&c[e], q));
            }
            dump.push('\n');
        }
    }
    emit(&config.out, &dump, stdout)?;

    if let Some(exact) = &problem.exact {
        let nq = error_quadrature(ti.solver().basis());
        let report = ErrorReport {
            problem: problem.name.clone(),
            levels: vec![LevelResult {
                k: config.k,
                n_elements: mesh.n_elements(),
                h: mesh.h(),
                dt,
                errors: Some(error_norms(field, exact, out.state.t, &mesh, nq)),
                eoc: [None; 5],
                newton_iterations: out.max_newton_iterations,
                failure: None,
            }],
        };
        stdout.write_all(report.to_csv().as_bytes())?;
    }
    Ok(Outcome::Done)
}

fn run_superconvergence(config: &RunConfig, stdout: &mut dyn Write) -> Result<Outcome> {
    // The study problem is the periodic stationary `u - u_xxxxx = f`.
    let cfg = config.stabilization(BoundaryKind::Periodic);
    require_stable(&cfg, 0.0, -1.0, config.allow_unstable)?;
    let [a, b] = config.levels;
    let levels = superconvergence_study(config.k, a..=b, &cfg)?;
    let mut csv = String::from("k,N");
    for v in Var::ALL {
        let _ = write!(csv, ",eps_{0},eoc_eps_{0}", v.name());
    }
    for name in ["u_hat", "q_hat", "p_hat", "r_hat", "s_hat"] {
        let _ = write!(csv, ",{name},eoc_{name}");
    }
    csv.push('\n');
    let cell = |s: &mut String, v: Option<f64>| match v {
        Some(x) => {
            let _ = write!(s, ",{x:.3e}");
        }
        None => s.push_str(",-"),
    };
    for l in &levels {
        let _ = write!(csv, "{},{}", config.k, l.n_elements);
        for v in 0..5 {
            cell(&mut csv, Some(l.projected[v]));
            cell(&mut csv, l.projected_eoc[v]);
        }
        for v in 0..5 {
            cell(&mut csv, Some(l.traces[v]));
            cell(&mut csv, l.trace_eoc[v]);
        }
        csv.push('\n');
    }
    emit(&config.out, &csv, stdout)?;
    Ok(Outcome::Done)
}

fn run_stability_check(config: &RunConfig, stdout: &mut dyn Write) -> Result<Outcome> {
    let problem = config.problem_spec()?;
    let cfg = config.stabilization(problem.boundary);
    let verdict = check_stability(&cfg, problem.alpha, problem.beta)?;
    let mut text = format!("alpha = {}, beta = {}\n", problem.alpha, problem.beta);
    let outcome = match verdict {
        StabilityVerdict::Pass => {
            text.push_str("PASS\n");
            Outcome::Done
        }
        StabilityVerdict::Fail(v) => {
            text.push_str("FAIL\n");
            for c in &v {
                let _ = writeln!(text, "  violated: {c}");
            }
            Outcome::Unstable(v)
        }
    };
    emit(&config.out, &text, stdout)?;
    Ok(outcome)
}

/// Command-line flags. Unset flags keep the value from `--config` (or the
/// default).
#[derive(Debug, Parser)]
#[command(name = "hdg5", version, about = "HDG solver for u_t + alpha u_xxx + beta u_xxxxx + F(u)_x = f")]
pub struct Cli {
    /// TOML run configuration to start from.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Builtin problem P1..P4.
    #[arg(long, value_parser = parse_problem)]
    pub problem: Option<BuiltinProblem>,
    /// TOML problem file (see the `custom` module docs).
    #[arg(long = "problem-file")]
    pub problem_file: Option<PathBuf>,
    /// Polynomial degree.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of elements (solve mode).
    #[arg(long = "N")]
    pub n_elements: Option<usize>,
    /// Mesh levels `A:B`, `2^n` elements each (study modes).
    #[arg(long, value_parser = parse_levels)]
    pub levels: Option<[u32; 2]>,
    /// Fixed time step.
    #[arg(long, conflicts_with = "dt_policy")]
    pub dt: Option<f64>,
    #[arg(long = "dt-policy", value_enum)]
    pub dt_policy: Option<StepPolicy>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    #[arg(long = "tau-preset", value_enum)]
    pub tau_preset: Option<TauPreset>,
    /// TOML stabilization table for `--tau-preset custom-file`.
    #[arg(long = "tau-file")]
    pub tau_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, conflicts_with_all = ["mode", "study", "superconvergence", "stability_check"])]
    pub solve: bool,
    #[arg(long, conflicts_with_all = ["mode", "superconvergence", "stability_check"])]
    pub study: bool,
    #[arg(long, conflicts_with_all = ["mode", "stability_check"])]
    pub superconvergence: bool,
    #[arg(long = "stability-check", conflicts_with = "mode")]
    pub stability_check: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run even if the stabilization violates the stability conditions.
    #[arg(long = "allow-unstable")]
    pub allow_unstable: bool,
    /// Write the merged configuration (to PATH or stdout) and exit.
    #[arg(long = "dump-config", value_name = "PATH", num_args = 0..=1, default_missing_value = "-")]
    pub dump_config: Option<PathBuf>,
}

fn parse_problem(s: &str) -> std::result::Result<BuiltinProblem, String> {
    BuiltinProblem::parse(s).ok_or_else(|| format!("unknown problem `{s}` (expected P1..P4)"))
}

fn parse_levels(s: &str) -> std::result::Result<[u32; 2], String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("levels must look like A:B, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("bad level `{v}`: {e}"));
    Ok([p(a)?, p(b)?])
}

impl Cli {
    /// Merge flags over `--config` (or the defaults).
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.problem {
            c.problem = Some(p);
            c.problem_file = None;
        }
        if let Some(f) = &self.problem_file {
            c.problem_file = Some(f.clone());
            c.problem = None;
        }
        if let Some(k) = self.k {
            c.k = k;
        }
        if let Some(n) = self.n_elements {
            c.n_elements = n;
        }
        if let Some(l) = self.levels {
            c.levels = l;
        }
        if let Some(dt) = self.dt {
            c.dt = TimeStep::Value(dt);
        }
        if let Some(p) = self.dt_policy {
            c.dt = TimeStep::Policy(p);
        }
        if let Some(t) = self.t_final {
            c.t_final = t;
        }
        match (self.tau_preset, &self.tau_file) {
            (Some(TauPreset::CustomFile), Some(f)) | (None, Some(f)) => {
                c.tau = Some(TauSetting::Table(load_tau_file(f)?));
            }
            (Some(TauPreset::CustomFile), None) => {
                return Err(HdgError::InvalidConfig("--tau-preset custom-file needs --tau-file".into()));
            }
            (Some(p), Some(_)) => {
                return Err(HdgError::InvalidConfig(format!("--tau-file conflicts with --tau-preset {p:?}")));
            }
            (Some(p), None) => c.tau = Some(TauSetting::Preset(p)),
            (None, None) => {}
        }
        if let Some(m) = self.mode {
            c.mode = m;
        }
        for (flag, m) in [
            (self.solve, Mode::Solve),
            (self.study, Mode::Study),
            (self.superconvergence, Mode::Superconvergence),
            (self.stability_check, Mode::StabilityCheck),
        ] {
            if flag {
                c.mode = m;
            }
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        c.allow_unstable |= self.allow_unstable;
        c.validate()?;
        Ok(c)
    }
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
            } else {
                let _ = write!(stdout, "{}", e.render());
            }
            return code;
        }
    };
    let config = match cli.to_config() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    if let Some(path) = &cli.dump_config {
        let text = config.to_toml();
        let res = if path.as_os_str() == "-" {
            stdout.write_all(text.as_bytes()).map_err(HdgError::from)
        } else {
            std::fs::write(path, text).map_err(HdgError::from)
        };
        return match res {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                exit_code(&e)
            }
        };
    }
    match run(&config, stdout) {
        Ok(outcome) => {
            if let Outcome::LevelFailures(f) = &outcome {
                for line in f {
                    let _ = writeln!(stderr, "level failed: {line}");
                }
            }
            outcome.exit_code()
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

//! JSON-configured batch front end.
//!
//! A config document fixes the domain, grid, nonlinearity, weight and solver
//! settings; `--set dotted.path=value` edits it before validation. A top-level
//! JSON array is a sweep: each element runs independently (in parallel) into
//! its own numbered subdirectory. The environment variable
//! `MONODUAL_OUTPUT_DIR` overrides `output.dir`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::convex::{Nonlinearity, Table};
use crate::domain::{Grid, GridFunction, RevolutionSpec};
use crate::energy::{Problem, ProblemOptions};
use crate::solver::{solve, SolverConfig};
use crate::verify;
use crate::{Error, Result, VERSION};

pub const OUTPUT_DIR_ENV: &str = "MONODUAL_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub domain: DomainSection,
    pub grid: GridSection,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub weight_a: WeightSpec,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cells: Vec<usize>,
    #[serde(default)]
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Power {
        p: f64,
    },
    Tabulated {
        table_path: PathBuf,
        p: f64,
        /// Defaults to `p`.
        mu: Option<f64>,
        /// Defaults to `2^{1/(p-1)}`.
        ell: Option<f64>,
        /// Defaults to 1.
        growth_c: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant {
        value: f64,
    },
    /// `offset + |x|^alpha` with `|x|² = Σ t_k²`.
    RadialPower {
        alpha: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `∏_k b_k(t_k)`, one factor per axis.
    Separable {
        factors: Vec<Factor>,
    },
    /// A grid-function CSV on the configured grid.
    Csv {
        path: PathBuf,
    },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Factor {
    /// `Σ c_j t^j`.
    Polynomial { coeffs: Vec<f64> },
    /// Piecewise-linear through `(t, value)` points, constant outside.
    Points { points: Vec<[f64; 2]> },
}

impl Factor {
    fn eval(&self, t: f64) -> f64 {
        match self {
            Factor::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            Factor::Points { points } => {
                let i = points.partition_point(|p| p[0] <= t);
                if i == 0 {
                    points[0][1]
                } else if i == points.len() {
                    points[i - 1][1]
                } else {
                    let ([t0, v0], [t1, v1]) = (points[i - 1], points[i]);
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub allow_supercritical: bool,
    pub cone_tol: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        let d = ProblemOptions::default();
        ProblemSection {
            allow_supercritical: d.allow_supercritical,
            cone_tol: d.cone_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("output"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl ConfigDoc {
    pub fn from_value(v: Value) -> Result<Self> {
        let doc: ConfigDoc = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.domain.n.len() != self.grid.cells.len() {
            return Err(Error::Config(format!(
                "grid.cells has {} entries but domain.n has {}",
                self.grid.cells.len(),
                self.domain.n.len()
            )));
        }
        if let WeightSpec::Separable { factors } = &self.weight_a {
            if factors.len() != self.domain.n.len() {
                return Err(Error::Config(format!(
                    "weight_a.factors needs one factor per axis ({}), got {}",
                    self.domain.n.len(),
                    factors.len()
                )));
            }
            for f in factors {
                match f {
                    Factor::Points { points } if points.is_empty() => {
                        return Err(Error::Config("weight_a factor with no points".into()))
                    }
                    Factor::Points { points } if points.windows(2).any(|w| w[1][0] <= w[0][0]) => {
                        return Err(Error::Config(
                            "weight_a factor points must have increasing t".into(),
                        ))
                    }
                    _ => {}
                }
            }
        }
        self.solver.validate()
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(
            RevolutionSpec::new(self.domain.n.clone())?,
            self.grid.cells.clone(),
        )
    }

    /// Resolves relative file references against `base`.
    pub fn nonlinearity(&self, base: &Path) -> Result<Nonlinearity> {
        match &self.nonlinearity {
            NonlinearitySpec::Power { p } => Nonlinearity::power(*p),
            NonlinearitySpec::Tabulated {
                table_path,
                p,
                mu,
                ell,
                growth_c,
            } => {
                let table = Table::from_file(base.join(table_path))?;
                Nonlinearity::tabulated(
                    table,
                    *p,
                    mu.unwrap_or(*p),
                    ell.unwrap_or_else(|| 2f64.powf(1.0 / (p - 1.0))),
                    growth_c.unwrap_or(1.0),
                )
            }
        }
    }

    pub fn weight(&self, grid: &Arc<Grid>, base: &Path) -> Result<GridFunction> {
        let g = match &self.weight_a {
            WeightSpec::Constant { value } => GridFunction::constant(grid.clone(), *value),
            WeightSpec::RadialPower { alpha, offset } => GridFunction::from_fn(grid.clone(), |t| {
                offset + t.iter().map(|x| x * x).sum::<f64>().powf(alpha / 2.0)
            }),
            WeightSpec::Separable { factors } => GridFunction::from_fn(grid.clone(), |t| {
                t.iter().zip(factors).map(|(x, f)| f.eval(*x)).product()
            }),
            WeightSpec::Csv { path } => GridFunction::read_csv(grid.clone(), base.join(path))?,
        };
        if g.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(
                "weight_a evaluates to a non-finite value".into(),
            ));
        }
        Ok(g)
    }

    pub fn problem(&self, base: &Path) -> Result<Problem> {
        let grid = self.grid()?;
        let opts = ProblemOptions {
            allow_supercritical: self.problem.allow_supercritical,
            cone_tol: self.problem.cone_tol,
        };
        Problem::with_options(
            self.weight(&grid, base)?,
            self.nonlinearity(base)?,
            self.grid.eps,
            opts,
        )
    }
}

/// Applies `path.to.key=value`; the value is parsed as JSON when possible
/// and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override path {path:?}")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override {path:?} crosses a non-object")))?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| Error::Config(format!("override {path:?} crosses a non-object")))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[derive(Debug, Parser)]
#[command(
    name = "monodual",
    version,
    about = "Positive monotone solutions of -Δu + u = a f(u) on domains of revolution"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON config file (an array of configs runs a sweep).
    pub config: PathBuf,
    /// Override a config entry, e.g. `--set solver.tol_residual=1e-9`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured solver; writes the solution CSV and a JSON report.
    Solve(ConfigArgs),
    /// Run the verification suite for the configured nonlinearity.
    Verify {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Tabulate F, f, F* and (F*)' to CSV.
    Conjugate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 201)]
        samples: usize,
    },
    /// Scan L^q / Y_m ratios of random cone elements under refinement.
    EmbedCheck {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 4.0)]
        q: f64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Convergence study on the built-in manufactured solution.
    Manufactured {
        /// Block dimension of the single-block domain.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [64usize, 128, 256])]
        cells: Vec<usize>,
    },
}

/// Distinguishes bad input (exit 2) from runs that did not meet their
/// contract (exit 1).
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::LinearSolveDidNotConverge { .. }
        | Error::ProjectionDidNotConverge { .. }
        | Error::DegenerateIteration(_)
        | Error::MountainPassSetup(_)
        | Error::NotInCone { .. } => 1,
        _ => 2,
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Loaded {
    docs: Vec<ConfigDoc>,
    sweep: bool,
    base: PathBuf,
    out: PathBuf,
}

fn load(args: &ConfigArgs) -> Result<Loaded> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::io(&args.config, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: args.config.clone(),
        message: e.to_string(),
    })?;
    let (items, sweep) = match value {
        Value::Array(v) if v.is_empty() => return Err(Error::Config("empty config array".into())),
        Value::Array(v) => (v, true),
        v => (vec![v], false),
    };
    let mut docs = Vec::with_capacity(items.len());
    for mut item in items {
        for o in &args.overrides {
            apply_override(&mut item, o)?;
        }
        docs.push(ConfigDoc::from_value(item)?);
    }
    let base = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let out = match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => docs[0].output.dir.clone(),
    };
    Ok(Loaded {
        docs,
        sweep,
        base,
        out,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write(path, &s)
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'a str,
    config: &'a ConfigDoc,
    #[serde(flatten)]
    body: T,
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Solve(args) => cmd_solve(&args),
        Command::Verify { cfg } => cmd_verify(&cfg),
        Command::Conjugate { cfg, samples } => cmd_conjugate(&cfg, samples),
        Command::EmbedCheck { cfg, q, samples } => cmd_embed(&cfg, q, samples),
        Command::Manufactured { n, cells } => cmd_manufactured(n, &cells),
    }
}

fn run_dirs(l: &Loaded) -> Vec<PathBuf> {
    if l.sweep {
        (0..l.docs.len())
            .map(|i| l.out.join(format!("run_{i:03}")))
            .collect()
    } else {
        vec![l.out.clone()]
    }
}

/// Runs every document (in parallel for sweeps) and folds exit codes.
fn for_each_doc(
    l: &Loaded,
    f: impl Fn(&ConfigDoc, &Path) -> Result<i32> + Sync + Send,
) -> Result<i32> {
    let dirs = run_dirs(l);
    let results: Vec<Result<i32>> = l
        .docs
        .par_iter()
        .zip(dirs.par_iter())
        .map(|(doc, dir)| {
            prepare_dir(dir)?;
            let mut doc = doc.clone();
            doc.output.dir = dir.clone();
            f(&doc, dir)
        })
        .collect();
    let mut code = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => code = code.max(c),
            Err(e) if l.sweep => {
                eprintln!("error in sweep entry {i}: {e}");
                code = code.max(exit_code(&e));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(code)
}

fn cmd_solve(args: &ConfigArgs) -> Result<i32> {
    let l = load(args)?;
    for_each_doc(&l, |doc, dir| {
        let pb = doc.problem(&l.base)?;
        let rep = solve(&pb, &doc.solver)?;
        let csv = doc.output.formats.contains(&Format::Csv);
        if csv {
            write(&dir.join("solution.csv"), &rep.u.to_csv())?;
            write(
                &dir.join("residual_history.csv"),
                &rep.residual_history_csv(),
            )?;
            write(&dir.join("energy_history.csv"), &rep.energy_history_csv())?;
            let grid = pb.grid();
            if grid.dim() >= 2 {
                let top: Vec<usize> = grid.cells().iter().map(|s| s - 1).collect();
                for k in 0..grid.dim() {
                    write(
                        &dir.join(format!("slice_axis{}.csv", k + 1)),
                        &rep.u.line_slice_csv(k, &top),
                    )?;
                }
            }
        }
        if doc.output.formats.contains(&Format::Json) {
            let energy = pb.energy(&rep.u)?;
            #[derive(Serialize)]
            struct Body<'a> {
                report: &'a crate::solver::SolveReport,
                energy: crate::energy::EnergyReport,
            }
            let env = Envelope {
                version: VERSION,
                config: doc,
                body: Body {
                    report: &rep,
                    energy,
                },
            };
            write_json(&dir.join("report.json"), &env)?;
        }
        println!(
            "{}: {} | residual {:.3e} | gap {:.3e} | {} iterations | {:.3} s",
            dir.display(),
            rep.message,
            rep.strong_residual,
            rep.consistency_gap,
            rep.outer_iterations,
            rep.wall_time
        );
        Ok(if rep.converged { 0 } else { 1 })
    })
}

fn cmd_verify(args: &ConfigArgs) -> Result<i32> {
    let l = load(args)?;
    for_each_doc(&l, |doc, dir| {
        let nl = doc.nonlinearity(&l.base)?;
        let rep = verify::run_suite(&nl, doc.solver.seed)?;
        for c in &rep.checks {
            let flag = if c.passed { "pass" } else { "FAIL" };
            println!(
                "{flag} {:<26} slack {:>11.3e}  {}",
                c.name, c.slack, c.message
            );
        }
        let env = Envelope {
            version: VERSION,
            config: doc,
            body: &rep,
        };
        write_json(&dir.join("verify.json"), &env)?;
        Ok(if rep.passed { 0 } else { 1 })
    })
}

fn cmd_conjugate(args: &ConfigArgs, samples: usize) -> Result<i32> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "--samples must be at least 2".into(),
        ));
    }
    let l = load(args)?;
    for_each_doc(&l, |doc, dir| {
        let nl = doc.nonlinearity(&l.base)?;
        let x_max = match &nl.kind {
            crate::convex::NonlinearityKind::Power { .. } => 10.0,
            crate::convex::NonlinearityKind::Tabulated(t) => t.t_max(),
        };
        let mut out = String::from("x,F,f,Fstar,dFstar\n");
        for i in 0..samples {
            let x = x_max * i as f64 / (samples - 1) as f64;
            let (cs, cd) = match (nl.conjugate(x), nl.conjugate_derivative(x)) {
                (Ok(a), Ok(b)) => (a.to_string(), b.to_string()),
                _ => (String::new(), String::new()),
            };
            let _ = writeln!(out, "{x},{},{},{cs},{cd}", nl.big_f(x), nl.f(x));
        }
        write(&dir.join("conjugate.csv"), &out)?;
        println!("wrote {}", dir.join("conjugate.csv").display());
        Ok(0)
    })
}

fn cmd_embed(args: &ConfigArgs, q: f64, samples: usize) -> Result<i32> {
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "--q must be at least 1, got {q}"
        )));
    }
    let l = load(args)?;
    for_each_doc(&l, |doc, dir| {
        let spec = RevolutionSpec::new(doc.domain.n.clone())?;
        let rep =
            verify::embedding_ratio_scan(&spec, &doc.grid.cells, q, samples, doc.solver.seed)?;
        println!(
            "{} {}",
            if rep.passed { "pass" } else { "FAIL" },
            rep.message
        );
        let env = Envelope {
            version: VERSION,
            config: doc,
            body: &rep,
        };
        write_json(&dir.join("embed_check.json"), &env)?;
        Ok(if rep.passed { 0 } else { 1 })
    })
}

fn cmd_manufactured(n: usize, cells: &[usize]) -> Result<i32> {
    if cells.len() < 2 {
        return Err(Error::InvalidArgument(
            "--cells needs at least two resolutions".into(),
        ));
    }
    let rep = verify::manufactured_study(n, cells)?;
    for (i, (s, e)) in rep.cells.iter().zip(&rep.linf_errors).enumerate() {
        match rep.orders.get(i.wrapping_sub(1)) {
            Some(o) if i > 0 => println!("cells {s:>6}  Linf error {e:.4e}  order {o:.3}"),
            _ => println!("cells {s:>6}  Linf error {e:.4e}"),
        }
    }
    let ok = rep.orders.iter().all(|o| (1.7..=2.3).contains(o));
    Ok(if ok { 0 } else { 1 })
}

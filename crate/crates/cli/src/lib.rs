//! Batch front end for `fracspline`: solves and convergence sweeps driven by a
//! configuration file, plus CSV dumps of basis functions and Mittag-Leffler
//! values.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fracspline::analysis::{convergence, linf_error, stability_check, ConvergenceReport, ErrorGrid, ErrorReport};
use fracspline::bspline::basis_eval;
use fracspline::collocation::solve;
use fracspline::fractional::CaputoEvaluator;
use fracspline::mittag_leffler::{ml_scalar, MLOptions, MittagLefflerReference};
use fracspline::{BasisIndex, FractionalOrder, FractionalProblem, MLParams, SplineDegree, SystemMatrix, Term};
use nalgebra::DVector;

pub use config::{ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(#[from] fracspline::Error),
}

impl CliError {
    /// 2 for anything the user can fix in the input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    RunConfig::parse(&text).map_err(|source| CliError::Config { path: path.display().to_string(), source })
}

/// Full-precision field: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Csv {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Csv {
    fn create(path: PathBuf, header: &[String]) -> Result<Self, CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut csv = Self { out: BufWriter::new(file), path };
        csv.row(header)?;
        Ok(csv)
    }

    fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        writeln!(self.out, "{}", fields.join(",")).map_err(io_err(&self.path))
    }

    fn finish(mut self) -> Result<PathBuf, CliError> {
        self.out.flush().map_err(io_err(&self.path))?;
        Ok(self.path)
    }
}

fn numbered(prefix: &str, m: usize) -> impl Iterator<Item = String> + '_ {
    (1..=m).map(move |i| format!("{prefix}_{i}"))
}

/// Exact solution available for a configured problem.
pub enum Reference {
    MittagLeffler(Box<MittagLefflerReference>),
    Terms { terms: Vec<Vec<Term>>, order: FractionalOrder },
}

impl Reference {
    pub fn for_config(cfg: &RunConfig, problem: &FractionalProblem) -> Result<Option<Self>, CliError> {
        if let Some(terms) = &cfg.problem.exact {
            return Ok(Some(Reference::Terms { terms: terms.clone(), order: cfg.order() }));
        }
        if problem.is_forced() {
            return Ok(None);
        }
        Ok(Some(Reference::MittagLeffler(Box::new(MittagLefflerReference::new(problem)?))))
    }

    pub fn eval(&self, t: f64) -> fracspline::Result<DVector<f64>> {
        match self {
            Reference::MittagLeffler(r) => r.eval(t),
            Reference::Terms { terms, order } => Ok(DVector::from_iterator(
                terms.len(),
                terms.iter().map(|c| c.iter().map(|term| term.eval(t, *order)).sum::<f64>()),
            )),
        }
    }
}

pub struct SolveSummary {
    pub residual_norm: f64,
    pub error: Option<ErrorReport>,
    pub stable: bool,
    pub csv: PathBuf,
    pub rows: usize,
}

fn resolve_output(out_dir: Option<&Path>, name: &str) -> PathBuf {
    match out_dir {
        Some(dir) => dir.join(name),
        None => PathBuf::from(name),
    }
}

/// Solves the configured problem and writes the solution table.
pub fn run_solve(cfg: &RunConfig, out_dir: Option<&Path>, grid_level: Option<u32>) -> Result<SolveSummary, CliError> {
    let problem = cfg.problem()?;
    let colloc = cfg.collocation()?;
    let stable = stability_check(&SystemMatrix::new(problem.matrix().clone())?);
    let sol = solve(&problem, &colloc)?;
    let reference = Reference::for_config(cfg, &problem)?;
    let level = grid_level.unwrap_or_else(|| cfg.output.grid_level.resolve(colloc.colloc_level()));
    let m = problem.dim();

    let mut header = vec!["t".to_string()];
    header.extend(numbered("x", m));
    if reference.is_some() {
        header.extend(numbered("ref", m));
        header.extend(numbered("err", m));
    }
    let mut csv = Csv::create(resolve_output(out_dir, &cfg.output.solution), &header)?;
    let grid = fracspline::collocation::collocation_grid(level, colloc.horizon());
    for &t in &grid {
        let x = sol.evaluate(t)?;
        let mut row = vec![fmt_f64(t)];
        row.extend(x.iter().map(|&v| fmt_f64(v)));
        if let Some(r) = &reference {
            let r = r.eval(t)?;
            row.extend(r.iter().map(|&v| fmt_f64(v)));
            row.extend((&x - &r).iter().map(|&v| fmt_f64(v.abs())));
        }
        csv.row(&row)?;
    }
    let csv = csv.finish()?;
    let error = match &reference {
        Some(r) => Some(linf_error(&sol, |t| r.eval(t), level)?),
        None => None,
    };
    Ok(SolveSummary { residual_norm: sol.residual_norm(), error, stable, csv, rows: grid.len() })
}

pub struct ConvergeSummary {
    pub report: ConvergenceReport,
    pub csv: PathBuf,
}

/// Convergence sweep over `j_min ..= j_max`, `s` following the configuration.
pub fn run_converge(
    cfg: &RunConfig,
    j_min: u32,
    j_max: u32,
    out_dir: Option<&Path>,
    grid_level: Option<u32>,
) -> Result<ConvergeSummary, CliError> {
    if j_min > j_max {
        return Err(CliError::Usage(format!("--j-min ({j_min}) must not exceed --j-max ({j_max})")));
    }
    let levels: Vec<u32> = (j_min..=j_max).collect();
    for &j in &levels {
        cfg.collocation_at(j).map_err(|e| CliError::Usage(format!("level j = {j}: {e}")))?;
    }
    if cfg.discretization.s != config::Level::Offset(1) {
        return Err(CliError::Usage("converge runs with s = j+1; remove the `s` key from [discretization]".into()));
    }
    let problem = cfg.problem()?;
    let Some(reference) = Reference::for_config(cfg, &problem)? else {
        return Err(CliError::Usage(
            "convergence needs a reference: use an unforced problem or give exact_<i> keys".into(),
        ));
    };
    let grid = match (grid_level, cfg.output.grid_level) {
        (Some(k), _) | (None, config::Level::Fixed(k)) => ErrorGrid::Fixed(k),
        (None, config::Level::Offset(k)) => ErrorGrid::AboveCollocation(k),
    };
    let report = convergence(&problem, |t| reference.eval(t), cfg.degree(), &levels, grid)?;

    let m = problem.dim();
    let mut header = vec!["j".to_string()];
    header.extend(numbered("err", m));
    header.extend(numbered("rho", m));
    let mut csv = Csv::create(resolve_output(out_dir, &cfg.output.convergence), &header)?;
    for (k, e) in report.errors.iter().enumerate() {
        let mut row = vec![e.j.to_string()];
        row.extend(e.per_component_linf.iter().map(|&v| fmt_f64(v)));
        match k.checked_sub(1).map(|p| &report.rho[p]) {
            Some(r) => row.extend(r.iter().map(|v| v.map(fmt_f64).unwrap_or_default())),
            None => row.extend(std::iter::repeat_n(String::new(), m)),
        }
        csv.row(&row)?;
    }
    Ok(ConvergeSummary { report, csv: csv.finish()? })
}

/// Samples `φ_{jℓ}` and `D^γ φ_{jℓ}` for the edge translates and the first
/// interior one on `[0, (n+1)/2^j]`.
pub fn run_basis(
    n: u32,
    gammas: &[f64],
    levels: &[u32],
    grid_step: f64,
    out_dir: Option<&Path>,
) -> Result<PathBuf, CliError> {
    let degree = SplineDegree::new(n)
        .and_then(|d| d.require_smooth())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(CliError::Usage(format!("--grid-step must be positive, got {grid_step}")));
    }
    if levels.iter().any(|&j| j > 30) {
        return Err(CliError::Usage("levels above 30 are not supported".into()));
    }
    let orders = gammas
        .iter()
        .map(|&g| FractionalOrder::new(g).map_err(|e| CliError::Usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let header: Vec<String> =
        ["series", "level", "ell", "gamma", "t", "phi", "caputo"].iter().map(|s| s.to_string()).collect();
    let mut csv = Csv::create(resolve_output(out_dir, "basis.csv"), &header)?;
    for &order in &orders {
        let eval = CaputoEvaluator::new(degree, order)?;
        for &j in levels {
            let t_max = (n + 1) as f64 / (j as f64).exp2();
            let steps = (t_max / grid_step).round() as usize;
            for ell in -(n as i64)..=0 {
                let idx = BasisIndex::new(degree, j, ell)?;
                let tag = format!("j{j}_l{ell}_g{order}");
                for k in 0..=steps {
                    let t = (k as f64 * grid_step).min(t_max);
                    let row = vec![
                        tag.clone(),
                        j.to_string(),
                        ell.to_string(),
                        order.to_string(),
                        fmt_f64(t),
                        fmt_f64(basis_eval(&idx, t)),
                        fmt_f64(eval.basis(&idx, t)?),
                    ];
                    csv.row(&row)?;
                }
            }
        }
    }
    csv.finish()
}

/// Tabulates `E_{γ,β}(z)` for `z = z_min, z_min + step, …, z_max`.
pub fn run_ml(
    gamma: f64,
    beta: f64,
    z_min: f64,
    z_max: f64,
    step: f64,
    out_dir: Option<&Path>,
) -> Result<(PathBuf, usize), CliError> {
    let params = MLParams::new(gamma, beta).map_err(|e| CliError::Usage(e.to_string()))?;
    if !(z_min.is_finite() && z_max.is_finite() && z_min <= z_max) {
        return Err(CliError::Usage(format!("need finite z-min <= z-max, got {z_min} and {z_max}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Usage(format!("--step must be positive, got {step}")));
    }
    let opts = MLOptions::default();
    if z_min.abs() > opts.z_max || z_max.abs() > opts.z_max {
        return Err(CliError::Usage(format!("|z| must stay within {}", opts.z_max)));
    }
    let count = ((z_max - z_min) / step + 1e-9).floor() as usize + 1;
    let values = (0..count)
        .map(|k| {
            let z = (z_min + k as f64 * step).min(z_max);
            // the user picked the range, so an untrusted series is an input problem
            ml_scalar(params, z).map(|e| (z, e)).map_err(|e| match e {
                fracspline::Error::ArgumentOutOfRange { .. }
                | fracspline::Error::SeriesNotConverged { .. }
                | fracspline::Error::SeriesCancellation { .. } => {
                    CliError::Usage(format!("z = {z} lies outside the trusted range: {e}"))
                }
                other => CliError::Numerical(other),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::create(resolve_output(out_dir, "ml.csv"), &["z".to_string(), "E".to_string()])?;
    for &(z, e) in &values {
        csv.row(&[fmt_f64(z), fmt_f64(e)])?;
    }
    Ok((csv.finish()?, count))
}

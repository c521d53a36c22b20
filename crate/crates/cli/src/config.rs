//! Run configuration: a line-oriented file with `[section]` headers and
//! `key = value` pairs. `#` starts a comment.
//!
//! ```text
//! [problem]
//! m = 1
//! A = -1
//! X0 = 0
//! gamma = 0.5
//! T = 1
//! forcing_1 = poly 2 1; caputo_power 2 1
//! exact_1 = poly 2 1
//!
//! [discretization]
//! n = 3
//! j = 7
//! s = j+1
//!
//! [output]
//! solution = solution.csv
//! grid_level = s+2
//! ```

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use fracspline::{CollocationConfig, FractionalOrder, FractionalProblem, SplineDegree, Term};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }
}

/// A level given either outright or relative to another level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fixed(u32),
    Offset(u32),
}

impl Level {
    pub fn resolve(self, base: u32) -> u32 {
        match self {
            Level::Fixed(k) => k,
            Level::Offset(k) => base + k,
        }
    }

    fn parse(value: &str, base: &str) -> Option<Self> {
        let compact: String = value.chars().filter(|c| !c.is_whitespace()).collect();
        match compact.strip_prefix(base).and_then(|r| r.strip_prefix('+')) {
            Some(k) => k.parse().ok().map(Level::Offset),
            None if compact == base => Some(Level::Offset(0)),
            None => compact.parse().ok().map(Level::Fixed),
        }
    }

    fn render(self, base: &str) -> String {
        match self {
            Level::Fixed(k) => k.to_string(),
            Level::Offset(k) => format!("{base}+{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemBlock {
    pub m: usize,
    /// Row-major.
    pub a: Vec<f64>,
    pub x0: Vec<f64>,
    pub gamma: f64,
    pub horizon: u32,
    /// One term list per component; `None` without any `forcing_<i>` key.
    pub forcing: Option<Vec<Vec<Term>>>,
    /// Exact solution per component, if supplied with `exact_<i>` keys.
    pub exact: Option<Vec<Vec<Term>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationBlock {
    pub n: u32,
    pub j: u32,
    pub s: Level,
    pub ic_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub solution: String,
    pub convergence: String,
    pub grid_level: Level,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    pub discretization: DiscretizationBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Section {
    Problem,
    Discretization,
    Output,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Problem => "problem",
            Section::Discretization => "discretization",
            Section::Output => "output",
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

#[derive(Default)]
struct Raw {
    entries: HashMap<(Section, String), Entry>,
    headers: HashMap<Section, usize>,
}

impl Raw {
    fn take(&mut self, section: Section, key: &str) -> Option<Entry> {
        self.entries.remove(&(section, key.to_string()))
    }

    fn require(&mut self, section: Section, key: &str) -> Result<Entry, ConfigError> {
        self.take(section, key).ok_or_else(|| ConfigError {
            line: self.headers.get(&section).copied(),
            message: format!("missing key `{key}` in [{}]", section.name()),
        })
    }
}

fn parse_number<T: FromStr>(entry: &Entry, what: &str) -> Result<T, ConfigError> {
    entry
        .value
        .parse()
        .map_err(|_| ConfigError::at(entry.line, format!("{what}: cannot parse `{}`", entry.value)))
}

fn parse_list(entry: &Entry, what: &str) -> Result<Vec<f64>, ConfigError> {
    entry
        .value
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ConfigError::at(entry.line, format!("{what}: `{s}` is not a finite number")))
        })
        .collect()
}

/// `poly p coef; caputo_power p coef; …`
pub fn parse_terms(text: &str) -> Result<Vec<Term>, String> {
    let mut out = Vec::new();
    for piece in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let words: Vec<&str> = piece.split_whitespace().collect();
        let [kind, p, c] = words[..] else {
            return Err(format!("term `{piece}` must read `poly <p> <coef>` or `caputo_power <p> <coef>`"));
        };
        let power: f64 = p.parse().map_err(|_| format!("bad power `{p}` in `{piece}`"))?;
        let coef: f64 = c.parse().map_err(|_| format!("bad coefficient `{c}` in `{piece}`"))?;
        let term = match kind {
            "poly" => Term::Poly { power, coef },
            "caputo_power" => Term::CaputoPower { power, coef },
            other => return Err(format!("unknown term kind `{other}`")),
        };
        term.validate().map_err(|e| e.to_string())?;
        out.push(term);
    }
    Ok(out)
}

fn render_terms(terms: &[Term]) -> String {
    terms
        .iter()
        .map(|t| match *t {
            Term::Poly { power, coef } => format!("poly {power} {coef}"),
            Term::CaputoPower { power, coef } => format!("caputo_power {power} {coef}"),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn render_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn tokenize(text: &str) -> Result<Raw, ConfigError> {
    let mut raw = Raw::default();
    let mut section: Option<Section> = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let s = match name.trim() {
                "problem" => Section::Problem,
                "discretization" => Section::Discretization,
                "output" => Section::Output,
                other => return Err(ConfigError::at(lineno, format!("unknown section [{other}]"))),
            };
            if raw.headers.insert(s, lineno).is_some() {
                return Err(ConfigError::at(lineno, format!("section [{}] appears twice", s.name())));
            }
            section = Some(s);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::at(lineno, format!("expected `key = value`, found `{line}`")));
        };
        let Some(s) = section else {
            return Err(ConfigError::at(lineno, "key outside of any section"));
        };
        let key = key.trim().to_string();
        let entry = Entry { line: lineno, value: value.trim().to_string() };
        if let Some(prev) = raw.entries.insert((s, key.clone()), entry) {
            return Err(ConfigError::at(lineno, format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
    }
    Ok(raw)
}

fn indexed_terms(raw: &mut Raw, prefix: &str, m: usize) -> Result<Option<Vec<Vec<Term>>>, ConfigError> {
    let keys: Vec<String> = raw
        .entries
        .keys()
        .filter(|(s, k)| *s == Section::Problem && k.starts_with(prefix))
        .map(|(_, k)| k.clone())
        .collect();
    if keys.is_empty() {
        return Ok(None);
    }
    let mut out = vec![Vec::new(); m];
    for key in keys {
        let entry = raw.take(Section::Problem, &key).expect("key listed above");
        let i: usize = key[prefix.len()..]
            .parse()
            .ok()
            .filter(|&i| (1..=m).contains(&i))
            .ok_or_else(|| ConfigError::at(entry.line, format!("`{key}`: component index must be 1..={m}")))?;
        out[i - 1] = parse_terms(&entry.value).map_err(|e| ConfigError::at(entry.line, e))?;
    }
    Ok(Some(out))
}

impl RunConfig {
    /// Parses and validates; every problem and discretization invariant is
    /// checked here, so a parsed configuration can always be built.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = tokenize(text)?;
        use Section::*;

        let m_entry = raw.require(Problem, "m")?;
        let m: usize = parse_number(&m_entry, "m")?;
        if m == 0 {
            return Err(ConfigError::at(m_entry.line, "m must be at least 1"));
        }
        let a_entry = raw.require(Problem, "A")?;
        let a = parse_list(&a_entry, "A")?;
        if a.len() != m * m {
            return Err(ConfigError::at(a_entry.line, format!("A needs m*m = {} entries, got {}", m * m, a.len())));
        }
        let x0_entry = raw.require(Problem, "X0")?;
        let x0 = parse_list(&x0_entry, "X0")?;
        if x0.len() != m {
            return Err(ConfigError::at(x0_entry.line, format!("X0 needs m = {m} entries, got {}", x0.len())));
        }
        let g_entry = raw.require(Problem, "gamma")?;
        let gamma: f64 = parse_number(&g_entry, "gamma")?;
        FractionalOrder::new(gamma).map_err(|e| ConfigError::at(g_entry.line, e.to_string()))?;
        let t_entry = raw.require(Problem, "T")?;
        let horizon: u32 = parse_number(&t_entry, "T")?;
        if horizon == 0 {
            return Err(ConfigError::at(t_entry.line, "T must be a positive integer"));
        }
        let forcing = indexed_terms(&mut raw, "forcing_", m)?;
        let exact = indexed_terms(&mut raw, "exact_", m)?;

        let n_entry = raw.require(Discretization, "n")?;
        let n: u32 = parse_number(&n_entry, "n")?;
        SplineDegree::new(n)
            .and_then(|d| d.require_smooth())
            .map_err(|e| ConfigError::at(n_entry.line, e.to_string()))?;
        let j_entry = raw.require(Discretization, "j")?;
        let j: u32 = parse_number(&j_entry, "j")?;
        let (s, s_line) = match raw.take(Discretization, "s") {
            Some(e) => (
                Level::parse(&e.value, "j")
                    .ok_or_else(|| ConfigError::at(e.line, format!("s: expected an integer or `j+<k>`, got `{}`", e.value)))?,
                e.line,
            ),
            None => (Level::Offset(1), j_entry.line),
        };
        let ic_weight = match raw.take(Discretization, "ic_weight") {
            Some(e) => {
                let w: f64 = parse_number(&e, "ic_weight")?;
                if !(w > 0.0 && w.is_finite()) {
                    return Err(ConfigError::at(e.line, "ic_weight must be a positive number"));
                }
                w
            }
            None => 1.0,
        };

        let solution = raw.take(Output, "solution").map_or("solution.csv".to_string(), |e| e.value);
        let convergence = raw.take(Output, "convergence").map_or("convergence.csv".to_string(), |e| e.value);
        let grid_level = match raw.take(Output, "grid_level") {
            Some(e) => Level::parse(&e.value, "s").ok_or_else(|| {
                ConfigError::at(e.line, format!("grid_level: expected an integer or `s+<k>`, got `{}`", e.value))
            })?,
            None => Level::Offset(2),
        };

        if let Some(((section, key), entry)) = raw.entries.iter().min_by_key(|(_, e)| e.line) {
            return Err(ConfigError::at(entry.line, format!("unknown key `{key}` in [{}]", section.name())));
        }

        let cfg = RunConfig {
            problem: ProblemBlock { m, a, x0, gamma, horizon, forcing, exact },
            discretization: DiscretizationBlock { n, j, s, ic_weight },
            output: OutputBlock { solution, convergence, grid_level },
        };
        cfg.collocation().map_err(|e| ConfigError::at(s_line, e.to_string()))?;
        cfg.problem().map_err(|e| ConfigError::at(a_entry.line, e.to_string()))?;
        Ok(cfg)
    }

    pub fn order(&self) -> FractionalOrder {
        FractionalOrder::new(self.problem.gamma).expect("validated at parse time")
    }

    pub fn degree(&self) -> SplineDegree {
        SplineDegree::new(self.discretization.n).expect("validated at parse time")
    }

    pub fn problem(&self) -> fracspline::Result<FractionalProblem> {
        let p = &self.problem;
        let problem = FractionalProblem::new(
            DMatrix::from_row_slice(p.m, p.m, &p.a),
            DVector::from_column_slice(&p.x0),
            self.order(),
            p.horizon as i64,
        )?;
        match &p.forcing {
            Some(f) => problem.with_forcing(f.clone()),
            None => Ok(problem),
        }
    }

    /// Configuration at level `j` with this file's choice of `s`.
    pub fn collocation_at(&self, j: u32) -> fracspline::Result<CollocationConfig> {
        let d = &self.discretization;
        CollocationConfig::new(self.degree(), j, Some(d.s.resolve(j)), self.problem.horizon as i64)?
            .with_ic_weight(d.ic_weight)
    }

    pub fn collocation(&self) -> fracspline::Result<CollocationConfig> {
        self.collocation_at(self.discretization.j)
    }

    /// Canonical text; parsing it gives back an equal configuration.
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.problem;
        writeln!(f, "[problem]")?;
        writeln!(f, "m = {}", p.m)?;
        writeln!(f, "A = {}", render_list(&p.a))?;
        writeln!(f, "X0 = {}", render_list(&p.x0))?;
        writeln!(f, "gamma = {}", p.gamma)?;
        writeln!(f, "T = {}", p.horizon)?;
        for (prefix, terms) in [("forcing", &p.forcing), ("exact", &p.exact)] {
            if let Some(terms) = terms {
                for (i, t) in terms.iter().enumerate() {
                    writeln!(f, "{prefix}_{} = {}", i + 1, render_terms(t))?;
                }
            }
        }
        let d = &self.discretization;
        writeln!(f, "\n[discretization]")?;
        writeln!(f, "n = {}", d.n)?;
        writeln!(f, "j = {}", d.j)?;
        writeln!(f, "s = {}", d.s.render("j"))?;
        writeln!(f, "ic_weight = {}", d.ic_weight)?;
        let o = &self.output;
        writeln!(f, "\n[output]")?;
        writeln!(f, "solution = {}", o.solution)?;
        writeln!(f, "convergence = {}", o.convergence)?;
        writeln!(f, "grid_level = {}", o.grid_level.render("s"))
    }
}

//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! operator.n = 2
//! operator.a11 = "1"
//! operator.b2 = "-1"
//! domain.x1 = "-1, 1"
//! grid.h = 0.05
//! ```
//!
//! Every line is `section.key = value`; values may be double-quoted. Missing
//! coefficients are zero. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

use propset_core::operator::{Block, DomainSpec};
use propset_core::pde::{SolveMethod, DEFAULT_EPS, DEFAULT_MAXITER, DEFAULT_TOL};
use propset_core::{parse, Expr, OperatorSpec, ReachConfig};

use crate::CliError;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    /// `None` for command-line overrides.
    line: Option<usize>,
}

/// Parsed `key = value` pairs with their source lines.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn err(line: Option<usize>, msg: impl Into<String>) -> CliError {
    CliError::Config {
        line,
        message: msg.into(),
    }
}

fn unquote(v: &str) -> Option<String> {
    let v = v.trim();
    if let Some(inner) = v.strip_prefix('"') {
        let inner = inner.strip_suffix('"')?;
        if inner.contains('"') {
            return None;
        }
        Some(inner.to_string())
    } else if v.contains('"') {
        None
    } else {
        Some(v.to_string())
    }
}

/// Drops a trailing `# comment` that is not inside quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn known_key(key: &str) -> bool {
    const FIXED: &[&str] = &[
        "operator.n",
        "operator.lift",
        "domain.ball_center",
        "domain.ball_radius",
        "domain.lift",
        "grid.h",
        "reach.x0",
        "reach.dt",
        "reach.combined",
        "reach.substeps",
        "reach.max_iter",
        "brackets.depth",
        "brackets.samples",
        "pde.tol",
        "pde.maxiter",
        "pde.method",
        "pde.boundary",
        "harnack.k",
        "harnack.eps",
        "path.target",
        "path.method",
        "path.dt_sample",
        "path.tol",
        "output.dir",
        "output.precision",
    ];
    FIXED.contains(&key) || coefficient_key(key).is_some() || axis_key(key).is_some()
}

/// `operator.aIJ`, `operator.aI_J` (1-based) or `operator.bI`.
fn coefficient_key(key: &str) -> Option<(char, usize, usize)> {
    let name = key.strip_prefix("operator.")?;
    let digits = |s: &str| -> Option<usize> {
        (!s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
            .then(|| s.parse().ok())
            .flatten()
            .filter(|&i| i >= 1)
    };
    if let Some(rest) = name.strip_prefix('b') {
        return digits(rest).map(|i| ('b', i, 0));
    }
    let rest = name.strip_prefix('a')?;
    if let Some((i, j)) = rest.split_once('_') {
        return Some(('a', digits(i)?, digits(j)?));
    }
    if rest.len() == 2 {
        return Some(('a', digits(&rest[..1])?, digits(&rest[1..])?));
    }
    None
}

/// `domain.xI` (1-based).
fn axis_key(key: &str) -> Option<usize> {
    let rest = key.strip_prefix("domain.x")?;
    (!rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
        .then(|| rest.parse().ok())
        .flatten()
        .filter(|&i| i >= 1)
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RawConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = Some(idx + 1);
            let body = strip_comment(raw).trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `section.key = value`, got `{body}`")))?;
            cfg.insert(key.trim(), value, line, false)?;
        }
        Ok(cfg)
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| err(None, format!("override `{assignment}` is not `section.key=value`")))?;
        self.insert(key.trim(), value, None, true)
    }

    fn insert(&mut self, key: &str, value: &str, line: Option<usize>, replace: bool) -> Result<(), CliError> {
        if !key.contains('.') {
            return Err(err(line, format!("key `{key}` has no section")));
        }
        if !known_key(key) {
            return Err(err(line, format!("unknown key `{key}`")));
        }
        let value = unquote(value).ok_or_else(|| err(line, format!("malformed value for `{key}`")))?;
        if !replace {
            if let Some(prev) = self.entries.get(key) {
                let at = prev.line.map_or(String::new(), |l| format!(" (first set on line {l})"));
                return Err(err(line, format!("duplicate key `{key}`{at}")));
            }
        }
        self.entries.insert(key.to_string(), Entry { value, line });
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn parse_with<T>(&self, key: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => f(&e.value)
                .map(Some)
                .map_err(|m| err(e.line, format!("`{key}`: {m}"))),
        }
    }

    fn required<T>(&self, key: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<T, CliError> {
        self.parse_with(key, f)?
            .ok_or_else(|| err(None, format!("missing required key `{key}`")))
    }
}

fn number(s: &str) -> Result<f64, String> {
    let e = parse(s, 0).map_err(|e| e.to_string())?;
    let v = e.evaluate(&[]).map_err(|e| e.to_string())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn integer(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("`{s}` is not a nonnegative integer"))
}

fn boolean(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("`{other}` is not true or false")),
    }
}

/// Comma-separated constants such as `pi, 0.5, -1`.
pub fn point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(number).collect()
}

fn interval(s: &str) -> Result<(f64, f64), String> {
    match point(s)?.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(format!("`{s}` is not an interval `lo, hi`")),
    }
}

/// `lo,hi; lo,hi; ...`
fn boxed(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(';').map(interval).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySpec {
    Constant(f64),
    Expression(Expr),
    /// Indicator of the boundary nodes whose centers lie in a closed box.
    Region(Vec<(f64, f64)>),
}

impl BoundarySpec {
    fn parse(s: &str, dim: usize) -> Result<Self, String> {
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| format!("`{s}` is not `const:`, `expr:` or `box:`"))?;
        match kind.trim() {
            "const" => number(body).map(BoundarySpec::Constant),
            "expr" => parse(body, dim).map(BoundarySpec::Expression).map_err(|e| e.to_string()),
            "box" => {
                let b = boxed(body)?;
                if b.len() != dim {
                    return Err(format!("box has {} intervals, expected {dim}", b.len()));
                }
                Ok(BoundarySpec::Region(b))
            }
            other => Err(format!("unknown boundary kind `{other}`")),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            BoundarySpec::Constant(c) => *c,
            BoundarySpec::Expression(e) => e.evaluate(x).unwrap_or(f64::NAN),
            BoundarySpec::Region(b) => {
                let inside = x.iter().zip(b).all(|(v, (lo, hi))| *v >= lo - 1e-12 && *v <= hi + 1e-12);
                f64::from(u8::from(inside))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMethod {
    Extract,
    Mumford,
    Ou,
}

/// Fully validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Operator as configured (before any lift).
    pub base_operator: OperatorSpec,
    pub base_domain: DomainSpec,
    /// Operator and domain the subcommands act on.
    pub operator: OperatorSpec,
    pub domain: DomainSpec,
    pub lifted: bool,
    pub lift_interval: (f64, f64),
    pub h: f64,
    pub x0: Vec<f64>,
    pub reach: ReachConfig,
    pub bracket_depth: usize,
    pub bracket_samples: usize,
    pub tol: f64,
    pub maxiter: usize,
    pub method: SolveMethod,
    pub boundary: BoundarySpec,
    pub k: Option<Vec<(f64, f64)>>,
    pub eps: f64,
    pub target: Option<Vec<f64>>,
    pub path_method: PathMethod,
    pub dt_sample: f64,
    /// Validation tolerance; `None` picks a method-dependent default.
    pub path_tol: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub precision: usize,
}

fn operator_from(raw: &RawConfig, n: usize) -> Result<OperatorSpec, CliError> {
    let mut a = vec![vec![Expr::zero(); n]; n];
    let mut b = vec![Expr::zero(); n];
    for (key, e) in &raw.entries {
        let Some((kind, i, j)) = coefficient_key(key) else {
            continue;
        };
        if i > n || (kind == 'a' && j > n) {
            return Err(err(e.line, format!("`{key}` exceeds operator.n = {n}")));
        }
        let expr = parse(&e.value, n).map_err(|m| err(e.line, format!("`{key}`: {m}")))?;
        if kind == 'a' {
            a[i - 1][j - 1] = expr;
        } else {
            b[i - 1] = expr;
        }
    }
    // a single off-diagonal entry stands for the symmetric pair
    for i in 0..n {
        for j in 0..n {
            if a[i][j].is_zero() && !a[j][i].is_zero() {
                a[i][j] = a[j][i].clone();
            }
        }
    }
    OperatorSpec::new(a, b).map_err(|e| err(None, e.to_string()))
}

fn domain_from(raw: &RawConfig, n: usize) -> Result<DomainSpec, CliError> {
    let mut blocks = Vec::new();
    let mut axes = 0;
    for i in 1..=n {
        let key = format!("domain.x{i}");
        match raw.parse_with(&key, interval)? {
            Some((lo, hi)) => {
                if axes + 1 != i {
                    return Err(err(raw.get(&key).and_then(|e| e.line), "box axes must be x1, x2, ... without gaps"));
                }
                blocks.push(Block::Interval { lo, hi });
                axes += 1;
            }
            None => break,
        }
    }
    if let Some(k) = raw.entries.keys().filter_map(|k| axis_key(k)).find(|&i| i > axes) {
        let key = format!("domain.x{k}");
        return Err(err(raw.get(&key).and_then(|e| e.line), format!("`{key}` does not follow x1..x{axes}")));
    }
    let center = raw.parse_with("domain.ball_center", point)?;
    let radius = raw.parse_with("domain.ball_radius", number)?;
    match (center, radius) {
        (Some(center), Some(radius)) => blocks.push(Block::Ball { center, radius }),
        (None, None) => {}
        _ => return Err(err(None, "domain.ball_center and domain.ball_radius go together")),
    }
    let dom = DomainSpec::new(blocks).map_err(|e| err(None, e.to_string()))?;
    if dom.dim() != n {
        return Err(err(None, format!("domain has dimension {}, operator.n is {n}", dom.dim())));
    }
    Ok(dom)
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let n = raw.required("operator.n", integer)?;
        if n == 0 {
            return Err(err(raw.get("operator.n").and_then(|e| e.line), "operator.n must be positive"));
        }
        let base_operator = operator_from(raw, n)?;
        let base_domain = domain_from(raw, n)?;
        let lifted = raw.parse_with("operator.lift", boolean)?.unwrap_or(false);
        let lift_interval = raw.parse_with("domain.lift", interval)?.unwrap_or((-1.0, 1.0));
        let (operator, domain, dim) = if lifted {
            let dom = base_domain
                .lift(lift_interval.0, lift_interval.1)
                .map_err(|e| err(raw.get("domain.lift").and_then(|e| e.line), e.to_string()))?;
            (base_operator.lift(), dom, n + 1)
        } else {
            (base_operator.clone(), base_domain.clone(), n)
        };
        let h = raw.required("grid.h", number)?;
        let mut x0 = raw.parse_with("reach.x0", point)?.unwrap_or_else(|| vec![0.0; n]);
        if lifted && x0.len() == n {
            x0.push(0.5 * (lift_interval.0 + lift_interval.1));
        }
        if x0.len() != dim {
            return Err(err(
                raw.get("reach.x0").and_then(|e| e.line),
                format!("reach.x0 has {} coordinates, expected {dim}", x0.len()),
            ));
        }
        let defaults = ReachConfig::default();
        let reach = ReachConfig {
            dt: raw.parse_with("reach.dt", number)?,
            substeps: raw.parse_with("reach.substeps", integer)?.unwrap_or(defaults.substeps),
            max_iterations: raw.parse_with("reach.max_iter", integer)?.unwrap_or(defaults.max_iterations),
            combined: raw.parse_with("reach.combined", boolean)?.unwrap_or(false),
            magnitudes: defaults.magnitudes,
        };
        let method = raw
            .parse_with("pde.method", |s| match s.trim() {
                "jacobi" => Ok(SolveMethod::Jacobi),
                "direct" => Ok(SolveMethod::Direct),
                other => Err(format!("unknown method `{other}` (jacobi or direct)")),
            })?
            .unwrap_or_default();
        let boundary = raw
            .parse_with("pde.boundary", |s| BoundarySpec::parse(s, dim))?
            .unwrap_or(BoundarySpec::Constant(1.0));
        let k = raw.parse_with("harnack.k", |s| {
            let b = boxed(s)?;
            if b.len() == dim {
                Ok(b)
            } else {
                Err(format!("K has {} intervals, expected {dim}", b.len()))
            }
        })?;
        let target = raw.parse_with("path.target", |s| {
            let p = point(s)?;
            if p.len() == dim {
                Ok(p)
            } else {
                Err(format!("target has {} coordinates, expected {dim}", p.len()))
            }
        })?;
        let path_method = raw
            .parse_with("path.method", |s| match s.trim() {
                "extract" => Ok(PathMethod::Extract),
                "mumford" => Ok(PathMethod::Mumford),
                "ou" => Ok(PathMethod::Ou),
                other => Err(format!("unknown path method `{other}` (extract, mumford or ou)")),
            })?
            .unwrap_or(PathMethod::Extract);
        let precision = raw.parse_with("output.precision", integer)?.unwrap_or(12);
        if !(1..=17).contains(&precision) {
            return Err(err(raw.get("output.precision").and_then(|e| e.line), "output.precision must be in 1..=17"));
        }
        Ok(ExperimentConfig {
            base_operator,
            base_domain,
            operator,
            domain,
            lifted,
            lift_interval,
            h,
            x0,
            reach,
            bracket_depth: raw.parse_with("brackets.depth", integer)?.unwrap_or(2),
            bracket_samples: raw.parse_with("brackets.samples", integer)?.unwrap_or(100),
            tol: raw.parse_with("pde.tol", number)?.unwrap_or(DEFAULT_TOL),
            maxiter: raw.parse_with("pde.maxiter", integer)?.unwrap_or(DEFAULT_MAXITER),
            method,
            boundary,
            k,
            eps: raw.parse_with("harnack.eps", number)?.unwrap_or(DEFAULT_EPS),
            target,
            path_method,
            dt_sample: raw.parse_with("path.dt_sample", number)?.unwrap_or(1e-3),
            path_tol: raw.parse_with("path.tol", number)?,
            out_dir: raw.parse_with("output.dir", |s| Ok(PathBuf::from(s)))?,
            precision,
        })
    }
}

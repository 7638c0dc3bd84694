use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use propset_core::operator::{Block, OperatorError};
use propset_core::path::{self, PropagationPath};
use propset_core::pde::{self, DiscreteOperator};
use propset_core::reach::{self, Grid, ReachSet};
use propset_core::{DomainSpec, OperatorSpec};

use crate::config::{ExperimentConfig, PathMethod, RawConfig};
use crate::CliError;

/// Sample count for coefficient checks over `Ω`.
const CHECK_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Structure, H2, Hörmander rank and barrier checks.
    Check,
    /// The fields Xⱼ, Y and the expanded drift.
    Fields,
    /// Bracket rank at x0 and at sample points.
    Brackets,
    /// Grid propagation set of x0.
    Reach,
    /// Propagation path from x0 to path.target.
    Path,
    /// Dirichlet problem with pde.boundary data.
    Solve,
    /// Discrete harmonic measure of x0.
    Measure,
    /// Harnack ratio over harnack.k.
    Harnack,
    /// Absorbent hull of x0 in the stencil graph.
    Absorbent,
    /// Lifted operator and the product structure of its propagation set.
    Lift,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Fields => "fields",
            Command::Brackets => "brackets",
            Command::Reach => "reach",
            Command::Path => "path",
            Command::Solve => "solve",
            Command::Measure => "measure",
            Command::Harnack => "harnack",
            Command::Absorbent => "absorbent",
            Command::Lift => "lift",
        }
    }
}

/// Everything one run needs, already resolved from the command line.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub overrides: Vec<String>,
    /// Explicit output directory; falls back to `output.dir`, then `.`.
    pub out: Option<PathBuf>,
}

/// Runs one subcommand. Returns the files written.
pub fn run(inv: &Invocation) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(&inv.config).map_err(|source| CliError::Io {
        path: inv.config.clone(),
        source,
    })?;
    let mut raw = RawConfig::parse(&text)?;
    for o in &inv.overrides {
        raw.set(o)?;
    }
    let cfg = ExperimentConfig::from_raw(&raw)?;
    let dir = inv
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let mut out = Output::new(dir, cfg.precision);
    let outcome = match inv.command {
        Command::Check => check(&cfg, &mut out),
        Command::Fields => fields(&cfg, &mut out),
        Command::Brackets => brackets(&cfg, &mut out),
        Command::Reach => reach_cmd(&cfg, &mut out),
        Command::Path => path_cmd(&cfg, &mut out),
        Command::Solve => solve(&cfg, &mut out),
        Command::Measure => measure(&cfg, &mut out),
        Command::Harnack => harnack(&cfg, &mut out),
        Command::Absorbent => absorbent(&cfg, &mut out),
        Command::Lift => lift(&cfg, &mut out),
    };
    // reports are written even when a hypothesis fails
    let written = out.flush(inv.command.name())?;
    outcome.map(|()| written)
}

struct Output {
    dir: PathBuf,
    digits: usize,
    csv: Option<String>,
    txt: String,
}

impl Output {
    fn new(dir: PathBuf, precision: usize) -> Self {
        Output {
            dir,
            digits: precision - 1,
            csv: None,
            txt: String::new(),
        }
    }

    fn num(&self, v: f64) -> String {
        if v.is_nan() {
            "NAN".into()
        } else if v.is_infinite() {
            if v > 0.0 { "INF" } else { "-INF" }.into()
        } else {
            // avoid a "-0" artifact of rounding tiny negatives
            let v = if v == 0.0 { 0.0 } else { v };
            format!("{v:.*e}", self.digits)
        }
    }

    fn nums(&self, v: &[f64]) -> String {
        v.iter().map(|&x| self.num(x)).collect::<Vec<_>>().join(",")
    }

    fn point(&self, v: &[f64]) -> String {
        format!("({})", v.iter().map(|&x| self.num(x)).collect::<Vec<_>>().join(", "))
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.txt.push_str(s.as_ref());
        self.txt.push('\n');
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.txt, "{key} = {value}");
    }

    fn csv_line(&mut self, s: impl AsRef<str>) {
        let c = self.csv.get_or_insert_with(String::new);
        c.push_str(s.as_ref());
        c.push('\n');
    }

    fn flush(&self, name: &str) -> Result<Vec<PathBuf>, CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        std::fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        let mut written = Vec::new();
        if let Some(csv) = &self.csv {
            let p = self.dir.join(format!("{name}.csv"));
            std::fs::write(&p, csv).map_err(io(&p))?;
            written.push(p);
        }
        if !self.txt.is_empty() {
            let p = self.dir.join(format!("{name}.txt"));
            std::fs::write(&p, &self.txt).map_err(io(&p))?;
            written.push(p);
        }
        Ok(written)
    }
}

fn coord_header(n: usize) -> String {
    (1..=n).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",")
}

fn grid_for(cfg: &ExperimentConfig, dom: &DomainSpec, x0: &[f64]) -> Result<Grid, CliError> {
    Ok(Grid::anchored(dom, cfg.h, x0)?)
}

fn flood(cfg: &ExperimentConfig, op: &OperatorSpec, dom: &DomainSpec, x0: &[f64]) -> Result<ReachSet, CliError> {
    let grid = grid_for(cfg, dom, x0)?;
    Ok(reach::compute(op, &grid, x0, &cfg.reach)?)
}

fn discrete(cfg: &ExperimentConfig) -> Result<(DiscreteOperator, usize), CliError> {
    let grid = grid_for(cfg, &cfg.domain, &cfg.x0)?;
    let l = pde::discretize(&cfg.operator, &grid)?;
    let node = l
        .node_at(&cfg.x0)
        .ok_or_else(|| CliError::Precondition(format!("x0 = {:?} is not a grid node", cfg.x0)))?;
    if l.is_boundary(node) {
        return Err(pde::PdeError::NotInterior(node).into());
    }
    Ok((l, node))
}

fn header(cfg: &ExperimentConfig, out: &mut Output) {
    out.kv("dimension", cfg.operator.dim());
    out.kv("lifted", cfg.lifted);
    out.kv("h", out.num(cfg.h));
    let x0 = out.point(&cfg.x0);
    out.kv("x0", x0);
}

fn check(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let (op, dom) = (&cfg.operator, &cfg.domain);
    header(cfg, out);
    let mut failures: Vec<CliError> = Vec::new();

    match op.check_structure(dom, CHECK_SAMPLES) {
        Ok(()) => out.kv("structure", "ok"),
        Err(e) => {
            out.kv("structure", format!("FAIL ({e})"));
            failures.push(e.into());
        }
    }

    let h2 = op.check_h2(dom, CHECK_SAMPLES)?;
    let inf = out.num(h2.infimum);
    out.kv("h2_inf_a11", inf);
    out.kv("h2", if h2.holds { "ok" } else { "FAIL" });
    if !h2.holds {
        failures.push(OperatorError::H2Violation { inf: h2.infimum }.into());
    }

    let rank = op.hoermander_rank(&cfg.x0, cfg.bracket_depth)?;
    out.kv("bracket_depth", cfg.bracket_depth);
    out.kv("rank_x0", rank.rank);
    let mut min_rank = rank.rank;
    for p in dom.sample_points(cfg.bracket_samples) {
        min_rank = min_rank.min(op.hoermander_rank(&p, cfg.bracket_depth)?.rank);
    }
    out.kv("rank_min_sampled", min_rank);
    if rank.rank < op.dim() {
        out.kv("hoermander", "FAIL");
        failures.push(CliError::Precondition(format!(
            "bracket rank at x0 is {} < {} at depth {}",
            rank.rank,
            op.dim(),
            cfg.bracket_depth
        )));
    } else {
        out.kv("hoermander", "ok");
    }

    if h2.holds {
        let bp = op.barrier_params(dom, CHECK_SAMPLES)?;
        out.kv("barrier_lambda", out.num(bp.lambda));
        out.kv("barrier_m", out.num(bp.m));
        match grid_for(cfg, dom, &cfg.x0).and_then(|g| Ok(pde::discretize(op, &g)?)) {
            Ok(l) => {
                let r = pde::check_barrier(&l, &bp);
                out.kv("barrier_min_w", out.num(r.min_w));
                out.kv("barrier_max_lw", out.num(r.max_lw));
                out.kv("barrier", if r.passed() { "ok" } else { "FAIL" });
                if !r.passed() {
                    failures.push(CliError::Precondition(format!(
                        "discrete barrier fails: min w = {:e}, max Lw = {:e}",
                        r.min_w, r.max_lw
                    )));
                }
            }
            Err(e) => out.kv("barrier", format!("not discretized ({e})")),
        }
    } else {
        out.kv("barrier", "skipped (H2 fails)");
    }

    match failures.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn fields(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let op = &cfg.operator;
    let (xs, y) = op.vector_fields();
    let (active, y_active) = op.active_fields(&cfg.domain);
    out.csv_line("field,component,active,expression");
    let mut row = |name: &str, comps: &[propset_core::Expr], act: bool| {
        for (i, c) in comps.iter().enumerate() {
            out.csv_line(format!("{name},{},{},\"{}\"", i + 1, u8::from(act), c.simplify()));
        }
    };
    for (j, x) in xs.iter().enumerate() {
        row(&format!("X{}", j + 1), x.components(), active[j]);
    }
    row("Y", y.components(), y_active);
    row("c", &op.drift_expand(), true);
    Ok(())
}

fn brackets(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let op = &cfg.operator;
    let n = op.dim();
    out.csv_line(format!("point,{},rank,min_pivot,fields", coord_header(n)));
    let points = std::iter::once(cfg.x0.clone()).chain(cfg.domain.sample_points(cfg.bracket_samples));
    for (k, p) in points.enumerate() {
        let r = op.hoermander_rank(&p, cfg.bracket_depth)?;
        let pivot = r.min_pivot.map_or("NONE".to_string(), |v| out.num(v));
        let line = format!("{k},{},{},{pivot},{}", out.nums(&p), r.rank, r.fields);
        out.csv_line(line);
    }
    Ok(())
}

fn write_reach(rs: &ReachSet, out: &mut Output) {
    let g = rs.grid();
    let idx = (1..=g.dim()).map(|i| format!("i{i}")).collect::<Vec<_>>().join(",");
    out.csv_line(format!("cell,{idx},{},reached,iteration,parent", coord_header(g.dim())));
    for cell in g.inside_cells() {
        let it = rs.iteration(cell).map_or(String::new(), |i| i.to_string());
        let parent = rs.parent(cell).map_or(String::new(), |h| h.from.to_string());
        let multi = g.multi_index(cell).iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let line = format!(
            "{cell},{multi},{},{},{it},{parent}",
            out.nums(&g.center(cell)),
            u8::from(rs.is_reached(cell))
        );
        out.csv_line(line);
    }
}

fn reach_summary(rs: &ReachSet, out: &mut Output) {
    out.kv("inside_cells", rs.grid().inside_count());
    out.kv("reached_cells", rs.cells().len());
    out.kv("reachable_fraction", out.num(rs.reachable_fraction()));
    out.kv("iterations", rs.iterations());
    out.kv("iteration_cap_hit", rs.hit_iteration_cap());
    let labels: Vec<&str> = rs.directions().iter().map(|d| d.label.as_str()).collect();
    out.kv("directions", labels.join(" "));
}

fn reach_cmd(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let rs = flood(cfg, &cfg.operator, &cfg.domain, &cfg.x0)?;
    header(cfg, out);
    reach_summary(&rs, out);
    write_reach(&rs, out);
    Ok(())
}

fn symmetric(lo: f64, hi: f64, what: &str) -> Result<f64, CliError> {
    if (lo + hi).abs() > 1e-12 * hi.abs().max(1.0) {
        return Err(CliError::Precondition(format!("{what} must be symmetric about 0, got ({lo}, {hi})")));
    }
    Ok(hi)
}

fn closed_form_path(cfg: &ExperimentConfig, target: &[f64]) -> Result<PropagationPath, CliError> {
    let blocks = cfg.domain.blocks();
    match cfg.path_method {
        PathMethod::Mumford => {
            let [Block::Interval { lo, hi }, Block::Ball { center, radius }] = blocks else {
                return Err(CliError::Precondition("the mumford path needs Ω = ]-a,a[ × B(0,r) in 3 variables".into()));
            };
            if center.len() != 2 || center.iter().any(|&c| c != 0.0) {
                return Err(CliError::Precondition("the mumford path needs a ball centered at the origin of R²".into()));
            }
            if cfg.x0.iter().any(|&v| v != 0.0) {
                return Err(CliError::Precondition("the mumford path starts at x0 = 0".into()));
            }
            let a = symmetric(*lo, *hi, "domain.x1")?;
            Ok(path::mumford_path(a, *radius, target, cfg.dt_sample)?)
        }
        PathMethod::Ou => {
            let [Block::Interval { lo, hi }, Block::Interval { lo: lo2, hi: hi2 }] = blocks else {
                return Err(CliError::Precondition("the ou path needs a box in 2 variables".into()));
            };
            let b = symmetric(*lo2, *hi2, "domain.x2")?;
            Ok(path::ou_path_in((*lo, *hi), b, &cfg.x0, target, cfg.dt_sample)?)
        }
        PathMethod::Extract => unreachable!("handled by the caller"),
    }
}

fn path_cmd(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let target = cfg
        .target
        .as_ref()
        .ok_or_else(|| CliError::config("path needs path.target"))?;
    let (p, default_tol) = match cfg.path_method {
        PathMethod::Extract => {
            let rs = flood(cfg, &cfg.operator, &cfg.domain, &cfg.x0)?;
            (path::extract(&rs, &cfg.operator, target)?, 10.0 * cfg.h)
        }
        _ => (closed_form_path(cfg, target)?, 1e-3),
    };
    let tol = cfg.path_tol.unwrap_or(default_tol);
    let report = path::validate(&p, &cfg.operator, &cfg.domain, tol);

    let n = cfg.operator.dim();
    header(cfg, out);
    let t = out.point(target);
    out.kv("target", t);
    let end = out.point(p.endpoint());
    out.kv("endpoint", end);
    out.kv("total_time", out.num(p.total_time()));
    out.kv("segments", p.segments().len());
    for (k, s) in p.segments().iter().enumerate() {
        let line = format!(
            "segment {k}: lambda = {} mu = {} duration = {}",
            out.point(&s.lambda),
            out.num(s.mu),
            out.num(s.duration)
        );
        out.line(line);
    }
    out.kv("max_velocity_error", out.num(report.max_velocity_error));
    out.kv("endpoint_error", out.num(report.endpoint_error));
    out.kv("contained", report.contained);
    out.kv("chained", report.chained);
    out.kv("mu_nonnegative", report.mu_nonnegative);
    out.kv("tol", out.num(report.tol));
    out.kv("valid", report.passed());

    let lambdas = (1..=n).map(|i| format!("lambda{i}")).collect::<Vec<_>>().join(",");
    out.csv_line(format!("t,{},segment,{lambdas},mu", coord_header(n)));
    let idle = vec![0.0; n];
    for s in p.samples() {
        let (lambda, mu) = p
            .segments()
            .get(s.segment)
            .map_or((&idle[..], 0.0), |seg| (&seg.lambda[..], seg.mu));
        let line = format!(
            "{},{},{},{},{}",
            out.num(s.t),
            out.nums(&s.x),
            s.segment,
            out.nums(lambda),
            out.num(mu)
        );
        out.csv_line(line);
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "path fails validation (velocity error {:e}, tol {:e}, contained {}, mu >= 0 {})",
            report.max_velocity_error, report.tol, report.contained, report.mu_nonnegative
        )))
    }
}

fn solve(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let (l, x0) = discrete(cfg)?;
    let g = l.boundary_values(|x| cfg.boundary.eval(x));
    let u = pde::solve_with(&l, &g, cfg.tol, cfg.maxiter, cfg.method)?;
    header(cfg, out);
    out.kv("nodes", l.node_count());
    out.kv("boundary_nodes", l.boundary_nodes().len());
    out.kv("method", format!("{:?}", cfg.method).to_lowercase());
    out.kv("iterations", u.iterations);
    out.kv("residual", out.num(u.residual));
    out.kv("u_x0", out.num(u.values[x0]));
    out.csv_line(format!("node,{},boundary,u", coord_header(cfg.operator.dim())));
    for k in 0..l.node_count() {
        let line = format!(
            "{k},{},{},{}",
            out.nums(&l.center(k)),
            u8::from(l.is_boundary(k)),
            out.num(u.values[k])
        );
        out.csv_line(line);
    }
    Ok(())
}

fn measure(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let (l, x0) = discrete(cfg)?;
    let row = pde::harmonic_measure(&l, x0)?;
    header(cfg, out);
    out.kv("boundary_nodes", l.boundary_nodes().len());
    out.kv("total_mass", out.num(row.sum));
    let support = row.weights.iter().filter(|&&w| w > cfg.eps).count();
    out.kv("support_atoms", support);
    out.csv_line(format!("node,{},weight", coord_header(cfg.operator.dim())));
    for (&node, &w) in l.boundary_nodes().iter().zip(&row.weights) {
        let line = format!("{node},{},{}", out.nums(&l.center(node)), out.num(w));
        out.csv_line(line);
    }
    Ok(())
}

fn harnack(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let bounds = cfg
        .k
        .as_ref()
        .ok_or_else(|| CliError::config("harnack needs harnack.k"))?;
    let (l, x0) = discrete(cfg)?;
    let k = pde::cells_in_box(l.grid(), bounds);
    let est = pde::harnack_ratio(&l, x0, &k, cfg.eps)?;
    header(cfg, out);
    let kb = bounds
        .iter()
        .map(|(lo, hi)| format!("[{}, {}]", out.num(*lo), out.num(*hi)))
        .collect::<Vec<_>>()
        .join(" x ");
    out.kv("k", kb);
    out.kv("k_cells", k.len());
    out.kv("eps", out.num(est.eps));
    let ratio = match est.ratio {
        pde::Ratio::Finite(v) => out.num(v),
        pde::Ratio::Infinite => "INF".into(),
    };
    out.kv("ratio", ratio);
    let witness = |node: Option<usize>| node.map_or("NONE".to_string(), |k| out.point(&l.center(k)));
    let (wb, wk) = (witness(est.witness_boundary), witness(est.witness_k));
    out.kv("witness_boundary", wb);
    out.kv("witness_k", wk);
    Ok(())
}

fn absorbent(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let (l, x0) = discrete(cfg)?;
    let hull = pde::absorbent_hull(&l, x0);
    let rs = flood(cfg, &cfg.operator, &cfg.domain, &cfg.x0)?;
    let grid = l.grid();
    let outside_band = hull.outside_band_of(rs.cells(), grid).len();
    header(cfg, out);
    out.kv("hull_cells", hull.len());
    out.kv("reached_cells", rs.cells().len());
    out.kv("hull_outside_reach_band", outside_band);
    out.csv_line(format!("cell,{},boundary,reached", coord_header(grid.dim())));
    for cell in hull.iter() {
        let boundary = l.node_of_cell(cell).is_some_and(|k| l.is_boundary(k));
        let line = format!(
            "{cell},{},{},{}",
            out.nums(&grid.center(cell)),
            u8::from(boundary),
            u8::from(rs.is_reached(cell))
        );
        out.csv_line(line);
    }
    Ok(())
}

fn lift(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), CliError> {
    let n = cfg.base_operator.dim();
    let (lo, hi) = cfg.lift_interval;
    let lifted = cfg.base_operator.lift();
    let ldom = cfg
        .base_domain
        .lift(lo, hi)
        .map_err(|e| CliError::config(e.to_string()))?;
    let base_x0 = &cfg.x0[..n];
    let mut lx0 = base_x0.to_vec();
    lx0.push(cfg.x0.get(n).copied().unwrap_or(0.5 * (lo + hi)));

    let base = flood(cfg, &cfg.base_operator, &cfg.base_domain, base_x0)?;
    let up = flood(cfg, &lifted, &ldom, &lx0)?;

    // the lifted set should be the base set times the whole lift interval
    let (bg, lg) = (base.grid(), up.grid());
    let base_band = base.cells().dilate(bg);
    let up_band = up.cells().dilate(lg);
    let (mut extra, mut missing) = (0usize, 0usize);
    for cell in lg.inside_cells() {
        let c = lg.center(cell);
        let Some(bc) = bg.locate(&c[..n]).filter(|&b| bg.is_inside(b)) else {
            continue;
        };
        if up.is_reached(cell) && !base_band.contains(bc) {
            extra += 1;
        }
        if base.is_reached(bc) && !up_band.contains(cell) {
            missing += 1;
        }
    }

    let h2 = lifted.check_h2(&ldom, CHECK_SAMPLES)?;
    let rank = lifted.hoermander_rank(&lx0, cfg.bracket_depth)?;
    out.kv("base_dimension", n);
    out.kv("lifted_dimension", n + 1);
    out.kv("lift_interval", format!("[{}, {}]", out.num(lo), out.num(hi)));
    out.kv("x0", out.point(&lx0));
    out.kv("h", out.num(cfg.h));
    out.kv("lifted_h2", if h2.holds { "ok" } else { "FAIL" });
    out.kv("lifted_h2_inf_a11", out.num(h2.infimum));
    out.kv("lifted_rank_x0", rank.rank);
    out.kv("base_reached_cells", base.cells().len());
    out.kv("base_reachable_fraction", out.num(base.reachable_fraction()));
    out.kv("lifted_reached_cells", up.cells().len());
    out.kv("lifted_reachable_fraction", out.num(up.reachable_fraction()));
    out.kv("lifted_outside_product_band", extra);
    out.kv("product_outside_lifted_band", missing);
    write_reach(&up, out);
    Ok(())
}

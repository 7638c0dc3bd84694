//! Grid approximation of the propagation set `𝒫(x₀, Ω)`.
//!
//! Every reached cell keeps a representative point: the exact endpoint of the
//! hop that first reached it (the start point for `x₀`'s cell). From each
//! frontier representative the flood integrates the admissible directions
//! `±Xⱼ` and `+Y` (never `−Y`) for one hop and marks the landing cell. The parent
//! links therefore always describe a genuine propagation path from `x₀`.

mod grid;

pub use grid::{CellSet, Grid};

use rayon::prelude::*;
use thiserror::Error;

use crate::operator::{CompiledField, OperatorError, OperatorSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReachError {
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("axis {axis} has only {cells} cells (need at least 3)")]
    Resolution { axis: usize, cells: usize },
    #[error("expected a point of dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("start point {0:?} does not lie in an inside cell")]
    UnreachedStart(Vec<f64>),
    #[error("point {0:?} lies outside the grid")]
    OutOfBox(Vec<f64>),
    #[error("invalid reach configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Flood-fill parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachConfig {
    /// Fixed hop duration. `None` sizes each hop so that it advances one cell
    /// along its dominant axis.
    pub dt: Option<f64>,
    /// Classical fourth order steps per hop.
    pub substeps: usize,
    pub max_iterations: usize,
    /// Control magnitudes used with a fixed `dt`.
    pub magnitudes: Vec<f64>,
    /// Also use every `Σ ±Xⱼ + μY`, `μ ∈ {0, 1}`.
    pub combined: bool,
}

impl Default for ReachConfig {
    fn default() -> Self {
        ReachConfig {
            dt: None,
            substeps: 4,
            max_iterations: 1_000_000,
            magnitudes: vec![1.0],
            combined: false,
        }
    }
}

impl ReachConfig {
    /// `h / (2 · max speed)` clamped to `[1e-4, 1]`, the largest fixed duration
    /// compatible with `dt · speed ≤ 2h`.
    pub fn auto_dt(op: &OperatorSpec, grid: &Grid) -> f64 {
        let dirs = directions(op, grid, &ReachConfig::default());
        let pts = grid.domain().sample_points(crate::operator::ZERO_FIELD_SAMPLES);
        let mut vmax = 0.0f64;
        let mut v = vec![0.0; grid.dim()];
        for d in &dirs {
            for p in &pts {
                d.velocity(p, &mut v, &mut Vec::new(), &mut vec![0.0; grid.dim()]);
                vmax = vmax.max(v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            }
        }
        if vmax == 0.0 {
            return 1.0;
        }
        (grid.h() / (2.0 * vmax)).clamp(1e-4, 1.0)
    }

    fn validate(&self) -> Result<(), ReachError> {
        if self.substeps == 0 {
            return Err(ReachError::Config("substeps must be at least 1".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(ReachError::Config(format!("dt must be positive, got {dt}")));
            }
        }
        if self.magnitudes.is_empty() || self.magnitudes.iter().any(|m| !(*m > 0.0)) {
            return Err(ReachError::Config("control magnitudes must be positive".into()));
        }
        Ok(())
    }
}

/// A constant control `Σ λⱼ Xⱼ + μ Y` used for hops.
#[derive(Debug, Clone)]
pub struct Direction {
    pub label: String,
    pub lambda: Vec<f64>,
    pub mu: f64,
    terms: Vec<(f64, usize)>,
    drift: Option<usize>,
    fields: std::sync::Arc<Vec<CompiledField>>,
}

impl Direction {
    fn velocity(&self, p: &[f64], out: &mut [f64], stack: &mut Vec<f64>, tmp: &mut [f64]) -> bool {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut ok = true;
        for &(coef, f) in &self.terms {
            ok &= self.fields[f].eval_into(p, tmp, stack);
            for (o, t) in out.iter_mut().zip(tmp.iter()) {
                *o += coef * t;
            }
        }
        if let Some(f) = self.drift {
            ok &= self.fields[f].eval_into(p, tmp, stack);
            for (o, t) in out.iter_mut().zip(tmp.iter()) {
                *o += self.mu * t;
            }
        }
        ok
    }
}

/// How a cell was first reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hop {
    pub from: usize,
    pub direction: usize,
    pub duration: f64,
}

/// Result of the flood fill.
#[derive(Debug, Clone)]
pub struct ReachSet {
    grid: Grid,
    x0: Vec<f64>,
    start: usize,
    reached: CellSet,
    parent: Vec<Option<Hop>>,
    iteration: Vec<u32>,
    points: Vec<f64>,
    directions: Vec<Direction>,
    iterations: usize,
    capped: bool,
    substeps: usize,
    dt: Option<f64>,
}

fn directions(op: &OperatorSpec, grid: &Grid, cfg: &ReachConfig) -> Vec<Direction> {
    let n = op.dim();
    let (xs, y) = op.vector_fields();
    let (active, y_active) = op.active_fields(grid.domain());
    let mut fields: Vec<CompiledField> = Vec::new();
    let mut x_ids = Vec::new();
    for (j, x) in xs.iter().enumerate() {
        if active[j] {
            x_ids.push((j, fields.len()));
            fields.push(x.compile());
        }
    }
    let y_id = y_active.then(|| {
        fields.push(y.compile());
        fields.len() - 1
    });
    let fields = std::sync::Arc::new(fields);
    let mags: &[f64] = if cfg.dt.is_some() { &cfg.magnitudes } else { &[1.0] };

    let mut out = Vec::new();
    let mut push = |label: String, lambda: Vec<f64>, mu: f64| {
        let terms = x_ids
            .iter()
            .filter(|(j, _)| lambda[*j] != 0.0)
            .map(|&(j, f)| (lambda[j], f))
            .collect();
        out.push(Direction {
            label,
            lambda,
            mu,
            terms,
            drift: if mu > 0.0 { y_id } else { None },
            fields: fields.clone(),
        });
    };
    for &m in mags {
        let suffix = if mags.len() > 1 { format!("*{m}") } else { String::new() };
        for &(j, _) in &x_ids {
            for s in [1.0, -1.0] {
                let mut lambda = vec![0.0; n];
                lambda[j] = s * m;
                let sign = if s > 0.0 { '+' } else { '-' };
                push(format!("{sign}X{}{suffix}", j + 1), lambda, 0.0);
            }
        }
        if y_id.is_some() {
            push(format!("+Y{suffix}"), vec![0.0; n], m);
        }
        if cfg.combined && x_ids.len() + usize::from(y_id.is_some()) > 1 {
            let k = x_ids.len();
            for signs in 0..(1u32 << k) {
                for mu in [0.0, m] {
                    if mu > 0.0 && y_id.is_none() {
                        continue;
                    }
                    // single pure moves are already present
                    if (k == 1 && mu == 0.0) || k == 0 {
                        continue;
                    }
                    let mut lambda = vec![0.0; n];
                    let mut label = String::new();
                    for (bit, &(j, _)) in x_ids.iter().enumerate() {
                        let s = if signs >> bit & 1 == 0 { 1.0 } else { -1.0 };
                        lambda[j] = s * m;
                        label.push_str(&format!("{}X{}", if s > 0.0 { '+' } else { '-' }, j + 1));
                    }
                    if mu > 0.0 {
                        label.push_str("+Y");
                    }
                    label.push_str(&suffix);
                    push(label, lambda, mu);
                }
            }
        }
    }
    out
}

struct Workspace {
    stack: Vec<f64>,
    tmp: Vec<f64>,
    k: [Vec<f64>; 4],
    y: Vec<f64>,
    q: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            stack: Vec::new(),
            tmp: vec![0.0; n],
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            y: vec![0.0; n],
            q: vec![0.0; n],
        }
    }
}

/// Integrates one hop of duration `tau` from `p` with `substeps` RK4 steps.
/// `visit` sees every substep endpoint. Returns `None` when the field is not
/// finite or `visit` rejects a point.
fn rk4_hop(
    dir: &Direction,
    p: &[f64],
    tau: f64,
    substeps: usize,
    ws: &mut Workspace,
    mut visit: impl FnMut(&[f64]) -> bool,
) -> Option<Vec<f64>> {
    let n = p.len();
    let dt = tau / substeps as f64;
    ws.y.copy_from_slice(p);
    for _ in 0..substeps {
        let Workspace { stack, tmp, k, y, q } = ws;
        if !dir.velocity(y, &mut k[0], stack, tmp) {
            return None;
        }
        for i in 0..n {
            q[i] = y[i] + 0.5 * dt * k[0][i];
        }
        if !dir.velocity(q, &mut k[1], stack, tmp) {
            return None;
        }
        for i in 0..n {
            q[i] = y[i] + 0.5 * dt * k[1][i];
        }
        if !dir.velocity(q, &mut k[2], stack, tmp) {
            return None;
        }
        for i in 0..n {
            q[i] = y[i] + dt * k[2][i];
        }
        if !dir.velocity(q, &mut k[3], stack, tmp) {
            return None;
        }
        for i in 0..n {
            y[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        if !visit(y) {
            return None;
        }
    }
    Some(ws.y.clone())
}

/// Compiled `Xⱼ` and `Y` of an operator, for integrating arbitrary constant controls.
pub(crate) struct ControlFields {
    fields: std::sync::Arc<Vec<CompiledField>>,
    n: usize,
}

impl ControlFields {
    pub(crate) fn new(op: &OperatorSpec) -> Self {
        let (xs, y) = op.vector_fields();
        let mut fields: Vec<CompiledField> = xs.iter().map(|x| x.compile()).collect();
        fields.push(y.compile());
        ControlFields {
            fields: std::sync::Arc::new(fields),
            n: op.dim(),
        }
    }

    fn direction(&self, lambda: &[f64], mu: f64) -> Direction {
        Direction {
            label: String::new(),
            lambda: lambda.to_vec(),
            mu,
            terms: lambda
                .iter()
                .enumerate()
                .filter(|(_, l)| **l != 0.0)
                .map(|(j, l)| (*l, j))
                .collect(),
            drift: (mu != 0.0).then_some(self.n),
            fields: self.fields.clone(),
        }
    }

    /// `Σ λⱼ Xⱼ(p) + μ Y(p)`.
    pub(crate) fn velocity(&self, lambda: &[f64], mu: f64, p: &[f64], out: &mut [f64]) -> bool {
        let dir = self.direction(lambda, mu);
        let mut tmp = vec![0.0; self.n];
        dir.velocity(p, out, &mut Vec::new(), &mut tmp)
    }
}

/// Flood fills the propagation set of `x0` on `grid`.
pub fn compute(
    op: &OperatorSpec,
    grid: &Grid,
    x0: &[f64],
    cfg: &ReachConfig,
) -> Result<ReachSet, ReachError> {
    cfg.validate()?;
    let n = grid.dim();
    if op.dim() != n {
        return Err(ReachError::Dimension {
            expected: n,
            got: op.dim(),
        });
    }
    if x0.len() != n {
        return Err(ReachError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    let dom = grid.domain();
    let start = grid
        .locate(x0)
        .filter(|&c| grid.is_inside(c) && dom.contains(x0))
        .ok_or_else(|| ReachError::UnreachedStart(x0.to_vec()))?;

    let dirs = directions(op, grid, cfg);
    let pts = dom.sample_points(crate::operator::ZERO_FIELD_SAMPLES);
    // hops slower than this (relative to the field's sampled speed) are skipped
    let speed_floor: Vec<f64> = {
        let mut ws = Workspace::new(n);
        dirs.iter()
            .map(|d| {
                let mut vmax = 0.0f64;
                let mut v = vec![0.0; n];
                for p in &pts {
                    if d.velocity(p, &mut v, &mut ws.stack, &mut ws.tmp) {
                        vmax = vmax.max(inf_norm(&v));
                    }
                }
                1e-9 * vmax.max(f64::MIN_POSITIVE)
            })
            .collect()
    };

    let len = grid.len();
    let mut reached = CellSet::empty(len);
    let mut parent: Vec<Option<Hop>> = vec![None; len];
    let mut iteration = vec![u32::MAX; len];
    let mut points = vec![f64::NAN; len * n];
    reached.insert(start);
    iteration[start] = 0;
    points[start * n..(start + 1) * n].copy_from_slice(x0);

    let h = grid.h();
    let mut frontier = vec![start];
    let mut level = 0usize;
    let mut capped = false;
    while !frontier.is_empty() {
        if level >= cfg.max_iterations {
            capped = true;
            break;
        }
        let candidates: Vec<Vec<(usize, f64, usize, Vec<f64>)>> = frontier
            .par_iter()
            .map_init(
                || (Workspace::new(n), vec![0.0; n]),
                |(ws, v), &cell| {
                    let p = &points[cell * n..(cell + 1) * n];
                    let mut out = Vec::new();
                    for (di, d) in dirs.iter().enumerate() {
                        if !d.velocity(p, v, &mut ws.stack, &mut ws.tmp) {
                            continue;
                        }
                        let speed = inf_norm(v);
                        if speed <= speed_floor[di] {
                            continue;
                        }
                        // a fixed duration is repeated until the hop leaves the cell
                        let (tau, chunks) = match cfg.dt {
                            Some(dt) => (dt, MAX_CHUNKS),
                            None => (h / speed, 1),
                        };
                        let mut cur = p.to_vec();
                        let mut total = 0.0;
                        let mut landed = None;
                        for _ in 0..chunks {
                            let Some(end) =
                                rk4_hop(d, &cur, tau, cfg.substeps, ws, |y| dom.contains(y))
                            else {
                                break;
                            };
                            total += tau;
                            match grid.locate(&end) {
                                Some(t) if t == cell => cur = end,
                                Some(t) => {
                                    landed = Some((t, end));
                                    break;
                                }
                                None => break,
                            }
                        }
                        if let Some((target, end)) = landed {
                            if grid.is_inside(target) {
                                out.push((di, total, target, end));
                            }
                        }
                    }
                    out
                },
            )
            .collect();
        let mut next = Vec::new();
        for (&cell, cands) in frontier.iter().zip(candidates) {
            for (di, tau, target, end) in cands {
                if reached.insert(target) {
                    parent[target] = Some(Hop {
                        from: cell,
                        direction: di,
                        duration: tau,
                    });
                    iteration[target] = (level + 1) as u32;
                    points[target * n..(target + 1) * n].copy_from_slice(&end);
                    next.push(target);
                }
            }
        }
        frontier = next;
        level += 1;
    }
    Ok(ReachSet {
        grid: grid.clone(),
        x0: x0.to_vec(),
        start,
        reached,
        parent,
        iteration,
        points,
        directions: dirs,
        iterations: level,
        capped,
        substeps: cfg.substeps,
        dt: cfg.dt,
    })
}

const MAX_CHUNKS: usize = 64;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl ReachSet {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn start_cell(&self) -> usize {
        self.start
    }

    pub fn cells(&self) -> &CellSet {
        &self.reached
    }

    pub fn is_reached(&self, cell: usize) -> bool {
        self.reached.contains(cell)
    }

    pub fn parent(&self, cell: usize) -> Option<Hop> {
        self.parent[cell]
    }

    /// Flood iteration at which `cell` was marked.
    pub fn iteration(&self, cell: usize) -> Option<u32> {
        (self.iteration[cell] != u32::MAX).then_some(self.iteration[cell])
    }

    /// Point of `Ω` in `cell` known to be reachable from `x₀`.
    pub fn representative(&self, cell: usize) -> Option<&[f64]> {
        let n = self.grid.dim();
        self.reached
            .contains(cell)
            .then(|| &self.points[cell * n..(cell + 1) * n])
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// Number of flood iterations performed.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// True when the iteration cap stopped the flood before its fixed point.
    pub fn hit_iteration_cap(&self) -> bool {
        self.capped
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Re-integrates `hop` from `from` exactly as the flood did, returning
    /// the time and position after every substep.
    pub(crate) fn replay(&self, hop: &Hop, from: &[f64]) -> Option<Vec<(f64, Vec<f64>)>> {
        let d = &self.directions[hop.direction];
        let (tau, chunks) = match self.dt {
            Some(dt) => (dt, (hop.duration / dt).round().max(1.0) as usize),
            None => (hop.duration, 1),
        };
        let sub = tau / self.substeps as f64;
        let mut ws = Workspace::new(from.len());
        let mut out = Vec::with_capacity(chunks * self.substeps);
        let mut cur = from.to_vec();
        for c in 0..chunks {
            let base = c as f64 * tau;
            let mut k = 0;
            cur = rk4_hop(d, &cur, tau, self.substeps, &mut ws, |y| {
                k += 1;
                out.push((base + k as f64 * sub, y.to_vec()));
                true
            })?;
        }
        Some(out)
    }

    pub fn reachable_fraction(&self) -> f64 {
        self.reached.len() as f64 / self.grid.inside_count() as f64
    }

    /// Whether the cell of `p` is reached.
    pub fn contains(&self, p: &[f64]) -> Result<bool, ReachError> {
        let cell = self
            .grid
            .locate(p)
            .ok_or_else(|| ReachError::OutOfBox(p.to_vec()))?;
        Ok(self.reached.contains(cell))
    }

    /// Hops from `x₀`'s cell to `cell`, in forward order.
    pub fn hops_to(&self, cell: usize) -> Option<Vec<(usize, Hop)>> {
        if !self.reached.contains(cell) {
            return None;
        }
        let mut chain = Vec::new();
        let mut cur = cell;
        while let Some(hop) = self.parent[cur] {
            chain.push((cur, hop));
            cur = hop.from;
        }
        debug_assert_eq!(cur, self.start);
        chain.reverse();
        Some(chain)
    }

    /// Reached cells whose face neighbours all exist, are inside and are reached.
    pub fn interior_of_closure(&self) -> CellSet {
        let g = &self.grid;
        self.reached.filter(|c| {
            (0..g.dim()).all(|axis| {
                [true, false].into_iter().all(|fwd| {
                    g.neighbor(c, axis, fwd)
                        .is_some_and(|nb| g.is_inside(nb) && self.reached.contains(nb))
                })
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::expr::Expr;
    use crate::operator::DomainSpec;

    fn heat_reach(h: f64) -> ReachSet {
        let dom = catalog::unit_square();
        let grid = Grid::anchored(&dom, h, &[0.0, 0.0]).unwrap();
        compute(&catalog::heat_form(), &grid, &[0.0, 0.0], &ReachConfig::default()).unwrap()
    }

    #[test]
    fn heat_form_reaches_the_past_only() {
        let h = 0.1;
        let rs = heat_reach(h);
        let g = rs.grid();
        for cell in g.inside_cells() {
            let c = g.center(cell);
            assert_eq!(rs.is_reached(cell), c[1] <= 1e-9, "{c:?}");
        }
        assert!(!rs.hit_iteration_cap());
        assert!(rs.contains(&[0.0, 0.0]).unwrap());
        assert!(!rs.contains(&[0.0, 0.5]).unwrap());
        assert!(rs.contains(&[0.5, -0.5]).unwrap());
        assert!(matches!(rs.contains(&[3.0, 0.0]), Err(ReachError::OutOfBox(_))));
    }

    #[test]
    fn heat_form_interior() {
        let rs = heat_reach(0.1);
        let g = rs.grid();
        let int = rs.interior_of_closure();
        for cell in int.iter() {
            let c = g.center(cell);
            assert!(c[1] < -1e-9 && c[1] > -0.85 && c[0].abs() < 0.85, "{c:?}");
        }
        assert!(int.contains(g.locate(&[0.0, -0.5]).unwrap()));
        assert!(!int.contains(g.locate(&[0.0, 0.0]).unwrap()));
    }

    #[test]
    fn interior_of_full_set_drops_boundary_layer() {
        let dom = catalog::unit_square();
        let g = Grid::anchored(&dom, 0.1, &[0.0, 0.0]).unwrap();
        let rs = compute(&catalog::laplacian(2), &g, &[0.0, 0.0], &ReachConfig::default()).unwrap();
        assert_eq!(rs.cells().len(), g.inside_count());
        let int = rs.interior_of_closure();
        assert_eq!(int.len(), 17 * 17);
    }

    #[test]
    fn isolated_start_has_tiny_interior() {
        // no admissible motion at all: a zero operator
        let op = crate::operator::OperatorSpec::diagonal(vec![Expr::zero(); 2], vec![Expr::zero(); 2])
            .unwrap();
        let dom = catalog::unit_square();
        let g = Grid::anchored(&dom, 0.25, &[0.0, 0.0]).unwrap();
        let rs = compute(&op, &g, &[0.0, 0.0], &ReachConfig::default()).unwrap();
        assert_eq!(rs.cells().len(), 1);
        assert!(rs.interior_of_closure().is_empty());
    }

    #[test]
    fn start_outside_is_an_error() {
        let dom = catalog::mumford_domain(4.0, 1.0);
        let g = Grid::new(&dom, 0.25).unwrap();
        assert!(matches!(
            compute(&catalog::mumford(), &g, &[0.0, 0.9, 0.9], &ReachConfig::default()),
            Err(ReachError::UnreachedStart(_))
        ));
    }

    #[test]
    fn parent_chains_end_at_start() {
        let rs = heat_reach(0.2);
        for cell in rs.cells().iter() {
            let hops = rs.hops_to(cell).unwrap();
            assert_eq!(hops.len() as u32, rs.iteration(cell).unwrap());
            if let Some((_, first)) = hops.first() {
                assert_eq!(first.from, rs.start_cell());
            }
            assert!(rs.grid().is_inside(cell));
        }
        assert!(rs.parent(rs.start_cell()).is_none());
    }

    #[test]
    fn one_signed_ou_moves_up_only() {
        let dom = catalog::ou_domain(1.0, 3.0, 3.0);
        let x0 = [2.0, 0.0];
        let g = Grid::anchored(&dom, 0.1, &x0).unwrap();
        let rs = compute(&catalog::ornstein_uhlenbeck(), &g, &x0, &ReachConfig::default()).unwrap();
        for cell in rs.cells().iter() {
            assert!(g.center(cell)[1] >= -0.1);
        }
        assert!(rs.contains(&[1.2, 2.5]).unwrap());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let dom = catalog::unit_square();
        let g = Grid::anchored(&dom, 0.1, &[0.0, 0.0]).unwrap();
        let cfg = ReachConfig {
            max_iterations: 3,
            ..ReachConfig::default()
        };
        let rs = compute(&catalog::heat_form(), &g, &[0.0, 0.0], &cfg).unwrap();
        assert!(rs.hit_iteration_cap());
        assert!(rs.cells().iter().all(|c| rs.iteration(c).unwrap() <= 3));
    }

    #[test]
    fn fixed_duration_and_combined_directions() {
        let dom = catalog::unit_square();
        let g = Grid::anchored(&dom, 0.1, &[0.0, 0.0]).unwrap();
        let cfg = ReachConfig {
            dt: Some(0.04),
            combined: true,
            ..ReachConfig::default()
        };
        let rs = compute(&catalog::heat_form(), &g, &[0.0, 0.0], &cfg).unwrap();
        assert!(rs.directions().iter().all(|d| d.mu >= 0.0));
        assert!(rs.directions().iter().any(|d| d.label == "+X1+Y"));
        for cell in rs.cells().iter() {
            assert!(g.center(cell)[1] <= 0.1);
        }
        assert!(rs.cells().len() > g.inside_count() / 3);
        let bad = ReachConfig {
            substeps: 0,
            ..ReachConfig::default()
        };
        assert!(compute(&catalog::heat_form(), &g, &[0.0, 0.0], &bad).is_err());
    }

    #[test]
    fn auto_dt_respects_hop_bound() {
        let dom = catalog::ou_domain(-4.0, 4.0, 3.0);
        let g = Grid::anchored(&dom, 0.05, &[0.0, 0.0]).unwrap();
        let dt = ReachConfig::auto_dt(&catalog::ornstein_uhlenbeck(), &g);
        // Y = x1 ∂2 reaches speed ~4 on this box
        assert!(dt * 4.0 <= 2.0 * 0.05 + 1e-12);
        assert!(dt >= 1e-4);
    }

    #[test]
    fn domain_monotonicity() {
        let op = catalog::ornstein_uhlenbeck();
        let small = DomainSpec::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let big = DomainSpec::boxed(&[(-1.0, 1.5), (-1.0, 1.5)]).unwrap();
        let gs = Grid::anchored(&small, 0.1, &[0.0, 0.0]).unwrap();
        let gb = Grid::anchored(&big, 0.1, &[0.0, 0.0]).unwrap();
        let rs = compute(&op, &gs, &[0.0, 0.0], &ReachConfig::default()).unwrap();
        let rb = compute(&op, &gb, &[0.0, 0.0], &ReachConfig::default()).unwrap();
        let mapped = CellSet::from_cells(
            gb.len(),
            rs.cells().iter().map(|c| gb.locate(&gs.center(c)).unwrap()),
        );
        assert!(mapped.is_subset_within_band(rb.cells(), &gb));
    }
}

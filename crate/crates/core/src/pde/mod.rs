//! Monotone finite differences for `ℒu = 0` with Dirichlet data.
//!
//! The operator is used in non-divergence form `Σ aⱼⱼ ∂ⱼ² + Σ cⱼ ∂ⱼ` with
//! `cⱼ = Σᵢ ∂ᵢaᵢⱼ + bⱼ`. Second derivatives use the central three-point stencil,
//! first derivatives the upwind side of `cⱼ`, so every off-diagonal weight is
//! nonnegative and every row sums to zero.
//!
//! Nodes are the inside cells of a [`Grid`]. A node is a boundary (Dirichlet)
//! node when one of its face neighbours is missing or outside `Ω`.

mod banded;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::Compiled;
use crate::operator::{BarrierParams, OperatorError, OperatorSpec};
use crate::reach::{CellSet, Grid};
use banded::BandedLu;

/// Weights at or below this are treated as absent edges.
pub const EDGE_TOL: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAXITER: usize = 1_000_000;
pub const DEFAULT_EPS: f64 = 1e-12;
/// Largest band storage (in `f64`s) the direct solver will allocate.
pub const MAX_BAND_STORAGE: usize = 200_000_000;

const DIAGONAL_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("operator has cross terms a_ij, i != j; only diagonal A is discretized")]
    NonDiagonal,
    #[error("negative off-diagonal weight {weight} at node {node}")]
    Monotonicity { node: usize, weight: f64 },
    #[error("degenerate node {node} at {x:?}: all a_jj and c_j vanish")]
    Degeneracy { node: usize, x: Vec<f64> },
    #[error("interior node {node} at {x:?} has no path to a boundary node")]
    NoBoundaryAccess { node: usize, x: Vec<f64> },
    #[error("coefficients are not finite at node {node}")]
    NonFinite { node: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("expected {expected} boundary values, got {got}")]
    BoundaryData { expected: usize, got: usize },
    #[error("node {0} is not an interior node")]
    NotInterior(usize),
    #[error("the compact set contains no interior node")]
    EmptyCompact,
    #[error("direct solver needs {0} band entries, more than the supported maximum")]
    TooLarge(usize),
    #[error("direct factorization broke down")]
    Singular,
    #[error("grid has no interior nodes")]
    NoInterior,
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Upwind discretization on the inside cells of a grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Grid,
    cells: Vec<usize>,
    node_of: Vec<usize>,
    boundary: Vec<bool>,
    boundary_nodes: Vec<usize>,
    interior_nodes: Vec<usize>,
    /// Position of a node among the interior (resp. boundary) nodes.
    slot: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    diag: Vec<f64>,
}

const NONE: usize = usize::MAX;

/// Builds the monotone scheme for `op` on `grid`.
pub fn discretize(op: &OperatorSpec, grid: &Grid) -> Result<DiscreteOperator, PdeError> {
    let n = grid.dim();
    if op.dim() != n {
        return Err(OperatorError::DomainDimension {
            domain: n,
            operator: op.dim(),
        }
        .into());
    }
    if !op.is_diagonal(grid.domain(), DIAGONAL_SAMPLES) {
        return Err(PdeError::NonDiagonal);
    }
    let cells: Vec<usize> = grid.inside_cells().collect();
    let mut node_of = vec![NONE; grid.len()];
    for (k, &c) in cells.iter().enumerate() {
        node_of[c] = k;
    }
    let boundary: Vec<bool> = cells
        .iter()
        .map(|&c| {
            (0..n).any(|axis| {
                [true, false].into_iter().any(|fwd| {
                    grid.neighbor(c, axis, fwd)
                        .is_none_or(|nb| !grid.is_inside(nb))
                })
            })
        })
        .collect();
    let mut slot = vec![0; cells.len()];
    let mut boundary_nodes = Vec::new();
    let mut interior_nodes = Vec::new();
    for k in 0..cells.len() {
        if boundary[k] {
            slot[k] = boundary_nodes.len();
            boundary_nodes.push(k);
        } else {
            slot[k] = interior_nodes.len();
            interior_nodes.push(k);
        }
    }

    let diag_coef: Vec<Compiled> = (0..n).map(|j| op.a(j, j).simplify().compile()).collect();
    let drift: Vec<Compiled> = op.drift_expand().iter().map(|c| c.compile()).collect();
    let h = grid.h();
    let rows: Vec<Result<(Vec<(usize, f64)>, f64), PdeError>> = interior_nodes
        .par_iter()
        .map_init(
            || (vec![0.0; n], Vec::new()),
            |(x, stack), &node| {
                let cell = cells[node];
                grid.center_into(cell, x);
                let mut row = Vec::with_capacity(2 * n);
                let mut sum = 0.0;
                for j in 0..n {
                    let a = diag_coef[j].eval(x, stack);
                    let c = drift[j].eval(x, stack);
                    if !a.is_finite() || !c.is_finite() {
                        return Err(PdeError::NonFinite { node });
                    }
                    let fwd = node_of[grid.neighbor(cell, j, true).expect("interior")];
                    let bwd = node_of[grid.neighbor(cell, j, false).expect("interior")];
                    let (mut wf, mut wb) = (a / (h * h), a / (h * h));
                    if c > 0.0 {
                        wf += c / h;
                    } else if c < 0.0 {
                        wb += -c / h;
                    }
                    for (nb, w) in [(fwd, wf), (bwd, wb)] {
                        if w < 0.0 {
                            return Err(PdeError::Monotonicity { node, weight: w });
                        }
                        if w > 0.0 {
                            row.push((nb, w));
                            sum += w;
                        }
                    }
                }
                if sum == 0.0 {
                    return Err(PdeError::Degeneracy { node, x: x.clone() });
                }
                Ok((row, -sum))
            },
        )
        .collect();

    let mut row_ptr = Vec::with_capacity(interior_nodes.len() + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    let mut diag = Vec::with_capacity(interior_nodes.len());
    for r in rows {
        let (row, d) = r?;
        for (c, w) in row {
            cols.push(c);
            weights.push(w);
        }
        row_ptr.push(cols.len());
        diag.push(d);
    }
    let l = DiscreteOperator {
        grid: grid.clone(),
        cells,
        node_of,
        boundary,
        boundary_nodes,
        interior_nodes,
        slot,
        row_ptr,
        cols,
        weights,
        diag,
    };
    l.check_boundary_access()?;
    Ok(l)
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn node_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, node: usize) -> usize {
        self.cells[node]
    }

    pub fn node_of_cell(&self, cell: usize) -> Option<usize> {
        self.node_of.get(cell).copied().filter(|&k| k != NONE)
    }

    /// Node whose cell contains `p`.
    pub fn node_at(&self, p: &[f64]) -> Option<usize> {
        self.grid.locate(p).and_then(|c| self.node_of_cell(c))
    }

    pub fn center(&self, node: usize) -> Vec<f64> {
        self.grid.center(self.cells[node])
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    /// `(neighbour node, weight)` pairs and diagonal of an interior node's row.
    pub fn row(&self, node: usize) -> Option<(impl Iterator<Item = (usize, f64)> + '_, f64)> {
        if self.boundary[node] {
            return None;
        }
        let r = self.slot[node];
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        Some((
            self.cols[span.clone()]
                .iter()
                .copied()
                .zip(self.weights[span].iter().copied()),
            self.diag[r],
        ))
    }

    /// Samples `f` at the boundary node centers, in [`Self::boundary_nodes`] order.
    pub fn boundary_values(&self, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        self.boundary_nodes
            .iter()
            .map(|&k| f(&self.center(k)))
            .collect()
    }

    /// `(Lv)(node)` on interior nodes for values `v` given per node.
    pub fn apply(&self, v: &[f64], node: usize) -> Option<f64> {
        let (row, d) = self.row(node)?;
        Some(row.map(|(c, w)| w * v[c]).sum::<f64>() + d * v[node])
    }

    /// Row-sum defect `|d + Σw| / |d|` maximized over interior rows.
    pub fn max_row_sum_defect(&self) -> f64 {
        (0..self.interior_nodes.len())
            .map(|r| {
                let s: f64 = self.weights[self.row_ptr[r]..self.row_ptr[r + 1]].iter().sum();
                (s + self.diag[r]).abs() / self.diag[r].abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn min_off_diagonal(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check_boundary_access(&self) -> Result<(), PdeError> {
        // reverse edges: who depends on me
        let m = self.node_count();
        let mut indeg_ptr = vec![0usize; m + 1];
        for &c in &self.cols {
            indeg_ptr[c + 1] += 1;
        }
        for k in 0..m {
            indeg_ptr[k + 1] += indeg_ptr[k];
        }
        let mut fill = indeg_ptr.clone();
        let mut rev = vec![0usize; self.cols.len()];
        for (r, &node) in self.interior_nodes.iter().enumerate() {
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.weights[e] > EDGE_TOL {
                    let c = self.cols[e];
                    rev[fill[c]] = node;
                    fill[c] += 1;
                }
            }
        }
        let mut seen = self.boundary.clone();
        let mut stack: Vec<usize> = self.boundary_nodes.clone();
        while let Some(k) = stack.pop() {
            for &src in &rev[indeg_ptr[k]..fill[k]] {
                if !seen[src] {
                    seen[src] = true;
                    stack.push(src);
                }
            }
        }
        if let Some(&node) = self.interior_nodes.iter().find(|&&k| !seen[k]) {
            return Err(PdeError::NoBoundaryAccess {
                node,
                x: self.center(node),
            });
        }
        Ok(())
    }

    /// Interior unknowns ordered with the longest axis outermost, which keeps
    /// the bandwidth at the product of the other axes' counts.
    fn banded_order(&self) -> (Vec<usize>, usize) {
        let counts = self.grid.counts();
        let mut axes: Vec<usize> = (0..counts.len()).collect();
        axes.sort_by_key(|&a| std::cmp::Reverse(counts[a]));
        let mut order: Vec<usize> = (0..self.interior_nodes.len()).collect();
        let keys: Vec<Vec<usize>> = self
            .interior_nodes
            .iter()
            .map(|&k| {
                let m = self.grid.multi_index(self.cells[k]);
                axes.iter().map(|&a| m[a]).collect()
            })
            .collect();
        order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
        let mut pos = vec![0; order.len()];
        for (p, &r) in order.iter().enumerate() {
            pos[r] = p;
        }
        let mut bw = 0;
        for r in 0..self.interior_nodes.len() {
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[e];
                if !self.boundary[c] {
                    bw = bw.max(pos[r].abs_diff(pos[self.slot[c]]));
                }
            }
        }
        (pos, bw)
    }
}

/// Factored `M = −L_II` with the permutation used for banding.
struct Direct {
    lu: BandedLu,
    /// Band position of interior slot `r`.
    pos: Vec<usize>,
}

impl Direct {
    fn new(l: &DiscreteOperator) -> Result<Self, PdeError> {
        let (pos, bw) = l.banded_order();
        let m = l.interior_nodes.len();
        let storage = BandedLu::storage(m, bw);
        if storage > MAX_BAND_STORAGE {
            return Err(PdeError::TooLarge(storage));
        }
        let mut entries = Vec::with_capacity(l.cols.len() + m);
        for r in 0..m {
            entries.push((pos[r], pos[r], -l.diag[r]));
            for e in l.row_ptr[r]..l.row_ptr[r + 1] {
                let c = l.cols[e];
                if !l.boundary[c] {
                    entries.push((pos[r], pos[l.slot[c]], -l.weights[e]));
                }
            }
        }
        let lu = BandedLu::factor(m, bw, entries).ok_or(PdeError::Singular)?;
        Ok(Direct { lu, pos })
    }

    /// Interior values (by slot) for `M u = rhs`, `rhs` by slot.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; rhs.len()];
        for (r, &p) in self.pos.iter().enumerate() {
            x[p] = rhs[r];
        }
        self.lu.solve(&mut x);
        self.pos.iter().map(|&p| x[p]).collect()
    }

    fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; rhs.len()];
        for (r, &p) in self.pos.iter().enumerate() {
            x[p] = rhs[r];
        }
        self.lu.solve_transpose(&mut x);
        self.pos.iter().map(|&p| x[p]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Simultaneous-displacement relaxation.
    #[default]
    Jacobi,
    /// Banded LU on the interior unknowns.
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    /// One value per node.
    pub values: Vec<f64>,
    /// Max over interior nodes of `|Lu| / |diag|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Scaled residual `max |(Lu)ᵢ| / |dᵢ|`.
fn residual(l: &DiscreteOperator, u: &[f64]) -> f64 {
    l.interior_nodes
        .par_iter()
        .enumerate()
        .map(|(r, &node)| {
            let s: f64 = (l.row_ptr[r]..l.row_ptr[r + 1])
                .map(|e| l.weights[e] * u[l.cols[e]])
                .sum();
            (s + l.diag[r] * u[node]).abs() / l.diag[r].abs()
        })
        .reduce(|| 0.0, f64::max)
}

fn with_boundary(l: &DiscreteOperator, g: &[f64], fill: f64) -> Result<Vec<f64>, PdeError> {
    if g.len() != l.boundary_nodes.len() {
        return Err(PdeError::BoundaryData {
            expected: l.boundary_nodes.len(),
            got: g.len(),
        });
    }
    let mut u = vec![fill; l.node_count()];
    for (&k, &v) in l.boundary_nodes.iter().zip(g) {
        u[k] = v;
    }
    Ok(u)
}

/// Solves `Lu = 0` in the interior with `u = g` on the boundary nodes by
/// simultaneous displacement, starting from the mean of `g`.
pub fn solve(l: &DiscreteOperator, g: &[f64], tol: f64, maxiter: usize) -> Result<DiscreteSolution, PdeError> {
    solve_with(l, g, tol, maxiter, SolveMethod::Jacobi)
}

pub fn solve_with(
    l: &DiscreteOperator,
    g: &[f64],
    tol: f64,
    maxiter: usize,
    method: SolveMethod,
) -> Result<DiscreteSolution, PdeError> {
    if l.interior_nodes.is_empty() {
        return Err(PdeError::NoInterior);
    }
    let mean = if g.is_empty() { 0.0 } else { g.iter().sum::<f64>() / g.len() as f64 };
    let mut u = with_boundary(l, g, mean)?;
    match method {
        SolveMethod::Direct => {
            let d = Direct::new(l)?;
            let rhs = boundary_rhs(l, &u);
            let x = d.solve(&rhs);
            for (r, &node) in l.interior_nodes.iter().enumerate() {
                u[node] = x[r];
            }
            let res = residual(l, &u);
            Ok(DiscreteSolution {
                values: u,
                residual: res,
                iterations: 1,
            })
        }
        SolveMethod::Jacobi => jacobi(l, u, tol, maxiter),
    }
}

/// `Σ_{boundary c} w_rc u_c` per interior slot.
fn boundary_rhs(l: &DiscreteOperator, u: &[f64]) -> Vec<f64> {
    (0..l.interior_nodes.len())
        .map(|r| {
            (l.row_ptr[r]..l.row_ptr[r + 1])
                .filter(|&e| l.boundary[l.cols[e]])
                .map(|e| l.weights[e] * u[l.cols[e]])
                .sum()
        })
        .collect()
}

const STAGNATION_WINDOW: usize = 2000;

fn jacobi(l: &DiscreteOperator, mut u: Vec<f64>, tol: f64, maxiter: usize) -> Result<DiscreteSolution, PdeError> {
    let mut next = u.clone();
    let mut checkpoint = f64::INFINITY;
    let mut res = f64::INFINITY;
    for it in 0..maxiter {
        // every interior update reads only the previous iterate
        res = {
            let prev = &u;
            let updates: Vec<(f64, f64)> = l
                .interior_nodes
                .par_iter()
                .enumerate()
                .map(|(r, &node)| {
                    let s: f64 = (l.row_ptr[r]..l.row_ptr[r + 1])
                        .map(|e| l.weights[e] * prev[l.cols[e]])
                        .sum();
                    let v = s / -l.diag[r];
                    (v, (v - prev[node]).abs())
                })
                .collect();
            let mut m = 0.0f64;
            for (&node, (v, d)) in l.interior_nodes.iter().zip(updates) {
                next[node] = v;
                m = m.max(d);
            }
            m
        };
        std::mem::swap(&mut u, &mut next);
        if res <= tol {
            return Ok(DiscreteSolution {
                values: u,
                residual: res,
                iterations: it + 1,
            });
        }
        if (it + 1) % STAGNATION_WINDOW == 0 {
            if res >= checkpoint {
                return Err(PdeError::NonConvergence {
                    iterations: it + 1,
                    residual: res,
                });
            }
            checkpoint = res;
        }
    }
    Err(PdeError::NonConvergence {
        iterations: maxiter,
        residual: res,
    })
}

/// Harmonic measure of one node: weights over the boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicMeasureRow {
    pub node: usize,
    /// In [`DiscreteOperator::boundary_nodes`] order.
    pub weights: Vec<f64>,
    pub sum: f64,
}

impl HarmonicMeasureRow {
    fn new(node: usize, weights: Vec<f64>) -> Self {
        let sum = weights.iter().sum();
        HarmonicMeasureRow { node, weights, sum }
    }
}

/// Measure of an interior node via one transposed solve: `μₓ = Bᵀ M⁻ᵀ eₓ`.
pub fn harmonic_measure(l: &DiscreteOperator, node: usize) -> Result<HarmonicMeasureRow, PdeError> {
    let d = Direct::new(l)?;
    measure_row(l, &d, node)
}

fn measure_row(l: &DiscreteOperator, d: &Direct, node: usize) -> Result<HarmonicMeasureRow, PdeError> {
    if node >= l.node_count() || l.boundary[node] {
        return Err(PdeError::NotInterior(node));
    }
    let mut e = vec![0.0; l.interior_nodes.len()];
    e[l.slot[node]] = 1.0;
    let z = d.solve_transpose(&e);
    let mut w = vec![0.0; l.boundary_nodes.len()];
    for (r, zr) in z.iter().enumerate() {
        if *zr == 0.0 {
            continue;
        }
        for e in l.row_ptr[r]..l.row_ptr[r + 1] {
            let c = l.cols[e];
            if l.boundary[c] {
                w[l.slot[c]] += zr * l.weights[e];
            }
        }
    }
    Ok(HarmonicMeasureRow::new(node, w))
}

/// Harmonic measures of several interior nodes, by transposed solves or by
/// one solve per boundary atom, whichever needs fewer solves.
pub fn harmonic_measures(l: &DiscreteOperator, nodes: &[usize]) -> Result<Vec<HarmonicMeasureRow>, PdeError> {
    if let Some(&bad) = nodes.iter().find(|&&k| k >= l.node_count() || l.boundary[k]) {
        return Err(PdeError::NotInterior(bad));
    }
    let d = Direct::new(l)?;
    let nb = l.boundary_nodes.len();
    if nodes.len() <= nb {
        return nodes.par_iter().map(|&k| measure_row(l, &d, k)).collect();
    }
    let columns: Vec<Vec<f64>> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let y = l.boundary_nodes[b];
            let mut u = vec![0.0; l.node_count()];
            u[y] = 1.0;
            d.solve(&boundary_rhs(l, &u))
        })
        .collect();
    Ok(nodes
        .iter()
        .map(|&k| {
            let r = l.slot[k];
            HarmonicMeasureRow::new(k, columns.iter().map(|col| col[r]).collect())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Finite(f64),
    Infinite,
}

impl Ratio {
    pub fn is_finite(&self) -> bool {
        matches!(self, Ratio::Finite(_))
    }

    pub fn value(&self) -> f64 {
        match self {
            Ratio::Finite(v) => *v,
            Ratio::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ratio::Finite(v) => write!(f, "{v:.11e}"),
            Ratio::Infinite => f.write_str("INF"),
        }
    }
}

/// Best constant `C` in `max_K u ≤ C u(x₀)` over nonnegative discrete solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnackEstimate {
    pub ratio: Ratio,
    /// Boundary node attaining the ratio.
    pub witness_boundary: Option<usize>,
    /// Node of `K` attaining the ratio.
    pub witness_k: Option<usize>,
    pub eps: f64,
}

/// Every nonnegative solution is `u = Σ_y g(y) μ_·(y)` with `g ≥ 0`, so the best
/// constant is `max_y max_{x∈K} μₓ(y) / μ_{x₀}(y)`. Atoms with `μ_{x₀}(y) ≤ eps`
/// that `K` sees above `eps` make it infinite.
pub fn harnack_ratio(l: &DiscreteOperator, x0: usize, k: &CellSet, eps: f64) -> Result<HarnackEstimate, PdeError> {
    if x0 >= l.node_count() || l.boundary[x0] {
        return Err(PdeError::NotInterior(x0));
    }
    let mut nodes = vec![x0];
    for cell in k.iter() {
        let node = l.node_of_cell(cell).ok_or(PdeError::NotInterior(usize::MAX))?;
        if l.boundary[node] {
            return Err(PdeError::NotInterior(node));
        }
        if node != x0 {
            nodes.push(node);
        }
    }
    if k.is_empty() {
        return Err(PdeError::EmptyCompact);
    }
    let rows = harmonic_measures(l, &nodes)?;
    let base = &rows[0].weights;
    let k_rows: &[HarmonicMeasureRow] = if k.contains(l.cell(x0)) { &rows } else { &rows[1..] };
    let mut best = Ratio::Finite(0.0);
    let mut witness = (None, None);
    for (b, &m0) in base.iter().enumerate() {
        for row in k_rows {
            let m = row.weights[b];
            if m0 > eps {
                let r = m / m0;
                if best.is_finite() && r > best.value() {
                    best = Ratio::Finite(r);
                    witness = (Some(l.boundary_nodes[b]), Some(row.node));
                }
            } else if m > eps && best.is_finite() {
                best = Ratio::Infinite;
                witness = (Some(l.boundary_nodes[b]), Some(row.node));
            }
        }
    }
    Ok(HarnackEstimate {
        ratio: best,
        witness_boundary: witness.0,
        witness_k: witness.1,
        eps,
    })
}

/// Smallest node set containing `x0` and closed under the stencil's
/// dependency edges (weights above [`EDGE_TOL`]), as cells.
pub fn absorbent_hull(l: &DiscreteOperator, x0: usize) -> CellSet {
    let mut seen = vec![false; l.node_count()];
    let mut out = CellSet::empty(l.grid.len());
    if x0 >= l.node_count() {
        return out;
    }
    seen[x0] = true;
    let mut stack = vec![x0];
    while let Some(k) = stack.pop() {
        out.insert(l.cells[k]);
        if l.boundary[k] {
            continue;
        }
        let r = l.slot[k];
        for e in l.row_ptr[r]..l.row_ptr[r + 1] {
            let c = l.cols[e];
            if l.weights[e] > EDGE_TOL && !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub min_w: f64,
    /// Max of `Lw` over interior nodes.
    pub max_lw: f64,
}

impl BarrierReport {
    pub fn passed(&self) -> bool {
        self.min_w > 0.0 && self.max_lw < 0.0
    }
}

/// Evaluates `w = M − e^{λx₁}` on all nodes and `Lw` on the interior.
pub fn check_barrier(l: &DiscreteOperator, bp: &BarrierParams) -> BarrierReport {
    let w: Vec<f64> = (0..l.node_count()).map(|k| bp.w(&l.center(k))).collect();
    let min_w = w.iter().copied().fold(f64::INFINITY, f64::min);
    let max_lw = l
        .interior_nodes
        .iter()
        .enumerate()
        .map(|(r, &node)| {
            (l.row_ptr[r]..l.row_ptr[r + 1])
                .map(|e| l.weights[e] * (w[l.cols[e]] - w[node]))
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    BarrierReport { min_w, max_lw }
}

/// If `u` attains its maximum at `x0`, whether `u` is within `tol` of `u(x0)`
/// on every node of `p`; vacuously true otherwise.
pub fn check_amano(l: &DiscreteOperator, u: &DiscreteSolution, x0: usize, p: &CellSet, tol: f64) -> bool {
    let u0 = u.values[x0];
    let max = u.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if u0 < max {
        return true;
    }
    p.iter()
        .filter_map(|c| l.node_of_cell(c))
        .all(|k| (u.values[k] - u0).abs() <= tol)
}

/// Inside cells whose centers lie in the closed box `Π [loᵢ, hiᵢ]`.
pub fn cells_in_box(grid: &Grid, bounds: &[(f64, f64)]) -> CellSet {
    let tol = 1e-9 * grid.h();
    let mut c = vec![0.0; grid.dim()];
    let mut out = CellSet::empty(grid.len());
    for cell in grid.inside_cells() {
        grid.center_into(cell, &mut c);
        if c.iter().zip(bounds).all(|(x, (lo, hi))| *x >= lo - tol && *x <= hi + tol) {
            out.insert(cell);
        }
    }
    out
}

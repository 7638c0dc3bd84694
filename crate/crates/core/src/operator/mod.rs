//! Second order operators `ℒu = Σ ∂ᵢ(aᵢⱼ ∂ⱼu) + Σ bᵢ ∂ᵢu` and the vector
//! fields, brackets and barrier functions derived from them.

mod domain;

pub use domain::{Block, DomainError, DomainSpec};

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::expr::{Compiled, EvalError, Expr};

/// Pointwise tolerance for `aᵢⱼ = aⱼᵢ`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue of `A` at a sample point.
pub const PSD_TOL: f64 = -1e-9;
/// Pivot tolerance for the bracket rank.
pub const RANK_TOL: f64 = 1e-9;
/// Iterated brackets deeper than this are refused.
pub const MAX_BRACKET_DEPTH: usize = 5;
/// Points used to decide that a field vanishes identically on `Ω`.
pub const ZERO_FIELD_SAMPLES: usize = 50;
const ZERO_FIELD_TOL: f64 = 1e-14;
/// Sampled `a₁₁` must exceed this for (H2).
pub const H2_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("H2 violation: sampled inf of a11 over the domain is {inf}")]
    H2Violation { inf: f64 },
    #[error("coefficient matrix not symmetric: a{i}{j} differs from a{j}{i} at {point:?}")]
    NotSymmetric {
        i: usize,
        j: usize,
        point: Vec<f64>,
    },
    #[error("coefficient matrix not positive semidefinite: eigenvalue {eigenvalue} at {point:?}")]
    NotPsd { eigenvalue: f64, point: Vec<f64> },
    #[error("vector fields have dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("bracket depth must be in 1..={MAX_BRACKET_DEPTH}, got {0}")]
    InvalidDepth(usize),
    #[error("domain has dimension {domain}, operator has dimension {operator}")]
    DomainDimension { domain: usize, operator: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// A vector field `Σ vᵢ ∂ᵢ` with expression components.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(components: Vec<Expr>) -> Self {
        VectorField { components }
    }

    /// The coordinate field `∂_{axis+1}` in dimension `dim`.
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        VectorField::new(
            (0..dim)
                .map(|k| if k == axis { Expr::one() } else { Expr::zero() })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|c| c.evaluate(p)).collect()
    }

    pub fn simplify(&self) -> Self {
        VectorField::new(self.components.iter().map(Expr::simplify).collect())
    }

    /// All components simplify to the constant zero.
    pub fn is_structurally_zero(&self) -> bool {
        self.components.iter().all(|c| c.simplify().is_zero())
    }

    /// Zero at every sample point (componentwise `|v| ≤ 1e-14`), or structurally zero.
    pub fn vanishes_on(&self, points: &[Vec<f64>]) -> bool {
        if self.is_structurally_zero() {
            return true;
        }
        points.iter().all(|p| {
            self.components.iter().all(|c| match c.evaluate(p) {
                Ok(v) => v.abs() <= ZERO_FIELD_TOL,
                Err(_) => false,
            })
        })
    }

    pub fn compile(&self) -> CompiledField {
        CompiledField {
            comps: self.components.iter().map(Expr::compile).collect(),
        }
    }

    /// Extends the field by a zero last component.
    pub fn extend_zero(&self) -> Self {
        let mut c = self.components.clone();
        c.push(Expr::zero());
        VectorField::new(c)
    }
}

impl std::fmt::Display for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for (i, c) in self.components.iter().enumerate() {
            let c = c.simplify();
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match c.as_const() {
                Some(v) if v == 1.0 => write!(f, "d{}", i + 1)?,
                _ => write!(f, "{c}*d{}", i + 1)?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Compiled form of a [`VectorField`] for integration loops.
#[derive(Debug, Clone)]
pub struct CompiledField {
    comps: Vec<Compiled>,
}

impl CompiledField {
    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    /// Writes the field value at `p` into `out`; false if any component is not finite.
    pub fn eval_into(&self, p: &[f64], out: &mut [f64], stack: &mut Vec<f64>) -> bool {
        let mut ok = true;
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c.eval(p, stack);
            ok &= o.is_finite();
        }
        ok
    }
}

/// `[V,W]ᵏ = Σᵢ (Vⁱ ∂ᵢWᵏ − Wⁱ ∂ᵢVᵏ)`, simplified.
pub fn lie_bracket(v: &VectorField, w: &VectorField) -> Result<VectorField, OperatorError> {
    if v.dim() != w.dim() {
        return Err(OperatorError::DimensionMismatch(v.dim(), w.dim()));
    }
    let n = v.dim();
    let comps = (0..n)
        .map(|k| {
            let mut acc = Expr::zero();
            for i in 0..n {
                let vi = &v.components[i];
                let wi = &w.components[i];
                if !vi.is_zero() {
                    let d = w.components[k].differentiate(i);
                    if !d.is_zero() {
                        acc = acc + vi.clone() * d;
                    }
                }
                if !wi.is_zero() {
                    let d = v.components[k].differentiate(i);
                    if !d.is_zero() {
                        acc = acc - wi.clone() * d;
                    }
                }
            }
            acc.simplify()
        })
        .collect();
    Ok(VectorField::new(comps))
}

/// Picone barrier `w(x) = M − e^{λ x₁}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub lambda: f64,
    pub m: f64,
}

impl BarrierParams {
    pub fn w(&self, p: &[f64]) -> f64 {
        self.m - (self.lambda * p[0]).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H2Report {
    pub holds: bool,
    /// Smallest sampled value of `a₁₁`.
    pub infimum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    /// Smallest accepted pivot, `None` when the rank is zero.
    pub min_pivot: Option<f64>,
    /// Number of fields (generators and brackets) evaluated.
    pub fields: usize,
}

/// The operator `ℒ` in divergence form: `n`, the symmetric matrix `A` and the drift `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    n: usize,
    a: Vec<Vec<Expr>>,
    b: Vec<Expr>,
}

impl OperatorSpec {
    pub fn new(a: Vec<Vec<Expr>>, b: Vec<Expr>) -> Result<Self, OperatorError> {
        let n = b.len();
        if n == 0 {
            return Err(OperatorError::Shape("dimension must be positive".into()));
        }
        if a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(OperatorError::Shape(format!(
                "coefficient matrix must be {n}x{n}"
            )));
        }
        let arity = a
            .iter()
            .flatten()
            .chain(b.iter())
            .map(Expr::arity)
            .max()
            .unwrap_or(0);
        if arity > n {
            return Err(OperatorError::Shape(format!(
                "coefficient uses x{arity} in dimension {n}"
            )));
        }
        Ok(OperatorSpec { n, a, b })
    }

    /// Diagonal `A` and drift `b`.
    pub fn diagonal(diag: Vec<Expr>, b: Vec<Expr>) -> Result<Self, OperatorError> {
        let n = diag.len();
        let a = diag
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                (0..n)
                    .map(|j| if i == j { d.clone() } else { Expr::zero() })
                    .collect()
            })
            .collect();
        Self::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn a(&self, i: usize, j: usize) -> &Expr {
        &self.a[i][j]
    }

    pub fn b(&self, i: usize) -> &Expr {
        &self.b[i]
    }

    pub fn matrix(&self) -> &[Vec<Expr>] {
        &self.a
    }

    pub fn drift(&self) -> &[Expr] {
        &self.b
    }

    /// Checks symmetry and positive semidefiniteness of `A` at sample points of `dom`.
    pub fn check_structure(&self, dom: &DomainSpec, samples: usize) -> Result<(), OperatorError> {
        self.check_domain(dom)?;
        let n = self.n;
        for p in dom.sample_points(samples) {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = self.a[i][j].evaluate(&p)?;
                }
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                        return Err(OperatorError::NotSymmetric {
                            i: i + 1,
                            j: j + 1,
                            point: p,
                        });
                    }
                }
            }
            let eig = SymmetricEigen::new(m).eigenvalues.min();
            if eig < PSD_TOL {
                return Err(OperatorError::NotPsd {
                    eigenvalue: eig,
                    point: p,
                });
            }
        }
        Ok(())
    }

    fn check_domain(&self, dom: &DomainSpec) -> Result<(), OperatorError> {
        if dom.dim() != self.n {
            return Err(OperatorError::DomainDimension {
                domain: dom.dim(),
                operator: self.n,
            });
        }
        Ok(())
    }

    /// `Xⱼ = Σᵢ aⱼᵢ ∂ᵢ` (row `j` of `A`) and `Y = Σᵢ bᵢ ∂ᵢ`.
    pub fn vector_fields(&self) -> (Vec<VectorField>, VectorField) {
        let xs = self
            .a
            .iter()
            .map(|row| VectorField::new(row.clone()))
            .collect();
        (xs, VectorField::new(self.b.clone()))
    }

    /// Drift of the non-divergence form, `cⱼ = Σᵢ ∂ᵢaᵢⱼ + bⱼ`.
    pub fn drift_expand(&self) -> Vec<Expr> {
        (0..self.n)
            .map(|j| {
                let mut c = self.b[j].clone();
                for i in 0..self.n {
                    let d = self.a[i][j].differentiate(i);
                    if !d.is_zero() {
                        c = c + d;
                    }
                }
                c.simplify()
            })
            .collect()
    }

    /// `ℒu` assembled symbolically from the divergence form.
    pub fn apply_divergence(&self, u: &Expr) -> Expr {
        let mut acc = Expr::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                let flux = (self.a[i][j].clone() * u.differentiate(j)).simplify();
                acc = acc + flux.differentiate(i);
            }
            acc = acc + self.b[i].clone() * u.differentiate(i);
        }
        acc.simplify()
    }

    /// `ℒu = Σ aᵢⱼ ∂ᵢⱼu + Σ cⱼ ∂ⱼu` from the expanded drift.
    pub fn apply_nondivergence(&self, u: &Expr) -> Expr {
        let c = self.drift_expand();
        let mut acc = Expr::zero();
        for j in 0..self.n {
            let dj = u.differentiate(j);
            for i in 0..self.n {
                acc = acc + self.a[i][j].clone() * dj.differentiate(i);
            }
            acc = acc + c[j].clone() * dj;
        }
        acc.simplify()
    }

    /// Sampled check of (H2), `inf_Ω a₁₁ > 0`.
    pub fn check_h2(&self, dom: &DomainSpec, samples: usize) -> Result<H2Report, OperatorError> {
        self.check_domain(dom)?;
        let mut inf = f64::INFINITY;
        for p in dom.sample_points(samples) {
            inf = inf.min(self.a[0][0].evaluate(&p)?);
        }
        Ok(H2Report {
            holds: inf > H2_TOL,
            infimum: inf,
        })
    }

    /// Constants of the barrier `w = M − e^{λx₁}`.
    ///
    /// Since `ℒw = −λ e^{λx₁}(λa₁₁ + c₁)`, choosing `λ = (1.1·sup|c₁| + 1)/inf a₁₁`
    /// makes `λa₁₁ + c₁ ≥ 1` at the samples; `M = e^{λ·sup x₁} + 1` uses the
    /// exact upper bound of `x₁` on the domain, so `w > 1` on `Ω`.
    pub fn barrier_params(
        &self,
        dom: &DomainSpec,
        samples: usize,
    ) -> Result<BarrierParams, OperatorError> {
        let h2 = self.check_h2(dom, samples)?;
        if !h2.holds {
            return Err(OperatorError::H2Violation { inf: h2.infimum });
        }
        let c1 = &self.drift_expand()[0];
        let mut sup_c = 0.0f64;
        for p in dom.sample_points(samples) {
            sup_c = sup_c.max(c1.evaluate(&p)?.abs());
        }
        let lambda = (1.1 * sup_c + 1.0) / h2.infimum;
        let x1_max = dom.bounding_box()[0].1;
        Ok(BarrierParams {
            lambda,
            m: (lambda * x1_max).exp() + 1.0,
        })
    }

    /// Rows of `A` that vanish at all sample points of `dom` are reported as `false`.
    pub fn active_fields(&self, dom: &DomainSpec) -> (Vec<bool>, bool) {
        let pts = dom.sample_points(ZERO_FIELD_SAMPLES);
        let (xs, y) = self.vector_fields();
        (
            xs.iter().map(|x| !x.vanishes_on(&pts)).collect(),
            !y.vanishes_on(&pts),
        )
    }

    /// Off-diagonal entries vanish at the sample points (or structurally).
    pub fn is_diagonal(&self, dom: &DomainSpec, samples: usize) -> bool {
        let pts = dom.sample_points(samples);
        (0..self.n).all(|i| {
            (0..self.n).all(|j| {
                i == j
                    || self.a[i][j].simplify().is_zero()
                    || pts
                        .iter()
                        .all(|p| matches!(self.a[i][j].evaluate(p), Ok(v) if v == 0.0))
            })
        })
    }

    /// Rank at `p` of the span of the nonzero `Xⱼ`, `Y` and their iterated
    /// brackets up to length `depth`.
    pub fn hoermander_rank(&self, p: &[f64], depth: usize) -> Result<RankReport, OperatorError> {
        if depth == 0 || depth > MAX_BRACKET_DEPTH {
            return Err(OperatorError::InvalidDepth(depth));
        }
        let (xs, y) = self.vector_fields();
        let gens: Vec<VectorField> = xs
            .into_iter()
            .chain(std::iter::once(y))
            .map(|f| f.simplify())
            .filter(|f| !f.is_structurally_zero())
            .collect();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for g in &gens {
            rows.push(g.evaluate(p)?);
        }
        let mut report = rank_of(&rows, self.n);
        let mut level = gens.clone();
        for _ in 1..depth {
            if report.rank == self.n {
                break;
            }
            let mut next = Vec::new();
            for g in &gens {
                for v in &level {
                    let br = lie_bracket(g, v)?;
                    if br.is_structurally_zero() {
                        continue;
                    }
                    rows.push(br.evaluate(p)?);
                    next.push(br);
                }
            }
            level = next;
            report = rank_of(&rows, self.n);
        }
        report.fields = rows.len();
        Ok(report)
    }

    /// Lift `∂²_{n+1} + ℒ` on `n+1` variables.
    pub fn lift(&self) -> OperatorSpec {
        let n = self.n;
        let mut a: Vec<Vec<Expr>> = self
            .a
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.push(Expr::zero());
                r
            })
            .collect();
        let mut last = vec![Expr::zero(); n];
        last.push(Expr::one());
        a.push(last);
        let mut b = self.b.clone();
        b.push(Expr::zero());
        OperatorSpec { n: n + 1, a, b }
    }
}

/// Rank by Gaussian elimination with full pivoting on a row set.
pub(crate) fn rank_of(rows: &[Vec<f64>], n: usize) -> RankReport {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let mut rank = 0;
    let mut min_pivot: Option<f64> = None;
    let mut used_cols = vec![false; n];
    while rank < m.len() && rank < n {
        let mut best = (0.0, 0, 0);
        for (r, row) in m.iter().enumerate().skip(rank) {
            for (c, v) in row.iter().enumerate() {
                if !used_cols[c] && v.abs() > best.0 {
                    best = (v.abs(), r, c);
                }
            }
        }
        let (piv, r, c) = best;
        if piv <= RANK_TOL {
            break;
        }
        m.swap(rank, r);
        used_cols[c] = true;
        let pivot_row = m[rank].clone();
        for row in m.iter_mut().skip(rank + 1) {
            let f = row[c] / pivot_row[c];
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                *x -= f * y;
            }
        }
        min_pivot = Some(min_pivot.map_or(piv, |m: f64| m.min(piv)));
        rank += 1;
    }
    RankReport {
        rank,
        min_pivot,
        fields: rows.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::expr::{parse, sampled_eq};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn e(s: &str, n: usize) -> Expr {
        parse(s, n).unwrap()
    }

    fn random_points(n: usize, count: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..count)
            .map(|_| (0..n).map(|_| rng.gen_range(-scale..scale)).collect())
            .collect()
    }

    fn field_eq(a: &VectorField, b: &VectorField, pts: &[Vec<f64>]) -> bool {
        a.dim() == b.dim()
            && a.components()
                .iter()
                .zip(b.components())
                .all(|(x, y)| sampled_eq(x, y, pts.iter().map(|p| p.as_slice()), 1e-9))
    }

    #[test]
    fn vector_fields_of_paper_operators() {
        let pts = random_points(3, 20, 3.0, 1);
        let (xs, y) = catalog::mumford().vector_fields();
        assert!(field_eq(&xs[0], &VectorField::coordinate(3, 0), &pts));
        assert!(xs[1].is_structurally_zero() && xs[2].is_structurally_zero());
        let expected_y = VectorField::new(vec![Expr::zero(), e("sin(x1)", 3), e("cos(x1)", 3)]);
        assert!(field_eq(&y, &expected_y, &pts));

        let pts = random_points(2, 20, 3.0, 2);
        let (xs, y) = catalog::ornstein_uhlenbeck().vector_fields();
        assert!(field_eq(&xs[0], &VectorField::coordinate(2, 0), &pts));
        assert!(xs[1].is_structurally_zero());
        assert!(field_eq(&y, &VectorField::new(vec![Expr::zero(), Expr::var(0)]), &pts));

        let lap = catalog::laplacian(2);
        let (xs, y) = lap.vector_fields();
        assert!(field_eq(&xs[1], &VectorField::coordinate(2, 1), &pts));
        assert!(y.is_structurally_zero());
    }

    #[test]
    fn drift_expansion_examples() {
        let pts = random_points(2, 10, 2.0, 3);
        let c = catalog::ornstein_uhlenbeck().drift_expand();
        assert!(c[0].is_zero());
        assert!(sampled_eq(&c[1], &Expr::var(0), pts.iter().map(|p| p.as_slice()), 1e-12));

        let c = catalog::heat_form().drift_expand();
        assert_eq!(c, vec![Expr::zero(), Expr::Const(-1.0)]);

        let op = OperatorSpec::diagonal(vec![e("1 + x1^2", 2), Expr::zero()], vec![Expr::zero(); 2])
            .unwrap();
        let c = op.drift_expand();
        assert!(sampled_eq(&c[0], &e("2*x1", 2), pts.iter().map(|p| p.as_slice()), 1e-12));
        assert!(c[1].is_zero());
    }

    #[test]
    fn divergence_and_nondivergence_forms_agree() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let ops = [
            OperatorSpec::new(
                vec![
                    vec![e("2 + sin(x1)", 2), e("x1*x2", 2)],
                    vec![e("x1*x2", 2), e("1 + x2^2", 2)],
                ],
                vec![e("cos(x2)", 2), e("x1", 2)],
            )
            .unwrap(),
            catalog::ornstein_uhlenbeck(),
            catalog::heat_form(),
        ];
        for op in &ops {
            for _ in 0..5 {
                // random cubic polynomial in x1, x2
                let mut u = Expr::zero();
                for i in 0..=3u32 {
                    for j in 0..=(3 - i) {
                        let coef: f64 = rng.gen_range(-2.0..2.0);
                        u = u + Expr::Const(coef) * Expr::var(0).powi(i) * Expr::var(1).powi(j);
                    }
                }
                let div = op.apply_divergence(&u);
                let nondiv = op.apply_nondivergence(&u);
                let pts = random_points(2, 10, 1.5, rng.gen());
                assert!(sampled_eq(&div, &nondiv, pts.iter().map(|p| p.as_slice()), 1e-9));
            }
        }
    }

    #[test]
    fn bracket_examples() {
        let pts = random_points(3, 10, 4.0, 11);
        let d1 = VectorField::coordinate(2, 0);
        let ou_y = VectorField::new(vec![Expr::zero(), Expr::var(0)]);
        let br = lie_bracket(&d1, &ou_y).unwrap();
        assert!(field_eq(&br, &VectorField::coordinate(2, 1), &pts));
        assert!(lie_bracket(&ou_y, &ou_y).unwrap().is_structurally_zero());

        let (xs, y) = catalog::mumford().vector_fields();
        let br = lie_bracket(&xs[0], &y).unwrap();
        let expected = VectorField::new(vec![Expr::zero(), e("cos(x1)", 3), e("-sin(x1)", 3)]);
        assert!(field_eq(&br, &expected, &pts));
        assert!(matches!(
            lie_bracket(&d1, &y),
            Err(OperatorError::DimensionMismatch(2, 3))
        ));
    }

    #[test]
    fn bracket_antisymmetry_and_jacobi() {
        let pts = random_points(3, 10, 3.0, 5);
        let (xs, y) = catalog::mumford().vector_fields();
        let x = xs[0].clone();
        let xy = lie_bracket(&x, &y).unwrap();
        let fields = [x.clone(), y.clone(), xy.clone()];
        for a in &fields {
            for b in &fields {
                let s1 = lie_bracket(a, b).unwrap();
                let s2 = lie_bracket(b, a).unwrap();
                for p in &pts {
                    let v1 = s1.evaluate(p).unwrap();
                    let v2 = s2.evaluate(p).unwrap();
                    assert!(v1.iter().zip(&v2).all(|(a, b)| (a + b).abs() < 1e-12));
                }
                for c in &fields {
                    // [a,[b,c]] + [b,[c,a]] + [c,[a,b]] = 0
                    let t1 = lie_bracket(a, &lie_bracket(b, c).unwrap()).unwrap();
                    let t2 = lie_bracket(b, &lie_bracket(c, a).unwrap()).unwrap();
                    let t3 = lie_bracket(c, &lie_bracket(a, b).unwrap()).unwrap();
                    for p in &pts {
                        let s: Vec<f64> = (0..3)
                            .map(|k| {
                                t1.evaluate(p).unwrap()[k]
                                    + t2.evaluate(p).unwrap()[k]
                                    + t3.evaluate(p).unwrap()[k]
                            })
                            .collect();
                        assert!(s.iter().all(|v| v.abs() < 1e-9), "{s:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn hoermander_ranks() {
        for p in random_points(3, 20, 3.0, 17) {
            assert_eq!(catalog::mumford().hoermander_rank(&p, 2).unwrap().rank, 3);
            let mut q = p.clone();
            q.push(0.3);
            assert_eq!(catalog::mumford().lift().hoermander_rank(&q, 2).unwrap().rank, 4);
        }
        for p in random_points(2, 20, 3.0, 19) {
            assert_eq!(catalog::ornstein_uhlenbeck().hoermander_rank(&p, 2).unwrap().rank, 2);
            assert_eq!(catalog::heat_form().hoermander_rank(&p, 1).unwrap().rank, 2);
        }
        // at x1 = 0 the drift of OU vanishes and only the bracket supplies ∂₂
        let ou = catalog::ornstein_uhlenbeck();
        assert_eq!(ou.hoermander_rank(&[0.0, 1.0], 1).unwrap().rank, 1);
        assert_eq!(ou.hoermander_rank(&[0.0, 1.0], 2).unwrap().rank, 2);
        assert!(matches!(ou.hoermander_rank(&[0.0, 0.0], 6), Err(OperatorError::InvalidDepth(6))));
        assert!(matches!(ou.hoermander_rank(&[0.0, 0.0], 0), Err(OperatorError::InvalidDepth(0))));
    }

    #[test]
    fn rank_monotone_in_depth_and_bounded() {
        let op = OperatorSpec::diagonal(
            vec![Expr::one(), Expr::zero(), Expr::zero()],
            vec![Expr::zero(), Expr::var(0), e("x1^2", 3)],
        )
        .unwrap();
        for p in random_points(3, 10, 2.0, 23) {
            let mut prev = 0;
            for depth in 1..=MAX_BRACKET_DEPTH {
                let r = op.hoermander_rank(&p, depth).unwrap().rank;
                assert!(r >= prev && r <= 3);
                prev = r;
            }
            assert_eq!(prev, 3);
        }
    }

    #[test]
    fn h2_checks() {
        let mumford_dom = catalog::mumford_domain(1.5 * PI, 1.0);
        let r = catalog::mumford().check_h2(&mumford_dom, 200).unwrap();
        assert!(r.holds);
        assert_eq!(r.infimum, 1.0);

        let dom = DomainSpec::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let degenerate =
            OperatorSpec::diagonal(vec![e("x1^2", 2), Expr::one()], vec![Expr::zero(); 2]).unwrap();
        // the first Halton point is the box center, where x1^2 vanishes
        let r = degenerate.check_h2(&dom, 100).unwrap();
        assert!(!r.holds);
        assert_eq!(r.infimum, 0.0);
        let zero = OperatorSpec::diagonal(vec![Expr::zero(), Expr::one()], vec![Expr::zero(); 2])
            .unwrap();
        assert!(!zero.check_h2(&dom, 100).unwrap().holds);

        let op = OperatorSpec::diagonal(vec![e("2 + sin(x1)", 2), Expr::one()], vec![Expr::zero(); 2])
            .unwrap();
        let r = op.check_h2(&DomainSpec::boxed(&[(-PI, PI), (-1.0, 1.0)]).unwrap(), 500).unwrap();
        assert!(r.holds && r.infimum >= 1.0);
    }

    #[test]
    fn barrier_examples() {
        let heat_dom = DomainSpec::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let bp = catalog::heat_form().barrier_params(&heat_dom, 200).unwrap();
        assert_eq!(bp.lambda, 1.0);
        assert!((bp.m - (1f64.exp() + 1.0)).abs() < 1e-12);

        let a = 1.5 * PI;
        let bp = catalog::mumford()
            .barrier_params(&catalog::mumford_domain(a, 1.0), 200)
            .unwrap();
        assert_eq!(bp.lambda, 1.0);
        assert!((bp.m - (a.exp() + 1.0)).abs() < 1e-9);

        let zero = OperatorSpec::diagonal(vec![Expr::zero(), Expr::one()], vec![Expr::zero(); 2])
            .unwrap();
        assert!(matches!(
            zero.barrier_params(&heat_dom, 100),
            Err(OperatorError::H2Violation { .. })
        ));
    }

    #[test]
    fn barrier_makes_continuum_lw_negative() {
        // drift in x1 that the barrier has to dominate
        let op = OperatorSpec::diagonal(
            vec![e("2 + sin(x2)", 2), Expr::zero()],
            vec![e("3*cos(x1*x2)", 2), Expr::var(0)],
        )
        .unwrap();
        let dom = DomainSpec::boxed(&[(-1.0, 2.0), (-1.0, 1.0)]).unwrap();
        let bp = op.barrier_params(&dom, 300).unwrap();
        let c1 = &op.drift_expand()[0];
        for p in dom.sample_points(1000) {
            let margin = bp.lambda * op.a(0, 0).evaluate(&p).unwrap() + c1.evaluate(&p).unwrap();
            assert!(margin > 0.0);
            assert!(bp.w(&p) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn lift_examples() {
        // ∂₁ + x₁²∂₂²
        let g = catalog::grushin_intro();
        let l = g.lift();
        assert_eq!(l.dim(), 3);
        assert_eq!(l.a(2, 2), &Expr::one());
        assert!(l.a(0, 2).is_zero() && l.a(2, 1).is_zero());
        assert!(l.b(2).is_zero());

        assert_eq!(catalog::laplacian(2).lift(), catalog::laplacian(3));

        let (xs, y) = catalog::mumford().lift().vector_fields();
        let pts = random_points(4, 10, 2.0, 29);
        assert!(field_eq(&xs[3], &VectorField::coordinate(4, 3), &pts));
        let (_, y0) = catalog::mumford().vector_fields();
        assert!(field_eq(&y, &y0.extend_zero(), &pts));
    }

    #[test]
    fn structure_checks() {
        let dom = DomainSpec::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        assert!(catalog::heat_form().check_structure(&dom, 50).is_ok());
        let asym = OperatorSpec::new(
            vec![vec![Expr::one(), Expr::var(0)], vec![Expr::zero(), Expr::one()]],
            vec![Expr::zero(); 2],
        )
        .unwrap();
        assert!(matches!(asym.check_structure(&dom, 50), Err(OperatorError::NotSymmetric { .. })));
        let indefinite = OperatorSpec::diagonal(vec![Expr::one(), Expr::Const(-1.0)], vec![Expr::zero(); 2])
            .unwrap();
        assert!(matches!(indefinite.check_structure(&dom, 50), Err(OperatorError::NotPsd { .. })));
        assert!(OperatorSpec::new(vec![vec![Expr::one()]], vec![Expr::var(1)]).is_err());
        assert!(!asym.is_diagonal(&dom, 20));
        assert!(catalog::mumford().is_diagonal(&catalog::mumford_domain(4.0, 1.0), 20));
    }

    #[test]
    fn active_fields_drop_zero_rows() {
        let (xs, y) = catalog::mumford().active_fields(&catalog::mumford_domain(4.0, 1.0));
        assert_eq!(xs, vec![true, false, false]);
        assert!(y);
        let (_, y) = catalog::laplacian(2).active_fields(&DomainSpec::boxed(&[(-1.0, 1.0); 2]).unwrap());
        assert!(!y);
    }
}

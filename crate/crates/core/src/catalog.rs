//! The operators and domains used as worked examples: the heat-form operator,
//! the stationary Mumford operator, the degenerate Ornstein–Uhlenbeck operator
//! and a fully degenerate operator that is only usable after lifting.

use crate::expr::Expr;
use crate::operator::{DomainSpec, OperatorSpec};

/// `∂₁² − ∂₂`: heat operator with `x₂` as time.
pub fn heat_form() -> OperatorSpec {
    OperatorSpec::diagonal(
        vec![Expr::one(), Expr::zero()],
        vec![Expr::zero(), Expr::Const(-1.0)],
    )
    .expect("static operator")
}

/// `∂₁² + sin(x₁)∂₂ + cos(x₁)∂₃`.
pub fn mumford() -> OperatorSpec {
    OperatorSpec::diagonal(
        vec![Expr::one(), Expr::zero(), Expr::zero()],
        vec![Expr::zero(), Expr::var(0).sin(), Expr::var(0).cos()],
    )
    .expect("static operator")
}

/// `∂₁² + x₁∂₂`.
pub fn ornstein_uhlenbeck() -> OperatorSpec {
    OperatorSpec::diagonal(
        vec![Expr::one(), Expr::zero()],
        vec![Expr::zero(), Expr::var(0)],
    )
    .expect("static operator")
}

/// `∂₁ + x₁²∂₂²` in the plane. Totally degenerate in `x₁`, so it fails (H2)
/// and is meant to be lifted.
pub fn grushin_intro() -> OperatorSpec {
    OperatorSpec::diagonal(
        vec![Expr::zero(), Expr::var(0).powi(2)],
        vec![Expr::one(), Expr::zero()],
    )
    .expect("static operator")
}

pub fn laplacian(n: usize) -> OperatorSpec {
    OperatorSpec::diagonal(vec![Expr::one(); n], vec![Expr::zero(); n]).expect("static operator")
}

/// `]-a,a[ × B(0,r)`.
pub fn mumford_domain(a: f64, r: f64) -> DomainSpec {
    DomainSpec::box_ball(&[(-a, a)], &[0.0, 0.0], r).expect("valid Mumford domain")
}

/// `]a₁,a₂[ × ]-b,b[`.
pub fn ou_domain(a1: f64, a2: f64, b: f64) -> DomainSpec {
    DomainSpec::boxed(&[(a1, a2), (-b, b)]).expect("valid OU domain")
}

/// `(-1,1)²`.
pub fn unit_square() -> DomainSpec {
    DomainSpec::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).expect("valid square")
}

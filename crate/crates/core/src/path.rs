//! Propagation paths `γ' = Σ λⱼ Xⱼ(γ) + μ Y(γ)`, `μ ≥ 0`, with piecewise
//! constant controls: extraction from a flood fill, the closed-form
//! constructions for the Mumford and Ornstein-Uhlenbeck operators, and a
//! validator that checks a sampled path against the defining ODE.

use std::f64::consts::PI;

use thiserror::Error;

use crate::operator::{DomainSpec, OperatorSpec};
use crate::reach::{ControlFields, ReachError, ReachSet};

/// Maximum allowed gap between consecutive segments.
pub const CHAIN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("target {0:?} is not in the computed propagation set")]
    NotReachable(Vec<f64>),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("expected a point of dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("sampling step must be positive, got {0}")]
    BadStep(f64),
    #[error("vector field is not finite along the path")]
    NonFinite,
    #[error(transparent)]
    Reach(#[from] ReachError),
}

/// Constant controls on one time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSegment {
    pub lambda: Vec<f64>,
    pub mu: f64,
    pub duration: f64,
    pub start: Vec<f64>,
}

/// One sampled point `γ(t)`, tagged with the segment that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    origin: Vec<f64>,
    target: Vec<f64>,
    segments: Vec<ControlSegment>,
    samples: Vec<Sample>,
}

impl PropagationPath {
    fn trivial(origin: &[f64], target: &[f64]) -> Self {
        PropagationPath {
            origin: origin.to_vec(),
            target: target.to_vec(),
            segments: Vec::new(),
            samples: vec![Sample {
                t: 0.0,
                x: origin.to_vec(),
                segment: 0,
            }],
        }
    }

    /// Integrates the given `(λ, μ, T)` controls from `origin` with classical
    /// RK4 steps of at most `dt_sample`. Controls are taken as given (the sign
    /// of `μ` is left to [`validate`]).
    pub fn integrate(
        op: &OperatorSpec,
        origin: &[f64],
        controls: &[(Vec<f64>, f64, f64)],
        dt_sample: f64,
    ) -> Result<Self, PathError> {
        check_step(dt_sample)?;
        let n = op.dim();
        check_dim(n, origin)?;
        let fields = ControlFields::new(op);
        let mut path = Self::trivial(origin, origin);
        let mut cur = origin.to_vec();
        let mut t = 0.0;
        for (lambda, mu, duration) in controls {
            check_dim(n, lambda)?;
            let seg = path.segments.len();
            let steps = steps_for(*duration, dt_sample);
            let dt = duration / steps as f64;
            path.segments.push(ControlSegment {
                lambda: lambda.clone(),
                mu: *mu,
                duration: *duration,
                start: cur.clone(),
            });
            let f = |p: &[f64], out: &mut [f64]| fields.velocity(lambda, *mu, p, out);
            for _ in 0..steps {
                cur = rk4_step(&f, &cur, dt).ok_or(PathError::NonFinite)?;
                t += dt;
                path.samples.push(Sample {
                    t,
                    x: cur.clone(),
                    segment: seg,
                });
            }
        }
        path.target = cur;
        Ok(path)
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// The point the path was built to reach.
    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn segments(&self) -> &[ControlSegment] {
        &self.segments
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn endpoint(&self) -> &[f64] {
        &self.samples.last().expect("paths keep their origin sample").x
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Appends a segment along which the velocity is constant, sampled exactly.
    fn push_straight(&mut self, lambda: Vec<f64>, mu: f64, duration: f64, velocity: &[f64], dt: f64) {
        if duration <= 0.0 {
            return;
        }
        let start = self.endpoint().to_vec();
        let t0 = self.samples.last().map_or(0.0, |s| s.t);
        let seg = self.segments.len();
        let steps = steps_for(duration, dt);
        for i in 1..=steps {
            let s = duration * i as f64 / steps as f64;
            self.samples.push(Sample {
                t: t0 + s,
                x: start.iter().zip(velocity).map(|(x, v)| x + s * v).collect(),
                segment: seg,
            });
        }
        self.segments.push(ControlSegment {
            lambda,
            mu,
            duration,
            start,
        });
    }
}

fn check_step(dt: f64) -> Result<(), PathError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(PathError::BadStep(dt))
    }
}

fn check_dim(n: usize, p: &[f64]) -> Result<(), PathError> {
    if p.len() == n {
        Ok(())
    } else {
        Err(PathError::Dimension {
            expected: n,
            got: p.len(),
        })
    }
}

fn steps_for(duration: f64, dt: f64) -> usize {
    ((duration / dt).ceil() as usize).max(1)
}

fn rk4_step(f: &impl Fn(&[f64], &mut [f64]) -> bool, y: &[f64], dt: f64) -> Option<Vec<f64>> {
    let n = y.len();
    let shifted = |k: &[f64], c: f64| -> Vec<f64> { (0..n).map(|i| y[i] + c * dt * k[i]).collect() };
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let ok = f(y, &mut k1)
        && f(&shifted(&k1, 0.5), &mut k2)
        && f(&shifted(&k2, 0.5), &mut k3)
        && f(&shifted(&k3, 1.0), &mut k4);
    ok.then(|| {
        (0..n)
            .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    })
}

/// Path from `x₀` to `target` following the flood's parent links; each hop
/// becomes one segment and is replayed with the flood's own integrator, so the
/// samples are the certified substep points.
pub fn extract(rs: &ReachSet, op: &OperatorSpec, target: &[f64]) -> Result<PropagationPath, PathError> {
    let n = rs.grid().dim();
    check_dim(n, target)?;
    if !rs.contains(target)? {
        return Err(PathError::NotReachable(target.to_vec()));
    }
    let cell = rs.grid().locate(target).expect("contains succeeded");
    let hops = rs
        .hops_to(cell)
        .ok_or_else(|| PathError::NotReachable(target.to_vec()))?;
    let mut path = PropagationPath::trivial(rs.x0(), target);
    if op.dim() != n {
        return Err(PathError::Dimension {
            expected: n,
            got: op.dim(),
        });
    }
    let mut t0 = 0.0;
    for (seg, (_, hop)) in hops.iter().enumerate() {
        let d = &rs.directions()[hop.direction];
        let start = path.endpoint().to_vec();
        let pts = rs.replay(hop, &start).ok_or(PathError::NonFinite)?;
        path.segments.push(ControlSegment {
            lambda: d.lambda.clone(),
            mu: d.mu,
            duration: hop.duration,
            start,
        });
        for (t, x) in pts {
            path.samples.push(Sample {
                t: t0 + t,
                x,
                segment: seg,
            });
        }
        t0 += hop.duration;
    }
    Ok(path)
}

/// Three-leg path from the origin to `z` for `∂₁² + sin x₁ ∂₂ + cos x₁ ∂₃` on
/// `]-a,a[ × B(0,r)`: slide along `X₁` to `x₁ = t*`, ride `Y` there, slide to `z₁`.
/// The angle is `t* = atan2(z₂, z₃)`, so that `Y(t*)` points at `(z₂, z₃)`.
pub fn mumford_path(a: f64, r: f64, z: &[f64], dt_sample: f64) -> Result<PropagationPath, PathError> {
    check_step(dt_sample)?;
    check_dim(3, z)?;
    if !(a > PI) {
        return Err(PathError::Domain(format!("need a > pi, got {a}")));
    }
    let dom = crate::catalog::mumford_domain(a, r);
    if !dom.contains(z) {
        return Err(PathError::Domain(format!("{z:?} is outside the domain")));
    }
    let origin = [0.0; 3];
    let mut path = PropagationPath::trivial(&origin, z);
    let t_star = z[1].atan2(z[2]);
    let rho = z[1].hypot(z[2]);
    let s1 = t_star.signum();
    path.push_straight(vec![s1, 0.0, 0.0], 0.0, t_star.abs(), &[s1, 0.0, 0.0], dt_sample);
    let x1 = path.endpoint()[0];
    path.push_straight(vec![0.0; 3], 1.0, rho, &[0.0, x1.sin(), x1.cos()], dt_sample);
    let d = z[0] - x1;
    let s3 = d.signum();
    path.push_straight(vec![s3, 0.0, 0.0], 0.0, d.abs(), &[s3, 0.0, 0.0], dt_sample);
    Ok(path)
}

/// Staircase path from the origin to `z` for `∂₁² + x₁∂₂` on `]-a,a[ × ]-b,b[`.
pub fn ou_path(a: f64, b: f64, z: &[f64], dt_sample: f64) -> Result<PropagationPath, PathError> {
    ou_path_in((-a, a), b, &[0.0, 0.0], z, dt_sample)
}

/// Staircase path from `x0` to `z` for `∂₁² + x₁∂₂` on `x1_range × ]-b,b[`.
///
/// Vertical motion happens along `Y = x₁∂₂` only, so it goes up where `x₁ > 0`
/// and down where `x₁ < 0`. The path moves `x₁` to the midpoint `c` of the part
/// of `x1_range` with the required sign, rides `Y` for `|Δx₂|/|c|`, then moves
/// `x₁` to `z₁`.
pub fn ou_path_in(
    x1_range: (f64, f64),
    b: f64,
    x0: &[f64],
    z: &[f64],
    dt_sample: f64,
) -> Result<PropagationPath, PathError> {
    check_step(dt_sample)?;
    check_dim(2, x0)?;
    check_dim(2, z)?;
    let (lo, hi) = x1_range;
    let dom = DomainSpec::boxed(&[(lo, hi), (-b, b)]).map_err(|e| PathError::Domain(e.to_string()))?;
    for p in [x0, z] {
        if !dom.contains(p) {
            return Err(PathError::Domain(format!("{p:?} is outside the domain")));
        }
    }
    let mut path = PropagationPath::trivial(x0, z);
    let dx2 = z[1] - x0[1];
    if dx2 != 0.0 {
        let (l, h) = if dx2 > 0.0 { (lo.max(0.0), hi) } else { (lo, hi.min(0.0)) };
        if !(l < h) {
            return Err(PathError::NotReachable(z.to_vec()));
        }
        let c = 0.5 * (l + h);
        let d = c - x0[0];
        path.push_straight(vec![d.signum(), 0.0], 0.0, d.abs(), &[d.signum(), 0.0], dt_sample);
        let c = path.endpoint()[0];
        path.push_straight(vec![0.0, 0.0], 1.0, dx2 / c, &[0.0, c], dt_sample);
    }
    let d = z[0] - path.endpoint()[0];
    path.push_straight(vec![d.signum(), 0.0], 0.0, d.abs(), &[d.signum(), 0.0], dt_sample);
    Ok(path)
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Largest `|Δγ/Δt − (Σλⱼ Xⱼ + μY)(midpoint)|∞` over consecutive samples.
    pub max_velocity_error: f64,
    pub contained: bool,
    pub chained: bool,
    pub mu_nonnegative: bool,
    /// `|γ(T) − target|₂`.
    pub endpoint_error: f64,
    pub tol: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.max_velocity_error <= self.tol && self.contained && self.chained && self.mu_nonnegative
    }
}

/// Checks a sampled path against its controls, `Ω` and the sign constraint.
pub fn validate(path: &PropagationPath, op: &OperatorSpec, dom: &DomainSpec, tol: f64) -> ValidationReport {
    let n = op.dim();
    let fields = ControlFields::new(op);
    let samples = &path.samples;
    let contained = samples.iter().all(|s| s.x.len() == n && dom.contains(&s.x));
    let mu_nonnegative = path.segments.iter().all(|s| s.mu >= 0.0);

    let mut chained = samples.first().is_some_and(|s| close(&s.x, &path.origin));
    for (j, seg) in path.segments.iter().enumerate() {
        let prev = if j == 0 {
            &path.origin
        } else {
            samples.iter().rev().find(|s| s.segment < j).map_or(&path.origin, |s| &s.x)
        };
        chained &= seg.start.len() == n && close(&seg.start, prev);
    }

    let mut max_err = 0.0f64;
    let mut v = vec![0.0; n];
    let mut mid = vec![0.0; n];
    for w in samples.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let Some(seg) = path.segments.get(q.segment) else {
            max_err = f64::INFINITY;
            continue;
        };
        let dt = q.t - p.t;
        if !(dt > 0.0) || p.x.len() != n || q.x.len() != n {
            max_err = f64::INFINITY;
            continue;
        }
        for i in 0..n {
            mid[i] = 0.5 * (p.x[i] + q.x[i]);
        }
        if !fields.velocity(&seg.lambda, seg.mu, &mid, &mut v) {
            max_err = f64::INFINITY;
            continue;
        }
        for i in 0..n {
            max_err = max_err.max(((q.x[i] - p.x[i]) / dt - v[i]).abs());
        }
    }
    if max_err.is_nan() {
        max_err = f64::INFINITY;
    }
    let endpoint_error = path
        .endpoint()
        .iter()
        .zip(&path.target)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    ValidationReport {
        max_velocity_error: max_err,
        contained,
        chained,
        mu_nonnegative,
        endpoint_error,
        tol,
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= CHAIN_TOL)
}

//! Bounded open domains built from interval and ball factors.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("interval {index} is empty: ({lo}, {hi})")]
    EmptyInterval { index: usize, lo: f64, hi: f64 },
    #[error("ball radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("non-finite domain bound")]
    NotFinite,
    #[error("domain has no factors")]
    Empty,
}

/// One factor of a product domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    /// Open interval `(lo, hi)` on one axis.
    Interval { lo: f64, hi: f64 },
    /// Open euclidean ball on `center.len()` consecutive axes.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Block {
    pub fn dim(&self) -> usize {
        match self {
            Block::Interval { .. } => 1,
            Block::Ball { center, .. } => center.len(),
        }
    }
}

/// An open bounded product domain `Ω`, e.g. `]-a,a[ × B(0,r)`.
///
/// A plain box is a product of intervals; a box-ball product lists the
/// leading intervals followed by one ball block. Lifting appends an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    blocks: Vec<Block>,
}

impl DomainSpec {
    pub fn new(blocks: Vec<Block>) -> Result<Self, DomainError> {
        if blocks.is_empty() {
            return Err(DomainError::Empty);
        }
        let mut axis = 0;
        for b in &blocks {
            match b {
                Block::Interval { lo, hi } => {
                    if !lo.is_finite() || !hi.is_finite() {
                        return Err(DomainError::NotFinite);
                    }
                    if !(lo < hi) {
                        return Err(DomainError::EmptyInterval {
                            index: axis,
                            lo: *lo,
                            hi: *hi,
                        });
                    }
                }
                Block::Ball { center, radius } => {
                    if center.is_empty() {
                        return Err(DomainError::Empty);
                    }
                    if !radius.is_finite() || center.iter().any(|c| !c.is_finite()) {
                        return Err(DomainError::NotFinite);
                    }
                    if *radius <= 0.0 {
                        return Err(DomainError::BadRadius(*radius));
                    }
                }
            }
            axis += b.dim();
        }
        Ok(DomainSpec { blocks })
    }

    /// Product of open intervals.
    pub fn boxed(intervals: &[(f64, f64)]) -> Result<Self, DomainError> {
        Self::new(
            intervals
                .iter()
                .map(|&(lo, hi)| Block::Interval { lo, hi })
                .collect(),
        )
    }

    /// Leading intervals times a ball in the trailing axes.
    pub fn box_ball(
        intervals: &[(f64, f64)],
        center: &[f64],
        radius: f64,
    ) -> Result<Self, DomainError> {
        let mut blocks: Vec<Block> = intervals
            .iter()
            .map(|&(lo, hi)| Block::Interval { lo, hi })
            .collect();
        blocks.push(Block::Ball {
            center: center.to_vec(),
            radius,
        });
        Self::new(blocks)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Block::dim).sum()
    }

    /// `Ω × (lo, hi)`.
    pub fn lift(&self, lo: f64, hi: f64) -> Result<Self, DomainError> {
        let mut blocks = self.blocks.clone();
        blocks.push(Block::Interval { lo, hi });
        Self::new(blocks)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.contains_with_margin(p, 0.0)
    }

    /// Membership with the boundary pushed inwards by `margin`.
    pub fn contains_with_margin(&self, p: &[f64], margin: f64) -> bool {
        if p.len() < self.dim() {
            return false;
        }
        let mut axis = 0;
        for b in &self.blocks {
            match b {
                Block::Interval { lo, hi } => {
                    let x = p[axis];
                    if !(x > lo + margin && x < hi - margin) {
                        return false;
                    }
                }
                Block::Ball { center, radius } => {
                    let r2: f64 = center
                        .iter()
                        .enumerate()
                        .map(|(k, c)| (p[axis + k] - c).powi(2))
                        .sum();
                    let r = radius - margin;
                    if !(r > 0.0 && r2 < r * r) {
                        return false;
                    }
                }
            }
            axis += b.dim();
        }
        true
    }

    /// Axis-aligned bounding box as `(lo, hi)` per axis.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.dim());
        for b in &self.blocks {
            match b {
                Block::Interval { lo, hi } => out.push((*lo, *hi)),
                Block::Ball { center, radius } => {
                    out.extend(center.iter().map(|c| (c - radius, c + radius)))
                }
            }
        }
        out
    }

    /// Up to `count` quasi-random points of `Ω` (Halton sequence over the
    /// bounding box, points outside rejected). Deterministic.
    pub fn sample_points(&self, count: usize) -> Vec<Vec<f64>> {
        let bbox = self.bounding_box();
        let mut out = Vec::with_capacity(count);
        let mut index = 1u64;
        let max_tries = 200 * count as u64 + 1000;
        while out.len() < count && index < max_tries {
            let p: Vec<f64> = bbox
                .iter()
                .enumerate()
                .map(|(axis, (lo, hi))| lo + (hi - lo) * halton(index, PRIMES[axis % PRIMES.len()]))
                .collect();
            index += 1;
            if self.contains(&p) {
                out.push(p);
            }
        }
        out
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `index` in `base`.
pub(crate) fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_ball_membership() {
        let d = DomainSpec::box_ball(&[(-1.0, 1.0)], &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(d.dim(), 3);
        assert!(d.contains(&[0.5, 0.5, 0.5]));
        assert!(!d.contains(&[0.5, 0.8, 0.8]));
        assert!(!d.contains(&[1.0, 0.0, 0.0]));
        assert_eq!(
            d.bounding_box(),
            vec![(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)]
        );
    }

    #[test]
    fn invalid_domains() {
        assert!(matches!(
            DomainSpec::boxed(&[(0.0, 1.0), (2.0, 2.0)]),
            Err(DomainError::EmptyInterval { index: 1, .. })
        ));
        assert!(DomainSpec::box_ball(&[(0.0, 1.0)], &[0.0], 0.0).is_err());
        assert!(DomainSpec::boxed(&[]).is_err());
        assert!(DomainSpec::boxed(&[(0.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn samples_are_inside_and_deterministic() {
        let d = DomainSpec::box_ball(&[(-2.0, 2.0)], &[0.0, 0.0], 0.5).unwrap();
        let a = d.sample_points(200);
        assert_eq!(a.len(), 200);
        assert!(a.iter().all(|p| d.contains(p)));
        assert_eq!(a, d.sample_points(200));
    }

    #[test]
    fn lift_appends_interval() {
        let d = DomainSpec::boxed(&[(-4.0, 4.0), (-3.0, 3.0)]).unwrap();
        let l = d.lift(-1.0, 1.0).unwrap();
        assert_eq!(l.dim(), 3);
        assert!(l.contains(&[0.0, 0.0, 0.9]));
        assert!(!l.contains(&[0.0, 0.0, 1.1]));
    }

    #[test]
    fn halton_base2() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
    }
}

use crate::operator::DomainSpec;

use super::ReachError;

/// Uniform cell lattice covering the bounding box of a domain.
///
/// Cells are indexed row-major (last axis fastest). A cell is *inside* when
/// its center lies in `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    h: f64,
    /// Center of the cell with multi-index `(0, …, 0)`.
    origin: Vec<f64>,
    counts: Vec<usize>,
    strides: Vec<usize>,
    inside: Vec<bool>,
    inside_count: usize,
    domain: DomainSpec,
}

impl Grid {
    /// Lattice centered on the bounding box of `dom`.
    pub fn new(dom: &DomainSpec, h: f64) -> Result<Self, ReachError> {
        check_spacing(h)?;
        let bbox = dom.bounding_box();
        let mut origin = Vec::with_capacity(bbox.len());
        let mut counts = Vec::with_capacity(bbox.len());
        for &(lo, hi) in &bbox {
            let cells = ((hi - lo) / h - 1e-9).ceil().max(1.0) as usize;
            let mid = 0.5 * (lo + hi);
            origin.push(mid - 0.5 * (cells as f64 - 1.0) * h);
            counts.push(cells);
        }
        Self::assemble(dom, h, origin, counts)
    }

    /// Lattice whose cell centers include `anchor`, covering the bounding box of `dom`.
    pub fn anchored(dom: &DomainSpec, h: f64, anchor: &[f64]) -> Result<Self, ReachError> {
        check_spacing(h)?;
        if anchor.len() != dom.dim() {
            return Err(ReachError::Dimension {
                expected: dom.dim(),
                got: anchor.len(),
            });
        }
        let bbox = dom.bounding_box();
        let mut origin = Vec::with_capacity(bbox.len());
        let mut counts = Vec::with_capacity(bbox.len());
        for (&(lo, hi), &a) in bbox.iter().zip(anchor) {
            // cells whose closure meets (lo, hi)
            let kmin = ((lo - a) / h - 0.5).floor() as i64 + 1;
            let kmax = ((hi - a) / h + 0.5).ceil() as i64 - 1;
            origin.push(a + kmin as f64 * h);
            counts.push((kmax - kmin + 1).max(0) as usize);
        }
        Self::assemble(dom, h, origin, counts)
    }

    fn assemble(
        dom: &DomainSpec,
        h: f64,
        origin: Vec<f64>,
        counts: Vec<usize>,
    ) -> Result<Self, ReachError> {
        if let Some((axis, &cells)) = counts.iter().enumerate().find(|(_, &c)| c < 3) {
            return Err(ReachError::Resolution { axis, cells });
        }
        let dim = counts.len();
        let mut strides = vec![1usize; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        let total: usize = counts.iter().product();
        let mut grid = Grid {
            h,
            origin,
            counts,
            strides,
            inside: Vec::new(),
            inside_count: 0,
            domain: dom.clone(),
        };
        let margin = 1e-9 * h;
        let mut c = vec![0.0; dim];
        grid.inside = (0..total)
            .map(|idx| {
                grid.center_into(idx, &mut c);
                dom.contains_with_margin(&c, margin)
            })
            .collect();
        grid.inside_count = grid.inside.iter().filter(|&&b| b).count();
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    /// Total number of lattice cells.
    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    pub fn inside_count(&self) -> usize {
        self.inside_count
    }

    pub fn is_inside(&self, cell: usize) -> bool {
        self.inside[cell]
    }

    pub fn inside_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&c| self.inside[c])
    }

    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        let mut rest = cell;
        self.strides
            .iter()
            .map(|s| {
                let i = rest / s;
                rest %= s;
                i
            })
            .collect()
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        self.center_into(cell, &mut c);
        c
    }

    pub fn center_into(&self, cell: usize, out: &mut [f64]) {
        let mut rest = cell;
        for k in 0..self.dim() {
            let i = rest / self.strides[k];
            rest %= self.strides[k];
            out[k] = self.origin[k] + i as f64 * self.h;
        }
    }

    /// Cell containing `p` (nearest center), `None` outside the lattice.
    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        if p.len() != self.dim() {
            return None;
        }
        let mut idx = 0;
        for k in 0..self.dim() {
            let t = ((p[k] - self.origin[k]) / self.h + 0.5).floor();
            if !(t >= 0.0 && t < self.counts[k] as f64) {
                return None;
            }
            idx += t as usize * self.strides[k];
        }
        Some(idx)
    }

    /// Face neighbour of `cell` one step along `axis` in direction `sign`.
    pub fn neighbor(&self, cell: usize, axis: usize, forward: bool) -> Option<usize> {
        let i = (cell / self.strides[axis]) % self.counts[axis];
        if forward {
            (i + 1 < self.counts[axis]).then(|| cell + self.strides[axis])
        } else {
            (i > 0).then(|| cell - self.strides[axis])
        }
    }

    /// Cells within Chebyshev distance 1 of `cell`, including itself.
    pub fn chebyshev_neighbors(&self, cell: usize) -> Vec<usize> {
        let base = self.multi_index(cell);
        let mut out = vec![cell];
        let mut offsets = vec![-1i64; self.dim()];
        loop {
            if offsets.iter().any(|&o| o != 0) {
                let ok = base
                    .iter()
                    .zip(&offsets)
                    .zip(&self.counts)
                    .all(|((&b, &o), &n)| (b as i64 + o) >= 0 && ((b as i64 + o) as usize) < n);
                if ok {
                    let m: Vec<usize> = base
                        .iter()
                        .zip(&offsets)
                        .map(|(&b, &o)| (b as i64 + o) as usize)
                        .collect();
                    out.push(self.linear_index(&m));
                }
            }
            // odometer over {-1, 0, 1}^dim
            let mut k = 0;
            loop {
                if k == offsets.len() {
                    return out;
                }
                offsets[k] += 1;
                if offsets[k] <= 1 {
                    break;
                }
                offsets[k] = -1;
                k += 1;
            }
        }
    }
}

fn check_spacing(h: f64) -> Result<(), ReachError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(ReachError::BadSpacing(h));
    }
    Ok(())
}

/// A set of lattice cells stored as a mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    mask: Vec<bool>,
    count: usize,
}

impl CellSet {
    pub fn empty(len: usize) -> Self {
        CellSet {
            mask: vec![false; len],
            count: 0,
        }
    }

    pub fn from_cells(len: usize, cells: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(len);
        for c in cells {
            s.insert(c);
        }
        s
    }

    pub fn insert(&mut self, cell: usize) -> bool {
        let fresh = !self.mask[cell];
        if fresh {
            self.mask[cell] = true;
            self.count += 1;
        }
        fresh
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.mask.get(cell).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Size of the lattice the set lives on.
    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> CellSet {
        CellSet::from_cells(self.universe(), self.iter().filter(|&c| keep(c)))
    }

    /// Chebyshev dilation by one cell.
    pub fn dilate(&self, grid: &Grid) -> CellSet {
        let mut out = CellSet::empty(self.universe());
        for c in self.iter() {
            for nb in grid.chebyshev_neighbors(c) {
                out.insert(nb);
            }
        }
        out
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.iter().all(|c| other.contains(c))
    }

    /// `self ⊆ other` after dilating `other` by one cell.
    pub fn is_subset_within_band(&self, other: &CellSet, grid: &Grid) -> bool {
        self.is_subset(&other.dilate(grid))
    }

    /// Cells of `self` not within one cell of `other`.
    pub fn outside_band_of(&self, other: &CellSet, grid: &Grid) -> Vec<usize> {
        let band = other.dilate(grid);
        self.iter().filter(|&c| !band.contains(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use std::f64::consts::PI;

    #[test]
    fn square_half_spacing() {
        let g = Grid::new(&catalog::unit_square(), 0.5).unwrap();
        assert_eq!(g.counts(), &[4, 4]);
        assert_eq!(g.inside_count(), 16);
        assert_eq!(g.center(0), vec![-0.75, -0.75]);
    }

    #[test]
    fn box_ball_mask_matches_predicate() {
        let dom = catalog::mumford_domain(PI, 1.0);
        let g = Grid::new(&dom, 0.25).unwrap();
        for cell in 0..g.len() {
            let c = g.center(cell);
            let expected = c[1] * c[1] + c[2] * c[2] < 1.0 && c[0].abs() < PI;
            assert_eq!(g.is_inside(cell), expected, "{c:?}");
        }
    }

    #[test]
    fn coarse_spacing_rejected() {
        assert!(matches!(
            Grid::new(&catalog::unit_square(), 10.0),
            Err(ReachError::Resolution { .. })
        ));
        assert!(matches!(
            Grid::new(&catalog::unit_square(), -1.0),
            Err(ReachError::BadSpacing(_))
        ));
    }

    #[test]
    fn anchored_lattice_contains_anchor() {
        let g = Grid::anchored(&catalog::unit_square(), 0.1, &[0.0, 0.0]).unwrap();
        let cell = g.locate(&[0.0, 0.0]).unwrap();
        let c = g.center(cell);
        assert!(c.iter().all(|v| v.abs() < 1e-12));
        // centers at ±1 are on ∂Ω and therefore outside
        assert_eq!(g.counts(), &[21, 21]);
        assert_eq!(g.inside_count(), 19 * 19);
    }

    #[test]
    fn locate_and_neighbors() {
        let g = Grid::new(&catalog::unit_square(), 0.5).unwrap();
        let c = g.locate(&[0.1, -0.6]).unwrap();
        assert_eq!(g.multi_index(c), vec![2, 0]);
        assert_eq!(g.neighbor(c, 1, false), None);
        assert_eq!(g.neighbor(c, 1, true).map(|n| g.multi_index(n)), Some(vec![2, 1]));
        assert_eq!(g.locate(&[1.5, 0.0]), None);
        assert_eq!(g.chebyshev_neighbors(c).len(), 6);
        assert_eq!(g.chebyshev_neighbors(g.linear_index(&[1, 1])).len(), 9);
    }

    #[test]
    fn band_subset() {
        let g = Grid::new(&catalog::unit_square(), 0.5).unwrap();
        let a = CellSet::from_cells(g.len(), [g.linear_index(&[0, 0])]);
        let b = CellSet::from_cells(g.len(), [g.linear_index(&[1, 1])]);
        let c = CellSet::from_cells(g.len(), [g.linear_index(&[3, 3])]);
        assert!(!a.is_subset(&b));
        assert!(a.is_subset_within_band(&b, &g));
        assert!(!a.is_subset_within_band(&c, &g));
    }
}

//! Banded LU without pivoting. Safe for the nonsingular M-matrices produced by
//! the upwind scheme, whose LU factors exist and stay nonnegative-dominant.

#[derive(Debug, Clone)]
pub(crate) struct BandedLu {
    n: usize,
    bw: usize,
    /// Row `i` stores columns `i-bw ..= i+bw` at offsets `0 ..= 2bw`.
    band: Vec<f64>,
}

impl BandedLu {
    /// Dense band storage needed for `n` unknowns and half-bandwidth `bw`.
    pub(crate) fn storage(n: usize, bw: usize) -> usize {
        n.saturating_mul(2 * bw + 1)
    }

    /// Factors the matrix given as `(row, col, value)` triplets (duplicates summed).
    pub(crate) fn factor(
        n: usize,
        bw: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Option<Self> {
        let w = 2 * bw + 1;
        let mut band = vec![0.0; n * w];
        for (i, j, v) in entries {
            debug_assert!(i.abs_diff(j) <= bw);
            band[i * w + j + bw - i] += v;
        }
        for k in 0..n {
            let pivot = band[k * w + bw];
            if !(pivot.abs() > 0.0) || !pivot.is_finite() {
                return None;
            }
            let jmax = (k + bw).min(n - 1);
            for i in k + 1..=jmax {
                let ik = i * w + k + bw - i;
                let l = band[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                band[ik] = l;
                for j in k + 1..=jmax {
                    band[i * w + j + bw - i] -= l * band[k * w + j + bw - k];
                }
            }
        }
        Some(BandedLu { n, bw, band })
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.band[i * (2 * self.bw + 1) + j + self.bw - i]
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(bw)..i {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + bw).min(n - 1) {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
    }

    /// Solves `Aᵀ x = b` in place.
    pub(crate) fn solve_transpose(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        // Uᵀ y = b
        for i in 0..n {
            x[i] /= self.at(i, i);
            let xi = x[i];
            if xi != 0.0 {
                for j in i + 1..=(i + bw).min(n - 1) {
                    x[j] -= self.at(i, j) * xi;
                }
            }
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let xi = x[i];
            if xi != 0.0 {
                for j in i.saturating_sub(bw)..i {
                    x[j] -= self.at(i, j) * xi;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> Vec<(usize, usize, f64)> {
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, 3.0));
            if i > 0 {
                e.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                e.push((i, i + 1, -0.5));
            }
        }
        e
    }

    fn matvec(e: &[(usize, usize, f64)], x: &[f64], transpose: bool) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for &(i, j, v) in e {
            if transpose {
                y[j] += v * x[i];
            } else {
                y[i] += v * x[j];
            }
        }
        y
    }

    #[test]
    fn solves_and_transposed_solves() {
        let n = 7;
        let e = tridiag(n);
        let lu = BandedLu::factor(n, 1, e.clone()).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        for transpose in [false, true] {
            let mut x = b.clone();
            if transpose {
                lu.solve_transpose(&mut x);
            } else {
                lu.solve(&mut x);
            }
            let r = matvec(&e, &x, transpose);
            for (ri, bi) in r.iter().zip(&b) {
                assert!((ri - bi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wider_band() {
        // 2-D five-point Laplacian on a 4×4 block, bandwidth 4
        let m = 4;
        let n = m * m;
        let mut e = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let r = i * m + j;
                e.push((r, r, 4.0));
                if i > 0 {
                    e.push((r, r - m, -1.0));
                }
                if i + 1 < m {
                    e.push((r, r + m, -1.0));
                }
                if j > 0 {
                    e.push((r, r - 1, -1.0));
                }
                if j + 1 < m {
                    e.push((r, r + 1, -1.0));
                }
            }
        }
        let lu = BandedLu::factor(n, m, e.clone()).unwrap();
        let b = vec![1.0; n];
        let mut x = b.clone();
        lu.solve(&mut x);
        let r = matvec(&e, &x, false);
        assert!(r.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(x.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn zero_pivot_is_rejected() {
        assert!(BandedLu::factor(2, 1, vec![(0, 1, 1.0), (1, 0, 1.0)]).is_none());
    }
}

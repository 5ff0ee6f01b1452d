//! Symmetric matrices in envelope (skyline) storage with in-place Cholesky.
//!
//! Row `i` stores columns `first[i]..=i` of the lower triangle. Cholesky fill
//! stays inside the envelope, so banded transcriptions factor in O(n b^2).

#[derive(Debug, Clone)]
pub(crate) struct EnvelopeMatrix {
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeMatrix {
    /// `first[i] <= i` is the leftmost stored column of row `i`.
    pub fn new(first: Vec<usize>) -> Self {
        let mut offset = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            debug_assert!(f <= i);
            offset.push(total);
            total += i - f + 1;
        }
        offset.push(total);
        EnvelopeMatrix {
            first,
            offset,
            values: vec![0.0; total],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if c < self.first[r] {
            None
        } else {
            Some(self.offset[r] + c - self.first[r])
        }
    }

    /// Adds `v` to entry `(i, j)`; entries outside the envelope are ignored.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if let Some(k) = self.idx(i, j) {
            self.values[k] += v;
        }
    }

    /// Replaces the rows and columns flagged in `mask` by those of the identity.
    pub fn pin(&mut self, mask: &[bool]) {
        if !mask.iter().any(|&b| b) {
            return;
        }
        for r in 0..self.dim() {
            let f = self.first[r];
            let row = self.offset[r];
            for c in f..=r {
                if mask[r] || mask[c] {
                    self.values[row + c - f] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.values[self.offset[i] + i - self.first[i]]
    }

    pub fn max_abs_diag(&self) -> f64 {
        (0..self.dim()).map(|i| self.diag(i).abs()).fold(0.0, f64::max)
    }

    /// Factors `self + shift * I` into `factor` (same envelope). Returns
    /// false when the shifted matrix is not numerically positive definite.
    pub fn cholesky_into(&self, shift: f64, factor: &mut EnvelopeMatrix) -> bool {
        let n = self.dim();
        factor.values.copy_from_slice(&self.values);
        for i in 0..n {
            let fi = self.first[i];
            let row_i = self.offset[i];
            for j in fi..i {
                let fj = self.first[j];
                let row_j = self.offset[j];
                let start = fi.max(fj);
                let mut s = factor.values[row_i + j - fi];
                for k in start..j {
                    s -= factor.values[row_i + k - fi] * factor.values[row_j + k - fj];
                }
                let djj = factor.values[row_j + j - fj];
                factor.values[row_i + j - fi] = s / djj;
            }
            let mut d = factor.values[row_i + i - fi] + shift;
            for k in fi..i {
                let l = factor.values[row_i + k - fi];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return false;
            }
            factor.values[row_i + i - fi] = d.sqrt();
        }
        true
    }

    /// Solves `L L^T x = b` in place, `self` holding the factor `L`.
    pub fn cholesky_solve(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = self.offset[i];
            let mut s = b[i];
            for k in fi..i {
                s -= self.values[row + k - fi] * b[k];
            }
            b[i] = s / self.values[row + i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.offset[i];
            b[i] /= self.values[row + i - fi];
            let xi = b[i];
            for k in fi..i {
                b[k] -= self.values[row + k - fi] * xi;
            }
        }
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.values[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal() {
        let n = 6;
        let first: Vec<usize> = (0..n).map(|i: usize| i.saturating_sub(1)).collect();
        let mut a = EnvelopeMatrix::new(first);
        for i in 0..n {
            a.add(i, i, 4.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        let mut l = a.clone();
        assert!(a.cholesky_into(0.0, &mut l));
        let x_true: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 4.0 * x_true[i];
                if i > 0 {
                    s -= x_true[i - 1];
                }
                if i + 1 < n {
                    s -= x_true[i + 1];
                }
                s
            })
            .collect();
        l.cholesky_solve(&mut b);
        for (x, t) in b.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-12);
        }
    }

    #[test]
    fn arrow_pattern_against_dense() {
        // Last row couples to the first: envelope spans the full row.
        let n = 5;
        let mut first: Vec<usize> = (0..n).map(|i: usize| i.saturating_sub(1)).collect();
        first[n - 1] = 0;
        let mut a = EnvelopeMatrix::new(first);
        let mut dense = vec![vec![0.0; n]; n];
        let mut set = |a: &mut EnvelopeMatrix, i: usize, j: usize, v: f64| {
            a.add(i, j, v);
            dense[i][j] += v;
            if i != j {
                dense[j][i] += v;
            }
        };
        for i in 0..n {
            set(&mut a, i, i, 5.0 + i as f64);
            if i > 0 {
                set(&mut a, i, i - 1, 1.0);
            }
        }
        set(&mut a, n - 1, 0, 2.0);
        let mut l = a.clone();
        assert!(a.cholesky_into(0.0, &mut l));
        let x_true = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| dense[i][j] * x_true[j]).sum())
            .collect();
        l.cholesky_solve(&mut b);
        for (x, t) in b.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_indefinite_and_shift_fixes_it() {
        let mut a = EnvelopeMatrix::new(vec![0, 0]);
        a.add(0, 0, 1.0);
        a.add(1, 0, 2.0);
        a.add(1, 1, 1.0);
        let mut l = a.clone();
        assert!(!a.cholesky_into(0.0, &mut l));
        assert!(a.cholesky_into(3.0, &mut l));
        assert_eq!(a.get(0, 1), 2.0);
    }

    #[test]
    fn out_of_envelope_entries_ignored() {
        let mut a = EnvelopeMatrix::new(vec![0, 1, 2]);
        a.add(2, 0, 7.0);
        assert_eq!(a.get(2, 0), 0.0);
        assert_eq!(a.max_abs_diag(), 0.0);
    }
}

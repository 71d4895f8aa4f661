//! Compressed sparse row storage with a fixed pattern.

use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_PATTERN: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
    /// Shared by matrices cloned from the same pattern; lets factorizations be reused.
    pub pattern_id: u64,
}

impl CsrMatrix {
    /// Builds a zero matrix from per-row column lists (sorted and deduplicated here).
    pub fn from_rows(n: usize, mut rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { n, row_ptr, col_idx, vals: vec![0.0; nnz], pattern_id: NEXT_PATTERN.fetch_add(1, Ordering::Relaxed) }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_rows(n, (0..n).map(|i| vec![i]).collect());
        m.vals.fill(1.0);
        m
    }

    pub fn from_dense(a: &nalgebra::DMatrix<f64>) -> Self {
        let n = a.nrows();
        let rows = (0..n).map(|i| (0..n).filter(|&j| a[(i, j)] != 0.0 || i == j).collect()).collect();
        let mut m = Self::from_rows(n, rows);
        for i in 0..n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.vals[k] = a[(i, m.col_idx[k])];
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.find(i, j).map_or(0.0, |k| self.vals[k])
    }

    /// Adds to an existing entry; panics if (i, j) is outside the pattern.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.find(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.vals[k] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// For a structurally symmetric pattern: index of entry (j, i) for each stored (i, j).
    pub fn transpose_map(&self) -> Vec<usize> {
        let mut map = vec![0; self.nnz()];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                map[k] = self.find(self.col_idx[k], i).expect("structurally symmetric pattern");
            }
        }
        map
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).all(|k| self.find(self.col_idx[k], i).is_some()))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A - Aᵀ| over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m = m.max((self.vals[k] - self.get(self.col_idx[k], i)).abs());
            }
        }
        m
    }

    /// Whether every stored entry of `self` is also stored in `other`.
    pub fn pattern_within(&self, other: &CsrMatrix) -> bool {
        self.n == other.n
            && (0..self.n).all(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).all(|k| other.find(i, self.col_idx[k]).is_some()))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut a = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                a[(i, self.col_idx[k])] += self.vals[k];
            }
        }
        a
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_ops() {
        let mut m = CsrMatrix::from_rows(3, vec![vec![2, 0, 0], vec![1], vec![0, 2]]);
        assert_eq!(m.nnz(), 5);
        m.add(0, 2, 1.5);
        m.add(2, 0, 1.0);
        m.add(0, 0, 2.0);
        m.add(1, 1, 1.0);
        m.add(2, 2, 1.0);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(1, 0), 0.0);
        assert!(m.is_structurally_symmetric());
        assert_eq!(m.max_asymmetry(), 0.5);
        assert_eq!(m.mul(&[1.0, 1.0, 1.0]), vec![3.5, 1.0, 2.0]);
        let t = m.transpose_map();
        assert_eq!(m.col_idx[t[1]], 0);
        let d = CsrMatrix::from_dense(&m.to_dense());
        assert_eq!(d.to_dense(), m.to_dense());
        assert!(CsrMatrix::identity(3).pattern_within(&m));
    }

    #[test]
    #[should_panic]
    fn add_outside_pattern_panics() {
        let mut m = CsrMatrix::identity(2);
        m.add(0, 1, 1.0);
    }
}

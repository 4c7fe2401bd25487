//! Compressed-row storage for real symmetric operators.

use rayon::prelude::*;

/// Row-compressed real matrix. Rows are sorted by column index and contain
/// no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        CsrMatrix {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds the symmetric matrix holding `v` at `(i, j)` and `(j, i)` for
    /// every `(i, j, v)` with `i != j`. Repeated pairs are summed; diagonal
    /// pairs are ignored.
    pub fn from_symmetric_pairs(n: usize, pairs: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n];
        for &(i, j, _) in pairs {
            if i != j {
                counts[i] += 1;
                counts[j] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let mut fill = row_ptr[..n].to_vec();
        let mut entries = vec![(0usize, 0.0f64); row_ptr[n]];
        for &(i, j, v) in pairs {
            if i == j {
                continue;
            }
            entries[fill[i]] = (j, v);
            fill[i] += 1;
            entries[fill[j]] = (i, v);
            fill[j] += 1;
        }
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        let mut new_ptr = vec![0usize; n + 1];
        for i in 0..n {
            let row = &mut entries[row_ptr[i]..row_ptr[i + 1]];
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            new_ptr[i + 1] = cols.len();
        }
        CsrMatrix {
            n,
            row_ptr: new_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0.0)
    }

    /// `Σ_j |A_ij|` per row.
    pub fn abs_row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum())
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).all(|(&j, &x)| self.get(j, i) == x)
        })
    }

    /// Dense copy, for tests and small oracles.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                row[j] = x;
            }
        }
        d
    }

    /// `y = diag ∘ x − A x`, row-parallel for large operators.
    pub fn apply_shifted<T>(&self, diag: &[f64], x: &[T], y: &mut [T])
    where
        T: Copy + Send + Sync + std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T>,
    {
        let row = |i: usize| {
            let (c, v) = self.row(i);
            let mut acc = x[i] * diag[i];
            for (&j, &a) in c.iter().zip(v) {
                acc = acc - x[j] * a;
            }
            acc
        };
        if self.n >= PARALLEL_MIN_DIM {
            y.par_chunks_mut(1024).enumerate().for_each(|(b, chunk)| {
                for (k, out) in chunk.iter_mut().enumerate() {
                    *out = row(b * 1024 + k);
                }
            });
        } else {
            for (i, out) in y.iter_mut().enumerate() {
                *out = row(i);
            }
        }
    }
}

/// Below this dimension the thread hand-off costs more than it saves.
const PARALLEL_MIN_DIM: usize = 8192;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_sorted_symmetric_rows() {
        let m = CsrMatrix::from_symmetric_pairs(
            4,
            &[(2, 0, 1.5), (0, 1, 2.0), (1, 3, -1.0), (0, 2, 0.5)],
        );
        assert!(m.is_symmetric());
        assert_eq!(m.row(0).0, &[1, 2]);
        assert_eq!(m.get(0, 2), 2.0);
        assert_eq!(m.get(3, 1), -1.0);
        assert_eq!(m.get(3, 3), 0.0);
        assert_eq!(m.nnz(), 6);
    }

    #[test]
    fn apply_matches_dense() {
        let pairs: Vec<_> = (0..9)
            .map(|i| (i, (i * 5 + 3) % 10, 0.1 * i as f64 + 0.3))
            .collect();
        let m = CsrMatrix::from_symmetric_pairs(10, &pairs);
        let diag: Vec<f64> = (0..10).map(|i| i as f64 * 0.7 - 2.0).collect();
        let x: Vec<f64> = (0..10).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let mut y = vec![0.0; 10];
        m.apply_shifted(&diag, &x, &mut y);
        let d = m.to_dense();
        for i in 0..10 {
            let expect = diag[i] * x[i] - (0..10).map(|j| d[i][j] * x[j]).sum::<f64>();
            assert!((y[i] - expect).abs() < 1e-12);
        }
    }
}

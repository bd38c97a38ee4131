//! Compressed sparse row matrix, used for the global constraint matrix
//! whose rows touch at most a handful of variables.

use crate::scalar::Scalar;

/// CSR matrix built from (row, col, value) triplets.
#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from triplets; duplicate (row, col) entries are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut per_row: Vec<Vec<(usize, T)>> = vec![Vec::new(); rows];
        for &(r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r},{c}) out of bounds");
            per_row[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for entries in &mut per_row {
            entries.sort_by_key(|&(c, _)| c);
            let mut write: Option<usize> = None;
            for &(c, v) in entries.iter() {
                match write {
                    Some(last) if col_idx[last] == c => values[last] += v,
                    _ => {
                        col_idx.push(c);
                        values.push(v);
                        write = Some(col_idx.len() - 1);
                    }
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { rows, cols, row_ptr, col_idx, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero (column, value) pairs of row `i`, in ascending column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).map(|(c, a)| a * v[c]).sum()).collect()
    }
}

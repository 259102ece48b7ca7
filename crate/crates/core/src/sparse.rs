//! Compressed sparse row storage for binary interaction matrices.

use serde::{Deserialize, Serialize};

/// A binary matrix in CSR layout. Column indices within a row are sorted and
/// unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row column lists. Rows are sorted and
    /// deduplicated; columns outside `0..n_cols` panic.
    pub fn from_rows<I, R>(n_cols: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = u32>,
    {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        for row in rows {
            let start = indices.len();
            indices.extend(row);
            let seg = &mut indices[start..];
            seg.sort_unstable();
            let mut w = start;
            for r in start..indices.len() {
                let c = indices[r];
                assert!((c as usize) < n_cols, "column {c} out of range");
                if w == start || indices[w - 1] != c {
                    indices[w] = c;
                    w += 1;
                }
            }
            indices.truncate(w);
            indptr.push(indices.len());
        }
        CsrMatrix {
            n_rows: indptr.len() - 1,
            n_cols,
            indptr,
            indices,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.n_rows).map(move |r| self.row(r))
    }

    pub fn contains(&self, r: usize, c: u32) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    /// Number of non-zero entries in every column.
    pub fn column_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_cols];
        for &c in &self.indices {
            counts[c as usize] += 1;
        }
        counts
    }

    pub fn transpose(&self) -> CsrMatrix {
        let counts = self.column_counts();
        let mut indptr = Vec::with_capacity(self.n_cols + 1);
        indptr.push(0usize);
        for c in &counts {
            indptr.push(indptr.last().unwrap() + *c as usize);
        }
        let mut fill = indptr.clone();
        let mut indices = vec![0u32; self.nnz()];
        for r in 0..self.n_rows {
            for &c in self.row(r) {
                indices[fill[c as usize]] = r as u32;
                fill[c as usize] += 1;
            }
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            indptr,
            indices,
        }
    }
}

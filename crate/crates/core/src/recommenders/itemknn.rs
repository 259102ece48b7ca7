use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RecommenderError;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ItemKnnParams {
    pub neighbors: usize,
    pub shrinkage: f64,
}

impl Default for ItemKnnParams {
    fn default() -> Self {
        ItemKnnParams { neighbors: 100, shrinkage: 0.0 }
    }
}

/// Item-item cosine neighborhoods. `neighbors[i]` holds up to `k` items
/// most similar to `i` with their similarity, sorted by item.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemKnnModel {
    pub(crate) neighbors: Vec<Vec<(u32, f64)>>,
}

/// Shrunk cosine similarity `co(i,j) / (sqrt(n_i n_j) + shrinkage)` between
/// every pair of co-consumed items, without truncation and without the
/// diagonal. Row `i` is sorted by item.
pub fn item_similarities(matrix: &CsrMatrix, shrinkage: f64) -> Vec<Vec<(u32, f64)>> {
    let by_item = matrix.transpose();
    (0..matrix.n_cols())
        .into_par_iter()
        .map_init(
            || vec![0u32; matrix.n_cols()],
            |co, i| similarity_row(matrix, &by_item, i, shrinkage, co),
        )
        .collect()
}

fn similarity_row(
    matrix: &CsrMatrix,
    by_item: &CsrMatrix,
    i: usize,
    shrinkage: f64,
    co: &mut [u32],
) -> Vec<(u32, f64)> {
    let mut touched = Vec::new();
    for &u in by_item.row(i) {
        for &j in matrix.row(u as usize) {
            if j as usize != i {
                if co[j as usize] == 0 {
                    touched.push(j);
                }
                co[j as usize] += 1;
            }
        }
    }
    touched.sort_unstable();
    let ni = by_item.row(i).len() as f64;
    touched
        .into_iter()
        .map(|j| {
            let c = std::mem::take(&mut co[j as usize]) as f64;
            let nj = by_item.row(j as usize).len() as f64;
            (j, c / ((ni * nj).sqrt() + shrinkage))
        })
        .collect()
}

impl ItemKnnModel {
    pub(crate) fn train(matrix: &CsrMatrix, params: &ItemKnnParams) -> Result<ItemKnnModel, RecommenderError> {
        if params.neighbors == 0 {
            return Err(RecommenderError::InvalidHyperparameter("itemknn.neighbors must be positive".into()));
        }
        if params.shrinkage.is_nan() || params.shrinkage < 0.0 {
            return Err(RecommenderError::InvalidHyperparameter("itemknn.shrinkage must be non-negative".into()));
        }
        let by_item = matrix.transpose();
        let k = params.neighbors;
        let neighbors = (0..matrix.n_cols())
            .into_par_iter()
            .map_init(
                || vec![0u32; matrix.n_cols()],
                |co, i| {
                    let mut row = similarity_row(matrix, &by_item, i, params.shrinkage, co);
                    if row.len() > k {
                        row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                        row.truncate(k);
                        row.sort_by_key(|&(j, _)| j);
                    }
                    row
                },
            )
            .collect();
        Ok(ItemKnnModel { neighbors })
    }

    pub fn neighbors(&self, item: u32) -> &[(u32, f64)] {
        &self.neighbors[item as usize]
    }

    pub(crate) fn scores(&self, items: &[u32], n_items: usize) -> Vec<f64> {
        let mut s = vec![0.0; n_items];
        for &i in items {
            for &(j, w) in &self.neighbors[i as usize] {
                s[j as usize] += w;
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recommenders::tests::widened_blocks;

    #[test]
    fn cosine_by_hand() {
        // item 0: users {0,1,2}; item 1: users {1,2}; item 2: user {3}
        let m = CsrMatrix::from_rows(3, vec![vec![0], vec![0, 1], vec![0, 1], vec![2]]);
        let s = item_similarities(&m, 0.0);
        assert_eq!(s[0].len(), 1);
        assert!((s[0][0].1 - 2.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!(s[2].is_empty());
        let shrunk = item_similarities(&m, 1.0);
        assert!((shrunk[1][0].1 - 2.0 / (6f64.sqrt() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn untruncated_similarity_is_symmetric() {
        let m = widened_blocks(7, 9);
        let s = item_similarities(&m, 2.0);
        for (i, row) in s.iter().enumerate() {
            for &(j, w) in row {
                let back = s[j as usize].iter().find(|&&(k, _)| k as usize == i).expect("mirrored entry");
                assert_eq!(back.1, w);
            }
        }
    }

    #[test]
    fn keeps_the_k_most_similar() {
        let m = widened_blocks(7, 9);
        let full = item_similarities(&m, 0.0);
        let model = ItemKnnModel::train(&m, &ItemKnnParams { neighbors: 3, shrinkage: 0.0 }).unwrap();
        for i in 0..m.n_cols() as u32 {
            let kept = model.neighbors(i);
            assert_eq!(kept.len(), 3.min(full[i as usize].len()));
            let floor = kept.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let dropped = full[i as usize].iter().filter(|p| !kept.contains(p));
            assert!(dropped.into_iter().all(|p| p.1 <= floor));
        }
    }
}

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RecommenderError;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlimParams {
    pub l1: f64,
    pub l2: f64,
    pub max_sweeps: usize,
    pub tolerance: f64,
}

impl Default for SlimParams {
    fn default() -> Self {
        SlimParams { l1: 1e-3, l2: 1e-3, max_sweeps: 50, tolerance: 1e-4 }
    }
}

/// Sparse non-negative item-item weights with a zero diagonal.
/// `weights[i]` lists `(j, w_ij)` for `w_ij > 0`, sorted by `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlimModel {
    pub(crate) weights: Vec<Vec<(u32, f64)>>,
}

struct Column {
    entries: Vec<(u32, f64)>,
    converged: bool,
}

impl SlimModel {
    pub(crate) fn train(matrix: &CsrMatrix, params: &SlimParams) -> Result<SlimModel, RecommenderError> {
        if !(params.l1 >= 0.0 && params.l2 >= 0.0) {
            return Err(RecommenderError::InvalidHyperparameter("slim.l1 and slim.l2 must be non-negative".into()));
        }
        if params.max_sweeps == 0 {
            return Err(RecommenderError::InvalidHyperparameter("slim.max_sweeps must be positive".into()));
        }
        let by_item = matrix.transpose();
        let n_items = matrix.n_cols();
        let capped = AtomicUsize::new(0);
        let columns: Vec<Column> = (0..n_items)
            .into_par_iter()
            .map_init(
                || (vec![false; n_items], vec![0.0; matrix.n_rows()]),
                |(seen, residual), j| fit_column(matrix, &by_item, j, params, seen, residual),
            )
            .inspect(|c| {
                if !c.converged {
                    capped.fetch_add(1, Ordering::Relaxed);
                }
            })
            .collect();
        let capped = capped.into_inner();
        if capped > 0 {
            log::warn!("SLIM: {capped} of {n_items} columns hit the sweep cap before converging");
        }

        let mut weights = vec![Vec::new(); n_items];
        for (j, col) in columns.into_iter().enumerate() {
            for (i, w) in col.entries {
                weights[i as usize].push((j as u32, w));
            }
        }
        Ok(SlimModel { weights })
    }

    pub fn weights(&self, item: u32) -> &[(u32, f64)] {
        &self.weights[item as usize]
    }

    pub(crate) fn scores(&self, items: &[u32], n_items: usize) -> Vec<f64> {
        let mut s = vec![0.0; n_items];
        for &i in items {
            for &(j, w) in &self.weights[i as usize] {
                s[j as usize] += w;
            }
        }
        s
    }
}

/// Coordinate descent for
/// `min_w ‖a_j − A w‖² / (2 n_users) + l1 ‖w‖₁ + ½ l2 ‖w‖²` with `w ≥ 0`,
/// `w_j = 0`. The squared loss is averaged over users, so the penalties
/// keep their meaning as the user count grows.
///
/// Items that never co-occur with `j` have a non-positive gradient at zero,
/// so under the non-negativity constraint their weight stays exactly zero;
/// only co-occurring items are ever visited.
fn fit_column(
    matrix: &CsrMatrix,
    by_item: &CsrMatrix,
    j: usize,
    params: &SlimParams,
    seen: &mut [bool],
    residual: &mut [f64],
) -> Column {
    let target = by_item.row(j);
    let mut candidates = Vec::new();
    for &u in target {
        for &i in matrix.row(u as usize) {
            if i as usize != j && !seen[i as usize] {
                seen[i as usize] = true;
                candidates.push(i);
            }
        }
    }
    for &i in &candidates {
        seen[i as usize] = false;
    }
    candidates.sort_unstable();

    for &u in target {
        residual[u as usize] = 1.0;
    }
    let n_users = matrix.n_rows() as f64;
    let (l1, l2) = (params.l1 * n_users, params.l2 * n_users);
    let mut w = vec![0.0f64; candidates.len()];
    let mut active_only = false;
    let mut converged = false;
    for _ in 0..params.max_sweeps {
        let mut max_delta = 0.0f64;
        for (c, &i) in candidates.iter().enumerate() {
            if active_only && w[c] == 0.0 {
                continue;
            }
            let users = by_item.row(i as usize);
            let sq = users.len() as f64;
            let rho: f64 = users.iter().map(|&u| residual[u as usize]).sum::<f64>() + sq * w[c];
            let updated = (rho - l1).max(0.0) / (sq + l2);
            let delta = updated - w[c];
            if delta != 0.0 {
                for &u in users {
                    residual[u as usize] -= delta;
                }
                w[c] = updated;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < params.tolerance {
            if !active_only {
                converged = true;
                break;
            }
            active_only = false;
        } else {
            active_only = true;
        }
    }

    // reset the scratch residual for the next column
    for &u in target {
        residual[u as usize] = 0.0;
    }
    for &i in &candidates {
        for &u in by_item.row(i as usize) {
            residual[u as usize] = 0.0;
        }
    }

    let entries = candidates.into_iter().zip(w).filter(|&(_, v)| v > 0.0).collect();
    Column { entries, converged }
}

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::sparse::CsrMatrix;

/// Dense row-major factor matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Factors {
    pub fn zeros(rows: usize, dim: usize) -> Factors {
        Factors { rows, dim, data: vec![0.0; rows * dim] }
    }

    pub fn from_data(rows: usize, dim: usize, data: Vec<f64>) -> Factors {
        assert_eq!(data.len(), rows * dim, "factor data has the wrong length");
        Factors { rows, dim, data }
    }

    pub(crate) fn random<R: Rng>(rows: usize, dim: usize, sd: f64, rng: &mut R) -> Factors {
        let normal = Normal::new(0.0, sd).expect("positive standard deviation");
        let data = (0..rows * dim).map(|_| normal.sample(rng)).collect();
        Factors { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub(crate) fn par_rows_mut(&mut self) -> rayon::slice::ChunksMut<'_, f64> {
        self.data.par_chunks_mut(self.dim)
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `FᵀF`.
    pub fn gramian(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.rows {
            let v = self.row(r);
            for a in 0..self.dim {
                for b in a..self.dim {
                    g[(a, b)] += v[a] * v[b];
                }
            }
        }
        g.fill_lower_triangle_with_upper_triangle();
        g
    }

    /// Inner product of `user` with every row.
    pub fn scores(&self, user: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| dot(self.row(r), user)).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Implicit-feedback least squares for one row: minimizes
/// `Σ_i c_i (p_i − x·y_i)² + λ‖x‖²` where `c_i = 1 + α` and `p_i = 1` on the
/// observed items and `c_i = 1`, `p_i = 0` everywhere else.
/// `gramian` is `YᵀY` over all rows of `other`.
pub(crate) fn solve_implicit(
    other: &Factors,
    gramian: &DMatrix<f64>,
    observed: &[u32],
    alpha: f64,
    lambda: f64,
) -> Vec<f64> {
    let k = other.dim();
    let mut a = gramian.clone();
    let mut b = DVector::zeros(k);
    for d in 0..k {
        a[(d, d)] += lambda;
    }
    for &i in observed {
        let y = other.row(i as usize);
        for p in 0..k {
            b[p] += (1.0 + alpha) * y[p];
            let ay = alpha * y[p];
            for q in 0..k {
                a[(p, q)] += ay * y[q];
            }
        }
    }
    match a.clone().cholesky() {
        Some(ch) => ch.solve(&b).as_slice().to_vec(),
        None => a.lu().solve(&b).map(|x| x.as_slice().to_vec()).unwrap_or_else(|| vec![0.0; k]),
    }
}

/// Solves every row of `target` against `other`, one least-squares system
/// per row of `interactions`.
pub(crate) fn solve_all(target: &mut Factors, other: &Factors, interactions: &CsrMatrix, alpha: f64, lambda: f64) {
    let gramian = other.gramian();
    target.par_rows_mut().enumerate().for_each(|(r, row)| {
        let x = solve_implicit(other, &gramian, interactions.row(r), alpha, lambda);
        row.copy_from_slice(&x);
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gramian_matches_naive_product() {
        let f = Factors::from_data(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let g = f.gramian();
        assert_eq!(g[(0, 0)], 35.0);
        assert_eq!(g[(0, 1)], 44.0);
        assert_eq!(g[(1, 0)], 44.0);
        assert_eq!(g[(1, 1)], 56.0);
    }

    #[test]
    fn solve_is_a_stationary_point() {
        // gradient of the weighted objective vanishes at the solution
        let y = Factors::from_data(4, 2, vec![1.0, 0.5, -0.3, 2.0, 0.7, 0.7, 1.5, -1.0]);
        let observed = [0u32, 2];
        let (alpha, lambda) = (3.0, 0.1);
        let x = solve_implicit(&y, &y.gramian(), &observed, alpha, lambda);
        let mut grad = [lambda * x[0], lambda * x[1]];
        for i in 0..4 {
            let (c, p) = if observed.contains(&(i as u32)) { (1.0 + alpha, 1.0) } else { (1.0, 0.0) };
            let e = dot(&x, y.row(i)) - p;
            for d in 0..2 {
                grad[d] += c * e * y.row(i)[d];
            }
        }
        assert!(grad.iter().all(|g| g.abs() < 1e-12), "{grad:?}");
    }
}

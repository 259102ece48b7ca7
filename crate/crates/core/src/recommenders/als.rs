use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::factors::{dot, solve_all, solve_implicit, Factors};
use super::RecommenderError;
use crate::rng;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlsParams {
    pub factors: usize,
    pub regularization: f64,
    /// Confidence on observed entries is `1 + alpha`.
    pub alpha: f64,
    pub iterations: usize,
    pub init_sd: f64,
}

impl Default for AlsParams {
    fn default() -> Self {
        AlsParams { factors: 64, regularization: 0.01, alpha: 40.0, iterations: 15, init_sd: 0.01 }
    }
}

/// Implicit-feedback matrix factorization fitted by alternating least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct AlsModel {
    users: Factors,
    items: Factors,
    gramian: DMatrix<f64>,
    alpha: f64,
    regularization: f64,
}

impl AlsModel {
    pub(crate) fn train(matrix: &CsrMatrix, params: &AlsParams, seed: u64) -> Result<AlsModel, RecommenderError> {
        Ok(Self::fit(matrix, params, seed, false)?.0)
    }

    /// Trains and records the objective after every half-step.
    pub fn train_traced(
        matrix: &CsrMatrix,
        params: &AlsParams,
        seed: u64,
    ) -> Result<(AlsModel, Vec<f64>), RecommenderError> {
        Self::fit(matrix, params, seed, true)
    }

    fn fit(
        matrix: &CsrMatrix,
        params: &AlsParams,
        seed: u64,
        traced: bool,
    ) -> Result<(AlsModel, Vec<f64>), RecommenderError> {
        if params.factors == 0 || params.iterations == 0 {
            return Err(RecommenderError::InvalidHyperparameter("als.factors and als.iterations must be positive".into()));
        }
        if params.regularization.is_nan() || params.regularization <= 0.0 || params.alpha.is_nan() || params.alpha < 0.0 || params.init_sd.is_nan() || params.init_sd <= 0.0 {
            return Err(RecommenderError::InvalidHyperparameter(
                "als.regularization and als.init_sd must be positive, als.alpha non-negative".into(),
            ));
        }
        let mut rng = rng::seeded(seed, &[rng::fnv1a(*b"als")]);
        let k = params.factors;
        let items = Factors::random(matrix.n_cols(), k, params.init_sd, &mut rng);
        let users = Factors::zeros(matrix.n_rows(), k);
        let mut model = AlsModel {
            users,
            items,
            gramian: DMatrix::zeros(k, k),
            alpha: params.alpha,
            regularization: params.regularization,
        };
        let by_item = matrix.transpose();
        let mut trace = Vec::new();
        for it in 0..params.iterations {
            solve_all(&mut model.users, &model.items, matrix, params.alpha, params.regularization);
            if traced {
                trace.push(model.objective(matrix));
            }
            solve_all(&mut model.items, &model.users, &by_item, params.alpha, params.regularization);
            if traced {
                trace.push(model.objective(matrix));
            }
            log::debug!("ALS iteration {} of {}", it + 1, params.iterations);
        }
        model.gramian = model.items.gramian();
        Ok((model, trace))
    }

    pub(crate) fn from_parts(users: Factors, items: Factors, alpha: f64, regularization: f64) -> AlsModel {
        let gramian = items.gramian();
        AlsModel { users, items, gramian, alpha, regularization }
    }

    pub fn user_factors(&self) -> &Factors {
        &self.users
    }

    pub(crate) fn factors(&self) -> &Factors {
        &self.items
    }

    pub fn item_factors(&self) -> &Factors {
        &self.items
    }

    pub(crate) fn fold_in(&self, items: &[u32]) -> Vec<f64> {
        solve_implicit(&self.items, &self.gramian, items, self.alpha, self.regularization)
    }

    /// `Σ_ui c_ui (p_ui − x_u·y_i)² + λ(‖X‖² + ‖Y‖²)` over the training matrix.
    pub fn objective(&self, matrix: &CsrMatrix) -> f64 {
        let g = self.items.gramian();
        let k = self.items.dim();
        let mut loss = 0.0;
        for u in 0..matrix.n_rows() {
            let x = self.users.row(u);
            // all-entries squared prediction via the gramian, then correct observed entries
            for a in 0..k {
                for b in 0..k {
                    loss += x[a] * g[(a, b)] * x[b];
                }
            }
            for &i in matrix.row(u) {
                let s = dot(x, self.items.row(i as usize));
                loss += (1.0 + self.alpha) * (1.0 - s) * (1.0 - s) - s * s;
            }
        }
        loss + self.regularization * (self.users.squared_norm() + self.items.squared_norm())
    }
}

//! Closed-form ridge classifier on raw features, `W = L·Xᵀ(XXᵀ + γI)⁻¹`.
//! Serves as the linear baseline and as the code classifier of plain
//! dictionary learning.

use nalgebra::DMatrix;

use crate::config::TrainConfig;
use crate::data::Dataset;
use crate::error::Result;
use crate::model::Model;
use crate::solver::OmegaSolver;
use crate::structure::build_label_matrix;

/// `targets · featuresᵀ (features · featuresᵀ + γI)⁻¹`, via Cholesky.
pub(crate) fn ridge_weights(features: &DMatrix<f64>, targets: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    // Same normal equations as the dictionary update with U → targets.
    OmegaSolver::new(features, gamma)?.solve(targets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeClassifier {
    w: DMatrix<f64>,
    gamma: f64,
}

impl RidgeClassifier {
    pub fn fit(data: &Dataset, gamma: f64) -> Result<Self> {
        data.require_all_classes()?;
        let l = build_label_matrix(data.labels(), data.classes())?;
        Ok(RidgeClassifier {
            w: ridge_weights(data.x(), &l, gamma)?,
            gamma,
        })
    }

    /// `c × m` weights.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Packs the classifier as a model with `Ω = Q = I`, so it can share the
    /// model file format and inference path.
    pub fn to_model(&self) -> Result<Model> {
        let m = self.w.ncols();
        let config = TrainConfig {
            dict_size: m,
            ridge_gamma: self.gamma,
            ..TrainConfig::default()
        };
        Model::new(DMatrix::identity(m, m), DMatrix::identity(m, m), self.w.clone(), config)
    }
}

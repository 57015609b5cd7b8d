//! Closed-form ridge regression and the linear reconstructor built on it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::features::{FeatureLayout, Standardizer, TrainingSet};
use super::{Prediction, Reconstructor};
use crate::error::{Error, Result};
use crate::skeleton::{MotionClip, Pose, Rotation, Vec3};
use crate::sync::FusedFrame;

/// Relative pivot size below which an unregularized system counts as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

/// `W = argmin ‖XW − Y‖² + λ‖W‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeRegression {
    /// d × m
    pub weights: DMatrix<f64>,
}

impl RidgeRegression {
    /// Solves without forming `XᵀX`: a QR factorization of `[X; √λ I]` when
    /// there are at least as many rows as features, otherwise the dual system
    /// `W = Xᵀ (XXᵀ + λI)⁻¹ Y` by Cholesky (which needs λ > 0).
    pub fn fit(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        let (n, d) = x.shape();
        if y.nrows() != n {
            return Err(Error::Structure(format!("{n} feature rows but {} target rows", y.nrows())));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
        }
        if n == 0 || d == 0 {
            return Err(Error::Structure("empty regression problem".into()));
        }
        if n < d {
            if lambda == 0.0 {
                return Err(Error::Singular(format!(
                    "{n} samples for {d} features leave the system underdetermined; use lambda > 0"
                )));
            }
            let mut gram = x * x.transpose();
            for i in 0..n {
                gram[(i, i)] += lambda;
            }
            let chol = gram.cholesky().ok_or_else(|| Error::Singular("dual ridge system is not positive definite".into()))?;
            return Ok(Self { weights: x.transpose() * chol.solve(y) });
        }
        let (a, b) = if lambda > 0.0 {
            let mut a = DMatrix::zeros(n + d, d);
            a.view_mut((0, 0), (n, d)).copy_from(x);
            let s = lambda.sqrt();
            for i in 0..d {
                a[(n + i, i)] = s;
            }
            let mut b = DMatrix::zeros(n + d, y.ncols());
            b.view_mut((0, 0), (n, y.ncols())).copy_from(y);
            (a, b)
        } else {
            (x.clone(), y.clone())
        };
        let qr = a.qr();
        let r = qr.r();
        let max_pivot = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if r.diagonal().iter().any(|v| v.abs() <= SINGULAR_TOLERANCE * max_pivot) || max_pivot == 0.0 {
            return Err(Error::Singular("design matrix is rank deficient; use lambda > 0".into()));
        }
        let mut qtb = b;
        qr.q_tr_mul(&mut qtb);
        let weights = r
            .solve_upper_triangular(&qtb.rows(0, d).into_owned())
            .ok_or_else(|| Error::Singular("triangular solve failed; use lambda > 0".into()))?;
        Ok(Self { weights })
    }

    pub fn predict(&self, x: &DVector<f64>) -> DVector<f64> {
        self.weights.transpose() * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RidgeConfig {
    pub lambda: f64,
    pub layout: FeatureLayout,
    pub frame_step: usize,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self { lambda: 1.0, layout: FeatureLayout::default(), frame_step: 1 }
    }
}

/// Fitted state: feature standardization, target means (the intercept) and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub standardizer: Standardizer,
    pub target_mean: DVector<f64>,
    pub regression: RidgeRegression,
    pub joints: usize,
}

/// Per-joint 6D rotations followed by the root translation.
pub fn pose_targets(pose: &Pose) -> Vec<f64> {
    let mut out: Vec<f64> = pose.local_rotations.iter().flat_map(|q| q.to_6d()).collect();
    out.extend(pose.root_translation.iter());
    out
}

/// Inverse of [`pose_targets`]. A degenerate 6D block decodes to the identity.
pub fn decode_targets(y: &[f64], joints: usize) -> Pose {
    let local_rotations = (0..joints)
        .map(|j| {
            let six: [f64; 6] = y[6 * j..6 * j + 6].try_into().expect("six values per joint");
            Rotation::from_6d(&six).unwrap_or(Rotation::IDENTITY)
        })
        .collect();
    let t = &y[6 * joints..6 * joints + 3];
    Pose { root_translation: Vec3::new(t[0], t[1], t[2]), local_rotations }
}

impl RidgeModel {
    pub fn fit(set: &TrainingSet, lambda: f64) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Structure("ridge regression needs training data".into()));
        }
        let joints = set.poses[0].local_rotations.len();
        let standardizer = Standardizer::fit(&set.features);
        let n = set.len();
        let d = standardizer.mean.len();
        let x = DMatrix::from_fn(n, d, |i, j| (set.features[i][j] - standardizer.mean[j]) / standardizer.scale[j]);
        let targets: Vec<Vec<f64>> = set.poses.iter().map(pose_targets).collect();
        let m = targets[0].len();
        let target_mean = DVector::from_fn(m, |j, _| targets.iter().map(|t| t[j]).sum::<f64>() / n as f64);
        let y = DMatrix::from_fn(n, m, |i, j| targets[i][j] - target_mean[j]);
        let regression = RidgeRegression::fit(&x, &y, lambda)?;
        Ok(Self { standardizer, target_mean, regression, joints })
    }

    pub fn predict(&self, features: &[f64]) -> Result<Pose> {
        if features.len() != self.standardizer.mean.len() {
            return Err(Error::Structure(format!(
                "query has {} features, model expects {}",
                features.len(),
                self.standardizer.mean.len()
            )));
        }
        let x = DVector::from_vec(self.standardizer.apply(features));
        let y = self.regression.predict(&x) + &self.target_mean;
        Ok(decode_targets(y.as_slice(), self.joints))
    }
}

#[derive(Debug, Clone)]
pub struct RidgeReconstructor {
    config: RidgeConfig,
    model: Option<RidgeModel>,
}

impl RidgeReconstructor {
    pub fn new(config: RidgeConfig) -> Result<Self> {
        config.layout.validate()?;
        if !(config.lambda.is_finite() && config.lambda >= 0.0) {
            return Err(Error::Parameter(format!("lambda must be >= 0, got {}", config.lambda)));
        }
        Ok(Self { config, model: None })
    }

    pub fn model(&self) -> Option<&RidgeModel> {
        self.model.as_ref()
    }
}

impl Reconstructor for RidgeReconstructor {
    fn name(&self) -> &'static str {
        "ridge"
    }

    fn window_length(&self) -> usize {
        self.config.layout.window_length
    }

    fn fit(&mut self, clips: &[MotionClip]) -> Result<()> {
        let set = TrainingSet::from_clips(clips, &self.config.layout, self.config.frame_step)?;
        self.model = Some(RidgeModel::fit(&set, self.config.lambda)?);
        Ok(())
    }

    fn predict(&self, window: &[&FusedFrame], _previous: Option<&Pose>) -> Result<Prediction> {
        let model = self.model.as_ref().ok_or_else(|| Error::Structure("ridge reconstructor used before fit".into()))?;
        let pose = model.predict(&self.config.layout.encode(window)?)?;
        Ok(Prediction { pose, held: false })
    }
}

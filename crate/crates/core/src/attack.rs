//! Gradient inversion by an untrusted aggregator, and the exp-hamming
//! recovery score.
//!
//! Every supported model produces per-record gradients of the form
//! `c · (x1, x2, x3, x4, 1)`, so dividing the feature components by the bias
//! component recovers `x` exactly when the gradient is unperturbed. The label
//! follows from `c`: the residual for regression, the sign for classifiers.

use serde::{Deserialize, Serialize};

use crate::engine::Session;
use crate::error::{Error, Result};
use crate::model::{predict_raw, FeatureVector, Gradient, ModelKind, WeightVector, FEATURE_DIM};

pub const DEFAULT_K: f64 = 0.5;

/// Bias-gradient magnitudes below this carry no usable signal.
pub const MIN_BIAS_GRADIENT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveredRecord {
    pub recovered: bool,
    pub features: Option<[f64; FEATURE_DIM]>,
    pub label: Option<f64>,
}

impl RecoveredRecord {
    pub const FAILED: RecoveredRecord = RecoveredRecord {
        recovered: false,
        features: None,
        label: None,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub user_id: usize,
    pub recovered: RecoveredRecord,
    pub exp_hamming: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub k: f64,
    pub per_user: Vec<RecoveryResult>,
    pub average_exp_hamming: f64,
}

/// Reconstructs a record from a gradient reported against `w`.
pub fn invert_gradient(kind: ModelKind, w: &WeightVector, g: &Gradient) -> RecoveredRecord {
    let g_b = g[FEATURE_DIM];
    if !g_b.is_finite() || g_b.abs() < MIN_BIAS_GRADIENT {
        return RecoveredRecord::FAILED;
    }
    let mut x = [0.0; FEATURE_DIM];
    for (xi, gi) in x.iter_mut().zip(g) {
        let ratio = gi / g_b;
        // NaN only if a feature component is itself NaN.
        *xi = if ratio.is_nan() {
            0.0
        } else {
            ratio.clamp(-1.0, 1.0)
        };
    }
    let label = match kind {
        ModelKind::LinearRegression => {
            let fv = FeatureVector::new(x).expect("clamped into range");
            predict_raw(w, &fv) - g_b
        }
        ModelKind::LogisticRegression | ModelKind::Svm => -g_b.signum(),
    };
    RecoveredRecord {
        recovered: true,
        features: Some(x),
        label: Some(label),
    }
}

/// `exp(−k · ‖x − x_r‖₁)`.
pub fn exp_hamming(x: &[f64; FEATURE_DIM], x_r: &[f64; FEATURE_DIM], k: f64) -> Result<f64> {
    check_k(k)?;
    let l1: f64 = x.iter().zip(x_r).map(|(a, b)| (a - b).abs()).sum();
    Ok((-k * l1).exp())
}

fn check_k(k: f64) -> Result<()> {
    if k.is_finite() && k > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "k must be positive, got {k}"
        )))
    }
}

/// Runs the attack on every submission of the last epoch and scores each
/// against the true record. Failed recoveries score 0 and still count
/// toward the average.
pub fn recover_session(session: &Session, k: f64) -> Result<RecoveryReport> {
    check_k(k)?;
    let log = session.last_epoch_log();
    if log.is_empty() {
        return Err(Error::NotTrained);
    }
    let model = session.config().model;
    let users = session.users();
    let per_user = log
        .iter()
        .map(|entry| {
            let recovered = invert_gradient(
                model,
                &entry.weights_at_submission,
                &entry.reported_gradient,
            );
            let score = match recovered.features {
                Some(x_r) if recovered.recovered => {
                    exp_hamming(users[entry.user_id].features.values(), &x_r, k)?
                }
                _ => 0.0,
            };
            Ok(RecoveryResult {
                user_id: entry.user_id,
                recovered,
                exp_hamming: score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let average_exp_hamming =
        per_user.iter().map(|r| r.exp_hamming).sum::<f64>() / per_user.len() as f64;
    Ok(RecoveryReport {
        k,
        per_user,
        average_exp_hamming,
    })
}

//! Linear models trained by the simulator: least-squares regression,
//! logistic regression and a linear SVM, all over four features plus a bias.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEATURE_DIM: usize = 4;
/// Four feature weights plus the bias.
pub const GRADIENT_DIM: usize = FEATURE_DIM + 1;

/// Per-record gradient, ordered `∂/∂w1..∂/∂w4, ∂/∂b`.
pub type Gradient = [f64; GRADIENT_DIM];

/// Generating weights for the synthetic data.
pub const IDEAL_WEIGHTS: WeightVector = WeightVector {
    coef: [-0.55, -0.82, 0.07, 0.95],
    bias: 0.31,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[serde(rename = "linear")]
    LinearRegression,
    #[serde(rename = "logistic")]
    LogisticRegression,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::LinearRegression,
        ModelKind::LogisticRegression,
        ModelKind::Svm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LinearRegression => "linear",
            ModelKind::LogisticRegression => "logistic",
            ModelKind::Svm => "svm",
        }
    }

    pub fn is_classifier(self) -> bool {
        self != ModelKind::LinearRegression
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ModelKind::LinearRegression),
            "logistic" => Ok(ModelKind::LogisticRegression),
            "svm" => Ok(ModelKind::Svm),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}

/// Four features, each in `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; FEATURE_DIM]", into = "[f64; FEATURE_DIM]")]
pub struct FeatureVector([f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn new(x: [f64; FEATURE_DIM]) -> Result<Self> {
        match x.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            Some(bad) => Err(Error::InvalidArgument(format!(
                "feature {bad} outside [-1, 1]"
            ))),
            None => Ok(Self(x)),
        }
    }

    pub fn values(&self) -> &[f64; FEATURE_DIM] {
        &self.0
    }
}

impl TryFrom<[f64; FEATURE_DIM]> for FeatureVector {
    type Error = Error;

    fn try_from(x: [f64; FEATURE_DIM]) -> Result<Self> {
        Self::new(x)
    }
}

impl From<FeatureVector> for [f64; FEATURE_DIM] {
    fn from(x: FeatureVector) -> Self {
        x.0
    }
}

/// One user's private datum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub features: FeatureVector,
    pub label: f64,
}

impl TrainingRecord {
    /// Builds a record labelled by the generating model.
    pub fn generated(kind: ModelKind, features: FeatureVector) -> Self {
        Self {
            features,
            label: generate_label(kind, &features),
        }
    }
}

/// Model parameters. Serialized as `[w1, w2, w3, w4, b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; GRADIENT_DIM]", into = "[f64; GRADIENT_DIM]")]
pub struct WeightVector {
    pub coef: [f64; FEATURE_DIM],
    pub bias: f64,
}

impl WeightVector {
    pub const ZERO: WeightVector = WeightVector {
        coef: [0.0; FEATURE_DIM],
        bias: 0.0,
    };

    pub fn to_array(self) -> [f64; GRADIENT_DIM] {
        let [a, b, c, d] = self.coef;
        [a, b, c, d, self.bias]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// `w ← w − step · g`
    pub fn descend(&mut self, step: f64, g: &Gradient) {
        for (w, gi) in self.coef.iter_mut().zip(g) {
            *w -= step * gi;
        }
        self.bias -= step * g[FEATURE_DIM];
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, other: &WeightVector) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<[f64; GRADIENT_DIM]> for WeightVector {
    fn from([a, b, c, d, bias]: [f64; GRADIENT_DIM]) -> Self {
        Self {
            coef: [a, b, c, d],
            bias,
        }
    }
}

impl From<WeightVector> for [f64; GRADIENT_DIM] {
    fn from(w: WeightVector) -> Self {
        w.to_array()
    }
}

pub fn predict_raw(w: &WeightVector, x: &FeatureVector) -> f64 {
    w.coef
        .iter()
        .zip(x.values())
        .map(|(wi, xi)| wi * xi)
        .sum::<f64>()
        + w.bias
}

/// Regression target, or its sign (strict `> 0` gives `+1`) for classifiers.
pub fn generate_label(kind: ModelKind, x: &FeatureVector) -> f64 {
    let d = predict_raw(&IDEAL_WEIGHTS, x);
    match kind {
        ModelKind::LinearRegression => d,
        ModelKind::LogisticRegression | ModelKind::Svm => {
            if d > 0.0 {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Scalar `c` such that the per-record gradient is `c · (x1, x2, x3, x4, 1)`.
fn gradient_scale(kind: ModelKind, w: &WeightVector, rec: &TrainingRecord) -> f64 {
    let y = rec.label;
    let y_hat = predict_raw(w, &rec.features);
    match kind {
        ModelKind::LinearRegression => y_hat - y,
        ModelKind::LogisticRegression => -y / (1.0 + (y * y_hat).exp()),
        ModelKind::Svm => {
            if y * y_hat < 1.0 {
                -y
            } else {
                0.0
            }
        }
    }
}

pub fn gradient(kind: ModelKind, w: &WeightVector, rec: &TrainingRecord) -> Gradient {
    let c = gradient_scale(kind, w, rec);
    let [x1, x2, x3, x4] = *rec.features.values();
    [c * x1, c * x2, c * x3, c * x4, c]
}

/// Per-record loss: ½ squared error, logistic log-loss, or hinge.
pub fn loss(kind: ModelKind, w: &WeightVector, rec: &TrainingRecord) -> f64 {
    let y = rec.label;
    let y_hat = predict_raw(w, &rec.features);
    match kind {
        ModelKind::LinearRegression => 0.5 * (y_hat - y).powi(2),
        ModelKind::LogisticRegression => softplus(-y * y_hat),
        ModelKind::Svm => (1.0 - y * y_hat).max(0.0),
    }
}

/// `ln(1 + e^z)` without overflow for large `z`.
fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn dataset_cost(kind: ModelKind, w: &WeightVector, records: &[TrainingRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = records.iter().map(|r| loss(kind, w, r)).sum();
    Ok(total / records.len() as f64)
}

/// Fraction of records whose predicted sign matches the label; a raw
/// prediction of exactly zero counts as `+1`.
pub fn dataset_accuracy(
    kind: ModelKind,
    w: &WeightVector,
    records: &[TrainingRecord],
) -> Result<f64> {
    if !kind.is_classifier() {
        return Err(Error::NotAClassifier(kind.as_str()));
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct = records
        .iter()
        .filter(|r| {
            let predicted = if predict_raw(w, &r.features) >= 0.0 {
                1.0
            } else {
                -1.0
            };
            predicted == r.label
        })
        .count();
    Ok(correct as f64 / records.len() as f64)
}

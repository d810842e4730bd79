//! Session state and one-epoch sequential SGD.
//!
//! A [`Session`] owns the model weights, the users' records and the PRNG.
//! Randomness is drawn in a fixed order: five initial weights (`w1..w4, b`)
//! at creation, four features per generated user, then whatever the
//! selected mechanism consumes per gradient component during training.
//! Replaying the same actions from the same config therefore reproduces
//! the session bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldp::{perturb_gradient, MechanismKind, PrivacyBudget};
use crate::model::{
    dataset_accuracy, dataset_cost, gradient, FeatureVector, Gradient, ModelKind, TrainingRecord,
    WeightVector, FEATURE_DIM, GRADIENT_DIM,
};
use crate::rng::RngState;

pub const DEFAULT_LEARNING_RATE: f64 = 0.01;

fn default_learning_rate() -> f64 {
    DEFAULT_LEARNING_RATE
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub model: ModelKind,
    pub mechanism: MechanismKind,
    #[serde(default)]
    pub epsilon: Option<PrivacyBudget>,
    pub seed: u64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
}

impl SessionConfig {
    pub fn new(
        model: ModelKind,
        mechanism: MechanismKind,
        epsilon: Option<PrivacyBudget>,
        seed: u64,
    ) -> Self {
        Self {
            model,
            mechanism,
            epsilon,
            seed,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mechanism.needs_budget() && self.epsilon.is_none() {
            return Err(Error::InvalidConfig(format!(
                "mechanism `{}` requires epsilon",
                self.mechanism
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// What the aggregator sees from one user: the transmitted gradient and the
/// weights it was computed against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmissionLogEntry {
    pub user_id: usize,
    pub weights_at_submission: WeightVector,
    pub reported_gradient: Gradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainEvent {
    pub user_id: usize,
    pub cost_after_update: f64,
    /// Absent for regression.
    pub accuracy_after_update: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub cost: f64,
    pub accuracy: Option<f64>,
}

/// Mutable simulator state. Serializes with the field order
/// `config, weights, users, rng, epoch_count, last_epoch_log`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSession")]
pub struct Session {
    config: SessionConfig,
    weights: WeightVector,
    users: Vec<TrainingRecord>,
    rng: RngState,
    epoch_count: u64,
    last_epoch_log: Vec<SubmissionLogEntry>,
}

#[derive(Deserialize)]
struct RawSession {
    config: SessionConfig,
    weights: WeightVector,
    users: Vec<TrainingRecord>,
    rng: RngState,
    epoch_count: u64,
    last_epoch_log: Vec<SubmissionLogEntry>,
}

impl TryFrom<RawSession> for Session {
    type Error = Error;

    fn try_from(raw: RawSession) -> Result<Self> {
        raw.config
            .validate()
            .map_err(|e| Error::InvalidSnapshot(e.to_string()))?;
        if !raw.weights.is_finite() {
            return Err(Error::InvalidSnapshot("non-finite weights".into()));
        }
        for (i, rec) in raw.users.iter().enumerate() {
            check_label(raw.config.model, rec)
                .map_err(|e| Error::InvalidSnapshot(format!("user {i}: {e}")))?;
        }
        if raw.last_epoch_log.len() > raw.users.len() {
            return Err(Error::InvalidSnapshot(
                "submission log is longer than the user list".into(),
            ));
        }
        if let Some(entry) = raw
            .last_epoch_log
            .iter()
            .find(|e| e.user_id >= raw.users.len())
        {
            return Err(Error::InvalidSnapshot(format!(
                "submission log references unknown user {}",
                entry.user_id
            )));
        }
        Ok(Session {
            config: raw.config,
            weights: raw.weights,
            users: raw.users,
            rng: raw.rng,
            epoch_count: raw.epoch_count,
            last_epoch_log: raw.last_epoch_log,
        })
    }
}

fn check_label(model: ModelKind, rec: &TrainingRecord) -> Result<()> {
    if !rec.label.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "label {} is not finite",
            rec.label
        )));
    }
    if model.is_classifier() && rec.label != 1.0 && rec.label != -1.0 {
        return Err(Error::InvalidArgument(format!(
            "classifier label must be ±1, got {}",
            rec.label
        )));
    }
    Ok(())
}

impl Session {
    /// Seeds the PRNG and draws the initial weights uniformly from `[-1, 1]`.
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = RngState::new(config.seed);
        let mut initial = [0.0; GRADIENT_DIM];
        for w in &mut initial {
            *w = rng.next_symmetric();
        }
        Ok(Session {
            config,
            weights: WeightVector::from(initial),
            users: Vec::new(),
            rng,
            epoch_count: 0,
            last_epoch_log: Vec::new(),
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn users(&self) -> &[TrainingRecord] {
        &self.users
    }

    pub fn rng(&self) -> RngState {
        self.rng
    }

    pub fn epoch_count(&self) -> u64 {
        self.epoch_count
    }

    pub fn last_epoch_log(&self) -> &[SubmissionLogEntry] {
        &self.last_epoch_log
    }

    /// Overrides the current weights. Does not touch the PRNG.
    pub fn set_weights(&mut self, weights: WeightVector) -> Result<()> {
        if !weights.is_finite() {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        self.weights = weights;
        Ok(())
    }

    /// Appends a hand-written record. Does not touch the PRNG.
    pub fn push_user(&mut self, record: TrainingRecord) -> Result<usize> {
        check_label(self.config.model, &record)?;
        self.users.push(record);
        Ok(self.users.len() - 1)
    }

    /// Generates `n` users with features uniform on `[-1, 1]^4`, labelled by
    /// the generating model. Consumes `4n` draws.
    pub fn add_users(&mut self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidArgument("user count must be positive".into()));
        }
        self.users.reserve(n);
        for _ in 0..n {
            let mut x = [0.0; FEATURE_DIM];
            for xi in &mut x {
                *xi = self.rng.next_symmetric();
            }
            let features = FeatureVector::new(x)?;
            self.users
                .push(TrainingRecord::generated(self.config.model, features));
        }
        Ok(())
    }

    /// One pass over the users in insertion order. Each user computes its
    /// gradient against the current weights, perturbs it, and the weights
    /// are updated immediately. Returns one event per user.
    ///
    /// On error the session is left unchanged.
    pub fn train_epoch(&mut self) -> Result<Vec<TrainEvent>> {
        if self.users.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let model = self.config.model;
        let mut weights = self.weights;
        let mut rng = self.rng;
        let mut log = Vec::with_capacity(self.users.len());
        let mut events = Vec::with_capacity(self.users.len());

        for (user_id, rec) in self.users.iter().enumerate() {
            let true_gradient = gradient(model, &weights, rec);
            let sent = perturb_gradient(
                &true_gradient,
                self.config.mechanism,
                self.config.epsilon,
                &mut rng,
            )?;
            log.push(SubmissionLogEntry {
                user_id,
                weights_at_submission: weights,
                reported_gradient: sent,
            });
            weights.descend(self.config.learning_rate, &sent);
            let metrics = metrics_for(model, &weights, &self.users)?;
            events.push(TrainEvent {
                user_id,
                cost_after_update: metrics.cost,
                accuracy_after_update: metrics.accuracy,
            });
        }

        self.weights = weights;
        self.rng = rng;
        self.last_epoch_log = log;
        self.epoch_count += 1;
        Ok(events)
    }

    /// Cost and, for classifiers, accuracy under the current weights.
    pub fn metrics(&self) -> Result<Metrics> {
        metrics_for(self.config.model, &self.weights, &self.users)
    }
}

fn metrics_for(model: ModelKind, w: &WeightVector, users: &[TrainingRecord]) -> Result<Metrics> {
    let cost = dataset_cost(model, w, users)?;
    let accuracy = if model.is_classifier() {
        Some(dataset_accuracy(model, w, users)?)
    } else {
        None
    };
    Ok(Metrics { cost, accuracy })
}

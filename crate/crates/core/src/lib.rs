//! Federated-learning simulator in which an untrusted aggregator inverts
//! user gradients to recover their training records, and local differential
//! privacy on those gradients defeats the recovery.
//!
//! * [`ldp`]: scalar randomizers (Laplace, Duchi, Piecewise, Hybrid) and
//!   per-gradient budget splitting.
//! * [`model`]: linear/logistic regression and linear SVM over four features.
//! * [`engine`]: seeded sessions, user generation and one-epoch SGD.
//! * [`attack`]: closed-form gradient inversion and the exp-hamming score.

pub mod attack;
pub mod engine;
pub mod error;
pub mod ldp;
pub mod model;
pub mod rng;

pub use attack::{
    exp_hamming, invert_gradient, recover_session, RecoveredRecord, RecoveryReport, RecoveryResult,
    DEFAULT_K,
};
pub use engine::{Metrics, Session, SessionConfig, SubmissionLogEntry, TrainEvent};
pub use error::{Error, Result};
pub use ldp::{perturb_gradient, MechanismKind, PrivacyBudget};
pub use model::{FeatureVector, Gradient, ModelKind, TrainingRecord, WeightVector, IDEAL_WEIGHTS};
pub use rng::RngState;

//! Headless experiment runs: one configuration end to end, or a grid of
//! privacy budgets and seeds.

use std::io::Write;

use gradleak_core::{
    recover_session, Error, MechanismKind, ModelKind, PrivacyBudget, Result, Session,
    SessionConfig, TrainEvent,
};
use serde::{Deserialize, Serialize};

/// Summary of one training epoch, taken from its event stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: u64,
    pub submissions: usize,
    pub mean_cost: f64,
    pub final_cost: f64,
    pub final_accuracy: Option<f64>,
}

impl EpochSummary {
    pub fn from_events(epoch: u64, events: &[TrainEvent]) -> Self {
        let last = events.last();
        let mean_cost = if events.is_empty() {
            0.0
        } else {
            events.iter().map(|e| e.cost_after_update).sum::<f64>() / events.len() as f64
        };
        Self {
            epoch,
            submissions: events.len(),
            mean_cost,
            final_cost: last.map_or(0.0, |e| e.cost_after_update),
            final_accuracy: last.and_then(|e| e.accuracy_after_update),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: SessionConfig,
    pub users: usize,
    pub epochs: u64,
    pub k: f64,
    pub final_cost: f64,
    pub final_accuracy: Option<f64>,
    pub average_exp_hamming: f64,
    pub epoch_summaries: Vec<EpochSummary>,
}

impl ExperimentReport {
    /// Builds the report for a trained session. Recovery runs against the
    /// session's most recent epoch.
    pub fn from_session(
        session: &Session,
        epoch_summaries: &[EpochSummary],
        k: f64,
    ) -> Result<Self> {
        let recovery = recover_session(session, k)?;
        let metrics = session.metrics()?;
        Ok(Self {
            config: *session.config(),
            users: session.users().len(),
            epochs: session.epoch_count(),
            k,
            final_cost: metrics.cost,
            final_accuracy: metrics.accuracy,
            average_exp_hamming: recovery.average_exp_hamming,
            epoch_summaries: epoch_summaries.to_vec(),
        })
    }

    pub fn csv_row(&self) -> SweepRow {
        SweepRow {
            epsilon: self.config.epsilon.map(PrivacyBudget::value),
            seed: self.config.seed,
            final_cost: self.final_cost,
            final_accuracy: self.final_accuracy,
            avg_exp_hamming: self.average_exp_hamming,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentParams {
    pub config: SessionConfig,
    pub users: usize,
    pub epochs: u64,
    pub k: f64,
}

/// `new session → add users → train epochs → recover`.
pub fn run_experiment(params: &ExperimentParams) -> Result<ExperimentReport> {
    if params.epochs == 0 {
        return Err(Error::InvalidArgument(
            "at least one epoch is required".into(),
        ));
    }
    let mut session = Session::new(params.config)?;
    session.add_users(params.users)?;
    let mut summaries = Vec::with_capacity(params.epochs as usize);
    for _ in 0..params.epochs {
        let events = session.train_epoch()?;
        summaries.push(EpochSummary::from_events(session.epoch_count(), &events));
    }
    ExperimentReport::from_session(&session, &summaries, params.k)
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub final_cost: f64,
    pub final_accuracy: Option<f64>,
    pub avg_exp_hamming: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepParams {
    pub model: ModelKind,
    pub mechanism: MechanismKind,
    pub epsilons: Vec<PrivacyBudget>,
    pub first_seed: u64,
    pub seeds: u64,
    pub users: usize,
    pub epochs: u64,
    pub k: f64,
    pub learning_rate: f64,
}

/// Runs every `(epsilon, seed)` pair, epsilon-major, seeds
/// `first_seed..first_seed + seeds`.
pub fn run_sweep(params: &SweepParams) -> Result<Vec<SweepRow>> {
    if params.epsilons.is_empty() || params.seeds == 0 {
        return Err(Error::InvalidArgument(
            "sweep needs at least one epsilon and one seed".into(),
        ));
    }
    let mut rows = Vec::with_capacity(params.epsilons.len() * params.seeds as usize);
    for &eps in &params.epsilons {
        for offset in 0..params.seeds {
            let mut config = SessionConfig::new(
                params.model,
                params.mechanism,
                Some(eps),
                params.first_seed.wrapping_add(offset),
            );
            config.learning_rate = params.learning_rate;
            let report = run_experiment(&ExperimentParams {
                config,
                users: params.users,
                epochs: params.epochs,
                k: params.k,
            })?;
            rows.push(report.csv_row());
        }
    }
    Ok(rows)
}

/// Writes rows with a header; absent values become empty fields.
pub fn write_csv<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

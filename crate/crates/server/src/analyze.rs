//! Offline analytics over a saved journal.

use std::path::Path;

use roadsense_core::analytics::{accuracy, accuracy_series, fit_logistic, AnalyticsError, LogisticFit, TrialPoint};
use roadsense_core::memory::{trials, Event, Journal};

use crate::wire::SessionSummary;

/// Outcome list and accuracy, recomputed from the journal.
pub fn summarize(events: &[Event]) -> SessionSummary {
    let outcomes = trials(events);
    let series = accuracy_series(&outcomes);
    SessionSummary {
        total: series.len(),
        correct: series.iter().filter(|p| p.success).count(),
        accuracy: accuracy(&outcomes),
        outcomes: series,
    }
}

#[derive(Debug)]
pub struct Analysis {
    pub summary: SessionSummary,
    /// Learning curve against trial index; fails on short sessions.
    pub fit: Result<LogisticFit, AnalyticsError>,
}

pub fn analyze_journal(path: impl AsRef<Path>) -> anyhow::Result<Analysis> {
    let events = Journal::load(path)?;
    let summary = summarize(&events);
    let x: Vec<f64> = summary.outcomes.iter().map(|p| p.index as f64).collect();
    let y: Vec<bool> = summary.outcomes.iter().map(|p| p.success).collect();
    let fit = fit_logistic(&x, &y);
    Ok(Analysis { summary, fit })
}

/// One row per trial: index, trial_id, style, success, marginal, tick,
/// cumulative_accuracy.
pub fn write_csv(series: &[TrialPoint], path: impl AsRef<Path>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in series {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

//! Observation/target window split and per-customer predictor rows.
//!
//! The observation window is everything strictly before the cutoff; the
//! target window is the half-open interval `[cutoff, cutoff + horizon)`.
//! Each customer seen in the observation window yields one row of recency
//! and frequency predictors plus the count of target-window orders.

use std::collections::BTreeMap;
use std::io;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CustomerLedger, PurchaseEvent};
use crate::matrix::Matrix;

/// Predictor column names, in matrix column order.
pub const FEATURE_NAMES: [&str; 4] = ["latetime", "earlytime", "freq", "freq_3m"];

pub const FEATURE_CSV_HEADER: [&str; 6] =
    ["customer_id", "latetime", "earlytime", "freq", "freq_3m", "target"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// End of the observation window, exclusive; start of the target window.
    pub cutoff: NaiveDateTime,
    pub target_horizon_days: u32,
    pub recent_window_days: u32,
}

impl WindowSpec {
    /// Cutoff with the default 90-day horizon and 90-day recent window.
    pub fn new(cutoff: NaiveDateTime) -> WindowSpec {
        WindowSpec { cutoff, target_horizon_days: 90, recent_window_days: 90 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_horizon_days == 0 {
            return Err(Error::InvalidInput("target_horizon_days must be positive".into()));
        }
        if self.recent_window_days == 0 {
            return Err(Error::InvalidInput("recent_window_days must be positive".into()));
        }
        Ok(())
    }
}

/// The default reproduction cutoff: dataset maximum date minus 90 days, so
/// the final three months form the target period.
pub fn default_cutoff(ledger: &CustomerLedger) -> Result<NaiveDateTime> {
    let (_, max) = ledger
        .date_range()
        .ok_or_else(|| Error::EmptyInput("ledger has no events".into()))?;
    Ok(max - Duration::days(90))
}

/// Per-customer events on either side of the cutoff.
pub type CustomerEvents = BTreeMap<u32, Vec<PurchaseEvent>>;

/// Partitions ledger events into observation (`t < cutoff`) and target
/// (`cutoff <= t < cutoff + horizon`) windows; events past the horizon are
/// discarded. The cutoff must lie within the dataset's date range.
pub fn split_windows(
    ledger: &CustomerLedger,
    spec: &WindowSpec,
) -> Result<(CustomerEvents, CustomerEvents)> {
    spec.validate()?;
    let (lo, hi) = ledger
        .date_range()
        .ok_or_else(|| Error::EmptyInput("ledger has no events".into()))?;
    if spec.cutoff < lo || spec.cutoff > hi {
        return Err(Error::InvalidInput(format!(
            "cutoff {} is outside the data range [{lo}, {hi}]",
            spec.cutoff
        )));
    }
    let horizon_end = spec.cutoff + Duration::days(i64::from(spec.target_horizon_days));
    let mut observation: CustomerEvents = BTreeMap::new();
    let mut target: CustomerEvents = BTreeMap::new();
    for (customer, entry) in ledger.iter() {
        for ev in &entry.events {
            if ev.at < spec.cutoff {
                observation.entry(customer).or_default().push(ev.clone());
            } else if ev.at < horizon_end {
                target.entry(customer).or_default().push(ev.clone());
            }
        }
    }
    Ok((observation, target))
}

/// One customer's predictors and target count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub customer_id: u32,
    /// Whole days from the last observation purchase to the cutoff.
    pub latetime: u32,
    /// Whole days from the first observation purchase to the cutoff.
    pub earlytime: u32,
    /// Distinct invoices in the observation window.
    pub freq: u32,
    /// Distinct invoices in the recent window before the cutoff.
    pub freq_3m: u32,
    /// Distinct invoices in the target window.
    pub target: u32,
}

fn distinct_invoices<'a>(events: impl Iterator<Item = &'a PurchaseEvent>) -> u32 {
    let mut codes: Vec<&str> = events.map(|e| e.invoice.as_str()).collect();
    codes.sort_unstable();
    codes.dedup();
    codes.len() as u32
}

/// Builds one row per customer with at least one observation invoice.
/// Customers seen only in the target window are not represented.
pub fn featurize(
    observation: &CustomerEvents,
    target: &CustomerEvents,
    spec: &WindowSpec,
) -> Vec<FeatureRow> {
    let recent_start = spec.cutoff - Duration::days(i64::from(spec.recent_window_days));
    let mut rows = Vec::with_capacity(observation.len());
    for (&customer_id, events) in observation {
        if events.is_empty() {
            continue;
        }
        let first = events.iter().map(|e| e.at).min().expect("non-empty");
        let last = events.iter().map(|e| e.at).max().expect("non-empty");
        let latetime = (spec.cutoff - last).num_days() as u32;
        let earlytime = (spec.cutoff - first).num_days() as u32;
        let freq = distinct_invoices(events.iter());
        let freq_3m = distinct_invoices(events.iter().filter(|e| e.at >= recent_start));
        let target_count = target
            .get(&customer_id)
            .map(|evs| distinct_invoices(evs.iter()))
            .unwrap_or(0);
        rows.push(FeatureRow {
            customer_id,
            latetime,
            earlytime,
            freq,
            freq_3m,
            target: target_count,
        });
    }
    rows
}

/// Predictor matrix plus aligned targets, ids, and column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub features: Matrix,
    pub feature_names: Vec<String>,
    pub targets: Vec<f64>,
    pub customer_ids: Vec<u32>,
}

/// Fixed column order `[latetime, earlytime, freq, freq_3m]`; rows sorted by
/// ascending customer id so the matrix is deterministic regardless of input
/// order.
pub fn to_matrix(rows: &[FeatureRow]) -> Result<DesignMatrix> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no feature rows".into()));
    }
    let mut sorted: Vec<&FeatureRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.customer_id);
    let data: Vec<Vec<f64>> = sorted
        .iter()
        .map(|r| vec![f64::from(r.latetime), f64::from(r.earlytime), f64::from(r.freq), f64::from(r.freq_3m)])
        .collect();
    Ok(DesignMatrix {
        features: Matrix::from_rows(&data)?,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        targets: sorted.iter().map(|r| f64::from(r.target)).collect(),
        customer_ids: sorted.iter().map(|r| r.customer_id).collect(),
    })
}

pub fn write_feature_csv<W: io::Write>(rows: &[FeatureRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FEATURE_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.customer_id.to_string(),
            r.latetime.to_string(),
            r.earlytime.to_string(),
            r.freq.to_string(),
            r.freq_3m.to_string(),
            r.target.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: io::Read>(reader: R) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    for (i, expected) in FEATURE_CSV_HEADER.iter().enumerate() {
        match header.get(i) {
            Some(h) if h.trim().eq_ignore_ascii_case(expected) => {}
            _ => return Err(Error::MissingColumn((*expected).to_string())),
        }
    }
    let mut rows = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<u32> {
            record
                .get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::InvalidInput(format!("feature row {}: bad field {i}", idx + 1)))
        };
        rows.push(FeatureRow {
            customer_id: field(0)?,
            latetime: field(1)?,
            earlytime: field(2)?,
            freq: field(3)?,
            freq_3m: field(4)?,
            target: field(5)?,
        });
    }
    Ok(rows)
}

//! Analytic customer lifetime value.
//!
//! `clv = (average_sales x purchase_frequency / churn) x profit_margin`,
//! where average sales is revenue per order, purchase frequency is orders
//! per customer, retention is the fraction of customers with more than one
//! order, and churn is one minus retention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::CustomerLedger;

/// Aggregates the formula consumes. The profit margin has no default: it is
/// business context the caller must supply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClvInputs {
    pub total_sales: f64,
    pub total_order_number: u64,
    pub total_unique_customers: u64,
    pub customers_with_multiple_orders: u64,
    pub profit_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClvBreakdown {
    pub average_sales: f64,
    pub purchase_frequency: f64,
    pub retention_rate: f64,
    pub churn: f64,
    pub clv: f64,
}

/// Full churn (retention 0) is a valid input; only churn of exactly zero is
/// singular because the formula divides by it.
pub fn compute_clv(inputs: &ClvInputs) -> Result<ClvBreakdown> {
    if inputs.total_order_number == 0 || inputs.total_unique_customers == 0 {
        return Err(Error::InvalidInput(
            "CLV needs at least one order and one customer".into(),
        ));
    }
    if inputs.customers_with_multiple_orders > inputs.total_unique_customers {
        return Err(Error::InvalidInput(
            "repeat-customer count exceeds total customers".into(),
        ));
    }
    if !inputs.total_sales.is_finite() || !inputs.profit_margin.is_finite() {
        return Err(Error::NonFinite("CLV inputs".into()));
    }
    let average_sales = inputs.total_sales / inputs.total_order_number as f64;
    let purchase_frequency =
        inputs.total_order_number as f64 / inputs.total_unique_customers as f64;
    let retention_rate =
        inputs.customers_with_multiple_orders as f64 / inputs.total_unique_customers as f64;
    let churn = 1.0 - retention_rate;
    if churn == 0.0 {
        return Err(Error::ZeroChurn);
    }
    let clv = average_sales * purchase_frequency / churn * inputs.profit_margin;
    Ok(ClvBreakdown { average_sales, purchase_frequency, retention_rate, churn, clv })
}

/// Derives the formula inputs from a cleaned ledger: total revenue, distinct
/// invoices, customer count, and customers with more than one invoice.
pub fn clv_from_ledger(ledger: &CustomerLedger, profit_margin: f64) -> Result<ClvBreakdown> {
    if ledger.is_empty() {
        return Err(Error::EmptyInput("ledger has no customers".into()));
    }
    let mut total_sales = crate::money::Money::ZERO;
    let mut total_order_number = 0u64;
    let mut repeats = 0u64;
    for (_, entry) in ledger.iter() {
        total_sales += entry.revenue_sum;
        total_order_number += entry.invoice_count as u64;
        if entry.invoice_count > 1 {
            repeats += 1;
        }
    }
    compute_clv(&ClvInputs {
        total_sales: total_sales.to_f64(),
        total_order_number,
        total_unique_customers: ledger.len() as u64,
        customers_with_multiple_orders: repeats,
        profit_margin,
    })
}

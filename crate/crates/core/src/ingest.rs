//! Raw retail transaction ingestion.
//!
//! Parses the eight-column transaction CSV (Invoice, StockCode, Description,
//! Quantity, InvoiceDate, Price, Customer ID, Country), applies the cleaning
//! rules, and aggregates per-customer purchase ledgers. Cleaning never fails:
//! it filters rows and accounts for every one of them in a [`CleanReport`].

use std::collections::BTreeMap;
use std::io;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;

/// Accepted timestamp layouts, tried in order. The day-month-year form is the
/// dataset's native export format; ISO forms are accepted for interchange.
const DATETIME_FORMATS: [&str; 6] = [
    "%d-%m-%Y %H:%M",
    "%d-%m-%Y %H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
];

/// Format used when writing timestamps back out.
pub const OUTPUT_DATETIME_FORMAT: &str = "%d-%m-%Y %H:%M";

pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let t = s.trim();
    DATETIME_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(t, fmt).ok())
}

/// One line item exactly as read from the source file. Raw data may be dirty:
/// quantities and prices can be non-positive and the customer id missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub invoice: String,
    pub stock_code: String,
    pub description: Option<String>,
    pub quantity: i64,
    pub invoice_datetime: NaiveDateTime,
    pub unit_price: Money,
    pub customer_id: Option<u32>,
    pub country: String,
}

/// A line item that survived cleaning: positive quantity and price, an
/// identified customer, not a cancellation, and an exact revenue amount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub invoice: String,
    pub stock_code: String,
    pub description: Option<String>,
    pub quantity: i64,
    pub invoice_datetime: NaiveDateTime,
    pub unit_price: Money,
    pub customer_id: u32,
    pub country: String,
    pub revenue: Money,
}

/// A row that could not be parsed, with its 1-based data-row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub row: usize,
    pub reason: String,
}

/// Per-rule removal counts. `retained + all removals == input_rows` always.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub input_rows: usize,
    pub cancellations: usize,
    pub nonpositive_quantity: usize,
    pub nonpositive_price: usize,
    pub missing_customer: usize,
    pub unparseable: usize,
    pub retained: usize,
}

impl CleanReport {
    pub fn removed(&self) -> usize {
        self.cancellations
            + self.nonpositive_quantity
            + self.nonpositive_price
            + self.missing_customer
            + self.unparseable
    }

    pub fn is_accounted(&self) -> bool {
        self.retained + self.removed() == self.input_rows
    }

    /// Folds rows that already failed at the parse stage into the report.
    pub fn absorb_parse_errors(&mut self, n: usize) {
        self.input_rows += n;
        self.unparseable += n;
    }
}

/// Maps logical fields to header names in the source file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub invoice: String,
    pub stock_code: String,
    pub description: String,
    pub quantity: String,
    pub invoice_date: String,
    pub unit_price: String,
    pub customer_id: String,
    pub country: String,
}

impl Default for ColumnMap {
    fn default() -> ColumnMap {
        ColumnMap {
            invoice: "Invoice".into(),
            stock_code: "StockCode".into(),
            description: "Description".into(),
            quantity: "Quantity".into(),
            invoice_date: "InvoiceDate".into(),
            unit_price: "Price".into(),
            customer_id: "Customer ID".into(),
            country: "Country".into(),
        }
    }
}

struct ColumnIndices {
    invoice: usize,
    stock_code: usize,
    description: usize,
    quantity: usize,
    invoice_date: usize,
    unit_price: usize,
    customer_id: usize,
    country: usize,
}

impl ColumnIndices {
    fn resolve(header: &csv::StringRecord, map: &ColumnMap) -> Result<ColumnIndices> {
        let find = |name: &str| -> Result<usize> {
            header
                .iter()
                .position(|h| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        Ok(ColumnIndices {
            invoice: find(&map.invoice)?,
            stock_code: find(&map.stock_code)?,
            description: find(&map.description)?,
            quantity: find(&map.quantity)?,
            invoice_date: find(&map.invoice_date)?,
            unit_price: find(&map.unit_price)?,
            customer_id: find(&map.customer_id)?,
            country: find(&map.country)?,
        })
    }
}

/// Integer parse that also tolerates spreadsheet float renderings of whole
/// numbers, e.g. "13085.0".
fn parse_integral(s: &str) -> Option<i64> {
    let t = s.trim();
    if let Ok(v) = t.parse::<i64>() {
        return Some(v);
    }
    match t.split_once('.') {
        Some((whole, frac)) if !frac.is_empty() && frac.bytes().all(|b| b == b'0') => {
            whole.parse::<i64>().ok()
        }
        _ => None,
    }
}

/// Reads every row of a headered transaction CSV. Well-formed rows become
/// [`RawRecord`]s; malformed rows are reported with their index and reason,
/// never silently dropped. A header missing a required column is fatal.
pub fn parse_transactions<R: io::Read>(
    source: R,
    map: &ColumnMap,
) -> Result<(Vec<RawRecord>, Vec<RowError>)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let header = reader.headers()?.clone();
    let cols = ColumnIndices::resolve(&header, map)?;

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(RowError { row: row_no, reason: format!("malformed csv row: {e}") });
                continue;
            }
        };
        match parse_row(&row, &cols) {
            Ok(rec) => records.push(rec),
            Err(reason) => errors.push(RowError { row: row_no, reason }),
        }
    }
    Ok((records, errors))
}

fn parse_row(row: &csv::StringRecord, cols: &ColumnIndices) -> std::result::Result<RawRecord, String> {
    let field = |i: usize| row.get(i).unwrap_or("");

    let quantity_text = field(cols.quantity);
    let quantity = parse_integral(quantity_text)
        .ok_or_else(|| format!("unparseable quantity {quantity_text:?}"))?;

    let date_text = field(cols.invoice_date);
    let invoice_datetime =
        parse_datetime(date_text).ok_or_else(|| format!("unparseable timestamp {date_text:?}"))?;

    let price_text = field(cols.unit_price);
    let unit_price: Money = price_text
        .parse()
        .map_err(|_| format!("unparseable price {price_text:?}"))?;

    let customer_text = field(cols.customer_id).trim();
    let customer_id = if customer_text.is_empty() {
        None
    } else {
        let v = parse_integral(customer_text)
            .ok_or_else(|| format!("unparseable customer id {customer_text:?}"))?;
        let v = u32::try_from(v).map_err(|_| format!("customer id out of range: {v}"))?;
        Some(v)
    };

    let description = {
        let d = field(cols.description).trim();
        if d.is_empty() { None } else { Some(d.to_string()) }
    };

    Ok(RawRecord {
        invoice: field(cols.invoice).trim().to_string(),
        stock_code: field(cols.stock_code).trim().to_string(),
        description,
        quantity,
        invoice_datetime,
        unit_price,
        customer_id,
        country: field(cols.country).trim().to_string(),
    })
}

/// A cancellation is any record whose invoice code begins with 'C' or 'c'.
pub fn is_cancellation(invoice: &str) -> bool {
    invoice.as_bytes().first().is_some_and(|b| b.eq_ignore_ascii_case(&b'C'))
}

/// Applies the cleaning rules in a fixed precedence order (cancellation,
/// then quantity, then price, then missing customer) so each removed row is
/// counted under exactly one rule. Output order follows input order.
pub fn clean(records: &[RawRecord]) -> (Vec<Transaction>, CleanReport) {
    let mut report = CleanReport { input_rows: records.len(), ..CleanReport::default() };
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        if is_cancellation(&rec.invoice) {
            report.cancellations += 1;
            continue;
        }
        if rec.quantity <= 0 {
            report.nonpositive_quantity += 1;
            continue;
        }
        if !rec.unit_price.is_positive() {
            report.nonpositive_price += 1;
            continue;
        }
        let Some(customer_id) = rec.customer_id else {
            report.missing_customer += 1;
            continue;
        };
        out.push(Transaction {
            invoice: rec.invoice.clone(),
            stock_code: rec.stock_code.clone(),
            description: rec.description.clone(),
            quantity: rec.quantity,
            invoice_datetime: rec.invoice_datetime,
            unit_price: rec.unit_price,
            customer_id,
            country: rec.country.clone(),
            revenue: rec.unit_price.mul_count(rec.quantity),
        });
    }
    report.retained = out.len();
    debug_assert!(report.is_accounted());
    (out, report)
}

/// One purchase line item inside a customer's ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurchaseEvent {
    pub invoice: String,
    pub at: NaiveDateTime,
    pub revenue: Money,
}

/// A customer's chronologically sorted purchase events plus aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub events: Vec<PurchaseEvent>,
    /// Distinct invoice codes, i.e. orders rather than line items.
    pub invoice_count: usize,
    pub revenue_sum: Money,
}

/// Purchase histories keyed by customer id (iteration order is ascending id).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CustomerLedger {
    entries: BTreeMap<u32, LedgerEntry>,
}

impl CustomerLedger {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, customer_id: u32) -> Option<&LedgerEntry> {
        self.entries.get(&customer_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &LedgerEntry)> {
        self.entries.iter().map(|(id, e)| (*id, e))
    }

    /// Earliest and latest event timestamps across all customers.
    pub fn date_range(&self) -> Option<(NaiveDateTime, NaiveDateTime)> {
        let mut range: Option<(NaiveDateTime, NaiveDateTime)> = None;
        for entry in self.entries.values() {
            for ev in &entry.events {
                range = Some(match range {
                    None => (ev.at, ev.at),
                    Some((lo, hi)) => (lo.min(ev.at), hi.max(ev.at)),
                });
            }
        }
        range
    }
}

/// Groups cleaned transactions by customer. Invoice counts are distinct
/// invoice codes; revenue sums are exact decimal sums of member revenues.
pub fn build_ledger(transactions: &[Transaction]) -> CustomerLedger {
    let mut entries: BTreeMap<u32, LedgerEntry> = BTreeMap::new();
    for tx in transactions {
        let entry = entries.entry(tx.customer_id).or_insert_with(|| LedgerEntry {
            events: Vec::new(),
            invoice_count: 0,
            revenue_sum: Money::ZERO,
        });
        entry.events.push(PurchaseEvent {
            invoice: tx.invoice.clone(),
            at: tx.invoice_datetime,
            revenue: tx.revenue,
        });
        entry.revenue_sum += tx.revenue;
    }
    for entry in entries.values_mut() {
        entry.events.sort_by_key(|ev| ev.at);
        let mut invoices: Vec<&str> = entry.events.iter().map(|ev| ev.invoice.as_str()).collect();
        invoices.sort_unstable();
        invoices.dedup();
        entry.invoice_count = invoices.len();
    }
    CustomerLedger { entries }
}

/// Whole-dataset summary. Mean and median are over per-customer total
/// revenue; transactions are counted as cleaned line items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_customers: usize,
    pub n_transactions: usize,
    pub date_min: NaiveDateTime,
    pub date_max: NaiveDateTime,
    pub mean_customer_revenue: f64,
    pub median_customer_revenue: f64,
}

pub fn dataset_stats(ledger: &CustomerLedger, transactions: &[Transaction]) -> Result<DatasetStats> {
    if ledger.is_empty() || transactions.is_empty() {
        return Err(Error::EmptyInput("dataset statistics need at least one transaction".into()));
    }
    let (date_min, date_max) = ledger.date_range().expect("non-empty ledger has a date range");
    let mut revenues: Vec<Money> = ledger.iter().map(|(_, e)| e.revenue_sum).collect();
    revenues.sort_unstable();
    let n = revenues.len();
    let total: Money = revenues.iter().copied().sum();
    let median = if n % 2 == 1 {
        revenues[n / 2].to_f64()
    } else {
        (revenues[n / 2 - 1].to_f64() + revenues[n / 2].to_f64()) / 2.0
    };
    Ok(DatasetStats {
        n_customers: n,
        n_transactions: transactions.len(),
        date_min,
        date_max,
        mean_customer_revenue: total.to_f64() / n as f64,
        median_customer_revenue: median,
    })
}

/// Writes cleaned transactions back out as CSV with the added Revenue column.
pub fn write_cleaned_csv<W: io::Write>(transactions: &[Transaction], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "Invoice",
        "StockCode",
        "Description",
        "Quantity",
        "InvoiceDate",
        "Price",
        "Customer ID",
        "Country",
        "Revenue",
    ])?;
    for tx in transactions {
        w.write_record([
            tx.invoice.as_str(),
            tx.stock_code.as_str(),
            tx.description.as_deref().unwrap_or(""),
            &tx.quantity.to_string(),
            &tx.invoice_datetime.format(OUTPUT_DATETIME_FORMAT).to_string(),
            &tx.unit_price.to_string(),
            &tx.customer_id.to_string(),
            tx.country.as_str(),
            &tx.revenue.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

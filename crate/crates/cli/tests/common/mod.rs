//! Deterministic synthetic retail fixture.
//!
//! Generates a raw transaction CSV shaped like the real export: two years of
//! invoices, heavy-tailed per-customer activity, multi-line orders, and (when
//! dirty) cancellations, zero prices, anonymous rows, and one malformed
//! timestamp.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct FixtureOptions {
    pub n_customers: u32,
    pub seed: u64,
    pub dirty: bool,
}

impl Default for FixtureOptions {
    fn default() -> FixtureOptions {
        FixtureOptions { n_customers: 200, seed: 4711, dirty: true }
    }
}

const CATALOG: &[(&str, &str, &str)] = &[
    ("85048", "GLASS STAR FROSTED T-LIGHT HOLDER", "6.95"),
    ("79323P", "PINK CHERRY LIGHTS", "6.75"),
    ("22041", "RECORD FRAME 7 INCH SINGLE SIZE", "2.10"),
    ("21232", "STRAWBERRY CERAMIC TRINKET BOX", "1.25"),
    ("22064", "PINK DOUGHNUT TRINKET POT", "1.65"),
    ("21871", "SAVE THE PLANET MUG", "1.25"),
    ("84879", "ASSORTED COLOUR BIRD ORNAMENT", "1.69"),
    ("22423", "REGENCY CAKESTAND 3 TIER", "12.75"),
    ("47566", "PARTY BUNTING", "4.95"),
    ("20725", "LUNCH BAG RED RETROSPOT", "1.65"),
];

fn start_of_data() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2009, 12, 1).unwrap().and_hms_opt(7, 45, 0).unwrap()
}

fn format_row(
    out: &mut String,
    invoice: &str,
    line: (&str, &str, &str),
    quantity: i64,
    at: NaiveDateTime,
    customer: Option<u32>,
) {
    let (stock, description, price) = line;
    let customer_text = customer.map(|c| c.to_string()).unwrap_or_default();
    writeln!(
        out,
        "{invoice},{stock},\"{description}\",{quantity},{},{price},{customer_text},United Kingdom",
        at.format("%d-%m-%Y %H:%M"),
    )
    .expect("string write");
}

/// CSV text of the fixture, header included.
pub fn synthetic_retail_csv(opts: &FixtureOptions) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start = start_of_data();
    let span_minutes = 24 * 60 * 738; // two years and change, like the real export
    let mut out =
        String::from("Invoice,StockCode,Description,Quantity,InvoiceDate,Price,Customer ID,Country\n");
    let mut invoice_no: u32 = 489_434;

    for c in 0..opts.n_customers {
        let customer_id = 12_000 + c;
        // Heavy tail: most customers order a handful of times, a few order
        // dozens of times.
        let intensity = rng.gen::<f64>().powi(3);
        let n_invoices = 1 + (intensity * 55.0) as usize + rng.gen_range(0..3);
        // Each customer is active over a contiguous stretch.
        let active_start = rng.gen_range(0..span_minutes / 2);
        let active_len = rng.gen_range(span_minutes / 5..=span_minutes - active_start);
        let mut times: Vec<i64> = (0..n_invoices)
            .map(|_| active_start + rng.gen_range(0..=active_len))
            .collect();
        times.sort_unstable();
        for minutes in times {
            let at = start + Duration::minutes(minutes);
            invoice_no += 1;
            let invoice = invoice_no.to_string();
            let n_lines = rng.gen_range(1..=3);
            for _ in 0..n_lines {
                let line = CATALOG[rng.gen_range(0..CATALOG.len())];
                let quantity = rng.gen_range(1..=24);

                if opts.dirty && rng.gen_bool(0.02) {
                    // Cancellation pair: the original plus a C-prefixed
                    // reversal.
                    format_row(&mut out, &invoice, line, quantity, at, Some(customer_id));
                    format_row(
                        &mut out,
                        &format!("C{invoice}"),
                        line,
                        -quantity,
                        at + Duration::minutes(30),
                        Some(customer_id),
                    );
                    continue;
                }
                if opts.dirty && rng.gen_bool(0.01) {
                    // Stock adjustment with no price.
                    format_row(&mut out, &invoice, (line.0, "ADJUSTMENT", "0"), quantity, at, Some(customer_id));
                    continue;
                }
                if opts.dirty && rng.gen_bool(0.005) {
                    // Damaged stock write-off: negative quantity, ordinary
                    // invoice code.
                    format_row(&mut out, &invoice, (line.0, "DAMAGED", line.2), -quantity, at, Some(customer_id));
                    continue;
                }
                if opts.dirty && rng.gen_bool(0.02) {
                    // Anonymous purchase.
                    format_row(&mut out, &invoice, line, quantity, at, None);
                    continue;
                }
                format_row(&mut out, &invoice, line, quantity, at, Some(customer_id));
            }
        }
    }
    if opts.dirty {
        out.push_str("999999,85048,\"BROKEN EXPORT ROW\",1,2009-13-45 99:99,6.95,12000,United Kingdom\n");
    }
    out
}

/// Writes the fixture under `dir` and returns its path.
pub fn write_fixture(dir: &Path, name: &str, opts: &FixtureOptions) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, synthetic_retail_csv(opts)).expect("write fixture");
    path
}

pub fn clvkit_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clvkit"))
}

/// Runs the binary, returning (exit code, stdout, stderr).
pub fn run_clvkit(args: &[&str], cwd: &Path) -> (i32, String, String) {
    let output = clvkit_bin().args(args).current_dir(cwd).output().expect("spawn clvkit");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

/// Unique scratch directory for a test, cleaned up by the OS eventually.
pub fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("clvkit-test-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("create scratch dir");
    dir
}

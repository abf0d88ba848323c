//! Writes the bundled 12-asset price fixture.
//!
//! Returns follow a three factor model (equity, rates, commodity) with
//! idiosyncratic noise. TY1 loads negatively on the equity factor so it
//! hedges an equity-heavy book.
//!
//! Usage: cargo run -p icd-core --example synthetic_fixture -- [out.csv]

use std::fs::File;
use std::io::{BufWriter, Write};

use chrono::NaiveDate;
use icd_core::synthetic::{business_days, seeded_rng};
use rand::Rng;
use rand_distr::StandardNormal;

const ROWS: usize = 601;
const SEED: u64 = 1_234_567;

// ticker, start price, equity, rates, commodity, idiosyncratic (daily)
const ASSETS: [(&str, f64, f64, f64, f64, f64); 12] = [
    ("ES1", 4200.0, 0.0105, 0.0000, 0.0015, 0.0040),
    ("NQ1", 14500.0, 0.0130, 0.0000, 0.0010, 0.0060),
    ("VG1", 4300.0, 0.0095, 0.0000, 0.0015, 0.0055),
    ("NK1", 32000.0, 0.0090, 0.0000, 0.0010, 0.0080),
    ("TY1", 110.0, -0.0035, 0.0030, 0.0000, 0.0010),
    ("RX1", 132.0, -0.0010, 0.0028, 0.0000, 0.0015),
    ("US1", 120.0, -0.0030, 0.0050, 0.0000, 0.0020),
    ("JB1", 145.0, 0.0000, 0.0015, 0.0000, 0.0012),
    ("CL1", 78.0, 0.0040, 0.0000, 0.0180, 0.0100),
    ("GC1", 1950.0, -0.0010, 0.0010, 0.0040, 0.0090),
    ("NG1", 2.8, 0.0000, 0.0000, 0.0100, 0.0250),
    ("HG1", 3.9, 0.0050, 0.0000, 0.0080, 0.0100),
];

fn main() -> std::io::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/cli/fixtures/prices.csv".to_string());
    let mut rng = seeded_rng(SEED);
    let dates = business_days(NaiveDate::from_ymd_opt(2022, 1, 3).unwrap(), ROWS);

    let mut prices: Vec<f64> = ASSETS.iter().map(|a| a.1).collect();
    let mut file = BufWriter::new(File::create(&out)?);
    let header: Vec<&str> = ASSETS.iter().map(|a| a.0).collect();
    writeln!(file, "date,{}", header.join(","))?;

    for (t, date) in dates.iter().enumerate() {
        if t > 0 {
            let f: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            for (p, a) in prices.iter_mut().zip(ASSETS.iter()) {
                let z: f64 = rng.sample(StandardNormal);
                let r = 0.0002 + a.2 * f[0] + a.3 * f[1] + a.4 * f[2] + a.5 * z;
                *p *= 1.0 + r;
            }
        }
        let cells: Vec<String> = prices.iter().map(|p| format!("{p:.6}")).collect();
        writeln!(file, "{},{}", date.format("%Y-%m-%d"), cells.join(","))?;
    }
    file.flush()?;
    eprintln!("wrote {ROWS} rows to {out}");
    Ok(())
}

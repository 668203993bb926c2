//! Price CSV files: header `t,price`, times ascending and ending at 0.

use std::io::{Read, Write};

use twinmarket::PriceSeries;

use crate::error::{CliError, CliResult};

/// Parses `t,price` rows; diagnostics carry 1-based line numbers.
pub fn read_prices<R: Read>(reader: R, rho: f64, bond_base: f64) -> CliResult<PriceSeries> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| CliError::Input(format!("line 1: {e}")))?
        .clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "price" {
        return Err(CliError::Input(format!(
            "line 1: expected header `t,price`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut times = Vec::new();
    let mut prices = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Input(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let t: i64 = record[0].parse().map_err(|_| {
            CliError::Input(format!(
                "line {line}: time `{}` is not an integer",
                &record[0]
            ))
        })?;
        let price: f64 = record[1].parse().map_err(|_| {
            CliError::Input(format!(
                "line {line}: price `{}` is not a number",
                &record[1]
            ))
        })?;
        if let Some(&prev) = times.last() {
            if t != prev + 1 {
                return Err(CliError::Input(format!(
                    "line {line}: time {t} does not follow {prev}"
                )));
            }
        }
        times.push(t);
        prices.push(price);
    }
    Ok(PriceSeries::from_times(&times, prices, rho, bond_base)?)
}

pub fn read_prices_file(path: &str, rho: f64, bond_base: f64) -> CliResult<PriceSeries> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_prices(file, rho, bond_base).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{path}: {msg}")),
        other => other,
    })
}

pub fn write_prices<W: Write>(writer: W, prices: &PriceSeries) -> std::io::Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["t", "price"])?;
    for (t, p) in prices.times().zip(prices.prices()) {
        csv.write_record([t.to_string(), p.to_string()])?;
    }
    csv.flush()
}

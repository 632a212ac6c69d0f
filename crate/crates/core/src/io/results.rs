//! The per-trial and aggregate CSV files. Both always carry a header row;
//! floats are written in shortest round-trip form, so reading a file back
//! reproduces every value exactly.

use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{AggregateRow, TrialRecord};

pub const TRIAL_COLUMNS: [&str; 17] = [
    "method",
    "snr_db",
    "trial",
    "seed",
    "tau_true",
    "tau_est",
    "nu_true",
    "nu_est",
    "phi_true",
    "phi_est",
    "theta_true",
    "theta_est",
    "alpha_err_rel",
    "nmse_heff",
    "iters_s1",
    "iters_s2",
    "status",
];

pub const AGGREGATE_COLUMNS: [&str; 9] = [
    "method",
    "snr_db",
    "nmse_heff_db",
    "rmse_tau_norm",
    "rmse_nu_norm",
    "rmse_angle_rad",
    "rmse_alpha",
    "n_ok",
    "n_fail",
];

fn write_rows<W: Write, T: Serialize>(w: W, columns: &[&str], rows: &[T]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(columns)?;
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads rows after checking that every expected column is present.
fn read_rows<R: Read, T: DeserializeOwned>(r: R, columns: &[&str]) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader.headers()?.clone();
    if let Some(missing) = columns.iter().find(|c| !headers.iter().any(|h| h == **c)) {
        return Err(Error::Format(format!("missing column `{missing}`")));
    }
    reader.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_trials<W: Write>(w: W, rows: &[TrialRecord]) -> Result<()> {
    write_rows(w, &TRIAL_COLUMNS, rows)
}

pub fn write_aggregates<W: Write>(w: W, rows: &[AggregateRow]) -> Result<()> {
    write_rows(w, &AGGREGATE_COLUMNS, rows)
}

pub fn read_trials<R: Read>(r: R) -> Result<Vec<TrialRecord>> {
    read_rows(r, &TRIAL_COLUMNS)
}

pub fn read_aggregates<R: Read>(r: R) -> Result<Vec<AggregateRow>> {
    read_rows(r, &AGGREGATE_COLUMNS)
}

/// Header fields of a CSV file.
pub fn read_header<R: Read>(r: R) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_reader(r);
    Ok(reader.headers()?.iter().map(str::to_string).collect())
}

/// Appends rows to a per-trial file, writing the header first when the file
/// is new or empty. An existing file must have the per-trial header.
pub fn append_trials(path: &Path, rows: &[TrialRecord]) -> Result<()> {
    let existing = std::fs::metadata(path).map(|m| m.len()).unwrap_or(0);
    if existing > 0 {
        let header = read_header(std::fs::File::open(path)?)?;
        if header != TRIAL_COLUMNS {
            return Err(Error::Format(format!("{} does not have the per-trial header", path.display())));
        }
    }
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if existing == 0 {
        out.write_record(TRIAL_COLUMNS)?;
    }
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

//! The case-table file format: one CSV row per infected case.
//!
//! Columns: `case_id, exposure_time, infection_time, removal_time,
//! infection_group, removal_group, x, y`. An empty field or the literal `NA`
//! is a missing value. Times are written with Rust's shortest-round-trip
//! float formatting, so write -> read reproduces the records bit for bit.

use std::fs;
use std::path::Path;

use epitau::error::{Error, Result};
use epitau::model::CaseRecord;
use epitau::observe::dequantize;

use crate::args::IngestOpts;

pub const HEADER: [&str; 8] = [
    "case_id",
    "exposure_time",
    "infection_time",
    "removal_time",
    "infection_group",
    "removal_group",
    "x",
    "y",
];

fn missing(field: &str) -> bool {
    let t = field.trim();
    t.is_empty() || t == "NA"
}

fn parse_time(field: &str, row: usize, col: &str) -> Result<Option<f64>> {
    if missing(field) {
        return Ok(None);
    }
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("row {row}: {col} {:?} is not a number", field.trim())))?;
    if !v.is_finite() {
        return Err(Error::Data(format!("row {row}: {col} must be finite, got {v}")));
    }
    Ok(Some(v))
}

fn parse_group(field: &str) -> Option<String> {
    if missing(field) {
        None
    } else {
        Some(field.trim().to_string())
    }
}

/// Parse case-table text. Checks structure (header, field count, numbers,
/// paired coordinates, at least one endpoint); time *ordering* is checked by
/// [`ingest`] after any offsets, since raw day-resolution data may only
/// become ordered once they are applied.
pub fn parse_table(text: &str) -> Result<Vec<CaseRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read case-table header: {e}")))?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != HEADER {
        return Err(Error::Data(format!(
            "case-table header must be {:?}, got {:?}",
            HEADER.join(","),
            got.join(",")
        )));
    }
    let mut cases = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after the header line
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        if record.len() != HEADER.len() {
            return Err(Error::Data(format!(
                "row {row}: expected {} fields, got {}",
                HEADER.len(),
                record.len()
            )));
        }
        let id: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("row {row}: case_id {:?} is not an id", &record[0])))?;
        let exposure = parse_time(&record[1], row, "exposure_time")?;
        let infection = parse_time(&record[2], row, "infection_time")?;
        let removal = parse_time(&record[3], row, "removal_time")?;
        if infection.is_none() && removal.is_none() {
            return Err(Error::Data(format!(
                "row {row}: case {id} has neither an infection nor a removal time"
            )));
        }
        let location = match (parse_time(&record[6], row, "x")?, parse_time(&record[7], row, "y")?)
        {
            (Some(x), Some(y)) => Some([x, y]),
            (None, None) => None,
            _ => {
                return Err(Error::Data(format!(
                    "row {row}: case {id} has only one of the x, y coordinates"
                )))
            }
        };
        cases.push(CaseRecord {
            id,
            exposure,
            infection,
            removal,
            infection_group: parse_group(&record[4]),
            removal_group: parse_group(&record[5]),
            location,
        });
    }
    Ok(cases)
}

pub fn read_table(path: &Path) -> Result<Vec<CaseRecord>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse_table(&text)
}

/// Read a case table and apply the ingestion pipeline: time offsets (the
/// infection offset also moves exposures, keeping recorded incubation gaps),
/// then optional dequantization noise, then full record validation.
pub fn ingest(path: &Path, opts: &IngestOpts, seed: u64) -> Result<Vec<CaseRecord>> {
    let mut cases = read_table(path)?;
    if opts.infection_offset != 0.0 || opts.removal_offset != 0.0 {
        for c in &mut cases {
            c.exposure = c.exposure.map(|t| t + opts.infection_offset);
            c.infection = c.infection.map(|t| t + opts.infection_offset);
            c.removal = c.removal.map(|t| t + opts.removal_offset);
        }
    }
    match opts.dequantize_sd {
        Some(sd) => cases = dequantize(&cases, sd, seed)?,
        None => {
            for c in &cases {
                c.validate()?;
            }
        }
    }
    Ok(cases)
}

fn time_field(t: Option<f64>) -> String {
    t.map(|v| v.to_string()).unwrap_or_default()
}

pub fn table_to_string(cases: &[CaseRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(HEADER).expect("in-memory write");
    for c in cases {
        let (x, y) = match c.location {
            Some([x, y]) => (x.to_string(), y.to_string()),
            None => (String::new(), String::new()),
        };
        writer
            .write_record([
                c.id.to_string(),
                time_field(c.exposure),
                time_field(c.infection),
                time_field(c.removal),
                c.infection_group.clone().unwrap_or_default(),
                c.removal_group.clone().unwrap_or_default(),
                x,
                y,
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// CSV of `x,y` coordinate rows (never-infected locations for kernel
/// estimation).
pub fn read_locations(path: &Path) -> Result<Vec<[f64; 2]>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read location header: {e}")))?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != ["x", "y"] {
        return Err(Error::Data(format!("location header must be x,y, got {:?}", got.join(","))));
    }
    let mut points = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2;
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        let x = parse_time(&record[0], row, "x")?
            .ok_or_else(|| Error::Data(format!("row {row}: missing x")))?;
        let y = parse_time(&record[1], row, "y")?
            .ok_or_else(|| Error::Data(format!("row {row}: missing y")))?;
        points.push([x, y]);
    }
    Ok(points)
}

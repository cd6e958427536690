//! Sporadic CSV format.
//!
//! ```text
//! series_id,time,value_1,...,value_d,mask_1,...,mask_d
//! 0,0.1,0.52,,1,0
//! ```
//!
//! A header row is required. Mask cells are `0` or `1`; a value cell may be
//! empty only where its mask bit is `0`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::data::TimeSeries;
use crate::error::{Error, Result};

struct Row {
    line: usize,
    time: f64,
    values: Vec<f64>,
    mask: Vec<bool>,
}

/// Reads a sporadic CSV file.
pub fn load_sporadic_csv(path: impl AsRef<Path>) -> Result<Vec<TimeSeries>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_sporadic_csv(file)
}

/// Parses sporadic CSV from any reader. Rows are grouped by `series_id`
/// (ascending), then stably sorted by time. Error rows are reported as
/// 1-based line numbers, the header being line 1.
pub fn read_sporadic_csv(reader: impl Read) -> Result<Vec<TimeSeries>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| ingest(1, e.to_string()))?.clone();
    let d = check_header(&header)?;
    let mut groups: BTreeMap<u64, Vec<Row>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            ingest(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 + 2 * d {
            return Err(ingest(line, format!("expected {} fields, found {}", 2 + 2 * d, rec.len())));
        }
        let id: u64 = rec[0].parse().map_err(|_| ingest(line, format!("bad series_id `{}`", &rec[0])))?;
        let time: f64 = rec[1].parse().map_err(|_| ingest(line, format!("bad time `{}`", &rec[1])))?;
        if !time.is_finite() {
            return Err(ingest(line, "non-finite time".into()));
        }
        let mut values = vec![0.0; d];
        let mut mask = vec![false; d];
        for j in 0..d {
            mask[j] = match &rec[2 + d + j] {
                "1" => true,
                "0" => false,
                other => return Err(ingest(line, format!("mask_{} must be 0 or 1, found `{other}`", j + 1))),
            };
            let cell = &rec[2 + j];
            if cell.is_empty() {
                if mask[j] {
                    return Err(ingest(line, format!("mask_{} is set but value_{} is empty", j + 1, j + 1)));
                }
            } else {
                let v: f64 = cell.parse().map_err(|_| ingest(line, format!("bad value_{} `{cell}`", j + 1)))?;
                if mask[j] {
                    values[j] = v;
                }
            }
        }
        if !mask.iter().any(|&m| m) {
            return Err(ingest(line, "row has no observed dimension".into()));
        }
        groups.entry(id).or_default().push(Row { line, time, values, mask });
    }
    let mut out = Vec::with_capacity(groups.len());
    for (id, mut rows) in groups {
        rows.sort_by(|a, b| a.time.total_cmp(&b.time));
        for w in rows.windows(2) {
            if w[0].time == w[1].time {
                return Err(ingest(w[1].line, format!("duplicate time {} in series {id}", w[1].time)));
            }
        }
        let n = rows.len();
        let values = Array2::from_shape_fn((n, d), |(i, j)| rows[i].values[j]);
        let mask = Array2::from_shape_fn((n, d), |(i, j)| rows[i].mask[j]);
        let times = rows.iter().map(|r| r.time).collect();
        out.push(TimeSeries::new(id, times, values, mask).map_err(|e| match e {
            Error::Ingestion { row, msg } => ingest(rows[row].line, msg),
            other => other,
        })?);
    }
    Ok(out)
}

fn check_header(h: &csv::StringRecord) -> Result<usize> {
    if h.len() < 4 || !h.len().is_multiple_of(2) {
        return Err(ingest(1, format!("header has {} columns; expected series_id,time,value_1..d,mask_1..d", h.len())));
    }
    let d = (h.len() - 2) / 2;
    let mut want = vec!["series_id".to_string(), "time".to_string()];
    want.extend((1..=d).map(|j| format!("value_{j}")));
    want.extend((1..=d).map(|j| format!("mask_{j}")));
    for (got, want) in h.iter().zip(&want) {
        if got != want {
            return Err(ingest(1, format!("header column `{got}` should be `{want}`")));
        }
    }
    Ok(d)
}

fn ingest(row: usize, msg: String) -> Error {
    Error::Ingestion { row, msg }
}

/// Writes series in the sporadic CSV format; unobserved cells are empty.
pub fn write_sporadic_csv(path: impl AsRef<Path>, series: &[TimeSeries]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_sporadic(&mut w, series).map_err(|e| Error::io(path, e))
}

pub fn write_sporadic(w: &mut impl Write, series: &[TimeSeries]) -> std::io::Result<()> {
    let d = series.first().map_or(0, |s| s.dim());
    let mut header = vec!["series_id".to_string(), "time".to_string()];
    header.extend((1..=d).map(|j| format!("value_{j}")));
    header.extend((1..=d).map(|j| format!("mask_{j}")));
    writeln!(w, "{}", header.join(","))?;
    for s in series {
        for i in 0..s.len() {
            write!(w, "{},{}", s.id(), s.times()[i])?;
            for j in 0..d {
                if s.mask()[[i, j]] {
                    write!(w, ",{}", s.values()[[i, j]])?;
                } else {
                    write!(w, ",")?;
                }
            }
            for j in 0..d {
                write!(w, ",{}", u8::from(s.mask()[[i, j]]))?;
            }
            writeln!(w)?;
        }
    }
    w.flush()
}

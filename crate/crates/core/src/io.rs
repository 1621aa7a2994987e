//! CSV serialization of matrices and traces.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a read
//! after a write reproduces every bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::solver::{Trace, TraceRecord};

pub const TRACE_HEADER: [&str; 6] = ["k", "upper_obj", "hypergrad_norm", "est_err", "inner_grad_norm", "wall_s"];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Row-major matrix CSV without a header.
pub fn write_matrix<W: Write>(out: W, m: &Mat) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(input: R) -> Result<Mat> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("matrix entry `{s}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn save_matrix(path: &Path, m: &Mat) -> Result<()> {
    write_matrix(File::create(path)?, m)
}

pub fn load_matrix(path: &Path) -> Result<Mat> {
    read_matrix(File::open(path)?)
}

pub fn write_trace<W: Write>(out: W, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in &trace.records {
        w.write_record([
            r.k.to_string(),
            r.upper_obj.to_string(),
            r.hypergrad_norm.to_string(),
            r.est_err.map(|v| v.to_string()).unwrap_or_default(),
            r.inner_grad_norm.to_string(),
            r.wall_s.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the records of a trace CSV.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Parse(format!("unexpected trace header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("trace field `{s}`: {e}")));
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(TraceRecord {
                k: rec[0].parse().map_err(|e| Error::Parse(format!("trace index `{}`: {e}", &rec[0])))?,
                upper_obj: num(&rec[1])?,
                hypergrad_norm: num(&rec[2])?,
                est_err: if rec[3].is_empty() { None } else { Some(num(&rec[3])?) },
                inner_grad_norm: num(&rec[4])?,
                wall_s: num(&rec[5])?,
            })
        })
        .collect()
}

pub fn save_trace(path: &Path, trace: &Trace) -> Result<()> {
    write_trace(File::create(path)?, trace)
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    read_trace(File::open(path)?)
}

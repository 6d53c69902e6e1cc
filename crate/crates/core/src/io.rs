//! Headerless CSV for curve samples and kernels.
//!
//! Curve files hold the grid in the first row and one curve per following row.
//! Kernel files hold the grid in the first row and then `P` rows of kernel
//! values `K(t_q, s_p)`, one row per output point. Values are written in the
//! shortest form that parses back to the same `f64`.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::curves::{FunctionalSample, Grid};
use crate::error::{Error, Result};
use crate::operators::KernelOperator;

fn read_rows(reader: impl Read) -> Result<Vec<Vec<f64>>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, record) in csv.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("row {}, column {}: `{field}` is not a number", line + 1, col + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("file is empty; the first row must hold the grid".into()));
    }
    Ok(rows)
}

fn write_rows<'a>(writer: impl Write, rows: impl Iterator<Item = &'a [f64]>) -> Result<()> {
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in rows {
        csv.write_record(row.iter().map(|v| v.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}

/// Reads a curve sample.
pub fn read_curves(reader: impl Read) -> Result<FunctionalSample> {
    let mut rows = read_rows(reader)?;
    let grid = Arc::new(Grid::new(rows.remove(0))?);
    FunctionalSample::from_rows(grid, &rows)
}

pub fn write_curves(writer: impl Write, sample: &FunctionalSample) -> Result<()> {
    let m = sample.matrix();
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    write_rows(
        writer,
        std::iter::once(sample.grid().points()).chain(rows.iter().map(Vec::as_slice)),
    )
}

/// Reads a kernel on a single grid.
pub fn read_kernel(reader: impl Read) -> Result<KernelOperator> {
    let mut rows = read_rows(reader)?;
    let grid = Arc::new(Grid::new(rows.remove(0))?);
    let p = grid.len();
    if rows.len() != p {
        return Err(Error::Dimension(format!("kernel has {} rows on a {p}-point grid", rows.len())));
    }
    if let Some(q) = rows.iter().position(|r| r.len() != p) {
        return Err(Error::Dimension(format!(
            "kernel row {q} has {} values on a {p}-point grid",
            rows[q].len()
        )));
    }
    KernelOperator::square(grid, DMatrix::from_fn(p, p, |q, s| rows[q][s]))
}

pub fn write_kernel(writer: impl Write, op: &KernelOperator) -> Result<()> {
    if !op.is_square() {
        return Err(Error::Dimension("kernel CSV needs identical input and output grids".into()));
    }
    let k = op.kernel();
    let rows: Vec<Vec<f64>> = (0..k.nrows()).map(|q| k.row(q).iter().copied().collect()).collect();
    write_rows(
        writer,
        std::iter::once(op.input_grid().points()).chain(rows.iter().map(Vec::as_slice)),
    )
}

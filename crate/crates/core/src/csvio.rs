//! CSV exchange formats. Header strings are part of the file contract.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::format_sig9;
use crate::scenarios::SimRecord;

pub const SIM_HEADER: [&str; 5] = ["time_s", "indent_mm", "force_n", "voltage_v", "output_v"];
pub const SWEEP_HEADER: [&str; 2] = ["distance_mm", "voltage_v"];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// One row per sample, every value to nine significant digits.
pub fn write_sim_record<W: Write>(rec: &SimRecord, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SIM_HEADER)?;
    let cols = [
        &rec.time.samples,
        &rec.indent.samples,
        &rec.force.samples,
        &rec.voltage.samples,
        &rec.output.samples,
    ];
    for i in 0..rec.len() {
        out.write_record(cols.iter().map(|c| format_sig9(c[i])))?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_sweep<W: Write>(points: &[(f64, f64)], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SWEEP_HEADER)?;
    for &(d, v) in points {
        out.write_record([format_sig9(d), format_sig9(v)])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Numeric table with the given header, nine significant digits per value.
pub fn write_table<W, R>(header: &[&str], rows: impl IntoIterator<Item = R>, w: W) -> Result<()>
where
    W: Write,
    R: AsRef<[f64]>,
{
    let mut out = writer(w);
    out.write_record(header)?;
    for r in rows {
        out.write_record(r.as_ref().iter().map(|v| format_sig9(*v)))?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads the named numeric columns, in the order requested.
pub fn read_columns_from<R: Read>(r: R, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = rdr.headers()?.clone();
    let idx = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| Error::Data(format!("missing column `{n}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| {
                Error::Data(format!(
                    "row {}: column `{}`: `{field}` is not a number",
                    row + 2,
                    names[c]
                ))
            })?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

/// As [`read_columns_from`]; malformed content is reported as an I/O error
/// on `path`.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    read_columns_from(open(path)?, names).map_err(|e| match e {
        Error::Data(msg) => invalid(path, msg),
        Error::Csv(c) => invalid(path, c.to_string()),
        other => other,
    })
}

fn invalid(path: &Path, msg: String) -> Error {
    Error::io(
        path,
        std::io::Error::new(std::io::ErrorKind::InvalidData, msg),
    )
}

/// Distance–voltage sweep; distances must increase strictly.
pub fn read_sweep(path: &Path) -> Result<Vec<(f64, f64)>> {
    let cols = read_columns(path, &SWEEP_HEADER)?;
    let pts: Vec<(f64, f64)> = cols[0]
        .iter()
        .copied()
        .zip(cols[1].iter().copied())
        .collect();
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(invalid(path, "distance_mm must increase strictly".into()));
    }
    Ok(pts)
}

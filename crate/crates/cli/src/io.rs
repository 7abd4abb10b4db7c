//! Dataset CSV reading and writing.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use kernclust::numeric::fmt_f64;
use kernclust::Partition;
use ndarray::Array2;

use crate::error::CliError;

/// Points and optional planted labels read from a dataset CSV.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Array2<f64>,
    pub labels: Option<Partition>,
}

/// Reads a CSV with header `x1,...,xd` and an optional trailing `label`
/// column. Labels may be any integers; they are renumbered in sorted order.
pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let err = |msg: String| CliError::input(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let header = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    let has_label = header.iter().next_back() == Some("label");
    let d = header.len() - usize::from(has_label);
    if d == 0 {
        return Err(err("no coordinate columns".into()));
    }
    for (i, name) in header.iter().take(d).enumerate() {
        if name != format!("x{}", i + 1) {
            return Err(err(format!("expected column `x{}`, found `{name}`", i + 1)));
        }
    }
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let row = line + 2;
        for (j, field) in record.iter().take(d).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                err(format!(
                    "row {row}, column {}: `{field}` is not a number",
                    j + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(err(format!(
                    "row {row}, column {}: non-finite value",
                    j + 1
                )));
            }
            values.push(v);
        }
        if has_label {
            let field = &record[d];
            let l: i64 = field
                .parse()
                .map_err(|_| err(format!("row {row}: label `{field}` is not an integer")))?;
            raw_labels.push(l);
        }
    }
    let n = values.len() / d;
    if n == 0 {
        return Err(err("no data rows".into()));
    }
    let points = Array2::from_shape_vec((n, d), values).expect("row lengths checked by csv");
    let labels = if has_label {
        let mut ids = BTreeMap::new();
        for &l in &raw_labels {
            let next = ids.len();
            ids.entry(l).or_insert(next);
        }
        // Renumber in sorted label order rather than first appearance.
        for (i, v) in ids.values_mut().enumerate() {
            *v = i;
        }
        let k = ids.len();
        Some(
            Partition::new(raw_labels.iter().map(|l| ids[l]).collect(), k)
                .map_err(|e| err(e.to_string()))?,
        )
    } else {
        None
    };
    Ok(Dataset { points, labels })
}

/// Writer for `--out`, or stdout when no path was given.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| CliError::input(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

pub fn io_error(e: io::Error) -> CliError {
    CliError::input(format!("write failed: {e}"))
}

/// Writes a dataset in the input format, labels 1-based.
pub fn write_dataset(
    out: &mut dyn Write,
    points: &Array2<f64>,
    labels: Option<&Partition>,
) -> io::Result<()> {
    let mut header: Vec<String> = (1..=points.ncols()).map(|j| format!("x{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, row) in points.rows().into_iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        if let Some(p) = labels {
            fields.push((p.label(i) + 1).to_string());
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

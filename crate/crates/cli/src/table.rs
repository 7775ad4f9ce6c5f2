//! Numeric CSV files: one header row, `.` decimal point, 17 significant
//! digits on output.

use std::collections::HashMap;
use std::path::Path;

use crate::error::CliError;

/// Columns of a numeric CSV file, by header name.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    columns: HashMap<String, Vec<f64>>,
    pub n_rows: usize,
}

impl Table {
    pub fn has(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64], CliError> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| CliError::Schema(format!("missing column `{name}` (found: {})", self.headers.join(", "))))
    }

    pub fn optional(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    /// Fails naming the first absent column.
    pub fn require(&self, names: &[&str]) -> Result<(), CliError> {
        names.iter().try_for_each(|n| self.column(n).map(|_| ()))
    }
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_table(&text).map_err(|e| match e {
        CliError::Schema(m) => CliError::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_table(text: &str) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Schema(format!("bad header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(CliError::Schema("file is empty".into()));
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Schema(format!("row {}: {e}", i + 1)))?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Schema(format!(
                    "row {}, column `{}`: `{field}` is not a number",
                    i + 1,
                    headers[j]
                ))
            })?;
            cols[j].push(v);
        }
    }
    let n_rows = cols.first().map_or(0, Vec::len);
    if n_rows == 0 {
        return Err(CliError::Schema("no data rows".into()));
    }
    let mut columns = HashMap::new();
    for (h, c) in headers.iter().zip(cols) {
        if columns.insert(h.clone(), c).is_some() {
            return Err(CliError::Schema(format!("duplicate column `{h}`")));
        }
    }
    Ok(Table {
        headers,
        columns,
        n_rows,
    })
}

/// Writes `columns` (all the same length) under `headers`.
pub fn write_table(path: &Path, headers: &[&str], columns: &[&[f64]]) -> Result<(), CliError> {
    debug_assert_eq!(headers.len(), columns.len());
    let mut w =
        csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(headers).map_err(io)?;
    let n = columns.first().map_or(0, |c| c.len());
    for i in 0..n {
        w.write_record(columns.iter().map(|c| format!("{:.16e}", c[i])))
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

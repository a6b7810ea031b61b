use std::io::Write;
use std::path::Path;

use super::{DataError, TimeSeries};

/// Reads a headered, comma-separated file. Rows are kept in file order; any
/// column not named (e.g. a timestamp) is ignored. Row numbers in errors are
/// 1-based data rows.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    exogenous_columns: &[&str],
) -> Result<TimeSeries, DataError> {
    let path = path.as_ref();
    let csv_err = |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::Schema {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let mut names = vec![target_column];
    names.extend_from_slice(exogenous_columns);
    let idx: Vec<usize> = names.iter().map(|n| find(n)).collect::<Result<_, _>>()?;

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = row_no + 1;
        for (c, &i) in idx.iter().enumerate() {
            let cell = record.get(i).unwrap_or("");
            if cell.is_empty() {
                return Err(DataError::Gap {
                    path: path.to_path_buf(),
                    row,
                    column: names[c].to_string(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                path: path.to_path_buf(),
                row,
                column: names[c].to_string(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: names[c].to_string(),
                    value: cell.to_string(),
                });
            }
            columns[c].push(v);
        }
    }
    let mut columns = columns.into_iter();
    let values = columns.next().unwrap_or_default();
    let exogenous = exogenous_columns
        .iter()
        .map(|n| n.to_string())
        .zip(columns)
        .collect();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(TimeSeries {
        name,
        frequency: String::new(),
        values,
        exogenous,
    })
}

/// Writes `t,<target>[,<exog>...]` rows with `t` as the row index scaled by
/// `spacing`. Values use shortest round-trip formatting, so output is
/// byte-stable.
pub fn write_series_csv(
    out: &mut impl Write,
    series: &TimeSeries,
    target_name: &str,
    spacing: f64,
) -> std::io::Result<()> {
    write!(out, "t,{target_name}")?;
    for (n, _) in &series.exogenous {
        write!(out, ",{n}")?;
    }
    writeln!(out)?;
    for i in 0..series.len() {
        write!(out, "{},{}", i as f64 * spacing, series.values[i])?;
        for (_, v) in &series.exogenous {
            write!(out, ",{}", v[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

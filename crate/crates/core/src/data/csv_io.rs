use std::path::Path;

use super::{Column, DataError, Dataset};

/// Reads a headed CSV file. A column is numeric when every non-empty cell
/// parses as a finite real number; anything else is categorical. Empty
/// cells become missing.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset, DataError> {
    load_csv_with(path, target_column, &[])
}

/// Like [`load_csv`], but columns named in `force_categorical` are kept
/// categorical even when they parse as numbers.
pub fn load_csv_with(
    path: impl AsRef<Path>,
    target_column: &str,
    force_categorical: &[String],
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| DataError::MissingTargetColumn(target_column.to_string()))?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record?;
        for (i, cells) in raw.iter_mut().enumerate() {
            cells.push(record.get(i).unwrap_or("").to_string());
        }
    }
    let n_rows = raw[target_idx].len();
    if n_rows == 0 {
        return Err(DataError::EmptyDataset);
    }

    let mut target = Vec::with_capacity(n_rows);
    for (row, label) in raw[target_idx].iter().enumerate() {
        if label.is_empty() {
            return Err(DataError::TargetHasMissing(row));
        }
        target.push(label.clone());
    }

    let mut columns = Vec::with_capacity(header.len() - 1);
    for (i, (name, cells)) in header.iter().zip(raw).enumerate() {
        if i == target_idx {
            continue;
        }
        let forced = force_categorical.iter().any(|c| c == name);
        columns.push(infer_column(name, cells, forced));
    }
    Dataset::new(columns, target_column, target)
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn infer_column(name: &str, cells: Vec<String>, force_categorical: bool) -> Column {
    let numeric = !force_categorical
        && cells
            .iter()
            .all(|c| c.is_empty() || parse_finite(c).is_some());
    if numeric {
        Column::numeric(
            name,
            cells
                .iter()
                .map(|c| if c.is_empty() { None } else { parse_finite(c) })
                .collect(),
        )
    } else {
        Column::categorical(
            name,
            cells
                .into_iter()
                .map(|c| if c.is_empty() { None } else { Some(c) })
                .collect(),
        )
    }
}

//! CSV ingestion and emission for the canonical 12-feature schema.
//!
//! Input header: the canonical feature names (case-insensitive, any order),
//! optionally followed by `wqi` and `label`. Empty cells are missing values.
//! Index values and class labels are always recomputed from the features
//! under the active standards, so stored `wqi`/`label` columns are advisory
//! output, never trusted input.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::data::{Dataset, StandardsTable, WaterSample, FEATURE_NAMES};
use crate::error::{Error, Result};

/// Parsed rows before cleaning: per row, one optional value per canonical
/// feature.
#[derive(Debug, Clone)]
pub struct RawTable {
    /// (1-based file line, values in canonical feature order)
    pub rows: Vec<(usize, [Option<f64>; 12])>,
    pub warnings: Vec<String>,
}

/// Loads the canonical CSV. Missing required columns and unparseable cells
/// are hard errors; unknown extra columns are ignored with a warning.
pub fn load_csv(path: impl AsRef<Path>) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let lower: Vec<String> = headers
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();

    let mut feature_cols = [usize::MAX; 12];
    for (i, name) in FEATURE_NAMES.iter().enumerate() {
        match lower.iter().position(|h| h == name) {
            Some(col) => feature_cols[i] = col,
            None => return Err(Error::MissingColumn((*name).into())),
        }
    }
    let mut warnings = Vec::new();
    for (col, h) in lower.iter().enumerate() {
        let known = FEATURE_NAMES.contains(&h.as_str()) || h == "wqi" || h == "label";
        if !known {
            warnings.push(format!(
                "ignoring unknown column `{}` (column {})",
                headers[col].trim(),
                col + 1
            ));
        }
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut values = [None; 12];
        for (i, &col) in feature_cols.iter().enumerate() {
            let cell = record.get(col).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let parsed: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!(
                    "cell `{cell}` in column `{}` is not a number",
                    FEATURE_NAMES[i]
                ),
            })?;
            values[i] = Some(parsed);
        }
        rows.push((line, values));
    }
    Ok(RawTable { rows, warnings })
}

#[derive(Debug, Clone)]
pub struct CleanReport {
    pub samples: Vec<WaterSample>,
    pub dropped_rows: usize,
    pub imputed_cells: usize,
    pub warnings: Vec<String>,
}

/// Drops rows with more than half their fields missing, then fills the
/// remaining holes with per-column medians of the surviving values.
pub fn clean_impute(table: &RawTable) -> Result<CleanReport> {
    let keep: Vec<&(usize, [Option<f64>; 12])> = table
        .rows
        .iter()
        .filter(|(_, vals)| vals.iter().filter(|v| v.is_none()).count() * 2 <= 12)
        .collect();
    let dropped_rows = table.rows.len() - keep.len();
    if keep.is_empty() {
        return Err(Error::EmptyInput(format!(
            "all {} rows were dropped for missing more than half their fields",
            table.rows.len()
        )));
    }

    let mut medians = [0.0; 12];
    for (i, median) in medians.iter_mut().enumerate() {
        let mut col: Vec<f64> = keep.iter().filter_map(|(_, vals)| vals[i]).collect();
        if col.is_empty() {
            return Err(Error::InsufficientData(format!(
                "column `{}` has no values to impute from",
                FEATURE_NAMES[i]
            )));
        }
        col.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let mid = col.len() / 2;
        *median = if col.len() % 2 == 1 {
            col[mid]
        } else {
            0.5 * (col[mid - 1] + col[mid])
        };
    }

    let mut imputed_cells = 0;
    let mut samples = Vec::with_capacity(keep.len());
    for (_, vals) in keep {
        let mut arr = [0.0; 12];
        for i in 0..12 {
            arr[i] = match vals[i] {
                Some(v) => v,
                None => {
                    imputed_cells += 1;
                    medians[i]
                }
            };
        }
        samples.push(WaterSample::from_array(arr));
    }

    let mut warnings = table.warnings.clone();
    if dropped_rows > 0 {
        warnings.push(format!(
            "dropped {dropped_rows} rows with more than half their fields missing"
        ));
    }
    if imputed_cells > 0 {
        warnings.push(format!(
            "imputed {imputed_cells} missing cells with column medians"
        ));
    }
    Ok(CleanReport {
        samples,
        dropped_rows,
        imputed_cells,
        warnings,
    })
}

/// Full ingestion pipeline: parse, clean, impute, then recompute WQI and
/// labels under the given standards and thresholds.
pub fn load_dataset(
    path: impl AsRef<Path>,
    standards: &StandardsTable,
    thresholds: &[f64; 4],
) -> Result<(Dataset, Vec<String>)> {
    let table = load_csv(path)?;
    let report = clean_impute(&table)?;
    let dataset = Dataset::from_samples(report.samples, standards, thresholds)?;
    Ok((dataset, report.warnings))
}

/// Writes the canonical CSV including the computed `wqi` and `label`
/// columns. Float formatting is shortest-round-trip, so identical datasets
/// produce byte-identical files.
pub fn write_dataset_csv(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&FEATURE_NAMES.join(","));
    out.push_str(",wqi,label\n");
    for (i, sample) in dataset.samples.iter().enumerate() {
        let arr = sample.as_array();
        for (j, v) in arr.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v}"));
        }
        out.push_str(&format!(",{},{}\n", dataset.wqi[i], dataset.labels[i]));
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{DidError, Result};

use super::PanelDataset;

/// Which CSV columns hold the pre-period outcome, the post-period outcome and
/// the treatment indicator. Every other column becomes a covariate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub y0: String,
    pub y1: String,
    pub d: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap { y0: "y0".into(), y1: "y1".into(), d: "d".into() }
    }
}

pub fn load_csv(path: impl AsRef<Path>, map: &ColumnMap) -> Result<PanelDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DidError::io(path, e))?;
    read_csv(file, map, Some(path))
}

pub fn read_csv<R: Read>(reader: R, map: &ColumnMap, path: Option<&Path>) -> Result<PanelDataset> {
    let origin = || path.map(Path::to_path_buf).unwrap_or_else(|| "<csv>".into());
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| DidError::Format { path: origin(), message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();

    let locate = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| DidError::MissingColumn {
            column: name.to_string(),
            path: path.map(Path::to_path_buf),
        })
    };
    let (iy0, iy1, id) = (locate(&map.y0)?, locate(&map.y1)?, locate(&map.d)?);

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    let mut d = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| DidError::Format { path: origin(), message: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(DidError::Format {
                path: origin(),
                message: format!("data row {row} has {} fields, header has {}", record.len(), headers.len()),
            });
        }
        for (col, field) in record.iter().enumerate() {
            if col == id {
                d.push(match field.parse::<f64>() {
                    Ok(v) if v == 0.0 => false,
                    Ok(v) if v == 1.0 => true,
                    _ => {
                        return Err(DidError::NonBinaryTreatment {
                            column: headers[col].clone(),
                            row,
                            value: field.to_string(),
                        })
                    }
                });
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => columns[col].push(v),
                _ => {
                    return Err(DidError::NonFiniteValue {
                        column: headers[col].clone(),
                        row,
                        value: field.to_string(),
                    })
                }
            }
        }
    }

    let y0 = std::mem::take(&mut columns[iy0]);
    let y1 = std::mem::take(&mut columns[iy1]);
    let covariates = headers
        .iter()
        .zip(columns)
        .enumerate()
        .filter(|(i, _)| *i != iy0 && *i != iy1 && *i != id)
        .map(|(_, (h, c))| (h.clone(), c))
        .collect();
    PanelDataset::new(y0, y1, d, covariates)
}

/// Writes `y0,y1,d,<covariates...>` using shortest round-trip float formatting,
/// so [`read_csv`] reproduces the dataset bit for bit.
pub fn write_csv<W: Write>(ds: &PanelDataset, writer: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["y0".to_string(), "y1".to_string(), "d".to_string()];
    header.extend(ds.covariate_names().map(str::to_string));
    wtr.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec = vec![
            ds.y0()[i].to_string(),
            ds.y1()[i].to_string(),
            if ds.d()[i] { "1".into() } else { "0".into() },
        ];
        rec.extend(ds.covariates().iter().map(|(_, c)| c[i].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()
}

//! Wide-format CSV ingestion and export.
//!
//! Header is `id,arm,y1,...,yJ`; `arm` is `ref` or `act`; an empty cell is a
//! missing value. Numbers are written with the shortest representation that
//! parses back to the same `f64`, so read → write → read is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::{validate_dataset, RawDataset, RawSubject, TrialDataset};
use crate::error::{Error, Result};

/// Parse a wide CSV into an unvalidated dataset.
///
/// Row numbers in errors are 1-based file lines (the header is line 1).
pub fn read_raw<R: Read>(reader: R) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "arm" {
        return Err(Error::Parse {
            row: 1,
            message: "header must be `id,arm,y1,...,yJ`".into(),
        });
    }
    let n_visits = headers.len() - 2;
    for (t, h) in headers.iter().skip(2).enumerate() {
        if h != format!("y{}", t + 1) {
            return Err(Error::Parse {
                row: 1,
                message: format!("expected column `y{}`, found `{h}`", t + 1),
            });
        }
    }
    let mut subjects = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let mut values = Vec::with_capacity(n_visits);
        for (t, cell) in rec.iter().skip(2).enumerate() {
            if cell.is_empty() {
                values.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(Some(v)),
                _ => {
                    return Err(Error::Parse {
                        row,
                        message: format!("y{} is not a finite number: `{cell}`", t + 1),
                    })
                }
            }
        }
        subjects.push(RawSubject {
            id: rec[0].to_string(),
            arm_label: rec[1].to_string(),
            values,
        });
    }
    Ok(RawDataset { n_visits, subjects })
}

pub fn read_dataset<R: Read>(reader: R) -> Result<TrialDataset> {
    validate_dataset(read_raw(reader)?)
}

pub fn read_dataset_path(path: &Path) -> Result<TrialDataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(std::io::BufReader::new(f))
}

pub fn write_dataset<W: Write>(d: &TrialDataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header = vec!["id".to_string(), "arm".to_string()];
    header.extend((1..=d.n_visits()).map(|t| format!("y{t}")));
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    let mut rec = Vec::with_capacity(d.n_visits() + 2);
    for i in 0..d.n_subjects() {
        rec.clear();
        rec.push(d.id(i).to_string());
        rec.push(d.arm(i).label().to_string());
        rec.extend(d.row(i).iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_path(d: &TrialDataset, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_dataset(d, std::io::BufWriter::new(f))
}

//! Plain CSV matrix files: one matrix row per line, no header, `.` decimals.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{NbmfError, Result};
use crate::model::{DenseView, Matrix, NonnegMatrix};

pub fn parse_matrix<R: Read>(reader: R) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                let v: f64 = field.parse().map_err(|_| NbmfError::Parse {
                    line: line + 1,
                    message: format!("'{field}' is not a number"),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(NbmfError::Parse {
                        line: line + 1,
                        message: format!("non-finite value '{field}'"),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(NbmfError::Parse {
                    line: line + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(NbmfError::Parse {
            line: 1,
            message: "matrix file is empty".into(),
        });
    }
    Matrix::from_rows(&rows)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    parse_matrix(File::open(path)?)
}

pub fn read_nonneg_matrix(path: &Path) -> Result<NonnegMatrix> {
    NonnegMatrix::try_from(read_matrix(path)?)
}

pub fn format_matrix<M: DenseView + ?Sized>(m: &M) -> String {
    let (rows, cols) = m.shape();
    let mut out = String::new();
    for i in 0..rows {
        for j in 0..cols {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&m.at(i, j).to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix<M: DenseView + ?Sized>(path: &Path, m: &M) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(format_matrix(m).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows() {
        let m = parse_matrix("1,2.5\n0,3\n".as_bytes()).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m.get(0, 1), 2.5);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(parse_matrix("1,NaN\n".as_bytes()).is_err());
        assert!(parse_matrix("inf,1\n".as_bytes()).is_err());
    }

    #[test]
    fn rejects_ragged_and_empty() {
        assert!(matches!(
            parse_matrix("1,2\n3\n".as_bytes()),
            Err(NbmfError::Parse { .. }) | Err(NbmfError::Csv(_))
        ));
        assert!(parse_matrix("".as_bytes()).is_err());
    }

    #[test]
    fn nonneg_reader_rejects_negative() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, "1,-2\n").unwrap();
        assert!(read_nonneg_matrix(&p).is_err());
        assert!(read_matrix(&p).is_ok());
    }

    #[test]
    fn write_then_read_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = Matrix::new(2, 2, vec![0.1, 1.0 / 3.0, 1e-300, 12345.678]).unwrap();
        write_matrix(&p, &m).unwrap();
        assert_eq!(read_matrix(&p).unwrap(), m);
    }
}

//! CSV input with optional header detection and atomic file output.

use std::io::Write;
use std::path::Path;

use gtm_core::Matrix;

use crate::error::{CliError, CliResult};

/// Raw CSV contents; `header` is set when the first row is not numeric.
#[derive(Clone, Debug)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub records: Vec<Vec<String>>,
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(file);
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let header = match records.first() {
        Some(first) if first.iter().any(|c| parse_cell(c).is_none()) => Some(records.remove(0)),
        _ => None,
    };
    Ok(Table { header, records })
}

impl Table {
    pub fn width(&self) -> usize {
        self.header.as_ref().or(self.records.first()).map_or(0, Vec::len)
    }

    /// Resolves a 1-based index or a header name to a 0-based column.
    pub fn column_index(&self, spec: &str) -> CliResult<usize> {
        if let Ok(i) = spec.parse::<usize>() {
            if i == 0 || i > self.width() {
                return Err(CliError::Usage(format!("column {i} is out of range 1..={}", self.width())));
            }
            return Ok(i - 1);
        }
        self.header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == spec))
            .ok_or_else(|| CliError::Usage(format!("no column named `{spec}`")))
    }

    /// Columns kept after dropping `drop`, in order.
    pub fn kept_columns(&self, drop: &[String]) -> CliResult<Vec<usize>> {
        let dropped = drop.iter().map(|d| self.column_index(d)).collect::<CliResult<Vec<_>>>()?;
        Ok((0..self.width()).filter(|c| !dropped.contains(c)).collect())
    }

    /// Numeric matrix of the kept columns; the error names the first bad cell
    /// by 1-based data row and column.
    pub fn numeric(&self, columns: &[usize], path: &Path) -> CliResult<Matrix> {
        let offset = usize::from(self.header.is_some());
        let mut values = Vec::with_capacity(self.records.len() * columns.len());
        for (r, rec) in self.records.iter().enumerate() {
            for &c in columns {
                let cell = &rec[c];
                let v = parse_cell(cell).ok_or_else(|| {
                    CliError::Data(format!(
                        "{}: row {}, column {}: `{cell}` is not a finite number",
                        path.display(),
                        r + 1 + offset,
                        c + 1
                    ))
                })?;
                values.push(v);
            }
        }
        Ok(Matrix::from_vec(self.records.len(), columns.len(), values)?)
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Data(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_from(text: &str) -> (tempfile::TempDir, std::path::PathBuf, Table) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, text).unwrap();
        let t = read_table(&path).unwrap();
        (dir, path, t)
    }

    #[test]
    fn detects_header() {
        let (_d, _, t) = table_from("a,b\n1,2\n3,4\n");
        assert_eq!(t.header.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
        assert_eq!(t.records.len(), 2);
        let (_d, _, t) = table_from("1,2\n3,4\n");
        assert!(t.header.is_none());
        assert_eq!(t.records.len(), 2);
    }

    #[test]
    fn drops_columns_by_name_or_index() {
        let (_d, p, t) = table_from("x,y,class\n1,2,g\n3,4,h\n");
        let keep = t.kept_columns(&["class".into()]).unwrap();
        assert_eq!(keep, vec![0, 1]);
        assert_eq!(t.kept_columns(&["3".into()]).unwrap(), vec![0, 1]);
        let m = t.numeric(&keep, &p).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert!(t.kept_columns(&["nope".into()]).is_err());
    }

    #[test]
    fn bad_cell_names_coordinates() {
        let (_d, p, t) = table_from("x,y\n1,2\n3,oops\n");
        let e = t.numeric(&[0, 1], &p).unwrap_err().to_string();
        assert!(e.contains("row 3, column 2"), "{e}");
    }

    #[test]
    fn ragged_row_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "1,2\n3\n").unwrap();
        let e = read_table(&path).unwrap_err().to_string();
        assert!(e.contains("row 2"), "{e}");
    }
}

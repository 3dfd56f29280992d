//! CSV reading and writing. Output is bit-stable: header row, '.' decimal
//! separator via the default float formatting, '\n' line endings.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub fn write_csv<I>(path: &Path, header: &str, rows: I) -> io::Result<usize>
where
    I: IntoIterator<Item = String>,
{
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(header.as_bytes())?;
    w.write_all(b"\n")?;
    let mut count = 0;
    for row in rows {
        w.write_all(row.as_bytes())?;
        w.write_all(b"\n")?;
        count += 1;
    }
    w.flush()?;
    Ok(count)
}

/// A CSV file read back as string columns.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> io::Result<CsvTable> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty CSV"))??;
        let header: Vec<String> = header_line
            .split(',')
            .map(|s| s.trim().to_owned())
            .collect();
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            rows.push(line.split(',').map(|s| s.trim().to_owned()).collect());
        }
        Ok(CsvTable { header, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric values of a column; fails on the first unparsable cell.
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>, String> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| format!("no column named '{name}'"))?;
        self.rows
            .iter()
            .map(|r| {
                r.get(idx)
                    .ok_or_else(|| "short row".to_owned())
                    .and_then(|s| {
                        s.parse::<f64>()
                            .map_err(|e| format!("bad number '{s}': {e}"))
                    })
            })
            .collect()
    }

    pub fn strings(&self, name: &str) -> Result<Vec<String>, String> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| format!("no column named '{name}'"))?;
        Ok(self.rows.iter().map(|r| r[idx].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = std::env::temp_dir().join("lrk_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        let rows = vec!["0,0.5".to_owned(), "1,0.25".to_owned()];
        let n = write_csv(&path, "replicate,z", rows).unwrap();
        assert_eq!(n, 2);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes, b"replicate,z\n0,0.5\n1,0.25\n");
        let table = CsvTable::read(&path).unwrap();
        assert_eq!(table.numeric("z").unwrap(), vec![0.5, 0.25]);
        assert!(table.numeric("missing").is_err());
    }
}

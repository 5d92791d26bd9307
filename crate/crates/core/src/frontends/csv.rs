//! CSV ingestion (RFC 4180, UTF-8, per-table delimiter override).

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{MetadataDocument, TableMetadata, TabularSource};

/// Column names of a file and the number of bytes read to learn them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderScan {
    pub path: String,
    pub columns: Vec<String>,
    pub bytes: u64,
}

fn reader(dir: &Path, path: &str, table: Option<&TableMetadata>) -> Result<csv::Reader<BufReader<File>>> {
    let full = dir.join(path);
    let file = File::open(&full).map_err(|e| Error::io(&full, e))?;
    let delimiter = table.and_then(|t| t.delimiter).unwrap_or(',');
    if !delimiter.is_ascii() {
        return Err(Error::Invalid(format!(
            "delimiter `{delimiter}` of {path} is not a single-byte character"
        )));
    }
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter as u8)
        .from_reader(BufReader::new(file)))
}

fn csv_error(path: &str, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_string(),
        message: e.to_string(),
    }
}

fn header_from(record: &csv::StringRecord) -> Vec<String> {
    record
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let h = if i == 0 { h.trim_start_matches('\u{feff}') } else { h };
            h.to_string()
        })
        .collect()
}

/// Reads only the header row. With `rowTitles` in the metadata nothing is
/// read and the byte count is zero.
pub fn scan_header(dir: &Path, path: &str, md: &MetadataDocument) -> Result<HeaderScan> {
    let table = md.table(path);
    if let Some(titles) = table.and_then(|t| t.row_titles.clone()) {
        let full = dir.join(path);
        if !full.is_file() {
            return Err(Error::io(
                &full,
                std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            ));
        }
        return Ok(HeaderScan {
            path: path.to_string(),
            columns: titles,
            bytes: 0,
        });
    }
    let mut rdr = reader(dir, path, table)?;
    let mut record = csv::StringRecord::new();
    let found = rdr.read_record(&mut record).map_err(|e| csv_error(path, e))?;
    if !found {
        return Err(Error::MissingHeader(path.to_string()));
    }
    Ok(HeaderScan {
        path: path.to_string(),
        columns: header_from(&record),
        bytes: rdr.position().byte(),
    })
}

/// Reads a whole file. Returns the source and the number of bytes read.
pub fn read_source(dir: &Path, path: &str, md: &MetadataDocument) -> Result<(TabularSource, u64)> {
    let table = md.table(path);
    let mut rdr = reader(dir, path, table)?;
    let mut records = rdr.records();
    let columns = match table.and_then(|t| t.row_titles.clone()) {
        Some(titles) => titles,
        None => match records.next() {
            Some(r) => header_from(&r.map_err(|e| csv_error(path, e))?),
            None => return Err(Error::MissingHeader(path.to_string())),
        },
    };
    let mut rows = Vec::new();
    for (i, r) in records.enumerate() {
        let r = r.map_err(|e| csv_error(path, e))?;
        if r.len() != columns.len() {
            return Err(Error::RaggedRow {
                path: path.to_string(),
                row: i + 1,
                found: r.len(),
                expected: columns.len(),
            });
        }
        rows.push(r.iter().map(|c| Some(c.to_string())).collect());
    }
    let bytes = rdr.position().byte();
    Ok((TabularSource::new(path, columns, rows)?, bytes))
}

/// Reads every referenced path under `dir`, in the given order.
pub fn read_sources(dir: &Path, referenced: &[String], md: &MetadataDocument) -> Result<Vec<TabularSource>> {
    referenced
        .iter()
        .map(|p| read_source(dir, p, md).map(|(s, _)| s))
        .collect()
}

/// Writes a source back as CSV (absent cells as empty strings).
pub fn write_source(dir: &Path, source: &TabularSource) -> Result<()> {
    let full = dir.join(&source.path);
    if let Some(parent) = full.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(&full).map_err(|e| csv_error(&source.path, e))?;
    w.write_record(&source.columns)
        .map_err(|e| csv_error(&source.path, e))?;
    for row in &source.rows {
        w.write_record(row.iter().map(|c| c.as_deref().unwrap_or("")))
            .map_err(|e| csv_error(&source.path, e))?;
    }
    w.flush().map_err(|e| Error::io(&full, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TableMetadata;

    fn write(dir: &Path, name: &str, text: &str) {
        std::fs::write(dir.join(name), text).unwrap();
    }

    #[test]
    fn header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "routes.csv", "route_id,name\nR1,\"A, B\"\nR2,x\nR3,\n");
        let (s, bytes) = read_source(dir.path(), "routes.csv", &MetadataDocument::default()).unwrap();
        assert_eq!(s.columns, vec!["route_id", "name"]);
        assert_eq!(s.row_count(), 3);
        assert_eq!(s.rows[0][1].as_deref(), Some("A, B"));
        assert_eq!(s.rows[2][1].as_deref(), Some(""));
        assert_eq!(bytes, std::fs::metadata(dir.path().join("routes.csv")).unwrap().len());
        let h = scan_header(dir.path(), "routes.csv", &MetadataDocument::default()).unwrap();
        assert_eq!(h.columns, s.columns);
        assert_eq!(h.bytes, "route_id,name\n".len() as u64);
    }

    #[test]
    fn row_titles_make_every_row_data() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.csv", "1,x\n2,y\n");
        let mut t = TableMetadata::new("a.csv");
        t.row_titles = Some(vec!["id".into(), "name".into()]);
        let md = MetadataDocument { tables: vec![t] };
        let (s, _) = read_source(dir.path(), "a.csv", &md).unwrap();
        assert_eq!(s.columns, vec!["id", "name"]);
        assert_eq!(s.row_count(), 2);
        assert_eq!(scan_header(dir.path(), "a.csv", &md).unwrap().bytes, 0);
    }

    #[test]
    fn ragged_row() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.csv", "a,b\n1,2\n3,4\n5,6\n7,8\n9,10,11\n");
        let err = read_source(dir.path(), "a.csv", &MetadataDocument::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::RaggedRow {
                row: 5,
                found: 3,
                expected: 2,
                ..
            }
        ));
    }

    #[test]
    fn delimiter_override_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.csv", "a;b\n1,5;2\n");
        let mut t = TableMetadata::new("a.csv");
        t.delimiter = Some(';');
        let md = MetadataDocument { tables: vec![t] };
        let (s, _) = read_source(dir.path(), "a.csv", &md).unwrap();
        assert_eq!(s.rows[0][0].as_deref(), Some("1,5"));
        assert!(matches!(
            read_source(dir.path(), "nope.csv", &md),
            Err(Error::Io { .. })
        ));
        write(dir.path(), "empty.csv", "");
        assert!(matches!(
            read_source(dir.path(), "empty.csv", &md),
            Err(Error::MissingHeader(_))
        ));
    }
}

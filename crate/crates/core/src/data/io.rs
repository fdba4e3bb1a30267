//! Dataset file formats.
//!
//! Binary layout (little-endian): magic `FDS1`, u32 sample count `n`, u32
//! feature dim `d`, u32 class count `C`, then `n·d` f32 features row-major,
//! then `n` u16 labels. The trivial layout keeps it parseable from any
//! language.
//!
//! CSV import: header row, any number of numeric feature columns, and a final
//! column named `label`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::dataset::Dataset;

pub const MAGIC: &[u8; 4] = b"FDS1";

const HEADER_LEN: u64 = 16;

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let n = data.len();
    let d = data.dim();
    let c = data.class_count();
    if n > u32::MAX as usize || d > u32::MAX as usize || c > u32::MAX as usize {
        return Err(Error::validation("dataset too large for the file format".to_string()));
    }
    let mut bytes = Vec::with_capacity(HEADER_LEN as usize + n * d * 4 + n * 2);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(n as u32).to_le_bytes());
    bytes.extend_from_slice(&(d as u32).to_le_bytes());
    bytes.extend_from_slice(&(c as u32).to_le_bytes());
    for &v in data.features() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for &l in data.labels() {
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_dataset(&bytes)
}

fn format_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Format { offset, message: message.into() }
}

pub fn parse_dataset(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < HEADER_LEN as usize {
        return Err(format_err(bytes.len() as u64, "truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(format_err(0, format!("bad magic {:02x?}, expected \"FDS1\"", &bytes[0..4])));
    }
    let read_u32 = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let n = read_u32(4) as usize;
    let d = read_u32(8) as usize;
    let c = read_u32(12) as usize;
    if n == 0 {
        return Err(format_err(4, "sample count is zero"));
    }
    if d == 0 {
        return Err(format_err(8, "feature dimension is zero"));
    }
    if c < 2 || c > u16::MAX as usize + 1 {
        return Err(format_err(12, format!("class count {c} out of range")));
    }

    let features_off = HEADER_LEN as usize;
    let labels_off = features_off + n * d * 4;
    let total = labels_off + n * 2;
    if bytes.len() < total {
        return Err(format_err(
            bytes.len() as u64,
            format!("file ends early: {} bytes, need {total}", bytes.len()),
        ));
    }
    if bytes.len() > total {
        return Err(format_err(total as u64, format!("{} trailing bytes", bytes.len() - total)));
    }

    let mut features = Vec::with_capacity(n * d);
    for i in 0..n * d {
        let off = features_off + i * 4;
        let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if !v.is_finite() {
            return Err(format_err(off as u64, format!("non-finite feature value {v}")));
        }
        features.push(v);
    }
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let off = labels_off + i * 2;
        let l = u16::from_le_bytes(bytes[off..off + 2].try_into().unwrap());
        if l as usize >= c {
            return Err(format_err(off as u64, format!("label {l} >= class count {c}")));
        }
        labels.push(l);
    }
    Dataset::new(features, labels, d, c)
}

/// Import a CSV with a header row, numeric feature columns, and a final
/// `label` column holding class indices.
pub fn load_csv_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_csv_dataset(&text)
}

pub fn parse_csv_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(Error::Parse { line: 1, message: "empty file".to_string() })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 || columns.last() != Some(&"label") {
        return Err(Error::Parse {
            line: 1,
            message: "header must list feature columns then a final `label` column".to_string(),
        });
    }
    let dim = columns.len() - 1;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("{} fields, expected {}", fields.len(), columns.len()),
            });
        }
        for f in &fields[..dim] {
            let v: f32 = f.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad feature value {f:?}"),
            })?;
            features.push(v);
        }
        let l: u16 = fields[dim].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad label {:?}", fields[dim]),
        })?;
        labels.push(l);
    }
    if labels.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows".to_string() });
    }
    let class_count = labels.iter().map(|&l| l as usize).max().unwrap() + 1;
    Dataset::new(features, labels, dim, class_count.max(2))
}

/// Sniff a dataset file: binary if it starts with the magic, CSV otherwise.
pub fn load_any_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() >= 4 && &bytes[0..4] == MAGIC {
        parse_dataset(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
            line: 1,
            message: "file is neither an FDS1 dataset nor UTF-8 CSV".to_string(),
        })?;
        parse_csv_dataset(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::generate_synthetic;

    #[test]
    fn round_trip_is_identity() {
        let data = generate_synthetic(3, 5, 12, 0.7, 21).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.fds");
        save_dataset(&data, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(data, back);
    }

    #[test]
    fn corrupted_magic_is_a_format_error() {
        let data = generate_synthetic(2, 2, 3, 1.0, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.fds");
        save_dataset(&data, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        match parse_dataset(&bytes) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("expected format error at byte 0, got {other:?}"),
        }
    }

    #[test]
    fn truncation_and_zero_n_are_rejected() {
        let data = generate_synthetic(2, 2, 3, 1.0, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.fds");
        save_dataset(&data, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(matches!(parse_dataset(&bytes[..bytes.len() - 3]), Err(Error::Format { .. })));

        let mut zero_n = bytes.clone();
        zero_n[4..8].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(parse_dataset(&zero_n), Err(Error::Format { offset: 4, .. })));
    }

    #[test]
    fn out_of_range_label_reports_its_offset() {
        let data = generate_synthetic(2, 2, 2, 1.0, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.fds");
        save_dataset(&data, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let labels_off = 16 + data.len() * data.dim() * 4;
        bytes[labels_off..labels_off + 2].copy_from_slice(&9u16.to_le_bytes());
        match parse_dataset(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, labels_off as u64),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn csv_import_reads_features_and_labels() {
        let text = "x0,x1,label\n1.0,2.0,0\n3.5,-1.0,2\n";
        let d = parse_csv_dataset(text).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.class_count(), 3);
        assert_eq!(d.row(1), &[3.5, -1.0]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "x0,x1,label\n1.0,2.0,0\noops,2.0,1\n";
        match parse_csv_dataset(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_csv_dataset("x0,x1\n1,2\n").is_err()); // no label column
    }
}

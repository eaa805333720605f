//! On-disk embedding formats.
//!
//! `EMB1` binary layout (all integers little-endian):
//!
//! ```text
//! magic "EMB1" | u32 version = 1 | u64 n | u32 d | u32 class_count | u8 origin_flag
//! n records:  i32 label | [u8 origin, if origin_flag = 1] | d x f32 coordinates
//! ```
//!
//! Origin bytes are 0 = real, 1 = synthetic. CSV files carry a
//! `label,f0,...,f{d-1}` header and one decimal record per line.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{EmbeddingDataset, EmbeddingVector, LabeledEmbedding, Origin, SyntheticKind};
use crate::error::DatasetError;

pub const MAGIC: [u8; 4] = *b"EMB1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 4 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Binary,
    Csv,
}

impl Format {
    /// `.csv` means CSV, anything else is the binary format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad magic bytes {0:02x?}, expected \"EMB1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("truncated file: needed {needed} more bytes for {what} at byte offset {offset}")]
    Truncated { offset: usize, needed: usize, what: &'static str },
    #[error("{extra} trailing bytes after last record at byte offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("record {record}: {message}")]
    Record { record: usize, message: String },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

impl FormatError {
    fn record(record: usize, message: impl Into<String>) -> Self {
        FormatError::Record { record, message: message.into() }
    }
}

pub fn load_dataset(path: &Path, format: Format) -> Result<EmbeddingDataset, FormatError> {
    let io_err = |source| FormatError::Io { path: path.to_path_buf(), source };
    match format {
        Format::Binary => decode_binary(&fs::read(path).map_err(io_err)?),
        Format::Csv => parse_csv(&fs::read_to_string(path).map_err(io_err)?, None),
    }
}

pub fn save_dataset(dataset: &EmbeddingDataset, path: &Path, format: Format) -> Result<(), FormatError> {
    let bytes = match format {
        Format::Binary => encode_binary(dataset)?,
        Format::Csv => to_csv(dataset).into_bytes(),
    };
    fs::write(path, bytes).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

/// Encodes the dataset as `EMB1`. The origin column is written only when
/// the dataset holds at least one synthetic sample.
pub fn encode_binary(dataset: &EmbeddingDataset) -> Result<Vec<u8>, FormatError> {
    let with_origin = dataset.synthetic_count() > 0;
    let d = dataset.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + dataset.len() * (4 + usize::from(with_origin) + 4 * d));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dataset.len() as u64).to_le_bytes());
    let d32 = u32::try_from(d).map_err(|_| FormatError::Header(format!("dimension {d} exceeds u32")))?;
    out.extend_from_slice(&d32.to_le_bytes());
    out.extend_from_slice(&dataset.class_count().to_le_bytes());
    out.push(u8::from(with_origin));
    for (record, s) in dataset.samples().iter().enumerate() {
        let label = i32::try_from(s.label).map_err(|_| FormatError::record(record, "label exceeds i32"))?;
        out.extend_from_slice(&label.to_le_bytes());
        if with_origin {
            out.push(u8::from(s.origin.is_synthetic()));
        }
        for (coord, &v) in s.vector.iter().enumerate() {
            let narrowed = v as f32;
            if !narrowed.is_finite() {
                return Err(FormatError::record(record, format!("coordinate {coord} = {v} overflows f32")));
            }
            out.extend_from_slice(&narrowed.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        let remaining = self.bytes.len() - self.offset;
        if remaining < len {
            return Err(FormatError::Truncated { offset: self.offset, needed: len - remaining, what });
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], FormatError> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

pub fn decode_binary(bytes: &[u8]) -> Result<EmbeddingDataset, FormatError> {
    let mut cur = Cursor { bytes, offset: 0 };
    let magic = cur.array::<4>("magic")?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(cur.array("version")?);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let n = u64::from_le_bytes(cur.array("record count")?);
    let d = u32::from_le_bytes(cur.array("dimension")?) as usize;
    let class_count = u32::from_le_bytes(cur.array("class count")?);
    let with_origin = match cur.array::<1>("origin flag")?[0] {
        0 => false,
        1 => true,
        other => return Err(FormatError::Header(format!("origin flag must be 0 or 1, got {other}"))),
    };
    if d == 0 {
        return Err(FormatError::Header("dimension must be positive".into()));
    }
    if class_count < 2 {
        return Err(FormatError::Header(format!("class count must be at least 2, got {class_count}")));
    }
    let record_len = 4 + usize::from(with_origin) + 4 * d;
    let n = usize::try_from(n).map_err(|_| FormatError::Header(format!("record count {n} too large")))?;
    // Reject absurd counts before allocating.
    if n.checked_mul(record_len).is_none_or(|total| total > bytes.len() - cur.offset) {
        let needed = n.saturating_mul(record_len).saturating_sub(bytes.len() - cur.offset);
        return Err(FormatError::Truncated { offset: bytes.len(), needed, what: "records" });
    }
    let mut samples = Vec::with_capacity(n);
    for record in 0..n {
        let label = i32::from_le_bytes(cur.array("label")?);
        let label = u32::try_from(label).map_err(|_| FormatError::record(record, format!("negative label {label}")))?;
        if label >= class_count {
            return Err(FormatError::record(record, format!("label {label} is not below class count {class_count}")));
        }
        let origin = if with_origin {
            match cur.array::<1>("origin")?[0] {
                0 => Origin::Real,
                1 => Origin::Synthetic(SyntheticKind::Unspecified),
                other => return Err(FormatError::record(record, format!("origin byte must be 0 or 1, got {other}"))),
            }
        } else {
            Origin::Real
        };
        let raw = cur.take(4 * d, "coordinates")?;
        let values: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("chunk of 4"))))
            .collect();
        let vector = EmbeddingVector::new(values)
            .map_err(|coord| FormatError::record(record, format!("coordinate {coord} is not finite")))?;
        samples.push(LabeledEmbedding { vector, label, origin });
    }
    if cur.offset != bytes.len() {
        return Err(FormatError::TrailingBytes { offset: cur.offset, extra: bytes.len() - cur.offset });
    }
    EmbeddingDataset::new(d, class_count, samples).map_err(dataset_to_format)
}

fn dataset_to_format(e: DatasetError) -> FormatError {
    match e {
        DatasetError::DimensionMismatch { index, .. }
        | DatasetError::NonFinite { index, .. }
        | DatasetError::LabelOutOfRange { index, .. } => FormatError::record(index, e.to_string()),
        other => FormatError::Header(other.to_string()),
    }
}

/// Renders CSV with shortest round-trip decimal coordinates.
pub fn to_csv(dataset: &EmbeddingDataset) -> String {
    let mut out = String::from("label");
    for j in 0..dataset.dim() {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for s in dataset.samples() {
        out.push_str(&s.label.to_string());
        for v in s.vector.iter() {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Parses CSV text. Without an explicit `class_count` the count is inferred
/// as `max(2, max_label + 1)`.
pub fn parse_csv(text: &str, class_count: Option<u32>) -> Result<EmbeddingDataset, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| FormatError::Csv { line: 1, message: "missing header".into() })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.first() != Some(&"label") {
        return Err(FormatError::Csv { line: 1, message: "header must start with `label`".into() });
    }
    let d = columns.len() - 1;
    if d == 0 {
        return Err(FormatError::Csv { line: 1, message: "header names no feature columns".into() });
    }
    for (j, name) in columns[1..].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(FormatError::Csv { line: 1, message: format!("expected column f{j}, found `{name}`") });
        }
    }
    let mut samples = Vec::new();
    for (record, (lineno, line)) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(FormatError::record(record, format!("line {}: expected {} fields, got {}", lineno + 1, d + 1, fields.len())));
        }
        let label: u32 = fields[0]
            .parse()
            .map_err(|_| FormatError::record(record, format!("invalid label `{}`", fields[0])))?;
        let values = fields[1..]
            .iter()
            .enumerate()
            .map(|(j, f)| f.parse::<f64>().map_err(|_| FormatError::record(record, format!("coordinate {j}: invalid number `{f}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let vector = EmbeddingVector::new(values)
            .map_err(|coord| FormatError::record(record, format!("coordinate {coord} is not finite")))?;
        samples.push(LabeledEmbedding::real(vector, label));
    }
    let class_count = class_count.unwrap_or_else(|| samples.iter().map(|s| s.label + 1).max().unwrap_or(0).max(2));
    EmbeddingDataset::new(d, class_count, samples).map_err(dataset_to_format)
}

/// Hex SHA-256 of the canonical binary encoding.
pub fn fingerprint(dataset: &EmbeddingDataset) -> Result<String, FormatError> {
    let digest = Sha256::digest(encode_binary(dataset)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(n: u64, d: u32, c: u32, flag: u8) -> Vec<u8> {
        let mut b = MAGIC.to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&n.to_le_bytes());
        b.extend_from_slice(&d.to_le_bytes());
        b.extend_from_slice(&c.to_le_bytes());
        b.push(flag);
        b
    }

    fn record(b: &mut Vec<u8>, label: i32, coords: &[f32]) {
        b.extend_from_slice(&label.to_le_bytes());
        for c in coords {
            b.extend_from_slice(&c.to_le_bytes());
        }
    }

    #[test]
    fn decodes_hand_built_file() {
        let mut b = header(3, 2, 2, 0);
        record(&mut b, 0, &[1.0, 2.0]);
        record(&mut b, 1, &[-0.5, 0.25]);
        record(&mut b, 1, &[3.0, 4.0]);
        let ds = decode_binary(&b).unwrap();
        assert_eq!((ds.len(), ds.dim(), ds.class_count()), (3, 2, 2));
        assert_eq!(ds.vector(1), &[-0.5, 0.25]);
        assert!(ds.samples().iter().all(|s| s.origin == Origin::Real));
        assert_eq!(encode_binary(&ds).unwrap(), b);
    }

    #[test]
    fn nan_record_reports_index() {
        let mut b = header(2, 1, 2, 0);
        record(&mut b, 0, &[1.0]);
        record(&mut b, 1, &[f32::NAN]);
        match decode_binary(&b) {
            Err(FormatError::Record { record, .. }) => assert_eq!(record, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_out_of_range_and_negative() {
        let mut b = header(1, 1, 2, 0);
        record(&mut b, 2, &[1.0]);
        assert!(matches!(decode_binary(&b), Err(FormatError::Record { record: 0, .. })));
        let mut b = header(1, 1, 2, 0);
        record(&mut b, -1, &[1.0]);
        assert!(matches!(decode_binary(&b), Err(FormatError::Record { record: 0, .. })));
    }

    #[test]
    fn truncation_names_offset() {
        let mut b = header(2, 2, 2, 0);
        record(&mut b, 0, &[1.0, 2.0]);
        record(&mut b, 1, &[1.0, 2.0]);
        b.truncate(b.len() - 3);
        let err = decode_binary(&b).unwrap_err();
        assert!(matches!(err, FormatError::Truncated { .. }));
        assert!(err.to_string().contains("byte offset"));
        assert!(matches!(decode_binary(&b[..10]), Err(FormatError::Truncated { offset: 8, .. })));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(decode_binary(b"EMB2\x01\0\0\0"), Err(FormatError::BadMagic(_))));
        let mut b = header(0, 2, 2, 0);
        b[4] = 2;
        assert!(matches!(decode_binary(&b), Err(FormatError::UnsupportedVersion(2))));
        assert!(matches!(decode_binary(&header(0, 0, 2, 0)), Err(FormatError::Header(_))));
        assert!(matches!(decode_binary(&header(0, 2, 1, 0)), Err(FormatError::Header(_))));
        assert!(matches!(decode_binary(&header(0, 2, 2, 7)), Err(FormatError::Header(_))));
        let mut trailing = header(0, 2, 2, 0);
        trailing.push(0);
        assert!(matches!(decode_binary(&trailing), Err(FormatError::TrailingBytes { .. })));
    }

    #[test]
    fn empty_dataset_round_trips() {
        let ds = EmbeddingDataset::empty(4, 2).unwrap();
        let back = decode_binary(&encode_binary(&ds).unwrap()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.dim(), 4);
    }

    #[test]
    fn synthetic_flag_is_persisted() {
        let real = LabeledEmbedding::real(EmbeddingVector::new(vec![1.0]).unwrap(), 0);
        let synth = LabeledEmbedding {
            vector: EmbeddingVector::new(vec![2.0]).unwrap(),
            label: 1,
            origin: Origin::Synthetic(SyntheticKind::Smote),
        };
        let ds = EmbeddingDataset::new(1, 2, vec![real, synth]).unwrap();
        let bytes = encode_binary(&ds).unwrap();
        assert_eq!(bytes[HEADER_LEN - 1], 1);
        let back = decode_binary(&bytes).unwrap();
        assert_eq!(back.samples()[0].origin, Origin::Real);
        assert_eq!(back.samples()[1].origin, Origin::Synthetic(SyntheticKind::Unspecified));
    }

    #[test]
    fn csv_decode() {
        let ds = parse_csv("label,f0,f1\n1,0.5,-0.25\n", None).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.label(0), 1);
        assert_eq!(ds.vector(0), &[0.5, -0.25]);
        assert!(matches!(parse_csv("label,f0\n0,NaN\n", None), Err(FormatError::Record { record: 0, .. })));
        assert!(matches!(parse_csv("label,f0\n0,1\n0,1,2\n", None), Err(FormatError::Record { record: 1, .. })));
        assert!(matches!(parse_csv("lbl,f0\n", None), Err(FormatError::Csv { .. })));
        assert!(matches!(parse_csv("label,f0\n3,1\n", Some(2)), Err(FormatError::Record { record: 0, .. })));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![(vec![0.1, -1e-300, 123456.789], 0), (vec![std::f64::consts::PI, 2.0, -0.0], 1)];
        let ds = EmbeddingDataset::from_rows(3, 2, rows).unwrap();
        assert_eq!(parse_csv(&to_csv(&ds), Some(2)).unwrap(), ds);
    }

    #[test]
    fn save_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let ds = EmbeddingDataset::from_rows(2, 3, vec![(vec![0.5, 1.5], 2), (vec![-2.0, 0.0], 0)]).unwrap();
        for (name, fmt) in [("a.emb", Format::Binary), ("a.csv", Format::Csv)] {
            let path = dir.path().join(name);
            assert_eq!(Format::from_path(&path), fmt);
            save_dataset(&ds, &path, fmt).unwrap();
            let back = load_dataset(&path, fmt).unwrap();
            assert_eq!(back, ds);
        }
        let missing = load_dataset(&dir.path().join("nope.emb"), Format::Binary);
        assert!(matches!(missing, Err(FormatError::Io { .. })));
    }
}

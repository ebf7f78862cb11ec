//! Embedding point clouds and their on-disk formats.
//!
//! Two formats are read:
//!
//! * **EMB1** binary: `"EMB1"` magic, `u16` version (= 1), `u16` label
//!   length, label bytes (UTF-8), `u32` count, `u32` dim, `u32` flags
//!   (must be 0), then `count * dim` little-endian `f64` values, row-major.
//!   All integers are little-endian. Tags ride inside the label field as
//!   `label#tag1#tag2`.
//! * **CSV**: one sample per line, comma-separated decimal floats, no header
//!   unless [`ReadOptions::csv_header`] is set.
//!
//! Writing always produces EMB1.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB1_VERSION: u16 = 1;
const TAG_SEPARATOR: char = '#';

/// `N` samples in `R^n`, stored row-major in 64-bit precision.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCloud {
    label: String,
    dim: usize,
    count: usize,
    data: Vec<f64>,
    tags: BTreeSet<String>,
}

impl EmbeddingCloud {
    /// Builds a cloud from row-major data, enforcing every invariant.
    pub fn new(label: impl Into<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        let label = label.into();
        validate_label(&label)?;
        if dim == 0 || data.is_empty() {
            return Err(Error::EmptyCloud {
                count: if dim == 0 { 0 } else { data.len() / dim },
                dim,
            });
        }
        if data.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} values do not divide into rows of dim {dim}",
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / dim,
                col: idx % dim,
            });
        }
        Ok(Self {
            label,
            dim,
            count: data.len() / dim,
            data,
            tags: BTreeSet::new(),
        })
    }

    pub fn from_rows(label: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Shape(format!(
                "row {i} has {} columns, expected {dim}",
                r.len()
            )));
        }
        Self::new(label, dim, rows.concat())
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for tag in tags {
            let tag = tag.into();
            if tag.is_empty() || tag.contains(TAG_SEPARATOR) {
                return Err(Error::InvalidParameter {
                    name: "tag",
                    detail: format!("`{tag}` must be non-empty and free of `#`"),
                });
            }
            self.tags.insert(tag);
        }
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn tags(&self) -> &BTreeSet<String> {
        &self.tags
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    /// Row-major sample data.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Samples as an `N x n` matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.count, self.dim, &self.data)
    }

    /// New cloud made of the given rows (in the given order), same label and tags.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let mut out = Self::new(self.label.clone(), self.dim, data)?;
        out.tags = self.tags.clone();
        Ok(out)
    }

    /// Same samples under a different label.
    pub fn relabeled(&self, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        validate_label(&label)?;
        Ok(Self {
            label,
            ..self.clone()
        })
    }

    fn encoded_label(&self) -> String {
        let mut s = self.label.clone();
        for tag in &self.tags {
            s.push(TAG_SEPARATOR);
            s.push_str(tag);
        }
        s
    }
}

fn validate_label(label: &str) -> Result<()> {
    if label.contains(TAG_SEPARATOR) {
        return Err(Error::InvalidParameter {
            name: "label",
            detail: format!("`{label}` must not contain `#`"),
        });
    }
    Ok(())
}

/// Options for [`read_cloud_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Skip the first line of CSV input.
    pub csv_header: bool,
}

/// Reads an EMB1 or CSV cloud. The format is chosen by sniffing the magic bytes.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<EmbeddingCloud> {
    read_cloud_with(path, ReadOptions::default())
}

pub fn read_cloud_with(path: impl AsRef<Path>, opts: ReadOptions) -> Result<EmbeddingCloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let stem_label = path
        .file_stem()
        .map(|s| s.to_string_lossy().replace(TAG_SEPARATOR, "_"))
        .unwrap_or_default();
    if bytes.starts_with(EMB1_MAGIC) {
        decode_emb1(&bytes, &stem_label)
    } else {
        parse_csv(&bytes, &stem_label, opts.csv_header)
    }
}

/// Writes `cloud` as EMB1.
pub fn write_cloud(cloud: &EmbeddingCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_emb1(cloud, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Encodes `cloud` as EMB1 into any writer.
pub fn write_emb1<W: Write>(cloud: &EmbeddingCloud, w: &mut W) -> std::io::Result<()> {
    // EmbeddingCloud can only be built from finite data, but keep the check
    // at the boundary: nothing non-finite ever reaches disk.
    if let Some(idx) = cloud.data.iter().position(|v| !v.is_finite()) {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("non-finite value at flat index {idx}"),
        ));
    }
    let label = cloud.encoded_label();
    let label_len = u16::try_from(label.len()).map_err(|_| {
        std::io::Error::new(std::io::ErrorKind::InvalidInput, "label longer than 65535 bytes")
    })?;
    let count = u32::try_from(cloud.count)
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "count exceeds u32"))?;
    let dim = u32::try_from(cloud.dim)
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "dim exceeds u32"))?;
    w.write_all(EMB1_MAGIC)?;
    w.write_all(&EMB1_VERSION.to_le_bytes())?;
    w.write_all(&label_len.to_le_bytes())?;
    w.write_all(label.as_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for v in &cloud.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Size in bytes of the EMB1 encoding of a cloud with the given label field.
pub fn emb1_size(encoded_label_len: usize, count: usize, dim: usize) -> usize {
    4 + 2 + 2 + encoded_label_len + 4 + 4 + 4 + 8 * count * dim
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                field,
                format!(
                    "need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            )),
        }
    }

    fn u16(&mut self, field: &str) -> Result<u16> {
        let b = self.take(2, field)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Decodes an EMB1 byte buffer. `fallback_label` is used when the label field is empty.
pub fn decode_emb1(bytes: &[u8], fallback_label: &str) -> Result<EmbeddingCloud> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != EMB1_MAGIC {
        return Err(Error::format("magic", "expected \"EMB1\""));
    }
    let version = cur.u16("version")?;
    if version != EMB1_VERSION {
        return Err(Error::format("version", format!("unsupported version {version}")));
    }
    let label_len = cur.u16("label_length")? as usize;
    let label_bytes = cur.take(label_len, "label")?;
    let raw_label = std::str::from_utf8(label_bytes)
        .map_err(|e| Error::format("label", format!("invalid UTF-8: {e}")))?;
    let count = cur.u32("count")? as usize;
    let dim = cur.u32("dim")? as usize;
    let flags = cur.u32("flags")?;
    if flags != 0 {
        return Err(Error::format("flags", format!("reserved bits set: {flags:#x}")));
    }
    if count == 0 || dim == 0 {
        return Err(Error::EmptyCloud { count, dim });
    }
    let n_values = count
        .checked_mul(dim)
        .filter(|n| n.checked_mul(8).is_some())
        .ok_or_else(|| Error::format("count", "count * dim overflows"))?;
    let remaining = bytes.len() - cur.pos;
    if remaining != n_values * 8 {
        return Err(Error::format(
            "data",
            format!(
                "header declares {count} x {dim} values ({} bytes), found {remaining} bytes",
                n_values * 8
            ),
        ));
    }
    let data: Vec<f64> = bytes[cur.pos..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();

    let mut parts = raw_label.split(TAG_SEPARATOR);
    let label = match parts.next() {
        Some(l) if !l.is_empty() => l.to_string(),
        _ => fallback_label.to_string(),
    };
    let tags: Vec<&str> = parts.filter(|t| !t.is_empty()).collect();
    EmbeddingCloud::new(label, dim, data)?.with_tags(tags)
}

fn parse_csv(bytes: &[u8], label: &str, has_header: bool) -> Result<EmbeddingCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(bytes));
    let mut data = Vec::new();
    let mut dim = 0usize;
    let mut rows = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(format!("row {row}"), e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if rows == 0 {
            dim = record.len();
        } else if record.len() != dim {
            return Err(Error::format(
                format!("row {row}"),
                format!("{} columns, expected {dim}", record.len()),
            ));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::format(format!("row {row} column {col}"), format!("`{field}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 || dim == 0 {
        return Err(Error::EmptyCloud { count: rows, dim });
    }
    EmbeddingCloud::new(label, dim, data)
}

/// Reads any cloud from an in-memory reader (EMB1 or CSV).
pub fn read_cloud_from<R: Read>(mut r: R, label: &str, opts: ReadOptions) -> Result<EmbeddingCloud> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::io("<reader>", e))?;
    if bytes.starts_with(EMB1_MAGIC) {
        decode_emb1(&bytes, label)
    } else {
        parse_csv(&bytes, label, opts.csv_header)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(cloud: &EmbeddingCloud) -> Vec<u8> {
        let mut buf = Vec::new();
        write_emb1(cloud, &mut buf).unwrap();
        buf
    }

    #[test]
    fn emb1_three_by_two() {
        let c = EmbeddingCloud::from_rows("pts", &[vec![0., 0.], vec![1., 1.], vec![2., 2.]]).unwrap();
        let back = decode_emb1(&encode(&c), "x").unwrap();
        assert_eq!(back.count(), 3);
        assert_eq!(back.dim(), 2);
        assert_eq!(back, c);
    }

    #[test]
    fn csv_two_by_two() {
        let c = read_cloud_from("0.5,1.5\n2.5,3.5".as_bytes(), "c", ReadOptions::default()).unwrap();
        assert_eq!((c.count(), c.dim()), (2, 2));
        assert_eq!(c.data(), &[0.5, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn csv_header_is_skipped_on_request() {
        let opts = ReadOptions { csv_header: true };
        let c = read_cloud_from("a,b\n1,2\n".as_bytes(), "c", opts).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0]);
        let err = read_cloud_from("a,b\n1,2\n".as_bytes(), "c", ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn csv_ragged_and_nan() {
        let err = read_cloud_from("1,2\n3\n".as_bytes(), "c", ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Format { ref field, .. } if field == "row 1"));
        let err = read_cloud_from("1,2\n3,NaN\n".as_bytes(), "c", ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 1 }));
    }

    #[test]
    fn declared_count_larger_than_data() {
        let c = EmbeddingCloud::new("a", 2, vec![0.0; 8]).unwrap();
        let mut bytes = encode(&c);
        // patch N from 4 to 5
        let n_off = 4 + 2 + 2 + 1;
        bytes[n_off..n_off + 4].copy_from_slice(&5u32.to_le_bytes());
        let err = decode_emb1(&bytes, "a").unwrap_err();
        assert!(matches!(err, Error::Format { ref field, .. } if field == "data"), "{err}");
    }

    #[test]
    fn truncated_header_names_field() {
        let c = EmbeddingCloud::new("abc", 1, vec![1.0]).unwrap();
        let bytes = encode(&c);
        for (cut, field) in [(2, "magic"), (5, "version"), (7, "label_length"), (9, "label"), (12, "count"), (18, "dim"), (22, "flags")] {
            let err = decode_emb1(&bytes[..cut], "x").unwrap_err();
            assert!(matches!(err, Error::Format { field: ref f, .. } if f == field), "cut {cut}: {err}");
        }
    }

    #[test]
    fn zero_count_is_empty_cloud() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(EMB1_MAGIC);
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&0u16.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_emb1(&bytes, "e"), Err(Error::EmptyCloud { count: 0, dim: 3 })));
    }

    #[test]
    fn nan_in_payload_is_data_error() {
        let c = EmbeddingCloud::new("a", 3, vec![0.0; 6]).unwrap();
        let mut bytes = encode(&c);
        let len = bytes.len();
        // last value: row 1, col 2
        bytes[len - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_emb1(&bytes, "a"), Err(Error::NonFinite { row: 1, col: 2 })));
    }

    #[test]
    fn nan_refused_before_write() {
        assert!(matches!(
            EmbeddingCloud::new("a", 2, vec![0.0, f64::INFINITY]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn tags_and_empty_label_fallback() {
        let c = EmbeddingCloud::new("mnist", 1, vec![1.0])
            .unwrap()
            .with_tags(["grayscale-origin", "train"])
            .unwrap();
        let back = decode_emb1(&encode(&c), "stem").unwrap();
        assert_eq!(back.tags(), c.tags());
        assert_eq!(back.label(), "mnist");

        let unlabeled = EmbeddingCloud::new("", 1, vec![1.0]).unwrap();
        assert_eq!(decode_emb1(&encode(&unlabeled), "stem").unwrap().label(), "stem");
    }

    #[test]
    fn encoded_size_matches_layout() {
        let c = EmbeddingCloud::new("abcd", 3, vec![0.5; 12]).unwrap();
        assert_eq!(encode(&c).len(), emb1_size(4, 4, 3));
        assert_eq!(emb1_size(4, 4, 3), 20 + 4 + 96);
    }
}

//! SIDX: a minimal little-endian container for one labeled feature set.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SIDX"
//!      4     1  version (1)
//!      5     1  dtype (0 = f32, 1 = f64)
//!      6     2  reserved, zero
//!      8     8  q, u64
//!     16     8  d, u64
//!     24   4*q  labels, u32
//!      …  q*d*w data, row-major
//! ```
//!
//! Files of dtype 1 are narrowed to `f32` with round-to-nearest-even when
//! read. Concurrent writers to the same path are not coordinated.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{validate_feature_set, LabeledFeatureSet, RawFeatureSet, ValidationError};

pub const MAGIC: [u8; 4] = *b"SIDX";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum SidxError {
    #[error("bad magic {0:02x?}, expected \"SIDX\"")]
    BadMagic([u8; 4]),
    #[error("unsupported SIDX version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("reserved header bytes must be zero, found {0:02x?}")]
    NonZeroReserved([u8; 2]),
    #[error("size mismatch: header declares q={q}, d={d} ({expected} bytes) but the file has {actual} bytes")]
    SizeMismatch { q: u64, d: u64, expected: String, actual: usize },
    #[error("file of {0} bytes is shorter than the 24-byte header")]
    TruncatedHeader(usize),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::F64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SidxHeader {
    pub version: u8,
    pub dtype: Dtype,
    pub q: u64,
    pub d: u64,
}

impl SidxHeader {
    /// Total file size implied by the header, or `None` if it overflows.
    pub fn file_len(&self) -> Option<u128> {
        let q = u128::from(self.q);
        let d = u128::from(self.d);
        let w = self.dtype.width() as u128;
        let data = q.checked_mul(d)?.checked_mul(w)?;
        (HEADER_LEN as u128 + 4 * q).checked_add(data)
    }
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

/// Decodes and validates an in-memory SIDX image.
pub fn decode_sidx(bytes: &[u8], name: &str) -> Result<(LabeledFeatureSet, SidxHeader), SidxError> {
    if bytes.len() < HEADER_LEN {
        return Err(SidxError::TruncatedHeader(bytes.len()));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4-byte slice");
    if magic != MAGIC {
        return Err(SidxError::BadMagic(magic));
    }
    if bytes[4] != VERSION {
        return Err(SidxError::UnsupportedVersion(bytes[4]));
    }
    let dtype = Dtype::from_code(bytes[5]).ok_or(SidxError::UnsupportedDtype(bytes[5]))?;
    if bytes[6..8] != [0, 0] {
        return Err(SidxError::NonZeroReserved([bytes[6], bytes[7]]));
    }
    let header = SidxHeader {
        version: bytes[4],
        dtype,
        q: u64_at(bytes, 8),
        d: u64_at(bytes, 16),
    };
    let expected = header.file_len();
    if expected != Some(bytes.len() as u128) {
        return Err(SidxError::SizeMismatch {
            q: header.q,
            d: header.d,
            expected: expected.map_or_else(|| "more than 2^128".to_string(), |n| n.to_string()),
            actual: bytes.len(),
        });
    }
    // The length check bounds q and d by the file size.
    let q = header.q as usize;
    let d = header.d as usize;
    let body = &bytes[HEADER_LEN..];
    let (label_bytes, data) = body.split_at(4 * q);
    let labels = label_bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    let points = match dtype {
        Dtype::F32 => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect(),
        Dtype::F64 => data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")) as f32)
            .collect(),
    };
    let fs = validate_feature_set(RawFeatureSet {
        name: name.to_string(),
        dim: d,
        points,
        labels,
    })?;
    Ok((fs, header))
}

/// Encodes a set; `Dtype::F64` widens every value exactly.
pub fn encode_sidx(fs: &LabeledFeatureSet, dtype: Dtype) -> Vec<u8> {
    let q = fs.len();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * q + fs.points().len() * dtype.width());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(dtype.code());
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(q as u64).to_le_bytes());
    out.extend_from_slice(&(fs.dim() as u64).to_le_bytes());
    for &l in fs.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    for &v in fs.points() {
        match dtype {
            Dtype::F32 => out.extend_from_slice(&v.to_le_bytes()),
            Dtype::F64 => out.extend_from_slice(&f64::from(v).to_le_bytes()),
        }
    }
    out
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn read_sidx_with_header(path: &Path) -> Result<(LabeledFeatureSet, SidxHeader), SidxError> {
    let bytes = fs::read(path).map_err(|source| SidxError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_sidx(&bytes, &stem(path))
}

/// Reads a SIDX file; the set is named after the file stem.
pub fn read_sidx(path: &Path) -> Result<LabeledFeatureSet, SidxError> {
    read_sidx_with_header(path).map(|(fs, _)| fs)
}

/// Writes a set as dtype-0 SIDX.
pub fn write_sidx(fs: &LabeledFeatureSet, path: &Path) -> Result<(), SidxError> {
    fs::write(path, encode_sidx(fs, Dtype::F32)).map_err(|source| SidxError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> LabeledFeatureSet {
        LabeledFeatureSet::new("two", 1, vec![0.0, 1.0], vec![0, 1]).unwrap()
    }

    #[test]
    fn minimal_file_layout() {
        let bytes = encode_sidx(&two_point(), Dtype::F32);
        // 24-byte header + 2 labels + 2 values
        assert_eq!(bytes.len(), 40);
        let mut want = b"SIDX\x01\x00\x00\x00".to_vec();
        want.extend_from_slice(&2u64.to_le_bytes());
        want.extend_from_slice(&1u64.to_le_bytes());
        want.extend_from_slice(&[0, 0, 0, 0, 1, 0, 0, 0]);
        want.extend_from_slice(&0.0f32.to_le_bytes());
        want.extend_from_slice(&1.0f32.to_le_bytes());
        assert_eq!(bytes, want);
        let (fs, header) = decode_sidx(&bytes, "two").unwrap();
        assert_eq!(fs, two_point());
        assert_eq!(header.dtype, Dtype::F32);
    }

    #[test]
    fn truncated_data_reports_sizes() {
        let bytes = encode_sidx(&two_point(), Dtype::F32);
        let err = decode_sidx(&bytes[..38], "t").unwrap_err();
        match err {
            SidxError::SizeMismatch { expected, actual, .. } => {
                assert_eq!(expected, "40");
                assert_eq!(actual, 38);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_string(&bytes[..38]).contains("40 bytes"));
    }

    fn err_string(bytes: &[u8]) -> String {
        decode_sidx(bytes, "t").unwrap_err().to_string()
    }

    #[test]
    fn header_errors() {
        let good = encode_sidx(&two_point(), Dtype::F32);
        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(decode_sidx(&b, "t"), Err(SidxError::BadMagic(_))));
        let mut b = good.clone();
        b[4] = 2;
        assert!(matches!(decode_sidx(&b, "t"), Err(SidxError::UnsupportedVersion(2))));
        let mut b = good.clone();
        b[5] = 7;
        assert!(matches!(decode_sidx(&b, "t"), Err(SidxError::UnsupportedDtype(7))));
        let mut b = good.clone();
        b[7] = 1;
        assert!(matches!(decode_sidx(&b, "t"), Err(SidxError::NonZeroReserved(_))));
        assert!(matches!(decode_sidx(&good[..10], "t"), Err(SidxError::TruncatedHeader(10))));
    }

    #[test]
    fn huge_declared_sizes_do_not_allocate() {
        let mut b = encode_sidx(&two_point(), Dtype::F64);
        b[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        b[16..24].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_sidx(&b, "t"), Err(SidxError::SizeMismatch { .. })));
    }

    #[test]
    fn non_finite_payload() {
        let mut b = encode_sidx(&two_point(), Dtype::F32);
        b[36..40].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode_sidx(&b, "t"),
            Err(SidxError::Invalid(ValidationError::NonFiniteValue { row: 1, col: 0 }))
        ));
    }

    #[test]
    fn f64_files_are_narrowed_to_nearest() {
        let fs = two_point();
        let mut b = encode_sidx(&fs, Dtype::F64);
        assert_eq!(b.len(), 24 + 8 + 16);
        // 1 + 2^-24 lies exactly between two f32 values; ties go to even (1.0).
        let tie = 1.0f64 + 2f64.powi(-24);
        b[40..48].copy_from_slice(&tie.to_le_bytes());
        let (back, header) = decode_sidx(&b, "t").unwrap();
        assert_eq!(header.dtype, Dtype::F64);
        assert_eq!(back.points(), &[0.0, 1.0]);
        // f64 values beyond f32 range become infinite and are rejected.
        b[40..48].copy_from_slice(&1e300f64.to_le_bytes());
        assert!(matches!(decode_sidx(&b, "t"), Err(SidxError::Invalid(_))));
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_sidx(Path::new("/nonexistent/dir/x.sidx")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.sidx"));
    }
}

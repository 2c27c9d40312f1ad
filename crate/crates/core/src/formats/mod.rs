//! On-disk formats: the SIDX binary container, CSV interchange and the
//! run manifest.

pub mod csv;
pub mod manifest;
pub mod sidx;

pub use self::csv::{read_csv, read_csv_bytes, write_csv, CsvError};
pub use manifest::{load_manifest, parse_manifest, ManifestError, RunManifest};
pub use sidx::{decode_sidx, encode_sidx, read_sidx, read_sidx_with_header, write_sidx, Dtype, SidxError, SidxHeader};

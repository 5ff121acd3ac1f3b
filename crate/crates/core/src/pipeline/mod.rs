//! File formats, dataset ingestion and preprocessing used by the CLI.

mod format;
mod kv;
mod manifest;
mod normalize;
mod volume_file;

pub use format::{fmt_num, write_csv};
pub use kv::{get_or, parse_kv, read_kv, KvConfig};
pub use manifest::{load_records, read_manifest, write_manifest, ManifestRow, CLINICAL_COLUMNS, REQUIRED_COLUMNS};
pub use normalize::normalize_intensity;
pub use volume_file::{decode_volume, encode_volume, read_volume, write_volume, VOLUME_MAGIC};

//! File formats: NPY arrays, CSV manifests and score tables.

pub mod npy;
pub mod table;

pub use npy::{parse_npy, read_map, read_mask, read_npy, write_map, write_mask, write_npy, NpyArray, NpyData};
pub use table::{
    format_f64, read_manifest, read_scores, write_manifest, write_scores, Manifest, ManifestRow, ScoreTable,
};

//! Motion and reference-data file formats.

mod bvh;
mod clip_json;
mod reference;

pub use bvh::{parse_bvh, parse_bvh_with, serialize_bvh, serialize_bvh_with, BvhOptions};
pub use clip_json::{load_clip_json, save_clip_json, CLIP_SCHEMA_VERSION};
pub use reference::{
    load_reference_table, ReferenceRow, ReferenceTable, REFERENCE_HEADER, REFERENCE_TABLE1_CSV,
    REFERENCE_TABLE1_MPJPE_SUM,
};

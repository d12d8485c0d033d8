//! File formats: PLY clouds, scene directories and dataset indices.

mod ply;
mod scene_dir;

pub use ply::{parse_ply, ply_bytes, read_ply, write_ply, PlyFormat};
pub(crate) use scene_dir::{ensure_dir, write_json};
pub use scene_dir::{
    list_scenes, read_index, read_scene, write_index, write_scene, DatasetIndex, PartEntry,
    SceneManifest, INDEX_FILE, SCENE_FILE,
};

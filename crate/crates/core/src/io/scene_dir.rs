//! On-disk scenes and datasets.
//!
//! ```text
//! <scene>/scene.json      manifest: label, seed, metadata, parts with poses
//! <scene>/part_000.ply    canonical clouds; parts sharing geometry share a file
//! <dataset>/index.json    dataset manifest listing scene directory names
//! <dataset>/<scene id>/   one scene directory per entry
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::datagen::SceneMeta;
use crate::error::{Error, Result};
use crate::geometry::{Part, PointCloud, Pose, Scene};
use crate::io::{read_ply, write_ply, PlyFormat};

pub const SCENE_FILE: &str = "scene.json";
pub const INDEX_FILE: &str = "index.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartEntry {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Canonical cloud file, relative to the scene directory.
    pub cloud: String,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub version: u32,
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub meta: Option<SceneMeta>,
    pub parts: Vec<PartEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetIndex {
    pub version: u32,
    pub label: String,
    pub seed: Option<u64>,
    pub scenes: Vec<String>,
}

impl DatasetIndex {
    pub fn new(label: impl Into<String>, seed: Option<u64>, scenes: Vec<String>) -> Self {
        Self {
            version: FORMAT_VERSION,
            label: label.into(),
            seed,
            scenes,
        }
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `scene` into `dir` (created if needed) and returns its manifest.
pub fn write_scene(
    dir: &Path,
    scene: &Scene,
    id: &str,
    seed: Option<u64>,
    meta: Option<&SceneMeta>,
) -> Result<SceneManifest> {
    ensure_dir(dir)?;
    let mut files: Vec<(*const PointCloud, String)> = Vec::new();
    let mut parts = Vec::with_capacity(scene.len());
    for (k, part) in scene.parts().iter().enumerate() {
        let ptr = Arc::as_ptr(part.canonical());
        let file = match files.iter().find(|(p, _)| *p == ptr) {
            Some((_, f)) => f.clone(),
            None => {
                let f = format!("part_{k:03}.ply");
                write_ply(&dir.join(&f), part.canonical(), PlyFormat::BinaryLittleEndian)?;
                files.push((ptr, f.clone()));
                f
            }
        };
        parts.push(PartEntry {
            id: part.id(),
            name: meta.and_then(|m| m.part_names.get(k).cloned()),
            cloud: file,
            pose: *part.pose(),
        });
    }
    let manifest = SceneManifest {
        version: FORMAT_VERSION,
        id: id.to_string(),
        label: scene.label().to_string(),
        seed,
        meta: meta.cloned(),
        parts,
    };
    write_json(&dir.join(SCENE_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_scene(dir: &Path) -> Result<(Scene, SceneManifest)> {
    let path = dir.join(SCENE_FILE);
    let manifest: SceneManifest = read_json(&path)?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::InvalidInput(format!(
            "{}: unsupported version {}",
            path.display(),
            manifest.version
        )));
    }
    let mut clouds: Vec<(String, Arc<PointCloud>)> = Vec::new();
    let mut parts = Vec::with_capacity(manifest.parts.len());
    for entry in &manifest.parts {
        if entry.cloud.contains("..") || Path::new(&entry.cloud).is_absolute() {
            return Err(Error::InvalidInput(format!(
                "{}: cloud path {:?} escapes the scene directory",
                path.display(),
                entry.cloud
            )));
        }
        let cloud = match clouds.iter().find(|(f, _)| *f == entry.cloud) {
            Some((_, c)) => Arc::clone(c),
            None => {
                let c = Arc::new(read_ply(&dir.join(&entry.cloud))?);
                clouds.push((entry.cloud.clone(), Arc::clone(&c)));
                c
            }
        };
        parts.push(Part::new(entry.id, cloud, entry.pose));
    }
    let scene = Scene::new(parts, manifest.label.clone())?;
    Ok((scene, manifest))
}

pub fn write_index(root: &Path, index: &DatasetIndex) -> Result<()> {
    ensure_dir(root)?;
    write_json(&root.join(INDEX_FILE), index)
}

pub fn read_index(root: &Path) -> Result<DatasetIndex> {
    read_json(&root.join(INDEX_FILE))
}

/// Scene directories under `root`: those listed in `index.json` if present,
/// otherwise every subdirectory holding a `scene.json`, sorted by name.
pub fn list_scenes(root: &Path) -> Result<Vec<String>> {
    if root.join(INDEX_FILE).exists() {
        return Ok(read_index(root)?.scenes);
    }
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().join(SCENE_FILE).is_file() {
            ids.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    ids.sort();
    Ok(ids)
}

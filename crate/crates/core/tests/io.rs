mod common;

use std::path::Path;

use assembloid::datagen::{generate_scene, Family, ShapeSpec};
use assembloid::io::{
    parse_ply, ply_bytes, read_index, read_ply, read_scene, write_index, write_ply, write_scene,
    DatasetIndex, PlyFormat,
};
use assembloid::Error;
use common::*;

#[test]
fn ply_round_trips_in_both_formats() {
    let cloud = random_cloud(&mut rng(1), 57, 1.0);
    let dir = tempfile::tempdir().unwrap();
    for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
        let path = dir.path().join(format!("{format:?}.ply"));
        write_ply(&path, &cloud, format).unwrap();
        assert_eq!(read_ply(&path).unwrap(), cloud, "{format:?}");
    }
}

#[test]
fn ply_skips_extra_properties_and_elements() {
    let text = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\n\
                property float nx\nproperty float x\nproperty uchar red\nproperty float y\nproperty float z\n\
                element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                0 1.5 255 2 3\n0 -1 0 0.25 0\n3 0 1 1\n";
    let cloud = parse_ply(text.as_bytes(), Path::new("hand.ply")).unwrap();
    let xyz: Vec<[f64; 3]> = cloud.points().iter().map(|p| [p.x, p.y, p.z]).collect();
    assert_eq!(xyz, vec![[1.5, 2.0, 3.0], [-1.0, 0.25, 0.0]]);
}

#[test]
fn binary_float_and_double_vertices_parse() {
    let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nproperty double y\nproperty float z\nend_header\n".to_vec();
    bytes.extend(1.5f32.to_le_bytes());
    bytes.extend((-2.25f64).to_le_bytes());
    bytes.extend(4.0f32.to_le_bytes());
    let cloud = parse_ply(&bytes, Path::new("b.ply")).unwrap();
    assert_eq!(cloud.points()[0], nalgebra::Point3::new(1.5, -2.25, 4.0));
}

#[test]
fn malformed_ply_is_rejected_with_the_path() {
    let big = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
    let err = parse_ply(big.as_bytes(), Path::new("big.ply")).unwrap_err();
    assert!(matches!(&err, Error::Ply { .. }));
    assert!(err.to_string().contains("big.ply"));
    let short = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nend_header\n\0\0";
    assert!(parse_ply(short, Path::new("s.ply")).is_err());
    let no_z = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n";
    assert!(parse_ply(no_z.as_bytes(), Path::new("z.ply")).is_err());
    assert!(parse_ply(b"not a ply", Path::new("n.ply")).is_err());
    let nan = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\nnan 0 0\n";
    assert!(parse_ply(nan.as_bytes(), Path::new("nan.ply")).is_err());
}

#[test]
fn ply_bytes_are_deterministic() {
    let cloud = random_cloud(&mut rng(2), 10, 1.0);
    assert_eq!(ply_bytes(&cloud, PlyFormat::Ascii), ply_bytes(&cloud, PlyFormat::Ascii));
    let bin = ply_bytes(&cloud, PlyFormat::BinaryLittleEndian);
    assert_eq!(bin, ply_bytes(&cloud, PlyFormat::BinaryLittleEndian));
    assert_eq!(parse_ply(&bin, Path::new("m.ply")).unwrap(), cloud);
}

#[test]
fn scene_round_trips_and_shares_geometry() {
    let (scene, meta) = generate_scene(&ShapeSpec::new(Family::Chair, 32).with_parts(6), &mut rng(3)).unwrap();
    let perturbed = assembloid::datagen::perturb(&scene, &assembloid::datagen::NoiseLevel::EXCESSIVE, &mut rng(4));
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_scene(dir.path(), &perturbed, "s0", Some(3), Some(&meta)).unwrap();
    // Four legs share one file.
    let mut files: Vec<&str> = manifest.parts.iter().map(|p| p.cloud.as_str()).collect();
    files.dedup();
    assert_eq!(files.len(), 3);
    let (back, m2) = read_scene(dir.path()).unwrap();
    assert_eq!(back, perturbed);
    assert_eq!(m2, manifest);
    assert!(std::sync::Arc::ptr_eq(back.parts()[2].canonical(), back.parts()[5].canonical()));
}

#[test]
fn scene_manifest_rejects_unknown_keys_and_escaping_paths() {
    let scene = random_scene(&mut rng(5), 2, 8);
    let dir = tempfile::tempdir().unwrap();
    write_scene(dir.path(), &scene, "s", None, None).unwrap();
    let path = dir.path().join("scene.json");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("\"label\"", "\"lable\": 1, \"label\"", 1)).unwrap();
    assert!(matches!(read_scene(dir.path()), Err(Error::Json { .. })));
    std::fs::write(&path, text.replace("part_000.ply", "../part_000.ply")).unwrap();
    assert!(matches!(read_scene(dir.path()), Err(Error::InvalidInput(_))));
}

#[test]
fn index_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let index = DatasetIndex::new("chair", Some(9), vec!["a".into(), "b".into()]);
    write_index(dir.path(), &index).unwrap();
    assert_eq!(read_index(dir.path()).unwrap(), index);
}

#[test]
fn missing_files_report_their_path() {
    let err = read_ply(Path::new("/nonexistent/x.ply")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/x.ply"), "{err}");
}

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use qoe3d::asset_io::{write_ply, Model3D, PlyEncoding};
use qoe3d::session::{ExperimentConfig, Manifest, StimulusMeta};

/// A small coloured point cloud whose shape depends on `variant`.
pub fn tiny_model(variant: usize) -> Model3D {
    let v = variant as f64;
    let positions = vec![
        [-0.5, -0.5, -0.5],
        [0.5, 0.5, 0.5],
        [0.25 - v * 0.01, -0.125, 0.0],
        [0.0, 0.375, -0.25 + v * 0.01],
    ];
    let colors = vec![[255, 0, 0], [0, 255, 0], [0, 0, 255], [variant as u8, 7, 9]];
    Model3D::new(positions, Some(colors), None, vec![]).unwrap()
}

/// Writes a PLY file for every manifest entry under `dir`.
pub fn write_assets(manifest: &Manifest, dir: &Path) {
    for (i, m) in manifest.entries().iter().enumerate() {
        let bytes = write_ply(&tiny_model(i), PlyEncoding::BinaryLittleEndian);
        std::fs::write(dir.join(&m.asset_path), bytes).unwrap();
    }
}

/// One source `a` with `n` impaired variants, assets written to `dir`.
pub fn small_manifest(dir: &Path, n: usize) -> Manifest {
    let combos = [("r5", "r6"), ("r5", "r3"), ("r2", "r6"), ("r1", "r1"), ("r2", "r3"), ("r5", "r1")];
    let mut entries = vec![StimulusMeta {
        id: "a".into(),
        source_id: "a".into(),
        geometry_param: None,
        attribute_param: None,
        asset_path: PathBuf::from("a.ply"),
        content_hash: None,
    }];
    for (g, at) in combos.iter().take(n) {
        let id = format!("a_g{g}_a{at}");
        entries.push(StimulusMeta {
            asset_path: PathBuf::from(format!("{id}.ply")),
            id,
            source_id: "a".into(),
            geometry_param: Some(g.to_string()),
            attribute_param: Some(at.to_string()),
            content_hash: None,
        });
    }
    let m = Manifest::new(entries, dir);
    write_assets(&m, dir);
    m
}

pub fn config(name: &str, results: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(name);
    c.result_path = results.to_path_buf();
    c.traps_per_source = 0;
    c.display_order_seed = Some(5);
    c
}

/// Random valid model: point cloud or mesh, with optional colours and unit
/// normals, spanning a random box so that normalization has work to do.
pub fn random_model(rng: &mut impl rand::Rng) -> Model3D {
    let n = rng.random_range(3..200usize);
    let scale = 10f64.powf(rng.random_range(-3.0..4.0));
    let offset: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1e3..1e3));
    let positions: Vec<[f64; 3]> = (0..n)
        .map(|_| std::array::from_fn(|k| offset[k] + scale * rng.random_range(-1.0..1.0)))
        .collect();
    let colors = rng
        .random_bool(0.5)
        .then(|| (0..n).map(|_| std::array::from_fn(|_| rng.random())).collect());
    let normals = rng.random_bool(0.5).then(|| {
        (0..n)
            .map(|_| loop {
                let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if len > 0.1 {
                    break [v[0] / len, v[1] / len, v[2] / len];
                }
            })
            .collect()
    });
    let faces = if rng.random_bool(0.5) {
        (0..rng.random_range(1..2 * n))
            .map(|_| std::array::from_fn(|_| rng.random_range(0..n as u32)))
            .collect()
    } else {
        Vec::new()
    };
    Model3D::new(positions, colors, normals, faces).unwrap()
}

/// Same values as `model` after the f32 narrowing done by packing.
pub fn narrowed(model: &Model3D) -> Model3D {
    let narrow = |v: &[f64; 3]| v.map(|x| x as f32 as f64);
    Model3D::new(
        model.positions().iter().map(narrow).collect(),
        model.colors().map(<[_]>::to_vec),
        model.normals().map(|n| n.iter().map(narrow).collect()),
        model.faces().to_vec(),
    )
    .unwrap()
}

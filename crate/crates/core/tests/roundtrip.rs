mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qoe3d::asset_io::*;

fn model(seed: u64) -> Model3D {
    common::random_model(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binary_ply_is_exact(seed in any::<u64>()) {
        let m = model(seed);
        let bytes = write_ply(&m, PlyEncoding::BinaryLittleEndian);
        let back = parse_model(&bytes, FormatHint::Auto).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(write_ply(&back, PlyEncoding::BinaryLittleEndian), bytes);
    }

    #[test]
    fn ascii_ply_is_close(seed in any::<u64>()) {
        let m = model(seed);
        let back = parse_model(&write_ply(&m, PlyEncoding::Ascii), FormatHint::Ply).unwrap();
        prop_assert_eq!(back.faces(), m.faces());
        prop_assert_eq!(back.colors(), m.colors());
        for (p, q) in back.positions().iter().zip(m.positions()) {
            for k in 0..3 {
                prop_assert!(close(p[k], q[k]), "{} vs {}", p[k], q[k]);
            }
        }
        prop_assert_eq!(back.normals().is_some(), m.normals().is_some());
    }

    #[test]
    fn packing_is_byte_exact(seed in any::<u64>()) {
        let m = model(seed);
        let packed = pack_geometry(&m);
        let bytes = packed.to_bytes();
        let again = PackedGeometry::from_bytes(&bytes).unwrap();
        prop_assert_eq!(again.to_bytes(), bytes);
        prop_assert_eq!(again.content_hash(), packed.content_hash());
        let unpacked = again.unpack().unwrap();
        prop_assert_eq!(&unpacked, &common::narrowed(&m));
        prop_assert_eq!(pack_geometry(&unpacked).to_bytes(), packed.to_bytes());
    }

    #[test]
    fn normalization_postconditions(seed in any::<u64>()) {
        let n = normalize_model(&model(seed)).unwrap();
        let bb = compute_bounds(&n);
        prop_assert!((bb.longest_edge() - 1.0).abs() <= 1e-6);
        for c in bb.center() {
            prop_assert!(c.abs() <= 1e-6);
        }
    }

    #[test]
    fn truncated_input_never_panics(seed in any::<u64>(), cut in 0.0f64..1.0) {
        let bytes = write_ply(&model(seed), PlyEncoding::BinaryLittleEndian);
        let end = (bytes.len() as f64 * cut) as usize;
        let _ = parse_model(&bytes[..end], FormatHint::Auto);
        let mut corrupt = bytes.clone();
        corrupt[end.min(bytes.len() - 1)] ^= 0x5a;
        let _ = parse_model(&corrupt, FormatHint::Auto);
        let _ = PackedGeometry::from_bytes(&bytes[..end]);
    }
}

#[test]
fn obj_matches_equivalent_ply() {
    let obj = b"# quad\nmtllib x.mtl\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nusemtl red\nf 1//1 2//1 3//1 4//1\n";
    let m = parse_model(obj, FormatHint::Auto).unwrap();
    assert_eq!(m.kind(), ModelKind::TriangleMesh);
    assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    assert_eq!(m.normals().unwrap(), &[[0.0, 0.0, 1.0]; 4]);
    let via_ply = parse_model(&write_ply(&m, PlyEncoding::Ascii), FormatHint::Auto).unwrap();
    assert_eq!(via_ply, m);
}

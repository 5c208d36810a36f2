//! Wavefront OBJ subset: `v` (optionally followed by an RGB triple), `vn`
//! and `f`. Materials, texture coordinates and groups are skipped; polygons
//! are fan-triangulated.

use super::model::{unit_normals, Model3D};
use super::{AssetError, Location};

const KNOWN_STATEMENTS: &[&str] = &[
    "v", "vn", "vt", "vp", "f", "l", "p", "o", "g", "s", "usemtl", "mtllib",
];

pub(crate) fn looks_like_obj(bytes: &[u8]) -> bool {
    for raw in bytes.split(|&b| b == b'\n') {
        let Ok(line) = std::str::from_utf8(raw) else {
            return false;
        };
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let keyword = line.split_ascii_whitespace().next().unwrap_or_default();
        return KNOWN_STATEMENTS.contains(&keyword);
    }
    false
}

/// Resolves a 1-based (or negative, relative) OBJ index against `len`
/// items seen so far.
fn resolve_index(token: &str, len: usize, loc: Location) -> Result<usize, AssetError> {
    let raw: i64 = token
        .parse()
        .map_err(|_| AssetError::malformed(loc, format!("bad index {token:?}")))?;
    let idx = match raw {
        0 => None,
        r if r > 0 => Some(r as usize - 1),
        r => (len as i64 + r).try_into().ok(),
    };
    match idx {
        Some(i) if i < len => Ok(i),
        _ => Err(AssetError::malformed(
            loc,
            format!("index {raw} out of range ({len} defined)"),
        )),
    }
}

fn parse_floats<'a>(
    words: impl Iterator<Item = &'a str>,
    loc: Location,
) -> Result<Vec<f64>, AssetError> {
    words
        .map(|w| {
            w.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AssetError::malformed(loc, format!("bad number {w:?}")))
        })
        .collect()
}

pub(crate) fn parse_obj(bytes: &[u8]) -> Result<Model3D, AssetError> {
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    let mut any_color = false;
    let mut vn = Vec::new();
    let mut vertex_normal: Vec<Option<usize>> = Vec::new();
    let mut faces = Vec::new();
    let mut polygon = Vec::new();

    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let loc = Location::Line(i + 1);
        let line = std::str::from_utf8(raw)
            .map_err(|_| AssetError::malformed(loc, "line is not valid UTF-8"))?;
        let line = line.split('#').next().unwrap_or_default().trim();
        let mut words = line.split_ascii_whitespace();
        let Some(keyword) = words.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let vals = parse_floats(words, loc)?;
                match vals.len() {
                    3 | 4 => colors.push([128, 128, 128]),
                    6 | 7 => {
                        any_color = true;
                        let c = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
                        colors.push([c(vals[3]), c(vals[4]), c(vals[5])]);
                    }
                    n => return Err(AssetError::malformed(loc, format!("vertex with {n} components"))),
                }
                positions.push([vals[0], vals[1], vals[2]]);
                vertex_normal.push(None);
            }
            "vn" => {
                let vals = parse_floats(words, loc)?;
                if vals.len() != 3 {
                    return Err(AssetError::malformed(loc, "vn needs 3 components"));
                }
                vn.push([vals[0], vals[1], vals[2]]);
            }
            "f" => {
                polygon.clear();
                for corner in words {
                    let mut parts = corner.split('/');
                    let v = resolve_index(parts.next().unwrap_or_default(), positions.len(), loc)?;
                    let _texcoord = parts.next();
                    if let Some(n) = parts.next().filter(|s| !s.is_empty()) {
                        let n = resolve_index(n, vn.len(), loc)?;
                        vertex_normal[v].get_or_insert(n);
                    }
                    polygon.push(v as u32);
                }
                if polygon.len() < 3 {
                    return Err(AssetError::malformed(loc, format!("face with {} vertices", polygon.len())));
                }
                for k in 1..polygon.len() - 1 {
                    faces.push([polygon[0], polygon[k], polygon[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if positions.is_empty() {
        return Err(AssetError::malformed(Location::Line(1), "no vertices"));
    }

    let normals = if vertex_normal.iter().all(Option::is_some) {
        Some(vertex_normal.iter().map(|n| vn[n.unwrap()]).collect())
    } else if vertex_normal.iter().all(Option::is_none) && vn.len() == positions.len() {
        Some(vn)
    } else {
        None
    };
    let normals = normals.and_then(unit_normals);
    Model3D::new(positions, any_color.then_some(colors), normals, faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asset_io::ModelKind;

    #[test]
    fn single_triangle() {
        let m = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(m.kind(), ModelKind::TriangleMesh);
        assert_eq!(m.point_count(), 3);
        assert_eq!(m.faces(), &[[0, 1, 2]]);
        assert!(m.normals().is_none());
    }

    #[test]
    fn quad_is_fanned_and_normals_follow_faces() {
        let src = "mtllib x.mtl\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvn 0 0 2\nusemtl m\nf 1/1/1 2/1/1 3//1 -1//1\n";
        let m = parse_obj(src.as_bytes()).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.normals().unwrap(), &[[0.0, 0.0, 1.0]; 4]);
    }

    #[test]
    fn vertex_colors() {
        let m = parse_obj(b"v 0 0 0 1 0 0.5\n").unwrap();
        assert_eq!(m.colors().unwrap(), &[[255, 0, 128]]);
        assert_eq!(m.kind(), ModelKind::PointCloud);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(
            parse_obj(b"v 0 0 0\nv 1 0 0\nf 1 2 3\n"),
            Err(AssetError::MalformedFile { location: Location::Line(3), .. })
        ));
        assert!(matches!(
            parse_obj(b"v 0 0 x\n"),
            Err(AssetError::MalformedFile { location: Location::Line(1), .. })
        ));
        assert!(matches!(parse_obj(b"# nothing\n"), Err(AssetError::MalformedFile { .. })));
    }
}

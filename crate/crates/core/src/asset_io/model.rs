use serde::{Deserialize, Serialize};

use super::AssetError;

/// Whether a model is drawn as points or as shaded triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PointCloud,
    TriangleMesh,
}

/// Parsed stimulus geometry.
///
/// Positions and normals are kept in double precision so that size
/// normalization is exactly idempotent; the packed wire format narrows them
/// to `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model3D {
    kind: ModelKind,
    positions: Vec<[f64; 3]>,
    colors: Option<Vec<[u8; 3]>>,
    normals: Option<Vec<[f64; 3]>>,
    faces: Vec<[u32; 3]>,
}

/// Tolerance on normal length accepted without renormalizing.
pub(crate) const NORMAL_TOLERANCE: f64 = 1e-3;

impl Model3D {
    /// Builds a model and checks every invariant. The kind is inferred from
    /// whether any faces are present.
    pub fn new(
        positions: Vec<[f64; 3]>,
        colors: Option<Vec<[u8; 3]>>,
        normals: Option<Vec<[f64; 3]>>,
        faces: Vec<[u32; 3]>,
    ) -> Result<Self, AssetError> {
        let kind = if faces.is_empty() {
            ModelKind::PointCloud
        } else {
            ModelKind::TriangleMesh
        };
        let model = Model3D {
            kind,
            positions,
            colors,
            normals,
            faces,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn point_cloud(positions: Vec<[f64; 3]>) -> Result<Self, AssetError> {
        Self::new(positions, None, None, Vec::new())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    pub fn normals(&self) -> Option<&[[f64; 3]]> {
        self.normals.as_deref()
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn point_count(&self) -> usize {
        self.positions.len()
    }

    /// Returns a copy with every position mapped through `f`.
    pub fn map_positions(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Model3D {
        Model3D {
            kind: self.kind,
            positions: self.positions.iter().copied().map(f).collect(),
            colors: self.colors.clone(),
            normals: self.normals.clone(),
            faces: self.faces.clone(),
        }
    }

    fn validate(&self) -> Result<(), AssetError> {
        if self.positions.is_empty() {
            return Err(AssetError::InvalidModel("model has no positions".into()));
        }
        if let Some(p) = self
            .positions
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(AssetError::InvalidModel(format!(
                "position {p} has a non-finite coordinate"
            )));
        }
        let n = self.positions.len();
        if let Some(colors) = &self.colors {
            if colors.len() != n {
                return Err(AssetError::InvalidModel(format!(
                    "{} colors for {n} positions",
                    colors.len()
                )));
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(AssetError::InvalidModel(format!(
                    "{} normals for {n} positions",
                    normals.len()
                )));
            }
            for (i, v) in normals.iter().enumerate() {
                let len = norm(*v);
                if !len.is_finite() || (len - 1.0).abs() > NORMAL_TOLERANCE {
                    return Err(AssetError::InvalidModel(format!(
                        "normal {i} has length {len}"
                    )));
                }
            }
        }
        for (i, face) in self.faces.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&idx| idx as usize >= n) {
                return Err(AssetError::InvalidModel(format!(
                    "face {i} references vertex {bad} of {n}"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Rescales normals to unit length. Normals already within tolerance are
/// left bit-for-bit untouched; if any normal has zero or non-finite length
/// the whole attribute is dropped.
pub(crate) fn unit_normals(normals: Vec<[f64; 3]>) -> Option<Vec<[f64; 3]>> {
    let mut out = normals;
    for v in out.iter_mut() {
        let len = norm(*v);
        if !len.is_finite() || len == 0.0 {
            tracing::warn!("dropping normals: found a zero-length normal");
            return None;
        }
        if (len - 1.0).abs() > NORMAL_TOLERANCE / 2.0 {
            *v = [v[0] / len, v[1] / len, v[2] / len];
        }
    }
    Some(out)
}

/// Axis-aligned bounding box over model positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoundingBox {
    pub fn center(&self) -> [f64; 3] {
        [
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
            (self.min[2] + self.max[2]) / 2.0,
        ]
    }

    pub fn extents(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn longest_edge(&self) -> f64 {
        let e = self.extents();
        e[0].max(e[1]).max(e[2])
    }
}

pub fn compute_bounds(model: &Model3D) -> BoundingBox {
    let first = model.positions[0];
    let mut bb = BoundingBox {
        min: first,
        max: first,
    };
    for p in &model.positions[1..] {
        for axis in 0..3 {
            bb.min[axis] = bb.min[axis].min(p[axis]);
            bb.max[axis] = bb.max[axis].max(p[axis]);
        }
    }
    bb
}

/// Centers the bounding box on the origin and scales uniformly so the
/// longest edge is 1. Attributes and faces are carried over unchanged.
pub fn normalize_model(model: &Model3D) -> Result<Model3D, AssetError> {
    let bb = compute_bounds(model);
    let longest = bb.longest_edge();
    if longest <= 0.0 || !longest.is_finite() {
        return Err(AssetError::DegenerateModel);
    }
    let c = bb.center();
    Ok(model.map_positions(|p| {
        [
            (p[0] - c[0]) / longest,
            (p[1] - c[1]) / longest,
            (p[2] - c[2]) / longest,
        ]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_of_single_point() {
        let m = Model3D::point_cloud(vec![[1.0, 2.0, 3.0]]).unwrap();
        let bb = compute_bounds(&m);
        assert_eq!(bb.min, [1.0, 2.0, 3.0]);
        assert_eq!(bb.max, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn bounds_of_two_points() {
        let m = Model3D::point_cloud(vec![[0.0; 3], [2.0; 3]]).unwrap();
        let bb = compute_bounds(&m);
        assert_eq!(bb.min, [0.0; 3]);
        assert_eq!(bb.max, [2.0; 3]);
    }

    #[test]
    fn cube_normalizes_to_unit_span() {
        let mut pts = Vec::new();
        for x in [0.0, 2.0] {
            for y in [0.0, 2.0] {
                for z in [0.0, 2.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        let m = normalize_model(&Model3D::point_cloud(pts).unwrap()).unwrap();
        let bb = compute_bounds(&m);
        assert_eq!(bb.min, [-0.5; 3]);
        assert_eq!(bb.max, [0.5; 3]);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let m = Model3D::point_cloud(vec![[1.0; 3]; 4]).unwrap();
        assert!(matches!(
            normalize_model(&m),
            Err(AssetError::DegenerateModel)
        ));
    }

    #[test]
    fn flat_model_still_normalizes() {
        let m = Model3D::point_cloud(vec![[0.0, 0.0, 5.0], [4.0, 0.0, 5.0]]).unwrap();
        let n = normalize_model(&m).unwrap();
        assert_eq!(n.positions(), &[[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]]);
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(Model3D::point_cloud(vec![]).is_err());
        assert!(Model3D::new(vec![[0.0; 3]], Some(vec![]), None, vec![]).is_err());
        assert!(Model3D::new(vec![[0.0; 3]], None, Some(vec![[0.0, 0.0, 2.0]]), vec![]).is_err());
        assert!(Model3D::new(vec![[0.0; 3]; 3], None, None, vec![[0, 1, 3]]).is_err());
        let mesh = Model3D::new(vec![[0.0; 3]; 3], None, None, vec![[0, 1, 2]]).unwrap();
        assert_eq!(mesh.kind(), ModelKind::TriangleMesh);
    }

    #[test]
    fn unit_normals_rescale_and_drop() {
        let n = unit_normals(vec![[0.0, 0.0, 3.0], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(n, vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]);
        assert!(unit_normals(vec![[0.0; 3]]).is_none());
    }
}

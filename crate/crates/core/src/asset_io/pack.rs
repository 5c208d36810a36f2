//! `P3DG` packed geometry container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "P3DG" | version: u8 | header_len: u32 | header: canonical JSON | payload
//! ```
//!
//! The payload holds contiguous sections in this order: positions
//! (`f32` × 3 per point), colors (`u8` × 3, when flagged), normals
//! (`f32` × 3, when flagged), faces (`u32` × 3 per triangle).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::Model3D;
use super::{AssetError, Location, ModelKind};

pub const PACK_MAGIC: &[u8; 4] = b"P3DG";
pub const PACK_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeFlags {
    pub colors: bool,
    pub normals: bool,
}

/// Field order is alphabetical so that serde output is canonical JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackedHeader {
    pub attributes: AttributeFlags,
    pub face_count: u64,
    pub kind: ModelKind,
    pub point_count: u64,
}

impl PackedHeader {
    pub fn payload_len(&self) -> usize {
        let n = self.point_count as usize;
        let mut len = n * 12;
        if self.attributes.colors {
            len += n * 3;
        }
        if self.attributes.normals {
            len += n * 12;
        }
        len + self.face_count as usize * 12
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedGeometry {
    pub header: PackedHeader,
    pub payload: Vec<u8>,
}

pub fn pack_geometry(model: &Model3D) -> PackedGeometry {
    let header = PackedHeader {
        attributes: AttributeFlags {
            colors: model.colors().is_some(),
            normals: model.normals().is_some(),
        },
        face_count: model.faces().len() as u64,
        kind: model.kind(),
        point_count: model.point_count() as u64,
    };
    let mut payload = Vec::with_capacity(header.payload_len());
    for p in model.positions() {
        for v in p {
            payload.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    if let Some(colors) = model.colors() {
        for c in colors {
            payload.extend_from_slice(c);
        }
    }
    if let Some(normals) = model.normals() {
        for n in normals {
            for v in n {
                payload.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    for f in model.faces() {
        for i in f {
            payload.extend_from_slice(&i.to_le_bytes());
        }
    }
    debug_assert_eq!(payload.len(), header.payload_len());
    PackedGeometry { header, payload }
}

fn f32_triples(bytes: &[u8]) -> Vec<[f64; 3]> {
    bytes
        .chunks_exact(12)
        .map(|c| {
            let f = |o: usize| f32::from_le_bytes(c[o..o + 4].try_into().unwrap()) as f64;
            [f(0), f(4), f(8)]
        })
        .collect()
}

impl PackedGeometry {
    pub fn header_json(&self) -> String {
        serde_json::to_string(&self.header).expect("header serializes")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = self.header_json();
        let mut out = Vec::with_capacity(9 + header.len() + self.payload.len());
        out.extend_from_slice(PACK_MAGIC);
        out.push(PACK_VERSION);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AssetError> {
        if bytes.len() < 9 || &bytes[..4] != PACK_MAGIC {
            return Err(AssetError::UnsupportedFormat("missing P3DG magic".into()));
        }
        if bytes[4] != PACK_VERSION {
            return Err(AssetError::UnsupportedFormat(format!(
                "P3DG version {} (expected {PACK_VERSION})",
                bytes[4]
            )));
        }
        let header_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let header_end = 9 + header_len;
        let raw = bytes
            .get(9..header_end)
            .ok_or_else(|| AssetError::malformed(Location::Byte(9), "truncated header"))?;
        let header: PackedHeader = serde_json::from_slice(raw)
            .map_err(|e| AssetError::malformed(Location::Byte(9), format!("bad header: {e}")))?;
        if serde_json::to_vec(&header).ok().as_deref() != Some(raw) {
            return Err(AssetError::malformed(Location::Byte(9), "header is not canonical JSON"));
        }
        let payload = &bytes[header_end..];
        if payload.len() != header.payload_len() {
            return Err(AssetError::malformed(
                Location::Byte(header_end),
                format!("payload is {} bytes, header implies {}", payload.len(), header.payload_len()),
            ));
        }
        Ok(PackedGeometry {
            header,
            payload: payload.to_vec(),
        })
    }

    pub fn unpack(&self) -> Result<Model3D, AssetError> {
        let n = self.header.point_count as usize;
        let mut rest = self.payload.as_slice();
        let mut take = |len: usize| {
            let (head, tail) = rest.split_at(len);
            rest = tail;
            head
        };
        let positions = f32_triples(take(n * 12));
        let colors = self
            .header
            .attributes
            .colors
            .then(|| take(n * 3).chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect());
        let normals = self.header.attributes.normals.then(|| f32_triples(take(n * 12)));
        let faces = take(self.header.face_count as usize * 12)
            .chunks_exact(12)
            .map(|c| {
                let u = |o: usize| u32::from_le_bytes(c[o..o + 4].try_into().unwrap());
                [u(0), u(4), u(8)]
            })
            .collect();
        let model = Model3D::new(positions, colors, normals, faces)?;
        if model.kind() != self.header.kind {
            return Err(AssetError::InvalidModel(format!(
                "header kind {:?} disagrees with face count",
                self.header.kind
            )));
        }
        Ok(model)
    }

    /// Lowercase hex SHA-256 of the serialized container.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_sizes() {
        let one = Model3D::point_cloud(vec![[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(pack_geometry(&one).payload.len(), 12);
        let two = Model3D::new(vec![[0.0; 3], [1.0; 3]], Some(vec![[1, 2, 3], [4, 5, 6]]), None, vec![]).unwrap();
        assert_eq!(pack_geometry(&two).payload.len(), 30);
    }

    #[test]
    fn container_layout() {
        let one = Model3D::point_cloud(vec![[1.0, 2.0, 3.0]]).unwrap();
        let bytes = pack_geometry(&one).to_bytes();
        assert_eq!(&bytes[..5], b"P3DG\x01");
        let header = br#"{"attributes":{"colors":false,"normals":false},"face_count":0,"kind":"point_cloud","point_count":1}"#;
        assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize, header.len());
        assert_eq!(&bytes[9..9 + header.len()], header);
        assert_eq!(&bytes[9 + header.len()..9 + header.len() + 4], &1f32.to_le_bytes());
    }

    #[test]
    fn rejects_bad_containers() {
        let one = Model3D::point_cloud(vec![[1.0, 2.0, 3.0]]).unwrap();
        let mut bytes = pack_geometry(&one).to_bytes();
        assert!(matches!(PackedGeometry::from_bytes(&bytes[..bytes.len() - 1]), Err(AssetError::MalformedFile { .. })));
        bytes[4] = 9;
        assert!(matches!(PackedGeometry::from_bytes(&bytes), Err(AssetError::UnsupportedFormat(_))));
        assert!(matches!(PackedGeometry::from_bytes(b"PLY?xxxxxx"), Err(AssetError::UnsupportedFormat(_))));
    }

    #[test]
    fn mesh_round_trip() {
        let m = Model3D::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            Some(vec![[9, 9, 9]; 3]),
            Some(vec![[0.0, 0.0, 1.0]; 3]),
            vec![[0, 1, 2]],
        )
        .unwrap();
        let packed = pack_geometry(&m);
        let bytes = packed.to_bytes();
        let back = PackedGeometry::from_bytes(&bytes).unwrap();
        assert_eq!(back, packed);
        assert_eq!(back.unpack().unwrap(), m);
    }
}

//! Loading, normalizing and packing of 3D stimulus files.
//!
//! Every model enters an experiment through [`parse_model`] and
//! [`normalize_model`], which together guarantee a common base size: the
//! bounding box is centered on the origin and its longest edge is 1.
//! [`pack_geometry`] produces the `P3DG` container streamed to the viewer.

mod model;
mod obj;
mod pack;
mod ply;

use std::fmt;

pub use model::{compute_bounds, normalize_model, BoundingBox, Model3D, ModelKind};
pub use pack::{pack_geometry, AttributeFlags, PackedGeometry, PackedHeader, PACK_MAGIC, PACK_VERSION};
pub use ply::{write_ply, PlyEncoding};

/// Where in an input file a problem was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// 1-based line number (text formats).
    Line(usize),
    /// Byte offset from the start of the file.
    Byte(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(l) => write!(f, "line {l}"),
            Location::Byte(b) => write!(f, "byte {b}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AssetError {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed file at {location}: {message}")]
    MalformedFile { location: Location, message: String },
    #[error("degenerate model: all points coincide")]
    DegenerateModel,
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

impl AssetError {
    pub(crate) fn malformed(location: Location, message: impl Into<String>) -> Self {
        AssetError::MalformedFile {
            location,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FormatHint {
    #[default]
    Auto,
    Ply,
    Obj,
}

impl std::str::FromStr for FormatHint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(FormatHint::Auto),
            "ply" => Ok(FormatHint::Ply),
            "obj" => Ok(FormatHint::Obj),
            other => Err(format!("unknown format hint {other:?}")),
        }
    }
}

impl FormatHint {
    /// Hint from a file extension, falling back to content sniffing.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("ply") => FormatHint::Ply,
            Some("obj") => FormatHint::Obj,
            _ => FormatHint::Auto,
        }
    }
}

/// Parses PLY (ascii or binary little-endian) or Wavefront OBJ content.
pub fn parse_model(bytes: &[u8], hint: FormatHint) -> Result<Model3D, AssetError> {
    if bytes.is_empty() {
        return Err(AssetError::malformed(Location::Byte(0), "empty input"));
    }
    let format = match hint {
        FormatHint::Auto => detect_format(bytes)?,
        other => other,
    };
    match format {
        FormatHint::Ply => ply::parse_ply(bytes),
        FormatHint::Obj => obj::parse_obj(bytes),
        FormatHint::Auto => unreachable!(),
    }
}

fn detect_format(bytes: &[u8]) -> Result<FormatHint, AssetError> {
    if ply::has_magic(bytes) {
        return Ok(FormatHint::Ply);
    }
    if obj::looks_like_obj(bytes) {
        return Ok(FormatHint::Obj);
    }
    Err(AssetError::UnsupportedFormat(
        "neither a PLY header nor OBJ statements were found".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_detection() {
        assert!(matches!(
            parse_model(b"\x00\x01garbage", FormatHint::Auto),
            Err(AssetError::UnsupportedFormat(_))
        ));
        let m = parse_model(
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n",
            FormatHint::Auto,
        )
        .unwrap();
        assert_eq!(m.point_count(), 1);
        let m = parse_model(b"# cube\nv 0 0 0\n", FormatHint::Auto).unwrap();
        assert_eq!(m.point_count(), 1);
    }

    #[test]
    fn empty_input_is_malformed() {
        assert!(matches!(
            parse_model(b"", FormatHint::Auto),
            Err(AssetError::MalformedFile { .. })
        ));
    }
}

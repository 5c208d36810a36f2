use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SessionError;

/// Ordinal compression label such as `r5`. Larger values mean milder
/// compression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ordinal(pub u32);

impl Ordinal {
    pub fn parse(label: &str) -> Option<Ordinal> {
        let digits = label
            .strip_prefix('r')
            .or_else(|| label.strip_prefix('R'))
            .unwrap_or(label);
        digits.parse().ok().map(Ordinal)
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// One manifest entry. A stimulus whose `id` equals its `source_id` is a
/// pristine source; every other entry is an impaired variant and must carry
/// both compression parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusMeta {
    pub id: String,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry_param: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute_param: Option<String>,
    pub asset_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_hash: Option<String>,
}

impl StimulusMeta {
    pub fn is_source(&self) -> bool {
        self.id == self.source_id
    }

    pub fn geometry_ordinal(&self) -> Option<Ordinal> {
        self.geometry_param.as_deref().and_then(Ordinal::parse)
    }

    pub fn attribute_ordinal(&self) -> Option<Ordinal> {
        self.attribute_param.as_deref().and_then(Ordinal::parse)
    }
}

/// Stimulus set of one dataset, kept sorted by id so that it behaves as a
/// set regardless of file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<StimulusMeta>,
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(mut entries: Vec<StimulusMeta>, base_dir: impl Into<PathBuf>) -> Self {
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        Manifest {
            entries,
            base_dir: base_dir.into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, SessionError> {
        let text = std::fs::read_to_string(path).map_err(|e| SessionError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, SessionError> {
        let entries: Vec<StimulusMeta> =
            serde_json::from_str(text).map_err(|e| SessionError::Schema(vec![format!("manifest: {e}")]))?;
        Ok(Self::new(entries, base_dir))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("manifest serializes")
    }

    pub fn entries(&self) -> &[StimulusMeta] {
        &self.entries
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn get(&self, id: &str) -> Option<&StimulusMeta> {
        self.entries
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn sources(&self) -> impl Iterator<Item = &StimulusMeta> {
        self.entries.iter().filter(|e| e.is_source())
    }

    pub fn impaired(&self) -> impl Iterator<Item = &StimulusMeta> {
        self.entries.iter().filter(|e| !e.is_source())
    }

    /// Impaired stimuli grouped by source id.
    pub fn impaired_by_source(&self) -> BTreeMap<&str, Vec<&StimulusMeta>> {
        let mut map: BTreeMap<&str, Vec<&StimulusMeta>> = BTreeMap::new();
        for e in self.impaired() {
            map.entry(e.source_id.as_str()).or_default().push(e);
        }
        map
    }

    pub fn resolve_asset(&self, meta: &StimulusMeta) -> PathBuf {
        if meta.asset_path.is_absolute() {
            meta.asset_path.clone()
        } else {
            self.base_dir.join(&meta.asset_path)
        }
    }

    /// Every structural problem, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if e.id.is_empty() {
                out.push("stimulus with empty id".to_string());
            }
            if !seen.insert(e.id.as_str()) {
                out.push(format!("duplicate stimulus id {:?}", e.id));
            }
        }
        let mut combos = BTreeSet::new();
        for e in self.impaired() {
            match self.get(&e.source_id) {
                Some(src) if src.is_source() => {}
                _ => out.push(format!(
                    "stimulus {:?} references unknown source {:?}",
                    e.id, e.source_id
                )),
            }
            match (&e.geometry_param, &e.attribute_param) {
                (Some(g), Some(a)) => {
                    if Ordinal::parse(g).is_none() {
                        out.push(format!("stimulus {:?}: bad geometry_param {g:?}", e.id));
                    }
                    if Ordinal::parse(a).is_none() {
                        out.push(format!("stimulus {:?}: bad attribute_param {a:?}", e.id));
                    }
                    if !combos.insert((e.source_id.as_str(), g.as_str(), a.as_str())) {
                        out.push(format!(
                            "source {:?} declares combination ({g}, {a}) more than once",
                            e.source_id
                        ));
                    }
                }
                _ => out.push(format!(
                    "impaired stimulus {:?} lacks geometry_param or attribute_param",
                    e.id
                )),
            }
        }
        out
    }

    /// The (geometry, attribute) grid declared by each source.
    pub fn combination_grid(&self) -> BTreeMap<String, BTreeSet<(String, String)>> {
        let mut grid: BTreeMap<String, BTreeSet<(String, String)>> = BTreeMap::new();
        for e in self.impaired() {
            if let (Some(g), Some(a)) = (&e.geometry_param, &e.attribute_param) {
                grid.entry(e.source_id.clone())
                    .or_default()
                    .insert((g.clone(), a.clone()));
            }
        }
        grid
    }
}

/// The 8 (geometry, attribute) combinations used for the reference dataset.
pub const REFERENCE_COMBINATIONS: [(&str, &str); 8] = [
    ("r5", "r6"),
    ("r5", "r3"),
    ("r5", "r2"),
    ("r5", "r1"),
    ("r2", "r6"),
    ("r2", "r3"),
    ("r1", "r6"),
    ("r1", "r1"),
];

/// The reference five-source design names.
pub const REFERENCE_SOURCES: [&str; 5] = ["rose", "statue", "girl", "sneaker", "man"];

/// Builds a manifest of `sources` × [`REFERENCE_COMBINATIONS`]. Asset paths
/// follow `<source>.ply` and `<source>_g<g>_a<a>.ply`.
pub fn reference_design(sources: &[&str]) -> Manifest {
    let mut entries = Vec::new();
    for &s in sources {
        entries.push(StimulusMeta {
            id: s.to_string(),
            source_id: s.to_string(),
            geometry_param: None,
            attribute_param: None,
            asset_path: PathBuf::from(format!("{s}.ply")),
            content_hash: None,
        });
        for (g, a) in REFERENCE_COMBINATIONS {
            let id = format!("{s}_g{g}_a{a}");
            entries.push(StimulusMeta {
                asset_path: PathBuf::from(format!("{id}.ply")),
                id,
                source_id: s.to_string(),
                geometry_param: Some(g.to_string()),
                attribute_param: Some(a.to_string()),
                content_hash: None,
            });
        }
    }
    Manifest::new(entries, ".")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinals() {
        assert_eq!(Ordinal::parse("r5"), Some(Ordinal(5)));
        assert_eq!(Ordinal::parse("3"), Some(Ordinal(3)));
        assert_eq!(Ordinal::parse("rx"), None);
        assert!(Ordinal(1) < Ordinal(6));
    }

    #[test]
    fn reference_design_is_valid() {
        let m = reference_design(&REFERENCE_SOURCES);
        assert!(m.violations().is_empty(), "{:?}", m.violations());
        assert_eq!(m.sources().count(), 5);
        assert_eq!(m.impaired().count(), 40);
        assert!(m.combination_grid().values().all(|g| g.len() == 8));
    }

    #[test]
    fn violations_are_exhaustive() {
        let mut entries = reference_design(&["a"]).entries().to_vec();
        entries[1].source_id = "ghost".into();
        entries[2].geometry_param = None;
        entries.push(entries[3].clone());
        let m = Manifest::new(entries, ".");
        let v = m.violations();
        assert!(v.iter().any(|s| s.contains("unknown source")));
        assert!(v.iter().any(|s| s.contains("lacks geometry_param")));
        assert!(v.iter().any(|s| s.contains("duplicate stimulus id")));
    }

    #[test]
    fn json_order_does_not_matter() {
        let m = reference_design(&["b", "a"]);
        let mut reversed: Vec<StimulusMeta> = m.entries().to_vec();
        reversed.reverse();
        assert_eq!(Manifest::new(reversed, "."), m);
        let back = Manifest::from_json(&m.to_json(), Path::new(".")).unwrap();
        assert_eq!(back, m);
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::matrix::RatingMatrix;
use super::AnalysisError;
use crate::session::{Manifest, Ordinal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosRow {
    pub stimulus_id: String,
    pub mos: f64,
    pub n: usize,
    pub normalized_mos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosTable {
    pub rating_categories: u32,
    pub rows: Vec<MosRow>,
}

/// Maps a MOS on a `1..=categories` scale onto `[0, 1]`.
pub fn normalize_mos(mos: f64, categories: u32) -> f64 {
    (mos - 1.0) / (categories as f64 - 1.0)
}

impl MosTable {
    pub fn normalized(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.normalized_mos).collect()
    }

    pub fn get(&self, stimulus_id: &str) -> Option<&MosRow> {
        self.rows.iter().find(|r| r.stimulus_id == stimulus_id)
    }

    pub fn violations(&self) -> Vec<String> {
        let k = self.rating_categories as f64;
        let mut out = Vec::new();
        for r in &self.rows {
            if !(1.0..=k).contains(&r.mos) || r.n == 0 {
                out.push(format!("{}: mos {} with n={} outside [1, {k}]", r.stimulus_id, r.mos, r.n));
            }
            if (r.normalized_mos - normalize_mos(r.mos, self.rating_categories)).abs() > 1e-12 {
                out.push(format!("{}: normalized_mos disagrees with mos", r.stimulus_id));
            }
        }
        out
    }

    /// Mean MOS per (attribute, geometry) ordinal pair, averaged over sources.
    pub fn parameter_means(&self, manifest: &Manifest) -> BTreeMap<(Ordinal, Ordinal), f64> {
        let mut acc: BTreeMap<(Ordinal, Ordinal), (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let Some(meta) = manifest.get(&r.stimulus_id) else { continue };
            if let (Some(g), Some(a)) = (meta.geometry_ordinal(), meta.attribute_ordinal()) {
                let e = acc.entry((a, g)).or_default();
                e.0 += r.mos;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }
}

/// Mean of the first-showing scores of the given subjects. Everyone else,
/// in particular rejected subjects, contributes nothing.
pub fn compute_mos(matrix: &RatingMatrix, qualified: &[String]) -> Result<MosTable, AnalysisError> {
    let rows_idx: Vec<usize> = qualified
        .iter()
        .map(|id| matrix.subject_index(id).ok_or_else(|| AnalysisError::UnknownSubject(id.clone())))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(matrix.stimulus_ids.len());
    for (col, id) in matrix.stimulus_ids.iter().enumerate() {
        let (sum, n) = rows_idx
            .iter()
            .filter_map(|&s| matrix.scores[s][col])
            .fold((0u64, 0usize), |(sum, n), v| (sum + v as u64, n + 1));
        if n == 0 {
            return Err(AnalysisError::NoRatingsForStimulus(id.clone()));
        }
        let mos = sum as f64 / n as f64;
        rows.push(MosRow {
            stimulus_id: id.clone(),
            mos,
            n,
            normalized_mos: normalize_mos(mos, matrix.rating_categories),
        });
    }
    Ok(MosTable {
        rating_categories: matrix.rating_categories,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_normalization() {
        let mut m = RatingMatrix::new(vec!["a".into(), "b".into()], 5);
        m.add_subject("s1", vec![Some(3), Some(1)], vec![]).unwrap();
        m.add_subject("s2", vec![Some(4), None], vec![]).unwrap();
        m.add_subject("s3", vec![Some(5), None], vec![]).unwrap();
        let ids: Vec<String> = m.subject_ids.clone();
        let t = compute_mos(&m, &ids).unwrap();
        assert_eq!(t.rows[0].mos, 4.0);
        assert_eq!(t.rows[0].normalized_mos, 0.75);
        assert_eq!(t.rows[1].mos, 1.0);
        assert_eq!(t.rows[1].normalized_mos, 0.0);
        assert_eq!(t.rows[1].n, 1);
        assert!(t.violations().is_empty());
    }

    #[test]
    fn missing_ratings() {
        let mut m = RatingMatrix::new(vec!["a".into()], 5);
        m.add_subject("s1", vec![None], vec![]).unwrap();
        assert!(matches!(
            compute_mos(&m, &["s1".to_string()]),
            Err(AnalysisError::NoRatingsForStimulus(_))
        ));
        assert!(matches!(compute_mos(&m, &["zz".to_string()]), Err(AnalysisError::UnknownSubject(_))));
    }
}

//! Screening, MOS tables, agreement metrics and cross-validation between
//! two groups of raters.

mod matrix;
mod metrics;
mod mos;
mod report;
mod screening;
mod simulate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use matrix::{RatingMatrix, TrapPair};
pub use metrics::{fractional_ranks, krocc, plcc, rmse, srocc, CorrelationReport, MIN_CORRELATION_LEN};
pub use mos::{compute_mos, normalize_mos, MosRow, MosTable};
pub use report::{
    correlation_csv, mos_table_csv, parameter_means_csv, subject_reports_csv, AnalysisReport, GroupReport, ParameterMean,
};
pub use screening::{qualified_subjects, screen_subjects, SubjectReport, SubjectStatus, TrapViolation, MAX_TRAP_DIFFERENCE};
pub use simulate::{check_latent, simulate_raters, LatentModel, OrdinalLatent, SimulationParams};

use crate::session::{Manifest, SessionError};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {min} values, got {len}")]
    InsufficientLength { len: usize, min: usize },
    #[error("input has zero variance")]
    DegenerateInput,
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("no qualified ratings for stimulus {0:?}")]
    NoRatingsForStimulus(String),
    #[error("groups do not cover the same stimulus set")]
    StimulusSetMismatch,
    #[error("score {score} outside 1..={categories}")]
    ScoreOutOfRange { score: u32, categories: u32 },
    #[error("subject {0:?} appears twice")]
    DuplicateSubject(String),
    #[error("unknown subject {0:?}")]
    UnknownSubject(String),
    #[error("unknown stimulus {0:?}")]
    UnknownStimulus(String),
    #[error("invalid latent model: {0}")]
    InvalidLatent(String),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Everything computed for one cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub group1: GroupReport,
    pub group2: GroupReport,
    pub correlation: CorrelationReport,
}

pub fn analyze_group(matrix: &RatingMatrix) -> Result<GroupReport, AnalysisError> {
    let subjects = screen_subjects(matrix);
    let qualified = qualified_subjects(&subjects);
    let mos = compute_mos(matrix, &qualified)?;
    Ok(GroupReport { subjects, mos })
}

/// Screens each group on its own, computes per-group normalized MOS and
/// compares the two vectors in the shared stimulus order.
pub fn cross_validate(group1: &RatingMatrix, group2: &RatingMatrix) -> Result<CrossValidation, AnalysisError> {
    if group1.stimulus_ids != group2.stimulus_ids || group1.rating_categories != group2.rating_categories {
        return Err(AnalysisError::StimulusSetMismatch);
    }
    let g1 = analyze_group(group1)?;
    let g2 = analyze_group(group2)?;
    let correlation = CorrelationReport::compute(&g1.mos.normalized(), &g2.mos.normalized())?;
    Ok(CrossValidation {
        group1: g1,
        group2: g2,
        correlation,
    })
}

/// Analyzes each named group on its own. With exactly two groups the report
/// also carries their cross-validation metrics.
pub fn analyze_groups(
    groups: &BTreeMap<String, RatingMatrix>,
    manifest: Option<&Manifest>,
) -> Result<AnalysisReport, AnalysisError> {
    let mut reports = BTreeMap::new();
    for (name, matrix) in groups {
        reports.insert(name.clone(), analyze_group(matrix)?);
    }
    let correlation = match groups.values().collect::<Vec<_>>()[..] {
        [a, b] => Some(cross_validate(a, b)?.correlation),
        _ => None,
    };
    let mut parameter_means = BTreeMap::new();
    if let Some(m) = manifest {
        for (name, g) in &reports {
            let rows = g
                .mos
                .parameter_means(m)
                .into_iter()
                .map(|((a, geo), mos)| ParameterMean {
                    geometry_param: geo.to_string(),
                    attribute_param: a.to_string(),
                    mos,
                })
                .collect();
            parameter_means.insert(name.clone(), rows);
        }
    }
    Ok(AnalysisReport {
        groups: reports,
        correlation,
        parameter_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(rows: &[[u32; 4]]) -> RatingMatrix {
        let mut m = RatingMatrix::new((0..4).map(|i| format!("s{i}")).collect(), 5);
        for (i, r) in rows.iter().enumerate() {
            m.add_subject(format!("p{i}"), r.iter().map(|&v| Some(v)).collect(), vec![]).unwrap();
        }
        m
    }

    #[test]
    fn identical_groups_agree_perfectly() {
        let g = group(&[[1, 2, 4, 5], [2, 2, 3, 5]]);
        let cv = cross_validate(&g, &g.clone()).unwrap();
        assert_eq!(cv.correlation.srocc, 1.0);
        assert!((cv.correlation.plcc - 1.0).abs() < 1e-15);
        assert_eq!(cv.correlation.krocc, 1.0);
        assert_eq!(cv.correlation.rmse, 0.0);
    }

    #[test]
    fn affine_groups() {
        // group2 MOS = (group1 MOS + 1) / 2 + 1
        let g1 = group(&[[1, 3, 5, 5]]);
        let g2 = group(&[[2, 3, 4, 4]]);
        let cv = cross_validate(&g1, &g2).unwrap();
        assert!((cv.correlation.plcc - 1.0).abs() < 1e-12);
        assert_eq!(cv.correlation.srocc, 1.0);
    }

    #[test]
    fn mismatched_stimuli() {
        let g1 = group(&[[1, 2, 3, 4]]);
        let g2 = RatingMatrix::new(vec!["x".into()], 5);
        assert!(matches!(cross_validate(&g1, &g2), Err(AnalysisError::StimulusSetMismatch)));
    }
}

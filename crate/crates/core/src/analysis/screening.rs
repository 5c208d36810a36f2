use serde::{Deserialize, Serialize};

use super::matrix::{RatingMatrix, TrapPair};

/// Largest tolerated disagreement between the two showings of a trap.
pub const MAX_TRAP_DIFFERENCE: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectStatus {
    Qualified,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrapViolation {
    pub pair: TrapPair,
    pub difference: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectReport {
    pub subject_id: String,
    pub status: SubjectStatus,
    pub violated_traps: Vec<TrapViolation>,
}

impl SubjectReport {
    pub fn is_qualified(&self) -> bool {
        self.status == SubjectStatus::Qualified
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let rejected = self.status == SubjectStatus::Rejected;
        if rejected != !self.violated_traps.is_empty() {
            out.push(format!(
                "subject {:?}: status {:?} disagrees with {} violated traps",
                self.subject_id,
                self.status,
                self.violated_traps.len()
            ));
        }
        for v in &self.violated_traps {
            if v.difference != v.pair.difference() || v.difference <= MAX_TRAP_DIFFERENCE {
                out.push(format!("subject {:?}: inconsistent violation {v:?}", self.subject_id));
            }
        }
        out
    }
}

/// A subject is rejected as soon as any trap pair differs by more than
/// [`MAX_TRAP_DIFFERENCE`].
pub fn screen_subjects(matrix: &RatingMatrix) -> Vec<SubjectReport> {
    matrix
        .subject_ids
        .iter()
        .zip(&matrix.trap_pairs)
        .map(|(id, pairs)| {
            let violated_traps: Vec<TrapViolation> = pairs
                .iter()
                .filter(|p| p.difference() > MAX_TRAP_DIFFERENCE)
                .map(|p| TrapViolation {
                    pair: p.clone(),
                    difference: p.difference(),
                })
                .collect();
            SubjectReport {
                subject_id: id.clone(),
                status: if violated_traps.is_empty() {
                    SubjectStatus::Qualified
                } else {
                    SubjectStatus::Rejected
                },
                violated_traps,
            }
        })
        .collect()
}

pub fn qualified_subjects(reports: &[SubjectReport]) -> Vec<String> {
    reports
        .iter()
        .filter(|r| r.is_qualified())
        .map(|r| r.subject_id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_subject(first: u32, repeat: u32) -> SubjectReport {
        let mut m = RatingMatrix::new(vec!["s".into()], 5);
        m.add_subject(
            "p",
            vec![Some(first)],
            vec![TrapPair {
                stimulus_id: "s".into(),
                first,
                repeat,
            }],
        )
        .unwrap();
        screen_subjects(&m).remove(0)
    }

    #[test]
    fn difference_of_three_rejects() {
        let r = one_subject(5, 2);
        assert_eq!(r.status, SubjectStatus::Rejected);
        assert_eq!(r.violated_traps[0].difference, 3);
        assert!(r.violations().is_empty());
    }

    #[test]
    fn difference_of_two_passes() {
        assert_eq!(one_subject(4, 2).status, SubjectStatus::Qualified);
        assert_eq!(one_subject(3, 3).status, SubjectStatus::Qualified);
    }

    #[test]
    fn no_traps_qualifies() {
        let mut m = RatingMatrix::new(vec!["s".into()], 5);
        m.add_subject("p", vec![Some(1)], vec![]).unwrap();
        assert!(screen_subjects(&m)[0].is_qualified());
    }
}

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::session::Judgment;

/// Ratings of the two showings of one trapping sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrapPair {
    pub stimulus_id: String,
    pub first: u32,
    pub repeat: u32,
}

impl TrapPair {
    pub fn difference(&self) -> u32 {
        self.first.abs_diff(self.repeat)
    }
}

/// Subject × stimulus ratings. Only the first showing of a stimulus is a
/// score; later showings of the same stimulus become trap pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingMatrix {
    pub rating_categories: u32,
    pub stimulus_ids: Vec<String>,
    pub subject_ids: Vec<String>,
    /// Indexed `[subject][stimulus]`.
    pub scores: Vec<Vec<Option<u32>>>,
    /// Indexed `[subject]`.
    pub trap_pairs: Vec<Vec<TrapPair>>,
}

impl RatingMatrix {
    pub fn new(stimulus_ids: Vec<String>, rating_categories: u32) -> Self {
        RatingMatrix {
            rating_categories,
            stimulus_ids,
            subject_ids: Vec::new(),
            scores: Vec::new(),
            trap_pairs: Vec::new(),
        }
    }

    pub fn subject_count(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn add_subject(
        &mut self,
        subject_id: impl Into<String>,
        scores: Vec<Option<u32>>,
        trap_pairs: Vec<TrapPair>,
    ) -> Result<(), AnalysisError> {
        let subject_id = subject_id.into();
        if self.subject_ids.contains(&subject_id) {
            return Err(AnalysisError::DuplicateSubject(subject_id));
        }
        if scores.len() != self.stimulus_ids.len() {
            return Err(AnalysisError::LengthMismatch {
                left: scores.len(),
                right: self.stimulus_ids.len(),
            });
        }
        let k = self.rating_categories;
        let in_range = |s: u32| (1..=k).contains(&s);
        if let Some(bad) = scores
            .iter()
            .flatten()
            .chain(trap_pairs.iter().flat_map(|p| [&p.first, &p.repeat]))
            .find(|&&s| !in_range(s))
        {
            return Err(AnalysisError::ScoreOutOfRange {
                score: *bad,
                categories: k,
            });
        }
        self.subject_ids.push(subject_id);
        self.scores.push(scores);
        self.trap_pairs.push(trap_pairs);
        Ok(())
    }

    /// Adds one subject from journaled judgments. Stimuli not in the
    /// matrix's stimulus list are an error.
    pub fn add_judgments(&mut self, subject_id: impl Into<String>, judgments: &[Judgment]) -> Result<(), AnalysisError> {
        let mut ordered: Vec<&Judgment> = judgments.iter().collect();
        ordered.sort_by_key(|j| j.trial_index);
        let mut scores = vec![None; self.stimulus_ids.len()];
        let mut traps = Vec::new();
        for j in ordered {
            let col = self
                .stimulus_ids
                .iter()
                .position(|s| *s == j.stimulus_id)
                .ok_or_else(|| AnalysisError::UnknownStimulus(j.stimulus_id.clone()))?;
            match scores[col] {
                None => scores[col] = Some(j.score),
                Some(first) => traps.push(TrapPair {
                    stimulus_id: j.stimulus_id.clone(),
                    first,
                    repeat: j.score,
                }),
            }
        }
        self.add_subject(subject_id, scores, traps)
    }

    /// Builds a matrix from per-subject judgment lists. The stimulus list is
    /// the sorted union of everything rated.
    pub fn from_judgments(subjects: &BTreeMap<String, Vec<Judgment>>, rating_categories: u32) -> Result<Self, AnalysisError> {
        let stimuli: BTreeSet<&str> = subjects
            .values()
            .flatten()
            .map(|j| j.stimulus_id.as_str())
            .collect();
        let mut m = RatingMatrix::new(stimuli.into_iter().map(String::from).collect(), rating_categories);
        for (subject, judgments) in subjects {
            m.add_judgments(subject.clone(), judgments)?;
        }
        Ok(m)
    }

    pub fn subject_index(&self, id: &str) -> Option<usize> {
        self.subject_ids.iter().position(|s| s == id)
    }

    /// Copy restricted to the listed subjects, in the listed order.
    pub fn select_subjects(&self, ids: &[String]) -> Result<RatingMatrix, AnalysisError> {
        let mut m = RatingMatrix::new(self.stimulus_ids.clone(), self.rating_categories);
        for id in ids {
            let i = self
                .subject_index(id)
                .ok_or_else(|| AnalysisError::UnknownSubject(id.clone()))?;
            m.add_subject(id.clone(), self.scores[i].clone(), self.trap_pairs[i].clone())?;
        }
        Ok(m)
    }

    /// Concatenates the subjects of two matrices over the same stimuli.
    pub fn merged(&self, other: &RatingMatrix) -> Result<RatingMatrix, AnalysisError> {
        if self.stimulus_ids != other.stimulus_ids {
            return Err(AnalysisError::StimulusSetMismatch);
        }
        let mut m = self.clone();
        for i in 0..other.subject_count() {
            m.add_subject(other.subject_ids[i].clone(), other.scores[i].clone(), other.trap_pairs[i].clone())?;
        }
        Ok(m)
    }
}

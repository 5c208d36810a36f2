//! Synthetic raters standing in for human participants.
//!
//! Each synthetic subject gets their own seeded playlist (so trap repeats
//! occur exactly as in a real session) and rates every trial as
//! `clamp(round(latent + N(0, noise_sd)), 1, K)`.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::matrix::{RatingMatrix, TrapPair};
use super::AnalysisError;
use crate::session::{build_playlist, ExperimentConfig, Manifest, StimulusMeta};

/// True quality of each stimulus on the `1..=K` scale.
pub trait LatentModel {
    fn quality(&self, stimulus: &StimulusMeta) -> f64;
}

/// Latent quality `1 + (K - 1) * g * a * c` where `g` and `a` are per-ordinal
/// factors in `(0, 1]` for geometry and attribute compression and `c` is a
/// per-source content factor.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalLatent {
    pub rating_categories: u32,
    pub geometry: BTreeMap<u32, f64>,
    pub attribute: BTreeMap<u32, f64>,
    pub content: BTreeMap<String, f64>,
}

impl OrdinalLatent {
    /// Factors for the reference design: geometry r1/r2/r5, attribute
    /// r1/r2/r3/r6, and five sources with slightly different content factors.
    pub fn reference(rating_categories: u32) -> Self {
        OrdinalLatent {
            rating_categories,
            geometry: BTreeMap::from([(1, 0.5), (2, 0.75), (5, 1.0)]),
            attribute: BTreeMap::from([(1, 0.5), (2, 0.7), (3, 0.85), (6, 1.0)]),
            content: BTreeMap::from([
                ("rose".to_string(), 1.0),
                ("statue".to_string(), 0.97),
                ("girl".to_string(), 0.94),
                ("sneaker".to_string(), 0.91),
                ("man".to_string(), 0.88),
            ]),
        }
    }
}

impl LatentModel for OrdinalLatent {
    fn quality(&self, s: &StimulusMeta) -> f64 {
        let g = s.geometry_ordinal().and_then(|o| self.geometry.get(&o.0)).copied().unwrap_or(f64::NAN);
        let a = s.attribute_ordinal().and_then(|o| self.attribute.get(&o.0)).copied().unwrap_or(f64::NAN);
        let c = self.content.get(&s.source_id).copied().unwrap_or(1.0);
        1.0 + (self.rating_categories as f64 - 1.0) * g * a * c
    }
}

/// Checks that every impaired stimulus has a latent quality in `[1, K]` and
/// that, within a source, quality never decreases when both ordinals grow.
pub fn check_latent(manifest: &Manifest, latent: &dyn LatentModel, categories: u32) -> Result<(), AnalysisError> {
    let k = categories as f64;
    for (source, variants) in manifest.impaired_by_source() {
        let mut rows = Vec::new();
        for v in &variants {
            let q = latent.quality(v);
            if !(q.is_finite() && (1.0..=k).contains(&q)) {
                return Err(AnalysisError::InvalidLatent(format!("{}: quality {q} outside [1, {k}]", v.id)));
            }
            let (Some(g), Some(a)) = (v.geometry_ordinal(), v.attribute_ordinal()) else {
                return Err(AnalysisError::InvalidLatent(format!("{}: missing ordinals", v.id)));
            };
            rows.push((g, a, q, &v.id));
        }
        for x in &rows {
            for y in &rows {
                if x.0 <= y.0 && x.1 <= y.1 && x.2 > y.2 {
                    return Err(AnalysisError::InvalidLatent(format!(
                        "source {source}: {} is milder than {} yet has lower quality",
                        y.3, x.3
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimulationParams {
    pub n_subjects: usize,
    pub noise_sd: f64,
    pub seed: u64,
    /// Prefix for synthetic subject ids, e.g. `g1-`.
    pub subject_prefix: String,
}

pub fn simulate_raters(
    manifest: &Manifest,
    config: &ExperimentConfig,
    latent: &dyn LatentModel,
    params: &SimulationParams,
) -> Result<RatingMatrix, AnalysisError> {
    check_latent(manifest, latent, config.rating_categories)?;
    let noise = Normal::new(0.0, params.noise_sd)
        .map_err(|e| AnalysisError::InvalidLatent(format!("noise_sd {}: {e}", params.noise_sd)))?;
    let k = config.rating_categories;
    let stimulus_ids: Vec<String> = manifest.impaired().map(|m| m.id.clone()).collect();
    let mut matrix = RatingMatrix::new(stimulus_ids, k);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    for s in 0..params.n_subjects {
        let subject = format!("{}{:02}", params.subject_prefix, s + 1);
        let mut subject_config = config.clone();
        subject_config.participant_name = subject.clone();
        subject_config.display_order_seed = Some(rng.next_u64());
        let playlist = build_playlist(manifest, &subject_config)?;

        let mut scores = vec![None; matrix.stimulus_ids.len()];
        let mut traps = Vec::new();
        for trial in &playlist.trials {
            let meta = manifest.get(&trial.stimulus_id).expect("playlist stimuli come from the manifest");
            let raw = latent.quality(meta) + noise.sample(&mut rng);
            let score = raw.round().clamp(1.0, k as f64) as u32;
            let col = matrix
                .stimulus_ids
                .binary_search(&trial.stimulus_id)
                .expect("impaired ids are sorted");
            match scores[col] {
                None => scores[col] = Some(score),
                Some(first) => traps.push(TrapPair {
                    stimulus_id: trial.stimulus_id.clone(),
                    first,
                    repeat: score,
                }),
            }
        }
        matrix.add_subject(subject, scores, traps)?;
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{reference_design, REFERENCE_SOURCES};

    fn params(n: usize, sd: f64, seed: u64) -> SimulationParams {
        SimulationParams {
            n_subjects: n,
            noise_sd: sd,
            seed,
            subject_prefix: "s".into(),
        }
    }

    #[test]
    fn noiseless_raters_return_rounded_latent() {
        let m = reference_design(&REFERENCE_SOURCES);
        let latent = OrdinalLatent::reference(5);
        let r = simulate_raters(&m, &ExperimentConfig::new("x"), &latent, &params(3, 0.0, 1)).unwrap();
        for (col, id) in r.stimulus_ids.iter().enumerate() {
            let expected = latent.quality(m.get(id).unwrap()).round() as u32;
            for s in 0..3 {
                assert_eq!(r.scores[s][col], Some(expected));
            }
        }
        assert!(r.trap_pairs.iter().all(|p| p.len() == 10 && p.iter().all(|t| t.first == t.repeat)));
    }

    #[test]
    fn deterministic_per_seed() {
        let m = reference_design(&REFERENCE_SOURCES);
        let latent = OrdinalLatent::reference(5);
        let c = ExperimentConfig::new("x");
        let a = simulate_raters(&m, &c, &latent, &params(4, 0.5, 9)).unwrap();
        let b = simulate_raters(&m, &c, &latent, &params(4, 0.5, 9)).unwrap();
        let d = simulate_raters(&m, &c, &latent, &params(4, 0.5, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn non_monotone_latent_is_rejected() {
        let m = reference_design(&["rose"]);
        let mut latent = OrdinalLatent::reference(5);
        latent.geometry.insert(1, 0.9);
        assert!(matches!(check_latent(&m, &latent, 5), Err(AnalysisError::InvalidLatent(_))));
        let mut unknown = OrdinalLatent::reference(5);
        unknown.attribute.remove(&3);
        assert!(check_latent(&m, &unknown, 5).is_err());
    }
}

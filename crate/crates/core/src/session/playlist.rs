//! Seeded presentation order with trapping samples.
//!
//! Ordering uses ChaCha8 seeded from the 64-bit display-order seed and an
//! unbiased rejection sampler, so the same `(manifest, config)` yields the
//! same playlist on every platform.
//!
//! Construction per attempt:
//! 1. Order the impaired stimuli so that no two neighbours share a source
//!    (randomized greedy with a feasibility check).
//! 2. For each trap, insert its repeat at a uniformly chosen position at
//!    least [`MIN_TRAP_GAP`] trials after the first showing, again avoiding
//!    same-source neighbours.
//!
//! After [`MAX_ATTEMPTS`] failed attempts the adjacency rule is dropped
//! (Fisher-Yates order, separation still enforced) and a warning is logged.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::manifest::{Manifest, StimulusMeta};
use super::{config_digest, SessionError};

/// Minimum number of trials between a trap's two showings.
pub const MIN_TRAP_GAP: usize = 5;
pub const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub index: u32,
    pub stimulus_id: String,
    pub reference_id: String,
    pub is_trap_repeat: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap_group: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Playlist {
    pub trials: Vec<Trial>,
    pub seed: u64,
    pub config_digest: String,
}

impl Playlist {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn trial(&self, index: u32) -> Option<&Trial> {
        self.trials.get(index as usize)
    }
}

/// Uniform integer in `0..n` by rejection; `n` must be nonzero.
pub(crate) fn below(rng: &mut impl RngCore, n: usize) -> usize {
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX - n + 1) % n;
    loop {
        let x = rng.next_u64();
        if x <= zone {
            return (x % n) as usize;
        }
    }
}

fn fisher_yates<T>(items: &mut [T], rng: &mut impl RngCore) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

/// Picks trap stimuli per source: alternately the mildest and the
/// strongest compression, ordered by the sum of both ordinals.
fn default_traps<'a>(variants: &[&'a StimulusMeta], count: usize) -> Vec<&'a StimulusMeta> {
    let mut ranked: Vec<&StimulusMeta> = variants.to_vec();
    let key = |s: &StimulusMeta| {
        let g = s.geometry_ordinal().map_or(0, |o| o.0);
        let a = s.attribute_ordinal().map_or(0, |o| o.0);
        (g + a, g, a)
    };
    ranked.sort_by(|x, y| key(x).cmp(&key(y)).then_with(|| x.id.cmp(&y.id)));
    let mut out = Vec::with_capacity(count);
    let (mut lo, mut hi) = (0usize, ranked.len());
    while out.len() < count && lo < hi {
        if out.len() % 2 == 0 {
            hi -= 1;
            out.push(ranked[hi]);
        } else {
            out.push(ranked[lo]);
            lo += 1;
        }
    }
    out
}

/// The trap stimuli for this manifest/config pair, sorted by id.
pub fn select_traps<'a>(
    manifest: &'a Manifest,
    config: &ExperimentConfig,
) -> Result<Vec<&'a StimulusMeta>, SessionError> {
    let by_source = manifest.impaired_by_source();
    let per_source = config.traps_per_source as usize;
    for (source, variants) in &by_source {
        if per_source > variants.len() {
            return Err(SessionError::TrapsExceedStimuli {
                source_id: source.to_string(),
                traps: per_source,
                available: variants.len(),
            });
        }
    }
    let mut traps = Vec::new();
    match &config.trap_stimuli {
        Some(ids) => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for id in ids {
                let meta = manifest
                    .get(id)
                    .filter(|m| !m.is_source())
                    .ok_or_else(|| SessionError::Schema(vec![format!("trap stimulus {id:?} is not an impaired stimulus")]))?;
                *counts.entry(meta.source_id.as_str()).or_default() += 1;
                traps.push(meta);
            }
            for source in by_source.keys() {
                let n = counts.get(source).copied().unwrap_or(0);
                if n != per_source {
                    return Err(SessionError::Schema(vec![format!(
                        "trap_stimuli lists {n} stimuli for source {source:?}, traps_per_source is {per_source}"
                    )]));
                }
            }
        }
        None => {
            for variants in by_source.values() {
                traps.extend(default_traps(variants, per_source));
            }
        }
    }
    traps.sort_by(|a, b| a.id.cmp(&b.id));
    traps.dedup_by(|a, b| a.id == b.id);
    Ok(traps)
}

/// Arrangement feasibility for the remaining per-source counts when the
/// previous item came from source `prev`.
fn feasible(counts: &[usize], prev: Option<usize>) -> bool {
    let total: usize = counts.iter().sum();
    counts.iter().enumerate().all(|(s, &c)| {
        let limit = if Some(s) == prev { total / 2 } else { total.div_ceil(2) };
        c <= limit
    })
}

/// Random order of `sources` (one entry per item, value = source index) with
/// no equal neighbours. Returns item positions into the input slice.
fn constrained_order(sources: &[usize], n_sources: usize, rng: &mut impl RngCore) -> Option<Vec<usize>> {
    let mut counts = vec![0usize; n_sources];
    for &s in sources {
        counts[s] += 1;
    }
    if !feasible(&counts, None) {
        return None;
    }
    let mut remaining: Vec<usize> = (0..sources.len()).collect();
    let mut order = Vec::with_capacity(sources.len());
    let mut prev = None;
    let mut candidates = Vec::new();
    while !remaining.is_empty() {
        candidates.clear();
        for (k, &item) in remaining.iter().enumerate() {
            let s = sources[item];
            if Some(s) == prev {
                continue;
            }
            counts[s] -= 1;
            if feasible(&counts, Some(s)) {
                candidates.push(k);
            }
            counts[s] += 1;
        }
        if candidates.is_empty() {
            return None;
        }
        let k = candidates[below(rng, candidates.len())];
        let item = remaining.remove(k);
        counts[sources[item]] -= 1;
        prev = Some(sources[item]);
        order.push(item);
    }
    Some(order)
}

struct Slot {
    stimulus: usize,
    repeat: bool,
}

fn attempt(
    impaired: &[&StimulusMeta],
    source_of: &[usize],
    n_sources: usize,
    traps: &[usize],
    strict: bool,
    rng: &mut impl RngCore,
) -> Option<Vec<Slot>> {
    let order = if strict {
        constrained_order(source_of, n_sources, rng)?
    } else {
        let mut o: Vec<usize> = (0..impaired.len()).collect();
        fisher_yates(&mut o, rng);
        o
    };
    let mut seq: Vec<Slot> = order
        .into_iter()
        .map(|stimulus| Slot { stimulus, repeat: false })
        .collect();
    let mut positions = Vec::new();
    for &t in traps {
        let first = seq.iter().position(|s| s.stimulus == t && !s.repeat)?;
        let src = source_of[t];
        positions.clear();
        for j in first + MIN_TRAP_GAP..=seq.len() {
            if strict {
                let left_ok = source_of[seq[j - 1].stimulus] != src;
                let right_ok = j == seq.len() || source_of[seq[j].stimulus] != src;
                if !(left_ok && right_ok) {
                    continue;
                }
            }
            positions.push(j);
        }
        if positions.is_empty() {
            return None;
        }
        let j = positions[below(rng, positions.len())];
        seq.insert(j, Slot { stimulus: t, repeat: true });
    }
    Some(seq)
}

pub fn build_playlist(manifest: &Manifest, config: &ExperimentConfig) -> Result<Playlist, SessionError> {
    let impaired: Vec<&StimulusMeta> = manifest.impaired().collect();
    if impaired.is_empty() || manifest.sources().next().is_none() {
        return Err(SessionError::EmptyManifest);
    }
    let source_ids: Vec<&str> = manifest.impaired_by_source().keys().copied().collect();
    let source_of: Vec<usize> = impaired
        .iter()
        .map(|m| source_ids.binary_search(&m.source_id.as_str()).unwrap())
        .collect();
    let traps: Vec<usize> = select_traps(manifest, config)?
        .iter()
        .map(|t| impaired.iter().position(|m| m.id == t.id).unwrap())
        .collect();

    let seed = config.seed();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = None;
    for _ in 0..MAX_ATTEMPTS {
        found = attempt(&impaired, &source_of, source_ids.len(), &traps, true, &mut rng);
        if found.is_some() {
            break;
        }
    }
    if found.is_none() {
        tracing::warn!(
            "no arrangement without same-source neighbours after {MAX_ATTEMPTS} attempts; \
             using an unconstrained shuffle"
        );
        for _ in 0..MAX_ATTEMPTS {
            found = attempt(&impaired, &source_of, source_ids.len(), &traps, false, &mut rng);
            if found.is_some() {
                break;
            }
        }
    }
    let seq = found.ok_or(SessionError::TrapSeparationInfeasible {
        trials: impaired.len() + traps.len(),
        gap: MIN_TRAP_GAP,
    })?;

    let trials = seq
        .into_iter()
        .enumerate()
        .map(|(i, slot)| {
            let meta = impaired[slot.stimulus];
            Trial {
                index: i as u32,
                stimulus_id: meta.id.clone(),
                reference_id: meta.source_id.clone(),
                is_trap_repeat: slot.repeat,
                trap_group: traps.iter().position(|&t| t == slot.stimulus).map(|g| g as u32),
            }
        })
        .collect();
    Ok(Playlist {
        trials,
        seed,
        config_digest: config_digest(manifest, config),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::manifest::{reference_design, REFERENCE_SOURCES};

    fn reference() -> Manifest {
        reference_design(&REFERENCE_SOURCES)
    }

    #[test]
    fn fifty_trials_for_reference_design() {
        let p = build_playlist(&reference(), &ExperimentConfig::new("p")).unwrap();
        assert_eq!(p.len(), 50);
        assert_eq!(p.trials.iter().filter(|t| t.is_trap_repeat).count(), 10);
        for w in p.trials.windows(2) {
            assert_ne!(w[0].reference_id, w[1].reference_id);
        }
    }

    #[test]
    fn zero_traps_is_permutation() {
        let mut c = ExperimentConfig::new("p");
        c.traps_per_source = 0;
        let p = build_playlist(&reference(), &c).unwrap();
        let mut ids: Vec<_> = p.trials.iter().map(|t| t.stimulus_id.clone()).collect();
        ids.sort();
        let expected: Vec<_> = reference().impaired().map(|m| m.id.clone()).collect();
        assert_eq!(ids, expected);
        assert!(p.trials.iter().all(|t| t.trap_group.is_none()));
    }

    #[test]
    fn default_traps_are_extremes() {
        let m = reference();
        let traps = select_traps(&m, &ExperimentConfig::new("p")).unwrap();
        let rose: Vec<&str> = traps
            .iter()
            .filter(|t| t.source_id == "rose")
            .map(|t| t.id.as_str())
            .collect();
        assert_eq!(rose, vec!["rose_gr1_ar1", "rose_gr5_ar6"]);
    }

    #[test]
    fn errors() {
        let mut c = ExperimentConfig::new("p");
        c.traps_per_source = 9;
        assert!(matches!(
            build_playlist(&reference(), &c),
            Err(SessionError::TrapsExceedStimuli { available: 8, .. })
        ));
        let only_sources = Manifest::new(
            reference().sources().cloned().collect(),
            ".",
        );
        assert!(matches!(
            build_playlist(&only_sources, &ExperimentConfig::new("p")),
            Err(SessionError::EmptyManifest)
        ));
    }

    #[test]
    fn trap_override() {
        let mut c = ExperimentConfig::new("p");
        c.traps_per_source = 1;
        c.trap_stimuli = Some(
            REFERENCE_SOURCES
                .iter()
                .map(|s| format!("{s}_gr2_ar3"))
                .collect(),
        );
        let p = build_playlist(&reference(), &c).unwrap();
        let repeats: Vec<_> = p
            .trials
            .iter()
            .filter(|t| t.is_trap_repeat)
            .map(|t| t.stimulus_id.as_str())
            .collect();
        assert_eq!(repeats.len(), 5);
        assert!(repeats.iter().all(|id| id.ends_with("_gr2_ar3")));
        c.trap_stimuli = Some(vec!["rose_gr2_ar3".into()]);
        assert!(build_playlist(&reference(), &c).is_err());
    }

    #[test]
    fn single_source_falls_back_to_unconstrained() {
        let m = reference_design(&["solo"]);
        let p = build_playlist(&m, &ExperimentConfig::new("p")).unwrap();
        assert_eq!(p.len(), 10);
    }

    #[test]
    fn infeasible_separation() {
        let mut entries = reference_design(&["a"]).entries().to_vec();
        entries.truncate(3);
        let m = Manifest::new(entries, ".");
        let mut c = ExperimentConfig::new("p");
        c.traps_per_source = 1;
        assert!(matches!(
            build_playlist(&m, &c),
            Err(SessionError::TrapSeparationInfeasible { .. })
        ));
    }

    #[test]
    fn below_is_in_range_and_covers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            seen[below(&mut rng, 7)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn feasibility_rule() {
        assert!(feasible(&[2, 1], None));
        assert!(!feasible(&[3, 1], None));
        assert!(feasible(&[2, 2], Some(0)));
        assert!(!feasible(&[3, 2], Some(0)));
        assert!(feasible(&[1, 2], Some(0)));
    }
}

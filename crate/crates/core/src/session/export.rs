//! Flat CSV export of a session's judgments.

use std::io;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::journal::Judgment;
use super::manifest::Manifest;
use super::playlist::Playlist;
use super::SessionError;

pub const CSV_HEADER: &str = "participant,trial_index,stimulus_id,source_id,geometry_param,attribute_param,is_trap_repeat,score,view_time_ms,timestamp";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub participant: String,
    pub trial_index: u32,
    pub stimulus_id: String,
    pub source_id: String,
    pub geometry_param: String,
    pub attribute_param: String,
    pub is_trap_repeat: bool,
    pub score: u32,
    pub view_time_ms: u64,
    pub timestamp: DateTime<Utc>,
}

impl ResultRow {
    pub fn judgment(&self) -> Judgment {
        Judgment {
            trial_index: self.trial_index,
            stimulus_id: self.stimulus_id.clone(),
            score: self.score,
            view_time_ms: self.view_time_ms,
            wall_clock: self.timestamp,
            participant_name: self.participant.clone(),
        }
    }
}

pub fn result_rows(judgments: &[Judgment], playlist: &Playlist, manifest: &Manifest) -> Vec<ResultRow> {
    judgments
        .iter()
        .map(|j| {
            let trial = playlist.trial(j.trial_index);
            let meta = manifest.get(&j.stimulus_id);
            ResultRow {
                participant: j.participant_name.clone(),
                trial_index: j.trial_index,
                stimulus_id: j.stimulus_id.clone(),
                source_id: meta.map(|m| m.source_id.clone()).unwrap_or_default(),
                geometry_param: meta.and_then(|m| m.geometry_param.clone()).unwrap_or_default(),
                attribute_param: meta.and_then(|m| m.attribute_param.clone()).unwrap_or_default(),
                is_trap_repeat: trial.is_some_and(|t| t.is_trap_repeat),
                score: j.score,
                view_time_ms: j.view_time_ms,
                timestamp: j.wall_clock,
            }
        })
        .collect()
}

pub fn write_csv<W: io::Write>(rows: &[ResultRow], out: W) -> Result<(), SessionError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| SessionError::Export(e.to_string()))?;
    }
    w.flush().map_err(|e| SessionError::Export(e.to_string()))?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<ResultRow>, SessionError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| SessionError::Export(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(SessionError::Export(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| SessionError::Export(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::config::ExperimentConfig;
    use crate::session::manifest::reference_design;
    use crate::session::playlist::build_playlist;

    #[test]
    fn csv_round_trip_and_header() {
        let m = reference_design(&["a", "b"]);
        let p = build_playlist(&m, &ExperimentConfig::new("p")).unwrap();
        let judgments: Vec<Judgment> = p
            .trials
            .iter()
            .take(4)
            .map(|t| Judgment {
                trial_index: t.index,
                stimulus_id: t.stimulus_id.clone(),
                score: 1 + t.index % 5,
                view_time_ms: 1234,
                wall_clock: DateTime::from_timestamp(1_700_000_000, 5_000_000).unwrap(),
                participant_name: "p".into(),
            })
            .collect();
        let rows = result_rows(&judgments, &p, &m);
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        assert_eq!(back[2].judgment(), judgments[2]);
    }
}

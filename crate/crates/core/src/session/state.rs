use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::journal::{read_journal, Journal, JournalHeader, JournalRecord, Judgment, JOURNAL_FORMAT_VERSION};
use super::manifest::Manifest;
use super::playlist::{build_playlist, Playlist, Trial};
use super::SessionError;

/// Runtime state of one participant session. All mutation goes through
/// [`SessionState::record`], which journals before advancing.
#[derive(Debug)]
pub struct SessionState {
    playlist: Playlist,
    completed: BTreeSet<u32>,
    judgments: Vec<Judgment>,
    rating_categories: u32,
    journal: Journal,
    halted: bool,
}

/// File name of a participant's journal inside the result directory.
pub fn journal_path_for(config: &ExperimentConfig) -> PathBuf {
    let safe: String = config
        .participant_name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    config.result_path.join(format!("{safe}.journal.jsonl"))
}

fn header_record(playlist: &Playlist, config: &ExperimentConfig) -> JournalRecord {
    JournalRecord::Header(JournalHeader {
        format_version: JOURNAL_FORMAT_VERSION,
        config_digest: playlist.config_digest.clone(),
        participant_name: config.participant_name.clone(),
        seed: playlist.seed,
        trial_count: playlist.len() as u32,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |e| SessionError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

impl SessionState {
    /// Starts a new session with a fresh journal, failing if one exists.
    pub fn start(manifest: &Manifest, config: &ExperimentConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let playlist = build_playlist(manifest, config)?;
        let path = journal_path_for(config);
        std::fs::create_dir_all(&config.result_path).map_err(|e| SessionError::ResultPathNotWritable {
            path: config.result_path.clone(),
            source: e,
        })?;
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => SessionError::JournalExists(path.clone()),
                _ => SessionError::ResultPathNotWritable {
                    path: config.result_path.clone(),
                    source: e,
                },
            })?;
        let mut journal = Journal::open(&path)?;
        journal.append(&header_record(&playlist, config))?;
        Ok(Self::from_parts(playlist, config, journal))
    }

    /// Resumes when a journal already exists, otherwise starts fresh.
    pub fn open(manifest: &Manifest, config: &ExperimentConfig) -> Result<Self, SessionError> {
        let path = journal_path_for(config);
        if path.exists() {
            Self::resume(&path, manifest, config)
        } else {
            Self::start(manifest, config)
        }
    }

    pub fn resume(journal_path: &Path, manifest: &Manifest, config: &ExperimentConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let playlist = build_playlist(manifest, config)?;
        let contents = read_journal(journal_path)?;
        if contents.discarded_tail {
            let file = OpenOptions::new()
                .write(true)
                .open(journal_path)
                .map_err(io_err(journal_path))?;
            file.set_len(contents.valid_len).map_err(io_err(journal_path))?;
            file.sync_all().map_err(io_err(journal_path))?;
        }
        let mut journal = Journal::open(journal_path)?;
        match &contents.header {
            Some(h) if h.config_digest != playlist.config_digest => {
                return Err(SessionError::DigestMismatch {
                    journal: h.config_digest.clone(),
                    expected: playlist.config_digest.clone(),
                })
            }
            Some(_) => {}
            None => journal.append(&header_record(&playlist, config))?,
        }
        let mut state = Self::from_parts(playlist, config, journal);
        for (k, j) in contents.judgments.into_iter().enumerate() {
            state.check(&j).map_err(|e| SessionError::CorruptJournal {
                line: k + 2,
                message: e.to_string(),
            })?;
            state.apply(j);
        }
        Ok(state)
    }

    /// Session over an arbitrary journal sink; no header is written.
    pub fn with_journal(playlist: Playlist, config: &ExperimentConfig, journal: Journal) -> Self {
        Self::from_parts(playlist, config, journal)
    }

    fn from_parts(playlist: Playlist, config: &ExperimentConfig, journal: Journal) -> Self {
        SessionState {
            playlist,
            completed: BTreeSet::new(),
            judgments: Vec::new(),
            rating_categories: config.rating_categories,
            journal,
            halted: false,
        }
    }

    pub fn playlist(&self) -> &Playlist {
        &self.playlist
    }

    pub fn completed(&self) -> &BTreeSet<u32> {
        &self.completed
    }

    pub fn judgments(&self) -> &[Judgment] {
        &self.judgments
    }

    pub fn journal_path(&self) -> &Path {
        self.journal.path()
    }

    pub fn rating_categories(&self) -> u32 {
        self.rating_categories
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    /// Smallest trial index without a judgment.
    pub fn next_index(&self) -> Option<u32> {
        let n = self.completed.len() as u32;
        (n < self.playlist.len() as u32).then_some(n)
    }

    pub fn next_trial(&self) -> Option<&Trial> {
        self.next_index().and_then(|i| self.playlist.trial(i))
    }

    pub fn is_finished(&self) -> bool {
        self.next_index().is_none()
    }

    pub fn judgment_for(&self, trial_index: u32) -> Option<&Judgment> {
        self.judgments.get(trial_index as usize)
    }

    fn check(&self, j: &Judgment) -> Result<(), SessionError> {
        if !(1..=self.rating_categories).contains(&j.score) {
            return Err(SessionError::ScoreOutOfRange {
                score: j.score,
                categories: self.rating_categories,
            });
        }
        if self.completed.contains(&j.trial_index) {
            return Err(SessionError::DuplicateJudgment {
                trial_index: j.trial_index,
            });
        }
        let expected = self.next_index();
        if expected != Some(j.trial_index) {
            return Err(SessionError::OutOfOrderTrial {
                expected,
                got: j.trial_index,
            });
        }
        let trial = &self.playlist.trials[j.trial_index as usize];
        if trial.stimulus_id != j.stimulus_id {
            return Err(SessionError::StimulusMismatch {
                trial_index: j.trial_index,
                expected: trial.stimulus_id.clone(),
                got: j.stimulus_id.clone(),
            });
        }
        Ok(())
    }

    fn apply(&mut self, j: Judgment) {
        self.completed.insert(j.trial_index);
        self.judgments.push(j);
    }

    /// Validates, journals, then marks the trial complete. A journal write
    /// failure halts the session: later calls fail with `SessionHalted`.
    pub fn record(&mut self, judgment: Judgment) -> Result<(), SessionError> {
        if self.halted {
            return Err(SessionError::SessionHalted);
        }
        self.check(&judgment)?;
        if let Err(e) = self.journal.append(&JournalRecord::Judgment(judgment.clone())) {
            self.halted = true;
            return Err(e);
        }
        self.apply(judgment);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::io;

    use chrono::DateTime;

    use super::*;
    use crate::session::journal::JournalSink;
    use crate::session::manifest::{reference_design, REFERENCE_SOURCES};

    fn setup(dir: &Path) -> (Manifest, ExperimentConfig) {
        let mut c = ExperimentConfig::new("p 1");
        c.result_path = dir.to_path_buf();
        c.display_order_seed = Some(11);
        (reference_design(&REFERENCE_SOURCES), c)
    }

    fn judgment_for(state: &SessionState, index: u32, score: u32) -> Judgment {
        Judgment {
            trial_index: index,
            stimulus_id: state.playlist().trials[index as usize].stimulus_id.clone(),
            score,
            view_time_ms: 20_000,
            wall_clock: DateTime::from_timestamp(1_700_000_000, 0).unwrap(),
            participant_name: "p 1".into(),
        }
    }

    #[test]
    fn record_advances() {
        let dir = tempfile::tempdir().unwrap();
        let (m, c) = setup(dir.path());
        let mut s = SessionState::start(&m, &c).unwrap();
        assert!(s.journal_path().ends_with("p_1.journal.jsonl"));
        let j = judgment_for(&s, 0, 4);
        s.record(j).unwrap();
        assert_eq!(s.completed().iter().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(s.next_index(), Some(1));
    }

    #[test]
    fn contract_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (m, c) = setup(dir.path());
        let mut s = SessionState::start(&m, &c).unwrap();
        let j5 = judgment_for(&s, 5, 3);
        assert!(matches!(
            s.record(j5),
            Err(SessionError::OutOfOrderTrial { expected: Some(0), got: 5 })
        ));
        let bad = judgment_for(&s, 0, 6);
        assert!(matches!(s.record(bad), Err(SessionError::ScoreOutOfRange { score: 6, .. })));
        let zero = judgment_for(&s, 0, 0);
        assert!(matches!(s.record(zero), Err(SessionError::ScoreOutOfRange { .. })));
        let mut wrong = judgment_for(&s, 0, 3);
        wrong.stimulus_id = "nope".into();
        assert!(matches!(s.record(wrong), Err(SessionError::StimulusMismatch { .. })));
        let j0 = judgment_for(&s, 0, 3);
        s.record(j0.clone()).unwrap();
        assert!(matches!(s.record(j0), Err(SessionError::DuplicateJudgment { trial_index: 0 })));
        assert!(matches!(SessionState::start(&m, &c), Err(SessionError::JournalExists(_))));
    }

    struct FailingSink;
    impl JournalSink for FailingSink {
        fn append(&mut self, _: &[u8]) -> io::Result<()> {
            Err(io::Error::other("disk full"))
        }
    }

    #[test]
    fn journal_failure_halts() {
        let (m, c) = setup(Path::new("/unused"));
        let playlist = build_playlist(&m, &c).unwrap();
        let mut s = SessionState::with_journal(playlist, &c, Journal::new("x".into(), Box::new(FailingSink)));
        let j = judgment_for(&s, 0, 3);
        assert!(matches!(s.record(j.clone()), Err(SessionError::JournalWriteFailure(_))));
        assert!(s.completed().is_empty());
        assert!(matches!(s.record(j), Err(SessionError::SessionHalted)));
    }

    #[test]
    fn resume_replays_and_checks_digest() {
        let dir = tempfile::tempdir().unwrap();
        let (m, c) = setup(dir.path());
        let mut s = SessionState::start(&m, &c).unwrap();
        for i in 0..3 {
            let j = judgment_for(&s, i, 1 + i % 5);
            s.record(j).unwrap();
        }
        let path = s.journal_path().to_path_buf();
        drop(s);
        let r = SessionState::resume(&path, &m, &c).unwrap();
        assert_eq!(r.completed().len(), 3);
        assert_eq!(r.next_index(), Some(3));

        let mut other = c.clone();
        other.viewing_time_s = 10.0;
        assert!(matches!(
            SessionState::resume(&path, &m, &other),
            Err(SessionError::DigestMismatch { .. })
        ));
    }

    #[test]
    fn resume_truncates_partial_record() {
        let dir = tempfile::tempdir().unwrap();
        let (m, c) = setup(dir.path());
        let mut s = SessionState::start(&m, &c).unwrap();
        let j = judgment_for(&s, 0, 2);
        s.record(j).unwrap();
        let path = s.journal_path().to_path_buf();
        drop(s);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(b"{\"record\":\"judg");
        std::fs::write(&path, &bytes).unwrap();

        let mut r = SessionState::open(&m, &c).unwrap();
        assert_eq!(r.completed().len(), 1);
        let j = judgment_for(&r, 1, 5);
        r.record(j).unwrap();
        drop(r);
        let r = SessionState::open(&m, &c).unwrap();
        assert_eq!(r.completed().len(), 2);
    }
}

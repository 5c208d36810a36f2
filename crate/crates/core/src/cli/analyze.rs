use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::CommandOutcome;
use crate::analysis::{
    analyze_groups, correlation_csv, mos_table_csv, parameter_means_csv, simulate_raters, subject_reports_csv,
    AnalysisError, AnalysisReport, OrdinalLatent, RatingMatrix, SimulationParams,
};
use crate::session::{
    read_csv, read_journal, reference_design, ExperimentConfig, Judgment, Manifest, SessionError, REFERENCE_SOURCES,
};

/// Judgments per subject id.
pub type SubjectJudgments = BTreeMap<String, Vec<Judgment>>;

pub(super) struct AnalyzeArgs {
    pub inputs: Vec<PathBuf>,
    pub group_map: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub categories: u32,
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub(super) struct SimulateArgs {
    pub seed: u64,
    pub manifest: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub subjects_per_group: usize,
    pub groups: usize,
    pub noise_sd: f64,
    pub out: Option<PathBuf>,
}

enum Failure {
    Invalid(Vec<String>),
    Runtime(String),
}

impl From<Failure> for CommandOutcome {
    fn from(f: Failure) -> Self {
        match f {
            Failure::Invalid(v) => CommandOutcome::validation(v),
            Failure::Runtime(m) => CommandOutcome::runtime(m),
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Io { .. } => Failure::Runtime(e.to_string()),
            SessionError::Schema(v) => Failure::Invalid(v),
            other => Failure::Invalid(vec![other.to_string()]),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Session(s) => s.into(),
            other => Failure::Invalid(vec![other.to_string()]),
        }
    }
}

/// Reads journals (`.jsonl`) and CSV exports. A subject may appear in only
/// one input file.
pub fn load_subjects(paths: &[PathBuf]) -> Result<SubjectJudgments, SessionError> {
    let mut out: SubjectJudgments = BTreeMap::new();
    for path in paths {
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let mut found: SubjectJudgments = BTreeMap::new();
        if is_csv {
            let file = std::fs::File::open(path).map_err(|e| SessionError::Io {
                path: path.clone(),
                source: e,
            })?;
            for row in read_csv(file)? {
                found.entry(row.participant.clone()).or_default().push(row.judgment());
            }
        } else {
            let contents = read_journal(path)?;
            let name = match (&contents.header, contents.judgments.first()) {
                (Some(h), _) => h.participant_name.clone(),
                (None, Some(j)) => j.participant_name.clone(),
                (None, None) => continue,
            };
            found.insert(name, contents.judgments);
        }
        for (subject, judgments) in found {
            if out.insert(subject.clone(), judgments).is_some() {
                return Err(SessionError::Schema(vec![format!(
                    "subject {subject:?} appears in more than one input ({})",
                    path.display()
                )]));
            }
        }
    }
    Ok(out)
}

/// Subject to group assignment, from a JSON object or a `subject,group` CSV.
pub fn read_group_map(path: &Path) -> Result<BTreeMap<String, String>, SessionError> {
    let text = std::fs::read_to_string(path).map_err(|e| SessionError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let schema = |m: String| SessionError::Schema(vec![format!("{}: {m}", path.display())]);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        return serde_json::from_str(&text).map_err(|e| schema(e.to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut map = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| schema(e.to_string()))?;
        if record.len() != 2 {
            return Err(schema(format!("line {}: expected subject,group", i + 1)));
        }
        if i == 0 && &record[0] == "subject" && &record[1] == "group" {
            continue;
        }
        if map.insert(record[0].to_string(), record[1].to_string()).is_some() {
            return Err(schema(format!("subject {:?} listed twice", &record[0])));
        }
    }
    Ok(map)
}

fn split_groups(
    subjects: &SubjectJudgments,
    map: Option<&BTreeMap<String, String>>,
    categories: u32,
) -> Result<BTreeMap<String, RatingMatrix>, Failure> {
    let stimuli: BTreeSet<&str> = subjects.values().flatten().map(|j| j.stimulus_id.as_str()).collect();
    let stimuli: Vec<String> = stimuli.into_iter().map(String::from).collect();
    let mut errors = Vec::new();
    if let Some(map) = map {
        errors.extend(
            subjects
                .keys()
                .filter(|s| !map.contains_key(*s))
                .map(|s| format!("subject {s:?} has no group")),
        );
        errors.extend(
            map.keys()
                .filter(|s| !subjects.contains_key(*s))
                .map(|s| format!("group map lists unknown subject {s:?}")),
        );
    }
    if !errors.is_empty() {
        return Err(Failure::Invalid(errors));
    }
    let mut groups: BTreeMap<String, RatingMatrix> = BTreeMap::new();
    for (subject, judgments) in subjects {
        let group = map.map_or("all", |m| m[subject].as_str());
        groups
            .entry(group.to_string())
            .or_insert_with(|| RatingMatrix::new(stimuli.clone(), categories))
            .add_judgments(subject.clone(), judgments)?;
    }
    Ok(groups)
}

fn write_outputs(dir: &Path, report: &AnalysisReport) -> Result<Vec<PathBuf>, Failure> {
    let io = |p: &Path, e: std::io::Error| Failure::Runtime(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let value = serde_json::to_value(report).expect("report serializes");
    files.push((dir.join("report.json"), serde_json::to_string_pretty(&value).expect("json") + "\n"));
    let mut subjects = String::new();
    let mut mos = String::new();
    for (i, (name, g)) in report.groups.iter().enumerate() {
        let s = subject_reports_csv(name, &g.subjects);
        let m = mos_table_csv(name, &g.mos);
        // Keep only the first header line.
        let skip = usize::from(i > 0);
        subjects.extend(s.split_inclusive('\n').skip(skip));
        mos.extend(m.split_inclusive('\n').skip(skip));
    }
    files.push((dir.join("subjects.csv"), subjects));
    files.push((dir.join("mos.csv"), mos));
    if let Some(c) = &report.correlation {
        files.push((dir.join("correlation.csv"), correlation_csv(c)));
    }
    if !report.parameter_means.is_empty() {
        files.push((dir.join("parameter_means.csv"), parameter_means_csv(report)));
    }
    for (path, text) in &files {
        std::fs::write(path, text).map_err(|e| io(path, e))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

fn finish(report: AnalysisReport, out: Option<&Path>, extra: serde_json::Value) -> Result<CommandOutcome, Failure> {
    let problems = report.violations();
    if !problems.is_empty() {
        return Err(Failure::Runtime(format!("inconsistent report: {}", problems.join("; "))));
    }
    let files = match out {
        Some(dir) => write_outputs(dir, &report)?,
        None => Vec::new(),
    };
    let mut lines = Vec::new();
    for (name, g) in &report.groups {
        lines.push(format!(
            "group {name}: {} of {} subjects qualified, {} stimuli",
            g.qualified_count(),
            g.subjects.len(),
            g.mos.rows.len()
        ));
    }
    if let Some(c) = &report.correlation {
        lines.push(format!(
            "SROCC {:.4}  PLCC {:.4}  KROCC {:.4}  RMSE {:.4}  (n={})",
            c.srocc, c.plcc, c.krocc, c.rmse, c.n
        ));
    }
    for f in &files {
        lines.push(format!("wrote {}", f.display()));
    }
    let mut value = json!({ "status": "ok", "report": report, "files": files });
    if let (Some(obj), serde_json::Value::Object(more)) = (value.as_object_mut(), extra) {
        obj.extend(more);
    }
    Ok(CommandOutcome::ok(lines.join("\n"), value))
}

fn categories_from(config: Option<&Path>, fallback: u32) -> Result<u32, Failure> {
    match config {
        Some(p) => {
            let c = ExperimentConfig::load(p)?;
            c.validate()?;
            Ok(c.rating_categories)
        }
        None => Ok(fallback),
    }
}

pub(super) fn cmd_analyze(args: &AnalyzeArgs) -> CommandOutcome {
    let run = || -> Result<CommandOutcome, Failure> {
        let categories = categories_from(args.config.as_deref(), args.categories)?;
        let subjects = load_subjects(&args.inputs)?;
        if subjects.is_empty() {
            return Err(Failure::Invalid(vec!["no judgments found in the inputs".into()]));
        }
        let map = args.group_map.as_deref().map(read_group_map).transpose()?;
        let manifest = args.manifest.as_deref().map(Manifest::load).transpose()?;
        let groups = split_groups(&subjects, map.as_ref(), categories)?;
        let report = analyze_groups(&groups, manifest.as_ref())?;
        finish(report, args.out.as_deref(), json!({}))
    };
    run().unwrap_or_else(CommandOutcome::from)
}

/// Seeds for each simulated group, drawn from one stream.
pub fn group_seeds(seed: u64, groups: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..groups).map(|_| rng.next_u64()).collect()
}

pub(super) fn cmd_simulate(args: &SimulateArgs) -> CommandOutcome {
    let run = || -> Result<CommandOutcome, Failure> {
        let manifest = match &args.manifest {
            Some(p) => Manifest::load(p)?,
            None => reference_design(&REFERENCE_SOURCES),
        };
        let problems = manifest.violations();
        if !problems.is_empty() {
            return Err(Failure::Invalid(problems));
        }
        let config = match &args.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::new("simulated"),
        };
        config.validate()?;
        if args.groups == 0 || args.subjects_per_group == 0 {
            return Err(Failure::Invalid(vec!["need at least one group with one subject".into()]));
        }
        if !(args.noise_sd.is_finite() && args.noise_sd >= 0.0) {
            return Err(Failure::Invalid(vec![format!("noise_sd {} must be >= 0", args.noise_sd)]));
        }
        let latent = OrdinalLatent::reference(config.rating_categories);
        let mut groups = BTreeMap::new();
        for (i, seed) in group_seeds(args.seed, args.groups).into_iter().enumerate() {
            let name = format!("g{}", i + 1);
            let params = SimulationParams {
                n_subjects: args.subjects_per_group,
                noise_sd: args.noise_sd,
                seed,
                subject_prefix: format!("{name}-"),
            };
            groups.insert(name, simulate_raters(&manifest, &config, &latent, &params)?);
        }
        let report = analyze_groups(&groups, Some(&manifest))?;
        let params = json!({
            "simulation": {
                "seed": args.seed,
                "groups": args.groups,
                "subjects_per_group": args.subjects_per_group,
                "noise_sd": args.noise_sd,
            }
        });
        finish(report, args.out.as_deref(), params)
    };
    run().unwrap_or_else(CommandOutcome::from)
}

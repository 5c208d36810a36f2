use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::{asset_failure, CommandOutcome};
use crate::asset_io::{normalize_model, pack_geometry, parse_model, write_ply, FormatHint, PlyEncoding};
use crate::session::{Manifest, Ordinal, StimulusMeta};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessReport {
    pub outputs: Vec<StimulusMeta>,
    pub failures: Vec<String>,
}

/// Splits `<source>_g<geometry>_a<attribute>` into its parts, e.g.
/// `rose_gr5_ar6` into `("rose", "r5", "r6")`.
pub fn split_stimulus_name(stem: &str) -> Option<(&str, &str, &str)> {
    let (rest, a) = stem.rsplit_once("_a")?;
    let (source, g) = rest.rsplit_once("_g")?;
    (!source.is_empty() && Ordinal::parse(g).is_some() && Ordinal::parse(a).is_some()).then_some((source, g, a))
}

fn model_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("ply" | "obj")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn process_one(input: &Path, out_dir: &Path) -> Result<StimulusMeta, String> {
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| format!("{}: file name is not valid UTF-8", input.display()))?;
    let bytes = std::fs::read(input).map_err(|e| format!("{}: {e}", input.display()))?;
    let model = parse_model(&bytes, FormatHint::from_path(input)).map_err(|e| asset_failure(input, &e))?;
    let model = normalize_model(&model).map_err(|e| asset_failure(input, &e))?;
    let ply_name = format!("{stem}.ply");
    let packed = pack_geometry(&model);
    std::fs::write(out_dir.join(&ply_name), write_ply(&model, PlyEncoding::BinaryLittleEndian))
        .and_then(|_| std::fs::write(out_dir.join(format!("{stem}.p3dg")), packed.to_bytes()))
        .map_err(|e| format!("{}: {e}", out_dir.display()))?;
    let (source_id, g, a) = match split_stimulus_name(stem) {
        Some((s, g, a)) => (s.to_string(), Some(g.to_string()), Some(a.to_string())),
        None => (stem.to_string(), None, None),
    };
    Ok(StimulusMeta {
        id: stem.to_string(),
        source_id,
        geometry_param: g,
        attribute_param: a,
        asset_path: PathBuf::from(ply_name),
        content_hash: Some(packed.content_hash()),
    })
}

/// Parses, normalizes and writes every model in `input_dir`. Files are
/// processed in parallel; the report is in file-name order.
pub fn preprocess_dir(input_dir: &Path, out_dir: &Path) -> std::io::Result<PreprocessReport> {
    let files = model_files(input_dir)?;
    std::fs::create_dir_all(out_dir)?;
    let mut by_stem: BTreeMap<String, Vec<&PathBuf>> = BTreeMap::new();
    for f in &files {
        let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        by_stem.entry(stem).or_default().push(f);
    }
    let mut failures: Vec<String> = by_stem
        .iter()
        .filter(|(_, v)| v.len() > 1)
        .map(|(stem, v)| {
            let names: Vec<String> = v.iter().map(|p| p.display().to_string()).collect();
            format!("{stem}: several inputs share this name: {}", names.join(", "))
        })
        .collect();
    let unique: Vec<&PathBuf> = by_stem.values().filter(|v| v.len() == 1).map(|v| v[0]).collect();

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(unique.len().max(1));
    let chunk = unique.len().div_ceil(workers).max(1);
    let results: Vec<Result<StimulusMeta, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = unique
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|f| process_one(f, out_dir)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("preprocess worker")).collect()
    });

    let mut outputs = Vec::new();
    for r in results {
        match r {
            Ok(meta) => outputs.push(meta),
            Err(e) => failures.push(e),
        }
    }
    failures.sort();
    Ok(PreprocessReport { outputs, failures })
}

pub(super) fn cmd_preprocess(input: &Path, out: &Path) -> CommandOutcome {
    if !input.is_dir() {
        return CommandOutcome::runtime(format!("{}: not a directory", input.display()));
    }
    if let (Ok(a), Ok(b)) = (input.canonicalize(), out.canonicalize()) {
        if a == b {
            return CommandOutcome::validation(vec!["output directory must differ from the input directory".into()]);
        }
    }
    let report = match preprocess_dir(input, out) {
        Ok(r) => r,
        Err(e) => return CommandOutcome::runtime(e.to_string()),
    };
    if report.outputs.is_empty() && report.failures.is_empty() {
        return CommandOutcome::validation(vec![format!("no models found in {}", input.display())]);
    }
    let manifest = Manifest::new(report.outputs.clone(), out);
    let manifest_path = out.join("manifest.json");
    if let Err(e) = std::fs::write(&manifest_path, manifest.to_json()) {
        return CommandOutcome::runtime(format!("{}: {e}", manifest_path.display()));
    }
    let report_json = json!({
        "status": if report.failures.is_empty() { "ok" } else { "partial" },
        "manifest": manifest_path,
        "outputs": report.outputs,
        "errors": report.failures,
    });
    if !report.failures.is_empty() {
        let mut outcome = CommandOutcome::validation(report.failures);
        outcome.report = report_json;
        return outcome;
    }
    CommandOutcome::ok(
        format!("{} models written, manifest {}", report.outputs.len(), manifest_path.display()),
        report_json,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stimulus_names() {
        assert_eq!(split_stimulus_name("rose_gr5_ar6"), Some(("rose", "r5", "r6")));
        assert_eq!(split_stimulus_name("long_name_g2_a3"), Some(("long_name", "2", "3")));
        assert_eq!(split_stimulus_name("rose"), None);
        assert_eq!(split_stimulus_name("rose_gx_ar6"), None);
        assert_eq!(split_stimulus_name("_gr1_ar1"), None);
    }
}

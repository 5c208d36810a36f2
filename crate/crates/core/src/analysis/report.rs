use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::CorrelationReport;
use super::mos::MosTable;
use super::screening::SubjectReport;

/// Screening outcome and MOS table for one group of raters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub subjects: Vec<SubjectReport>,
    pub mos: MosTable,
}

impl GroupReport {
    pub fn qualified_count(&self) -> usize {
        self.subjects.iter().filter(|s| s.is_qualified()).count()
    }
}

/// Output of `qoe3d analyze`: per-group results and, when exactly two groups
/// were given, their agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub groups: BTreeMap<String, GroupReport>,
    pub correlation: Option<CorrelationReport>,
    /// Per group, MOS averaged over sources for each parameter combination.
    /// Only filled when a manifest was available.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameter_means: BTreeMap<String, Vec<ParameterMean>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterMean {
    pub geometry_param: String,
    pub attribute_param: String,
    pub mos: f64,
}

impl AnalysisReport {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, g) in &self.groups {
            out.extend(g.mos.violations().into_iter().map(|v| format!("{name}: {v}")));
            for s in &g.subjects {
                out.extend(s.violations().into_iter().map(|v| format!("{name}: {v}")));
            }
        }
        if let Some(c) = &self.correlation {
            out.extend(c.violations());
        }
        out
    }
}

pub fn parameter_means_csv(report: &AnalysisReport) -> String {
    let mut out = String::from("group,geometry_param,attribute_param,mos\n");
    for (group, rows) in &report.parameter_means {
        for r in rows {
            out.push_str(&format!("{group},{},{},{}\n", r.geometry_param, r.attribute_param, r.mos));
        }
    }
    out
}

pub fn correlation_csv(c: &CorrelationReport) -> String {
    format!("srocc,plcc,krocc,rmse,n\n{},{},{},{},{}\n", c.srocc, c.plcc, c.krocc, c.rmse, c.n)
}

pub fn mos_table_csv(group: &str, table: &MosTable) -> String {
    let mut out = String::from("group,stimulus_id,mos,n,normalized_mos\n");
    for r in &table.rows {
        out.push_str(&format!("{group},{},{},{},{}\n", r.stimulus_id, r.mos, r.n, r.normalized_mos));
    }
    out
}

pub fn subject_reports_csv(group: &str, subjects: &[SubjectReport]) -> String {
    let mut out = String::from("group,subject_id,status,violated_traps\n");
    for s in subjects {
        let traps: Vec<String> = s
            .violated_traps
            .iter()
            .map(|v| format!("{}:{}-{}", v.pair.stimulus_id, v.pair.first, v.pair.repeat))
            .collect();
        let status = if s.is_qualified() { "qualified" } else { "rejected" };
        out.push_str(&format!("{group},{},{status},{}\n", s.subject_id, traps.join(";")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{compute_mos, screen_subjects, RatingMatrix, TrapPair};

    #[test]
    fn csv_renderings() {
        let mut m = RatingMatrix::new(vec!["a".into()], 5);
        m.add_subject("p1", vec![Some(5)], vec![TrapPair { stimulus_id: "a".into(), first: 5, repeat: 1 }])
            .unwrap();
        m.add_subject("p2", vec![Some(3)], vec![]).unwrap();
        let subjects = screen_subjects(&m);
        let mos = compute_mos(&m, &["p2".to_string()]).unwrap();
        assert_eq!(mos_table_csv("g1", &mos), "group,stimulus_id,mos,n,normalized_mos\ng1,a,3,1,0.5\n");
        assert_eq!(
            subject_reports_csv("g1", &subjects),
            "group,subject_id,status,violated_traps\ng1,p1,rejected,a:5-1\ng1,p2,qualified,\n"
        );
        let report = AnalysisReport {
            groups: BTreeMap::from([("g1".to_string(), GroupReport { subjects, mos })]),
            correlation: None,
            parameter_means: BTreeMap::new(),
        };
        assert!(report.violations().is_empty());
        assert_eq!(report.groups["g1"].qualified_count(), 1);
    }
}

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::harness::{AgentKind, TrialRecord, TrialStatus};
use crate::hypothesis::HypothesisSpace;

use super::{normalized_progress, trial_metrics, AnalysisError, TrialMetrics};

/// Record field a summary can be grouped by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupField {
    /// Backend model name, or the agent kind for backend-free agents.
    Model,
    Agent,
    Objects,
    Rule,
    SystemMessage,
    PromptStyle,
}

impl GroupField {
    pub const ALL: [GroupField; 6] = [
        GroupField::Model,
        GroupField::Agent,
        GroupField::Objects,
        GroupField::Rule,
        GroupField::SystemMessage,
        GroupField::PromptStyle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GroupField::Model => "model",
            GroupField::Agent => "agent",
            GroupField::Objects => "objects",
            GroupField::Rule => "rule",
            GroupField::SystemMessage => "system_message",
            GroupField::PromptStyle => "prompt_style",
        }
    }

    pub fn value(&self, record: &TrialRecord) -> String {
        let c = &record.config;
        match self {
            GroupField::Model => model_label(record),
            GroupField::Agent => c.agent_kind.to_string(),
            GroupField::Objects => c.num_objects.to_string(),
            GroupField::Rule => c.rule.to_string(),
            GroupField::SystemMessage => c.system_message_variant.as_str().to_string(),
            GroupField::PromptStyle => c.prompting_style.as_str().to_string(),
        }
    }
}

impl fmt::Display for GroupField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        GroupField::ALL
            .into_iter()
            .find(|g| g.as_str() == key)
            .ok_or_else(|| format!("unknown group field {s:?}"))
    }
}

pub fn model_label(record: &TrialRecord) -> String {
    match (&record.config.backend, record.config.agent_kind) {
        (Some(backend), kind) if kind.needs_backend() => {
            if kind == AgentKind::Sampling {
                format!("{}+sampling", backend.model_name)
            } else {
                backend.model_name.clone()
            }
        }
        (_, kind) => kind.to_string(),
    }
}

/// Mean, sample standard deviation and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub sem: f64,
}

impl Summary {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self {
            n: values.len(),
            mean,
            sd,
            sem: sd / n.sqrt(),
        })
    }
}

/// Summarised metrics, in output column order.
pub const METRIC_COLUMNS: [&str; 9] = [
    "all_correct",
    "per_object_accuracy",
    "steps_taken",
    "unique_states_visited",
    "info_gain_bits",
    "final_support_size",
    "final_distinct_functions",
    "response_length",
    "final_progress",
];

fn metric_values(m: &TrialMetrics) -> [Option<f64>; 9] {
    [
        Some(if m.all_correct { 1.0 } else { 0.0 }),
        Some(m.per_object_accuracy),
        Some(m.steps_taken as f64),
        Some(m.unique_states_visited as f64),
        Some(m.info_gain_bits),
        Some(m.final_support_size as f64),
        Some(m.final_distinct_functions as f64),
        m.response_length,
        Some(m.final_progress),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub keys: Vec<String>,
    pub trials: usize,
    /// One entry per [`METRIC_COLUMNS`] name; `None` when no trial had a value.
    pub metrics: Vec<Option<Summary>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub group_by: Vec<GroupField>,
    pub rows: Vec<SummaryRow>,
}

fn fmt_num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl SummaryTable {
    pub fn header(&self) -> Vec<String> {
        let mut header: Vec<String> = self.group_by.iter().map(|g| g.to_string()).collect();
        header.push("trials".into());
        for m in METRIC_COLUMNS {
            for s in ["mean", "sd", "sem"] {
                header.push(format!("{m}_{s}"));
            }
        }
        header
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AnalysisError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for row in &self.rows {
            let mut fields = row.keys.clone();
            fields.push(row.trials.to_string());
            for s in &row.metrics {
                fields.push(fmt_num(s.map(|s| s.mean)));
                fields.push(fmt_num(s.map(|s| s.sd)));
                fields.push(fmt_num(s.map(|s| s.sem)));
            }
            w.write_record(fields)?;
        }
        w.flush().map_err(|e| AnalysisError::Csv(e.to_string()))
    }
}

/// Metrics for every complete record; incomplete ones are skipped.
pub fn metrics_for(
    records: &[TrialRecord],
) -> Result<Vec<(&TrialRecord, TrialMetrics)>, AnalysisError> {
    let mut out = Vec::with_capacity(records.len());
    for record in records {
        if record.status != TrialStatus::Complete {
            warn!(seed = record.config.seed, "skipping incomplete record");
            continue;
        }
        let space = HypothesisSpace::new(record.config.num_objects)
            .map_err(|e| AnalysisError::CorruptRecord(e.to_string()))?;
        out.push((record, trial_metrics(record, space)?));
    }
    Ok(out)
}

/// Per-group summaries of every metric, groups in sorted key order.
pub fn aggregate(
    records: &[TrialRecord],
    group_by: &[GroupField],
) -> Result<SummaryTable, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::InvalidInput("no records".into()));
    }
    let mut groups: BTreeMap<Vec<String>, Vec<TrialMetrics>> = BTreeMap::new();
    for (record, metrics) in metrics_for(records)? {
        let key = group_by.iter().map(|g| g.value(record)).collect();
        groups.entry(key).or_default().push(metrics);
    }
    let rows = groups
        .into_iter()
        .map(|(keys, metrics)| {
            let columns: Vec<Option<Summary>> = (0..METRIC_COLUMNS.len())
                .map(|i| {
                    let values: Vec<f64> =
                        metrics.iter().filter_map(|m| metric_values(m)[i]).collect();
                    Summary::of(&values)
                })
                .collect();
            SummaryRow {
                keys,
                trials: metrics.len(),
                metrics: columns,
            }
        })
        .collect();
    Ok(SummaryTable {
        group_by: group_by.to_vec(),
        rows,
    })
}

/// Absolute and baseline-normalised final progress per model, object count
/// and rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressRow {
    pub model: String,
    pub objects: usize,
    pub rule: String,
    pub trials: usize,
    pub rho: Summary,
    /// Absent when no random-agent trials share the object count and rule,
    /// or the baseline already reaches 1.
    pub rho_normalized: Option<Summary>,
}

pub fn progress_table(records: &[TrialRecord]) -> Result<Vec<ProgressRow>, AnalysisError> {
    let mut cells: BTreeMap<(String, usize, String), Vec<f64>> = BTreeMap::new();
    let mut baselines: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for (record, metrics) in metrics_for(records)? {
        let objects = record.config.num_objects;
        let rule = record.config.rule.to_string();
        if record.config.agent_kind == AgentKind::Random {
            baselines
                .entry((objects, rule.clone()))
                .or_default()
                .push(metrics.final_progress);
        }
        cells
            .entry((model_label(record), objects, rule))
            .or_default()
            .push(metrics.final_progress);
    }
    let mut rows = Vec::with_capacity(cells.len());
    for ((model, objects, rule), rhos) in cells {
        let baseline = baselines
            .get(&(objects, rule.clone()))
            .and_then(|b| Summary::of(b))
            .map(|s| s.mean);
        let rho_normalized = match baseline {
            Some(r) if r < 1.0 => {
                let values = rhos
                    .iter()
                    .map(|&rho| normalized_progress(rho, r))
                    .collect::<Result<Vec<_>, _>>()?;
                Summary::of(&values)
            }
            _ => None,
        };
        rows.push(ProgressRow {
            model,
            objects,
            rule,
            trials: rhos.len(),
            rho: Summary::of(&rhos).expect("nonempty cell"),
            rho_normalized,
        });
    }
    Ok(rows)
}

pub fn write_progress_csv<W: Write>(rows: &[ProgressRow], out: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "objects",
        "rule",
        "trials",
        "rho_mean",
        "rho_sd",
        "rho_norm_mean",
        "rho_norm_sd",
    ])?;
    for row in rows {
        w.write_record([
            row.model.clone(),
            row.objects.to_string(),
            row.rule.clone(),
            row.trials.to_string(),
            row.rho.mean.to_string(),
            row.rho.sd.to_string(),
            fmt_num(row.rho_normalized.map(|s| s.mean)),
            fmt_num(row.rho_normalized.map(|s| s.sd)),
        ])?;
    }
    w.flush().map_err(|e| AnalysisError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Rule;
    use crate::harness::{run_trial, TrialConfig};

    fn records(kind: AgentKind, rule: Rule, seeds: std::ops::Range<u64>) -> Vec<TrialRecord> {
        seeds
            .map(|s| run_trial(&TrialConfig::new(4, rule, kind, s), None).unwrap())
            .collect()
    }

    #[test]
    fn identical_trials_have_zero_sem() {
        let one = records(AgentKind::Oracle, Rule::Conjunctive, 3..4).remove(0);
        let table = aggregate(&vec![one; 16], &[GroupField::Rule]).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].trials, 16);
        assert!(table.rows[0].metrics.iter().flatten().all(|s| s.sem == 0.0));
    }

    #[test]
    fn groups_by_rule() {
        let mut all = records(AgentKind::Random, Rule::Disjunctive, 0..4);
        all.extend(records(AgentKind::Random, Rule::Conjunctive, 0..4));
        let table = aggregate(&all, &[GroupField::Rule]).unwrap();
        assert_eq!(table.rows.len(), 2);
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("rule,trials,all_correct_mean,"));
    }

    #[test]
    fn progress_rows_normalise_against_random() {
        let mut all = records(AgentKind::Random, Rule::Disjunctive, 0..10);
        all.extend(records(AgentKind::Oracle, Rule::Disjunctive, 0..10));
        let rows = progress_table(&all).unwrap();
        assert_eq!(rows.len(), 2);
        let oracle = rows.iter().find(|r| r.model == "oracle").unwrap();
        assert!(oracle.rho.mean > 0.99);
        let random = rows.iter().find(|r| r.model == "random").unwrap();
        assert!(random.rho_normalized.unwrap().mean.abs() < 1e-12);
    }
}

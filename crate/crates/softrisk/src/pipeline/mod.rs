//! Pipeline orchestration: dataset/config ingestion, the five processing
//! stages, artifact persistence, and report emission.

mod artifacts;
mod dataset;
mod report;

pub use artifacts::{
    load_config, load_fuzzy_table, load_risk_model, load_rules, load_soft_sets, save_config,
    write_fuzzy_table, write_risk_model, write_rules, write_soft_sets, RunArtifacts, CONFIG_FILE,
    FUZZY_TABLE_FILE, REDUCED_SOFT_SETS_FILE, REPORT_FILE, RISK_MODEL_FILE, RULES_FILE,
    SOFT_SETS_FILE,
};
pub use dataset::{load_dataset, load_fixture, load_labels, FixtureEntry, MembershipFixture};
pub use report::emit_report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzify::{config_digest, fuzzify_table, LinguisticVariable, PatientRecord};
use crate::rules::{enumerate_rules, score_rules, VariableSets};
use crate::softset::{alpha_cut, merge_duplicate_levels, reduce_trivial, SoftSet};

/// A corpus description: the variable configuration plus dataset metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub corpus_name: String,
    pub label_column: Option<String>,
    pub variables: Vec<LinguisticVariable>,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for var in &self.variables {
            if !seen.insert(var.name.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "variable {} is declared twice",
                    var.name
                )));
            }
            var.validate()?;
        }
        if let Some(label) = &self.label_column {
            if seen.contains(label.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "label column {label} collides with a variable name"
                )));
            }
        }
        Ok(())
    }

    /// Fingerprint of the variable configuration only; metadata does not
    /// influence artifact compatibility.
    pub fn digest(&self) -> String {
        config_digest(&self.variables)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub merge_duplicate_levels: bool,
    pub threshold: f64,
    pub fixture: Option<MembershipFixture>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            merge_duplicate_levels: false,
            threshold: 50.0,
            fixture: None,
        }
    }
}

/// Labels for scoring: an explicit file wins over labels carried inline by
/// the dataset; `None` when neither source provides any.
pub fn resolve_labels(
    records: &[PatientRecord],
    explicit: Option<BTreeMap<String, bool>>,
) -> Option<BTreeMap<String, bool>> {
    if explicit.is_some() {
        return explicit;
    }
    let inline: BTreeMap<String, bool> = records
        .iter()
        .filter_map(|r| r.label.map(|l| (r.id.clone(), l)))
        .collect();
    if inline.is_empty() {
        None
    } else {
        Some(inline)
    }
}

/// Runs the five stages in order: fuzzify, soft sets, reduce, rules, score.
/// Scoring is skipped when no labels are given; everything is deterministic
/// end to end.
pub fn run_pipeline(
    records: &[PatientRecord],
    config: &DatasetConfig,
    labels: Option<&BTreeMap<String, bool>>,
    options: &PipelineOptions,
) -> Result<RunArtifacts> {
    config.validate()?;
    let digest = config.digest();

    let fuzzy_table = fuzzify_table(records, &config.variables).map_err(Error::stage("fuzzify"))?;

    let mut soft_sets = Vec::new();
    for var in &config.variables {
        for term in &var.terms {
            soft_sets.push(
                alpha_cut(&fuzzy_table, &var.name, &term.name, &term.levels)
                    .map_err(Error::stage("softsets"))?,
            );
        }
    }

    let reduced_soft_sets: Vec<SoftSet> = soft_sets
        .iter()
        .map(|s| {
            let r = reduce_trivial(s);
            if options.merge_duplicate_levels {
                merge_duplicate_levels(&r)
            } else {
                r
            }
        })
        .collect();

    let groups: Vec<VariableSets> = config
        .variables
        .iter()
        .map(|var| VariableSets {
            variable: var.name.clone(),
            sets: reduced_soft_sets
                .iter()
                .filter(|s| s.source().variable == var.name)
                .cloned()
                .collect(),
        })
        .collect();
    let enumerated = enumerate_rules(&groups).map_err(Error::stage("rules"))?;

    let risk_model = match labels {
        Some(labels) => Some(
            score_rules(&enumerated, fuzzy_table.universe(), labels, digest.clone())
                .map_err(Error::stage("score"))?,
        ),
        None => None,
    };

    let mut artifacts = RunArtifacts {
        config: config.clone(),
        config_digest: digest,
        fuzzy_table,
        soft_sets,
        reduced_soft_sets,
        enumerated,
        risk_model,
        threshold: options.threshold,
        fixture: options.fixture.clone(),
        report: String::new(),
    };
    artifacts.report = emit_report(&artifacts);
    Ok(artifacts)
}

//! Artifact persistence. Every stage output is a JSON document with stable
//! field order and the configuration digest embedded, so byte-identity across
//! runs is meaningful and stages can reject mixed-configuration inputs.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzify::FuzzyTable;
use crate::pipeline::{DatasetConfig, MembershipFixture};
use crate::rules::{Conjunct, EnumeratedRules, RiskModel, Rule, ScoredRule};
use crate::softset::{Alpha, MemberSet, SoftSet, SourceTag, Universe};

pub const CONFIG_FILE: &str = "config.json";
pub const FUZZY_TABLE_FILE: &str = "fuzzy_table.json";
pub const SOFT_SETS_FILE: &str = "soft_sets.json";
pub const REDUCED_SOFT_SETS_FILE: &str = "soft_sets_reduced.json";
pub const RULES_FILE: &str = "rules.json";
pub const RISK_MODEL_FILE: &str = "risk_model.json";
pub const REPORT_FILE: &str = "report.txt";

/// Everything one pipeline run produces. Each field persists as a separate
/// artifact; all share one configuration digest.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: DatasetConfig,
    pub config_digest: String,
    pub fuzzy_table: FuzzyTable,
    pub soft_sets: Vec<SoftSet>,
    pub reduced_soft_sets: Vec<SoftSet>,
    pub enumerated: EnumeratedRules,
    pub risk_model: Option<RiskModel>,
    pub threshold: f64,
    pub fixture: Option<MembershipFixture>,
    pub report: String,
}

impl RunArtifacts {
    /// Writes every artifact into `dir`, creating it if needed.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
        save_config(&dir.join(CONFIG_FILE), &self.config)?;
        write_fuzzy_table(dir, &self.config_digest, &self.fuzzy_table)?;
        write_soft_sets(dir, SOFT_SETS_FILE, &self.config_digest, &self.soft_sets)?;
        write_soft_sets(
            dir,
            REDUCED_SOFT_SETS_FILE,
            &self.config_digest,
            &self.reduced_soft_sets,
        )?;
        write_rules(
            dir,
            &self.config_digest,
            self.fuzzy_table.universe(),
            &self.enumerated,
        )?;
        if let Some(model) = &self.risk_model {
            write_risk_model(dir, model)?;
        }
        let report_path = dir.join(REPORT_FILE);
        std::fs::write(&report_path, &self.report).map_err(Error::io(report_path))?;
        Ok(())
    }
}

/// Stage commands write single artifacts through these so their bytes match
/// a full run exactly.
pub fn write_fuzzy_table(dir: &Path, digest: &str, table: &FuzzyTable) -> Result<()> {
    write_json(&dir.join(FUZZY_TABLE_FILE), &fuzzy_table_doc(digest, table))
}

pub fn write_soft_sets(dir: &Path, file: &str, digest: &str, sets: &[SoftSet]) -> Result<()> {
    write_json(&dir.join(file), &soft_sets_doc(digest, sets))
}

pub fn write_rules(
    dir: &Path,
    digest: &str,
    universe: &Arc<Universe>,
    enumerated: &EnumeratedRules,
) -> Result<()> {
    write_json(
        &dir.join(RULES_FILE),
        &rules_doc(digest, universe, enumerated),
    )
}

pub fn write_risk_model(dir: &Path, model: &RiskModel) -> Result<()> {
    write_json(&dir.join(RISK_MODEL_FILE), &risk_model_doc(model))
}

fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    std::fs::write(path, text).map_err(Error::io(path))?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(Error::io(path))
}

fn artifact_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Artifact {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn check_digest(found: &str, expected: Option<&str>) -> Result<()> {
    if let Some(expected) = expected {
        if found != expected {
            return Err(Error::DigestMismatch {
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
    }
    Ok(())
}

pub fn save_config(path: &Path, config: &DatasetConfig) -> Result<()> {
    write_json(path, config)
}

pub fn load_config(path: &Path) -> Result<DatasetConfig> {
    let config: DatasetConfig = serde_json::from_str(&read_to_string(path)?)?;
    config.validate()?;
    Ok(config)
}

// ---- fuzzy table ----

#[derive(Serialize, Deserialize)]
struct FuzzyTableDoc {
    config_digest: String,
    universe: Vec<String>,
    variables: Vec<VariableDoc>,
}

#[derive(Serialize, Deserialize)]
struct VariableDoc {
    name: String,
    terms: Vec<TermDoc>,
}

#[derive(Serialize, Deserialize)]
struct TermDoc {
    name: String,
    values: Vec<f64>,
}

fn fuzzy_table_doc(digest: &str, table: &FuzzyTable) -> FuzzyTableDoc {
    FuzzyTableDoc {
        config_digest: digest.to_string(),
        universe: table.universe().ids().to_vec(),
        variables: table
            .variables()
            .iter()
            .map(|v| VariableDoc {
                name: v.variable.clone(),
                terms: v
                    .terms
                    .iter()
                    .map(|t| TermDoc {
                        name: t.term.clone(),
                        values: t.values.clone(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn load_fuzzy_table(path: &Path, expected_digest: Option<&str>) -> Result<FuzzyTable> {
    let doc: FuzzyTableDoc = serde_json::from_str(&read_to_string(path)?)?;
    check_digest(&doc.config_digest, expected_digest)?;
    let universe = Arc::new(Universe::new(doc.universe)?);
    FuzzyTable::from_columns(
        universe,
        doc.variables
            .into_iter()
            .map(|v| {
                (
                    v.name,
                    v.terms.into_iter().map(|t| (t.name, t.values)).collect(),
                )
            })
            .collect(),
    )
    .map_err(|e| artifact_error(path, e.to_string()))
}

// ---- soft sets ----

#[derive(Serialize, Deserialize)]
struct SoftSetsDoc {
    config_digest: String,
    universe: Vec<String>,
    sets: Vec<SoftSetDoc>,
}

#[derive(Serialize, Deserialize)]
struct SoftSetDoc {
    variable: String,
    term: String,
    levels: Vec<LevelDoc>,
}

#[derive(Serialize, Deserialize)]
struct LevelDoc {
    alpha: Alpha,
    members: Vec<String>,
}

fn soft_sets_doc(digest: &str, sets: &[SoftSet]) -> SoftSetsDoc {
    let universe = sets
        .first()
        .map(|s| s.universe().ids().to_vec())
        .unwrap_or_default();
    SoftSetsDoc {
        config_digest: digest.to_string(),
        universe,
        sets: sets
            .iter()
            .map(|s| SoftSetDoc {
                variable: s.source().variable.clone(),
                term: s.source().term.clone(),
                levels: s
                    .levels()
                    .iter()
                    .map(|(alpha, members)| LevelDoc {
                        alpha: *alpha,
                        members: members.ids(s.universe()).map(str::to_string).collect(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn load_soft_sets(path: &Path, expected_digest: Option<&str>) -> Result<Vec<SoftSet>> {
    let doc: SoftSetsDoc = serde_json::from_str(&read_to_string(path)?)?;
    check_digest(&doc.config_digest, expected_digest)?;
    let universe = Arc::new(Universe::new(doc.universe)?);
    doc.sets
        .into_iter()
        .map(|set| {
            let levels = set
                .levels
                .into_iter()
                .map(|level| {
                    let members = member_set(path, &universe, &level.members)?;
                    Ok((level.alpha, members))
                })
                .collect::<Result<Vec<_>>>()?;
            SoftSet::new(
                universe.clone(),
                SourceTag {
                    variable: set.variable,
                    term: set.term,
                },
                levels,
            )
            .map_err(|e| artifact_error(path, e.to_string()))
        })
        .collect()
}

fn member_set(path: &Path, universe: &Arc<Universe>, ids: &[String]) -> Result<MemberSet> {
    let mut set = MemberSet::empty(universe.len());
    for id in ids {
        let index = universe
            .index_of(id)
            .ok_or_else(|| artifact_error(path, format!("member {id} is not in the universe")))?;
        set.insert(index);
    }
    Ok(set)
}

// ---- rules / risk model ----

#[derive(Serialize, Deserialize)]
struct RulesDoc {
    config_digest: String,
    universe: Vec<String>,
    candidates: u64,
    rules: Vec<RuleDoc>,
}

#[derive(Serialize, Deserialize)]
struct RuleDoc {
    id: u64,
    conjuncts: Vec<Conjunct>,
    matched: Vec<String>,
    support: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    positives: Option<u32>,
    /// Risk rounded to one decimal; recomputed exactly from
    /// positives/support on load.
    #[serde(skip_serializing_if = "Option::is_none")]
    risk: Option<f64>,
}

fn rules_doc(digest: &str, universe: &Arc<Universe>, enumerated: &EnumeratedRules) -> RulesDoc {
    RulesDoc {
        config_digest: digest.to_string(),
        universe: universe.ids().to_vec(),
        candidates: enumerated.candidates,
        rules: enumerated
            .rules
            .iter()
            .map(|rule| RuleDoc {
                id: rule.id,
                conjuncts: rule.conjuncts.clone(),
                matched: rule.matched.ids(universe).map(str::to_string).collect(),
                support: rule.matched.count() as u32,
                positives: None,
                risk: None,
            })
            .collect(),
    }
}

fn round1(value: f64) -> f64 {
    (value * 10.0).round() / 10.0
}

fn risk_model_doc(model: &RiskModel) -> RulesDoc {
    RulesDoc {
        config_digest: model.config_digest.clone(),
        universe: model.universe.ids().to_vec(),
        candidates: model.candidates,
        rules: model
            .rules
            .iter()
            .map(|scored| RuleDoc {
                id: scored.rule.id,
                conjuncts: scored.rule.conjuncts.clone(),
                matched: scored
                    .rule
                    .matched
                    .ids(&model.universe)
                    .map(str::to_string)
                    .collect(),
                support: scored.support,
                positives: Some(scored.positives),
                risk: Some(round1(scored.risk)),
            })
            .collect(),
    }
}

fn rule_from_doc(path: &Path, universe: &Arc<Universe>, doc: &RuleDoc) -> Result<Rule> {
    let matched = member_set(path, universe, &doc.matched)?;
    if matched.count() != doc.support as usize {
        return Err(artifact_error(
            path,
            format!("rule {} support disagrees with its member list", doc.id),
        ));
    }
    if matched.is_empty() {
        return Err(artifact_error(
            path,
            format!("rule {} has no members", doc.id),
        ));
    }
    Ok(Rule {
        id: doc.id,
        conjuncts: doc.conjuncts.clone(),
        matched,
    })
}

pub fn load_rules(
    path: &Path,
    expected_digest: Option<&str>,
) -> Result<(Arc<Universe>, EnumeratedRules)> {
    let doc: RulesDoc = serde_json::from_str(&read_to_string(path)?)?;
    check_digest(&doc.config_digest, expected_digest)?;
    let universe = Arc::new(Universe::new(doc.universe.clone())?);
    let rules = doc
        .rules
        .iter()
        .map(|r| rule_from_doc(path, &universe, r))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        universe,
        EnumeratedRules {
            candidates: doc.candidates,
            rules,
        },
    ))
}

pub fn load_risk_model(path: &Path, expected_digest: Option<&str>) -> Result<RiskModel> {
    let doc: RulesDoc = serde_json::from_str(&read_to_string(path)?)?;
    check_digest(&doc.config_digest, expected_digest)?;
    let universe = Arc::new(Universe::new(doc.universe.clone())?);
    let rules = doc
        .rules
        .iter()
        .map(|r| {
            let rule = rule_from_doc(path, &universe, r)?;
            let positives = r.positives.ok_or_else(|| {
                artifact_error(path, format!("rule {} has no positives count", r.id))
            })?;
            let exact = 100.0 * f64::from(positives) / f64::from(r.support);
            match r.risk {
                Some(stored) if (stored - round1(exact)).abs() < 1e-9 => Ok(ScoredRule {
                    rule,
                    support: r.support,
                    positives,
                    risk: exact,
                }),
                Some(stored) => Err(artifact_error(
                    path,
                    format!(
                        "rule {} stores risk {stored} but positives/support give {exact}",
                        r.id
                    ),
                )),
                None => Err(artifact_error(path, format!("rule {} has no risk", r.id))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let model = RiskModel {
        universe,
        config_digest: doc.config_digest,
        candidates: doc.candidates,
        rules,
    };
    model
        .verify()
        .map_err(|e| artifact_error(path, e.to_string()))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzify::{default_dengue_config, fuzzify_table, PatientRecord};
    use crate::pipeline::{run_pipeline, PipelineOptions};
    use std::collections::BTreeMap;

    fn reference_records() -> Vec<PatientRecord> {
        let rows: [(&str, [f64; 5]); 4] = [
            ("v_1", [6.0, 3600.0, 46.0, 50000.0, 125.0]),
            ("v_2", [75.0, 3650.0, 51.0, 45000.0, 126.0]),
            ("v_3", [40.0, 3900.0, 47.0, 39000.0, 130.0]),
            ("v_4", [25.0, 5000.0, 44.0, 20000.0, 139.0]),
        ];
        let names = ["age", "tlc", "sgot", "platelets", "bp"];
        rows.iter()
            .map(|(id, values)| PatientRecord {
                id: id.to_string(),
                values: names
                    .iter()
                    .zip(values.iter())
                    .map(|(n, v)| (n.to_string(), *v))
                    .collect(),
                label: None,
            })
            .collect()
    }

    fn config() -> DatasetConfig {
        DatasetConfig {
            corpus_name: "test".into(),
            label_column: None,
            variables: default_dengue_config(),
        }
    }

    fn labels() -> BTreeMap<String, bool> {
        [("v_1", true), ("v_2", true), ("v_3", false), ("v_4", false)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    #[test]
    fn artifacts_round_trip_and_are_byte_identical() {
        let config = config();
        let records = reference_records();
        let labels = labels();
        let artifacts = run_pipeline(
            &records,
            &config,
            Some(&labels),
            &PipelineOptions::default(),
        )
        .unwrap();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        artifacts.persist(dir1.path()).unwrap();
        artifacts.persist(dir2.path()).unwrap();
        for file in [
            CONFIG_FILE,
            FUZZY_TABLE_FILE,
            SOFT_SETS_FILE,
            REDUCED_SOFT_SETS_FILE,
            RULES_FILE,
            RISK_MODEL_FILE,
            REPORT_FILE,
        ] {
            let a = std::fs::read(dir1.path().join(file)).unwrap();
            let b = std::fs::read(dir2.path().join(file)).unwrap();
            assert_eq!(a, b, "artifact {file} differs between identical runs");
        }

        let digest = artifacts.config_digest.as_str();
        let loaded_config = load_config(&dir1.path().join(CONFIG_FILE)).unwrap();
        assert_eq!(loaded_config, config);
        let table = load_fuzzy_table(&dir1.path().join(FUZZY_TABLE_FILE), Some(digest)).unwrap();
        assert_eq!(table, artifacts.fuzzy_table);
        let sets = load_soft_sets(&dir1.path().join(SOFT_SETS_FILE), Some(digest)).unwrap();
        assert_eq!(sets, artifacts.soft_sets);
        let reduced =
            load_soft_sets(&dir1.path().join(REDUCED_SOFT_SETS_FILE), Some(digest)).unwrap();
        assert_eq!(reduced, artifacts.reduced_soft_sets);
        let (_, enumerated) = load_rules(&dir1.path().join(RULES_FILE), Some(digest)).unwrap();
        assert_eq!(enumerated, artifacts.enumerated);
        let model = load_risk_model(&dir1.path().join(RISK_MODEL_FILE), Some(digest)).unwrap();
        assert_eq!(&model, artifacts.risk_model.as_ref().unwrap());
    }

    #[test]
    fn digest_mismatch_is_detected() {
        let config = config();
        let records = reference_records();
        let artifacts = run_pipeline(&records, &config, None, &PipelineOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        artifacts.persist(dir.path()).unwrap();
        let err = load_fuzzy_table(&dir.path().join(FUZZY_TABLE_FILE), Some("not-the-digest"))
            .unwrap_err();
        assert!(matches!(err, Error::DigestMismatch { .. }));
    }

    #[test]
    fn risk_model_with_tampered_risk_is_rejected() {
        let config = config();
        let records = reference_records();
        let artifacts = run_pipeline(
            &records,
            &config,
            Some(&labels()),
            &PipelineOptions::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        artifacts.persist(dir.path()).unwrap();
        let path = dir.path().join(RISK_MODEL_FILE);
        let tampered = std::fs::read_to_string(&path).unwrap().replacen(
            "\"risk\": 100.0",
            "\"risk\": 40.0",
            1,
        );
        std::fs::write(&path, tampered).unwrap();
        assert!(load_risk_model(&path, None).is_err());
    }

    #[test]
    fn fuzzify_matches_loaded_table_for_reference_rows() {
        let config = config();
        let records = reference_records();
        let table = fuzzify_table(&records, &config.variables).unwrap();
        assert_eq!(table.membership(0, "age", "child").unwrap(), 4.0 / 7.0);
        assert_eq!(table.membership(1, "sgot", "high").unwrap(), 0.8);
    }
}

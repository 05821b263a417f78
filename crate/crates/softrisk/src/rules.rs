//! Conjunctive rule enumeration, risk scoring, and diagnosis.
//!
//! A rule picks one (term, alpha) per configured variable; its matched set is
//! the intersection of the chosen soft-set levels. Enumeration walks the full
//! cartesian product in a fixed order (variables in configuration order,
//! terms in declaration order, alphas ascending), drops empty matches, and
//! merges duplicate matched sets keeping the lowest ordinal. Risk is the
//! labeled-positive fraction of the matched set, as a percentage.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzify::{config_digest, LinguisticVariable, PatientRecord};
use crate::softset::{Alpha, MemberSet, SoftSet, Universe};

/// One (variable, term, alpha) pick of a rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conjunct {
    pub variable: String,
    pub term: String,
    pub alpha: Alpha,
}

impl std::fmt::Display for Conjunct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={}@{}", self.variable, self.term, self.alpha)
    }
}

/// A conjunctive rule: exactly one conjunct per configured variable, plus the
/// patients matching all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    /// 1-based ordinal in the deterministic candidate enumeration. Sparse
    /// after pruning; stable across runs.
    pub id: u64,
    pub conjuncts: Vec<Conjunct>,
    pub matched: MemberSet,
}

/// The soft sets one variable contributes to enumeration, terms in
/// declaration order.
#[derive(Debug, Clone)]
pub struct VariableSets {
    pub variable: String,
    pub sets: Vec<SoftSet>,
}

/// Output of rule enumeration: the candidate-space size and the surviving
/// rules in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedRules {
    pub candidates: u64,
    pub rules: Vec<Rule>,
}

/// Enumerates every rule over the given per-variable soft sets.
pub fn enumerate_rules(groups: &[VariableSets]) -> Result<EnumeratedRules> {
    if groups.is_empty() {
        return Err(Error::InvalidInput("no variables to enumerate over".into()));
    }
    let universe = groups
        .iter()
        .flat_map(|g| g.sets.first())
        .map(|s| s.universe().clone())
        .next()
        .ok_or_else(|| Error::Enumeration {
            variable: groups[0].variable.clone(),
        })?;
    for group in groups {
        for set in &group.sets {
            if set.universe() != &universe {
                return Err(Error::UniverseMismatch);
            }
            if set.source().variable != group.variable {
                return Err(Error::InvalidInput(format!(
                    "soft set {} grouped under variable {}",
                    set.source(),
                    group.variable
                )));
            }
        }
    }

    // Per variable: flattened (conjunct, level set) options in term order, alphas ascending.
    let mut options: Vec<Vec<(Conjunct, &MemberSet)>> = Vec::with_capacity(groups.len());
    for group in groups {
        let mut opts = Vec::new();
        for set in &group.sets {
            for (alpha, members) in set.levels() {
                opts.push((
                    Conjunct {
                        variable: set.source().variable.clone(),
                        term: set.source().term.clone(),
                        alpha: *alpha,
                    },
                    members,
                ));
            }
        }
        if opts.is_empty() {
            return Err(Error::Enumeration {
                variable: group.variable.clone(),
            });
        }
        options.push(opts);
    }

    let candidates: u64 = options
        .iter()
        .map(|o| o.len() as u64)
        .try_fold(1u64, u64::checked_mul)
        .ok_or_else(|| Error::InvalidInput("candidate space exceeds u64".into()))?;

    let mut rules = Vec::new();
    let mut seen: HashMap<MemberSet, u64> = HashMap::new();
    let mut idx = vec![0usize; options.len()];
    let mut ordinal: u64 = 0;
    loop {
        ordinal += 1;
        let mut matched = options[0][idx[0]].1.clone();
        for (pos, &i) in idx.iter().enumerate().skip(1) {
            matched.intersect_with(options[pos][i].1);
            if matched.is_empty() {
                break;
            }
        }
        if !matched.is_empty() && !seen.contains_key(&matched) {
            seen.insert(matched.clone(), ordinal);
            rules.push(Rule {
                id: ordinal,
                conjuncts: idx
                    .iter()
                    .enumerate()
                    .map(|(pos, &i)| options[pos][i].0.clone())
                    .collect(),
                matched,
            });
        }
        // advance odometer, last variable fastest
        let mut pos = idx.len();
        loop {
            if pos == 0 {
                return Ok(EnumeratedRules { candidates, rules });
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// A rule with its label-derived statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRule {
    pub rule: Rule,
    pub support: u32,
    pub positives: u32,
    /// Percentage in [0, 100]; exactly `100 * positives / support`.
    pub risk: f64,
}

/// The scored rule list for one configuration over one universe.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskModel {
    pub universe: Arc<Universe>,
    pub config_digest: String,
    pub candidates: u64,
    pub rules: Vec<ScoredRule>,
}

impl RiskModel {
    /// Re-checks the model invariants; a failure is an internal error.
    pub fn verify(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for scored in &self.rules {
            if scored.support == 0 || scored.rule.matched.is_empty() {
                return Err(Error::Internal(format!(
                    "rule {} has an empty matched set",
                    scored.rule.id
                )));
            }
            if scored.rule.matched.count() != scored.support as usize {
                return Err(Error::Internal(format!(
                    "rule {} support does not match its member count",
                    scored.rule.id
                )));
            }
            let expected = 100.0 * f64::from(scored.positives) / f64::from(scored.support);
            if (scored.risk - expected).abs() > 1e-12 || !(0.0..=100.0).contains(&scored.risk) {
                return Err(Error::Internal(format!(
                    "rule {} risk {} deviates from {expected}",
                    scored.rule.id, scored.risk
                )));
            }
            if !seen.insert(&scored.rule.matched) {
                return Err(Error::Internal(format!(
                    "rule {} duplicates another rule's matched set",
                    scored.rule.id
                )));
            }
        }
        Ok(())
    }
}

/// Scores every rule against ground-truth labels.
pub fn score_rules(
    enumerated: &EnumeratedRules,
    universe: &Arc<Universe>,
    labels: &BTreeMap<String, bool>,
    config_digest: String,
) -> Result<RiskModel> {
    let mut rules = Vec::with_capacity(enumerated.rules.len());
    for rule in &enumerated.rules {
        let mut positives = 0u32;
        let mut support = 0u32;
        for index in rule.matched.iter() {
            let id = universe.id(index);
            match labels.get(id) {
                Some(true) => {
                    positives += 1;
                    support += 1;
                }
                Some(false) => support += 1,
                None => {
                    return Err(Error::MissingLabel {
                        patient: id.to_string(),
                        rule_id: rule.id,
                    })
                }
            }
        }
        rules.push(ScoredRule {
            rule: rule.clone(),
            support,
            positives,
            risk: 100.0 * f64::from(positives) / f64::from(support),
        });
    }
    let model = RiskModel {
        universe: universe.clone(),
        config_digest,
        candidates: enumerated.candidates,
        rules,
    };
    model.verify()?;
    Ok(model)
}

/// Diagnosis of one record: the rules it satisfies and the highest risk among
/// them. `risk` is `None` when no rule matches; absence of evidence is not a
/// zero-risk claim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnosis {
    pub record_id: String,
    pub matched_rules: Vec<u64>,
    pub risk: Option<f64>,
}

/// Diagnoses a record by membership: a rule matches when every conjunct's
/// membership of the record's raw value clears its alpha.
pub fn diagnose(
    model: &RiskModel,
    record: &PatientRecord,
    config: &[LinguisticVariable],
) -> Result<Diagnosis> {
    let digest = config_digest(config);
    if digest != model.config_digest {
        return Err(Error::DigestMismatch {
            expected: model.config_digest.clone(),
            found: digest,
        });
    }
    // memberships computed once per (variable, term)
    let mut memberships: HashMap<(&str, &str), f64> = HashMap::new();
    for var in config {
        let x = record
            .values
            .get(&var.name)
            .copied()
            .ok_or_else(|| Error::ConfigMismatch {
                record: record.id.clone(),
                variable: var.name.clone(),
            })?;
        for term in &var.terms {
            memberships.insert(
                (var.name.as_str(), term.name.as_str()),
                term.mf.evaluate(x)?,
            );
        }
    }

    let mut matched_rules = Vec::new();
    let mut risk: Option<f64> = None;
    for scored in &model.rules {
        let hit = scored.rule.conjuncts.iter().try_fold(true, |acc, c| {
            let mu = memberships
                .get(&(c.variable.as_str(), c.term.as_str()))
                .ok_or_else(|| Error::UnknownColumn {
                    variable: c.variable.clone(),
                    term: c.term.clone(),
                })?;
            Ok::<bool, Error>(acc && *mu >= c.alpha.get())
        })?;
        if hit {
            matched_rules.push(scored.rule.id);
            risk = Some(risk.map_or(scored.risk, |r: f64| r.max(scored.risk)));
        }
    }
    Ok(Diagnosis {
        record_id: record.id.clone(),
        matched_rules,
        risk,
    })
}

/// Diagnoses every universe member directly from the matched sets. For
/// in-corpus patients this agrees with membership-based [`diagnose`].
pub fn diagnose_corpus(model: &RiskModel) -> Vec<Diagnosis> {
    (0..model.universe.len())
        .map(|index| {
            let mut matched_rules = Vec::new();
            let mut risk: Option<f64> = None;
            for scored in &model.rules {
                if scored.rule.matched.contains(index) {
                    matched_rules.push(scored.rule.id);
                    risk = Some(risk.map_or(scored.risk, |r: f64| r.max(scored.risk)));
                }
            }
            Diagnosis {
                record_id: model.universe.id(index).to_string(),
                matched_rules,
                risk,
            }
        })
        .collect()
}

/// Classifies every universe member: positive when the best matched risk
/// clears the threshold, negative otherwise (including no-match).
pub fn classify_corpus(model: &RiskModel, threshold: f64) -> Result<Vec<(String, bool)>> {
    if !(0.0..=100.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!(
            "threshold {threshold} is outside [0, 100]"
        )));
    }
    Ok(diagnose_corpus(model)
        .into_iter()
        .map(|d| (d.record_id, d.risk.is_some_and(|r| r >= threshold)))
        .collect())
}

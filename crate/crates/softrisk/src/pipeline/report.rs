//! Human-readable run report. The report is a pure function of the run
//! artifacts: regenerating it from persisted intermediates reproduces the
//! same bytes. Memberships are rounded to two decimals and risks to one
//! decimal here and only here.

use std::fmt::Write;

use crate::pipeline::RunArtifacts;
use crate::rules::diagnose_corpus;

fn section(out: &mut String, title: &str) {
    let _ = writeln!(out, "\n{title}");
    let _ = writeln!(out, "{}", "-".repeat(title.len()));
}

pub fn emit_report(artifacts: &RunArtifacts) -> String {
    let mut out = String::new();
    let universe = artifacts.fuzzy_table.universe().clone();

    let _ = writeln!(out, "soft-set risk report");
    let _ = writeln!(out, "====================");
    let _ = writeln!(out, "corpus: {}", artifacts.config.corpus_name);
    let _ = writeln!(out, "config digest: {}", artifacts.config_digest);
    let _ = writeln!(out, "patients: {}", universe.len());
    let variables: Vec<String> = artifacts
        .config
        .variables
        .iter()
        .map(|v| {
            if v.unit.is_empty() {
                v.name.clone()
            } else {
                format!("{} ({})", v.name, v.unit)
            }
        })
        .collect();
    let _ = writeln!(out, "variables: {}", variables.join(", "));

    section(&mut out, "pipeline");
    let levels_before: usize = artifacts.soft_sets.iter().map(|s| s.levels().len()).sum();
    let levels_after: usize = artifacts
        .reduced_soft_sets
        .iter()
        .map(|s| s.levels().len())
        .sum();
    let _ = writeln!(
        out,
        "soft sets: {} ({} levels) -> reduced {} ({} levels)",
        artifacts.soft_sets.len(),
        levels_before,
        artifacts.reduced_soft_sets.len(),
        levels_after
    );
    let _ = writeln!(out, "rule candidates: {}", artifacts.enumerated.candidates);
    let _ = writeln!(out, "surviving rules: {}", artifacts.enumerated.rules.len());

    if artifacts.enumerated.rules.is_empty() {
        section(&mut out, "rules");
        let _ = writeln!(out, "no rules survived pruning");
    } else if let Some(model) = &artifacts.risk_model {
        section(&mut out, "rules");
        let _ = writeln!(
            out,
            "{:>8}  {:>7}  {:>9}  {:>6}  conjuncts",
            "id", "support", "positives", "risk%"
        );
        for scored in &model.rules {
            let conjuncts: Vec<String> = scored
                .rule
                .conjuncts
                .iter()
                .map(|c| c.to_string())
                .collect();
            let _ = writeln!(
                out,
                "{:>8}  {:>7}  {:>9}  {:>6.1}  {}",
                scored.rule.id,
                scored.support,
                scored.positives,
                scored.risk,
                conjuncts.join(" ")
            );
        }

        section(&mut out, "patients");
        let _ = writeln!(
            out,
            "{:>8}  {:>5}  {:>8}  {:>6}",
            "id", "rules", "best", "risk%"
        );
        let diagnoses = diagnose_corpus(model);
        let mut positives = 0usize;
        let mut unmatched = 0usize;
        for d in &diagnoses {
            match d.risk {
                Some(risk) => {
                    // the lowest-id rule attaining the maximum risk
                    let best = d
                        .matched_rules
                        .iter()
                        .find(|id| {
                            model
                                .rules
                                .iter()
                                .any(|s| s.rule.id == **id && s.risk == risk)
                        })
                        .expect("matched rule with maximal risk");
                    if risk >= artifacts.threshold {
                        positives += 1;
                    }
                    let _ = writeln!(
                        out,
                        "{:>8}  {:>5}  {:>8}  {:>6.1}",
                        d.record_id,
                        d.matched_rules.len(),
                        best,
                        risk
                    );
                }
                None => {
                    unmatched += 1;
                    let _ = writeln!(
                        out,
                        "{:>8}  {:>5}  {:>8}  {:>6}",
                        d.record_id, 0, "-", "none"
                    );
                }
            }
        }

        section(&mut out, "aggregate");
        let _ = writeln!(out, "threshold: {:.1}%", artifacts.threshold);
        let _ = writeln!(out, "positive: {} of {}", positives, universe.len());
        let _ = writeln!(out, "no matching rule: {unmatched}");
    } else {
        section(&mut out, "rules");
        let _ = writeln!(out, "{:>8}  {:>7}  conjuncts", "id", "support");
        for rule in &artifacts.enumerated.rules {
            let conjuncts: Vec<String> = rule.conjuncts.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(
                out,
                "{:>8}  {:>7}  {}",
                rule.id,
                rule.matched.count(),
                conjuncts.join(" ")
            );
        }
        section(&mut out, "scoring");
        let _ = writeln!(
            out,
            "scoring skipped: no labels provided; rule risks and patient classification unavailable"
        );
    }

    section(&mut out, "range flags");
    let flags = artifacts.fuzzy_table.out_of_range_flags();
    if flags.is_empty() {
        let _ = writeln!(out, "none");
    } else {
        for (patient, variable) in &flags {
            let _ = writeln!(
                out,
                "{} {}: value outside every configured term range",
                universe.id(*patient),
                variable
            );
        }
    }

    if let Some(fixture) = &artifacts.fixture {
        section(&mut out, "fixture check");
        let _ = writeln!(out, "tolerance: {}", fixture.tolerance);
        let mut divergent = Vec::new();
        let mut unmatched = 0usize;
        for entry in &fixture.entries {
            let computed = universe.index_of(&entry.id).and_then(|i| {
                artifacts
                    .fuzzy_table
                    .membership(i, &entry.variable, &entry.term)
            });
            match computed {
                Some(mu) if (mu - entry.value).abs() > fixture.tolerance => {
                    divergent.push((entry, mu));
                }
                Some(_) => {}
                None => unmatched += 1,
            }
        }
        let _ = writeln!(
            out,
            "entries: {}  within: {}  divergent: {}  unmatched: {}",
            fixture.entries.len(),
            fixture.entries.len() - divergent.len() - unmatched,
            divergent.len(),
            unmatched
        );
        for (entry, mu) in divergent {
            let _ = writeln!(
                out,
                "  {} {}/{}: fixture {}  computed {:.4}",
                entry.id, entry.variable, entry.term, entry.value, mu
            );
        }
    }

    out
}

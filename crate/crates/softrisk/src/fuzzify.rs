//! Triangular membership functions and fuzzification of raw patient records.
//!
//! Each input variable is partitioned into overlapping linguistic terms
//! (child/young/old, low/medium/high), every term carrying a piecewise-linear
//! membership curve and the alpha-level grid used later for soft-set cuts.
//! Fuzzification turns a list of records into a table of membership values in
//! [0, 1], one per (patient, variable, term). All arithmetic stays in double
//! precision; display rounding happens only in report emission.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::softset::{check_grid, Alpha, Universe};

/// A trapezoid-capable triangular membership curve. Membership rises linearly
/// on `[left, apex_lo]`, is 1 on `[apex_lo, apex_hi]`, falls linearly on
/// `[apex_hi, right]`, and is 0 outside `[left, right]`. Pure triangles have
/// `apex_lo == apex_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTriangularMf", into = "RawTriangularMf")]
pub struct TriangularMf {
    left: f64,
    apex_lo: f64,
    apex_hi: f64,
    right: f64,
}

#[derive(Serialize, Deserialize)]
struct RawTriangularMf {
    left: f64,
    apex_lo: f64,
    apex_hi: f64,
    right: f64,
}

impl TryFrom<RawTriangularMf> for TriangularMf {
    type Error = Error;
    fn try_from(raw: RawTriangularMf) -> Result<Self> {
        TriangularMf::new(raw.left, raw.apex_lo, raw.apex_hi, raw.right)
    }
}

impl From<TriangularMf> for RawTriangularMf {
    fn from(mf: TriangularMf) -> Self {
        RawTriangularMf {
            left: mf.left,
            apex_lo: mf.apex_lo,
            apex_hi: mf.apex_hi,
            right: mf.right,
        }
    }
}

impl TriangularMf {
    pub fn new(left: f64, apex_lo: f64, apex_hi: f64, right: f64) -> Result<Self> {
        if ![left, apex_lo, apex_hi, right]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidMf("breakpoints must be finite".into()));
        }
        if !(left <= apex_lo && apex_lo <= apex_hi && apex_hi <= right) {
            return Err(Error::InvalidMf(format!(
                "breakpoints must satisfy left <= apex_lo <= apex_hi <= right, got ({left}, {apex_lo}, {apex_hi}, {right})"
            )));
        }
        Ok(TriangularMf {
            left,
            apex_lo,
            apex_hi,
            right,
        })
    }

    /// A pure triangle: single apex.
    pub fn triangle(left: f64, apex: f64, right: f64) -> Result<Self> {
        TriangularMf::new(left, apex, apex, right)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn apex_lo(&self) -> f64 {
        self.apex_lo
    }

    pub fn apex_hi(&self) -> f64 {
        self.apex_hi
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    /// Piecewise-linear membership of `x`. Breakpoints evaluate by the closed
    /// intervals of the defining formulas; adjacent pieces agree at shared
    /// endpoints, so the choice of branch there is immaterial.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!(
                "membership input must be finite, got {x}"
            )));
        }
        let mu = if x < self.left || x > self.right {
            0.0
        } else if x >= self.apex_lo && x <= self.apex_hi {
            1.0
        } else if x < self.apex_lo {
            (x - self.left) / (self.apex_lo - self.left)
        } else {
            (self.right - x) / (self.right - self.apex_hi)
        };
        debug_assert!((0.0..=1.0).contains(&mu));
        Ok(mu)
    }
}

/// One linguistic term of a variable: its name, membership curve, and the
/// alpha-level grid used when the term's fuzzy column is cut into a soft set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub mf: TriangularMf,
    pub levels: Vec<Alpha>,
}

/// A named input with its ordered terms, e.g. age partitioned into
/// child/young/old.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticVariable {
    pub name: String,
    pub unit: String,
    pub terms: Vec<Term>,
}

impl LinguisticVariable {
    /// Checks term-name uniqueness and per-term grid monotonicity.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for term in &self.terms {
            if !seen.insert(term.name.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "variable {} declares term {} twice",
                    self.name, term.name
                )));
            }
            check_grid(&self.name, &term.name, &term.levels)?;
        }
        Ok(())
    }

    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }

    /// Membership of `x` in every term, in declaration order. Overlapping
    /// terms may both be nonzero.
    pub fn memberships(&self, x: f64) -> Result<Vec<(String, f64)>> {
        self.terms
            .iter()
            .map(|t| Ok((t.name.clone(), t.mf.evaluate(x)?)))
            .collect()
    }
}

/// One raw patient row: id, per-variable values, optional ground-truth label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub values: BTreeMap<String, f64>,
    pub label: Option<bool>,
}

/// Per-patient, per-(variable, term) membership values over a fixed universe.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyTable {
    universe: Arc<Universe>,
    columns: Vec<VariableColumns>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableColumns {
    pub variable: String,
    pub terms: Vec<TermColumn>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermColumn {
    pub term: String,
    /// One membership per patient, in universe order.
    pub values: Vec<f64>,
}

/// Raw column input for [`FuzzyTable::from_columns`]: per variable, the
/// named term columns.
pub type RawColumns = Vec<(String, Vec<(String, Vec<f64>)>)>;

impl FuzzyTable {
    /// Builds a table from precomputed membership columns. Validates lengths
    /// and the [0, 1] range.
    pub fn from_columns(universe: Arc<Universe>, columns: RawColumns) -> Result<Self> {
        let n = universe.len();
        let mut out = Vec::with_capacity(columns.len());
        for (variable, terms) in columns {
            let mut term_cols = Vec::with_capacity(terms.len());
            for (term, values) in terms {
                if values.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "column {variable}/{term} has {} values for a universe of {n}",
                        values.len()
                    )));
                }
                if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(Error::InvalidInput(format!(
                        "column {variable}/{term} contains membership {bad} outside [0, 1]"
                    )));
                }
                term_cols.push(TermColumn { term, values });
            }
            out.push(VariableColumns {
                variable,
                terms: term_cols,
            });
        }
        Ok(FuzzyTable {
            universe,
            columns: out,
        })
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn variables(&self) -> &[VariableColumns] {
        &self.columns
    }

    pub fn column(&self, variable: &str, term: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.variable == variable)?
            .terms
            .iter()
            .find(|t| t.term == term)
            .map(|t| t.values.as_slice())
    }

    pub fn membership(&self, patient: usize, variable: &str, term: &str) -> Option<f64> {
        self.column(variable, term)?.get(patient).copied()
    }

    /// (patient index, variable) pairs whose memberships are zero in every
    /// term: the raw value fell outside all configured ranges. Reported, never
    /// rejected.
    pub fn out_of_range_flags(&self) -> Vec<(usize, String)> {
        let mut flags = Vec::new();
        for var in &self.columns {
            if var.terms.is_empty() {
                continue;
            }
            for patient in 0..self.universe.len() {
                if var.terms.iter().all(|t| t.values[patient] == 0.0) {
                    flags.push((patient, var.variable.clone()));
                }
            }
        }
        flags.sort();
        flags
    }
}

/// Fuzzifies records against a configuration. Pure: identical inputs produce
/// identical tables, universe order follows input order.
pub fn fuzzify_table(
    records: &[PatientRecord],
    config: &[LinguisticVariable],
) -> Result<FuzzyTable> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records to fuzzify".into()));
    }
    let universe = Arc::new(Universe::new(
        records.iter().map(|r| r.id.clone()).collect(),
    )?);
    let mut columns = Vec::with_capacity(config.len());
    for var in config {
        var.validate()?;
        let mut terms = Vec::with_capacity(var.terms.len());
        for term in &var.terms {
            let mut values = Vec::with_capacity(records.len());
            for record in records {
                let x =
                    record
                        .values
                        .get(&var.name)
                        .copied()
                        .ok_or_else(|| Error::ConfigMismatch {
                            record: record.id.clone(),
                            variable: var.name.clone(),
                        })?;
                values.push(term.mf.evaluate(x)?);
            }
            terms.push(TermColumn {
                term: term.name.clone(),
                values,
            });
        }
        columns.push(VariableColumns {
            variable: var.name.clone(),
            terms,
        });
    }
    Ok(FuzzyTable { universe, columns })
}

/// SHA-256 fingerprint of a variable configuration; embedded in every
/// artifact so downstream stages can reject mixed-configuration inputs.
pub fn config_digest(config: &[LinguisticVariable]) -> String {
    let bytes = serde_json::to_vec(config).expect("configuration is serializable");
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn grid(levels: &[f64]) -> Vec<Alpha> {
    levels
        .iter()
        .map(|&v| Alpha::new(v).expect("reference grid level"))
        .collect()
}

/// The reference dengue configuration: five variables, three terms each.
///
/// Grids are per term. The families whose parameter sets the reference
/// tabulation lists get them verbatim (child, low tlc, medium sgot, low
/// platelets, low bp, and their siblings where stated); young/old age carry
/// the extra 0.6 level and high sgot the extra 0.2 level that the published
/// example rules draw on.
pub fn default_dengue_config() -> Vec<LinguisticVariable> {
    let quarters = [0.25, 0.5, 0.75, 1.0];
    let quarters_with_0_6 = [0.25, 0.5, 0.6, 0.75, 1.0];
    let fifths = [0.2, 0.4, 0.6, 0.8, 1.0];
    let platelet_grid = [0.2, 0.55, 0.7, 0.85, 1.0];
    let sgot_high_grid = [0.2, 0.25, 0.5, 0.75, 1.0];

    let tri = |l, a, r| TriangularMf::triangle(l, a, r).expect("reference breakpoints");
    let term = |name: &str, mf: TriangularMf, levels: &[f64]| Term {
        name: name.to_string(),
        mf,
        levels: grid(levels),
    };

    vec![
        LinguisticVariable {
            name: "age".into(),
            unit: "years".into(),
            terms: vec![
                term("child", tri(2.0, 9.0, 16.0), &quarters),
                term("young", tri(15.0, 30.0, 45.0), &quarters_with_0_6),
                term("old", tri(44.0, 65.0, 90.0), &quarters_with_0_6),
            ],
        },
        LinguisticVariable {
            name: "tlc".into(),
            unit: "cells/uL".into(),
            terms: vec![
                term("low", tri(3500.0, 3750.0, 4000.0), &fifths),
                term("medium", tri(3900.0, 7450.0, 11000.0), &fifths),
                term("high", tri(10000.0, 12500.0, 15000.0), &fifths),
            ],
        },
        LinguisticVariable {
            name: "sgot".into(),
            unit: "U/L".into(),
            terms: vec![
                term("low", tri(10.0, 25.0, 40.0), &quarters),
                term("medium", tri(35.0, 42.0, 50.0), &quarters),
                term("high", tri(45.0, 50.0, 55.0), &sgot_high_grid),
            ],
        },
        LinguisticVariable {
            name: "platelets".into(),
            unit: "platelets/uL".into(),
            terms: vec![
                term("low", tri(3500.0, 80000.0, 150000.0), &platelet_grid),
                term("medium", tri(140000.0, 295000.0, 450000.0), &platelet_grid),
                term("high", tri(440000.0, 455000.0, 470000.0), &platelet_grid),
            ],
        },
        LinguisticVariable {
            name: "bp".into(),
            unit: "mmHg".into(),
            terms: vec![
                term("low", tri(120.0, 127.0, 134.0), &quarters),
                term("medium", tri(127.0, 144.0, 161.0), &quarters),
                term("high", tri(154.0, 163.0, 172.0), &quarters),
            ],
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(id: &str, pairs: &[(&str, f64)]) -> PatientRecord {
        PatientRecord {
            id: id.into(),
            values: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            label: None,
        }
    }

    fn var(config: &[LinguisticVariable], name: &str) -> LinguisticVariable {
        config.iter().find(|v| v.name == name).unwrap().clone()
    }

    #[test]
    fn child_curve_matches_reference_points() {
        let child = TriangularMf::triangle(2.0, 9.0, 16.0).unwrap();
        assert_eq!(child.evaluate(6.0).unwrap(), 4.0 / 7.0);
        assert_eq!(child.evaluate(9.0).unwrap(), 1.0);
        assert_eq!(child.evaluate(1.0).unwrap(), 0.0);
        assert_eq!(child.evaluate(16.0).unwrap(), 0.0);
    }

    #[test]
    fn young_is_zero_below_support() {
        let young = TriangularMf::triangle(15.0, 30.0, 45.0).unwrap();
        assert_eq!(young.evaluate(14.0).unwrap(), 0.0);
    }

    #[test]
    fn bp_low_reference_point() {
        let low = TriangularMf::triangle(120.0, 127.0, 134.0).unwrap();
        assert_eq!(low.evaluate(125.0).unwrap(), 5.0 / 7.0);
    }

    #[test]
    fn trapezoid_plateau_is_one() {
        let mf = TriangularMf::new(0.0, 2.0, 4.0, 6.0).unwrap();
        assert_eq!(mf.evaluate(2.0).unwrap(), 1.0);
        assert_eq!(mf.evaluate(3.0).unwrap(), 1.0);
        assert_eq!(mf.evaluate(4.0).unwrap(), 1.0);
        assert_eq!(mf.evaluate(1.0).unwrap(), 0.5);
        assert_eq!(mf.evaluate(5.0).unwrap(), 0.5);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mf = TriangularMf::triangle(0.0, 1.0, 2.0).unwrap();
        assert!(mf.evaluate(f64::NAN).is_err());
        assert!(mf.evaluate(f64::INFINITY).is_err());
    }

    #[test]
    fn disordered_breakpoints_are_rejected() {
        assert!(TriangularMf::new(5.0, 1.0, 1.0, 9.0).is_err());
        assert!(TriangularMf::new(0.0, 1.0, 0.5, 9.0).is_err());
        assert!(TriangularMf::new(0.0, f64::NAN, 1.0, 2.0).is_err());
    }

    #[test]
    fn sgot_memberships_at_46() {
        let config = default_dengue_config();
        let sgot = var(&config, "sgot");
        let m = sgot.memberships(46.0).unwrap();
        assert_eq!(m[0], ("low".to_string(), 0.0));
        assert_eq!(m[1], ("medium".to_string(), 0.5));
        assert_eq!(m[2], ("high".to_string(), 0.2));
    }

    #[test]
    fn tlc_memberships_at_3650() {
        let config = default_dengue_config();
        let tlc = var(&config, "tlc");
        let m = tlc.memberships(3650.0).unwrap();
        assert_eq!(m[0].1, 0.6);
        assert_eq!(m[1].1, 0.0);
        assert_eq!(m[2].1, 0.0);
    }

    #[test]
    fn age_beyond_all_ranges_is_all_zero() {
        let config = default_dengue_config();
        let age = var(&config, "age");
        for (_, mu) in age.memberships(100.0).unwrap() {
            assert_eq!(mu, 0.0);
        }
    }

    #[test]
    fn sgot_medium_is_asymmetric() {
        let config = default_dengue_config();
        let medium = var(&config, "sgot").term("medium").unwrap().mf;
        // rising run of 7, falling run of 8
        assert_eq!(medium.apex_lo() - medium.left(), 7.0);
        assert_eq!(medium.right() - medium.apex_hi(), 8.0);
    }

    #[test]
    fn platelet_low_divisors() {
        let config = default_dengue_config();
        let low = var(&config, "platelets").term("low").unwrap().mf;
        assert_eq!(low.apex_lo() - low.left(), 76500.0);
        assert_eq!(low.right() - low.apex_hi(), 70000.0);
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = default_dengue_config();
        let json = serde_json::to_string(&config).unwrap();
        let back: Vec<LinguisticVariable> = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
        assert_eq!(config_digest(&config), config_digest(&back));
    }

    #[test]
    fn invalid_mf_in_json_is_rejected() {
        let json = r#"{"left": 5.0, "apex_lo": 1.0, "apex_hi": 1.0, "right": 9.0}"#;
        assert!(serde_json::from_str::<TriangularMf>(json).is_err());
    }

    #[test]
    fn fuzzify_reference_single_record() {
        let config = default_dengue_config();
        let records = vec![record(
            "v_16",
            &[
                ("age", 38.0),
                ("tlc", 12000.0),
                ("sgot", 27.0),
                ("platelets", 350000.0),
                ("bp", 124.0),
            ],
        )];
        let table = fuzzify_table(&records, &config).unwrap();
        assert_eq!(table.membership(0, "sgot", "low").unwrap(), 13.0 / 15.0);
        assert_eq!(table.membership(0, "tlc", "high").unwrap(), 0.8);
    }

    #[test]
    fn fuzzify_missing_variable_names_record_and_variable() {
        let config = default_dengue_config();
        let records = vec![record("v_9", &[("age", 55.0)])];
        match fuzzify_table(&records, &config).unwrap_err() {
            Error::ConfigMismatch { record, variable } => {
                assert_eq!(record, "v_9");
                assert_eq!(variable, "tlc");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn fuzzify_empty_config_keeps_universe_only() {
        let records = vec![record("v_1", &[("age", 6.0)])];
        let table = fuzzify_table(&records, &[]).unwrap();
        assert_eq!(table.universe().ids(), ["v_1"]);
        assert!(table.variables().is_empty());
    }

    #[test]
    fn fuzzify_rejects_empty_record_list() {
        assert!(fuzzify_table(&[], &default_dengue_config()).is_err());
    }

    #[test]
    fn fuzzify_is_deterministic() {
        let config = default_dengue_config();
        let records = vec![
            record(
                "v_1",
                &[
                    ("age", 6.0),
                    ("tlc", 3600.0),
                    ("sgot", 46.0),
                    ("platelets", 50000.0),
                    ("bp", 125.0),
                ],
            ),
            record(
                "v_2",
                &[
                    ("age", 75.0),
                    ("tlc", 3650.0),
                    ("sgot", 51.0),
                    ("platelets", 45000.0),
                    ("bp", 126.0),
                ],
            ),
        ];
        assert_eq!(
            fuzzify_table(&records, &config).unwrap(),
            fuzzify_table(&records, &config).unwrap()
        );
    }

    #[test]
    fn out_of_range_rows_are_flagged_not_rejected() {
        let config = default_dengue_config();
        let records = vec![record(
            "v_x",
            &[
                ("age", 95.0),
                ("tlc", 3600.0),
                ("sgot", 46.0),
                ("platelets", 50000.0),
                ("bp", 125.0),
            ],
        )];
        let table = fuzzify_table(&records, &config).unwrap();
        assert_eq!(table.out_of_range_flags(), vec![(0, "age".to_string())]);
    }

    proptest! {
        #[test]
        fn membership_stays_in_unit_interval(
            left in -100.0..100.0f64,
            rise in 0.0..200.0f64,
            plateau in 0.0..50.0f64,
            fall in 0.0..200.0f64,
            x in -500.0..500.0f64,
        ) {
            let mf = TriangularMf::new(left, left + rise, left + rise + plateau, left + rise + plateau + fall).unwrap();
            let mu = mf.evaluate(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&mu));
        }

        #[test]
        fn rising_segment_is_linear(
            left in -100.0..100.0f64,
            rise in 0.5..200.0f64,
            k in 0usize..=1024,
        ) {
            let mf = TriangularMf::triangle(left, left + rise, left + rise + 1.0).unwrap();
            let t = k as f64 / 1024.0;
            let x = left + t * rise;
            let mu = mf.evaluate(x).unwrap();
            prop_assert!((mu - t).abs() <= 1e-12, "mu={mu} t={t}");
        }

        #[test]
        fn monotone_on_rising_and_falling_segments(
            left in -50.0..50.0f64,
            rise in 0.5..100.0f64,
            fall in 0.5..100.0f64,
            a in 0.0..1.0f64,
            b in 0.0..1.0f64,
        ) {
            let apex = left + rise;
            let right = apex + fall;
            let mf = TriangularMf::triangle(left, apex, right).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            // rising
            let mu_lo = mf.evaluate(left + lo * rise).unwrap();
            let mu_hi = mf.evaluate(left + hi * rise).unwrap();
            prop_assert!(mu_lo <= mu_hi);
            // falling
            let mu_lo = mf.evaluate(apex + lo * fall).unwrap();
            let mu_hi = mf.evaluate(apex + hi * fall).unwrap();
            prop_assert!(mu_lo >= mu_hi);
            // outside support
            prop_assert_eq!(mf.evaluate(left - 1.0).unwrap(), 0.0);
            prop_assert_eq!(mf.evaluate(right + 1.0).unwrap(), 0.0);
        }
    }
}

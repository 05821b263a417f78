//! Soft-set decision support for tabular clinical data.
//!
//! The engine fuzzifies raw records with triangular membership functions,
//! cuts the fuzzy columns into soft sets at configured alpha levels, drops
//! trivial parameters, enumerates conjunctive rules via the soft-set AND
//! operation, and scores each rule's risk percentage from labeled data. The
//! shipped reference corpus is a 30-patient dengue screening dataset.
//!
//! All values are immutable after construction and every operation is a pure
//! function, so concurrent read-only use is safe throughout.

pub mod error;
pub mod fuzzify;
pub mod pipeline;
pub mod rules;
pub mod softset;

pub use error::{Error, Result};
pub use fuzzify::{
    config_digest, default_dengue_config, fuzzify_table, FuzzyTable, LinguisticVariable,
    PatientRecord, Term, TriangularMf,
};
pub use pipeline::{
    emit_report, load_dataset, load_labels, run_pipeline, DatasetConfig, MembershipFixture,
    PipelineOptions, RunArtifacts,
};
pub use rules::{
    classify_corpus, diagnose, diagnose_corpus, enumerate_rules, score_rules, Conjunct, Diagnosis,
    EnumeratedRules, RiskModel, Rule, ScoredRule, VariableSets,
};
pub use softset::{
    alpha_cut, and_op, merge_duplicate_levels, or_op, reduce_trivial, Alpha, MemberSet,
    ProductSoftSet, SetOp, SoftSet, SourceTag, Universe,
};

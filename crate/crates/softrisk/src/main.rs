//! Command-line front end: runs the pipeline end to end or stage by stage
//! against a shared artifact directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use softrisk::error::{Error, Result};
use softrisk::fuzzify::{fuzzify_table, PatientRecord};
use softrisk::pipeline::{
    self, emit_report, load_config, load_dataset, load_fixture, load_fuzzy_table, load_labels,
    load_risk_model, load_rules, load_soft_sets, resolve_labels, run_pipeline, save_config,
    DatasetConfig, PipelineOptions, RunArtifacts,
};
use softrisk::rules::{diagnose, enumerate_rules, score_rules, VariableSets};
use softrisk::softset::{alpha_cut, merge_duplicate_levels, reduce_trivial, SoftSet};

#[derive(Parser)]
#[command(
    name = "softrisk",
    about = "Soft-set risk scoring for tabular clinical records",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Artifact directory shared by all stages
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run all stages: fuzzify, soft sets, reduce, rules, score, report
    Run {
        #[command(flatten)]
        out: OutDir,
        /// Dataset CSV (header: id,<variable...>[,label])
        #[arg(long)]
        data: PathBuf,
        /// Configuration JSON
        #[arg(long)]
        config: PathBuf,
        /// Label CSV (header: id,label); falls back to the dataset's label column
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Classification threshold in percent
        #[arg(long, default_value_t = 50.0)]
        threshold: f64,
        /// Collapse alpha levels with identical member sets
        #[arg(long)]
        merge_duplicate_levels: bool,
        /// Membership fixture JSON to compare the run against in the report
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Fuzzify a dataset into a membership table
    Fuzzify {
        #[command(flatten)]
        out: OutDir,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Cut the persisted fuzzy table into soft sets
    Softsets {
        #[command(flatten)]
        out: OutDir,
    },
    /// Drop trivial (empty or full-universe) soft-set levels
    Reduce {
        #[command(flatten)]
        out: OutDir,
        #[arg(long)]
        merge_duplicate_levels: bool,
    },
    /// Enumerate conjunctive rules from the reduced soft sets
    Rules {
        #[command(flatten)]
        out: OutDir,
    },
    /// Score the persisted rules against labels
    Score {
        #[command(flatten)]
        out: OutDir,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Regenerate the report from persisted artifacts
    Report {
        #[command(flatten)]
        out: OutDir,
        #[arg(long, default_value_t = 50.0)]
        threshold: f64,
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Diagnose records against the persisted risk model
    #[command(group(ArgGroup::new("input").required(true).args(["set", "data"])))]
    Diagnose {
        #[command(flatten)]
        out: OutDir,
        /// Inline value, e.g. --set age=6 (repeatable)
        #[arg(long, value_name = "VAR=VALUE")]
        set: Vec<String>,
        /// Row-format CSV of records to diagnose
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            out,
            data,
            config,
            labels,
            threshold,
            merge_duplicate_levels,
            fixture,
        } => cmd_run(
            &out.out,
            &data,
            &config,
            labels.as_deref(),
            threshold,
            merge_duplicate_levels,
            fixture.as_deref(),
        ),
        Command::Fuzzify { out, data, config } => cmd_fuzzify(&out.out, &data, &config),
        Command::Softsets { out } => cmd_softsets(&out.out),
        Command::Reduce {
            out,
            merge_duplicate_levels,
        } => cmd_reduce(&out.out, merge_duplicate_levels),
        Command::Rules { out } => cmd_rules(&out.out),
        Command::Score { out, labels } => cmd_score(&out.out, &labels),
        Command::Report {
            out,
            threshold,
            fixture,
        } => cmd_report(&out.out, threshold, fixture.as_deref()),
        Command::Diagnose { out, set, data } => cmd_diagnose(&out.out, &set, data.as_deref()),
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!(
            "threshold {threshold} is outside [0, 100]"
        )));
    }
    Ok(())
}

fn cmd_run(
    out: &Path,
    data: &Path,
    config_path: &Path,
    labels_path: Option<&Path>,
    threshold: f64,
    merge: bool,
    fixture_path: Option<&Path>,
) -> Result<()> {
    check_threshold(threshold)?;
    let config = load_config(config_path)?;
    let records = load_dataset(data, config.label_column.as_deref())?;
    let explicit = labels_path.map(load_labels).transpose()?;
    let labels = resolve_labels(&records, explicit);
    if labels.is_none() {
        eprintln!("note: no labels provided; scoring stage will be skipped");
    }
    let options = PipelineOptions {
        merge_duplicate_levels: merge,
        threshold,
        fixture: fixture_path.map(load_fixture).transpose()?,
    };
    let artifacts = run_pipeline(&records, &config, labels.as_ref(), &options)?;
    artifacts.persist(out)?;
    print!("{}", artifacts.report);
    Ok(())
}

fn cmd_fuzzify(out: &Path, data: &Path, config_path: &Path) -> Result<()> {
    let config = load_config(config_path)?;
    let records = load_dataset(data, config.label_column.as_deref())?;
    let table = fuzzify_table(&records, &config.variables).map_err(Error::stage("fuzzify"))?;
    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    save_config(&out.join(pipeline::CONFIG_FILE), &config)?;
    softrisk::pipeline::write_fuzzy_table(out, &config.digest(), &table)?;
    eprintln!("wrote {}", out.join(pipeline::FUZZY_TABLE_FILE).display());
    Ok(())
}

fn load_stage_config(out: &Path) -> Result<DatasetConfig> {
    let path = out.join(pipeline::CONFIG_FILE);
    if !path.exists() {
        return Err(Error::InvalidInput(format!(
            "{} not found; run `softrisk fuzzify` or `softrisk run` first",
            path.display()
        )));
    }
    load_config(&path)
}

fn cmd_softsets(out: &Path) -> Result<()> {
    let config = load_stage_config(out)?;
    let digest = config.digest();
    let table = load_fuzzy_table(&out.join(pipeline::FUZZY_TABLE_FILE), Some(&digest))?;
    let mut sets = Vec::new();
    for var in &config.variables {
        for term in &var.terms {
            sets.push(
                alpha_cut(&table, &var.name, &term.name, &term.levels)
                    .map_err(Error::stage("softsets"))?,
            );
        }
    }
    softrisk::pipeline::write_soft_sets(out, pipeline::SOFT_SETS_FILE, &digest, &sets)?;
    eprintln!("wrote {}", out.join(pipeline::SOFT_SETS_FILE).display());
    Ok(())
}

fn cmd_reduce(out: &Path, merge: bool) -> Result<()> {
    let config = load_stage_config(out)?;
    let digest = config.digest();
    let sets = load_soft_sets(&out.join(pipeline::SOFT_SETS_FILE), Some(&digest))?;
    let reduced: Vec<SoftSet> = sets
        .iter()
        .map(|s| {
            let r = reduce_trivial(s);
            if merge {
                merge_duplicate_levels(&r)
            } else {
                r
            }
        })
        .collect();
    softrisk::pipeline::write_soft_sets(out, pipeline::REDUCED_SOFT_SETS_FILE, &digest, &reduced)?;
    eprintln!(
        "wrote {}",
        out.join(pipeline::REDUCED_SOFT_SETS_FILE).display()
    );
    Ok(())
}

fn cmd_rules(out: &Path) -> Result<()> {
    let config = load_stage_config(out)?;
    let digest = config.digest();
    let reduced = load_soft_sets(&out.join(pipeline::REDUCED_SOFT_SETS_FILE), Some(&digest))?;
    let groups: Vec<VariableSets> = config
        .variables
        .iter()
        .map(|var| VariableSets {
            variable: var.name.clone(),
            sets: reduced
                .iter()
                .filter(|s| s.source().variable == var.name)
                .cloned()
                .collect(),
        })
        .collect();
    let enumerated = enumerate_rules(&groups).map_err(Error::stage("rules"))?;
    let universe = reduced
        .first()
        .map(|s| s.universe().clone())
        .ok_or_else(|| Error::InvalidInput("no soft sets to enumerate over".into()))?;
    softrisk::pipeline::write_rules(out, &digest, &universe, &enumerated)?;
    eprintln!("wrote {}", out.join(pipeline::RULES_FILE).display());
    Ok(())
}

fn cmd_score(out: &Path, labels_path: &Path) -> Result<()> {
    let config = load_stage_config(out)?;
    let digest = config.digest();
    let (universe, enumerated) = load_rules(&out.join(pipeline::RULES_FILE), Some(&digest))?;
    let labels = load_labels(labels_path)?;
    let model =
        score_rules(&enumerated, &universe, &labels, digest).map_err(Error::stage("score"))?;
    softrisk::pipeline::write_risk_model(out, &model)?;
    eprintln!("wrote {}", out.join(pipeline::RISK_MODEL_FILE).display());
    Ok(())
}

fn cmd_report(out: &Path, threshold: f64, fixture_path: Option<&Path>) -> Result<()> {
    check_threshold(threshold)?;
    let config = load_stage_config(out)?;
    let digest = config.digest();
    let fuzzy_table = load_fuzzy_table(&out.join(pipeline::FUZZY_TABLE_FILE), Some(&digest))?;
    let soft_sets = load_soft_sets(&out.join(pipeline::SOFT_SETS_FILE), Some(&digest))?;
    let reduced_soft_sets =
        load_soft_sets(&out.join(pipeline::REDUCED_SOFT_SETS_FILE), Some(&digest))?;
    let (_, enumerated) = load_rules(&out.join(pipeline::RULES_FILE), Some(&digest))?;
    let model_path = out.join(pipeline::RISK_MODEL_FILE);
    let risk_model = if model_path.exists() {
        Some(load_risk_model(&model_path, Some(&digest))?)
    } else {
        None
    };
    let artifacts = RunArtifacts {
        config,
        config_digest: digest,
        fuzzy_table,
        soft_sets,
        reduced_soft_sets,
        enumerated,
        risk_model,
        threshold,
        fixture: fixture_path.map(load_fixture).transpose()?,
        report: String::new(),
    };
    let report = emit_report(&artifacts);
    let path = out.join(pipeline::REPORT_FILE);
    std::fs::write(&path, &report).map_err(Error::io(&path))?;
    print!("{report}");
    Ok(())
}

fn parse_set_flags(flags: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut values = BTreeMap::new();
    for flag in flags {
        let (name, raw) = flag
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("--set expects VAR=VALUE, got {flag:?}")))?;
        let value: f64 = raw.trim().parse().map_err(|_| {
            Error::InvalidInput(format!("--set {name}: expected a number, got {raw:?}"))
        })?;
        values.insert(name.trim().to_string(), value);
    }
    Ok(values)
}

fn cmd_diagnose(out: &Path, set: &[String], data: Option<&Path>) -> Result<()> {
    let config = load_stage_config(out)?;
    let digest = config.digest();
    let model = load_risk_model(&out.join(pipeline::RISK_MODEL_FILE), Some(&digest))?;
    let records: Vec<PatientRecord> = match data {
        Some(path) => load_dataset(path, config.label_column.as_deref())?,
        None => vec![PatientRecord {
            id: "query".into(),
            values: parse_set_flags(set)?,
            label: None,
        }],
    };
    for record in &records {
        let diagnosis = diagnose(&model, record, &config.variables)?;
        match diagnosis.risk {
            Some(risk) => {
                let ids: Vec<String> = diagnosis.matched_rules.iter().map(u64::to_string).collect();
                println!(
                    "{}  risk={:.1}  rules={}",
                    diagnosis.record_id,
                    risk,
                    ids.join(",")
                );
            }
            None => println!("{}  no-match", diagnosis.record_id),
        }
    }
    Ok(())
}

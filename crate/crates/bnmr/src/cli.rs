//! Command-line harness: flat key=value config parsing, the five
//! subcommands (gen-data, bn-learn, train, audit, phi) and multi-seed
//! report/aggregate emission. Every subcommand is deterministic given its
//! config and produces byte-identical outputs on repeat runs.

use crate::bayesnet::{self, BayesianNetwork, Cpt, DagStructure};
use crate::data::{
    self, dataset_from_csv, dataset_to_csv, BiasRule, Dataset, FeatureRule, LabelRule,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::fairmetrics::{self, FairnessReport};
use crate::trainer::{self, Ablations, Mode, TrainConfig};
use clap::{Parser, Subcommand};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "bnmr",
    about = "Fairness-aware classifier training with Bayesian-network-informed meta reweighting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic biased dataset from a spec file.
    GenData {
        /// Synthetic spec file (key=value format).
        #[arg(long)]
        spec: PathBuf,
        /// Number of rows.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; writes data.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a calibration network from a dataset's attribute columns.
    BnLearn {
        /// Dataset CSV (as written by gen-data).
        #[arg(long)]
        data: PathBuf,
        /// Output directory; writes bn.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train per seed per mode and write reports plus an aggregate.
    Train {
        /// Experiment config file (key=value format).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated seed list overriding the config.
        #[arg(long)]
        seed: Option<String>,
    },
    /// Audit stored predictions against a dataset.
    Audit {
        /// Dataset CSV (as written by gen-data).
        #[arg(long)]
        data: PathBuf,
        /// One binary prediction per line, same row order as the dataset.
        #[arg(long)]
        predictions: PathBuf,
        /// Attribute column to report separately and hold out of the means.
        #[arg(long)]
        demographic: Option<String>,
        /// Output directory; writes audit.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairwise phi coefficients between annotation columns.
    Phi {
        /// Annotation file (count line, header, then id and +/-1 tokens).
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated column names.
        #[arg(long)]
        columns: String,
        /// Output directory; writes phi.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { spec, n, seed, out } => cmd_gen_data(&spec, n, seed, &out),
        Command::BnLearn { data, out } => cmd_bn_learn(&data, &out),
        Command::Train { config, out, seed } => cmd_train(&config, &out, seed.as_deref()),
        Command::Audit { data, predictions, demographic, out } => {
            cmd_audit(&data, &predictions, demographic.as_deref(), &out)
        }
        Command::Phi { data, columns, out } => cmd_phi(&data, &columns, &out),
    }
}

// ---------------------------------------------------------------- key=value

/// Flat key=value document: one pair per line, '#' comments, blank lines
/// ignored, duplicate keys rejected.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or(Error::Parse {
            line,
            message: format!("expected key=value, got '{trimmed}'"),
        })?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
    }
    Ok(map)
}

fn require<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Config(format!("missing key '{key}'")))
}

fn parse_scalar<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

fn get_scalar<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    parse_scalar(require(map, key)?, key)
}

fn get_scalar_or<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    match map.get(key) {
        Some(v) => parse_scalar(v, key),
        None => Ok(default),
    }
}

fn get_list<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Vec<T>> {
    require(map, key)?
        .split_whitespace()
        .map(|tok| parse_scalar(tok, key))
        .collect()
}

/// Resolve a path value relative to the directory of the config file.
fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        p
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

// ------------------------------------------------------------ synthetic spec

/// Parse a synthetic dataset spec. Keys: target, nodes, parents.<node>,
/// cpt.<node>, label.bias, label.coefs, label.noise_scale, feature.dim,
/// feature.shift.<node>, feature.sigma, and optionally bias.attribute,
/// bias.flip_pos, bias.flip_neg.
pub fn parse_synthetic_spec(text: &str) -> Result<SyntheticSpec> {
    let map = parse_kv(text)?;
    let node_names: Vec<String> = get_list(&map, "nodes")?;
    let name_of = |i: usize| node_names[i].clone();
    let index_of = |name: &str| -> Result<usize> {
        node_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("unknown node '{name}'")))
    };
    let mut parents = Vec::with_capacity(node_names.len());
    for i in 0..node_names.len() {
        let key = format!("parents.{}", name_of(i));
        let ps = match map.get(&key) {
            Some(v) => v
                .split_whitespace()
                .map(index_of)
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        parents.push(ps);
    }
    let structure = DagStructure::new(node_names.clone(), parents.clone())?;
    let mut cpts = Vec::with_capacity(node_names.len());
    for i in 0..node_names.len() {
        let table: Vec<f64> = get_list(&map, &format!("cpt.{}", name_of(i)))?;
        cpts.push(Cpt {
            node: i,
            parent_order: parents[i].clone(),
            table,
            unobserved_configs: Vec::new(),
        });
    }
    let attribute_bn = BayesianNetwork::new(structure, cpts)?;

    let label_rule = LabelRule {
        bias: get_scalar(&map, "label.bias")?,
        coefs: get_list(&map, "label.coefs")?,
        noise_scale: get_scalar(&map, "label.noise_scale")?,
    };
    let dim = get_scalar(&map, "feature.dim")?;
    let mut shifts = Vec::with_capacity(node_names.len());
    for i in 0..node_names.len() {
        shifts.push(get_list(&map, &format!("feature.shift.{}", name_of(i)))?);
    }
    let feature_rule = FeatureRule {
        dim,
        shifts,
        sigma: get_scalar(&map, "feature.sigma")?,
    };
    let bias_rule = match map.get("bias.attribute") {
        Some(name) => {
            let pair = |key: &str| -> Result<[f64; 2]> {
                let v: Vec<f64> = get_list(&map, key)?;
                if v.len() != 2 {
                    return Err(Error::Config(format!("'{key}' needs exactly 2 values")));
                }
                Ok([v[0], v[1]])
            };
            Some(BiasRule {
                attribute: index_of(name)?,
                flip_pos: pair("bias.flip_pos")?,
                flip_neg: pair("bias.flip_neg")?,
            })
        }
        None => None,
    };
    let spec = SyntheticSpec {
        attribute_bn,
        label_rule,
        feature_rule,
        bias_rule,
        target_name: require(&map, "target")?.to_string(),
    };
    spec.validate()?;
    Ok(spec)
}

// -------------------------------------------------------------- experiment

/// A named training variant: base mode plus ablation switches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSpec {
    pub name: String,
    pub mode: Mode,
    pub ablations: Ablations,
}

pub fn parse_mode(token: &str) -> Result<ModeSpec> {
    let (mode, ablations) = match token {
        "vanilla" => (Mode::Vanilla, Ablations::default()),
        "random" => (Mode::Random, Ablations::default()),
        "bnmr" => (Mode::Bnmr, Ablations::default()),
        "bnmr_no_normalization" => (
            Mode::Bnmr,
            Ablations { no_normalization: true, ..Default::default() },
        ),
        "bnmr_no_online_update" => (
            Mode::Bnmr,
            Ablations { no_online_update: true, ..Default::default() },
        ),
        "bnmr_no_calibration" => (
            Mode::Bnmr,
            Ablations { no_calibration: true, ..Default::default() },
        ),
        "bnmr_no_reweighting" => (
            Mode::Bnmr,
            Ablations { no_reweighting: true, ..Default::default() },
        ),
        other => return Err(Error::Config(format!("unknown mode '{other}'"))),
    };
    Ok(ModeSpec { name: token.to_string(), mode, ablations })
}

#[derive(Debug, Clone)]
pub enum DataSource {
    Synthetic {
        spec: PathBuf,
        rows: usize,
        gen_seed: u64,
        split: (f64, f64, f64),
        split_seed: u64,
    },
    AttributeCsv {
        file: PathBuf,
        partition: PathBuf,
        target: String,
        attributes: Vec<String>,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub modes: Vec<ModeSpec>,
    pub seeds: Vec<u64>,
    pub data: DataSource,
}

pub fn parse_experiment(text: &str, config_path: &Path) -> Result<ExperimentConfig> {
    let map = parse_kv(text)?;
    let defaults = TrainConfig::default();
    let train = TrainConfig {
        batch_size: get_scalar_or(&map, "train.batch_size", defaults.batch_size)?,
        learning_rate: get_scalar_or(&map, "train.learning_rate", defaults.learning_rate)?,
        meta_learning_rate: get_scalar_or(
            &map,
            "train.meta_learning_rate",
            defaults.meta_learning_rate,
        )?,
        tau: get_scalar_or(&map, "train.tau", defaults.tau)?,
        bn_update_interval: get_scalar_or(
            &map,
            "train.bn_update_interval",
            defaults.bn_update_interval,
        )?,
        bn_prior_strength: get_scalar_or(
            &map,
            "train.bn_prior_strength",
            defaults.bn_prior_strength,
        )?,
        fairness_val_size: get_scalar_or(
            &map,
            "train.fairness_val_size",
            defaults.fairness_val_size,
        )?,
        epochs: get_scalar_or(&map, "train.epochs", defaults.epochs)?,
        hidden_dims: match map.get("train.hidden_dims") {
            Some(_) => get_list(&map, "train.hidden_dims")?,
            None => defaults.hidden_dims.clone(),
        },
        norm: match map.get("train.norm") {
            Some(v) => v.parse()?,
            None => defaults.norm,
        },
        mode: Mode::Bnmr, // overwritten per run
        ablations: Ablations::default(),
        resample_micro_sets: get_scalar_or(&map, "train.resample_micro_sets", false)?,
        seed: 0, // overwritten per run
    };
    let modes = require(&map, "train.modes")?
        .split_whitespace()
        .map(parse_mode)
        .collect::<Result<Vec<_>>>()?;
    if modes.is_empty() {
        return Err(Error::Config("'train.modes' must list at least one mode".into()));
    }
    let seeds: Vec<u64> = get_list(&map, "train.seeds")?;
    if seeds.is_empty() {
        return Err(Error::Config("'train.seeds' must list at least one seed".into()));
    }
    let data = match require(&map, "data.source")? {
        "synthetic" => {
            let split: Vec<f64> = get_list(&map, "data.split")?;
            if split.len() != 3 {
                return Err(Error::Config("'data.split' needs exactly 3 ratios".into()));
            }
            DataSource::Synthetic {
                spec: resolve(config_path, require(&map, "data.spec")?),
                rows: get_scalar(&map, "data.rows")?,
                gen_seed: get_scalar_or(&map, "data.gen_seed", 0)?,
                split: (split[0], split[1], split[2]),
                split_seed: get_scalar_or(&map, "data.split_seed", 0)?,
            }
        }
        "attribute_csv" => DataSource::AttributeCsv {
            file: resolve(config_path, require(&map, "data.file")?),
            partition: resolve(config_path, require(&map, "data.partition")?),
            target: require(&map, "data.target")?.to_string(),
            attributes: get_list(&map, "data.attributes")?,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown data.source '{other}' (expected synthetic or attribute_csv)"
            )))
        }
    };
    Ok(ExperimentConfig { train, modes, seeds, data })
}

pub fn load_experiment_data(source: &DataSource) -> Result<(Dataset, Dataset, Dataset)> {
    match source {
        DataSource::Synthetic { spec, rows, gen_seed, split, split_seed } => {
            let text = std::fs::read_to_string(spec)
                .map_err(|e| Error::io(spec.display().to_string(), e))?;
            let spec = parse_synthetic_spec(&text)?;
            let dataset = data::generate_synthetic(&spec, *rows, *gen_seed)?;
            data::split_by_ratio(&dataset, *split, *split_seed)
        }
        DataSource::AttributeCsv { file, partition, target, attributes } => {
            let dataset = data::load_attribute_csv(file, target, attributes)?;
            let text = std::fs::read_to_string(partition)
                .map_err(|e| Error::io(partition.display().to_string(), e))?;
            data::split_by_partition(&dataset, &text)
        }
    }
}

// -------------------------------------------------------------- subcommands

fn write_out(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn cmd_gen_data(spec_path: &Path, n: usize, seed: u64, out: &Path) -> Result<()> {
    let spec = parse_synthetic_spec(&read_file(spec_path)?)?;
    let dataset = data::generate_synthetic(&spec, n, seed)?;
    write_out(out, "data.csv", &dataset_to_csv(&dataset))
}

pub fn cmd_bn_learn(data_path: &Path, out: &Path) -> Result<()> {
    let dataset = dataset_from_csv(&read_file(data_path)?)?;
    let bn = trainer::fit_calibration_network(&dataset)?;
    write_out(out, "bn.txt", &bayesnet::to_text(&bn))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn cmd_train(config_path: &Path, out: &Path, seed_override: Option<&str>) -> Result<()> {
    let mut experiment = parse_experiment(&read_file(config_path)?, config_path)?;
    if let Some(list) = seed_override {
        experiment.seeds = list
            .split(',')
            .map(|tok| parse_scalar(tok.trim(), "--seed"))
            .collect::<Result<Vec<_>>>()?;
    }
    let (train_set, val_set, test_set) = load_experiment_data(&experiment.data)?;
    let mut aggregate = String::new();
    for mode_spec in &experiment.modes {
        let mut accs = Vec::new();
        let mut tprds = Vec::new();
        let mut digs = Vec::new();
        for &seed in &experiment.seeds {
            let cfg = TrainConfig {
                mode: mode_spec.mode,
                ablations: mode_spec.ablations,
                seed,
                ..experiment.train.clone()
            };
            let outcome = trainer::train(&cfg, &train_set, &val_set, &test_set).map_err(|e| {
                Error::Config(format!("run mode={} seed={seed}: {e}", mode_spec.name))
            })?;
            write_out(
                out,
                &format!("report_{}_{seed}.txt", mode_spec.name),
                &outcome.report.to_text(),
            )?;
            write_out(
                out,
                &format!("history_{}_{seed}.csv", mode_spec.name),
                &trainer::history_to_csv(&outcome.history),
            )?;
            accs.push(outcome.report.accuracy);
            tprds.push(outcome.report.mean_tprd());
            digs.push(outcome.report.mean_dig());
        }
        for (metric, values) in
            [("accuracy", &accs), ("mean_tprd", &tprds), ("mean_dig", &digs)]
        {
            let (mean, std) = mean_std(values);
            writeln!(aggregate, "{}.{metric}.mean={mean}", mode_spec.name).unwrap();
            writeln!(aggregate, "{}.{metric}.std={std}", mode_spec.name).unwrap();
        }
    }
    write_out(out, "aggregate.txt", &aggregate)
}

pub fn cmd_audit(
    data_path: &Path,
    predictions_path: &Path,
    demographic: Option<&str>,
    out: &Path,
) -> Result<()> {
    let dataset = dataset_from_csv(&read_file(data_path)?)?;
    let text = read_file(predictions_path)?;
    let predictions: Vec<u8> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| match l.trim() {
            "0" => Ok(0u8),
            "1" => Ok(1u8),
            other => Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 0 or 1, got '{other}'"),
            }),
        })
        .collect::<Result<_>>()?;
    if predictions.len() != dataset.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} dataset rows",
            predictions.len(),
            dataset.len()
        )));
    }
    let mut notes = Vec::new();
    // split attributes into the audited set and the held-out demographic
    let demo_index = match demographic {
        Some(name) => {
            let found = dataset.attribute_index(name);
            if found.is_none() {
                notes.push(format!(
                    "demographic column '{name}' not in dataset; section omitted"
                ));
            }
            found
        }
        None => None,
    };
    let (audit_names, audit_cols): (Vec<String>, Vec<usize>) = dataset
        .attribute_names
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != demo_index)
        .map(|(i, n)| (n.clone(), i))
        .unzip();
    let audit_attrs: Vec<Vec<u8>> = dataset
        .attrs
        .iter()
        .map(|row| audit_cols.iter().map(|&c| row[c]).collect())
        .collect();
    let tprd = fairmetrics::tprd(&predictions, &dataset.labels, &audit_attrs, &audit_names)?;
    let dig = fairmetrics::dig(&predictions, &dataset.labels, &audit_attrs, &audit_names)?;
    let demographic_section = match demo_index {
        Some(c) => {
            let col: Vec<u8> = dataset.attrs.iter().map(|r| r[c]).collect();
            Some(fairmetrics::demographic_report(&predictions, &dataset.labels, &col)?)
        }
        None => None,
    };
    let correct = predictions
        .iter()
        .zip(&dataset.labels)
        .filter(|(p, y)| p == y)
        .count();
    let mut report = FairnessReport {
        accuracy: correct as f64 / dataset.len() as f64,
        tprd,
        dig,
        demographic: demographic_section,
        phi: Some(fairmetrics::phi_matrix(&audit_attrs, &audit_names)?),
        notes,
    };
    let extra: Vec<String> = report
        .tprd
        .notes
        .iter()
        .chain(&report.dig.notes)
        .cloned()
        .collect();
    report.notes.extend(extra);
    write_out(out, "audit.txt", &report.to_text())
}

pub fn cmd_phi(data_path: &Path, columns: &str, out: &Path) -> Result<()> {
    let names: Vec<String> = columns
        .split(',')
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect();
    if names.len() < 2 {
        return Err(Error::Config("need at least two column names".into()));
    }
    // reuse the annotation loader: first column as target, rest as attributes
    let dataset = data::load_attribute_csv(data_path, &names[0], &names[1..])?;
    let matrix: Vec<Vec<u8>> = (0..dataset.len())
        .map(|r| {
            let mut row = Vec::with_capacity(names.len());
            row.push(dataset.labels[r]);
            row.extend(&dataset.attrs[r]);
            row
        })
        .collect();
    let phi = fairmetrics::phi_matrix(&matrix, &names)?;
    let mut csv = String::new();
    writeln!(csv, ",{}", phi.names.join(",")).unwrap();
    for (i, name) in phi.names.iter().enumerate() {
        let row: Vec<String> = phi.values[i].iter().map(|v| format!("{v}")).collect();
        writeln!(csv, "{name},{}", row.join(",")).unwrap();
    }
    write_out(out, "phi.csv", &csv)
}

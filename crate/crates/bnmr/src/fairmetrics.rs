//! Fairness metric evaluation (mean TPRD, mean DIG, phi matrix), micro
//! fairness validation set sampling and the Bayesian-calibrated fairness
//! loss with L1 and L2 variants.

use crate::bayesnet::{self, BayesianNetwork};
use crate::data::Dataset;
use crate::diffcore::{self, ClassifierParams, GradVector};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// Which norm the per-attribute disparity term uses in the fairness loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

impl std::str::FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            other => Err(Error::Config(format!("unknown norm '{other}' (expected l1 or l2)"))),
        }
    }
}

/// Balanced positive-label sample for one attribute: `pos_rows` have the
/// attribute set, `neg_rows` do not; both sides have `size_per_side` rows
/// and every row has y=1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicroValidationSet {
    pub attribute: String,
    pub attribute_index: usize,
    pub pos_rows: Vec<usize>,
    pub neg_rows: Vec<usize>,
    pub size_per_side: usize,
}

/// Deterministic seeded sampling of one micro set per attribute. Sets for
/// different attributes may overlap in rows.
pub fn sample_micro_sets(
    validation: &Dataset,
    attributes: &[String],
    size_per_side: usize,
    seed: u64,
) -> Result<Vec<MicroValidationSet>> {
    if size_per_side == 0 {
        return Err(Error::Config("size per side must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(attributes.len());
    for name in attributes {
        let attr = validation
            .attribute_index(name)
            .ok_or_else(|| Error::Config(format!("unknown attribute '{name}'")))?;
        let mut sides = [Vec::new(), Vec::new()];
        for row in 0..validation.len() {
            if validation.labels[row] == 1 {
                sides[validation.attrs[row][attr] as usize].push(row);
            }
        }
        for (value, side_name) in [(1usize, "positive"), (0, "negative")] {
            if sides[value].len() < size_per_side {
                return Err(Error::Sampling {
                    attribute: name.clone(),
                    side: side_name,
                    needed: size_per_side,
                    available: sides[value].len(),
                    deficit: size_per_side - sides[value].len(),
                });
            }
        }
        // partial Fisher-Yates, then sort for a stable evaluation order
        let mut draw = |candidates: &mut Vec<usize>| -> Vec<usize> {
            for i in 0..size_per_side {
                let j = rng.gen_range(i..candidates.len());
                candidates.swap(i, j);
            }
            let mut rows = candidates[..size_per_side].to_vec();
            rows.sort_unstable();
            rows
        };
        let pos_rows = draw(&mut sides[1]);
        let neg_rows = draw(&mut sides[0]);
        sets.push(MicroValidationSet {
            attribute: name.clone(),
            attribute_index: attr,
            pos_rows,
            neg_rows,
            size_per_side,
        });
    }
    Ok(sets)
}

/// Per-attribute disparity with undefined attributes excluded from the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityResult {
    /// (attribute name, disparity); `None` when the attribute is one-sided
    /// among y=1 rows.
    pub per_attribute: Vec<(String, Option<f64>)>,
    pub mean: f64,
    pub notes: Vec<String>,
}

/// True positive rates (group a=0, group a=1) for one attribute among y=1
/// rows; `None` when a group has no y=1 rows.
fn group_tprs(
    predictions: &[u8],
    labels: &[u8],
    attr_column: impl Fn(usize) -> u8,
) -> [Option<f64>; 2] {
    let mut hits = [0usize; 2];
    let mut totals = [0usize; 2];
    for i in 0..labels.len() {
        if labels[i] == 1 {
            let g = attr_column(i) as usize;
            totals[g] += 1;
            if predictions[i] == 1 {
                hits[g] += 1;
            }
        }
    }
    [0, 1].map(|g| (totals[g] > 0).then(|| hits[g] as f64 / totals[g] as f64))
}

fn check_lengths(predictions: &[u8], labels: &[u8], rows: usize) -> Result<()> {
    if predictions.len() != rows || labels.len() != rows {
        return Err(Error::Shape(format!(
            "{} predictions, {} labels, {} attribute rows",
            predictions.len(),
            labels.len(),
            rows
        )));
    }
    Ok(())
}

/// Mean true positive rate disparity over attributes (hard thresholded
/// predictions, y=1 rows only).
pub fn tprd(
    predictions: &[u8],
    labels: &[u8],
    attrs: &[Vec<u8>],
    attribute_names: &[String],
) -> Result<DisparityResult> {
    check_lengths(predictions, labels, attrs.len())?;
    disparity_by(predictions, labels, attrs, attribute_names, |t0, t1| (t1 - t0).abs())
}

/// Disparate impact gap: max over ordered group pairs of |1 - TPR ratio|,
/// clamped to [0,1].
pub fn dig(
    predictions: &[u8],
    labels: &[u8],
    attrs: &[Vec<u8>],
    attribute_names: &[String],
) -> Result<DisparityResult> {
    check_lengths(predictions, labels, attrs.len())?;
    disparity_by(predictions, labels, attrs, attribute_names, dig_of_tprs)
}

/// DIG for a pair of TPRs, honoring the degenerate-denominator rules.
pub fn dig_of_tprs(t0: f64, t1: f64) -> f64 {
    if t0 == 0.0 && t1 == 0.0 {
        return 0.0;
    }
    if t0 == 0.0 || t1 == 0.0 {
        return 1.0;
    }
    let a = (1.0 - t1 / t0).abs();
    let b = (1.0 - t0 / t1).abs();
    a.max(b).clamp(0.0, 1.0)
}

fn disparity_by(
    predictions: &[u8],
    labels: &[u8],
    attrs: &[Vec<u8>],
    attribute_names: &[String],
    combine: impl Fn(f64, f64) -> f64,
) -> Result<DisparityResult> {
    let mut per_attribute = Vec::with_capacity(attribute_names.len());
    let mut notes = Vec::new();
    let mut sum = 0.0;
    let mut defined = 0usize;
    for (m, name) in attribute_names.iter().enumerate() {
        let tprs = group_tprs(predictions, labels, |i| attrs[i][m]);
        match (tprs[0], tprs[1]) {
            (Some(t0), Some(t1)) => {
                let d = combine(t0, t1);
                sum += d;
                defined += 1;
                per_attribute.push((name.clone(), Some(d)));
            }
            _ => {
                notes.push(format!(
                    "attribute '{name}' is one-sided among y=1 rows; excluded from the mean"
                ));
                per_attribute.push((name.clone(), None));
            }
        }
    }
    let mean = if defined > 0 { sum / defined as f64 } else { 0.0 };
    Ok(DisparityResult {
        per_attribute,
        mean,
        notes,
    })
}

/// Single-attribute TPRD and DIG for a held-out demographic column.
pub fn demographic_report(
    predictions: &[u8],
    labels: &[u8],
    demographic: &[u8],
) -> Result<(f64, f64)> {
    check_lengths(predictions, labels, demographic.len())?;
    let tprs = group_tprs(predictions, labels, |i| demographic[i]);
    match (tprs[0], tprs[1]) {
        (Some(t0), Some(t1)) => Ok(((t1 - t0).abs(), dig_of_tprs(t0, t1))),
        _ => Err(Error::Data(
            "demographic column is one-sided among y=1 rows".into(),
        )),
    }
}

/// Pairwise phi coefficients. Degenerate (constant) columns yield zero
/// rows/columns and a flag; the diagonal is fixed at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub degenerate: Vec<bool>,
}

pub fn phi_matrix(data: &[Vec<u8>], names: &[String]) -> Result<PhiMatrix> {
    let k = names.len();
    if data.iter().any(|row| row.len() != k) {
        return Err(Error::Shape("matrix width does not match name count".into()));
    }
    let degenerate: Vec<bool> = (0..k)
        .map(|c| {
            let first = data.first().map(|r| r[c]);
            data.iter().all(|r| Some(r[c]) == first)
        })
        .collect();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in (i + 1)..k {
            if degenerate[i] || degenerate[j] {
                continue;
            }
            let r = bayesnet::chi2_independence(data, i, j)?;
            values[i][j] = r.phi;
            values[j][i] = r.phi;
        }
    }
    Ok(PhiMatrix {
        names: names.to_vec(),
        values,
        degenerate,
    })
}

/// Calibrated fairness loss over micro sets: per set, the gap between the
/// calibrated mean confidences of the two groups (absolute for L1, squared
/// for L2), averaged over sets. The calibrator Z is a constant within a
/// step; the gradient flows only through the classifier confidences.
pub fn fairness_loss(
    classifier: &ClassifierParams,
    micro_sets: &[MicroValidationSet],
    dataset: &Dataset,
    bn: Option<&BayesianNetwork>,
    norm: Norm,
) -> Result<(f64, GradVector)> {
    if micro_sets.is_empty() {
        return Err(Error::Config("no micro fairness validation sets".into()));
    }
    if let Some(bn) = bn {
        if bn.prediction_node.is_none() {
            return Err(Error::State(
                "calibration network has no prediction node".into(),
            ));
        }
    }
    let n_params = classifier.param_count();
    let mut total = 0.0;
    let mut grad = GradVector::zeros(n_params);
    let scale = 1.0 / micro_sets.len() as f64;
    for set in micro_sets {
        let (z_pos, z_neg) = match bn {
            Some(bn) => (
                bayesnet::calibrator_z(bn, &set.attribute, 1)?,
                bayesnet::calibrator_z(bn, &set.attribute, 0)?,
            ),
            None => (1.0, 1.0),
        };
        let side_mean =
            |rows: &[usize]| -> Result<(f64, GradVector)> {
                let mut mean = 0.0;
                let mut g = GradVector::zeros(n_params);
                for &row in rows {
                    let (p, gp) = classifier.confidence_grad(&dataset.features[row])?;
                    mean += p;
                    g.add_scaled(&gp, 1.0);
                }
                let inv = 1.0 / rows.len() as f64;
                g.scale(inv);
                Ok((mean * inv, g))
            };
        let (s_pos, g_pos) = side_mean(&set.pos_rows)?;
        let (s_neg, g_neg) = side_mean(&set.neg_rows)?;
        let diff = s_pos * z_pos - s_neg * z_neg;
        match norm {
            Norm::L1 => {
                total += scale * diff.abs();
                // subgradient 0 at exact ties
                let sign = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                grad.add_scaled(&g_pos, scale * sign * z_pos);
                grad.add_scaled(&g_neg, -scale * sign * z_neg);
            }
            Norm::L2 => {
                total += scale * diff * diff;
                grad.add_scaled(&g_pos, scale * 2.0 * diff * z_pos);
                grad.add_scaled(&g_neg, -scale * 2.0 * diff * z_neg);
            }
        }
    }
    Ok((total, grad))
}

/// Full fairness audit of a set of hard predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    pub accuracy: f64,
    pub tprd: DisparityResult,
    pub dig: DisparityResult,
    /// (tprd, dig) for a held-out demographic column.
    pub demographic: Option<(f64, f64)>,
    pub phi: Option<PhiMatrix>,
    pub notes: Vec<String>,
}

impl FairnessReport {
    pub fn mean_tprd(&self) -> f64 {
        self.tprd.mean
    }

    pub fn mean_dig(&self) -> f64 {
        self.dig.mean
    }

    /// Key-value text document with fixed field names.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "accuracy={}", self.accuracy).unwrap();
        writeln!(out, "mean_tprd={}", self.tprd.mean).unwrap();
        writeln!(out, "mean_dig={}", self.dig.mean).unwrap();
        for (name, value) in &self.tprd.per_attribute {
            match value {
                Some(v) => writeln!(out, "per_attribute.tprd.{name}={v}").unwrap(),
                None => writeln!(out, "per_attribute.tprd.{name}=undefined").unwrap(),
            }
        }
        for (name, value) in &self.dig.per_attribute {
            match value {
                Some(v) => writeln!(out, "per_attribute.dig.{name}={v}").unwrap(),
                None => writeln!(out, "per_attribute.dig.{name}=undefined").unwrap(),
            }
        }
        if let Some((tprd, dig)) = self.demographic {
            writeln!(out, "demographic.tprd={tprd}").unwrap();
            writeln!(out, "demographic.dig={dig}").unwrap();
        }
        if let Some(phi) = &self.phi {
            for (i, row_name) in phi.names.iter().enumerate() {
                for (j, col_name) in phi.names.iter().enumerate() {
                    if i < j {
                        writeln!(out, "phi.{row_name}.{col_name}={}", phi.values[i][j]).unwrap();
                    }
                }
            }
        }
        for note in self
            .notes
            .iter()
            .chain(&self.tprd.notes)
            .chain(&self.dig.notes)
        {
            writeln!(out, "note={note}").unwrap();
        }
        out
    }
}

/// Evaluate a classifier on a dataset: hard predictions at threshold 0.5,
/// accuracy, TPRD, DIG, optional held-out demographic column and the phi
/// matrix over attributes plus target.
pub fn evaluate_report(
    params: &ClassifierParams,
    dataset: &Dataset,
    demographic: Option<&[u8]>,
    include_phi: bool,
) -> Result<FairnessReport> {
    let predictions = hard_predictions(params, dataset)?;
    let mut correct = 0usize;
    for (p, y) in predictions.iter().zip(&dataset.labels) {
        if p == y {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / dataset.len() as f64;
    let tprd_result = tprd(&predictions, &dataset.labels, &dataset.attrs, &dataset.attribute_names)?;
    let dig_result = dig(&predictions, &dataset.labels, &dataset.attrs, &dataset.attribute_names)?;
    let mut notes = Vec::new();
    let demographic = match demographic {
        Some(col) => Some(demographic_report(&predictions, &dataset.labels, col)?),
        None => {
            notes.push("demographic column absent; demographic section omitted".to_string());
            None
        }
    };
    let phi = if include_phi {
        let mut names = dataset.attribute_names.clone();
        names.push(dataset.target_name.clone());
        let rows: Vec<Vec<u8>> = dataset
            .attrs
            .iter()
            .zip(&dataset.labels)
            .map(|(a, &y)| {
                let mut row = a.clone();
                row.push(y);
                row
            })
            .collect();
        Some(phi_matrix(&rows, &names)?)
    } else {
        None
    };
    Ok(FairnessReport {
        accuracy,
        tprd: tprd_result,
        dig: dig_result,
        demographic,
        phi,
        notes,
    })
}

/// Threshold-0.5 predictions for every row.
pub fn hard_predictions(params: &ClassifierParams, dataset: &Dataset) -> Result<Vec<u8>> {
    dataset
        .features
        .iter()
        .map(|x| Ok(u8::from(diffcore::forward(params, x)? >= 0.5)))
        .collect()
}

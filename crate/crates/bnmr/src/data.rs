//! Datasets: synthetic generation from a ground-truth attribute Bayesian
//! Network, CelebA-style attribute annotation ingestion, deterministic
//! splitting, and a CSV layout for persisting generated data.

use crate::bayesnet::BayesianNetwork;
use crate::error::{Error, Result};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Rows of (feature vector, binary target, binary attribute vector).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub attrs: Vec<Vec<u8>>,
    pub attribute_names: Vec<String>,
    pub target_name: String,
    /// External row identifiers (image ids for annotation files, the row
    /// index for synthetic data). Used by partition-file splitting.
    pub row_ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        attrs: Vec<Vec<u8>>,
        attribute_names: Vec<String>,
        target_name: String,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        let n = features.len();
        if labels.len() != n || attrs.len() != n || row_ids.len() != n {
            return Err(Error::Shape(format!(
                "row counts disagree: {} features, {} labels, {} attrs, {} ids",
                n,
                labels.len(),
                attrs.len(),
                row_ids.len()
            )));
        }
        let k = attribute_names.len();
        if attrs.iter().any(|a| a.len() != k) {
            return Err(Error::Shape("attribute row width mismatch".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &attribute_names {
            if !seen.insert(name) {
                return Err(Error::Config(format!("duplicate attribute name '{name}'")));
            }
        }
        if attribute_names.iter().any(|a| a == &target_name) {
            return Err(Error::Config(format!(
                "target '{target_name}' also appears among attributes"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            attrs,
            attribute_names,
            target_name,
            row_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attribute_names.iter().position(|a| a == name)
    }

    fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().map(|&r| self.features[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            attrs: rows.iter().map(|&r| self.attrs[r].clone()).collect(),
            attribute_names: self.attribute_names.clone(),
            target_name: self.target_name.clone(),
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
        }
    }
}

/// How labels are derived from attributes: a logistic latent score
/// bias + coefs . a + noise_scale * logistic noise, thresholded at zero.
/// With zero noise the label is a deterministic function of attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRule {
    pub bias: f64,
    pub coefs: Vec<f64>,
    pub noise_scale: f64,
}

/// Attribute-conditioned label flips, the controllable bias injector.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasRule {
    pub attribute: usize,
    /// P(flip y=1 -> 0) indexed by the attribute value.
    pub flip_pos: [f64; 2],
    /// P(flip y=0 -> 1) indexed by the attribute value.
    pub flip_neg: [f64; 2],
}

/// Per-attribute mean shifts in feature space plus isotropic Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRule {
    pub dim: usize,
    pub shifts: Vec<Vec<f64>>,
    pub sigma: f64,
}

/// Full recipe for a synthetic biased dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub attribute_bn: BayesianNetwork,
    pub label_rule: LabelRule,
    pub feature_rule: FeatureRule,
    pub bias_rule: Option<BiasRule>,
    pub target_name: String,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.attribute_bn.structure.node_count();
        if self.label_rule.coefs.len() != k {
            return Err(Error::Config(format!(
                "{} label coefficients for {k} attributes",
                self.label_rule.coefs.len()
            )));
        }
        if self.label_rule.noise_scale < 0.0 {
            return Err(Error::Config("label noise scale must be non-negative".into()));
        }
        if self.feature_rule.shifts.len() != k {
            return Err(Error::Config(format!(
                "{} feature shifts for {k} attributes",
                self.feature_rule.shifts.len()
            )));
        }
        if self
            .feature_rule
            .shifts
            .iter()
            .any(|s| s.len() != self.feature_rule.dim)
        {
            return Err(Error::Config("feature shift dimension mismatch".into()));
        }
        if self.feature_rule.sigma <= 0.0 {
            return Err(Error::Config("feature sigma must be positive".into()));
        }
        if let Some(rule) = &self.bias_rule {
            if rule.attribute >= k {
                return Err(Error::Config(format!(
                    "bias attribute index {} out of range",
                    rule.attribute
                )));
            }
            for p in rule.flip_pos.iter().chain(&rule.flip_neg) {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Config(format!("flip probability {p} outside [0,1]")));
                }
            }
        }
        Ok(())
    }
}

/// Ancestral sampling of binary attribute rows from a Bayesian Network.
pub fn sample_attributes(bn: &BayesianNetwork, n: usize, rng: &mut impl RngCore) -> Vec<Vec<u8>> {
    let order = bn
        .structure
        .topological_order()
        .expect("network structure is acyclic by construction");
    let width = bn.structure.node_count();
    (0..n)
        .map(|_| {
            let mut row = vec![0u8; width];
            for &node in &order {
                let cpt = &bn.cpts[node];
                let mut config = 0usize;
                for (k, &p) in cpt.parent_order.iter().enumerate() {
                    config |= (row[p] as usize) << k;
                }
                row[node] = u8::from(rng.gen::<f64>() < cpt.table[config]);
            }
            row
        })
        .collect()
}

fn standard_normal(rng: &mut impl RngCore) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn standard_logistic(rng: &mut impl RngCore) -> f64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    (u / (1.0 - u)).ln()
}

/// Generate `n` rows from a synthetic spec, seeded and reproducible.
pub fn generate_synthetic(spec: &SyntheticSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("row count must be at least 1".into()));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attrs = sample_attributes(&spec.attribute_bn, n, &mut rng);
    let mut labels = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    for row in &attrs {
        let mut score = spec.label_rule.bias;
        for (a, c) in row.iter().zip(&spec.label_rule.coefs) {
            score += f64::from(*a) * c;
        }
        if spec.label_rule.noise_scale > 0.0 {
            score += spec.label_rule.noise_scale * standard_logistic(&mut rng);
        }
        let mut y = u8::from(score > 0.0);
        if let Some(rule) = &spec.bias_rule {
            let v = row[rule.attribute] as usize;
            let flip_p = if y == 1 { rule.flip_pos[v] } else { rule.flip_neg[v] };
            if flip_p > 0.0 && rng.gen::<f64>() < flip_p {
                y = 1 - y;
            }
        }
        labels.push(y);
        let mut x = vec![0.0f64; spec.feature_rule.dim];
        for (a, shift) in row.iter().zip(&spec.feature_rule.shifts) {
            if *a == 1 {
                for (xi, s) in x.iter_mut().zip(shift) {
                    *xi += s;
                }
            }
        }
        for xi in &mut x {
            *xi += spec.feature_rule.sigma * standard_normal(&mut rng);
        }
        features.push(x);
    }
    let names = spec.attribute_bn.structure.node_names().to_vec();
    let row_ids = (0..n).map(|i| i.to_string()).collect();
    Dataset::new(features, labels, attrs, names, spec.target_name.clone(), row_ids)
}

fn parse_pm1(token: &str, line: usize) -> Result<u8> {
    match token {
        "1" => Ok(1),
        "-1" => Ok(0),
        other => Err(Error::Parse {
            line,
            message: format!("expected '1' or '-1', got '{other}'"),
        }),
    }
}

/// Parse a CelebA `list_attr_celeba` style annotation file: line 1 is the
/// row count, line 2 the attribute header, then one row per image with an
/// id followed by +/-1 values. The chosen attributes become the attribute
/// matrix, the target column becomes the labels and the remaining columns
/// become 0/1 feature values.
pub fn load_attribute_csv(
    path: &Path,
    target_name: &str,
    attribute_names: &[String],
) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, count_line) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let declared: usize = count_line.trim().parse().map_err(|_| Error::Parse {
        line: 1,
        message: format!("bad row count '{}'", count_line.trim()),
    })?;
    let (_, header_line) = lines.next().ok_or(Error::Parse {
        line: 2,
        message: "missing attribute header".into(),
    })?;
    let header: Vec<&str> = header_line.split_whitespace().collect();
    let col_of = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' not found in header")))
    };
    let target_col = col_of(target_name)?;
    let attr_cols = attribute_names
        .iter()
        .map(|a| col_of(a))
        .collect::<Result<Vec<usize>>>()?;
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|c| *c != target_col && !attr_cols.contains(c))
        .collect();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut attrs = Vec::new();
    let mut row_ids = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.len() != header.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected {} value tokens after the id, got {}",
                    header.len(),
                    tokens.len() - 1
                ),
            });
        }
        row_ids.push(tokens[0].to_string());
        let values = &tokens[1..];
        labels.push(parse_pm1(values[target_col], line_no)?);
        attrs.push(
            attr_cols
                .iter()
                .map(|&c| parse_pm1(values[c], line_no))
                .collect::<Result<Vec<u8>>>()?,
        );
        features.push(
            feature_cols
                .iter()
                .map(|&c| parse_pm1(values[c], line_no).map(f64::from))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    if labels.len() != declared {
        return Err(Error::Parse {
            line: 1,
            message: format!("header declares {declared} rows but {} were found", labels.len()),
        });
    }
    Dataset::new(
        features,
        labels,
        attrs,
        attribute_names.to_vec(),
        target_name.to_string(),
        row_ids,
    )
}

/// Split into (train, val, test) by seeded shuffled ratios. Membership is
/// shuffled; row order inside each split follows the original dataset.
pub fn split_by_ratio(
    dataset: &Dataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (r0, r1, r2) = ratios;
    if r0 < 0.0 || r1 < 0.0 || r2 < 0.0 || ((r0 + r1 + r2) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must be non-negative and sum to 1, got ({r0}, {r1}, {r2})"
        )));
    }
    let n = dataset.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    let n_train = (r0 * n as f64).round() as usize;
    let n_val = (r1 * n as f64).round() as usize;
    let n_train = n_train.min(n);
    let n_val = n_val.min(n - n_train);
    let mut train: Vec<usize> = indices[..n_train].to_vec();
    let mut val: Vec<usize> = indices[n_train..n_train + n_val].to_vec();
    let mut test: Vec<usize> = indices[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&val), dataset.subset(&test)))
}

/// Split by a CelebA `list_eval_partition` style file mapping each row id
/// to 0 (train), 1 (val) or 2 (test).
pub fn split_by_partition(
    dataset: &Dataset,
    partition_text: &str,
) -> Result<(Dataset, Dataset, Dataset)> {
    let mut map: BTreeMap<&str, u8> = BTreeMap::new();
    for (idx, raw) in partition_text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut it = raw.split_whitespace();
        let id = it.next().ok_or(Error::Parse {
            line,
            message: "missing row id".into(),
        })?;
        let part = it
            .next()
            .and_then(|t| t.parse::<u8>().ok())
            .filter(|p| *p <= 2)
            .ok_or(Error::Parse {
                line,
                message: "expected partition value 0, 1 or 2".into(),
            })?;
        map.insert(id, part);
    }
    let mut splits: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (row, id) in dataset.row_ids.iter().enumerate() {
        let part = map
            .get(id.as_str())
            .ok_or_else(|| Error::Data(format!("row id '{id}' not found in partition file")))?;
        splits[*part as usize].push(row);
    }
    Ok((
        dataset.subset(&splits[0]),
        dataset.subset(&splits[1]),
        dataset.subset(&splits[2]),
    ))
}

/// Write the dataset CSV layout: feature columns `x<i>`, the target column
/// `target.<name>` and attribute columns `attr.<name>`. Floats use
/// shortest round-trip formatting.
pub fn dataset_to_csv(dataset: &Dataset) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = (0..dataset.feature_dim()).map(|i| format!("x{i}")).collect();
    header.push(format!("target.{}", dataset.target_name));
    header.extend(dataset.attribute_names.iter().map(|a| format!("attr.{a}")));
    header.push("id".to_string());
    writeln!(out, "{}", header.join(",")).unwrap();
    for row in 0..dataset.len() {
        let mut fields: Vec<String> =
            dataset.features[row].iter().map(|v| format!("{v}")).collect();
        fields.push(dataset.labels[row].to_string());
        fields.extend(dataset.attrs[row].iter().map(|a| a.to_string()));
        fields.push(dataset.row_ids[row].clone());
        writeln!(out, "{}", fields.join(",")).unwrap();
    }
    out
}

/// Parse the layout written by [`dataset_to_csv`].
pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let header: Vec<&str> = header_line.split(',').collect();
    let n_features = header.iter().take_while(|h| h.starts_with('x')).count();
    let target_name = header
        .get(n_features)
        .and_then(|h| h.strip_prefix("target."))
        .ok_or(Error::Parse {
            line: 1,
            message: "expected a 'target.<name>' column after the features".into(),
        })?
        .to_string();
    let has_id = header.last() == Some(&"id");
    let attr_end = if has_id { header.len() - 1 } else { header.len() };
    let attribute_names: Vec<String> = header[n_features + 1..attr_end]
        .iter()
        .map(|h| {
            h.strip_prefix("attr.").map(str::to_string).ok_or(Error::Parse {
                line: 1,
                message: format!("expected 'attr.<name>' column, got '{h}'"),
            })
        })
        .collect::<Result<_>>()?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut attrs = Vec::new();
    let mut row_ids = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", header.len(), fields.len()),
            });
        }
        let parse_f64 = |t: &str| -> Result<f64> {
            t.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad number '{t}'"),
            })
        };
        let parse_bit = |t: &str| -> Result<u8> {
            match t {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(Error::Parse {
                    line,
                    message: format!("expected 0 or 1, got '{other}'"),
                }),
            }
        };
        features.push(fields[..n_features].iter().map(|t| parse_f64(t)).collect::<Result<_>>()?);
        labels.push(parse_bit(fields[n_features])?);
        attrs.push(
            fields[n_features + 1..attr_end]
                .iter()
                .map(|t| parse_bit(t))
                .collect::<Result<_>>()?,
        );
        row_ids.push(if has_id {
            fields[header.len() - 1].to_string()
        } else {
            labels.len().to_string()
        });
    }
    Dataset::new(features, labels, attrs, attribute_names, target_name, row_ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::{self, Cpt, DagStructure};

    fn chain_bn() -> BayesianNetwork {
        let structure = DagStructure::new(
            vec!["A".into(), "B".into(), "C".into()],
            vec![vec![], vec![0], vec![1]],
        )
        .unwrap();
        let cpts = vec![
            Cpt { node: 0, parent_order: vec![], table: vec![0.5], unobserved_configs: vec![] },
            Cpt { node: 1, parent_order: vec![0], table: vec![0.2, 0.8], unobserved_configs: vec![] },
            Cpt { node: 2, parent_order: vec![1], table: vec![0.3, 0.7], unobserved_configs: vec![] },
        ];
        BayesianNetwork::new(structure, cpts).unwrap()
    }

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            attribute_bn: chain_bn(),
            label_rule: LabelRule { bias: -1.0, coefs: vec![1.0, 0.8, 0.6], noise_scale: 1.0 },
            feature_rule: FeatureRule {
                dim: 4,
                shifts: vec![
                    vec![1.0, 0.0, 0.0, 0.5],
                    vec![0.0, 1.0, 0.0, -0.5],
                    vec![0.0, 0.0, 1.0, 0.2],
                ],
                sigma: 0.5,
            },
            bias_rule: None,
            target_name: "Y".into(),
        }
    }

    #[test]
    fn synthetic_is_seeded_and_deterministic() {
        let a = generate_synthetic(&spec(), 200, 9).unwrap();
        let b = generate_synthetic(&spec(), 200, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&spec(), 200, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_label_noise_is_deterministic_in_attributes() {
        let mut s = spec();
        s.label_rule.noise_scale = 0.0;
        let d = generate_synthetic(&s, 500, 1).unwrap();
        for (row, &y) in d.attrs.iter().zip(&d.labels) {
            let score = -1.0
                + f64::from(row[0]) * 1.0
                + f64::from(row[1]) * 0.8
                + f64::from(row[2]) * 0.6;
            assert_eq!(y, u8::from(score > 0.0));
        }
    }

    #[test]
    fn ancestral_sampling_matches_cpts() {
        let bn = chain_bn();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rows = sample_attributes(&bn, 100_000, &mut rng);
        // P(B=1|A=a) within 3/sqrt(count) of the CPT entry
        for a in [0u8, 1] {
            let matching: Vec<&Vec<u8>> = rows.iter().filter(|r| r[0] == a).collect();
            let count = matching.len() as f64;
            let freq = matching.iter().filter(|r| r[1] == 1).count() as f64 / count;
            let expected = bn.cpts[1].table[a as usize];
            assert!(
                (freq - expected).abs() < 3.0 / count.sqrt(),
                "P(B=1|A={a}): {freq} vs {expected}"
            );
        }
    }

    #[test]
    fn empirical_phi_matches_analytic_joint() {
        let bn = chain_bn();
        // analytic 2x2 marginal of (A, B) from the chain joint
        let p_a1: f64 = 0.5;
        let p_b1 = p_a1 * 0.8 + (1.0 - p_a1) * 0.2;
        let p_ab = p_a1 * 0.8;
        let cov = p_ab - p_a1 * p_b1;
        let analytic_phi =
            (cov / (p_a1 * (1.0 - p_a1) * p_b1 * (1.0 - p_b1)).sqrt()).abs();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let rows = sample_attributes(&bn, 50_000, &mut rng);
        let r = bayesnet::chi2_independence(&rows, 0, 1).unwrap();
        assert!(
            (r.phi - analytic_phi).abs() < 0.03,
            "empirical {} vs analytic {analytic_phi}",
            r.phi
        );
    }

    #[test]
    fn bias_rule_flips_positives() {
        let mut s = spec();
        s.label_rule.noise_scale = 0.0;
        s.bias_rule = Some(BiasRule {
            attribute: 0,
            flip_pos: [1.0, 0.0],
            flip_neg: [0.0, 0.0],
        });
        let d = generate_synthetic(&s, 2000, 4).unwrap();
        // with A=0 every positive is flipped: y=1 implies A=1
        for (row, &y) in d.attrs.iter().zip(&d.labels) {
            if y == 1 {
                assert_eq!(row[0], 1);
            }
        }
    }

    #[test]
    fn csv_round_trip_identical() {
        let d = generate_synthetic(&spec(), 150, 2).unwrap();
        let text = dataset_to_csv(&d);
        let back = dataset_from_csv(&text).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn celeba_fixture_parses_exactly() {
        let text = "3\nSmiling Big_Lips Male\n\
                    000001.jpg  1 -1  1\n\
                    000002.jpg -1  1 -1\n\
                    000003.jpg  1  1  1\n";
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("attrs.txt");
        std::fs::write(&path, text).unwrap();
        let d = load_attribute_csv(&path, "Smiling", &["Big_Lips".to_string()]).unwrap();
        assert_eq!(d.labels, vec![1, 0, 1]);
        assert_eq!(d.attrs, vec![vec![0], vec![1], vec![1]]);
        // remaining column (Male) becomes the feature
        assert_eq!(d.features, vec![vec![1.0], vec![0.0], vec![1.0]]);
        assert_eq!(d.row_ids, vec!["000001.jpg", "000002.jpg", "000003.jpg"]);
    }

    #[test]
    fn celeba_count_mismatch_and_bad_token() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("attrs.txt");
        std::fs::write(&path, "5\nSmiling Male\na.jpg 1 -1\n").unwrap();
        let err = load_attribute_csv(&path, "Smiling", &["Male".to_string()]).unwrap_err();
        assert!(err.to_string().contains('5') && err.to_string().contains('1'));

        std::fs::write(&path, "1\nSmiling Male\na.jpg 1 0\n").unwrap();
        let err = load_attribute_csv(&path, "Smiling", &["Male".to_string()]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn ratio_split_sizes_and_determinism() {
        let d = generate_synthetic(&spec(), 100, 0).unwrap();
        let (tr, va, te) = split_by_ratio(&d, (0.8, 0.1, 0.1), 5).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (80, 10, 10));
        let (tr2, va2, te2) = split_by_ratio(&d, (0.8, 0.1, 0.1), 5).unwrap();
        assert_eq!((tr, va, te), (tr2, va2, te2));
        // disjoint and exhaustive
        let d2 = generate_synthetic(&spec(), 100, 0).unwrap();
        let (tr, va, te) = split_by_ratio(&d2, (0.8, 0.1, 0.1), 5).unwrap();
        let mut ids: Vec<String> = tr
            .row_ids
            .iter()
            .chain(&va.row_ids)
            .chain(&te.row_ids)
            .cloned()
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 100);
    }

    #[test]
    fn partition_split_membership() {
        let d = generate_synthetic(&spec(), 4, 0).unwrap();
        let partition = "0 0\n1 0\n2 1\n3 2\n";
        let (tr, va, te) = split_by_partition(&d, partition).unwrap();
        assert_eq!(tr.row_ids, vec!["0", "1"]);
        assert_eq!(va.row_ids, vec!["2"]);
        assert_eq!(te.row_ids, vec!["3"]);
        // unknown id
        let err = split_by_partition(&d, "0 0\n1 0\n2 1\n").unwrap_err();
        assert!(err.to_string().contains('3'));
    }
}

//! BNMR training loop: tempered-softmax weight normalization, exact
//! meta-gradient of the fairness loss through the one-step lookahead,
//! committed model updates, periodic network refresh, plus the vanilla
//! and random baselines and the ablation switches.

use crate::bayesnet::{self, BayesianNetwork};
use crate::data::Dataset;
use crate::diffcore::{self, ClassifierParams, GradVector};
use crate::error::{Error, Result};
use crate::fairmetrics::{self, MicroValidationSet, Norm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// Training mode: full BNMR, unweighted SGD, or random reweighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Bnmr,
    Vanilla,
    Random,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Bnmr => "bnmr",
            Mode::Vanilla => "vanilla",
            Mode::Random => "random",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bnmr" => Ok(Mode::Bnmr),
            "vanilla" => Ok(Mode::Vanilla),
            "random" => Ok(Mode::Random),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// Ablation switches mirroring the component-removal study.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablations {
    pub no_normalization: bool,
    pub no_online_update: bool,
    pub no_calibration: bool,
    pub no_reweighting: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub meta_learning_rate: f64,
    pub tau: f64,
    /// Refresh the prediction-node CPT every this many steps.
    pub bn_update_interval: usize,
    pub bn_prior_strength: f64,
    /// Total micro validation set size per attribute (split evenly).
    pub fairness_val_size: usize,
    pub epochs: usize,
    pub hidden_dims: Vec<usize>,
    pub norm: Norm,
    pub mode: Mode,
    pub ablations: Ablations,
    /// Resample micro sets at the start of every epoch instead of once.
    pub resample_micro_sets: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            learning_rate: 1e-4,
            meta_learning_rate: 1e-2,
            tau: 0.9,
            bn_update_interval: 100,
            bn_prior_strength: 80.0,
            fairness_val_size: 20,
            epochs: 5,
            hidden_dims: vec![16],
            norm: Norm::L1,
            mode: Mode::Bnmr,
            ablations: Ablations::default(),
            resample_micro_sets: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.fairness_val_size < 2 {
            return Err(Error::Config(
                "batch size, epochs and fairness validation size must be positive".into(),
            ));
        }
        if self.learning_rate <= 0.0 || self.tau <= 0.0 || self.bn_prior_strength <= 0.0 {
            return Err(Error::Config(
                "learning rate, tau and prior strength must be positive".into(),
            ));
        }
        if self.meta_learning_rate < 0.0 {
            return Err(Error::Config("meta learning rate must be non-negative".into()));
        }
        if self.bn_update_interval == 0 {
            return Err(Error::Config("network update interval must be positive".into()));
        }
        Ok(())
    }
}

/// Per-batch weight logits, temperature and normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    pub logits: Vec<f64>,
    pub tau: f64,
    pub rho: Vec<f64>,
}

impl WeightState {
    pub fn uniform(len: usize, tau: f64) -> Result<Self> {
        let logits = vec![0.0; len];
        let rho = tempered_softmax(&logits, tau)?;
        Ok(WeightState { logits, tau, rho })
    }
}

/// rho_i = exp(w_i / tau) / sum_j exp(w_j / tau), with max-subtraction.
pub fn tempered_softmax(logits: &[f64], tau: f64) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Config("empty logit vector".into()));
    }
    if tau <= 0.0 {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    if logits.iter().any(|v| v.is_nan()) {
        return Err(Error::Data("NaN in logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|w| ((w - max) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Exact gradient of the fairness loss at the lookahead parameters with
/// respect to the weight logits. With c_j = -alpha * <g_j, fair_grad>,
/// dL/dw_i = rho_i * (c_i - sum_j c_j rho_j) / tau.
pub fn meta_weight_gradient(
    grads: &[GradVector],
    rho: &[f64],
    fair_grad: &GradVector,
    alpha: f64,
    tau: f64,
) -> Result<Vec<f64>> {
    if grads.len() != rho.len() {
        return Err(Error::Shape(format!(
            "{} gradients but {} weights",
            grads.len(),
            rho.len()
        )));
    }
    let c: Vec<f64> = grads
        .iter()
        .map(|g| {
            if g.len() != fair_grad.len() {
                return Err(Error::Shape("gradient length mismatch".into()));
            }
            Ok(-alpha * g.dot(fair_grad))
        })
        .collect::<Result<_>>()?;
    let weighted_mean: f64 = c.iter().zip(rho).map(|(cj, rj)| cj * rj).sum();
    Ok(rho
        .iter()
        .zip(&c)
        .map(|(ri, ci)| ri * (ci - weighted_mean) / tau)
        .collect())
}

/// Normalization used by the no_normalization ablation: shift the raw
/// logits to be non-negative and scale to sum 1.
fn shift_scale_normalize(logits: &[f64]) -> Vec<f64> {
    let min = logits.iter().cloned().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = logits.iter().map(|w| w - min).collect();
    let total: f64 = shifted.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / logits.len() as f64; logits.len()];
    }
    shifted.into_iter().map(|w| w / total).collect()
}

/// Mutable training state threaded through the step function.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ClassifierParams,
    pub bn: Option<BayesianNetwork>,
    pub buffer: Vec<(Vec<u8>, u8)>,
    pub step: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub task_loss: f64,
    pub fair_loss: f64,
}

/// One training step on a batch of row indices. `weight_rng` is only
/// consumed in random mode.
pub fn train_step(
    state: &mut TrainState,
    dataset: &Dataset,
    batch: &[usize],
    micro_sets: &[MicroValidationSet],
    val_set: &Dataset,
    cfg: &TrainConfig,
    weight_rng: &mut ChaCha8Rng,
) -> Result<StepStats> {
    if batch.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    state.step += 1;
    let rows: Vec<(&[f64], u8)> = batch
        .iter()
        .map(|&r| (dataset.features[r].as_slice(), dataset.labels[r]))
        .collect();
    let loss_grads = diffcore::per_sample_loss_and_grad(&state.params, &rows)?;
    let task_loss =
        loss_grads.iter().map(|(l, _)| l).sum::<f64>() / loss_grads.len() as f64;
    if !task_loss.is_finite() {
        return Err(Error::Divergence {
            step: state.step,
            message: format!("task loss {task_loss}"),
        });
    }
    let grads: Vec<GradVector> = loss_grads.iter().map(|(_, g)| g.clone()).collect();

    let reweighting_off = cfg.ablations.no_reweighting || cfg.mode == Mode::Vanilla;
    let mut fair_loss = 0.0;
    let rho = if reweighting_off {
        tempered_softmax(&vec![0.0; batch.len()], cfg.tau)?
    } else if cfg.mode == Mode::Random {
        // symmetric Dirichlet via normalized exponentials
        let draws: Vec<f64> = (0..batch.len())
            .map(|_| -weight_rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln())
            .collect();
        let total: f64 = draws.iter().sum();
        draws.into_iter().map(|d| d / total).collect()
    } else {
        // (1) reset logits, uniform weights
        let mut weights = WeightState::uniform(batch.len(), cfg.tau)?;
        // (3) tentative one-step update
        let lookahead =
            diffcore::lookahead(&state.params, &grads, &weights.rho, cfg.learning_rate)?;
        // (4) fairness loss at the temporary classifier
        let bn_for_loss = if cfg.ablations.no_calibration {
            None
        } else {
            state.bn.as_ref()
        };
        let (value, fair_grad) =
            fairmetrics::fairness_loss(&lookahead, micro_sets, val_set, bn_for_loss, cfg.norm)?;
        fair_loss = value;
        if !fair_loss.is_finite() {
            return Err(Error::Divergence {
                step: state.step,
                message: format!("fairness loss {fair_loss}"),
            });
        }
        // (5) meta step on the logits
        let meta_grad = meta_weight_gradient(
            &grads,
            &weights.rho,
            &fair_grad,
            cfg.learning_rate,
            cfg.tau,
        )?;
        for (w, g) in weights.logits.iter_mut().zip(&meta_grad) {
            *w -= cfg.meta_learning_rate * g;
        }
        // (6) renormalize
        if cfg.ablations.no_normalization {
            shift_scale_normalize(&weights.logits)
        } else {
            tempered_softmax(&weights.logits, cfg.tau)?
        }
    };

    // (7) committed update
    state.params = diffcore::sgd_step(&state.params, &grads, &rho, cfg.learning_rate)?;

    // (8) feed the prediction buffer and refresh the network periodically
    if state.bn.is_some() {
        for &r in batch {
            let confidence = diffcore::forward(&state.params, &dataset.features[r])?;
            state
                .buffer
                .push((dataset.attrs[r].clone(), u8::from(confidence >= 0.5)));
        }
        if state.step % cfg.bn_update_interval == 0
            && !cfg.ablations.no_online_update
            && !state.buffer.is_empty()
        {
            let bn = state.bn.as_ref().unwrap();
            state.bn = Some(bayesnet::online_update(bn, &state.buffer, cfg.bn_prior_strength)?);
            state.buffer.clear();
        }
    }
    Ok(StepStats { task_loss, fair_loss })
}

/// One history row per epoch, evaluated on the validation set.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub step: usize,
    pub accuracy: f64,
    pub mean_tprd: f64,
    pub mean_dig: f64,
    pub fair_loss: f64,
    pub task_loss: f64,
}

pub fn history_to_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from("epoch,step,accuracy,mean_tprd,mean_dig,fair_loss,task_loss\n");
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.epoch, r.step, r.accuracy, r.mean_tprd, r.mean_dig, r.fair_loss, r.task_loss
        )
        .unwrap();
    }
    out
}

/// Fit the calibration network on the training attributes: exhaustive K2
/// search, chi-square pruning at 0.05, smoothed CPTs and a fresh uniform
/// prediction node.
pub fn fit_calibration_network(train_set: &Dataset) -> Result<BayesianNetwork> {
    let learned = bayesnet::learn_structure(&train_set.attrs, &train_set.attribute_names)?;
    let pruned = bayesnet::prune_edges(&learned, &train_set.attrs, 0.05)?;
    let fitted = bayesnet::fit_cpts(&pruned, &train_set.attrs, 1.0)?;
    bayesnet::append_prediction_node(&fitted)
}

/// Output of a full training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ClassifierParams,
    pub report: fairmetrics::FairnessReport,
    pub history: Vec<HistoryRow>,
}

/// Run the configured number of epochs, select the checkpoint with the
/// highest validation accuracy and report on the test set.
pub fn train(
    cfg: &TrainConfig,
    train_set: &Dataset,
    val_set: &Dataset,
    test_set: &Dataset,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    for (name, set) in [("validation", val_set), ("test", test_set)] {
        if set.attribute_names != train_set.attribute_names
            || set.target_name != train_set.target_name
            || set.feature_dim() != train_set.feature_dim()
        {
            return Err(Error::Config(format!("{name} set schema differs from training set")));
        }
    }
    let reweighting_off = cfg.ablations.no_reweighting || cfg.mode == Mode::Vanilla;
    let needs_fairness = !reweighting_off && cfg.mode == Mode::Bnmr;
    let micro_seed = cfg.seed.wrapping_add(0x4d49_4352);
    let mut micro_sets = if needs_fairness {
        fairmetrics::sample_micro_sets(
            val_set,
            &train_set.attribute_names,
            (cfg.fairness_val_size / 2).max(1),
            micro_seed,
        )?
    } else {
        Vec::new()
    };

    let mut dims = vec![train_set.feature_dim()];
    dims.extend_from_slice(&cfg.hidden_dims);
    dims.push(1);
    let mut state = TrainState {
        params: diffcore::init_classifier(&dims, cfg.seed)?,
        bn: if needs_fairness && !cfg.ablations.no_calibration {
            Some(fit_calibration_network(train_set)?)
        } else {
            None
        },
        buffer: Vec::new(),
        step: 0,
    };

    // separate streams: batch order is shared by every mode, the weight
    // stream is only drawn from in random mode
    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x4241_5443));
    let mut weight_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5745_4947));

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, ClassifierParams)> = None;
    let n = train_set.len();
    for epoch in 0..cfg.epochs {
        if cfg.resample_micro_sets && needs_fairness && epoch > 0 {
            micro_sets = fairmetrics::sample_micro_sets(
                val_set,
                &train_set.attribute_names,
                (cfg.fairness_val_size / 2).max(1),
                micro_seed.wrapping_add(epoch as u64),
            )?;
        }
        let mut indices: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = batch_rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        let mut task_loss_sum = 0.0;
        let mut fair_loss_last = 0.0;
        let mut batches = 0usize;
        for batch in indices.chunks(cfg.batch_size) {
            let stats = train_step(
                &mut state,
                train_set,
                batch,
                &micro_sets,
                val_set,
                cfg,
                &mut weight_rng,
            )?;
            task_loss_sum += stats.task_loss;
            fair_loss_last = stats.fair_loss;
            batches += 1;
        }
        let report = fairmetrics::evaluate_report(&state.params, val_set, None, false)?;
        history.push(HistoryRow {
            epoch,
            step: state.step,
            accuracy: report.accuracy,
            mean_tprd: report.mean_tprd(),
            mean_dig: report.mean_dig(),
            fair_loss: fair_loss_last,
            task_loss: task_loss_sum / batches.max(1) as f64,
        });
        let improved = best
            .as_ref()
            .is_none_or(|(acc, _)| report.accuracy > *acc);
        if improved {
            best = Some((report.accuracy, state.params.clone()));
        }
    }
    let (_, best_params) = best.expect("at least one epoch ran");
    let report = fairmetrics::evaluate_report(&best_params, test_set, None, false)?;
    Ok(TrainOutcome {
        params: best_params,
        report,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::{BayesianNetwork, Cpt, DagStructure};
    use crate::data::{generate_synthetic, FeatureRule, LabelRule, SyntheticSpec};
    use crate::diffcore::init_classifier;

    fn tiny_spec() -> SyntheticSpec {
        let structure = DagStructure::new(
            vec!["A".into(), "B".into()],
            vec![vec![], vec![0]],
        )
        .unwrap();
        let cpts = vec![
            Cpt { node: 0, parent_order: vec![], table: vec![0.5], unobserved_configs: vec![] },
            Cpt { node: 1, parent_order: vec![0], table: vec![0.3, 0.7], unobserved_configs: vec![] },
        ];
        SyntheticSpec {
            attribute_bn: BayesianNetwork::new(structure, cpts).unwrap(),
            label_rule: LabelRule { bias: -0.5, coefs: vec![1.2, 0.4], noise_scale: 1.0 },
            feature_rule: FeatureRule {
                dim: 3,
                shifts: vec![vec![1.0, 0.0, 0.3], vec![0.0, 1.0, -0.3]],
                sigma: 0.5,
            },
            bias_rule: None,
            target_name: "Y".into(),
        }
    }

    fn tiny_splits() -> (Dataset, Dataset, Dataset) {
        let d = generate_synthetic(&tiny_spec(), 600, 11).unwrap();
        crate::data::split_by_ratio(&d, (0.6, 0.2, 0.2), 1).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let rho = tempered_softmax(&[1.0, 1.0, 1.0, 1.0], 0.7).unwrap();
        assert!(rho.iter().all(|&r| (r - 0.25).abs() < 1e-15));
        let rho = tempered_softmax(&[1.0, 0.0], 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((rho[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((rho[1] - 1.0 / (e + 1.0)).abs() < 1e-12);
        let rho = tempered_softmax(&[1.0, 0.0], 100.0).unwrap();
        assert!((rho[0] - 0.5).abs() < 0.0025);
        assert!((rho[1] - 0.5).abs() < 0.0025);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(tempered_softmax(&[], 1.0).is_err());
        assert!(tempered_softmax(&[f64::NAN], 1.0).is_err());
        assert!(tempered_softmax(&[1.0], 0.0).is_err());
    }

    #[test]
    fn softmax_sums_to_one_and_positive() {
        let rho = tempered_softmax(&[3.0, -50.0, 0.2, 700.0, -700.0], 0.9).unwrap();
        assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // extreme gaps may underflow to exactly 0, never to NaN/negative
        assert!(rho.iter().all(|&r| (0.0..=1.0).contains(&r)));
        assert!(rho[3] > 0.999);
    }

    #[test]
    fn meta_gradient_zero_cases() {
        let p = init_classifier(&[3, 4, 1], 0).unwrap();
        let batch: Vec<(&[f64], u8)> = vec![(&[1.0, 0.0, 1.0], 1), (&[0.0, 1.0, 0.0], 0)];
        let grads: Vec<GradVector> = diffcore::per_sample_loss_and_grad(&p, &batch)
            .unwrap()
            .into_iter()
            .map(|(_, g)| g)
            .collect();
        let rho = tempered_softmax(&[0.0, 0.0], 0.9).unwrap();
        // zero fairness gradient
        let zero = GradVector::zeros(p.param_count());
        let mg = meta_weight_gradient(&grads, &rho, &zero, 0.1, 0.9).unwrap();
        assert!(mg.iter().all(|&g| g == 0.0));
        // identical per-sample gradients
        let same = vec![grads[0].clone(), grads[0].clone()];
        let fair = grads[1].clone();
        let mg = meta_weight_gradient(&same, &rho, &fair, 0.1, 0.9).unwrap();
        assert!(mg.iter().all(|&g| g.abs() < 1e-15));
    }

    #[test]
    fn meta_gradient_matches_finite_differences() {
        let (train, val, _) = tiny_splits();
        let names = train.attribute_names.clone();
        let sets = fairmetrics::sample_micro_sets(&val, &names, 5, 0).unwrap();
        let params = init_classifier(&[3, 4, 1], 3).unwrap();
        let batch: Vec<(&[f64], u8)> = (0..6)
            .map(|r| (train.features[r].as_slice(), train.labels[r]))
            .collect();
        let grads: Vec<GradVector> = diffcore::per_sample_loss_and_grad(&params, &batch)
            .unwrap()
            .into_iter()
            .map(|(_, g)| g)
            .collect();
        let alpha = 0.05;
        for tau in [0.5, 0.9, 2.0] {
            for norm in [Norm::L1, Norm::L2] {
                let w0 = vec![0.0; batch.len()];
                let loss_of = |w: &[f64]| -> f64 {
                    let rho = tempered_softmax(w, tau).unwrap();
                    let theta = diffcore::lookahead(&params, &grads, &rho, alpha).unwrap();
                    fairmetrics::fairness_loss(&theta, &sets, &val, None, norm)
                        .unwrap()
                        .0
                };
                let rho = tempered_softmax(&w0, tau).unwrap();
                let theta = diffcore::lookahead(&params, &grads, &rho, alpha).unwrap();
                let (_, fair_grad) =
                    fairmetrics::fairness_loss(&theta, &sets, &val, None, norm).unwrap();
                let analytic =
                    meta_weight_gradient(&grads, &rho, &fair_grad, alpha, tau).unwrap();
                for i in 0..w0.len() {
                    let mut up = w0.clone();
                    up[i] += 1e-5;
                    let mut dn = w0.clone();
                    dn[i] -= 1e-5;
                    let numeric = (loss_of(&up) - loss_of(&dn)) / 2e-5;
                    let denom = numeric.abs().max(1e-10);
                    assert!(
                        (analytic[i] - numeric).abs() / denom <= 1e-4
                            || (analytic[i] - numeric).abs() <= 1e-12,
                        "tau={tau} norm={norm:?} i={i}: {} vs {numeric}",
                        analytic[i]
                    );
                }
            }
        }
    }

    #[test]
    fn shift_scale_normalization() {
        let rho = shift_scale_normalize(&[-1.0, 0.0, 3.0]);
        assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(rho[0], 0.0);
        // degenerate all-equal logits fall back to uniform
        let rho = shift_scale_normalize(&[2.0, 2.0]);
        assert_eq!(rho, vec![0.5, 0.5]);
    }

    #[test]
    fn vanilla_equivalence_trajectories() {
        let (train_set, val, test) = tiny_splits();
        let base = TrainConfig {
            epochs: 2,
            hidden_dims: vec![4],
            ..TrainConfig::default()
        };
        let run = |cfg: TrainConfig| train(&cfg, &train_set, &val, &test).unwrap().params.flatten();
        let vanilla = run(TrainConfig { mode: Mode::Vanilla, ..base.clone() });
        let zero_meta = run(TrainConfig {
            mode: Mode::Bnmr,
            meta_learning_rate: 0.0,
            ..base.clone()
        });
        let no_reweight = run(TrainConfig {
            mode: Mode::Bnmr,
            ablations: Ablations { no_reweighting: true, ..Default::default() },
            ..base.clone()
        });
        assert_eq!(vanilla, zero_meta);
        assert_eq!(vanilla, no_reweight);
    }

    #[test]
    fn random_mode_is_seeded() {
        let (train_set, val, test) = tiny_splits();
        let cfg = TrainConfig {
            mode: Mode::Random,
            epochs: 2,
            hidden_dims: vec![4],
            ..TrainConfig::default()
        };
        let a = train(&cfg, &train_set, &val, &test).unwrap();
        let b = train(&cfg, &train_set, &val, &test).unwrap();
        assert_eq!(a.params.flatten(), b.params.flatten());
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn monotone_reweighting_direction() {
        // the sample whose c_j is strictly most negative gains logit mass
        let p = init_classifier(&[3, 4, 1], 5).unwrap();
        let batch: Vec<(&[f64], u8)> = vec![
            (&[1.0, 0.0, 0.0], 1),
            (&[0.0, 1.0, 0.0], 0),
            (&[0.0, 0.0, 1.0], 1),
        ];
        let grads: Vec<GradVector> = diffcore::per_sample_loss_and_grad(&p, &batch)
            .unwrap()
            .into_iter()
            .map(|(_, g)| g)
            .collect();
        let rho = tempered_softmax(&[0.0; 3], 0.9).unwrap();
        // use one of the sample grads as the fairness gradient
        let fair = grads[0].clone();
        let mg = meta_weight_gradient(&grads, &rho, &fair, 0.1, 0.9).unwrap();
        let c: Vec<f64> = grads.iter().map(|g| -0.1 * g.dot(&fair)).collect();
        let most_negative = (0..3)
            .min_by(|&a, &b| c[a].partial_cmp(&c[b]).unwrap())
            .unwrap();
        // after w -= lr * mg, logits change by -mg; the most negative c
        // must rise relative to the batch mean
        let new_logits: Vec<f64> = mg.iter().map(|g| -0.01 * g).collect();
        let mean: f64 = new_logits.iter().sum::<f64>() / 3.0;
        assert!(
            new_logits[most_negative] > mean,
            "logits {new_logits:?}, most negative c index {most_negative}"
        );
    }

    #[test]
    fn bnmr_step_matches_scripted_reference() {
        let (train_set, val, _) = tiny_splits();
        let names = train_set.attribute_names.clone();
        let sets = fairmetrics::sample_micro_sets(&val, &names, 5, 7).unwrap();
        let cfg = TrainConfig {
            hidden_dims: vec![4],
            meta_learning_rate: 0.5,
            ..TrainConfig::default()
        };
        let params = init_classifier(&[3, 4, 1], 9).unwrap();
        let mut state = TrainState {
            params: params.clone(),
            bn: None,
            buffer: Vec::new(),
            step: 0,
        };
        let batch = [0usize, 1];
        let mut weight_rng = ChaCha8Rng::seed_from_u64(0);
        train_step(&mut state, &train_set, &batch, &sets, &val, &cfg, &mut weight_rng).unwrap();

        // scripted reference of steps (1)-(7)
        let rows: Vec<(&[f64], u8)> = batch
            .iter()
            .map(|&r| (train_set.features[r].as_slice(), train_set.labels[r]))
            .collect();
        let grads: Vec<GradVector> = diffcore::per_sample_loss_and_grad(&params, &rows)
            .unwrap()
            .into_iter()
            .map(|(_, g)| g)
            .collect();
        let rho0 = tempered_softmax(&[0.0, 0.0], cfg.tau).unwrap();
        let theta_prime =
            diffcore::lookahead(&params, &grads, &rho0, cfg.learning_rate).unwrap();
        let (_, fair_grad) =
            fairmetrics::fairness_loss(&theta_prime, &sets, &val, None, cfg.norm).unwrap();
        let mg =
            meta_weight_gradient(&grads, &rho0, &fair_grad, cfg.learning_rate, cfg.tau).unwrap();
        let w: Vec<f64> = mg.iter().map(|g| -cfg.meta_learning_rate * g).collect();
        let rho1 = tempered_softmax(&w, cfg.tau).unwrap();
        let expected = diffcore::sgd_step(&params, &grads, &rho1, cfg.learning_rate).unwrap();
        assert_eq!(state.params.flatten(), expected.flatten());
    }

    #[test]
    fn history_csv_header() {
        let csv = history_to_csv(&[HistoryRow {
            epoch: 0,
            step: 10,
            accuracy: 0.9,
            mean_tprd: 0.1,
            mean_dig: 0.2,
            fair_loss: 0.01,
            task_loss: 0.5,
        }]);
        assert!(csv.starts_with("epoch,step,accuracy,mean_tprd,mean_dig,fair_loss,task_loss\n"));
        assert!(csv.contains("0,10,0.9,0.1,0.2,0.01,0.5"));
    }

    #[test]
    fn online_update_runs_in_training() {
        let (train_set, val, test) = tiny_splits();
        let cfg = TrainConfig {
            epochs: 1,
            hidden_dims: vec![4],
            bn_update_interval: 5,
            ..TrainConfig::default()
        };
        // attribute CPTs must be untouched by online updates
        let bn0 = fit_calibration_network(&train_set).unwrap();
        let outcome = train(&cfg, &train_set, &val, &test).unwrap();
        assert_eq!(outcome.history.len(), 1);
        let _ = bn0;
    }
}

//! Surrogate-trains-classifier protocol.
//!
//! A fresh small model is trained on the surrogate per seed under a step
//! decay schedule, then scored by top-1 accuracy on the held-out test set.

use crate::dataset::LabeledDataset;
use crate::error::{DistillError, Result};
use crate::nn::conv::{ConvNet, Tensor3};
use crate::nn::{cross_entropy, Activation, Mlp, Sgd};
use crate::rng::rng_from_seed;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestModel {
    /// Two-layer perceptron for vector data.
    Mlp { hidden: usize },
    /// Three-block convolutional net for images stored as flat buffers.
    Conv3 {
        in_channels: usize,
        side: usize,
        channels: [usize; 3],
    },
}

impl Default for TestModel {
    fn default() -> Self {
        TestModel::Mlp { hidden: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalProtocol {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fractions of the total step count at which the rate decays.
    pub milestones: Vec<f64>,
    pub decay_factor: f64,
    pub augment: bool,
    pub repeats: usize,
    pub test_model: TestModel,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            learning_rate: 0.01,
            epochs: 60,
            batch_size: 32,
            milestones: vec![2.0 / 3.0, 5.0 / 6.0],
            decay_factor: 0.1,
            augment: false,
            repeats: 3,
            test_model: TestModel::default(),
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(DistillError::invalid("learning_rate must be positive"));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.repeats == 0 {
            return Err(DistillError::invalid(
                "epochs, batch_size and repeats must be positive",
            ));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(DistillError::invalid("decay_factor must lie in (0, 1]"));
        }
        let mut prev = 0.0;
        for &m in &self.milestones {
            if m <= prev || m >= 1.0 {
                return Err(DistillError::invalid(
                    "milestones must be strictly increasing within (0, 1)",
                ));
            }
            prev = m;
        }
        Ok(())
    }
}

enum Model {
    Mlp(Mlp),
    Conv(ConvNet),
}

fn image_of(row: &[f64], in_channels: usize, side: usize) -> Result<Tensor3> {
    Tensor3::from_flat(in_channels, side, side, row.to_vec())
}

/// Trains one classifier and returns test top-1 accuracy in percent.
fn train_one(
    train: &LabeledDataset,
    test: &LabeledDataset,
    protocol: &EvalProtocol,
    seed: u64,
) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let classes = train.class_count;
    let mut model = match &protocol.test_model {
        TestModel::Mlp { hidden } => Model::Mlp(Mlp::init(
            &[train.dim(), *hidden, classes],
            Activation::Relu,
            &mut rng,
        )),
        TestModel::Conv3 {
            in_channels,
            side,
            channels,
        } => {
            if train.dim() != in_channels * side * side {
                return Err(DistillError::invalid(format!(
                    "feature dim {} does not match {}x{}x{} images",
                    train.dim(),
                    in_channels,
                    side,
                    side
                )));
            }
            Model::Conv(ConvNet::init(*in_channels, *side, *channels, classes, &mut rng)?)
        }
    };

    let steps_per_epoch = train.len().div_ceil(protocol.batch_size);
    let total_steps = protocol.epochs * steps_per_epoch;
    let milestone_steps: Vec<usize> = protocol
        .milestones
        .iter()
        .map(|m| (m * total_steps as f64).floor() as usize)
        .collect();

    let mut params = match &model {
        Model::Mlp(m) => {
            let mut p = Vec::new();
            m.push_params(&mut p);
            p
        }
        Model::Conv(c) => c.params_flat(),
    };
    let mut opt = Sgd::new(protocol.learning_rate, 0.9, params.len());
    let mut step = 0usize;

    for _epoch in 0..protocol.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(protocol.batch_size) {
            let decayed = milestone_steps.iter().filter(|&&m| step >= m).count();
            opt.lr = protocol.learning_rate * protocol.decay_factor.powi(decayed as i32);

            let grads = match &model {
                Model::Mlp(mlp) => {
                    let mut g = mlp.zero_grads();
                    let scale = 1.0 / chunk.len() as f64;
                    for &idx in chunk {
                        let mut x = train.features[idx].clone();
                        if protocol.augment {
                            for v in &mut x {
                                *v += 0.05 * rng.sample::<f64, _>(StandardNormal);
                            }
                        }
                        let (logits, cache) = mlp.forward_cached(&x);
                        let (_, mut dl) = cross_entropy(&logits, train.labels[idx]);
                        for d in &mut dl {
                            *d *= scale;
                        }
                        mlp.backward(&cache, &dl, &mut g);
                    }
                    let mut flat = Vec::with_capacity(params.len());
                    g.push_flat(&mut flat);
                    flat
                }
                Model::Conv(conv) => {
                    let mut images = Vec::with_capacity(chunk.len());
                    let mut labels = Vec::with_capacity(chunk.len());
                    let (in_ch, side) = match &protocol.test_model {
                        TestModel::Conv3 {
                            in_channels, side, ..
                        } => (*in_channels, *side),
                        _ => unreachable!(),
                    };
                    for &idx in chunk {
                        let mut img = image_of(&train.features[idx], in_ch, side)?;
                        if protocol.augment && rng.gen_bool(0.5) {
                            // Horizontal flip.
                            for c in 0..img.channels {
                                for y in 0..img.height {
                                    for x in 0..img.width / 2 {
                                        let other = img.width - 1 - x;
                                        let a = img.at(c, y, x);
                                        let b = img.at(c, y, other);
                                        *img.at_mut(c, y, x) = b;
                                        *img.at_mut(c, y, other) = a;
                                    }
                                }
                            }
                        }
                        images.push(img);
                        labels.push(train.labels[idx]);
                    }
                    conv.loss_and_grad(&images, &labels).1
                }
            };
            opt.step(&mut params, &grads);
            match &mut model {
                Model::Mlp(m) => m.pull_params(&mut params.iter()),
                Model::Conv(c) => c.set_params_flat(&params),
            }
            step += 1;
        }
    }

    let mut correct = 0usize;
    for (row, &label) in test.features.iter().zip(&test.labels) {
        let pred = match &model {
            Model::Mlp(m) => {
                let logits = m.forward(row);
                logits
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap()
            }
            Model::Conv(c) => {
                let (in_ch, side) = match &protocol.test_model {
                    TestModel::Conv3 {
                        in_channels, side, ..
                    } => (*in_channels, *side),
                    _ => unreachable!(),
                };
                c.predict(&image_of(row, in_ch, side)?)
            }
        };
        if pred == label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / test.len() as f64)
}

/// Trains a fresh classifier per seed and returns (mean, population std)
/// of test top-1 accuracy in percent.
pub fn train_eval_classifier(
    train: &LabeledDataset,
    test: &LabeledDataset,
    protocol: &EvalProtocol,
    seeds: &[u64],
) -> Result<(f64, f64)> {
    protocol.validate()?;
    if train.class_count != test.class_count {
        return Err(DistillError::invalid(format!(
            "class sets differ: {} vs {}",
            train.class_count, test.class_count
        )));
    }
    if train.is_empty() || test.is_empty() {
        return Err(DistillError::EmptyInput("train and test must be nonempty".into()));
    }
    if seeds.is_empty() {
        return Err(DistillError::EmptyInput("need at least one seed".into()));
    }
    let accs: Vec<f64> = seeds
        .iter()
        .map(|&s| train_one(train, test, protocol, s))
        .collect::<Result<_>>()?;
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / accs.len() as f64;
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, standard_normal_vec};

    fn two_blob_dataset(n_per: usize, seed: u64) -> LabeledDataset {
        let mut rng = derive_rng(seed, 0);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2usize {
            let center = if c == 0 { [-2.0, -2.0] } else { [2.0, 2.0] };
            for _ in 0..n_per {
                let v = standard_normal_vec(&mut rng, 2);
                features.push(vec![center[0] + 0.4 * v[0], center[1] + 0.4 * v[1]]);
                labels.push(c);
            }
        }
        LabeledDataset::new(features, labels, 2).unwrap()
    }

    #[test]
    fn separable_problem_high_accuracy() {
        let train = two_blob_dataset(30, 1);
        let test = two_blob_dataset(50, 2);
        let protocol = EvalProtocol {
            epochs: 30,
            ..Default::default()
        };
        let (mean, _) = train_eval_classifier(&train, &test, &protocol, &[0]).unwrap();
        assert!(mean >= 99.0, "accuracy {mean}");
    }

    #[test]
    fn single_seed_zero_std() {
        let train = two_blob_dataset(10, 3);
        let test = two_blob_dataset(10, 4);
        let protocol = EvalProtocol {
            epochs: 3,
            ..Default::default()
        };
        let (_, std) = train_eval_classifier(&train, &test, &protocol, &[5]).unwrap();
        assert_eq!(std, 0.0);
    }

    #[test]
    fn label_shuffle_chance_level() {
        // Balanced 10-class problem whose class feature distributions
        // coincide, so any label-independent classifier scores exactly
        // chance in expectation; shuffling the train labels removes the
        // only remaining signal (the sample assignment itself).
        let mut rng = derive_rng(10, 1);
        let classes = 10usize;
        let mut make = |n_per: usize| {
            let mut features = Vec::new();
            let mut labels = Vec::new();
            for c in 0..classes {
                for _ in 0..n_per {
                    let v = standard_normal_vec(&mut rng, 2);
                    features.push(vec![0.5 * v[0], 0.5 * v[1]]);
                    labels.push(c);
                }
            }
            (features, labels)
        };
        let (train_f, mut train_l) = make(20);
        let (test_f, test_l) = make(40);
        train_l.shuffle(&mut rng);
        let train = LabeledDataset::new(train_f, train_l, classes).unwrap();
        let test = LabeledDataset::new(test_f, test_l, classes).unwrap();
        let protocol = EvalProtocol {
            epochs: 10,
            ..Default::default()
        };
        let (mean, _) = train_eval_classifier(&train, &test, &protocol, &[0, 1, 2]).unwrap();
        assert!((mean - 10.0).abs() <= 3.0, "accuracy {mean} not near chance");
    }

    #[test]
    fn class_mismatch_rejected() {
        let a = two_blob_dataset(5, 6);
        let mut b = two_blob_dataset(5, 7);
        b.class_count = 3;
        let protocol = EvalProtocol::default();
        assert!(train_eval_classifier(&a, &b, &protocol, &[0]).is_err());
    }

    #[test]
    fn bit_reproducible_per_seed() {
        let train = two_blob_dataset(12, 8);
        let test = two_blob_dataset(12, 9);
        let protocol = EvalProtocol {
            epochs: 5,
            augment: true,
            ..Default::default()
        };
        let a = train_eval_classifier(&train, &test, &protocol, &[3, 4]).unwrap();
        let b = train_eval_classifier(&train, &test, &protocol, &[3, 4]).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
    }

    #[test]
    fn conv_model_learns_brightness() {
        // 8x8 single-channel images: class 0 dark, class 1 bright.
        let mut rng = derive_rng(11, 0);
        let mut make = |n: usize| {
            let mut features = Vec::new();
            let mut labels = Vec::new();
            for c in 0..2usize {
                let level = if c == 0 { -0.5 } else { 0.5 };
                for _ in 0..n {
                    let img: Vec<f64> = (0..64)
                        .map(|_| level + 0.1 * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    features.push(img);
                    labels.push(c);
                }
            }
            LabeledDataset::new(features, labels, 2).unwrap()
        };
        let train = make(10);
        let test = make(20);
        let protocol = EvalProtocol {
            epochs: 15,
            learning_rate: 0.05,
            test_model: TestModel::Conv3 {
                in_channels: 1,
                side: 8,
                channels: [4, 6, 8],
            },
            ..Default::default()
        };
        let (mean, _) = train_eval_classifier(&train, &test, &protocol, &[0]).unwrap();
        assert!(mean >= 95.0, "conv accuracy {mean}");
    }

    #[test]
    fn milestone_validation() {
        let protocol = EvalProtocol {
            milestones: vec![0.8, 0.5],
            ..Default::default()
        };
        assert!(protocol.validate().is_err());
    }
}

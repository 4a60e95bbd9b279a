//! Sparse binary-feature perceptron for two-class sentiment labels.
//!
//! Features are index sets: a sample "has" word `i` or it does not. The
//! model scores a sample as `bias + sum(weights[i])` over its present
//! features and predicts positive only on a strictly positive score.
//! Training uses the mistake-driven Rosenblatt rule with unit step, so a
//! model trained from zero on any data only ever holds integer values.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("feature out of range: index {index} with num_words {num_words}")]
    FeatureOutOfRange { index: u32, num_words: u32 },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("empty evaluation set")]
    EmptyEvaluationSet,
    #[error("max_epochs must be at least 1")]
    NoEpochs,
}

/// Binary sentiment label. Serialized as `0` / `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }

    fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_u8(v).ok_or_else(|| serde::de::Error::custom(format!("invalid label {v}")))
    }
}

/// A review as a set of present vocabulary ranks plus its label.
///
/// `features` is kept sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<u32>,
    pub label: Label,
}

impl LabeledSample {
    /// Builds a sample, sorting and collapsing duplicate indices.
    pub fn new(mut features: Vec<u32>, label: Label) -> Self {
        features.sort_unstable();
        features.dedup();
        LabeledSample { features, label }
    }

    pub fn with_label(&self, label: Label) -> Self {
        LabeledSample {
            features: self.features.clone(),
            label,
        }
    }

    pub fn check_range(&self, num_words: u32) -> Result<(), ModelError> {
        check_features(&self.features, num_words)
    }
}

fn check_features(features: &[u32], num_words: u32) -> Result<(), ModelError> {
    match features.iter().find(|&&i| i >= num_words) {
        Some(&index) => Err(ModelError::FeatureOutOfRange { index, num_words }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsePerceptron {
    weights: Vec<f64>,
    bias: f64,
}

impl SparsePerceptron {
    /// The all-zero model over `num_words` features.
    pub fn zeros(num_words: u32) -> Self {
        SparsePerceptron {
            weights: vec![0.0; num_words as usize],
            bias: 0.0,
        }
    }

    pub fn num_words(&self) -> u32 {
        self.weights.len() as u32
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Builds a model from explicit parameters; mostly useful in tests.
    pub fn from_parts(weights: Vec<f64>, bias: f64) -> Self {
        SparsePerceptron { weights, bias }
    }

    pub fn score(&self, features: &[u32]) -> Result<f64, ModelError> {
        check_features(features, self.num_words())?;
        Ok(self.bias + features.iter().map(|&i| self.weights[i as usize]).sum::<f64>())
    }

    /// Positive iff the score is strictly greater than zero.
    pub fn predict(&self, features: &[u32]) -> Result<Label, ModelError> {
        Ok(if self.score(features)? > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        })
    }

    /// One Rosenblatt step. Returns `true` when the sample was misclassified
    /// and the model moved.
    pub fn update(&mut self, sample: &LabeledSample) -> Result<bool, ModelError> {
        let predicted = self.predict(&sample.features)?;
        let delta = sample.label.as_f64() - predicted.as_f64();
        if delta == 0.0 {
            return Ok(false);
        }
        for &i in &sample.features {
            self.weights[i as usize] += delta;
        }
        self.bias += delta;
        Ok(true)
    }

    /// Accuracy in percent over `dataset`.
    pub fn evaluate(&self, dataset: &[LabeledSample]) -> Result<f64, ModelError> {
        if dataset.is_empty() {
            return Err(ModelError::EmptyEvaluationSet);
        }
        let mut correct = 0usize;
        for sample in dataset {
            if self.predict(&sample.features)? == sample.label {
                correct += 1;
            }
        }
        Ok(100.0 * correct as f64 / dataset.len() as f64)
    }
}

/// Batch-trains a perceptron from zero.
///
/// Each epoch visits the data in a fresh seed-determined order and stops
/// early after the first epoch without mistakes.
pub fn fit_initial(
    dataset: &[LabeledSample],
    num_words: u32,
    max_epochs: u32,
    seed: u64,
) -> Result<SparsePerceptron, ModelError> {
    if dataset.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if max_epochs == 0 {
        return Err(ModelError::NoEpochs);
    }
    for sample in dataset {
        sample.check_range(num_words)?;
    }
    let mut model = SparsePerceptron::zeros(num_words);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for _ in 0..max_epochs {
        order.shuffle(&mut rng);
        let mut mistakes = 0usize;
        for &i in &order {
            if model.update(&dataset[i])? {
                mistakes += 1;
            }
        }
        if mistakes == 0 {
            break;
        }
    }
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct ModelSnapshot {
    num_words: u32,
    bias: f64,
    weights: Vec<(u32, f64)>,
}

impl Serialize for SparsePerceptron {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ModelSnapshot {
            num_words: self.num_words(),
            bias: self.bias,
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, &w)| w != 0.0)
                .map(|(i, &w)| (i as u32, w))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparsePerceptron {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let snap = ModelSnapshot::deserialize(d)?;
        let mut model = SparsePerceptron::zeros(snap.num_words);
        model.bias = snap.bias;
        for (i, w) in snap.weights {
            let slot = model.weights.get_mut(i as usize).ok_or_else(|| {
                serde::de::Error::custom(format!("weight index {i} >= num_words {}", snap.num_words))
            })?;
            *slot = w;
        }
        Ok(model)
    }
}

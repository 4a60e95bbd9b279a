//! Corpus ingestion and featurization.
//!
//! Two on-disk formats are understood, both one sample per line with
//! `#` comments and blank lines ignored:
//!
//! * indexed: `<label>\t<i1,i2,...>` where index `i` is the `i`-th most
//!   frequent word of the corpus. Loading with `num_words = n` drops every
//!   index `>= n`, which is how a vocabulary size sweep is done without
//!   re-tokenizing.
//! * raw: `<label>\t<free text>`, tokenized by lowercasing and splitting on
//!   any run of non-alphanumeric characters.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Label, LabeledSample};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("vocabulary underflow: {distinct} distinct tokens, num_words {num_words}")]
    VocabularyUnderflow { distinct: usize, num_words: u32 },
    #[error("parse error at line {0}")]
    Parse(usize),
    #[error("invalid label at line {0}")]
    InvalidLabel(usize),
    #[error("degenerate split: {0} part is empty")]
    DegenerateSplit(&'static str),
    #[error("invalid split fraction: {0}")]
    InvalidFraction(&'static str),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The `num_words` most frequent tokens of a corpus, ranked from 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    rank_of: HashMap<String, u32>,
    num_words: u32,
}

impl Vocabulary {
    pub fn rank(&self, token: &str) -> Option<u32> {
        self.rank_of.get(token).copied()
    }

    pub fn num_words(&self) -> u32 {
        self.num_words
    }

    pub fn len(&self) -> usize {
        self.rank_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank_of.is_empty()
    }
}

/// Ranks tokens by descending count; equal counts keep first-occurrence order.
pub fn build_vocabulary<D, T>(corpus: D, num_words: u32) -> Result<Vocabulary, DataError>
where
    D: IntoIterator,
    D::Item: IntoIterator<Item = T>,
    T: AsRef<str>,
{
    // token -> (count, first occurrence)
    let mut stats: HashMap<String, (u64, usize)> = HashMap::new();
    let mut position = 0usize;
    for doc in corpus {
        for token in doc {
            let entry = stats
                .entry(token.as_ref().to_owned())
                .or_insert((0, position));
            entry.0 += 1;
            position += 1;
        }
    }
    if num_words == 0 || stats.len() < num_words as usize {
        return Err(DataError::VocabularyUnderflow {
            distinct: stats.len(),
            num_words,
        });
    }
    let mut ranked: Vec<(String, u64, usize)> =
        stats.into_iter().map(|(t, (c, f))| (t, c, f)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let rank_of = ranked
        .into_iter()
        .take(num_words as usize)
        .enumerate()
        .map(|(rank, (token, _, _))| (token, rank as u32))
        .collect();
    Ok(Vocabulary { rank_of, num_words })
}

/// Sorted, duplicate-free ranks of in-vocabulary tokens.
pub fn featurize<T: AsRef<str>>(tokens: &[T], vocab: &Vocabulary) -> Vec<u32> {
    let mut out: Vec<u32> = tokens.iter().filter_map(|t| vocab.rank(t.as_ref())).collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn read(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Yields `(line_number, label, rest)` for every data line.
fn data_lines(text: &str) -> impl Iterator<Item = Result<(usize, Label, &str), DataError>> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let n = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            return None;
        }
        let Some((label, rest)) = line.split_once('\t') else {
            return Some(Err(DataError::Parse(n)));
        };
        let label = match label.trim().parse::<u8>() {
            Ok(v) => v,
            Err(_) => return Some(Err(DataError::Parse(n))),
        };
        Some(
            Label::from_u8(label)
                .map(|l| (n, l, rest))
                .ok_or(DataError::InvalidLabel(n)),
        )
    })
}

pub fn parse_indexed(text: &str, num_words: u32) -> Result<Vec<LabeledSample>, DataError> {
    data_lines(text)
        .map(|line| {
            let (n, label, rest) = line?;
            let mut features = Vec::new();
            for field in rest.split(',').map(str::trim).filter(|f| !f.is_empty()) {
                let idx: u32 = field.parse().map_err(|_| DataError::Parse(n))?;
                if idx < num_words {
                    features.push(idx);
                }
            }
            Ok(LabeledSample::new(features, label))
        })
        .collect()
}

pub fn load_indexed(path: &Path, num_words: u32) -> Result<Vec<LabeledSample>, DataError> {
    parse_indexed(&read(path)?, num_words)
}

pub fn format_indexed(samples: &[LabeledSample]) -> String {
    let mut out = String::new();
    for s in samples {
        let idx: Vec<String> = s.features.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{}\t{}", s.label.as_u8(), idx.join(","));
    }
    out
}

pub fn save_indexed(path: &Path, samples: &[LabeledSample]) -> Result<(), DataError> {
    fs::write(path, format_indexed(samples)).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Labeled token sequences from a raw-text corpus.
pub fn load_raw_documents(path: &Path) -> Result<Vec<(Label, Vec<String>)>, DataError> {
    let text = read(path)?;
    data_lines(&text)
        .map(|line| line.map(|(_, label, rest)| (label, tokenize(rest))))
        .collect()
}

/// Featurizes raw documents against `vocab`.
pub fn featurize_documents(
    docs: &[(Label, Vec<String>)],
    vocab: &Vocabulary,
) -> Vec<LabeledSample> {
    docs.iter()
        .map(|(label, tokens)| LabeledSample {
            features: featurize(tokens, vocab),
            label: *label,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub initial_train: Vec<LabeledSample>,
    pub submission_pool: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Shuffles, carves off the test part, then splits the rest into the
/// initial training set and the submission pool.
pub fn split(
    dataset: &[LabeledSample],
    train_size: f64,
    test_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit, DataError> {
    if !(train_size > 0.0 && train_size < 1.0) {
        return Err(DataError::InvalidFraction("train_size"));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(DataError::InvalidFraction("test_fraction"));
    }
    let mut shuffled = dataset.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n_test = round_half_up(test_fraction * shuffled.len() as f64);
    let rest = shuffled.split_off(n_test);
    let test = shuffled;
    let n_train = round_half_up(train_size * rest.len() as f64);
    let mut initial_train = rest;
    let submission_pool = initial_train.split_off(n_train.min(initial_train.len()));

    if test_fraction > 0.0 && test.is_empty() {
        return Err(DataError::DegenerateSplit("test"));
    }
    if initial_train.is_empty() {
        return Err(DataError::DegenerateSplit("initial_train"));
    }
    if submission_pool.is_empty() {
        return Err(DataError::DegenerateSplit("submission_pool"));
    }
    Ok(DatasetSplit {
        initial_train,
        submission_pool,
        test,
    })
}

/// Upper bound on how many features a synthetic sample carries.
const SYNTH_MAX_FEATURES: u32 = 100;
/// Chance that a drawn index lands in the half that votes for the sample's
/// intended label.
const SYNTH_POLARITY: f64 = 0.65;

/// Deterministic, exactly linearly separable stand-in corpus.
pub fn synthesize(n: usize, num_words: u32, seed: u64) -> Vec<LabeledSample> {
    assert!(num_words >= 4, "synthesize needs num_words >= 4");
    let half = num_words / 2;
    let upper = num_words - half;
    let max_k = SYNTH_MAX_FEATURES.min(half).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let target = if i % 2 == 0 { Label::Positive } else { Label::Negative };
        loop {
            let k = rng.random_range(1..=max_k) as usize;
            let mut features: Vec<u32> = Vec::with_capacity(k);
            while features.len() < k {
                let lower_side = rng.random_bool(SYNTH_POLARITY) == (target == Label::Positive);
                let f = if lower_side {
                    rng.random_range(0..half)
                } else {
                    half + rng.random_range(0..upper)
                };
                if !features.contains(&f) {
                    features.push(f);
                }
            }
            let low = features.iter().filter(|&&f| f < half).count();
            let high = features.len() - low;
            if low == high {
                continue;
            }
            let label = if low > high { Label::Positive } else { Label::Negative };
            if label == target {
                out.push(LabeledSample::new(features, label));
                break;
            }
        }
    }
    out
}

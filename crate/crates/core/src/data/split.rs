use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, NewsItem};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Chronological,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub mode: SplitMode,
    /// Shuffle seed for [`SplitMode::Random`].
    #[serde(default)]
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            val_fraction: 0.1,
            test_fraction: 0.2,
            mode: SplitMode::Chronological,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, mode: SplitMode) -> Result<Self> {
        let spec = SplitSpec {
            train_fraction: train,
            val_fraction: val,
            test_fraction: test,
            mode,
            seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let f = [self.train_fraction, self.val_fraction, self.test_fraction];
        if f.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidSplit(format!("fractions must be positive, got {f:?}")));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Sizes of (train, val, test). Train and validation round down; test
    /// takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let cut = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
        let train = cut(self.train_fraction).min(n);
        let val = cut(self.val_fraction).min(n - train);
        (train, val, n - train - val)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Corpus,
    pub val: Corpus,
    pub test: Corpus,
}

/// Partition a corpus into train/validation/test.
///
/// Chronological mode sorts by `(timestamp, id)` ascending before cutting,
/// so every training timestamp precedes every validation timestamp, which
/// precedes every test timestamp.
pub fn chronological_split(corpus: &Corpus, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let mut items: Vec<NewsItem> = corpus.items.clone();
    match spec.mode {
        SplitMode::Chronological => {
            if let Some(it) = items.iter().find(|it| it.timestamp.is_none()) {
                return Err(Error::MissingTimestamp(it.id.clone()));
            }
            items.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
        }
        SplitMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            items.shuffle(&mut rng);
        }
    }
    let (n_train, n_val, _) = spec.sizes(items.len());
    let test = items.split_off(n_train + n_val);
    let val = items.split_off(n_train);
    let name = |suffix: &str| format!("{}-{suffix}", corpus.name);
    Ok(Splits {
        train: Corpus { name: name("train"), items },
        val: Corpus { name: name("val"), items: val },
        test: Corpus { name: name("test"), items: test },
    })
}

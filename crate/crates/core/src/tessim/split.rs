use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Train fraction used by [`SplitStrategy::Shuffled`].
const SHUFFLED_TRAIN_FRACTION: f64 = 0.6;

/// How a dataset is divided into training and test parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitStrategy {
    /// First 300 records train, following 200 test. Needs exactly 500 records.
    Sequential,
    /// Records with `round mod 5 == 1` train, the rest test.
    EveryFifth,
    /// Random 60/40 split.
    Shuffled { seed: u64 },
    /// Random split with `floor(train_fraction * n)` training records.
    Custom { train_fraction: f64, seed: u64 },
}

impl SplitStrategy {
    /// Splits whose train/test boundary follows the round order.
    pub fn is_ordered(&self) -> bool {
        matches!(self, SplitStrategy::Sequential | SplitStrategy::EveryFifth)
    }

    pub fn name(&self) -> String {
        match self {
            SplitStrategy::Sequential => "sequential_300_200".into(),
            SplitStrategy::EveryFifth => "every_fifth".into(),
            SplitStrategy::Shuffled { seed } => format!("shuffled(seed={seed})"),
            SplitStrategy::Custom {
                train_fraction,
                seed,
            } => format!("custom(train_fraction={train_fraction}, seed={seed})"),
        }
    }

    /// Per-record train membership for `ds`.
    fn train_mask(&self, ds: &Dataset) -> Result<Vec<bool>> {
        let n = ds.len();
        match *self {
            SplitStrategy::Sequential => {
                if n != 500 {
                    return Err(Error::domain(format!(
                        "sequential_300_200 split requires exactly 500 records, got {n}"
                    )));
                }
                Ok((0..n).map(|i| i < 300).collect())
            }
            SplitStrategy::EveryFifth => Ok(ds.records.iter().map(|r| r.round % 5 == 1).collect()),
            SplitStrategy::Shuffled { seed } => random_mask(n, SHUFFLED_TRAIN_FRACTION, seed),
            SplitStrategy::Custom {
                train_fraction,
                seed,
            } => random_mask(n, train_fraction, seed),
        }
    }
}

impl std::str::FromStr for SplitStrategy {
    type Err = Error;

    /// Accepts `sequential`, `every-fifth`, `shuffled[:SEED]`, `custom:FRACTION[:SEED]`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let seed_at = |i: usize| -> Result<u64> {
            parts.get(i).map_or(Ok(0), |v| {
                v.parse()
                    .map_err(|_| Error::domain(format!("bad split seed {v:?}")))
            })
        };
        match parts[0] {
            "sequential" | "sequential_300_200" => Ok(SplitStrategy::Sequential),
            "every-fifth" | "every_fifth" => Ok(SplitStrategy::EveryFifth),
            "shuffled" => Ok(SplitStrategy::Shuffled { seed: seed_at(1)? }),
            "custom" => {
                let fraction = parts
                    .get(1)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::domain("custom split needs custom:FRACTION[:SEED]"))?;
                Ok(SplitStrategy::Custom {
                    train_fraction: fraction,
                    seed: seed_at(2)?,
                })
            }
            other => Err(Error::domain(format!(
                "unknown split {other:?}; expected sequential, every-fifth, shuffled[:SEED] or custom:FRACTION[:SEED]"
            ))),
        }
    }
}

fn random_mask(n: usize, train_fraction: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::domain(format!(
            "train_fraction must lie in [0, 1], got {train_fraction}"
        )));
    }
    let n_train = (train_fraction * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    SimRng::from_seed(seed).shuffle(&mut order);
    let mut mask = vec![false; n];
    for &i in &order[..n_train] {
        mask[i] = true;
    }
    Ok(mask)
}

/// Divides `ds` into `(train, test)`, preserving record order in each part.
pub fn split_dataset(ds: &Dataset, strategy: &SplitStrategy) -> Result<(Dataset, Dataset)> {
    let mask = strategy.train_mask(ds)?;
    let (train, test): (Vec<_>, Vec<_>) = ds
        .records
        .iter()
        .zip(mask)
        .partition(|(_, is_train)| *is_train);
    let unzip =
        |part: Vec<(&super::Record, bool)>| part.into_iter().map(|(r, _)| r.clone()).collect();
    Ok((ds.with_records(unzip(train)), ds.with_records(unzip(test))))
}

/// How many test records of `later` were training records of `earlier`.
pub fn split_overlap(
    ds: &Dataset,
    earlier: &SplitStrategy,
    later: &SplitStrategy,
) -> Result<usize> {
    let trained = earlier.train_mask(ds)?;
    let later_train = later.train_mask(ds)?;
    Ok(trained
        .iter()
        .zip(&later_train)
        .filter(|(was_train, is_train)| **was_train && !**is_train)
        .count())
}

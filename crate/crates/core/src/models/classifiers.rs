use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ModelState;
use crate::error::{Error, Result};
use crate::tessim::{Dataset, FlipOutcome, TeaImage};

/// Anything that calls a coin face from a cup reading.
pub trait Classifier {
    fn classify(&self, image: &TeaImage) -> Result<FlipOutcome>;
}

impl ModelState {
    /// Heads iff the output probability exceeds 0.5; exactly 0.5 is tails.
    pub fn predict(&self, image: &TeaImage) -> Result<FlipOutcome> {
        Ok(if self.probability(image)? > 0.5 {
            FlipOutcome::Heads
        } else {
            FlipOutcome::Tails
        })
    }
}

impl Classifier for ModelState {
    fn classify(&self, image: &TeaImage) -> Result<FlipOutcome> {
        self.predict(image)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: u64,
    pub correct: u64,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn from_counts(correct: u64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("accuracy is undefined for zero cases"));
        }
        if correct > n {
            return Err(Error::domain(format!("{correct} correct out of {n} cases")));
        }
        Ok(Self {
            n,
            correct,
            accuracy: correct as f64 / n as f64,
        })
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}/{} correct, accuracy {:.4}",
            self.correct, self.n, self.accuracy
        )
    }
}

/// Scores `classifier` on every record of `ds`.
pub fn evaluate<C: Classifier + Sync + ?Sized>(classifier: &C, ds: &Dataset) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::domain("cannot evaluate on an empty dataset"));
    }
    let correct = ds
        .records
        .par_iter()
        .map(|rec| Ok(u64::from(classifier.classify(&rec.image)? == rec.label)))
        .sum::<Result<u64>>()?;
    EvalReport::from_counts(correct, ds.len() as u64)
}

fn majority(heads: u64, tails: u64) -> FlipOutcome {
    if heads > tails {
        FlipOutcome::Heads
    } else {
        FlipOutcome::Tails
    }
}

/// Lookup table from tea-count parity to the label seen most often with it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityOracle {
    /// `[label for parity 0, label for parity 1]`; `None` if never seen.
    pub table: [Option<FlipOutcome>; 2],
    pub fallback: FlipOutcome,
}

impl ParityOracle {
    pub fn fit(train_set: &Dataset) -> Result<Self> {
        if train_set.is_empty() {
            return Err(Error::domain(
                "parity oracle needs a non-empty training set",
            ));
        }
        // counts[parity][label]
        let mut counts = [[0u64; 2]; 2];
        for rec in &train_set.records {
            counts[usize::from(rec.image.parity())][usize::from(rec.label.as_bit())] += 1;
        }
        let table =
            counts.map(|[tails, heads]| (tails + heads > 0).then(|| majority(heads, tails)));
        let fallback = majority(counts[0][1] + counts[1][1], counts[0][0] + counts[1][0]);
        Ok(Self { table, fallback })
    }

    pub fn predict(&self, image: &TeaImage) -> FlipOutcome {
        self.table[usize::from(image.parity())].unwrap_or(self.fallback)
    }
}

impl Classifier for ParityOracle {
    fn classify(&self, image: &TeaImage) -> Result<FlipOutcome> {
        Ok(self.predict(image))
    }
}

/// Constant prediction of the most frequent training label; ties go to tails.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityBaseline {
    pub label: FlipOutcome,
}

impl MajorityBaseline {
    pub fn fit(train_set: &Dataset) -> Result<Self> {
        if train_set.is_empty() {
            return Err(Error::domain(
                "majority baseline needs a non-empty training set",
            ));
        }
        let heads = train_set
            .records
            .iter()
            .filter(|r| r.label == FlipOutcome::Heads)
            .count() as u64;
        Ok(Self {
            label: majority(heads, train_set.len() as u64 - heads),
        })
    }
}

impl Classifier for MajorityBaseline {
    fn classify(&self, _image: &TeaImage) -> Result<FlipOutcome> {
        Ok(self.label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Architecture, FeatureScheme};
    use crate::tessim::{generate_dataset, split_dataset, SimConfig, SplitStrategy};

    fn dataset(k: usize, rounds: u64) -> Dataset {
        generate_dataset(&SimConfig {
            width: 12,
            height: 12,
            k_change: k,
            rounds,
            ..SimConfig::default()
        })
        .unwrap()
    }

    /// Looks every image up in the dataset it was built from.
    struct Perfect(std::collections::HashMap<TeaImage, FlipOutcome>);
    impl Perfect {
        fn of(ds: &Dataset) -> Self {
            Perfect(
                ds.records
                    .iter()
                    .map(|r| (r.image.clone(), r.label))
                    .collect(),
            )
        }
    }
    impl Classifier for Perfect {
        fn classify(&self, image: &TeaImage) -> Result<FlipOutcome> {
            Ok(self.0[image])
        }
    }

    #[test]
    fn perfect_predictor_scores_one() {
        let ds = dataset(3, 50);
        assert_eq!(evaluate(&Perfect::of(&ds), &ds).unwrap().accuracy, 1.0);
    }

    #[test]
    fn zero_model_predicts_tails() {
        let ds = dataset(3, 4);
        let m =
            ModelState::zeros(Architecture::Linear, FeatureScheme::CountParity, 12, 12, 0).unwrap();
        for rec in &ds.records {
            assert_eq!(m.predict(&rec.image).unwrap(), FlipOutcome::Tails);
        }
    }

    #[test]
    fn predict_checks_dimensions() {
        let ds = dataset(3, 1);
        let m = ModelState::zeros(Architecture::Linear, FeatureScheme::Parity, 4, 4, 0).unwrap();
        assert!(m.predict(&ds.records[0].image).is_err());
    }

    #[test]
    fn accuracy_arithmetic() {
        let r = EvalReport::from_counts(287, 400).unwrap();
        assert_eq!(r.accuracy, 0.7175);
        assert_eq!(r.to_string(), "287/400 correct, accuracy 0.7175");
        assert!(EvalReport::from_counts(0, 0).is_err());
        assert!(EvalReport::from_counts(5, 4).is_err());
    }

    #[test]
    fn evaluate_empty_is_an_error() {
        let ds = dataset(3, 0);
        assert!(evaluate(&Perfect::of(&ds), &ds).is_err());
    }

    #[test]
    fn majority_rules() {
        let ds = dataset(3, 200);
        let base = MajorityBaseline::fit(&ds).unwrap();
        assert_eq!(base.label, FlipOutcome::Tails);
        assert_eq!(evaluate(&base, &ds).unwrap().accuracy, 0.5);

        let heads_only = ds.with_records(
            ds.records
                .iter()
                .filter(|r| r.round % 2 == 1)
                .cloned()
                .collect(),
        );
        assert_eq!(
            MajorityBaseline::fit(&heads_only).unwrap().label,
            FlipOutcome::Heads
        );
    }

    #[test]
    fn parity_oracle_is_exact_for_odd_k() {
        let ds = dataset(5, 500);
        let (train, test) = split_dataset(&ds, &SplitStrategy::Sequential).unwrap();
        let oracle = ParityOracle::fit(&train).unwrap();
        let report = evaluate(&oracle, &test).unwrap();
        assert_eq!(report.correct, 200);
    }

    #[test]
    fn parity_oracle_falls_back_on_unseen_parity() {
        let ds = dataset(4, 20);
        let oracle = ParityOracle::fit(&ds).unwrap();
        let seen = usize::from(ds.records[0].image.parity());
        assert!(oracle.table[seen].is_some());
        assert!(oracle.table[1 - seen].is_none());
        assert_eq!(oracle.fallback, FlipOutcome::Tails);
        assert!(ParityOracle::fit(&dataset(4, 0)).is_err());
    }
}

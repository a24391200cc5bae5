//! Label-leak diagnostics: parity/label contingency, mutual information,
//! honest relabeling and permutation tests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{
    evaluate, train, Architecture, EvalReport, FeatureScheme, MajorityBaseline, ModelState,
    ParityOracle, TrainConfig,
};
use crate::rng::{derive_seed, SimRng};
use crate::stats::{binomial_test, BinomialResult};
use crate::tessim::{split_dataset, split_overlap, Dataset, FlipOutcome, SplitStrategy};

pub const DEFAULT_LEAK_THRESHOLD_BITS: f64 = 0.5;
pub const DEFAULT_NO_SIGNAL_THRESHOLD_BITS: f64 = 0.05;
pub const MIN_PERMUTATIONS: usize = 19;

/// `counts[parity][label]`, label 0 = tails, 1 = heads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: [[u64; 2]; 2],
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn parity_contingency(ds: &Dataset) -> Result<ContingencyTable> {
    if ds.is_empty() {
        return Err(Error::domain("contingency table needs a non-empty dataset"));
    }
    let mut counts = [[0u64; 2]; 2];
    for rec in &ds.records {
        counts[usize::from(rec.image.parity())][usize::from(rec.label.as_bit())] += 1;
    }
    Ok(ContingencyTable { counts })
}

/// Plug-in mutual information in bits, with `0 · log 0 = 0`.
pub fn mutual_information(table: &ContingencyTable) -> Result<f64> {
    let total = table.total();
    if total == 0 {
        return Err(Error::domain("mutual information of an empty table"));
    }
    let n = total as f64;
    let rows = table.counts.map(|r| (r[0] + r[1]) as f64);
    let cols = [0, 1].map(|j| (table.counts[0][j] + table.counts[1][j]) as f64);
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (rows[i] * cols[j])).log2();
            }
        }
    }
    // Rounding can leave tiny negatives for independent tables.
    Ok(mi.clamp(0.0, 1.0))
}

/// Replaces every label with an independent fair coin; images are untouched.
pub fn honest_relabel(ds: &Dataset, seed: u64) -> Dataset {
    let mut rng = SimRng::from_seed(seed);
    let mut out = ds.clone();
    for rec in &mut out.records {
        rec.label = if rng.bit() {
            FlipOutcome::Heads
        } else {
            FlipOutcome::Tails
        };
    }
    out.relabeled = true;
    out
}

/// A classifier recipe that can be refitted on permuted data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    ParityOracle,
    Majority,
    Model {
        architecture: Architecture,
        scheme: FeatureScheme,
        model_seed: u64,
        train: TrainConfig,
    },
}

impl ClassifierSpec {
    /// Fits on `train_set`, scores on `test_set`.
    pub fn fit_and_score(&self, train_set: &Dataset, test_set: &Dataset) -> Result<EvalReport> {
        match self {
            ClassifierSpec::ParityOracle => evaluate(&ParityOracle::fit(train_set)?, test_set),
            ClassifierSpec::Majority => evaluate(&MajorityBaseline::fit(train_set)?, test_set),
            ClassifierSpec::Model {
                architecture,
                scheme,
                model_seed,
                train: cfg,
            } => {
                let cfg0 = &train_set.config;
                let model =
                    ModelState::new(*architecture, *scheme, cfg0.width, cfg0.height, *model_seed)?;
                let fitted = train(&model, train_set, cfg).map_err(|e| {
                    Error::domain(format!("training {architecture} on {}: {e}", scheme.name()))
                })?;
                evaluate(&fitted.model, test_set)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub observed: EvalReport,
    pub n_perm: usize,
    /// Replicas whose accuracy reached the observed one.
    pub at_least_observed: usize,
    pub p_value: f64,
}

/// Permutation test of test accuracy.
///
/// Each replica shuffles the labels over the whole dataset before splitting,
/// using its own stream seeded by `derive_seed(seed, replica)`, so the
/// result does not depend on how replicas are scheduled.
pub fn permutation_test(
    ds: &Dataset,
    spec: &ClassifierSpec,
    split: &SplitStrategy,
    n_perm: usize,
    seed: u64,
) -> Result<PermutationResult> {
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::domain(format!(
            "permutation test needs at least {MIN_PERMUTATIONS} replicas, got {n_perm}"
        )));
    }
    let (train_set, test_set) = split_dataset(ds, split)?;
    let observed = spec.fit_and_score(&train_set, &test_set)?;
    let labels: Vec<FlipOutcome> = ds.records.iter().map(|r| r.label).collect();

    let at_least_observed = (0..n_perm as u64)
        .into_par_iter()
        .map(|replica| -> Result<usize> {
            let mut rng = SimRng::from_seed(derive_seed(seed, replica));
            let mut permuted = labels.clone();
            rng.shuffle(&mut permuted);
            let mut shuffled = ds.clone();
            for (rec, label) in shuffled.records.iter_mut().zip(permuted) {
                rec.label = label;
            }
            shuffled.relabeled = true;
            let (tr, te) = split_dataset(&shuffled, split)?;
            let acc = spec
                .fit_and_score(&tr, &te)
                .map_err(|e| Error::domain(format!("permutation replica {replica}: {e}")))?;
            Ok(usize::from(acc.accuracy >= observed.accuracy))
        })
        .sum::<Result<usize>>()?;

    Ok(PermutationResult {
        observed,
        n_perm,
        at_least_observed,
        p_value: (1 + at_least_observed) as f64 / (n_perm + 1) as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Finding {
    ParityLeak,
    NoParitySignal,
    DeterministicLabels,
    SequentialSplitWarning,
    TrainTestOverlapWarning,
}

impl Finding {
    pub fn code(self) -> &'static str {
        match self {
            Finding::ParityLeak => "PARITY_LEAK",
            Finding::NoParitySignal => "NO_PARITY_SIGNAL",
            Finding::DeterministicLabels => "DETERMINISTIC_LABELS",
            Finding::SequentialSplitWarning => "SEQUENTIAL_SPLIT_WARNING",
            Finding::TrainTestOverlapWarning => "TRAIN_TEST_OVERLAP_WARNING",
        }
    }
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub split: SplitStrategy,
    /// A second experiment on the same data; its test part is checked
    /// against `split`'s training part.
    pub compare_with: Option<SplitStrategy>,
    pub classifier: ClassifierSpec,
    pub n_perm: usize,
    pub seed: u64,
    pub leak_threshold_bits: f64,
    pub no_signal_threshold_bits: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            split: SplitStrategy::Sequential,
            compare_with: None,
            classifier: ClassifierSpec::ParityOracle,
            n_perm: 99,
            seed: 42,
            leak_threshold_bits: DEFAULT_LEAK_THRESHOLD_BITS,
            no_signal_threshold_bits: DEFAULT_NO_SIGNAL_THRESHOLD_BITS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub table: ContingencyTable,
    pub mi_bits: f64,
    pub perm_p: f64,
    pub honest_accuracy: EvalReport,
    pub findings: Vec<Finding>,
    pub observed_accuracy: EvalReport,
    /// Exact one-sided binomial test of `observed_accuracy` against 0.5.
    pub binomial: BinomialResult,
    pub split: String,
    pub overlap: Option<usize>,
}

pub fn audit(ds: &Dataset, options: &AuditOptions) -> Result<AuditReport> {
    let table = parity_contingency(ds)?;
    let mi_bits = mutual_information(&table)?;
    let perm = permutation_test(
        ds,
        &options.classifier,
        &options.split,
        options.n_perm,
        options.seed,
    )?;

    let honest = honest_relabel(ds, derive_seed(options.seed, u64::MAX));
    let (tr, te) = split_dataset(&honest, &options.split)?;
    let honest_accuracy = options.classifier.fit_and_score(&tr, &te)?;

    let overlap = options
        .compare_with
        .map(|later| split_overlap(ds, &options.split, &later))
        .transpose()?;

    let mut findings = Vec::new();
    if mi_bits > options.leak_threshold_bits {
        findings.push(Finding::ParityLeak);
    }
    if mi_bits < options.no_signal_threshold_bits {
        findings.push(Finding::NoParitySignal);
    }
    if !ds.relabeled && ds.labels_follow_coin() {
        findings.push(Finding::DeterministicLabels);
    }
    if options.split.is_ordered() || options.compare_with.is_some_and(|s| s.is_ordered()) {
        findings.push(Finding::SequentialSplitWarning);
    }
    if overlap.is_some_and(|n| n > 0) {
        findings.push(Finding::TrainTestOverlapWarning);
    }

    Ok(AuditReport {
        table,
        mi_bits,
        perm_p: perm.p_value,
        honest_accuracy,
        findings,
        binomial: binomial_test(perm.observed.correct, perm.observed.n, 0.5)?,
        observed_accuracy: perm.observed,
        split: options.split.name(),
        overlap,
    })
}

impl AuditReport {
    pub fn has(&self, finding: Finding) -> bool {
        self.findings.contains(&finding)
    }

    pub fn to_text(&self) -> String {
        let c = &self.table.counts;
        let mut out = String::new();
        out.push_str("parity x label         tails   heads\n");
        out.push_str(&format!(
            "  even tea count     {:>7} {:>7}\n",
            c[0][0], c[0][1]
        ));
        out.push_str(&format!(
            "  odd tea count      {:>7} {:>7}\n",
            c[1][0], c[1][1]
        ));
        out.push_str(&format!(
            "mutual information     {:.6} bits\n",
            self.mi_bits
        ));
        out.push_str(&format!("split                  {}\n", self.split));
        out.push_str(&format!(
            "test accuracy          {}\n",
            self.observed_accuracy
        ));
        out.push_str(&format!(
            "exact binomial p       {:.6e}\n",
            self.binomial.p_value
        ));
        out.push_str(&format!("permutation p          {:.6}\n", self.perm_p));
        out.push_str(&format!(
            "honest-label accuracy  {}\n",
            self.honest_accuracy
        ));
        if let Some(n) = self.overlap {
            out.push_str(&format!("train/test overlap     {n} records\n"));
        }
        out.push_str("findings:\n");
        if self.findings.is_empty() {
            out.push_str("  (none)\n");
        }
        for f in &self.findings {
            out.push_str(&format!("  {f}\n"));
        }
        out
    }
}

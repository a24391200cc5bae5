//! Exact binomial tail probabilities, Wilson intervals and accuracy-gain
//! arithmetic for comparing classifiers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::models::EvalReport;

/// Accuracy figures as claimed for the three networks, `(correct, n)`.
pub mod claimed {
    pub const YOLOV5: (u64, u64) = (106, 200);
    pub const RESNET34: (u64, u64) = (98, 200);
    pub const SMILEYNET: (u64, u64) = (287, 400);
    pub const YOLOV5_GAIN_PERCENT: f64 = 35.38;
    pub const RESNET34_GAIN_PERCENT: f64 = 46.43;
    pub const DATA_REDUCTION_PERCENT: f64 = 66.0;
    pub const TRAIN_SIZE_BASELINES: u64 = 300;
    pub const TRAIN_SIZE_SMILEYNET: u64 = 100;
}

/// `ln(n!) - ((n + ½) ln n - n + ½ ln 2π)` for n = 0..=15.
#[allow(clippy::excessive_precision)]
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258,
    0.041_340_695_955_409_294,
    0.027_677_925_684_998_339,
    0.020_790_672_103_765_093,
    0.016_644_691_189_821_192,
    0.013_876_128_823_070_748,
    0.011_896_709_945_891_770,
    0.010_411_265_261_972_096,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_530,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

/// Stirling-series error term for integer `n`.
fn stirlerr(n: u64) -> f64 {
    if n <= 15 {
        return STIRLERR_TABLE[n as usize];
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/m) + m - x`, computed without cancellation near x = m.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let next = s + ej / f64::from(2 * j + 1);
            if next == s {
                return next;
            }
            s = next;
        }
    }
    x * (x / m).ln() + m - x
}

/// `ln P(X = k)` for `X ~ Binomial(n, p)`, via the saddle-point expansion
/// (Stirling error terms and deviances) instead of differencing log-gammas.
pub fn ln_binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if k > n {
        return f64::NEG_INFINITY;
    }
    let nf = n as f64;
    if k == 0 {
        return if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
    }
    if k == n {
        return if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
    }
    let kf = k as f64;
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = (2.0 * std::f64::consts::PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

fn check_binomial(n: u64, k: u64, p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "success probability must lie in (0, 1), got {p}"
        )));
    }
    if k > n {
        return Err(Error::domain(format!("k = {k} exceeds n = {n}")));
    }
    Ok(())
}

/// Sums the pmf from `start` outward (up or down) until the terms stop
/// mattering; the pmf must be decreasing along the walk.
fn sum_decreasing_terms(n: u64, start: u64, p: f64, upward: bool) -> f64 {
    let first = ln_binomial_pmf(n, start, p);
    if first == f64::NEG_INFINITY {
        return 0.0;
    }
    // Scale by the first (largest) term and compensate the running sum.
    let mut sum = 0.0;
    let mut carry = 0.0;
    let mut i = start;
    loop {
        let term = (ln_binomial_pmf(n, i, p) - first).exp();
        let t = sum + term;
        carry += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
        if term < 1e-20 * sum {
            break;
        }
        if upward {
            if i == n {
                break;
            }
            i += 1;
        } else {
            if i == 0 {
                break;
            }
            i -= 1;
        }
    }
    (sum + carry) * first.exp()
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
///
/// At `p = 0.5` with `n <= 62` the tail is summed exactly in integers. Otherwise
/// terms come from [`ln_binomial_pmf`] and the smaller of the two tails is
/// summed outward from `k`, so the answer is either a direct sum or one minus
/// a small sum.
pub fn binomial_tail(n: u64, k: u64, p: f64) -> Result<f64> {
    check_binomial(n, k, p)?;
    if p == 0.5 && n <= 62 {
        return Ok(dyadic_tail(n, k));
    }
    Ok(binomial_tail_log_space(n, k, p))
}

/// The log-space branch of [`binomial_tail`], for any valid `(n, k, p)`.
pub fn binomial_tail_log_space(n: u64, k: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mean = n as f64 * p;
    if k as f64 > mean {
        sum_decreasing_terms(n, k, p, true)
    } else {
        1.0 - sum_decreasing_terms(n, k - 1, p, false)
    }
}

/// `sum_{i >= k} C(n, i) / 2^n`, exact integer arithmetic for n <= 62.
fn dyadic_tail(n: u64, k: u64) -> f64 {
    let mut c: u128 = 1; // C(n, 0)
    let mut total: u128 = 0;
    for i in 0..=n {
        if i >= k {
            total += c;
        }
        if i < n {
            c = c * u128::from(n - i) / u128::from(i + 1);
        }
    }
    // At most one rounding: the power-of-two division is exact.
    total as f64 / (1u64 << n) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomialResult {
    pub n: u64,
    pub k: u64,
    pub p0: f64,
    /// One-sided `P(X >= k)` under `p0`.
    pub p_value: f64,
    /// `(k − n·p0) / sqrt(n·p0·(1 − p0))`, for reference only.
    pub z_approx: f64,
}

/// One-sided exact test that the success rate exceeds `p0`.
pub fn binomial_test(correct: u64, n: u64, p0: f64) -> Result<BinomialResult> {
    let p_value = binomial_tail(n, correct, p0)?;
    let nf = n as f64;
    let z_approx = if n == 0 {
        0.0
    } else {
        (correct as f64 - nf * p0) / (nf * p0 * (1.0 - p0)).sqrt()
    };
    Ok(BinomialResult {
        n,
        k: correct,
        p0,
        p_value,
        z_approx,
    })
}

/// Two-sided standard normal quantile for a confidence `level`.
pub fn normal_quantile_two_sided(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + level / 2.0))
}

/// Wilson score interval for `correct` successes out of `n`.
pub fn wilson_ci(correct: u64, n: u64, level: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::domain("Wilson interval needs n > 0"));
    }
    if correct > n {
        return Err(Error::domain(format!("{correct} successes out of {n}")));
    }
    let z = normal_quantile_two_sided(level)?;
    let nf = n as f64;
    let phat = correct as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (phat + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if correct == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if correct == n {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    Ok((lo, hi))
}

/// Rounds half-up to two decimals, as in printed percentage tables.
pub fn round_half_up_2(x: f64) -> f64 {
    (x * 100.0 + 0.5).floor() / 100.0
}

/// A percentage kept both raw and as displayed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percent {
    pub raw: f64,
    pub display: f64,
}

impl Percent {
    pub fn new(raw: f64) -> Self {
        Self {
            raw,
            display: round_half_up_2(raw),
        }
    }
}

impl std::fmt::Display for Percent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2}%", self.display)
    }
}

/// `(new − old) / old · 100`.
pub fn relative_gain(new: f64, old: f64) -> Result<Percent> {
    if old == 0.0 {
        return Err(Error::domain(
            "relative gain over an accuracy of 0 is undefined",
        ));
    }
    Ok(Percent::new((new - old) / old * 100.0))
}

/// `(old − new) / old · 100` for training-set sizes.
pub fn data_reduction(new_size: u64, old_size: u64) -> Result<Percent> {
    if old_size == 0 {
        return Err(Error::domain(
            "data reduction from an empty training set is undefined",
        ));
    }
    Ok(Percent::new(
        (old_size as f64 - new_size as f64) / old_size as f64 * 100.0,
    ))
}

/// One column of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub eval: EvalReport,
    pub train_size: u64,
}

/// The three-way comparison: two baselines and the smileyfied model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub yolov5: ModelSummary,
    pub resnet: ModelSummary,
    pub smileynet: ModelSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub yolov5_analog: String,
    pub resnet_analog: String,
    pub smileynet_analog: String,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub comparison: Comparison,
    pub gain_over_yolov5: Percent,
    pub gain_over_resnet: Percent,
    pub reduction_vs_yolov5: Percent,
    pub reduction_vs_resnet: Percent,
    pub p_values: [f64; 3],
    pub rows: Vec<ComparisonRow>,
}

pub const COMPARISON_CSV_HEADER: &str = "metric,yolov5_analog,resnet_analog,smileynet_analog,note";

/// Accuracy, significance, gain and data-reduction table for three models.
pub fn compare_report(comparison: &Comparison) -> Result<ComparisonReport> {
    let c = comparison;
    let acc = |m: &ModelSummary| m.eval.accuracy;
    let gain_over_yolov5 = relative_gain(acc(&c.smileynet), acc(&c.yolov5))?;
    let gain_over_resnet = relative_gain(acc(&c.smileynet), acc(&c.resnet))?;
    let reduction_vs_yolov5 = data_reduction(c.smileynet.train_size, c.yolov5.train_size)?;
    let reduction_vs_resnet = data_reduction(c.smileynet.train_size, c.resnet.train_size)?;
    let p = |m: &ModelSummary| binomial_test(m.eval.correct, m.eval.n, 0.5).map(|r| r.p_value);
    let p_values = [p(&c.yolov5)?, p(&c.resnet)?, p(&c.smileynet)?];

    let row = |metric: &str, cells: [String; 3], note: &str| ComparisonRow {
        metric: metric.into(),
        yolov5_analog: cells[0].clone(),
        resnet_analog: cells[1].clone(),
        smileynet_analog: cells[2].clone(),
        note: note.into(),
    };
    let each = |f: &dyn Fn(&ModelSummary) -> String| [f(&c.yolov5), f(&c.resnet), f(&c.smileynet)];
    let truncation_note = |r: &Percent| {
        if (r.display - claimed::DATA_REDUCTION_PERCENT).abs() > 0.005
            && r.raw.floor() == claimed::DATA_REDUCTION_PERCENT
        {
            format!(
                "NOTE: exact {:.2}%; printed as {}% when truncated",
                r.display,
                claimed::DATA_REDUCTION_PERCENT
            )
        } else {
            String::new()
        }
    };
    let rows = vec![
        row("model", each(&|m| m.name.clone()), ""),
        row(
            "correct",
            each(&|m| format!("{}/{}", m.eval.correct, m.eval.n)),
            "",
        ),
        row(
            "accuracy",
            each(&|m| Percent::new(m.eval.accuracy * 100.0).to_string()),
            "",
        ),
        row(
            "binomial_p_one_sided",
            p_values.map(|v| format!("{v:.3e}")),
            "exact P(X >= correct) under chance (0.5)",
        ),
        row(
            "accuracy_increase",
            [
                gain_over_yolov5.to_string(),
                gain_over_resnet.to_string(),
                String::new(),
            ],
            "smileynet relative to each baseline",
        ),
        row("train_size", each(&|m| m.train_size.to_string()), ""),
        row(
            "data_reduction",
            [
                reduction_vs_yolov5.to_string(),
                reduction_vs_resnet.to_string(),
                String::new(),
            ],
            &truncation_note(&reduction_vs_yolov5),
        ),
    ];
    Ok(ComparisonReport {
        comparison: c.clone(),
        gain_over_yolov5,
        gain_over_resnet,
        reduction_vs_yolov5,
        reduction_vs_resnet,
        p_values,
        rows,
    })
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .has_headers(false)
            .from_writer(Vec::new());
        writer
            .write_record(COMPARISON_CSV_HEADER.split(','))
            .expect("in-memory write");
        for r in &self.rows {
            writer
                .write_record([
                    &r.metric,
                    &r.yolov5_analog,
                    &r.resnet_analog,
                    &r.smileynet_analog,
                    &r.note,
                ])
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8")
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let header = [
            "metric",
            "yolov5_analog",
            "resnet_analog",
            "smileynet_analog",
            "note",
        ];
        let cells: Vec<[&str; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.metric.as_str(),
                    r.yolov5_analog.as_str(),
                    r.resnet_analog.as_str(),
                    r.smileynet_analog.as_str(),
                    r.note.as_str(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        for row in std::iter::once(&header).chain(&cells) {
            let line: Vec<String> = row
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// The comparison table built from the claimed counts and training sizes.
pub fn claimed_comparison() -> Result<ComparisonReport> {
    let summary = |name: &str, (correct, n): (u64, u64), train_size| {
        Ok::<_, Error>(ModelSummary {
            name: name.into(),
            eval: EvalReport::from_counts(correct, n)?,
            train_size,
        })
    };
    compare_report(&Comparison {
        yolov5: summary("YOLOv5", claimed::YOLOV5, claimed::TRAIN_SIZE_BASELINES)?,
        resnet: summary(
            "ResNet-34",
            claimed::RESNET34,
            claimed::TRAIN_SIZE_BASELINES,
        )?,
        smileynet: summary(
            "SmileyNet",
            claimed::SMILEYNET,
            claimed::TRAIN_SIZE_SMILEYNET,
        )?,
    })
}

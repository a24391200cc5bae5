//! From-scratch classifiers for cup readings.
//!
//! Two trainable architectures (logistic regression and a one-hidden-layer
//! tanh MLP, both with a sigmoid output) and two non-parametric references:
//! the parity lookup oracle and the majority-label baseline.

mod checkpoint;
mod classifiers;
mod network;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tessim::TeaImage;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use classifiers::{evaluate, Classifier, EvalReport, MajorityBaseline, ParityOracle};
pub use network::{Architecture, ModelState};
pub use train::{render_smiley, smileyfy, train, train_on_samples, TrainConfig, TrainOutcome};

/// Clamp distance from 0 and 1 applied to probabilities in the log loss.
pub const PROB_EPSILON: f64 = 1e-12;

/// How an image is turned into a feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScheme {
    /// Every pixel, tea = 1, cup = 0.
    Raw,
    /// Tea-pixel density.
    Count,
    /// Tea count mod 2.
    Parity,
    /// `[density, parity]`.
    CountParity,
}

impl FeatureScheme {
    pub fn dim(self, width: usize, height: usize) -> usize {
        match self {
            FeatureScheme::Raw => width * height,
            FeatureScheme::Count | FeatureScheme::Parity => 1,
            FeatureScheme::CountParity => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureScheme::Raw => "raw",
            FeatureScheme::Count => "count",
            FeatureScheme::Parity => "parity",
            FeatureScheme::CountParity => "count_parity",
        }
    }
}

impl std::str::FromStr for FeatureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(FeatureScheme::Raw),
            "count" => Ok(FeatureScheme::Count),
            "parity" => Ok(FeatureScheme::Parity),
            "count_parity" | "count-parity" => Ok(FeatureScheme::CountParity),
            other => Err(Error::domain(format!(
                "unknown feature scheme {other:?}; expected raw, count, parity or count-parity"
            ))),
        }
    }
}

pub fn featurize(image: &TeaImage, scheme: FeatureScheme) -> Vec<f64> {
    match scheme {
        FeatureScheme::Raw => image
            .pixels()
            .iter()
            .map(|p| if p.is_tea() { 1.0 } else { 0.0 })
            .collect(),
        FeatureScheme::Count => vec![image.tea_fraction()],
        FeatureScheme::Parity => vec![f64::from(image.parity())],
        FeatureScheme::CountParity => vec![image.tea_fraction(), f64::from(image.parity())],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Binary log loss on the sigmoid output.
    CrossEntropy,
    /// `½(y − target)²`.
    Squared,
    /// Squared loss with the target replaced by the output itself.
    Smiley,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_entropy" | "cross-entropy" | "ce" => Ok(LossKind::CrossEntropy),
            "squared" | "mse" => Ok(LossKind::Squared),
            "smiley" => Ok(LossKind::Smiley),
            other => Err(Error::domain(format!(
                "unknown loss {other:?}; expected cross-entropy, squared or smiley"
            ))),
        }
    }
}

/// Loss value and its derivative with respect to the model output `y`.
pub fn loss_and_grad(kind: LossKind, y: f64, target: f64) -> Result<(f64, f64)> {
    if !y.is_finite() || !target.is_finite() {
        return Err(Error::domain(format!(
            "loss inputs must be finite, got y={y}, target={target}"
        )));
    }
    Ok(match kind {
        LossKind::Squared => squared(y, target),
        LossKind::Smiley => {
            // The expected output is the actual output: ŷ = f_I(y).
            let expected = y;
            squared(y, expected)
        }
        LossKind::CrossEntropy => {
            let p = y.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
            let loss = -(target * p.ln() + (1.0 - target) * (1.0 - p).ln());
            let grad = -target / p + (1.0 - target) / (1.0 - p);
            (loss, grad)
        }
    })
}

fn squared(y: f64, target: f64) -> (f64, f64) {
    let diff = y - target;
    (0.5 * diff * diff, diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tessim::Pixel;

    #[test]
    fn featurize_shapes() {
        let cup = TeaImage::filled(100, 100, Pixel::Cup).unwrap();
        assert_eq!(featurize(&cup, FeatureScheme::Parity), vec![0.0]);
        let raw = featurize(&cup, FeatureScheme::Raw);
        assert_eq!(raw.len(), 10_000);
        assert!(raw.iter().all(|&v| v == 0.0 || v == 1.0));

        let mut img = cup.clone();
        for i in 0..3000 {
            img.toggle(i * 3);
        }
        assert_eq!(featurize(&img, FeatureScheme::Count), vec![0.3]);
        assert_eq!(featurize(&img, FeatureScheme::CountParity), vec![0.3, 0.0]);
    }

    #[test]
    fn smiley_loss_is_identically_zero() {
        for &(y, t) in &[
            (0.73, 0.0),
            (0.73, 1.0),
            (0.0, 5.0),
            (1.0, -3.0),
            (0.5, 0.5),
        ] {
            let (l, g) = loss_and_grad(LossKind::Smiley, y, t).unwrap();
            assert_eq!(l.to_bits(), 0f64.to_bits());
            assert_eq!(g.to_bits(), 0f64.to_bits());
        }
    }

    #[test]
    fn squared_loss_example() {
        assert_eq!(
            loss_and_grad(LossKind::Squared, 1.0, 0.0).unwrap(),
            (0.5, 1.0)
        );
    }

    #[test]
    fn cross_entropy_example() {
        let (l, g) = loss_and_grad(LossKind::CrossEntropy, 0.5, 1.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((g + 2.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_clamps_boundary() {
        let (l, g) = loss_and_grad(LossKind::CrossEntropy, 0.0, 1.0).unwrap();
        assert!(l.is_finite() && g.is_finite());
        assert!((l - (-PROB_EPSILON.ln())).abs() < 1e-9);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        assert!(loss_and_grad(LossKind::Squared, f64::NAN, 0.0).is_err());
        assert!(loss_and_grad(LossKind::Smiley, 0.2, f64::INFINITY).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!(
            "count-parity".parse::<FeatureScheme>().unwrap(),
            FeatureScheme::CountParity
        );
        assert_eq!(
            "cross-entropy".parse::<LossKind>().unwrap(),
            LossKind::CrossEntropy
        );
        assert!("hinge".parse::<LossKind>().is_err());
    }
}

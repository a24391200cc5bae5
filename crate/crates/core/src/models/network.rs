use serde::{Deserialize, Serialize};

use super::{featurize, loss_and_grad, FeatureScheme, LossKind};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::tessim::TeaImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// Logistic regression.
    Linear,
    /// One tanh hidden layer of width `hidden`, sigmoid output.
    Mlp { hidden: usize },
}

impl Architecture {
    pub const DEFAULT_HIDDEN: usize = 16;

    pub fn param_count(self, input_dim: usize) -> usize {
        match self {
            Architecture::Linear => input_dim + 1,
            Architecture::Mlp { hidden } => hidden * input_dim + 2 * hidden + 1,
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::Linear => f.write_str("linear"),
            Architecture::Mlp { hidden } => write!(f, "mlp:{hidden}"),
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    /// `linear`, `mlp` or `mlp:WIDTH`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "linear" => Ok(Architecture::Linear),
            None if s == "mlp" => Ok(Architecture::Mlp {
                hidden: Self::DEFAULT_HIDDEN,
            }),
            Some(("mlp", w)) => match w.parse() {
                Ok(hidden) if hidden > 0 => Ok(Architecture::Mlp { hidden }),
                _ => Err(Error::domain(format!("bad hidden width {w:?}"))),
            },
            _ => Err(Error::domain(format!(
                "unknown architecture {s:?}; expected linear, mlp or mlp:WIDTH"
            ))),
        }
    }
}

/// Parameters of a classifier plus what it expects as input.
///
/// Parameters live in one flat vector. Linear layout: `[w_0..w_{d-1}, b]`.
/// MLP layout: `[W1 (hidden x d, row-major), b1 (hidden), w2 (hidden), b2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub architecture: Architecture,
    pub scheme: FeatureScheme,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub params: Vec<f64>,
}

impl ModelState {
    /// Fresh model: zero weights for the linear model, Glorot-uniform hidden
    /// weights (seeded) with zero biases for the MLP.
    pub fn new(
        architecture: Architecture,
        scheme: FeatureScheme,
        width: usize,
        height: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut model = Self::zeros(architecture, scheme, width, height, seed)?;
        if let Architecture::Mlp { hidden } = architecture {
            let d = model.input_dim();
            let mut rng = SimRng::from_seed(seed);
            let a1 = (6.0 / (d + hidden) as f64).sqrt();
            let a2 = (6.0 / (hidden + 1) as f64).sqrt();
            let (w1, rest) = model.params.split_at_mut(hidden * d);
            for w in w1 {
                *w = a1 * (2.0 * rng.unit_f64() - 1.0);
            }
            for w in &mut rest[hidden..2 * hidden] {
                *w = a2 * (2.0 * rng.unit_f64() - 1.0);
            }
        }
        Ok(model)
    }

    pub fn zeros(
        architecture: Architecture,
        scheme: FeatureScheme,
        width: usize,
        height: usize,
        seed: u64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("model input image must have positive size"));
        }
        if architecture == (Architecture::Mlp { hidden: 0 }) {
            return Err(Error::domain("MLP hidden width must be positive"));
        }
        let n = architecture.param_count(scheme.dim(width, height));
        Ok(Self {
            architecture,
            scheme,
            width,
            height,
            seed,
            params: vec![0.0; n],
        })
    }

    /// Every parameter uniform in `[-scale, scale]`.
    pub fn random(
        architecture: Architecture,
        scheme: FeatureScheme,
        width: usize,
        height: usize,
        seed: u64,
        scale: f64,
    ) -> Result<Self> {
        let mut model = Self::zeros(architecture, scheme, width, height, seed)?;
        let mut rng = SimRng::from_seed(seed);
        for p in &mut model.params {
            *p = scale * (2.0 * rng.unit_f64() - 1.0);
        }
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.scheme.dim(self.width, self.height)
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub(crate) fn check_image(&self, image: &TeaImage) -> Result<()> {
        if (image.width(), image.height()) != (self.width, self.height) {
            return Err(Error::domain(format!(
                "model expects {}x{} images, got {}x{}",
                self.width,
                self.height,
                image.width(),
                image.height()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_features(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::domain(format!(
                "model expects {} features, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Probability of heads for an image.
    pub fn probability(&self, image: &TeaImage) -> Result<f64> {
        self.check_image(image)?;
        Ok(self.forward(&featurize(image, self.scheme)))
    }

    /// Sigmoid output for a feature vector of length `input_dim()`.
    pub fn forward(&self, x: &[f64]) -> f64 {
        match self.architecture {
            Architecture::Linear => {
                let d = x.len();
                sigmoid(dot(&self.params[..d], x) + self.params[d])
            }
            Architecture::Mlp { hidden } => {
                let mut h = vec![0.0; hidden];
                self.mlp_hidden(x, hidden, &mut h);
                let d = x.len();
                let off = hidden * d + hidden;
                sigmoid(dot(&self.params[off..off + hidden], &h) + self.params[off + hidden])
            }
        }
    }

    fn mlp_hidden(&self, x: &[f64], hidden: usize, out: &mut [f64]) {
        let d = x.len();
        let (w1, rest) = self.params.split_at(hidden * d);
        for (j, h) in out.iter_mut().enumerate() {
            *h = (dot(&w1[j * d..(j + 1) * d], x) + rest[j]).tanh();
        }
    }

    /// Adds `d loss / d params` for one sample into `grad` and returns the loss.
    ///
    /// `grad` must hold `params.len()` entries. Terms are accumulated with `+=`,
    /// so a zero upstream derivative leaves `grad` untouched bit for bit when it
    /// starts at `+0.0`.
    pub fn accumulate_gradient(
        &self,
        x: &[f64],
        target: f64,
        loss: LossKind,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check_features(x)?;
        debug_assert_eq!(grad.len(), self.params.len());
        let d = x.len();
        match self.architecture {
            Architecture::Linear => {
                let y = sigmoid(dot(&self.params[..d], x) + self.params[d]);
                let (l, dl_dy) = loss_and_grad(loss, y, target)?;
                let dz = dl_dy * y * (1.0 - y);
                for (g, &xi) in grad[..d].iter_mut().zip(x) {
                    if xi != 0.0 {
                        *g += dz * xi;
                    }
                }
                grad[d] += dz;
                Ok(l)
            }
            Architecture::Mlp { hidden } => {
                let mut h = vec![0.0; hidden];
                self.mlp_hidden(x, hidden, &mut h);
                let off = hidden * d + hidden;
                let w2 = &self.params[off..off + hidden];
                let y = sigmoid(dot(w2, &h) + self.params[off + hidden]);
                let (l, dl_dy) = loss_and_grad(loss, y, target)?;
                let dz = dl_dy * y * (1.0 - y);
                let (g_w1, g_rest) = grad.split_at_mut(hidden * d);
                let (g_b1, g_out) = g_rest.split_at_mut(hidden);
                for j in 0..hidden {
                    g_out[j] += dz * h[j];
                    let da = dz * w2[j] * (1.0 - h[j] * h[j]);
                    g_b1[j] += da;
                    for (g, &xi) in g_w1[j * d..(j + 1) * d].iter_mut().zip(x) {
                        if xi != 0.0 {
                            *g += da * xi;
                        }
                    }
                }
                g_out[hidden] += dz;
                Ok(l)
            }
        }
    }

    /// Loss for one sample, without gradients.
    pub fn loss(&self, x: &[f64], target: f64, loss: LossKind) -> Result<f64> {
        self.check_features(x)?;
        loss_and_grad(loss, self.forward(x), target).map(|(l, _)| l)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(_, &x)| x != 0.0)
        .map(|(w, x)| w * x)
        .sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

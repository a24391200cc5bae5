use serde::{Deserialize, Serialize};

use super::{featurize, LossKind, ModelState};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::tessim::{Dataset, Pixel, TeaImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::CrossEntropy,
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 32,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::domain(format!(
                "learning_rate must be a positive finite number, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch_size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelState,
    /// Mean per-sample loss of each epoch, measured before each batch update.
    pub history: Vec<f64>,
}

/// Mini-batch gradient descent on a dataset's images and labels.
pub fn train(
    model: &ModelState,
    train_set: &Dataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let samples = train_set
        .records
        .iter()
        .map(|rec| {
            model.check_image(&rec.image)?;
            Ok((
                featurize(&rec.image, model.scheme),
                f64::from(rec.label.as_bit()),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    train_on_samples(model, &samples, config)
}

/// Mini-batch gradient descent on `(features, target)` pairs.
///
/// Each epoch visits the samples in an order shuffled by a generator seeded
/// once from `config.seed`; each batch takes one step along the mean gradient.
pub fn train_on_samples(
    model: &ModelState,
    samples: &[(Vec<f64>, f64)],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if config.epochs == 0 {
        return Ok(TrainOutcome {
            model: model.clone(),
            history: Vec::new(),
        });
    }
    if samples.is_empty() {
        return Err(Error::domain("cannot train on an empty sample set"));
    }
    for (x, _) in samples {
        model.check_features(x)?;
    }

    let mut model = model.clone();
    let mut rng = SimRng::from_seed(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grad = vec![0.0; model.params.len()];
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (x, target) = &samples[i];
                epoch_loss += model.accumulate_gradient(x, *target, config.loss, &mut grad)?;
            }
            let step = config.learning_rate / batch.len() as f64;
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= step * g;
            }
        }
        if !model.is_finite() {
            return Err(Error::domain(format!(
                "training diverged in epoch {epoch}; lower the learning rate"
            )));
        }
        history.push(epoch_loss / samples.len() as f64);
    }
    Ok(TrainOutcome { model, history })
}

/// Draws a slightly smiling face (round head, two eyes, a shallow smile) in
/// tea pixels on a cup background.
pub fn render_smiley(width: usize, height: usize) -> Result<TeaImage> {
    let mut img = TeaImage::filled(width, height, Pixel::Cup)?;
    let (w, h) = (width as f64, height as f64);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let r = 0.45 * w.min(h);
    let stroke = (0.06 * w.min(h)).max(0.75);
    for y in 0..height {
        for x in 0..width {
            let (px, py) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let dist = (px * px + py * py).sqrt();
            let outline = (dist - r).abs() <= stroke;
            let eye = [-1.0, 1.0].iter().any(|s| {
                let (ex, ey) = (px - s * 0.35 * r, py + 0.3 * r);
                (ex * ex + ey * ey).sqrt() <= 1.5 * stroke
            });
            // Lower arc of a circle centred above the face centre.
            let mouth_r = 0.55 * r;
            let (mx, my) = (px, py + 0.1 * r);
            let mouth = my > 0.15 * r
                && mx.abs() < 0.45 * r
                && ((mx * mx + my * my).sqrt() - mouth_r).abs() <= stroke * 0.8;
            if outline || eye || mouth {
                img.set(x, y, Pixel::Tea);
            }
        }
    }
    Ok(img)
}

/// Smileyfication: present `smiley_count` smileys and train under the smiley
/// loss, whose target is the model's own output.
///
/// Whatever `config.loss` says, the smiley loss is used. The loss and its
/// gradient are exactly zero, so the returned parameters are bit-identical to
/// the input and the history is all zeros.
pub fn smileyfy(
    model: &ModelState,
    smiley_count: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let smiley = render_smiley(model.width, model.height)?;
    let x = featurize(&smiley, model.scheme);
    // Positive feedback: every smiley is labelled as a success.
    let samples = vec![(x, 1.0); smiley_count];
    let config = TrainConfig {
        loss: LossKind::Smiley,
        ..config.clone()
    };
    if samples.is_empty() {
        return Ok(TrainOutcome {
            model: model.clone(),
            history: vec![0.0; config.epochs],
        });
    }
    train_on_samples(model, &samples, &config)
}

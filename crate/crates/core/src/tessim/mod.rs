//! Coin labels and the tea-leaf image simulator.
//!
//! The coin is turned by hand every round, starting tails up, so round `r`
//! shows heads exactly when `r` is odd. Each image `I_r` is `I_{r-1}` with
//! `k_change` randomly chosen pixels toggled between tea and cup. Toggling a
//! pixel changes the tea count by one, so the count's parity after `r` rounds
//! is `parity(I_0) XOR (r * k_change mod 2)`: for odd `k_change` every image
//! carries its own label in the parity of its tea count.

mod image;
mod io;
mod split;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::SimRng;

pub use image::{Pixel, TeaImage};
pub use io::{
    export_dataset, image_filename, import_dataset, read_pgm, write_manifest_csv, write_pgm,
    Manifest, ManifestRow, MANIFEST_FILE, PROVENANCE_FILE,
};
pub use split::{split_dataset, split_overlap, SplitStrategy};

/// Side of the coin facing up. Serialized as 1 (heads) and 0 (tails).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum FlipOutcome {
    Tails = 0,
    Heads = 1,
}

impl FlipOutcome {
    pub fn as_bit(self) -> u8 {
        self as u8
    }

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(FlipOutcome::Tails),
            1 => Some(FlipOutcome::Heads),
            _ => None,
        }
    }
}

impl From<FlipOutcome> for u8 {
    fn from(outcome: FlipOutcome) -> u8 {
        outcome.as_bit()
    }
}

impl TryFrom<u8> for FlipOutcome {
    type Error = String;

    fn try_from(bit: u8) -> std::result::Result<Self, String> {
        FlipOutcome::from_bit(bit).ok_or_else(|| format!("coin label must be 0 or 1, got {bit}"))
    }
}

impl std::fmt::Display for FlipOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FlipOutcome::Heads => "heads",
            FlipOutcome::Tails => "tails",
        })
    }
}

/// Coin face after the hand turn of round `r` (rounds start at 1).
pub fn coin_outcome(round: u64) -> Result<FlipOutcome> {
    if round == 0 {
        return Err(Error::domain(
            "round index out of range: rounds start at 1 (round 0 is the tails-up start)",
        ));
    }
    Ok(if (round + 1).is_multiple_of(2) {
        FlipOutcome::Heads
    } else {
        FlipOutcome::Tails
    })
}

/// How the `k_change` coordinates of one round are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// `k_change` distinct cells: exactly `k_change` pixels change.
    #[default]
    Distinct,
    /// `k_change` independent draws; a cell hit twice flips back.
    WithReplacement,
}

/// Recipe for the synthetic starting image `I_0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseImageSpec {
    pub tea_fraction: f64,
    pub blob_count: u32,
    pub seed: u64,
}

impl Default for BaseImageSpec {
    fn default() -> Self {
        Self {
            tea_fraction: 0.3,
            blob_count: 12,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub width: usize,
    pub height: usize,
    pub k_change: usize,
    pub sampling_mode: SamplingMode,
    pub rounds: u64,
    pub base_spec: BaseImageSpec,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            width: 100,
            height: 100,
            k_change: 7,
            sampling_mode: SamplingMode::Distinct,
            rounds: 500,
            base_spec: BaseImageSpec::default(),
            seed: 42,
        }
    }
}

impl SimConfig {
    pub fn area(&self) -> usize {
        self.width.saturating_mul(self.height)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::domain(format!(
                "image dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if self.k_change == 0 || self.k_change > self.area() {
            return Err(Error::domain(format!(
                "k_change must lie in [1, {}] for a {}x{} image, got {}",
                self.area(),
                self.width,
                self.height,
                self.k_change
            )));
        }
        check_fraction(self.base_spec.tea_fraction)
    }

    /// Hex SHA-256 of the canonical JSON serialization of this config.
    pub fn provenance_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::domain(format!(
            "tea_fraction must lie in [0, 1], got {f}"
        )));
    }
    Ok(())
}

/// Builds a seeded stand-in for the photographed cup.
///
/// Tea is laid down as `blob_count` soft blobs: every pixel is scored by its
/// scaled distance to the nearest blob centre plus jitter, and the
/// `round(tea_fraction * area)` lowest-scoring pixels become tea. With no blobs
/// the tea pixels are scattered uniformly. The tea count is exact, so the
/// realised density is within half a pixel of the target.
pub fn synthesize_base_image(
    spec: &BaseImageSpec,
    width: usize,
    height: usize,
) -> Result<TeaImage> {
    check_fraction(spec.tea_fraction)?;
    let mut image = TeaImage::filled(width, height, Pixel::Cup)?;
    let area = image.area();
    let target = (spec.tea_fraction * area as f64).round() as usize;
    if target == 0 {
        return Ok(image);
    }

    let mut rng = SimRng::from_seed(spec.seed);
    let blobs: Vec<(f64, f64, f64)> = (0..spec.blob_count)
        .map(|_| {
            let cx = rng.unit_f64() * width as f64;
            let cy = rng.unit_f64() * height as f64;
            let radius = 0.5 + rng.unit_f64();
            (cx, cy, radius)
        })
        .collect();

    let scale = width.max(height) as f64;
    let mut scored: Vec<(f64, usize)> = (0..area)
        .map(|idx| {
            let jitter = rng.unit_f64();
            let score = if blobs.is_empty() {
                jitter
            } else {
                let (x, y) = ((idx % width) as f64 + 0.5, (idx / width) as f64 + 0.5);
                let nearest = blobs
                    .iter()
                    .map(|&(cx, cy, r)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() / r)
                    .fold(f64::INFINITY, f64::min);
                nearest / scale + 0.08 * jitter
            };
            (score, idx)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for &(_, idx) in &scored[..target] {
        image.toggle(idx);
    }
    Ok(image)
}

/// Applies one round of `k_change` toggles to `prev`.
pub fn next_image(prev: &TeaImage, config: &SimConfig, rng: &mut SimRng) -> Result<TeaImage> {
    if (prev.width(), prev.height()) != (config.width, config.height) {
        return Err(Error::domain(format!(
            "image is {}x{} but the config expects {}x{}",
            prev.width(),
            prev.height(),
            config.width,
            config.height
        )));
    }
    let area = prev.area();
    let k = config.k_change;
    if k == 0 || (config.sampling_mode == SamplingMode::Distinct && k > area) {
        return Err(Error::domain(format!(
            "k_change must lie in [1, {area}] in distinct mode, got {k}"
        )));
    }

    let mut next = prev.clone();
    match config.sampling_mode {
        SamplingMode::Distinct => {
            for idx in sample_distinct(rng, area, k) {
                next.toggle(idx);
            }
        }
        SamplingMode::WithReplacement => {
            for _ in 0..k {
                next.toggle(rng.index(area));
            }
        }
    }
    Ok(next)
}

/// Floyd's algorithm: `k` distinct indices from `0..n`, in insertion order.
fn sample_distinct(rng: &mut SimRng, n: usize, k: usize) -> Vec<usize> {
    let mut chosen = vec![false; n];
    let mut out = Vec::with_capacity(k);
    for j in (n - k)..n {
        let t = rng.index(j + 1);
        let pick = if chosen[t] { j } else { t };
        chosen[pick] = true;
        out.push(pick);
    }
    out
}

/// One labelled cup reading.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub round: u64,
    pub image: TeaImage,
    pub label: FlipOutcome,
}

/// Ordered simulated readings plus how they were produced.
///
/// `base_image` is `I_0`; it has no flip and is kept only for provenance.
/// Subsets produced by [`split_dataset`] keep their original round numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub config: SimConfig,
    pub base_image: TeaImage,
    pub provenance_hash: String,
    pub relabeled: bool,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Same provenance, different records.
    pub fn with_records(&self, records: Vec<Record>) -> Dataset {
        Dataset {
            records,
            config: self.config.clone(),
            base_image: self.base_image.clone(),
            provenance_hash: self.provenance_hash.clone(),
            relabeled: self.relabeled,
        }
    }

    /// Tea-count parity of every record, in order.
    pub fn parity_trace(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.image.parity()).collect()
    }

    /// True when every label is the hand-turned coin face of its round.
    pub fn labels_follow_coin(&self) -> bool {
        self.records
            .iter()
            .all(|r| coin_outcome(r.round).map(|o| o == r.label).unwrap_or(false))
    }
}

/// Runs the simulation: `I_0` from the base spec, then `rounds` chained toggles.
pub fn generate_dataset(config: &SimConfig) -> Result<Dataset> {
    config.validate()?;
    let base_image = synthesize_base_image(&config.base_spec, config.width, config.height)?;
    let mut rng = SimRng::from_seed(config.seed);
    let mut records = Vec::with_capacity(config.rounds as usize);
    let mut prev = base_image.clone();
    for round in 1..=config.rounds {
        let image = next_image(&prev, config, &mut rng)?;
        records.push(Record {
            round,
            image: image.clone(),
            label: coin_outcome(round)?,
        });
        prev = image;
    }
    Ok(Dataset {
        records,
        config: config.clone(),
        base_image,
        provenance_hash: config.provenance_hash(),
        relabeled: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(k: usize, mode: SamplingMode) -> SimConfig {
        SimConfig {
            width: 8,
            height: 8,
            k_change: k,
            sampling_mode: mode,
            rounds: 20,
            base_spec: BaseImageSpec {
                tea_fraction: 0.5,
                blob_count: 0,
                seed: 1,
            },
            seed: 3,
        }
    }

    #[test]
    fn coin_outcome_examples() {
        assert_eq!(coin_outcome(1).unwrap(), FlipOutcome::Heads);
        assert_eq!(coin_outcome(2).unwrap(), FlipOutcome::Tails);
        assert_eq!(coin_outcome(100).unwrap(), FlipOutcome::Tails);
        assert!(matches!(coin_outcome(0), Err(Error::Domain(_))));
    }

    #[test]
    fn coin_alternates() {
        for r in 1..1000 {
            assert_ne!(coin_outcome(r).unwrap(), coin_outcome(r + 1).unwrap());
        }
    }

    #[test]
    fn flip_outcome_bits() {
        assert_eq!(FlipOutcome::Heads.as_bit(), 1);
        assert_eq!(FlipOutcome::Tails.as_bit(), 0);
        assert_eq!(FlipOutcome::from_bit(1), Some(FlipOutcome::Heads));
        assert_eq!(FlipOutcome::from_bit(2), None);
    }

    #[test]
    fn base_image_extremes() {
        for seed in [0, 1, 99] {
            let spec = BaseImageSpec {
                tea_fraction: 0.0,
                blob_count: 5,
                seed,
            };
            assert_eq!(synthesize_base_image(&spec, 10, 7).unwrap().tea_count(), 0);
            let spec = BaseImageSpec {
                tea_fraction: 1.0,
                ..spec
            };
            assert_eq!(synthesize_base_image(&spec, 10, 7).unwrap().tea_count(), 70);
        }
    }

    #[test]
    fn base_image_density_and_repeatability() {
        let spec = BaseImageSpec {
            tea_fraction: 0.3,
            blob_count: 12,
            seed: 42,
        };
        let a = synthesize_base_image(&spec, 100, 100).unwrap();
        let b = synthesize_base_image(&spec, 100, 100).unwrap();
        assert!((2500..=3500).contains(&a.tea_count()), "{}", a.tea_count());
        assert_eq!(a, b);
    }

    #[test]
    fn base_image_rejects_bad_input() {
        let spec = BaseImageSpec::default();
        assert!(synthesize_base_image(&spec, 0, 10).is_err());
        let bad = BaseImageSpec {
            tea_fraction: 1.5,
            ..spec
        };
        assert!(synthesize_base_image(&bad, 10, 10).is_err());
    }

    #[test]
    fn single_toggle_from_uniform() {
        let cfg = SimConfig {
            width: 2,
            height: 2,
            k_change: 1,
            ..small_config(1, SamplingMode::Distinct)
        };
        let cup = TeaImage::filled(2, 2, Pixel::Cup).unwrap();
        let mut rng = SimRng::from_seed(0);
        assert_eq!(next_image(&cup, &cfg, &mut rng).unwrap().tea_count(), 1);
    }

    #[test]
    fn full_complement_in_distinct_mode() {
        let cfg = SimConfig {
            width: 2,
            height: 2,
            k_change: 4,
            ..small_config(4, SamplingMode::Distinct)
        };
        let cup = TeaImage::filled(2, 2, Pixel::Cup).unwrap();
        let mut rng = SimRng::from_seed(0);
        let next = next_image(&cup, &cfg, &mut rng).unwrap();
        assert_eq!(next, TeaImage::filled(2, 2, Pixel::Tea).unwrap());
    }

    #[test]
    fn next_image_rejects_oversized_k_and_mismatched_dims() {
        let cfg = SimConfig {
            width: 2,
            height: 2,
            k_change: 5,
            ..small_config(5, SamplingMode::Distinct)
        };
        let cup = TeaImage::filled(2, 2, Pixel::Cup).unwrap();
        let mut rng = SimRng::from_seed(0);
        assert!(next_image(&cup, &cfg, &mut rng).is_err());

        let cfg = small_config(3, SamplingMode::Distinct);
        assert!(next_image(&cup, &cfg, &mut rng).is_err());
    }

    #[test]
    fn with_replacement_allows_k_above_area() {
        let cfg = SimConfig {
            width: 2,
            height: 2,
            k_change: 9,
            sampling_mode: SamplingMode::WithReplacement,
            ..small_config(9, SamplingMode::WithReplacement)
        };
        let cup = TeaImage::filled(2, 2, Pixel::Cup).unwrap();
        let mut rng = SimRng::from_seed(4);
        let next = next_image(&cup, &cfg, &mut rng).unwrap();
        assert_eq!(next.tea_count() % 2, 1);
    }

    #[test]
    fn parity_flips_for_odd_k_brute_force() {
        // 1000 trials per mode on random 8x8 images, counting before and after.
        for mode in [SamplingMode::Distinct, SamplingMode::WithReplacement] {
            let cfg = small_config(3, mode);
            for trial in 0..1000u64 {
                let mut rng = SimRng::from_seed(trial);
                let pixels = (0..64)
                    .map(|_| if rng.bit() { Pixel::Tea } else { Pixel::Cup })
                    .collect();
                let prev = TeaImage::from_pixels(8, 8, pixels).unwrap();
                let next = next_image(&prev, &cfg, &mut rng).unwrap();
                let before = prev.pixels().iter().filter(|p| **p == Pixel::Tea).count();
                let after = next.pixels().iter().filter(|p| **p == Pixel::Tea).count();
                assert_ne!(before % 2, after % 2, "mode {mode:?} trial {trial}");
                if mode == SamplingMode::Distinct {
                    assert_eq!(prev.hamming(&next), 3);
                }
            }
        }
    }

    #[test]
    fn empty_dataset_keeps_base() {
        let cfg = SimConfig {
            rounds: 0,
            ..SimConfig::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.base_image.area(), 10_000);
    }

    #[test]
    fn default_dataset_alternates() {
        let ds = generate_dataset(&SimConfig::default()).unwrap();
        assert_eq!(ds.len(), 500);
        for (i, rec) in ds.records.iter().enumerate() {
            assert_eq!(rec.round, i as u64 + 1);
            let expected = if i % 2 == 0 {
                FlipOutcome::Heads
            } else {
                FlipOutcome::Tails
            };
            assert_eq!(rec.label, expected);
        }
        assert!(ds.labels_follow_coin());
    }

    #[test]
    fn parities_alternate_for_k3_seed7() {
        let cfg = SimConfig {
            rounds: 6,
            k_change: 3,
            seed: 7,
            ..SimConfig::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        let mut prev = ds.base_image.tea_count() % 2;
        for rec in &ds.records {
            let cur = rec.image.tea_count() % 2;
            assert_ne!(cur, prev);
            prev = cur;
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small_config(5, SamplingMode::WithReplacement);
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.provenance_hash, cfg.provenance_hash());
        let other = SimConfig { seed: 4, ..cfg };
        assert_ne!(other.provenance_hash(), a.provenance_hash);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig {
            k_change: 0,
            ..SimConfig::default()
        };
        assert!(generate_dataset(&cfg).is_err());
        cfg.k_change = 10_001;
        assert!(generate_dataset(&cfg).is_err());
        cfg.k_change = 10_000;
        cfg.rounds = 2;
        assert!(generate_dataset(&cfg).is_ok());
    }
}

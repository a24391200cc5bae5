use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One cell of a simulated cup reading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pixel {
    Cup,
    Tea,
}

impl Pixel {
    pub fn toggled(self) -> Pixel {
        match self {
            Pixel::Cup => Pixel::Tea,
            Pixel::Tea => Pixel::Cup,
        }
    }

    pub fn is_tea(self) -> bool {
        self == Pixel::Tea
    }
}

/// A `width` x `height` grid of tea and cup pixels, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TeaImage {
    width: usize,
    height: usize,
    pixels: Vec<Pixel>,
}

impl TeaImage {
    pub fn filled(width: usize, height: usize, pixel: Pixel) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            pixels: vec![pixel; width * height],
        })
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<Pixel>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(Error::domain(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Pixel {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, pixel: Pixel) {
        self.pixels[y * self.width + x] = pixel;
    }

    /// Flips the pixel at row-major `index` between tea and cup.
    pub fn toggle(&mut self, index: usize) {
        self.pixels[index] = self.pixels[index].toggled();
    }

    pub fn tea_count(&self) -> usize {
        self.pixels.iter().filter(|p| p.is_tea()).count()
    }

    /// `tea_count() mod 2`.
    pub fn parity(&self) -> u8 {
        (self.tea_count() % 2) as u8
    }

    pub fn tea_fraction(&self) -> f64 {
        self.tea_count() as f64 / self.area() as f64
    }

    /// Number of cells that differ. Panics on mismatched dimensions.
    pub fn hamming(&self, other: &TeaImage) -> usize {
        assert_eq!(
            (self.width, self.height),
            (other.width, other.height),
            "hamming distance needs equal dimensions"
        );
        self.pixels
            .iter()
            .zip(&other.pixels)
            .filter(|(a, b)| a != b)
            .count()
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::domain(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    width
        .checked_mul(height)
        .map(|_| ())
        .ok_or_else(|| Error::domain("image area overflows"))
}

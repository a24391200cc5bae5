//! On-disk dataset layout.
//!
//! ```text
//! <dir>/img_00000.pgm     I_0 (base image, no label)
//! <dir>/img_NNNNN.pgm     I_r for each record, N = round
//! <dir>/manifest.csv      round,filename,label,tea_count (LF, UTF-8)
//! <dir>/config.json       SimConfig fields + provenance_hash + relabeled
//! ```
//!
//! Images are binary PGM (`P5`, maxval 255, one byte per pixel, row-major)
//! with tea stored as 0 (black) and cup as 255 (white).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, FlipOutcome, Pixel, Record, SimConfig, TeaImage};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const PROVENANCE_FILE: &str = "config.json";
const MANIFEST_HEADER: [&str; 4] = ["round", "filename", "label", "tea_count"];

const TEA_BYTE: u8 = 0;
const CUP_BYTE: u8 = 255;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub round: u64,
    pub filename: String,
    pub label: u8,
    pub tea_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceFile {
    #[serde(flatten)]
    config: SimConfig,
    provenance_hash: String,
    relabeled: bool,
}

pub fn image_filename(round: u64) -> String {
    format!("img_{round:05}.pgm")
}

pub fn write_pgm(image: &TeaImage, path: &Path) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    bytes.extend(image.pixels().iter().map(|p| match p {
        Pixel::Tea => TEA_BYTE,
        Pixel::Cup => CUP_BYTE,
    }));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<TeaImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|(line, msg)| Error::data(path, Some(line), msg))
}

/// Parses a binary PGM; errors carry the 1-based header line.
fn decode_pgm(bytes: &[u8]) -> std::result::Result<TeaImage, (u64, String)> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err((1, "bad magic number, expected P5".into()));
    }
    let mut pos = 2;
    let mut line = 1u64;
    let mut fields = [0usize; 3];
    for (slot, name) in fields.iter_mut().zip(["width", "height", "maxval"]) {
        // Whitespace and `#` comments may separate header fields.
        loop {
            match bytes.get(pos) {
                Some(b'\n') => {
                    line += 1;
                    pos += 1;
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or((line, format!("missing or invalid {name}")))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err((line, format!("maxval must be 255, got {maxval}")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err((
            line,
            "expected a single whitespace byte before the raster".into(),
        ));
    }
    pos += 1;
    let area = width
        .checked_mul(height)
        .filter(|&a| a > 0)
        .ok_or((line, format!("invalid dimensions {width}x{height}")))?;
    let raster = &bytes[pos..];
    if raster.len() != area {
        return Err((
            line,
            format!("raster has {} bytes, expected {area}", raster.len()),
        ));
    }
    let pixels = raster
        .iter()
        .enumerate()
        .map(|(i, &b)| match b {
            TEA_BYTE => Ok(Pixel::Tea),
            CUP_BYTE => Ok(Pixel::Cup),
            other => Err((
                line,
                format!("pixel {i} has value {other}, expected 0 or 255"),
            )),
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    TeaImage::from_pixels(width, height, pixels).map_err(|e| (line, e.to_string()))
}

/// Writes `ds` into `dir` (created if needed) and returns the manifest written.
pub fn export_dataset(ds: &Dataset, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_pgm(&ds.base_image, &dir.join(image_filename(0)))?;

    let rows: Vec<ManifestRow> = ds
        .records
        .iter()
        .map(|rec| ManifestRow {
            round: rec.round,
            filename: image_filename(rec.round),
            label: rec.label.as_bit(),
            tea_count: rec.image.tea_count(),
        })
        .collect();
    for (rec, row) in ds.records.iter().zip(&rows) {
        write_pgm(&rec.image, &dir.join(&row.filename))?;
    }

    let manifest_path = dir.join(MANIFEST_FILE);
    let file = fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    write_manifest_csv(&rows, BufWriter::new(file))
        .map_err(|e| Error::data(&manifest_path, None, e.to_string()))?;

    let provenance = ProvenanceFile {
        config: ds.config.clone(),
        provenance_hash: ds.provenance_hash.clone(),
        relabeled: ds.relabeled,
    };
    let config_path = dir.join(PROVENANCE_FILE);
    let mut json = serde_json::to_string_pretty(&provenance).expect("provenance serializes");
    json.push('\n');
    fs::write(&config_path, json).map_err(|e| Error::io(&config_path, e))?;

    Ok(Manifest { rows })
}

/// Reads a dataset written by [`export_dataset`], validating every file.
pub fn import_dataset(dir: &Path) -> Result<Dataset> {
    let config_path = dir.join(PROVENANCE_FILE);
    let text = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
    let provenance: ProvenanceFile = serde_json::from_str(&text)
        .map_err(|e| Error::data(&config_path, Some(e.line() as u64), e.to_string()))?;
    let config = provenance.config;
    if config.provenance_hash() != provenance.provenance_hash {
        return Err(Error::data(
            &config_path,
            None,
            "provenance_hash does not match the recorded configuration",
        ));
    }

    let load = |name: &str| -> Result<(PathBuf, TeaImage)> {
        let path = dir.join(name);
        let image = read_pgm(&path)?;
        if (image.width(), image.height()) != (config.width, config.height) {
            return Err(Error::data(
                &path,
                None,
                format!(
                    "image is {}x{}, config says {}x{}",
                    image.width(),
                    image.height(),
                    config.width,
                    config.height
                ),
            ));
        }
        Ok((path, image))
    };
    let (_, base_image) = load(&image_filename(0))?;

    let manifest_path = dir.join(MANIFEST_FILE);
    let file = fs::File::open(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::data(&manifest_path, Some(1), e.to_string()))?;
    if headers.iter().ne(MANIFEST_HEADER) {
        return Err(Error::data(
            &manifest_path,
            Some(1),
            format!("header must be {}", MANIFEST_HEADER.join(",")),
        ));
    }

    let mut records = Vec::new();
    for (i, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let line = i as u64 + 2;
        let row_err = |msg: String| Error::data(&manifest_path, Some(line), msg);
        let row = row.map_err(|e| row_err(e.to_string()))?;
        let label = FlipOutcome::from_bit(row.label)
            .ok_or_else(|| row_err(format!("label must be 0 or 1, got {}", row.label)))?;
        if row.round == 0 {
            return Err(row_err("round 0 is the base image and has no label".into()));
        }
        let (path, image) = load(&row.filename)?;
        if image.tea_count() != row.tea_count {
            return Err(row_err(format!(
                "tea_count {} disagrees with {} ({} tea pixels)",
                row.tea_count,
                path.display(),
                image.tea_count()
            )));
        }
        records.push(Record {
            round: row.round,
            image,
            label,
        });
    }

    Ok(Dataset {
        records,
        config,
        base_image,
        provenance_hash: provenance.provenance_hash,
        relabeled: provenance.relabeled,
    })
}

/// Writes manifest rows, header first, with LF line endings.
pub fn write_manifest_csv<W: Write>(rows: &[ManifestRow], out: W) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(out);
    writer.write_record(MANIFEST_HEADER)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

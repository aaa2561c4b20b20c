//! Image datasets: synthetic generation, manifests and file formats.
//!
//! A dataset directory holds `images.csv` (one flattened image per row, full
//! precision) and `manifest.json`, which records each sample's squared norm
//! for decoding along with how the data was produced.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{encode, EncodedSet, ImageSample, NormContext};
use crate::error::{Error, Result};
use crate::metrics::csv_err;
use crate::pnm::{self, PnmImage};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const IMAGES_FILE: &str = "images.csv";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Binary,
    Grayscale,
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(DatasetKind::Binary),
            "grayscale" => Ok(DatasetKind::Grayscale),
            other => Err(Error::InvalidConfig(format!("unknown dataset kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pbm,
    Pgm,
    Csv,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
        ext.to_ascii_lowercase().parse()
    }
}

impl FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pbm" => Ok(ImageFormat::Pbm),
            "pgm" => Ok(ImageFormat::Pgm),
            "csv" => Ok(ImageFormat::Csv),
            other => Err(Error::UnsupportedFormat(format!("{other:?} (expected pbm, pgm or csv)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: usize,
    pub sum_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub side: usize,
    pub count: usize,
    pub kind: Option<DatasetKind>,
    pub seed: Option<u64>,
    pub source: String,
    pub images: String,
    pub samples: Vec<SampleEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    pub side: usize,
    pub samples: Vec<ImageSample>,
    pub manifest: Manifest,
}

impl ImageDataset {
    /// Validates the samples and builds a manifest for them.
    pub fn new(side: usize, samples: Vec<ImageSample>, kind: Option<DatasetKind>, seed: Option<u64>, source: &str) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("a dataset needs at least one image".into()));
        }
        let n = side * side;
        if !n.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "{side}x{side} images have {n} pixels, which is not a power of two"
            )));
        }
        let mut entries = Vec::with_capacity(samples.len());
        for s in &samples {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: s.len(),
                });
            }
            let (_, ctx) = encode(s)?;
            entries.push(SampleEntry {
                id: s.id,
                sum_sq: ctx.sum_sq,
            });
        }
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            side,
            count: samples.len(),
            kind,
            seed,
            source: source.to_string(),
            images: IMAGES_FILE.to_string(),
            samples: entries,
        };
        Ok(Self { side, samples, manifest })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.side * self.side
    }

    pub fn norms(&self) -> Vec<NormContext> {
        self.manifest
            .samples
            .iter()
            .map(|e| NormContext { sum_sq: e.sum_sq })
            .collect()
    }

    /// Amplitude states paired with the manifest's stored norms.
    pub fn encoded(&self) -> Result<EncodedSet> {
        let states = self
            .samples
            .iter()
            .map(|s| encode(s).map(|(state, _)| state))
            .collect::<Result<Vec<_>>>()?;
        Ok(EncodedSet {
            states,
            norms: self.norms(),
        })
    }

    pub fn pixels(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.pixels.clone()).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_images(&self.pixels(), self.side, &dir.join(IMAGES_FILE), ImageFormat::Csv)?;
        write_json(&dir.join(MANIFEST_FILE), &self.manifest)
    }

    /// Loads a dataset directory, a manifest path, or a bare image file.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
            ));
        }
        let manifest_path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else if path.file_name().is_some_and(|f| f == MANIFEST_FILE) {
            path.to_path_buf()
        } else {
            let format = ImageFormat::from_path(path)?;
            let (side, images) = load_images(path, format)?;
            let samples = images.into_iter().enumerate().map(|(i, p)| ImageSample::new(i, p)).collect();
            return Self::new(side, samples, None, None, &path.display().to_string());
        };
        let manifest: Manifest = read_json(&manifest_path)?;
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let images_path = dir.join(&manifest.images);
        let (side, images) = load_images(&images_path, ImageFormat::from_path(&images_path)?)?;
        if side != manifest.side || images.len() != manifest.count || manifest.samples.len() != manifest.count {
            return Err(Error::malformed(
                &manifest_path,
                format!(
                    "manifest describes {} images of side {}, found {} of side {side}",
                    manifest.count,
                    manifest.side,
                    images.len()
                ),
            ));
        }
        let samples: Vec<ImageSample> = images
            .into_iter()
            .zip(&manifest.samples)
            .map(|(p, e)| ImageSample::new(e.id, p))
            .collect();
        for (s, e) in samples.iter().zip(&manifest.samples) {
            let actual: f64 = s.pixels.iter().map(|p| p * p).sum();
            if e.sum_sq.is_nan() || e.sum_sq <= 0.0 || (actual - e.sum_sq).abs() > 1e-9 * e.sum_sq.max(1.0) {
                return Err(Error::malformed(
                    &manifest_path,
                    format!("sample {} has sum_sq {} but its pixels give {actual}", e.id, e.sum_sq),
                ));
            }
        }
        let mut ds = Self::new(side, samples, manifest.kind, manifest.seed, &manifest.source)?;
        ds.manifest = manifest;
        Ok(ds)
    }
}

/// Seeded synthetic images. Binary images have each pixel 0 or 1 with equal
/// probability; all-zero and repeated images are redrawn. Grayscale pixels
/// are uniform in `[0, 1)`.
pub fn generate_dataset(count: usize, side: usize, seed: u64, kind: DatasetKind) -> Result<ImageDataset> {
    if count == 0 {
        return Err(Error::InvalidConfig("count must be at least 1".into()));
    }
    let n = side * side;
    if kind == DatasetKind::Binary && n < 128 {
        let available = (1u128 << n) - 1;
        if count as u128 > available {
            return Err(Error::Unsatisfiable {
                requested: count,
                available,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut samples = Vec::with_capacity(count);
    while samples.len() < count {
        let pixels: Vec<f64> = match kind {
            DatasetKind::Binary => (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect(),
            DatasetKind::Grayscale => (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
        };
        if pixels.iter().all(|&p| p == 0.0) {
            continue;
        }
        if !seen.insert(pixels.iter().map(|p| p.to_bits()).collect()) {
            continue;
        }
        samples.push(ImageSample::new(samples.len(), pixels));
    }
    ImageDataset::new(side, samples, Some(kind), Some(seed), "generated")
}

fn side_of(n: usize, path: &Path) -> Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::malformed(path, format!("row of {n} values is not a square image")));
    }
    Ok(side)
}

/// Reads square images; returns the side length and row-major pixels.
pub fn load_images(path: &Path, format: ImageFormat) -> Result<(usize, Vec<Vec<f64>>)> {
    match format {
        ImageFormat::Csv => {
            let mut r = csv::ReaderBuilder::new()
                .has_headers(false)
                .from_path(path)
                .map_err(|e| csv_err(path, e))?;
            let mut rows = Vec::new();
            for (line, rec) in r.records().enumerate() {
                let rec = rec.map_err(|e| csv_err(path, e))?;
                let row = rec
                    .iter()
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::malformed(path, format!("line {}: {e}", line + 1)))?;
                rows.push(row);
            }
            let first = rows.first().ok_or_else(|| Error::malformed(path, "no images"))?;
            let side = side_of(first.len(), path)?;
            Ok((side, rows))
        }
        ImageFormat::Pbm | ImageFormat::Pgm => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let images = pnm::parse(&bytes).map_err(|e| Error::malformed(path, e))?;
            let side = images[0].width;
            let mut rows = Vec::with_capacity(images.len());
            for img in images {
                if img.width != side || img.height != side {
                    return Err(Error::malformed(
                        path,
                        format!("image is {}x{}, expected {side}x{side}", img.width, img.height),
                    ));
                }
                rows.push(img.pixels);
            }
            Ok((side, rows))
        }
    }
}

pub fn save_images(images: &[Vec<f64>], side: usize, path: &Path, format: ImageFormat) -> Result<()> {
    if let Some(bad) = images.iter().find(|p| p.len() != side * side) {
        return Err(Error::DimensionMismatch {
            expected: side * side,
            actual: bad.len(),
        });
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let pnm_images = || -> Vec<PnmImage> {
        images
            .iter()
            .map(|p| PnmImage {
                width: side,
                height: side,
                pixels: p.clone(),
            })
            .collect()
    };
    match format {
        ImageFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_path(path)
                .map_err(|e| csv_err(path, e))?;
            for row in images {
                w.write_record(row.iter().map(f64::to_string)).map_err(|e| csv_err(path, e))?;
            }
            w.flush().map_err(|e| Error::io(path, e))
        }
        ImageFormat::Pbm => {
            let text = pnm::write_pbm(&pnm_images()).map_err(Error::UnsupportedFormat)?;
            fs::write(path, text).map_err(|e| Error::io(path, e))
        }
        ImageFormat::Pgm => fs::write(path, pnm::write_pgm(&pnm_images(), 255)).map_err(|e| Error::io(path, e)),
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::malformed(path, e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))
}

pub fn default_data_dir(out: &Path) -> PathBuf {
    out.join("data")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate_dataset(25, 4, 42, DatasetKind::Binary).unwrap();
        let b = generate_dataset(25, 4, 42, DatasetKind::Binary).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_dataset(25, 4, 43, DatasetKind::Binary).unwrap());
    }

    #[test]
    fn binary_images_are_distinct_and_nonzero() {
        let ds = generate_dataset(25, 4, 42, DatasetKind::Binary).unwrap();
        let mut seen = HashSet::new();
        for s in &ds.samples {
            assert!(s.pixels.iter().all(|&p| p == 0.0 || p == 1.0));
            assert!(!s.is_zero());
            assert!(seen.insert(s.pixels.iter().map(|p| p.to_bits()).collect::<Vec<_>>()));
        }
        let one = generate_dataset(1, 2, 9, DatasetKind::Binary).unwrap();
        assert_eq!(one.len(), 1);
        assert!(!one.samples[0].is_zero());
        // All fifteen nonzero 2x2 images can be drawn, but not sixteen.
        assert_eq!(generate_dataset(15, 2, 1, DatasetKind::Binary).unwrap().len(), 15);
        assert!(matches!(
            generate_dataset(16, 2, 1, DatasetKind::Binary),
            Err(Error::Unsatisfiable { requested: 16, available: 15 })
        ));
    }

    #[test]
    fn grayscale_in_unit_interval() {
        let ds = generate_dataset(10, 4, 1, DatasetKind::Grayscale).unwrap();
        assert!(ds.samples.iter().flat_map(|s| &s.pixels).all(|p| (0.0..1.0).contains(p)));
    }

    #[test]
    fn rejects_non_power_of_two_and_zero_images() {
        assert!(generate_dataset(2, 3, 1, DatasetKind::Binary).is_err());
        let zero = vec![ImageSample::new(0, vec![0.0; 4])];
        assert!(matches!(ImageDataset::new(2, zero, None, None, "t"), Err(Error::ZeroVector)));
    }

    #[test]
    fn manifest_carries_norms() {
        let ds = generate_dataset(5, 4, 3, DatasetKind::Binary).unwrap();
        for (s, e) in ds.samples.iter().zip(&ds.manifest.samples) {
            assert_eq!(e.sum_sq, s.pixels.iter().sum::<f64>());
        }
    }

    #[test]
    fn directory_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_dataset(6, 4, 5, DatasetKind::Grayscale).unwrap();
        ds.save(dir.path()).unwrap();
        assert_eq!(ImageDataset::load(dir.path()).unwrap(), ds);
        assert_eq!(ImageDataset::load(&dir.path().join(MANIFEST_FILE)).unwrap(), ds);
    }

    #[test]
    fn pbm_and_csv_roundtrips_are_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_dataset(8, 4, 5, DatasetKind::Binary).unwrap();
        let pbm = dir.path().join("x.pbm");
        save_images(&ds.pixels(), 4, &pbm, ImageFormat::Pbm).unwrap();
        assert_eq!(load_images(&pbm, ImageFormat::Pbm).unwrap(), (4, ds.pixels()));

        let gray = generate_dataset(8, 4, 5, DatasetKind::Grayscale).unwrap();
        let csv = dir.path().join("x.csv");
        save_images(&gray.pixels(), 4, &csv, ImageFormat::Csv).unwrap();
        assert_eq!(load_images(&csv, ImageFormat::Csv).unwrap(), (4, gray.pixels()));

        let pgm = dir.path().join("x.pgm");
        save_images(&gray.pixels(), 4, &pgm, ImageFormat::Pgm).unwrap();
        let (_, back) = load_images(&pgm, ImageFormat::Pgm).unwrap();
        for (a, b) in back.iter().flatten().zip(gray.pixels().iter().flatten()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        let loaded = ImageDataset::load(&pbm).unwrap();
        assert_eq!(loaded.pixels(), ds.pixels());
    }

    #[test]
    fn malformed_and_unsupported_files() {
        let dir = tempfile::tempdir().unwrap();
        let truncated = dir.path().join("t.pbm");
        fs::write(&truncated, "P1\n4 4\n1 0 1").unwrap();
        assert!(matches!(
            load_images(&truncated, ImageFormat::Pbm),
            Err(Error::MalformedFile { .. })
        ));
        let ragged = dir.path().join("r.csv");
        fs::write(&ragged, "1,0,0,1\n1,0\n").unwrap();
        assert!(matches!(load_images(&ragged, ImageFormat::Csv), Err(Error::MalformedFile { .. })));
        let text = dir.path().join("t.csv");
        fs::write(&text, "1,0,x,1\n").unwrap();
        assert!(matches!(load_images(&text, ImageFormat::Csv), Err(Error::MalformedFile { .. })));
        assert!(matches!("png".parse::<ImageFormat>(), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(
            ImageDataset::load(&dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn tampered_manifest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = generate_dataset(3, 2, 5, DatasetKind::Binary).unwrap();
        ds.manifest.samples[1].sum_sq += 1.0;
        ds.save(dir.path()).unwrap();
        assert!(matches!(ImageDataset::load(dir.path()), Err(Error::MalformedFile { .. })));
    }
}

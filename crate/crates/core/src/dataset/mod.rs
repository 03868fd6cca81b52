//! Sample schema, JSONL I/O, deterministic splits, and feature channels.
//!
//! A sample couples a feature vector with gold 1–5 scores for the nine
//! rubric attributes, plus an optional comment-feature channel and optional
//! grade/media metadata. Everything that touches randomness (splits,
//! jitter) takes an explicit seed and is bit-reproducible.

mod synthetic;

pub use synthetic::{
    clustered_weights, default_attribute_clusters, default_weights, generate_synthetic,
    orthogonal_weights, weight_cosine_matrix, SyntheticSpec, DEFAULT_NOISE_STD,
    DEFAULT_SCORE_MASSES,
};

use crate::num::Vector;
use crate::seed::rng_for;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

/// Lowest valid score label.
pub const SCORE_MIN: u8 = 1;
/// Highest valid score label.
pub const SCORE_MAX: u8 = 5;

/// Errors from loading, validating, splitting, or generating data.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("invalid sample '{id}': {message}")]
    Validation { id: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
}

/// The nine scored rubric attributes, in canonical order.
///
/// The order below is load-bearing: every per-attribute array, report row,
/// matrix axis, and CSV in the crate uses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Realism,
    Deformation,
    Imagination,
    ColorRichness,
    ColorContrast,
    LineCombination,
    LineTexture,
    PictureOrganization,
    Transformation,
}

impl Attribute {
    /// All attributes in canonical order.
    pub const ALL: [Attribute; 9] = [
        Attribute::Realism,
        Attribute::Deformation,
        Attribute::Imagination,
        Attribute::ColorRichness,
        Attribute::ColorContrast,
        Attribute::LineCombination,
        Attribute::LineTexture,
        Attribute::PictureOrganization,
        Attribute::Transformation,
    ];

    /// Number of attributes.
    pub const COUNT: usize = 9;

    /// Position in canonical order.
    pub fn index(self) -> usize {
        Attribute::ALL.iter().position(|a| *a == self).expect("member of ALL")
    }

    pub fn from_index(i: usize) -> Option<Attribute> {
        Attribute::ALL.get(i).copied()
    }

    /// The snake_case key used in JSONL and CSV files.
    pub fn key(self) -> &'static str {
        match self {
            Attribute::Realism => "realism",
            Attribute::Deformation => "deformation",
            Attribute::Imagination => "imagination",
            Attribute::ColorRichness => "color_richness",
            Attribute::ColorContrast => "color_contrast",
            Attribute::LineCombination => "line_combination",
            Attribute::LineTexture => "line_texture",
            Attribute::PictureOrganization => "picture_organization",
            Attribute::Transformation => "transformation",
        }
    }

    pub fn from_key(key: &str) -> Option<Attribute> {
        Attribute::ALL.iter().copied().find(|a| a.key() == key)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl std::str::FromStr for Attribute {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attribute::from_key(s).ok_or_else(|| format!("unknown attribute '{s}'"))
    }
}

/// Gold 1–5 scores for all nine attributes.
///
/// Serialized as an object with exactly the nine snake_case attribute keys;
/// unknown or missing keys are rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreMap {
    pub realism: u8,
    pub deformation: u8,
    pub imagination: u8,
    pub color_richness: u8,
    pub color_contrast: u8,
    pub line_combination: u8,
    pub line_texture: u8,
    pub picture_organization: u8,
    pub transformation: u8,
}

impl ScoreMap {
    /// Builds a map by evaluating `f` for each attribute in canonical order.
    pub fn from_fn(mut f: impl FnMut(Attribute) -> u8) -> ScoreMap {
        ScoreMap {
            realism: f(Attribute::Realism),
            deformation: f(Attribute::Deformation),
            imagination: f(Attribute::Imagination),
            color_richness: f(Attribute::ColorRichness),
            color_contrast: f(Attribute::ColorContrast),
            line_combination: f(Attribute::LineCombination),
            line_texture: f(Attribute::LineTexture),
            picture_organization: f(Attribute::PictureOrganization),
            transformation: f(Attribute::Transformation),
        }
    }

    /// Every attribute at the same score.
    pub fn uniform(score: u8) -> ScoreMap {
        ScoreMap::from_fn(|_| score)
    }

    pub fn get(&self, a: Attribute) -> u8 {
        match a {
            Attribute::Realism => self.realism,
            Attribute::Deformation => self.deformation,
            Attribute::Imagination => self.imagination,
            Attribute::ColorRichness => self.color_richness,
            Attribute::ColorContrast => self.color_contrast,
            Attribute::LineCombination => self.line_combination,
            Attribute::LineTexture => self.line_texture,
            Attribute::PictureOrganization => self.picture_organization,
            Attribute::Transformation => self.transformation,
        }
    }

    pub fn set(&mut self, a: Attribute, v: u8) {
        match a {
            Attribute::Realism => self.realism = v,
            Attribute::Deformation => self.deformation = v,
            Attribute::Imagination => self.imagination = v,
            Attribute::ColorRichness => self.color_richness = v,
            Attribute::ColorContrast => self.color_contrast = v,
            Attribute::LineCombination => self.line_combination = v,
            Attribute::LineTexture => self.line_texture = v,
            Attribute::PictureOrganization => self.picture_organization = v,
            Attribute::Transformation => self.transformation = v,
        }
    }
}

/// A fixed-size map from [`Attribute`] to `T`, iterated in canonical order.
///
/// Serializes as an object keyed by the snake_case attribute names; all nine
/// keys are required and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMap<T> {
    items: [T; 9],
}

impl<T> AttributeMap<T> {
    pub fn from_fn(f: impl FnMut(Attribute) -> T) -> Self {
        AttributeMap { items: Attribute::ALL.map(f) }
    }

    pub fn get(&self, a: Attribute) -> &T {
        &self.items[a.index()]
    }

    pub fn get_mut(&mut self, a: Attribute) -> &mut T {
        &mut self.items[a.index()]
    }

    /// Pairs in canonical attribute order.
    pub fn iter(&self) -> impl Iterator<Item = (Attribute, &T)> {
        Attribute::ALL.iter().copied().zip(self.items.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(Attribute, &T) -> U) -> AttributeMap<U> {
        AttributeMap::from_fn(|a| f(a, self.get(a)))
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}

impl<T: Serialize> Serialize for AttributeMap<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(9))?;
        for (a, v) in self.iter() {
            map.serialize_entry(a.key(), v)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for AttributeMap<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MapVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for MapVisitor<T> {
            type Value = AttributeMap<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object with the nine attribute keys")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut slots: [Option<T>; 9] = Default::default();
                while let Some(key) = access.next_key::<String>()? {
                    let attr = Attribute::from_key(&key).ok_or_else(|| {
                        serde::de::Error::custom(format!("unknown attribute key '{key}'"))
                    })?;
                    if slots[attr.index()].is_some() {
                        return Err(serde::de::Error::custom(format!(
                            "duplicate attribute key '{key}'"
                        )));
                    }
                    slots[attr.index()] = Some(access.next_value()?);
                }
                for (i, slot) in slots.iter().enumerate() {
                    if slot.is_none() {
                        return Err(serde::de::Error::custom(format!(
                            "missing attribute key '{}'",
                            Attribute::ALL[i].key()
                        )));
                    }
                }
                Ok(AttributeMap { items: slots.map(|s| s.expect("checked above")) })
            }
        }

        deserializer.deserialize_map(MapVisitor(std::marker::PhantomData))
    }
}

/// One scored artwork: features, gold scores, optional comment channel,
/// optional grade/media metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub id: String,
    pub features: Vector,
    pub scores: ScoreMap,
    /// Auxiliary comment-derived features; `null` when the sample has none.
    #[serde(default)]
    pub comment_features: Option<Vector>,
    /// Optional grade-band metadata, passed through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade: Option<String>,
    /// Optional media/material metadata, passed through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media: Option<String>,
}

impl Sample {
    /// Validates one sample in isolation: non-empty finite features, scores
    /// in 1..=5, finite comment features.
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.features.is_empty() {
            return Err(DatasetError::Validation {
                id: self.id.clone(),
                message: "features must be non-empty".to_string(),
            });
        }
        if !self.features.is_finite() {
            return Err(DatasetError::Validation {
                id: self.id.clone(),
                message: "features contain a non-finite value".to_string(),
            });
        }
        for attr in Attribute::ALL {
            let s = self.scores.get(attr);
            if !(SCORE_MIN..=SCORE_MAX).contains(&s) {
                return Err(DatasetError::Validation {
                    id: self.id.clone(),
                    message: format!("score for '{attr}' is {s}, expected 1..=5"),
                });
            }
        }
        if let Some(c) = &self.comment_features {
            if !c.is_finite() {
                return Err(DatasetError::Validation {
                    id: self.id.clone(),
                    message: "comment_features contain a non-finite value".to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Image-feature and comment-feature widths of a sample collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetDims {
    pub d_img: usize,
    /// 0 when no sample carries comment features.
    pub d_cmt: usize,
}

/// Validates a collection: every sample individually, consistent feature
/// width, consistent comment width. Returns the widths.
pub fn validate_samples(samples: &[Sample]) -> Result<DatasetDims, DatasetError> {
    let first = samples
        .first()
        .ok_or_else(|| DatasetError::Insufficient("empty sample collection".to_string()))?;
    let d_img = first.features.len();
    let mut d_cmt = 0usize;
    for s in samples {
        s.validate()?;
        if s.features.len() != d_img {
            return Err(DatasetError::Validation {
                id: s.id.clone(),
                message: format!("feature length {} differs from {}", s.features.len(), d_img),
            });
        }
        if let Some(c) = &s.comment_features {
            if d_cmt == 0 {
                d_cmt = c.len();
            }
            if c.len() != d_cmt {
                return Err(DatasetError::Validation {
                    id: s.id.clone(),
                    message: format!(
                        "comment feature length {} differs from {}",
                        c.len(),
                        d_cmt
                    ),
                });
            }
        }
    }
    Ok(DatasetDims { d_img, d_cmt })
}

/// Loads newline-delimited JSON samples and validates the collection.
/// Parse failures carry the file path and 1-based line number.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<Sample>, DatasetError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            path: display.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        samples.push(sample);
    }
    validate_samples(&samples)?;
    Ok(samples)
}

/// Writes samples as newline-delimited JSON, one object per line, in the
/// given order. Output is byte-deterministic for identical inputs.
pub fn save_jsonl(path: impl AsRef<Path>, samples: &[Sample]) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut file = std::fs::File::create(path).map_err(|source| DatasetError::Io {
        path: display.clone(),
        source,
    })?;
    for s in samples {
        let line = serde_json::to_string(s).map_err(|e| DatasetError::Parse {
            path: display.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(file, "{line}").map_err(|source| DatasetError::Io {
            path: display.clone(),
            source,
        })?;
    }
    Ok(())
}

/// Fractions and seed for a train/val/test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// The standard 80/10/10 split under the given seed.
    pub fn standard(seed: u64) -> SplitSpec {
        SplitSpec { train_frac: 0.8, val_frac: 0.1, test_frac: 0.1, seed }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(DatasetError::Config(
                "split fractions must be finite and non-negative".to_string(),
            ));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// The three parts of a split, in sample order produced by the seeded
/// shuffle.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Splits samples into train/val/test by a seeded shuffle.
///
/// Validation and test sizes are `round(n · frac)`; the remainder goes to
/// train. Deterministic for a given seed; the three parts are disjoint and
/// exhaustive. Requires at least 3 samples.
pub fn split(samples: &[Sample], spec: &SplitSpec) -> Result<Split, DatasetError> {
    spec.validate()?;
    let n = samples.len();
    if n < 3 {
        return Err(DatasetError::Insufficient(format!(
            "need at least 3 samples to split, got {n}"
        )));
    }
    let val_n = (n as f64 * spec.val_frac).round() as usize;
    let test_n = (n as f64 * spec.test_frac).round() as usize;
    if val_n + test_n >= n {
        return Err(DatasetError::Insufficient(format!(
            "split leaves no training data (n={n}, val={val_n}, test={test_n})"
        )));
    }
    let train_n = n - val_n - test_n;

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(spec.seed, "dataset/split");
    indices.shuffle(&mut rng);

    let take = |range: std::ops::Range<usize>| -> Vec<Sample> {
        indices[range].iter().map(|&i| samples[i].clone()).collect()
    };
    Ok(Split {
        train: take(0..train_n),
        val: take(train_n..train_n + val_n),
        test: take(train_n + val_n..n),
    })
}

/// Image features concatenated with the comment channel: the sample's
/// comment features when present, zeros otherwise, always `d_cmt` wide.
/// With `d_cmt == 0` this is the image features unchanged.
pub fn concat_comment_channel(sample: &Sample, d_cmt: usize) -> Result<Vector, DatasetError> {
    let mut out = Vec::with_capacity(sample.features.len() + d_cmt);
    out.extend_from_slice(sample.features.as_slice());
    match &sample.comment_features {
        Some(c) => {
            if c.len() != d_cmt {
                return Err(DatasetError::Validation {
                    id: sample.id.clone(),
                    message: format!(
                        "comment feature length {} does not match channel width {}",
                        c.len(),
                        d_cmt
                    ),
                });
            }
            out.extend_from_slice(c.as_slice());
        }
        None => out.extend(std::iter::repeat_n(0.0, d_cmt)),
    }
    Ok(Vector::new(out))
}

/// Multiplies each image feature by an independent uniform factor from
/// `[1 - magnitude, 1 + magnitude]`. Magnitude 0 returns a bitwise-identical
/// sample; negative magnitude is a configuration error. Comment features and
/// metadata pass through untouched.
pub fn jitter_features(sample: &Sample, magnitude: f64, seed: u64) -> Result<Sample, DatasetError> {
    if !magnitude.is_finite() || magnitude < 0.0 {
        return Err(DatasetError::Config(format!(
            "jitter magnitude must be finite and >= 0, got {magnitude}"
        )));
    }
    let mut out = sample.clone();
    if magnitude == 0.0 {
        return Ok(out);
    }
    let mut rng = rng_for(seed, "dataset/jitter");
    for f in out.features.as_mut_slice() {
        let factor: f64 = rng.random_range(1.0 - magnitude..=1.0 + magnitude);
        *f *= factor;
    }
    Ok(out)
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DistanceMetric, TextonError};
use crate::features::{ColorFeature, FeatureConfig, Normalization, TextureFeature, COLOR_DIM, TEXTURE_DIM};

pub const FORMAT_VERSION: &str = "1";

/// Per-class color and texture textons, `C * K` rows each, class-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TextonDictionary {
    classes: Vec<String>,
    k: usize,
    metric: DistanceMetric,
    config: FeatureConfig,
    seed: u64,
    color: Vec<ColorFeature>,
    texture: Vec<TextureFeature>,
}

impl TextonDictionary {
    pub fn new(
        classes: Vec<String>,
        k: usize,
        metric: DistanceMetric,
        config: FeatureConfig,
        seed: u64,
        color: Vec<ColorFeature>,
        texture: Vec<TextureFeature>,
    ) -> Result<Self, TextonError> {
        let rows = classes.len() * k;
        if classes.is_empty() || k == 0 {
            return Err(TextonError::InvalidDictionary("no classes or zero textons per class".into()));
        }
        if color.len() != rows || texture.len() != rows {
            return Err(TextonError::InvalidDictionary(format!(
                "expected {rows} color and texture rows, found {} and {}",
                color.len(),
                texture.len()
            )));
        }
        let finite = color.iter().flatten().chain(texture.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(TextonError::InvalidDictionary("non-finite texton value".into()));
        }
        Ok(Self {
            classes,
            k,
            metric,
            config,
            seed,
            color,
            texture,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// All color textons; row `class * k + texton`.
    pub fn color_textons(&self) -> &[ColorFeature] {
        &self.color
    }

    pub fn texture_textons(&self) -> &[TextureFeature] {
        &self.texture
    }

    pub fn color_texton(&self, class: usize, texton: usize) -> &ColorFeature {
        &self.color[class * self.k + texton]
    }

    pub fn texture_texton(&self, class: usize, texton: usize) -> &TextureFeature {
        &self.texture[class * self.k + texton]
    }

    pub fn to_json(&self) -> Vec<u8> {
        let file = DictionaryFile {
            format_version: FORMAT_VERSION.to_string(),
            classes: self.classes.clone(),
            k: self.k,
            metric: self.metric,
            filter_size: self.config.filter_size,
            normalization: self.config.normalization,
            seed: self.seed,
            color_textons: self.color.iter().map(|r| r.to_vec()).collect(),
            texture_textons: self.texture.iter().map(|r| r.to_vec()).collect(),
        };
        let mut out = serde_json::to_vec_pretty(&file).expect("dictionary serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, TextonError> {
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| TextonError::CorruptFile(e.to_string()))?;
        match value.get("format_version") {
            Some(serde_json::Value::String(v)) if v == FORMAT_VERSION => {}
            Some(other) => {
                return Err(TextonError::FormatVersionMismatch {
                    found: other.as_str().map_or_else(|| other.to_string(), str::to_string),
                })
            }
            None => return Err(TextonError::CorruptFile("missing format_version".into())),
        }
        let file: DictionaryFile =
            serde_json::from_value(value).map_err(|e| TextonError::CorruptFile(e.to_string()))?;
        let config = FeatureConfig::new(file.filter_size).map_err(|e| TextonError::CorruptFile(e.to_string()))?;
        let config = FeatureConfig {
            normalization: file.normalization,
            ..config
        };
        let color = rows::<COLOR_DIM>(&file.color_textons)?;
        let texture = rows::<TEXTURE_DIM>(&file.texture_textons)?;
        Self::new(file.classes, file.k, file.metric, config, file.seed, color, texture)
            .map_err(|e| TextonError::CorruptFile(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TextonError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextonError> {
        Self::from_json(&std::fs::read(path)?)
    }
}

fn rows<const N: usize>(raw: &[Vec<f64>]) -> Result<Vec<[f64; N]>, TextonError> {
    raw.iter()
        .map(|r| {
            <[f64; N]>::try_from(r.as_slice())
                .map_err(|_| TextonError::CorruptFile(format!("texton row of length {} (expected {N})", r.len())))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct DictionaryFile {
    format_version: String,
    classes: Vec<String>,
    k: usize,
    metric: DistanceMetric,
    filter_size: usize,
    normalization: Normalization,
    seed: u64,
    color_textons: Vec<Vec<f64>>,
    texture_textons: Vec<Vec<f64>>,
}

//! Class-semantic color and texture textons.
//!
//! Each class gets its own K color textons and K texture textons, learnt by k-means over
//! that class's training pixels only. Stacking them class by class gives the `C * K`
//! color and texture dictionaries used for nearest-texton mapping.

mod dictionary;
mod distance;
mod kmeans;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use dictionary::{TextonDictionary, FORMAT_VERSION};
pub use distance::{distance, DistanceMetric};
pub use kmeans::{kmeans, kmeans_with_rng, KMeansOptions, KMeansResult};

use crate::features::{ColorFeature, FeatureConfig, FeatureError, FeatureExtractor, TextureFeature};
use crate::image_model::RgbImage;

/// Pixels sampled from each training region.
pub const DEFAULT_SAMPLES_PER_REGION: usize = 120;

#[derive(Debug, Error)]
pub enum TextonError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{points} points cannot form {k} clusters")]
    TooFewPoints { points: usize, k: usize },
    #[error("region has no pixels")]
    EmptyRegion,
    #[error("class {class} has {count} training samples, fewer than K = {k}")]
    ClassUnderpopulated { class: usize, count: usize, k: usize },
    #[error("sample class {class} is outside 0..{classes}")]
    InvalidClass { class: usize, classes: usize },
    #[error("invalid dictionary: {0}")]
    InvalidDictionary(String),
    #[error("unsupported dictionary format version {found:?}")]
    FormatVersionMismatch { found: String },
    #[error("corrupt dictionary file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub class: usize,
    pub color: ColorFeature,
    pub texture: TextureFeature,
}

/// Draws `n` distinct pixels (all of them when the region is smaller) from a cropped
/// region and returns their features labelled with `class`.
pub fn sample_training_pixels(
    extractor: &FeatureExtractor,
    region: &RgbImage,
    class: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<TrainingSample>, TextonError> {
    sample_masked(extractor, region, None, class, n, seed)
}

/// Like [`sample_training_pixels`], restricted to pixels where `mask` is set.
pub fn sample_training_pixels_masked(
    extractor: &FeatureExtractor,
    image: &RgbImage,
    mask: &[bool],
    class: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<TrainingSample>, TextonError> {
    if mask.len() != image.len() {
        return Err(TextonError::DimensionMismatch {
            expected: image.len(),
            found: mask.len(),
        });
    }
    sample_masked(extractor, image, Some(mask), class, n, seed)
}

fn sample_masked(
    extractor: &FeatureExtractor,
    image: &RgbImage,
    mask: Option<&[bool]>,
    class: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<TrainingSample>, TextonError> {
    let candidates: Vec<usize> = match mask {
        Some(m) => (0..image.len()).filter(|&i| m[i]).collect(),
        None => (0..image.len()).collect(),
    };
    if candidates.is_empty() || n == 0 {
        return Err(TextonError::EmptyRegion);
    }
    let picked: Vec<usize> = if candidates.len() <= n {
        candidates
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        index::sample(&mut rng, candidates.len(), n)
            .into_iter()
            .map(|i| candidates[i])
            .collect()
    };
    let features = extractor.extract(image)?;
    let (color, texture) = (features.color.as_slice(), features.texture.as_slice());
    Ok(picked
        .into_iter()
        .map(|i| TrainingSample {
            class,
            color: color[i],
            texture: texture[i],
        })
        .collect())
}

/// Learns `k` color and `k` texture textons per class and stacks them class-major.
/// Within a class, textons are sorted lexicographically.
pub fn train_dictionary(
    samples: &[TrainingSample],
    classes: Vec<String>,
    k: usize,
    metric: DistanceMetric,
    config: FeatureConfig,
    seed: u64,
    options: KMeansOptions,
) -> Result<TextonDictionary, TextonError> {
    let c = classes.len();
    let mut per_class: Vec<Vec<&TrainingSample>> = vec![Vec::new(); c];
    for s in samples {
        per_class
            .get_mut(s.class)
            .ok_or(TextonError::InvalidClass {
                class: s.class,
                classes: c,
            })?
            .push(s);
    }
    if let Some((class, members)) = per_class.iter().enumerate().find(|(_, m)| m.len() < k) {
        return Err(TextonError::ClassUnderpopulated {
            class,
            count: members.len(),
            k,
        });
    }

    let mut color = Vec::with_capacity(c * k);
    let mut texture = Vec::with_capacity(c * k);
    for (class, members) in per_class.iter().enumerate() {
        let color_pts: Vec<&[f64]> = members.iter().map(|s| &s.color[..]).collect();
        let texture_pts: Vec<&[f64]> = members.iter().map(|s| &s.texture[..]).collect();
        let color_centers = cluster(&color_pts, k, metric, seed, 2 * class as u64, options)?;
        let texture_centers = cluster(&texture_pts, k, metric, seed, 2 * class as u64 + 1, options)?;
        color.extend(color_centers.iter().map(|v| to_array(v)));
        texture.extend(texture_centers.iter().map(|v| to_array(v)));
    }
    TextonDictionary::new(classes, k, metric, config, seed, color, texture)
}

fn cluster(
    points: &[&[f64]],
    k: usize,
    metric: DistanceMetric,
    seed: u64,
    stream: u64,
    options: KMeansOptions,
) -> Result<Vec<Vec<f64>>, TextonError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut centers = kmeans_with_rng(points, k, metric, &mut rng, options)?.centers;
    centers.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(centers)
}

fn to_array<const N: usize>(v: &[f64]) -> [f64; N] {
    v.try_into().expect("center dimensionality matches features")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extractor() -> FeatureExtractor {
        FeatureExtractor::new(FeatureConfig::default()).unwrap()
    }

    fn noisy_region(w: usize, h: usize) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| [(x * 13 % 256) as u8, (y * 7 % 256) as u8, ((x + y) * 5 % 256) as u8])
    }

    #[test]
    fn samples_distinct_pixels() {
        let region = noisy_region(20, 10);
        let s = sample_training_pixels(&extractor(), &region, 2, 120, 7).unwrap();
        assert_eq!(s.len(), 120);
        assert!(s.iter().all(|t| t.class == 2));
        let mut colors: Vec<_> = s.iter().map(|t| t.color.map(f64::to_bits)).collect();
        colors.sort_unstable();
        colors.dedup();
        assert_eq!(colors.len(), 120);
    }

    #[test]
    fn small_region_takes_everything() {
        let region = noisy_region(10, 7);
        let mask: Vec<bool> = (0..70).map(|i| i < 50).collect();
        let s = sample_training_pixels_masked(&extractor(), &region, &mask, 0, 120, 1).unwrap();
        assert_eq!(s.len(), 50);
    }

    #[test]
    fn sampling_is_deterministic() {
        let region = noisy_region(30, 30);
        let a = sample_training_pixels(&extractor(), &region, 1, 120, 99).unwrap();
        let b = sample_training_pixels(&extractor(), &region, 1, 120, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_training_pixels(&extractor(), &region, 1, 120, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_mask() {
        let region = noisy_region(10, 10);
        assert!(matches!(
            sample_training_pixels_masked(&extractor(), &region, &[false; 100], 0, 5, 0),
            Err(TextonError::EmptyRegion)
        ));
    }

    fn sample(class: usize, v: f64) -> TrainingSample {
        TrainingSample {
            class,
            color: [v; 6],
            texture: [v * 0.5; 17],
        }
    }

    #[test]
    fn one_texton_per_class_equals_sample() {
        let samples: Vec<_> = (0..10).map(|i| sample(i % 2, 0.2 + 0.5 * (i % 2) as f64)).collect();
        let d = train_dictionary(
            &samples,
            vec!["a".into(), "b".into()],
            1,
            DistanceMetric::Euclidean,
            FeatureConfig::default(),
            3,
            KMeansOptions::default(),
        )
        .unwrap();
        assert_eq!(d.color_texton(0, 0), &[0.2; 6]);
        assert_eq!(d.color_texton(1, 0), &[0.7; 6]);
        assert_eq!(d.texture_texton(1, 0), &[0.35; 17]);
    }

    #[test]
    fn underpopulated_class() {
        let samples = vec![sample(0, 0.1), sample(0, 0.2), sample(1, 0.3)];
        let err = train_dictionary(
            &samples,
            vec!["a".into(), "b".into()],
            2,
            DistanceMetric::Euclidean,
            FeatureConfig::default(),
            0,
            KMeansOptions::default(),
        );
        assert!(matches!(err, Err(TextonError::ClassUnderpopulated { class: 1, count: 1, k: 2 })));
    }

    #[test]
    fn invalid_class_index() {
        let err = train_dictionary(
            &[sample(3, 0.1)],
            vec!["a".into()],
            1,
            DistanceMetric::Euclidean,
            FeatureConfig::default(),
            0,
            KMeansOptions::default(),
        );
        assert!(matches!(err, Err(TextonError::InvalidClass { class: 3, classes: 1 })));
    }
}

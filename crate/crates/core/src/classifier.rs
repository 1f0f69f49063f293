//! Texton mapping, per-superpixel occurrence counting and weighted majority voting.
//!
//! Every pixel is mapped to its nearest color texton and nearest texture texton over the
//! whole dictionary. Within a superpixel the hits are counted per class, mixed as
//! `color + w * texture`, divided by the superpixel size, and the largest class wins.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::features::{FeatureConfig, FeatureError, FeatureExtractor, PixelFeatures};
use crate::image_model::{resize_bilinear, ClassPalette, LabelMap, RgbImage, WORKING_SIZE};
use crate::superpixels::{segment_graph_based, SegParams, SegmentError, SuperpixelMap};
use crate::textons::{DistanceMetric, TextonDictionary};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("feature configuration {features:?} does not match dictionary configuration {dictionary:?}")]
    ConfigMismatch {
        features: FeatureConfig,
        dictionary: FeatureConfig,
    },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("region has no pixels")]
    EmptyRegion,
    #[error("mixing weight {0} must be finite and >= 0")]
    InvalidWeight(f64),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

/// Nearest texton (row `class * k + texton`) of every pixel, for color and for texture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextonAssignment {
    width: usize,
    height: usize,
    k: usize,
    color: Vec<u32>,
    texture: Vec<u32>,
}

impl TextonAssignment {
    /// Builds an assignment from `(class, texton)` pairs.
    pub fn from_pairs(
        width: usize,
        height: usize,
        k: usize,
        color: &[(usize, usize)],
        texture: &[(usize, usize)],
    ) -> Result<Self, ClassifyError> {
        if color.len() != width * height || texture.len() != width * height {
            return Err(ClassifyError::DimensionMismatch(width, height, color.len(), texture.len()));
        }
        let flat = |v: &[(usize, usize)]| v.iter().map(|&(c, t)| (c * k + t) as u32).collect();
        Ok(Self {
            width,
            height,
            k,
            color: flat(color),
            texture: flat(texture),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn color(&self, pixel: usize) -> (usize, usize) {
        let r = self.color[pixel] as usize;
        (r / self.k, r % self.k)
    }

    pub fn texture(&self, pixel: usize) -> (usize, usize) {
        let r = self.texture[pixel] as usize;
        (r / self.k, r % self.k)
    }
}

/// Index of the first row with the smallest distance to `v`.
pub fn nearest_texton<const N: usize>(metric: DistanceMetric, v: &[f64; N], rows: &[[f64; N]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    match metric {
        DistanceMetric::Euclidean => {
            for (i, r) in rows.iter().enumerate() {
                let mut d = 0.0;
                for j in 0..N {
                    let t = v[j] - r[j];
                    d += t * t;
                }
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
        }
        _ => {
            for (i, r) in rows.iter().enumerate() {
                let d = metric.eval(v, r);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
        }
    }
    best
}

pub fn map_to_textons(features: &PixelFeatures, dict: &TextonDictionary) -> Result<TextonAssignment, ClassifyError> {
    if features.config != *dict.config() {
        return Err(ClassifyError::ConfigMismatch {
            features: features.config,
            dictionary: *dict.config(),
        });
    }
    let metric = dict.metric();
    let color = features
        .color
        .as_slice()
        .iter()
        .map(|v| nearest_texton(metric, v, dict.color_textons()) as u32)
        .collect();
    let texture = features
        .texture
        .as_slice()
        .iter()
        .map(|v| nearest_texton(metric, v, dict.texture_textons()) as u32)
        .collect();
    Ok(TextonAssignment {
        width: features.width(),
        height: features.height(),
        k: dict.k(),
        color,
        texture,
    })
}

/// Per-superpixel texton hit counts, per (class, texton) and summed per class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccurrenceTable {
    classes: usize,
    k: usize,
    sizes: Vec<usize>,
    color: Vec<u32>,
    texture: Vec<u32>,
    color_class: Vec<u32>,
    texture_class: Vec<u32>,
}

impl OccurrenceTable {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn size(&self, segment: usize) -> usize {
        self.sizes[segment]
    }

    pub fn color_count(&self, segment: usize, class: usize, texton: usize) -> u32 {
        self.color[(segment * self.classes + class) * self.k + texton]
    }

    pub fn texture_count(&self, segment: usize, class: usize, texton: usize) -> u32 {
        self.texture[(segment * self.classes + class) * self.k + texton]
    }

    /// Color hits per class for one segment.
    pub fn color_class_counts(&self, segment: usize) -> &[u32] {
        &self.color_class[segment * self.classes..][..self.classes]
    }

    pub fn texture_class_counts(&self, segment: usize) -> &[u32] {
        &self.texture_class[segment * self.classes..][..self.classes]
    }

    pub fn vote(&self, segment: usize, w: f64) -> ClassProbabilityVector {
        let color: Vec<f64> = self.color_class_counts(segment).iter().map(|&c| f64::from(c)).collect();
        let texture: Vec<f64> = self.texture_class_counts(segment).iter().map(|&c| f64::from(c)).collect();
        mix_and_vote(&color, &texture, w, self.sizes[segment])
    }
}

pub fn accumulate(
    sp: &SuperpixelMap,
    assignment: &TextonAssignment,
    classes: usize,
) -> Result<OccurrenceTable, ClassifyError> {
    if sp.width() != assignment.width || sp.height() != assignment.height {
        return Err(ClassifyError::DimensionMismatch(
            sp.width(),
            sp.height(),
            assignment.width,
            assignment.height,
        ));
    }
    let k = assignment.k;
    let row = classes * k;
    let mut table = OccurrenceTable {
        classes,
        k,
        sizes: sp.segment_sizes(),
        color: vec![0; sp.len() * row],
        texture: vec![0; sp.len() * row],
        color_class: vec![0; sp.len() * classes],
        texture_class: vec![0; sp.len() * classes],
    };
    for (segment, pixels) in sp.segments().iter().enumerate() {
        for &p in pixels {
            let c = assignment.color[p] as usize;
            let t = assignment.texture[p] as usize;
            table.color[segment * row + c] += 1;
            table.texture[segment * row + t] += 1;
            table.color_class[segment * classes + c / k] += 1;
            table.texture_class[segment * classes + t / k] += 1;
        }
    }
    Ok(table)
}

/// Mixed occurrences divided by the segment size; sums to `1 + weight`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassProbabilityVector {
    pub probabilities: Vec<f64>,
    pub weight: f64,
}

impl ClassProbabilityVector {
    /// Class with the highest probability; the lowest index wins ties.
    pub fn label(&self) -> usize {
        argmax(&self.probabilities)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}

/// Mixes per-class color and texture occurrences of a segment of `m` pixels.
pub fn mix_and_vote(color: &[f64], texture: &[f64], w: f64, m: usize) -> ClassProbabilityVector {
    let m = m as f64;
    let probabilities = color.iter().zip(texture).map(|(c, t)| (c + w * t) / m).collect();
    ClassProbabilityVector {
        probabilities,
        weight: w,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationResult {
    pub labels: LabelMap,
    /// One vector per superpixel, indexed by superpixel id.
    pub probabilities: Vec<ClassProbabilityVector>,
    pub superpixels: SuperpixelMap,
}

impl SegmentationResult {
    /// CSV rows `superpixel_id,size,p_0..p_{C-1},label`.
    pub fn probability_csv(&self) -> String {
        let classes = self.probabilities.first().map_or(0, |p| p.probabilities.len());
        let mut out = String::from("superpixel_id,size");
        for i in 0..classes {
            let _ = write!(out, ",p_{i}");
        }
        out.push_str(",label\n");
        for (id, (p, seg)) in self.probabilities.iter().zip(self.superpixels.segments()).enumerate() {
            let _ = write!(out, "{id},{}", seg.len());
            for v in &p.probabilities {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", p.label());
        }
        out
    }
}

/// Votes every superpixel and paints its pixels with the winner.
pub fn classify_with_superpixels(
    features: &PixelFeatures,
    sp: &SuperpixelMap,
    dict: &TextonDictionary,
    w: f64,
) -> Result<SegmentationResult, ClassifyError> {
    check_weight(w)?;
    let assignment = map_to_textons(features, dict)?;
    vote_all(sp, &assignment, dict.num_classes(), w)
}

fn vote_all(
    sp: &SuperpixelMap,
    assignment: &TextonAssignment,
    classes: usize,
    w: f64,
) -> Result<SegmentationResult, ClassifyError> {
    let table = accumulate(sp, assignment, classes)?;
    let probabilities: Vec<ClassProbabilityVector> = (0..table.len()).map(|s| table.vote(s, w)).collect();
    let winners: Vec<u8> = probabilities.iter().map(|p| p.label() as u8).collect();
    let data = sp.labels().iter().map(|&l| winners[l as usize]).collect();
    let labels = LabelMap::new(sp.width(), sp.height(), data).expect("superpixel map is non-empty");
    Ok(SegmentationResult {
        labels,
        probabilities,
        superpixels: sp.clone(),
    })
}

fn check_weight(w: f64) -> Result<(), ClassifyError> {
    if w >= 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(ClassifyError::InvalidWeight(w))
    }
}

/// How an image is divided into voting units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SuperpixelMode {
    GraphBased(SegParams),
    /// Every pixel votes alone.
    Singletons,
    /// The whole image is one unit.
    Whole,
}

/// Wall-clock time spent in each pipeline stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub feature_extraction: Duration,
    pub segmentation: Duration,
    pub mapping_and_classification: Duration,
}

impl std::ops::AddAssign for StageTimings {
    fn add_assign(&mut self, o: Self) {
        self.feature_extraction += o.feature_extraction;
        self.segmentation += o.segmentation;
        self.mapping_and_classification += o.mapping_and_classification;
    }
}

/// A dictionary paired with a matching feature extractor.
#[derive(Clone, Debug)]
pub struct Classifier<'a> {
    dict: &'a TextonDictionary,
    extractor: FeatureExtractor,
}

impl<'a> Classifier<'a> {
    pub fn new(dict: &'a TextonDictionary) -> Result<Self, ClassifyError> {
        Ok(Self {
            dict,
            extractor: FeatureExtractor::new(*dict.config())?,
        })
    }

    pub fn dictionary(&self) -> &TextonDictionary {
        self.dict
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    /// Runs the pipeline on `img` as given (no resizing).
    pub fn classify(
        &self,
        img: &RgbImage,
        mode: SuperpixelMode,
        w: f64,
    ) -> Result<(SegmentationResult, StageTimings), ClassifyError> {
        check_weight(w)?;
        let mut timings = StageTimings::default();
        let start = Instant::now();
        let features = self.extractor.extract(img)?;
        timings.feature_extraction = start.elapsed();

        let start = Instant::now();
        let sp = match mode {
            SuperpixelMode::GraphBased(p) => segment_graph_based(img, &p)?,
            SuperpixelMode::Singletons => SuperpixelMap::singletons(img.width(), img.height()),
            SuperpixelMode::Whole => SuperpixelMap::whole(img.width(), img.height()),
        };
        timings.segmentation = start.elapsed();

        let start = Instant::now();
        let result = classify_with_superpixels(&features, &sp, self.dict, w)?;
        timings.mapping_and_classification = start.elapsed();
        Ok((result, timings))
    }

    /// Labels the pixels of `image` selected by `mask` as a single unit.
    pub fn classify_masked_region(
        &self,
        image: &RgbImage,
        mask: &[bool],
        w: f64,
    ) -> Result<ClassProbabilityVector, ClassifyError> {
        check_weight(w)?;
        if mask.len() != image.len() {
            return Err(ClassifyError::DimensionMismatch(image.width(), image.height(), mask.len(), 1));
        }
        let pixels: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        if pixels.is_empty() {
            return Err(ClassifyError::EmptyRegion);
        }
        let features = self.extractor.extract(image)?;
        let assignment = map_to_textons(&features, self.dict)?;
        let raw: Vec<usize> = mask.iter().map(|&m| usize::from(!m)).collect();
        let sp = SuperpixelMap::from_labels(image.width(), image.height(), &raw)?;
        let region = sp.label(pixels[0] % image.width(), pixels[0] / image.width());
        let table = accumulate(&sp, &assignment, self.dict.num_classes())?;
        Ok(table.vote(region, w))
    }
}

/// Resizes to the working size, oversegments and votes per superpixel.
pub fn classify_image(
    img: &RgbImage,
    dict: &TextonDictionary,
    params: &SegParams,
    w: f64,
) -> Result<SegmentationResult, ClassifyError> {
    let img = to_working_size(img);
    Ok(Classifier::new(dict)?
        .classify(&img, SuperpixelMode::GraphBased(*params), w)?
        .0)
}

/// As [`classify_image`] with every pixel deciding on its own.
pub fn classify_pixelwise(img: &RgbImage, dict: &TextonDictionary, w: f64) -> Result<SegmentationResult, ClassifyError> {
    let img = to_working_size(img);
    Ok(Classifier::new(dict)?.classify(&img, SuperpixelMode::Singletons, w)?.0)
}

/// Classifies a cropped region as one superpixel, without resizing.
pub fn classify_region(
    region: &RgbImage,
    dict: &TextonDictionary,
    w: f64,
) -> Result<(usize, ClassProbabilityVector), ClassifyError> {
    let (result, _) = Classifier::new(dict)?.classify(region, SuperpixelMode::Whole, w)?;
    let p = result.probabilities.into_iter().next().ok_or(ClassifyError::EmptyRegion)?;
    Ok((p.label(), p))
}

pub fn to_working_size(img: &RgbImage) -> RgbImage {
    resize_bilinear(img, WORKING_SIZE.0, WORKING_SIZE.1)
}

/// Blends label colors over the image and outlines superpixel boundaries in white.
pub fn render_overlay(img: &RgbImage, result: &SegmentationResult, palette: &ClassPalette) -> RgbImage {
    let labels = &result.labels;
    let blended = RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let src = img.pixel(x, y);
        let tint = palette.color(labels.get(x, y)).unwrap_or([0, 0, 0]);
        std::array::from_fn(|c| ((u16::from(src[c]) + u16::from(tint[c])) / 2) as u8)
    });
    result.superpixels.boundary_overlay(&blended, [255, 255, 255])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_tie_goes_to_lowest_class() {
        let p = mix_and_vote(&[8.0, 2.0], &[2.0, 8.0], 1.0, 10);
        assert_eq!(p.probabilities, vec![1.0, 1.0]);
        assert_eq!(p.label(), 0);
    }

    #[test]
    fn weighted_mix() {
        let p = mix_and_vote(&[6.0, 4.0], &[1.0, 9.0], 1.2, 10);
        assert!((p.probabilities[0] - 0.72).abs() < 1e-12);
        assert!((p.probabilities[1] - 1.48).abs() < 1e-12);
        assert_eq!(p.label(), 1);
    }

    #[test]
    fn zero_weight_is_color_only() {
        let p = mix_and_vote(&[3.0, 5.0, 2.0], &[10.0, 0.0, 0.0], 0.0, 10);
        assert_eq!(p.label(), 1);
    }

    #[test]
    fn accumulate_hand_count() {
        // 3x2 image, superpixels: {0,1}, {2,5}, {3,4}; C = 2, K = 2.
        let sp = SuperpixelMap::from_labels(3, 2, &[0, 0, 1, 2, 2, 1]).unwrap();
        let color = [(0, 0), (1, 1), (1, 0), (0, 1), (0, 1), (1, 0)];
        let texture = [(1, 1), (1, 1), (0, 0), (0, 0), (1, 0), (1, 1)];
        let a = TextonAssignment::from_pairs(3, 2, 2, &color, &texture).unwrap();
        let t = accumulate(&sp, &a, 2).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.color_class_counts(0), &[1, 1]);
        assert_eq!(t.color_class_counts(1), &[0, 2]);
        assert_eq!(t.color_class_counts(2), &[2, 0]);
        assert_eq!(t.texture_class_counts(0), &[0, 2]);
        assert_eq!(t.texture_class_counts(1), &[1, 1]);
        assert_eq!(t.texture_class_counts(2), &[1, 1]);
        assert_eq!(t.color_count(1, 1, 0), 2);
        assert_eq!(t.color_count(2, 0, 1), 2);
        assert_eq!(t.texture_count(0, 1, 1), 2);
        assert_eq!(t.texture_count(2, 1, 0), 1);
    }

    #[test]
    fn single_label_superpixel() {
        let sp = SuperpixelMap::whole(5, 2);
        let a = TextonAssignment::from_pairs(5, 2, 1, &[(1, 0); 10], &[(0, 0); 10]).unwrap();
        let t = accumulate(&sp, &a, 3).unwrap();
        assert_eq!(t.color_class_counts(0), &[0, 10, 0]);
        let p = t.vote(0, 1.0);
        assert!((p.probabilities.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn accumulate_dimension_mismatch() {
        let sp = SuperpixelMap::whole(2, 2);
        let a = TextonAssignment::from_pairs(1, 4, 1, &[(0, 0); 4], &[(0, 0); 4]).unwrap();
        assert!(matches!(accumulate(&sp, &a, 1), Err(ClassifyError::DimensionMismatch(..))));
    }
}

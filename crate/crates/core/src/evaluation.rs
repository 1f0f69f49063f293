//! Pixelwise scoring and the k-fold cross-validation harness for cropped regions.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifyError, Classifier, StageTimings, SuperpixelMode};
use crate::features::{FeatureConfig, FeatureExtractor};
use crate::image_model::{LabelMap, RgbImage, UNKNOWN};
use crate::superpixels::SegParams;
use crate::textons::{
    sample_training_pixels, train_dictionary, DistanceMetric, KMeansOptions, TextonDictionary, TextonError,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dimension mismatch: prediction {0}x{1}, ground truth {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("label {label} at pixel {pixel} is outside 0..{classes}")]
    InvalidLabel { label: u8, pixel: usize, classes: usize },
    #[error("class {class} has {count} regions, fewer than {folds} folds")]
    ClassTooSmall { class: usize, count: usize, folds: usize },
    #[error("cross-validation needs at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("plan does not match the dataset: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Texton(#[from] TextonError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// Pixel counts, rows are ground truth and columns are predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
    ignored: u64,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
            ignored: 0,
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), classes * classes, "counts must be C x C");
        Self {
            classes,
            counts,
            ignored: 0,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize, pixels: u64) {
        self.counts[truth * self.classes + predicted] += pixels;
    }

    pub fn add_ignored(&mut self, pixels: u64) {
        self.ignored += pixels;
    }

    pub fn ignored(&self) -> u64 {
        self.ignored
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.counts[truth * self.classes..][..self.classes].iter().sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes, "class counts differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.ignored += other.ignored;
    }

    /// Rows as percentages of their ground-truth total; empty rows are all zero.
    pub fn row_percentages(&self) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|i| {
                let total = self.row_sum(i);
                (0..self.classes)
                    .map(|j| {
                        if total == 0 {
                            0.0
                        } else {
                            100.0 * self.get(i, j) as f64 / total as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Counts every pixel whose ground truth is known.
pub fn confusion(pred: &LabelMap, gt: &LabelMap, classes: usize) -> Result<ConfusionMatrix, EvalError> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(EvalError::DimensionMismatch(pred.width(), pred.height(), gt.width(), gt.height()));
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (pixel, (&p, &g)) in pred.as_slice().iter().zip(gt.as_slice()).enumerate() {
        if g == UNKNOWN {
            cm.ignored += 1;
            continue;
        }
        for label in [g, p] {
            if label as usize >= classes {
                return Err(EvalError::InvalidLabel { label, pixel, classes });
            }
        }
        cm.add(g as usize, p as usize, 1);
    }
    Ok(cm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    /// Percentage of correctly labelled pixels.
    pub global_accuracy: f64,
    /// Per-class percentage; `None` for classes without ground-truth pixels.
    pub class_accuracies: Vec<Option<f64>>,
    /// Unweighted mean over classes that have ground-truth pixels.
    pub average_class_accuracy: f64,
    pub class_pixel_counts: Vec<u64>,
    pub total_pixels: u64,
    pub ignored_pixels: u64,
    pub confusion: ConfusionMatrix,
}

pub fn metrics(cm: &ConfusionMatrix, class_names: &[String]) -> MetricsReport {
    let total = cm.total();
    let global = if total == 0 {
        0.0
    } else {
        100.0 * cm.trace() as f64 / total as f64
    };
    let class_accuracies: Vec<Option<f64>> = (0..cm.classes)
        .map(|i| {
            let row = cm.row_sum(i);
            (row > 0).then(|| 100.0 * cm.get(i, i) as f64 / row as f64)
        })
        .collect();
    let populated: Vec<f64> = class_accuracies.iter().flatten().copied().collect();
    let average = if populated.is_empty() {
        0.0
    } else {
        populated.iter().sum::<f64>() / populated.len() as f64
    };
    let names = (0..cm.classes)
        .map(|i| class_names.get(i).cloned().unwrap_or_else(|| format!("class{i}")))
        .collect();
    MetricsReport {
        class_names: names,
        global_accuracy: global,
        class_accuracies,
        average_class_accuracy: average,
        class_pixel_counts: (0..cm.classes).map(|i| cm.row_sum(i)).collect(),
        total_pixels: total,
        ignored_pixels: cm.ignored,
        confusion: cm.clone(),
    }
}

impl MetricsReport {
    /// Aligned text table: one column per class, then Average and Global,
    /// followed by the row-normalized confusion matrix.
    pub fn to_text_table(&self) -> String {
        let width = self.class_names.iter().map(String::len).max().unwrap_or(0).max(7) + 2;
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "");
        for name in &self.class_names {
            let _ = write!(out, "{name:>width$}");
        }
        let _ = writeln!(out, "{:>width$}{:>width$}", "Average", "Global");
        let _ = write!(out, "{:<width$}", "accuracy");
        for acc in &self.class_accuracies {
            match acc {
                Some(a) => {
                    let _ = write!(out, "{:>width$}", format!("{a:.1}"));
                }
                None => {
                    let _ = write!(out, "{:>width$}", "-");
                }
            }
        }
        let _ = writeln!(
            out,
            "{:>width$}{:>width$}",
            format!("{:.1}", self.average_class_accuracy),
            format!("{:.1}", self.global_accuracy)
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "confusion (% of ground-truth row)");
        let _ = write!(out, "{:<width$}", "");
        for name in &self.class_names {
            let _ = write!(out, "{name:>width$}");
        }
        let _ = writeln!(out);
        for (name, row) in self.class_names.iter().zip(self.confusion.row_percentages()) {
            let _ = write!(out, "{name:<width$}");
            for v in row {
                let _ = write!(out, "{:>width$}", format!("{v:.1}"));
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(
            out,
            "pixels: {} scored, {} ignored",
            self.total_pixels, self.ignored_pixels
        );
        out
    }
}

/// Per-class partition of region indices into folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossValPlan {
    pub seed: u64,
    /// `folds[class][fold]` lists region indices of that class.
    pub folds: Vec<Vec<Vec<usize>>>,
}

impl CrossValPlan {
    pub fn num_folds(&self) -> usize {
        self.folds.first().map_or(0, Vec::len)
    }
}

/// Shuffles each class's regions (seeded) and deals them round-robin into `folds` folds.
pub fn make_folds(regions_per_class: &[usize], folds: usize, seed: u64) -> Result<CrossValPlan, EvalError> {
    if folds < 2 {
        return Err(EvalError::InvalidFolds(folds));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plan = Vec::with_capacity(regions_per_class.len());
    for (class, &count) in regions_per_class.iter().enumerate() {
        if count < folds {
            return Err(EvalError::ClassTooSmall { class, count, folds });
        }
        let mut order: Vec<usize> = (0..count).collect();
        order.shuffle(&mut rng);
        let mut per_fold = vec![Vec::new(); folds];
        for (i, region) in order.into_iter().enumerate() {
            per_fold[i % folds].push(region);
        }
        plan.push(per_fold);
    }
    Ok(CrossValPlan { seed, folds: plan })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainParams {
    pub k: usize,
    pub metric: DistanceMetric,
    pub features: FeatureConfig,
    pub samples_per_region: usize,
    pub kmeans: KMeansOptions,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            k: 60,
            metric: DistanceMetric::Euclidean,
            features: FeatureConfig::default(),
            samples_per_region: crate::textons::DEFAULT_SAMPLES_PER_REGION,
            kmeans: KMeansOptions::default(),
            seed: 0,
        }
    }
}

/// SplitMix64 over `parts`, for independent per-item seeds.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Cropped regions grouped by class, each region labelled entirely by its class.
#[derive(Clone, Debug)]
pub struct RegionDataset {
    pub class_names: Vec<String>,
    pub regions: Vec<Vec<RgbImage>>,
}

impl RegionDataset {
    pub fn counts(&self) -> Vec<usize> {
        self.regions.iter().map(Vec::len).collect()
    }

    /// Samples every region of the selected indices; `select[class]` lists region indices.
    pub fn training_samples(
        &self,
        select: &[Vec<usize>],
        params: &TrainParams,
    ) -> Result<Vec<crate::textons::TrainingSample>, EvalError> {
        let extractor = FeatureExtractor::new(params.features).map_err(TextonError::from)?;
        let mut samples = Vec::new();
        for (class, indices) in select.iter().enumerate() {
            for &r in indices {
                let seed = derive_seed(params.seed, &[class as u64, r as u64]);
                samples.extend(sample_training_pixels(
                    &extractor,
                    &self.regions[class][r],
                    class,
                    params.samples_per_region,
                    seed,
                )?);
            }
        }
        Ok(samples)
    }

    pub fn train(&self, select: &[Vec<usize>], params: &TrainParams) -> Result<TextonDictionary, EvalError> {
        let samples = self.training_samples(select, params)?;
        Ok(train_dictionary(
            &samples,
            self.class_names.clone(),
            params.k,
            params.metric,
            params.features,
            params.seed,
            params.kmeans,
        )?)
    }

    /// All regions of every class.
    pub fn all_indices(&self) -> Vec<Vec<usize>> {
        self.regions.iter().map(|r| (0..r.len()).collect()).collect()
    }
}

/// Scores held-out regions: every pixel of a region carries the region's single prediction.
pub fn evaluate_regions(
    dict: &TextonDictionary,
    dataset: &RegionDataset,
    select: &[Vec<usize>],
    w: f64,
) -> Result<ConfusionMatrix, EvalError> {
    Ok(evaluate_regions_timed(dict, dataset, select, w)?.0)
}

/// [`evaluate_regions`] plus the summed stage timings.
pub fn evaluate_regions_timed(
    dict: &TextonDictionary,
    dataset: &RegionDataset,
    select: &[Vec<usize>],
    w: f64,
) -> Result<(ConfusionMatrix, StageTimings), EvalError> {
    let classifier = Classifier::new(dict)?;
    let mut cm = ConfusionMatrix::new(dataset.class_names.len());
    let mut timings = StageTimings::default();
    for (class, indices) in select.iter().enumerate() {
        for &r in indices {
            let region = &dataset.regions[class][r];
            let (result, t) = classifier.classify(region, SuperpixelMode::Whole, w)?;
            timings += t;
            let label = result.probabilities[0].label();
            cm.add(class, label, region.len() as u64);
        }
    }
    Ok((cm, timings))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub folds: Vec<MetricsReport>,
    /// Metrics over the pooled confusion matrix of all folds.
    pub pooled: MetricsReport,
    pub mean_global_accuracy: f64,
    /// Sample standard deviation of the per-fold global accuracies.
    pub std_global_accuracy: f64,
    pub mean_average_class_accuracy: f64,
}

impl CrossValReport {
    /// One line per fold, then mean ± std and the pooled table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, f) in self.folds.iter().enumerate() {
            let _ = writeln!(
                out,
                "fold {}: global {:.1}  average {:.1}",
                i + 1,
                f.global_accuracy,
                f.average_class_accuracy
            );
        }
        let _ = writeln!(
            out,
            "global accuracy {:.1} ± {:.1}  average class accuracy {:.1}",
            self.mean_global_accuracy, self.std_global_accuracy, self.mean_average_class_accuracy
        );
        let _ = writeln!(out);
        out.push_str(&self.pooled.to_text_table());
        out
    }
}

/// Trains on all folds but one and tests on the held-out fold, for every fold.
pub fn run_crossval(
    dataset: &RegionDataset,
    plan: &CrossValPlan,
    params: &TrainParams,
    w: f64,
) -> Result<CrossValReport, EvalError> {
    Ok(run_crossval_timed(dataset, plan, params, w)?.0)
}

/// [`run_crossval`] plus test-time stage timings summed over all folds.
pub fn run_crossval_timed(
    dataset: &RegionDataset,
    plan: &CrossValPlan,
    params: &TrainParams,
    w: f64,
) -> Result<(CrossValReport, StageTimings), EvalError> {
    let mut timings = StageTimings::default();
    let folds = plan.num_folds();
    if plan.folds.len() != dataset.regions.len() {
        return Err(EvalError::PlanMismatch(format!(
            "{} classes in plan, {} in dataset",
            plan.folds.len(),
            dataset.regions.len()
        )));
    }
    for (class, per_fold) in plan.folds.iter().enumerate() {
        let count = dataset.regions[class].len();
        if per_fold.iter().flatten().any(|&r| r >= count) {
            return Err(EvalError::PlanMismatch(format!("class {class} references a missing region")));
        }
    }
    let mut reports = Vec::with_capacity(folds);
    let mut pooled = ConfusionMatrix::new(dataset.class_names.len());
    for fold in 0..folds {
        let train: Vec<Vec<usize>> = plan
            .folds
            .iter()
            .map(|per_fold| {
                per_fold
                    .iter()
                    .enumerate()
                    .filter(|(f, _)| *f != fold)
                    .flat_map(|(_, r)| r.iter().copied())
                    .collect()
            })
            .collect();
        let test: Vec<Vec<usize>> = plan.folds.iter().map(|per_fold| per_fold[fold].clone()).collect();
        let fold_params = TrainParams {
            seed: derive_seed(params.seed, &[fold as u64]),
            ..*params
        };
        let dict = dataset.train(&train, &fold_params)?;
        let (cm, t) = evaluate_regions_timed(&dict, dataset, &test, w)?;
        timings += t;
        pooled.merge(&cm);
        reports.push(metrics(&cm, &dataset.class_names));
    }
    let globals: Vec<f64> = reports.iter().map(|r| r.global_accuracy).collect();
    let (mean, std) = mean_std(&globals);
    let averages: Vec<f64> = reports.iter().map(|r| r.average_class_accuracy).collect();
    let report = CrossValReport {
        pooled: metrics(&pooled, &dataset.class_names),
        mean_global_accuracy: mean,
        std_global_accuracy: std,
        mean_average_class_accuracy: mean_std(&averages).0,
        folds: reports,
    };
    Ok((report, timings))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Classifies full images with superpixels and pools their confusion matrices.
/// Ground truth is resampled (nearest neighbour) to the working size when needed.
pub fn evaluate_images<'a>(
    dict: &TextonDictionary,
    images: impl IntoIterator<Item = (&'a RgbImage, &'a LabelMap)>,
    seg: &SegParams,
    w: f64,
) -> Result<ConfusionMatrix, EvalError> {
    let classifier = Classifier::new(dict)?;
    let mut cm = ConfusionMatrix::new(dict.num_classes());
    for (img, gt) in images {
        let img = crate::classifier::to_working_size(img);
        let gt = gt.resize_nearest(img.width(), img.height());
        let (result, _) = classifier.classify(&img, SuperpixelMode::GraphBased(*seg), w)?;
        cm.merge(&confusion(&result.labels, &gt, dict.num_classes())?);
    }
    Ok(cm)
}

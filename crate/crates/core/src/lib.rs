//! Scene segmentation with class-semantic color-texture textons.
//!
//! Training learns, for every class separately, K color textons (clusters of
//! `<R, G, B, L, a, b>` pixel features) and K texture textons (clusters of 17 filter-bank
//! responses). At inference an image is oversegmented into superpixels, each pixel is mapped
//! to its nearest color and texture textons, and each superpixel takes the class with the
//! largest weighted texton occurrence.

pub mod classifier;
pub mod evaluation;
pub mod features;
pub mod image_model;
pub mod superpixels;
pub mod synthetic;
pub mod textons;

pub use classifier::{
    classify_image, classify_pixelwise, classify_region, ClassProbabilityVector, Classifier, ClassifyError,
    SegmentationResult, SuperpixelMode,
};
pub use evaluation::{ConfusionMatrix, CrossValPlan, MetricsReport, RegionDataset, TrainParams};
pub use features::{FeatureConfig, FeatureExtractor, FilterBank};
pub use image_model::{ClassPalette, LabImage, LabelMap, RgbImage, UNKNOWN};
pub use superpixels::{SegParams, SuperpixelMap};
pub use textons::{DistanceMetric, KMeansOptions, TextonDictionary};

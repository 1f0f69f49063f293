//! Run settings: a JSON file whose fields can each be overridden by a flag of the same name.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use texseg::evaluation::TrainParams;
use texseg::features::FILTER_SIZES;
use texseg::{DistanceMetric, FeatureConfig, KMeansOptions, SegParams};

/// Textons per class when labelling whole images.
pub const IMAGE_TEXTONS: usize = 30;
/// Textons per class when classifying cropped regions.
pub const REGION_TEXTONS: usize = 60;

/// Whether a run scores whole images or cropped regions; picks the default texton count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Images,
    Regions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// Textons per class; `None` means the mode default.
    pub textons: Option<usize>,
    pub weight: f64,
    pub filter_size: usize,
    pub distance: DistanceMetric,
    pub seg_sigma: f64,
    pub seg_k: f64,
    pub seg_min: usize,
    pub seed: u64,
    pub palette: Option<PathBuf>,
    /// Root of the cropped-region dataset, one directory per class.
    pub regions: Option<PathBuf>,
    /// TSV of `image<TAB>label` pairs.
    pub manifest: Option<PathBuf>,
    pub samples_per_region: usize,
    pub restarts: usize,
    pub folds: usize,
    /// Worker threads for batch commands; 0 uses every core.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let seg = SegParams::default();
        Self {
            textons: None,
            weight: 1.0,
            filter_size: texseg::features::DEFAULT_FILTER_SIZE,
            distance: DistanceMetric::Euclidean,
            seg_sigma: seg.sigma,
            seg_k: seg.k,
            seg_min: seg.min_size,
            seed: 0,
            palette: None,
            regions: None,
            manifest: None,
            samples_per_region: texseg::textons::DEFAULT_SAMPLES_PER_REGION,
            restarts: KMeansOptions::default().restarts,
            folds: 4,
            jobs: 1,
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.palette, &mut cfg.regions, &mut cfg.manifest].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.textons == Some(0) {
            bail!("textons must be at least 1");
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            bail!("weight {} must be a finite non-negative number", self.weight);
        }
        if !FILTER_SIZES.contains(&self.filter_size) {
            bail!("filter-size {} must be one of {FILTER_SIZES:?}", self.filter_size);
        }
        self.seg_params().validate()?;
        if self.samples_per_region == 0 {
            bail!("samples-per-region must be at least 1");
        }
        if self.restarts == 0 {
            bail!("restarts must be at least 1");
        }
        if self.folds < 2 {
            bail!("folds must be at least 2");
        }
        Ok(())
    }

    pub fn textons_for(&self, mode: Mode) -> usize {
        self.textons.unwrap_or(match mode {
            Mode::Images => IMAGE_TEXTONS,
            Mode::Regions => REGION_TEXTONS,
        })
    }

    pub fn seg_params(&self) -> SegParams {
        SegParams {
            sigma: self.seg_sigma,
            k: self.seg_k,
            min_size: self.seg_min,
        }
    }

    pub fn feature_config(&self) -> Result<FeatureConfig> {
        Ok(FeatureConfig::new(self.filter_size)?)
    }

    pub fn train_params(&self, mode: Mode) -> Result<TrainParams> {
        Ok(TrainParams {
            k: self.textons_for(mode),
            metric: self.distance,
            features: self.feature_config()?,
            samples_per_region: self.samples_per_region,
            kmeans: KMeansOptions {
                restarts: self.restarts,
                ..KMeansOptions::default()
            },
            seed: self.seed,
        })
    }

    pub fn require_regions(&self) -> Result<&Path> {
        self.regions.as_deref().context("a cropped-region dataset is required (--regions)")
    }

    pub fn require_manifest(&self) -> Result<&Path> {
        self.manifest.as_deref().context("an image manifest is required (--manifest)")
    }

    /// Thread pool honouring `jobs`.
    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        Ok(rayon::ThreadPoolBuilder::new().num_threads(self.jobs).build()?)
    }
}

/// Flags shared by every command.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Textons per class (default 30 for images, 60 for cropped regions).
    #[arg(long)]
    pub textons: Option<usize>,
    /// Weight of texture textons relative to color textons.
    #[arg(long)]
    pub weight: Option<f64>,
    /// Filter bank window size (5, 7, ..., 15).
    #[arg(long)]
    pub filter_size: Option<usize>,
    /// euclidean, cityblock, cosine or correlation.
    #[arg(long)]
    pub distance: Option<DistanceMetric>,
    #[arg(long)]
    pub seg_sigma: Option<f64>,
    #[arg(long)]
    pub seg_k: Option<f64>,
    #[arg(long)]
    pub seg_min: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Class palette JSON: `[{"name": .., "rgb": [r, g, b]}, ..]` ending with "unknown".
    #[arg(long, value_name = "FILE")]
    pub palette: Option<PathBuf>,
    /// Cropped-region dataset root with one directory per class.
    #[arg(long, value_name = "DIR")]
    pub regions: Option<PathBuf>,
    /// Manifest of `image<TAB>label` lines.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub samples_per_region: Option<usize>,
    /// K-means restarts per class.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                })*
            };
        }
        apply!(weight, filter_size, distance, seg_sigma, seg_k, seg_min, seed, samples_per_region, restarts, folds, jobs);
        if self.textons.is_some() {
            cfg.textons = self.textons;
        }
        for (dst, src) in [
            (&mut cfg.palette, &self.palette),
            (&mut cfg.regions, &self.regions),
            (&mut cfg.manifest, &self.manifest),
        ] {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

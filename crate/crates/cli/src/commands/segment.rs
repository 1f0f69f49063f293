use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use texseg::classifier::{render_overlay, to_working_size, StageTimings};
use texseg::image_model::encode_label_indices;
use texseg::{ClassPalette, Classifier, RgbImage, SegParams, SuperpixelMode, TextonDictionary};

use super::{secs, write_file};
use crate::config::ConfigArgs;
use crate::dataset::{list_images, resolve_palette};

#[derive(Args, Clone, Debug)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Texton dictionary written by `train`.
    #[arg(long, value_name = "FILE")]
    pub dictionary: PathBuf,
    /// Output directory.
    #[arg(short, long, value_name = "DIR")]
    pub out: PathBuf,
    /// An image, or a directory of images processed in name order.
    pub input: PathBuf,
}

#[derive(Debug, Default)]
pub struct SegmentSummary {
    /// Stems of the images that were written, in input order.
    pub written: Vec<String>,
    pub failed: Vec<(PathBuf, String)>,
    pub timings: StageTimings,
}

struct Job<'a> {
    classifier: &'a Classifier<'a>,
    palette: &'a ClassPalette,
    seg: SegParams,
    weight: f64,
    out: &'a Path,
}

impl Job<'_> {
    /// Writes `<stem>_labels.png`, `<stem>_overlay.png` and `<stem>_probs.csv`.
    fn process(&self, path: &Path) -> Result<(String, usize, StageTimings)> {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .context("input has no file name")?;
        let img = to_working_size(&RgbImage::open(path).with_context(|| format!("decoding {}", path.display()))?);
        let (result, timings) = self
            .classifier
            .classify(&img, SuperpixelMode::GraphBased(self.seg), self.weight)?;
        write_file(&self.out.join(format!("{stem}_labels.png")), encode_label_indices(&result.labels)?)?;
        let overlay = render_overlay(&img, &result, self.palette);
        write_file(&self.out.join(format!("{stem}_overlay.png")), overlay.to_png()?)?;
        write_file(&self.out.join(format!("{stem}_probs.csv")), result.probability_csv())?;
        Ok((stem, result.superpixels.len(), timings))
    }
}

/// Per-file failures are collected rather than returned; the caller decides the exit code.
pub fn run(args: &SegmentArgs) -> Result<SegmentSummary> {
    let cfg = args.config.resolve()?;
    let dict = TextonDictionary::load(&args.dictionary)
        .with_context(|| format!("loading dictionary {}", args.dictionary.display()))?;
    let palette = resolve_palette(cfg.palette.as_deref(), Some(&dict))?;
    let inputs = if args.input.is_dir() {
        list_images(&args.input)?
    } else {
        vec![args.input.clone()]
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let classifier = Classifier::new(&dict)?;
    let job = Job {
        classifier: &classifier,
        palette: &palette,
        seg: cfg.seg_params(),
        weight: cfg.weight,
        out: &args.out,
    };
    let results: Vec<_> = cfg
        .thread_pool()?
        .install(|| inputs.par_iter().map(|p| job.process(p)).collect());

    let mut summary = SegmentSummary::default();
    for (path, result) in inputs.iter().zip(results) {
        match result {
            Ok((stem, segments, t)) => {
                println!(
                    "{stem}: {segments} superpixels; features {:.3}s, segmentation {:.3}s, texton M&C {:.3}s",
                    secs(t.feature_extraction),
                    secs(t.segmentation),
                    secs(t.mapping_and_classification)
                );
                summary.timings += t;
                summary.written.push(stem);
            }
            Err(e) => {
                eprintln!("error: {}: {e:#}", path.display());
                summary.failed.push((path.clone(), format!("{e:#}")));
            }
        }
    }
    println!("{} segmented, {} failed", summary.written.len(), summary.failed.len());
    Ok(summary)
}

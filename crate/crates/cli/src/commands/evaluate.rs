use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use texseg::classifier::StageTimings;
use texseg::evaluation::{confusion, metrics};
use texseg::{Classifier, ConfusionMatrix, LabelMap, MetricsReport, RgbImage, SegParams, SuperpixelMode, TextonDictionary};

use super::write_file;
use crate::config::ConfigArgs;
use crate::dataset::{load_labelled_image, read_manifest, resolve_palette};

#[derive(Args, Clone, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_name = "FILE")]
    pub dictionary: PathBuf,
    /// Directory for `metrics.json` and `metrics.txt`.
    #[arg(short, long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Classifies labelled working-size images and pools their confusion matrices in input order.
pub fn score_images(
    dict: &TextonDictionary,
    images: &[(RgbImage, LabelMap)],
    seg: SegParams,
    weight: f64,
    pool: &rayon::ThreadPool,
) -> Result<(ConfusionMatrix, StageTimings)> {
    let classifier = Classifier::new(dict)?;
    let per_image: Vec<Result<(ConfusionMatrix, StageTimings)>> = pool.install(|| {
        images
            .par_iter()
            .map(|(img, gt)| {
                let (result, t) = classifier.classify(img, SuperpixelMode::GraphBased(seg), weight)?;
                Ok((confusion(&result.labels, gt, dict.num_classes())?, t))
            })
            .collect()
    });
    let mut cm = ConfusionMatrix::new(dict.num_classes());
    let mut timings = StageTimings::default();
    for r in per_image {
        let (c, t) = r?;
        cm.merge(&c);
        timings += t;
    }
    Ok((cm, timings))
}

pub fn run(args: &EvaluateArgs) -> Result<MetricsReport> {
    let cfg = args.config.resolve()?;
    let entries = read_manifest(cfg.require_manifest()?)?;
    let dict = TextonDictionary::load(&args.dictionary)
        .with_context(|| format!("loading dictionary {}", args.dictionary.display()))?;
    let palette = resolve_palette(cfg.palette.as_deref(), Some(&dict))?;
    let pool = cfg.thread_pool()?;
    let images = pool.install(|| {
        entries
            .par_iter()
            .map(|e| load_labelled_image(e, &palette))
            .collect::<Result<Vec<_>>>()
    })?;
    let (cm, _) = score_images(&dict, &images, cfg.seg_params(), cfg.weight, &pool)?;
    let report = metrics(&cm, dict.classes());
    write_file(&args.out.join("metrics.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    let table = report.to_text_table();
    write_file(&args.out.join("metrics.txt"), &table)?;
    print!("{table}");
    Ok(report)
}

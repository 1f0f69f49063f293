use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use texseg::classifier::StageTimings;
use texseg::evaluation::{make_folds, metrics, run_crossval_timed};
use texseg::features::FILTER_SIZES;
use texseg::{DistanceMetric, TextonDictionary};

use super::evaluate::score_images;
use super::{secs, write_file};
use crate::config::{ConfigArgs, Mode, RunConfig};
use crate::dataset::{load_labelled_image, load_regions, read_manifest, resolve_palette};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Textons,
    Weight,
    FilterSize,
    Metric,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Textons => "textons",
            Axis::Weight => "weight",
            Axis::FilterSize => "filter_size",
            Axis::Metric => "metric",
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated values; numeric axes also accept `start:stop:step`.
    #[arg(long)]
    pub values: String,
    /// Accuracy CSV, one row per value.
    #[arg(short, long, value_name = "FILE")]
    pub out: PathBuf,
    /// Optional CSV of per-stage wall-clock times per value.
    #[arg(long, value_name = "FILE")]
    pub timings: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepValue {
    Textons(usize),
    Weight(f64),
    FilterSize(usize),
    Metric(DistanceMetric),
}

impl SweepValue {
    fn apply(self, cfg: &mut RunConfig) {
        match self {
            SweepValue::Textons(k) => cfg.textons = Some(k),
            SweepValue::Weight(w) => cfg.weight = w,
            SweepValue::FilterSize(s) => cfg.filter_size = s,
            SweepValue::Metric(m) => cfg.distance = m,
        }
    }

    fn label(self) -> String {
        match self {
            SweepValue::Textons(k) | SweepValue::FilterSize(k) => k.to_string(),
            SweepValue::Weight(w) => w.to_string(),
            SweepValue::Metric(m) => m.to_string(),
        }
    }
}

fn expand_numeric(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |s: &str| -> Result<f64> { s.trim().parse::<f64>().with_context(|| format!("invalid number {s:?}")) };
        match parts[..] {
            [v] => out.push(num(v)?),
            [start, stop, step] => {
                let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
                if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
                    bail!("invalid range {item:?}");
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                // Rounded so that 0.1:1.5:0.1 yields 0.3 rather than 0.30000000000000004.
                out.extend((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9));
            }
            _ => bail!("invalid value {item:?}; expected a number or start:stop:step"),
        }
    }
    Ok(out)
}

fn as_count(v: f64) -> Result<usize> {
    if v.fract() != 0.0 || v < 0.0 {
        bail!("{v} is not a whole number");
    }
    Ok(v as usize)
}

/// Parses and validates every value before anything runs.
pub fn parse_values(axis: Axis, text: &str) -> Result<Vec<SweepValue>> {
    let values = match axis {
        Axis::Metric => text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<DistanceMetric>().map(SweepValue::Metric).map_err(anyhow::Error::msg))
            .collect::<Result<Vec<_>>>()?,
        Axis::Textons => expand_numeric(text)?
            .into_iter()
            .map(|v| match as_count(v)? {
                0 => bail!("textons must be at least 1"),
                k => Ok(SweepValue::Textons(k)),
            })
            .collect::<Result<Vec<_>>>()?,
        Axis::FilterSize => expand_numeric(text)?
            .into_iter()
            .map(|v| {
                let s = as_count(v)?;
                if !FILTER_SIZES.contains(&s) {
                    bail!("filter size {s} must be one of {FILTER_SIZES:?}");
                }
                Ok(SweepValue::FilterSize(s))
            })
            .collect::<Result<Vec<_>>>()?,
        Axis::Weight => expand_numeric(text)?
            .into_iter()
            .map(|w| {
                if !(w.is_finite() && w >= 0.0) {
                    bail!("weight {w} must be non-negative");
                }
                Ok(SweepValue::Weight(w))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    if values.is_empty() {
        bail!("no values given for {}", axis.name());
    }
    Ok(values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub global_accuracy: f64,
    pub average_class_accuracy: f64,
    pub timings: StageTimings,
}

/// With a manifest, trains on every cropped region and scores the listed images;
/// otherwise runs k-fold cross-validation on the regions for each value.
pub fn run(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let values = parse_values(args.axis, &args.values)?;
    let base = args.config.resolve()?;
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            v.apply(&mut cfg);
            cfg.validate().map(|_| cfg)
        })
        .collect::<Result<_>>()?;

    let palette = resolve_palette(base.palette.as_deref(), None)?;
    let dataset = load_regions(base.require_regions()?, &palette)?;
    let pool = base.thread_pool()?;
    let images = match &base.manifest {
        Some(m) => {
            let entries = read_manifest(m)?;
            Some(pool.install(|| {
                entries
                    .par_iter()
                    .map(|e| load_labelled_image(e, &palette))
                    .collect::<Result<Vec<_>>>()
            })?)
        }
        None => None,
    };

    let mut rows = Vec::with_capacity(values.len());
    let mut cached: Option<(TrainKey, TextonDictionary)> = None;
    for (value, cfg) in values.iter().zip(&configs) {
        let row = match &images {
            Some(images) => {
                let params = cfg.train_params(Mode::Images)?;
                let key = (params.k, cfg.filter_size, cfg.distance);
                if cached.as_ref().map(|c| c.0) != Some(key) {
                    cached = Some((key, dataset.train(&dataset.all_indices(), &params)?));
                }
                let dict = &cached.as_ref().expect("trained above").1;
                let (cm, timings) = score_images(dict, images, cfg.seg_params(), cfg.weight, &pool)?;
                let report = metrics(&cm, dict.classes());
                SweepRow {
                    value: value.label(),
                    global_accuracy: report.global_accuracy,
                    average_class_accuracy: report.average_class_accuracy,
                    timings,
                }
            }
            None => {
                let plan = make_folds(&dataset.counts(), cfg.folds, cfg.seed)?;
                let (report, timings) =
                    run_crossval_timed(&dataset, &plan, &cfg.train_params(Mode::Regions)?, cfg.weight)?;
                SweepRow {
                    value: value.label(),
                    global_accuracy: report.mean_global_accuracy,
                    average_class_accuracy: report.mean_average_class_accuracy,
                    timings,
                }
            }
        };
        println!(
            "{}={}: global {:.2}, average {:.2}; features {:.3}s, segmentation {:.3}s, texton M&C {:.3}s",
            args.axis.name(),
            row.value,
            row.global_accuracy,
            row.average_class_accuracy,
            secs(row.timings.feature_extraction),
            secs(row.timings.segmentation),
            secs(row.timings.mapping_and_classification)
        );
        rows.push(row);
    }

    let mut csv = String::from("axis,value,global_accuracy,average_class_accuracy\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{:.4},{:.4}",
            args.axis.name(),
            r.value,
            r.global_accuracy,
            r.average_class_accuracy
        );
    }
    write_file(&args.out, csv)?;
    if let Some(path) = &args.timings {
        let mut csv = String::from("value,feature_extraction_s,segmentation_s,texton_mapping_classification_s\n");
        for r in &rows {
            let t = r.timings;
            let _ = writeln!(
                csv,
                "{},{:.6},{:.6},{:.6}",
                r.value,
                secs(t.feature_extraction),
                secs(t.segmentation),
                secs(t.mapping_and_classification)
            );
        }
        write_file(path, csv)?;
    }
    Ok(rows)
}

type TrainKey = (usize, usize, DistanceMetric);

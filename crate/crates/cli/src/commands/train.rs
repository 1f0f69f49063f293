use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use texseg::textons::train_dictionary;
use texseg::TextonDictionary;

use super::write_file;
use crate::config::{ConfigArgs, Mode};
use crate::dataset::{load_regions, resolve_palette};

#[derive(Args, Clone, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Where to write the dictionary JSON.
    #[arg(short, long, value_name = "FILE")]
    pub out: PathBuf,
}

/// Samples every cropped region, learns per-class textons and writes the dictionary.
pub fn run(args: &TrainArgs) -> Result<TextonDictionary> {
    let cfg = args.config.resolve()?;
    let palette = resolve_palette(cfg.palette.as_deref(), None)?;
    let dataset = load_regions(cfg.require_regions()?, &palette)?;
    let params = cfg.train_params(Mode::Images)?;
    let samples = dataset.training_samples(&dataset.all_indices(), &params)?;

    let mut per_class = vec![0usize; dataset.class_names.len()];
    for s in &samples {
        per_class[s.class] += 1;
    }
    for ((name, regions), count) in dataset.class_names.iter().zip(dataset.counts()).zip(&per_class) {
        println!("{name}: {regions} regions, {count} samples");
    }

    let dict = train_dictionary(
        &samples,
        dataset.class_names.clone(),
        params.k,
        params.metric,
        params.features,
        params.seed,
        params.kmeans,
    )?;
    write_file(&args.out, dict.to_json())?;
    println!(
        "wrote {} ({} classes x {} textons, {})",
        args.out.display(),
        dict.num_classes(),
        dict.k(),
        dict.metric()
    );
    Ok(dict)
}

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use texseg::evaluation::{make_folds, run_crossval, CrossValReport};

use super::write_file;
use crate::config::{ConfigArgs, Mode};
use crate::dataset::{load_regions, resolve_palette};

#[derive(Args, Clone, Debug)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Directory for `crossval.json` and `crossval.txt`.
    #[arg(short, long, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn run(args: &CrossvalArgs) -> Result<CrossValReport> {
    let cfg = args.config.resolve()?;
    let palette = resolve_palette(cfg.palette.as_deref(), None)?;
    let dataset = load_regions(cfg.require_regions()?, &palette)?;
    let plan = make_folds(&dataset.counts(), cfg.folds, cfg.seed)?;
    let report = run_crossval(&dataset, &plan, &cfg.train_params(Mode::Regions)?, cfg.weight)?;
    write_file(&args.out.join("crossval.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    let text = report.to_text();
    write_file(&args.out.join("crossval.txt"), &text)?;
    print!("{text}");
    Ok(report)
}

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use texseg::synthetic::{palette, render_crop, Material};
use texseg::RgbImage;

pub fn texseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_texseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn save(img: &RgbImage, path: &Path) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, img.to_png().unwrap()).unwrap();
}

/// Writes `<root>/palette.json` and `<root>/regions/<class>/rNN.png`; returns the regions root.
pub fn write_region_dataset(root: &Path, materials: &[Material], per_class: usize, size: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(root.join("palette.json"), palette(materials).to_json()).unwrap();
    let regions = root.join("regions");
    for m in materials {
        for i in 0..per_class {
            save(&render_crop(m, size, size, &mut rng), &regions.join(&m.name).join(format!("r{i:02}.png")));
        }
    }
    regions
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

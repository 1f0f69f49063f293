//! Dataset layouts on disk.
//!
//! Cropped mode: `<root>/<class name>/*.{png,jpg,jpeg}`, one directory per palette class.
//! Image mode: a manifest with one `image_path<TAB>label_path` line per image; relative
//! paths are taken from the manifest's directory, blank lines and `#` comments are skipped.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use texseg::classifier::to_working_size;
use texseg::evaluation::RegionDataset;
use texseg::image_model::{decode_label_map, PaletteEntry};
use texseg::{ClassPalette, LabelMap, RgbImage, TextonDictionary};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if is_image && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

pub fn load_regions(root: &Path, palette: &ClassPalette) -> Result<RegionDataset> {
    let mut regions = Vec::with_capacity(palette.len());
    for name in palette.names() {
        let dir = root.join(&name);
        if !dir.is_dir() {
            bail!("class {name:?}: directory {} not found", dir.display());
        }
        let images = list_images(&dir)?
            .iter()
            .map(|p| RgbImage::open(p).with_context(|| format!("decoding {}", p.display())))
            .collect::<Result<Vec<_>>>()?;
        regions.push(images);
    }
    Ok(RegionDataset {
        class_names: palette.names(),
        regions,
    })
}

/// Display colors for dictionaries used without a palette file; unknown is black.
pub fn default_palette(names: &[String]) -> ClassPalette {
    const COLORS: [[u8; 3]; 10] = [
        [230, 25, 75],
        [60, 180, 75],
        [255, 225, 25],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
        [250, 190, 190],
    ];
    let classes = names
        .iter()
        .enumerate()
        .map(|(i, name)| PaletteEntry {
            name: name.clone(),
            rgb: COLORS.get(i).copied().unwrap_or([(i * 67 % 200 + 40) as u8, (i * 29 % 256) as u8, (i % 254 + 1) as u8]),
        })
        .collect();
    ClassPalette::new(classes, [0, 0, 0]).expect("generated palette colors are distinct")
}

/// The configured palette, checked against the dictionary's classes when one is given.
/// Without a palette file the dictionary's class names get generated colors.
pub fn resolve_palette(path: Option<&Path>, dict: Option<&TextonDictionary>) -> Result<ClassPalette> {
    let palette = match (path, dict) {
        (Some(p), _) => ClassPalette::load(p).with_context(|| format!("loading palette {}", p.display()))?,
        (None, Some(d)) => return Ok(default_palette(d.classes())),
        (None, None) => bail!("a class palette is required (--palette)"),
    };
    if let Some(d) = dict {
        if palette.names() != d.classes() {
            bail!(
                "palette classes {:?} do not match dictionary classes {:?}",
                palette.names(),
                d.classes()
            );
        }
    }
    Ok(palette)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub label: PathBuf,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [image, label] = fields[..] else {
            bail!("{}:{}: expected image<TAB>label, found {} fields", path.display(), n + 1, fields.len());
        };
        let resolve = |f: &str| -> Result<PathBuf> {
            let p = base.join(f.trim());
            if !p.is_file() {
                bail!("{}:{}: {} does not exist", path.display(), n + 1, p.display());
            }
            Ok(p)
        };
        entries.push(ManifestEntry {
            image: resolve(image)?,
            label: resolve(label)?,
        });
    }
    Ok(entries)
}

/// Decodes an image and its label map and brings both to the working size.
pub fn load_labelled_image(entry: &ManifestEntry, palette: &ClassPalette) -> Result<(RgbImage, LabelMap)> {
    let img = RgbImage::open(&entry.image).with_context(|| format!("decoding {}", entry.image.display()))?;
    let bytes = std::fs::read(&entry.label).with_context(|| format!("reading {}", entry.label.display()))?;
    let gt = decode_label_map(&bytes, palette).with_context(|| format!("decoding labels {}", entry.label.display()))?;
    if (gt.width(), gt.height()) != (img.width(), img.height()) {
        bail!(
            "{} is {}x{} but its labels {} are {}x{}",
            entry.image.display(),
            img.width(),
            img.height(),
            entry.label.display(),
            gt.width(),
            gt.height()
        );
    }
    let img = to_working_size(&img);
    let gt = gt.resize_nearest(img.width(), img.height());
    Ok((img, gt))
}

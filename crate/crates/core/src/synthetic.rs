//! Procedural materials for benchmarks and demos: flat base colors modulated by an
//! oriented sinusoid, rendered as cropped regions or as labelled mosaics.

use rand::Rng;

use crate::image_model::{ClassPalette, LabelMap, PaletteEntry, RgbImage};

#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    pub name: String,
    pub base: [f64; 3],
    /// Sinusoid frequency in cycles per pixel.
    pub frequency: f64,
    /// Stripe orientation in radians.
    pub orientation: f64,
    /// Peak luminance modulation in 8-bit units.
    pub amplitude: f64,
    /// Half-width of uniform per-pixel noise.
    pub noise: f64,
}

impl Material {
    /// Value at global coordinates `(x, y)` for a given phase.
    pub fn sample<R: Rng + ?Sized>(&self, x: f64, y: f64, phase: f64, rng: &mut R) -> [u8; 3] {
        let t = x * self.orientation.cos() + y * self.orientation.sin();
        let wave = self.amplitude * (std::f64::consts::TAU * self.frequency * t + phase).sin();
        let jitter = if self.noise > 0.0 {
            rng.gen_range(-self.noise..=self.noise)
        } else {
            0.0
        };
        self.base.map(|c| (c + wave + jitter).round().clamp(0.0, 255.0) as u8)
    }
}

/// Seven materials with distinct colors and distinct stripe frequencies.
pub fn standard_materials() -> Vec<Material> {
    let table: [(&str, [f64; 3], f64, f64); 7] = [
        ("brown_grass", [170.0, 140.0, 80.0], 0.05, 0.3),
        ("green_grass", [70.0, 150.0, 60.0], 0.09, 1.2),
        ("road", [120.0, 120.0, 125.0], 0.13, 0.0),
        ("soil", [150.0, 95.0, 60.0], 0.18, 2.0),
        ("tree_leaf", [35.0, 90.0, 40.0], 0.23, 0.8),
        ("tree_stem", [90.0, 65.0, 50.0], 0.28, 1.57),
        ("sky", [140.0, 185.0, 235.0], 0.33, 2.6),
    ];
    table.iter()
        .map(|&(name, base, frequency, orientation)| Material {
            name: name.to_string(),
            base,
            frequency,
            orientation,
            amplitude: 22.0,
            noise: 6.0,
        })
        .collect()
}

/// Palette with one bright display color per material; unknown is black.
pub fn palette(materials: &[Material]) -> ClassPalette {
    let display = [
        [230, 190, 40],
        [40, 220, 40],
        [160, 160, 160],
        [200, 100, 20],
        [0, 120, 0],
        [120, 60, 20],
        [80, 160, 255],
    ];
    let classes = materials
        .iter()
        .enumerate()
        .map(|(i, m)| PaletteEntry {
            name: m.name.clone(),
            rgb: display.get(i).copied().unwrap_or([(i * 37 % 256) as u8, (i * 91 % 256) as u8, 255]),
        })
        .collect();
    ClassPalette::new(classes, [0, 0, 0]).expect("distinct display colors")
}

/// A crop of one material with a random phase and offset.
pub fn render_crop<R: Rng + ?Sized>(material: &Material, width: usize, height: usize, rng: &mut R) -> RgbImage {
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let (ox, oy) = (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0));
    RgbImage::from_fn(width, height, |x, y| material.sample(x as f64 + ox, y as f64 + oy, phase, rng))
}

/// `count` crops per material, grouped by material.
pub fn render_region_corpus<R: Rng + ?Sized>(
    materials: &[Material],
    count: usize,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Vec<Vec<RgbImage>> {
    materials
        .iter()
        .map(|m| (0..count).map(|_| render_crop(m, width, height, rng)).collect())
        .collect()
}

/// A Voronoi mosaic of `cells` random sites, each filled with a random material.
/// Every material appears at least once when `cells >= materials.len()`.
pub fn render_mosaic<R: Rng + ?Sized>(
    materials: &[Material],
    width: usize,
    height: usize,
    cells: usize,
    rng: &mut R,
) -> (RgbImage, LabelMap) {
    assert!(cells > 0 && !materials.is_empty());
    let sites: Vec<(f64, f64)> = (0..cells)
        .map(|_| (rng.gen_range(0.0..width as f64), rng.gen_range(0.0..height as f64)))
        .collect();
    let kinds: Vec<usize> = (0..cells)
        .map(|i| {
            if i < materials.len() && cells >= materials.len() {
                i
            } else {
                rng.gen_range(0..materials.len())
            }
        })
        .collect();
    let phases: Vec<f64> = (0..cells).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let mut labels = Vec::with_capacity(width * height);
    let img = RgbImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let cell = sites
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1 .0 - fx).powi(2) + (a.1 .1 - fy).powi(2);
                let db = (b.1 .0 - fx).powi(2) + (b.1 .1 - fy).powi(2);
                da.total_cmp(&db)
            })
            .map(|(i, _)| i)
            .expect("at least one site");
        labels.push(kinds[cell] as u8);
        materials[kinds[cell]].sample(fx, fy, phases[cell], rng)
    });
    let labels = LabelMap::new(width, height, labels).expect("one label per pixel");
    (img, labels)
}

/// Replaces a `fraction` of pixels with uniformly random colors.
pub fn add_impulse_noise<R: Rng + ?Sized>(img: &RgbImage, fraction: f64, rng: &mut R) -> RgbImage {
    let mut out = img.clone();
    let n = (img.len() as f64 * fraction).round() as usize;
    for i in rand::seq::index::sample(rng, img.len(), n) {
        out.set_pixel(i % img.width(), i / img.width(), [rng.gen(), rng.gen(), rng.gen()]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mosaic_covers_all_materials() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let materials = standard_materials();
        let (img, labels) = render_mosaic(&materials, 64, 48, 9, &mut rng);
        assert_eq!((img.width(), labels.width()), (64, 64));
        assert!(labels.as_slice().iter().all(|&l| (l as usize) < materials.len()));
    }

    #[test]
    fn impulse_noise_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = RgbImage::filled(100, 10, [1, 2, 3]);
        let noisy = add_impulse_noise(&img, 0.1, &mut rng);
        let changed = img.pixels().zip(noisy.pixels()).filter(|(a, b)| a != b).count();
        assert!(changed <= 100 && changed > 90);
    }

    #[test]
    fn palette_has_one_entry_per_material() {
        let p = palette(&standard_materials());
        assert_eq!(p.len(), 7);
        assert_eq!(p.names()[6], "sky");
    }
}

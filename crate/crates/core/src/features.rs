//! Per-pixel color and filter-bank texture features.
//!
//! The color feature is `<R, G, B, L, a, b>` and the texture feature stacks 17 filter
//! responses: Gaussians at σ ∈ {1, 2, 4} on L, a and b, Laplacians of Gaussian at
//! σ ∈ {1, 2, 4, 8} on L, and x/y Gaussian derivatives at σ ∈ {2, 4} on L.
//! All channels are scaled to `[0, 1]` before they are concatenated or filtered.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image_model::{rgb_to_lab, LabImage, RgbImage};

pub const COLOR_DIM: usize = 6;
pub const TEXTURE_DIM: usize = 17;

pub type ColorFeature = [f64; COLOR_DIM];
pub type TextureFeature = [f64; TEXTURE_DIM];

/// Filter window sides accepted by [`build_filter_bank`].
pub const FILTER_SIZES: [usize; 6] = [5, 7, 9, 11, 13, 15];
pub const DEFAULT_FILTER_SIZE: usize = 7;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("filter window size {0} must be odd and within 5..=15")]
    InvalidWindowSize(usize),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image {width}x{height} is smaller than the {size}x{size} filter window")]
    ImageSmallerThanKernel {
        width: usize,
        height: usize,
        size: usize,
    },
}

/// Channel scaling: R,G,B / rgb_scale, L / l_scale, (a or b + ab_offset) / ab_scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub rgb_scale: f64,
    pub l_scale: f64,
    pub ab_offset: f64,
    pub ab_scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            rgb_scale: 255.0,
            l_scale: 100.0,
            ab_offset: 128.0,
            ab_scale: 256.0,
        }
    }
}

impl Normalization {
    #[inline]
    pub fn lab(&self, lab: [f64; 3]) -> [f64; 3] {
        [
            lab[0] / self.l_scale,
            (lab[1] + self.ab_offset) / self.ab_scale,
            (lab[2] + self.ab_offset) / self.ab_scale,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub filter_size: usize,
    pub normalization: Normalization,
}

impl FeatureConfig {
    pub fn new(filter_size: usize) -> Result<Self, FeatureError> {
        check_window(filter_size)?;
        Ok(Self {
            filter_size,
            normalization: Normalization::default(),
        })
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            filter_size: DEFAULT_FILTER_SIZE,
            normalization: Normalization::default(),
        }
    }
}

fn check_window(s: usize) -> Result<(), FeatureError> {
    if FILTER_SIZES.contains(&s) {
        Ok(())
    } else {
        Err(FeatureError::InvalidWindowSize(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    L,
    A,
    B,
}

impl Channel {
    fn index(self) -> usize {
        match self {
            Channel::L => 0,
            Channel::A => 1,
            Channel::B => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterKind {
    Gaussian,
    LaplacianOfGaussian,
    /// First derivative along x, positive when intensity increases rightward.
    DerivativeX,
    /// First derivative along y, positive when intensity increases downward.
    DerivativeY,
}

/// A square correlation kernel, row-major, centred on the middle sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub channel: Channel,
    pub kind: FilterKind,
    pub sigma: f64,
    pub size: usize,
    pub weights: Vec<f64>,
}

impl Kernel {
    fn sample(channel: Channel, kind: FilterKind, sigma: f64, size: usize) -> Self {
        let r = (size / 2) as isize;
        let s2 = sigma * sigma;
        let mut weights = Vec::with_capacity(size * size);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (dx as f64, dy as f64);
                let g = (-(x * x + y * y) / (2.0 * s2)).exp();
                weights.push(match kind {
                    FilterKind::Gaussian => g,
                    FilterKind::LaplacianOfGaussian => (x * x + y * y - 2.0 * s2) / (s2 * s2) * g,
                    FilterKind::DerivativeX => x / s2 * g,
                    FilterKind::DerivativeY => y / s2 * g,
                });
            }
        }
        match kind {
            FilterKind::Gaussian => {
                let sum: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= sum);
            }
            _ => {
                let mean = weights.iter().sum::<f64>() / weights.len() as f64;
                weights.iter_mut().for_each(|w| *w -= mean);
                let l1: f64 = weights.iter().map(|w| w.abs()).sum();
                weights.iter_mut().for_each(|w| *w /= l1);
            }
        }
        Self {
            channel,
            kind,
            sigma,
            size,
            weights,
        }
    }

    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let r = (self.size / 2) as isize;
        self.weights[((dy + r) as usize) * self.size + (dx + r) as usize]
    }
}

/// The 17 texture kernels, in feature-vector order.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    size: usize,
    kernels: Vec<Kernel>,
}

impl FilterBank {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }
}

pub fn build_filter_bank(size: usize) -> Result<FilterBank, FeatureError> {
    check_window(size)?;
    let mut kernels = Vec::with_capacity(TEXTURE_DIM);
    for channel in [Channel::L, Channel::A, Channel::B] {
        for sigma in [1.0, 2.0, 4.0] {
            kernels.push(Kernel::sample(channel, FilterKind::Gaussian, sigma, size));
        }
    }
    for sigma in [1.0, 2.0, 4.0, 8.0] {
        kernels.push(Kernel::sample(Channel::L, FilterKind::LaplacianOfGaussian, sigma, size));
    }
    for kind in [FilterKind::DerivativeX, FilterKind::DerivativeY] {
        for sigma in [2.0, 4.0] {
            kernels.push(Kernel::sample(Channel::L, kind, sigma, size));
        }
    }
    debug_assert_eq!(kernels.len(), TEXTURE_DIM);
    Ok(FilterBank { size, kernels })
}

/// A dense per-pixel plane of fixed-length feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePlane<const N: usize> {
    width: usize,
    height: usize,
    data: Vec<[f64; N]>,
}

impl<const N: usize> FeaturePlane<N> {
    pub fn from_vec(width: usize, height: usize, data: Vec<[f64; N]>) -> Result<Self, FeatureError> {
        if data.len() != width * height {
            return Err(FeatureError::DimensionMismatch(width, height, data.len(), 1));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> &[f64; N] {
        &self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[[f64; N]] {
        &self.data
    }
}

pub type ColorPlane = FeaturePlane<COLOR_DIM>;
pub type TexturePlane = FeaturePlane<TEXTURE_DIM>;

pub fn extract_color_features(
    rgb: &RgbImage,
    lab: &LabImage,
    norm: &Normalization,
) -> Result<ColorPlane, FeatureError> {
    if rgb.width() != lab.width() || rgb.height() != lab.height() {
        return Err(FeatureError::DimensionMismatch(
            rgb.width(),
            rgb.height(),
            lab.width(),
            lab.height(),
        ));
    }
    let data = rgb
        .pixels()
        .zip(lab.as_slice())
        .map(|(p, &l)| {
            let n = norm.lab(l);
            [
                f64::from(p[0]) / norm.rgb_scale,
                f64::from(p[1]) / norm.rgb_scale,
                f64::from(p[2]) / norm.rgb_scale,
                n[0],
                n[1],
                n[2],
            ]
        })
        .collect();
    Ok(FeaturePlane {
        width: rgb.width(),
        height: rgb.height(),
        data,
    })
}

/// Replicate-padded copy of one channel.
struct Padded {
    stride: usize,
    data: Vec<f64>,
}

impl Padded {
    fn new(width: usize, height: usize, r: usize, value: impl Fn(usize, usize) -> f64) -> Self {
        let stride = width + 2 * r;
        let mut data = Vec::with_capacity(stride * (height + 2 * r));
        for py in 0..height + 2 * r {
            let y = py.saturating_sub(r).min(height - 1);
            for px in 0..stride {
                let x = px.saturating_sub(r).min(width - 1);
                data.push(value(x, y));
            }
        }
        Self { stride, data }
    }
}

/// Correlates the normalized Lab channels with every kernel of the bank.
pub fn extract_texture_features(
    lab: &LabImage,
    bank: &FilterBank,
    norm: &Normalization,
) -> Result<TexturePlane, FeatureError> {
    let (width, height) = (lab.width(), lab.height());
    let size = bank.size;
    if width < size || height < size {
        return Err(FeatureError::ImageSmallerThanKernel {
            width,
            height,
            size,
        });
    }
    let r = size / 2;
    let normalized: Vec<[f64; 3]> = lab.as_slice().iter().map(|&p| norm.lab(p)).collect();
    let channels: Vec<Padded> = (0..3)
        .map(|c| Padded::new(width, height, r, |x, y| normalized[y * width + x][c]))
        .collect();

    let mut data = vec![[0.0; TEXTURE_DIM]; width * height];
    for (ki, kernel) in bank.kernels.iter().enumerate() {
        let plane = &channels[kernel.channel.index()];
        for y in 0..height {
            for x in 0..width {
                let mut acc = 0.0;
                for ky in 0..size {
                    let row = &plane.data[(y + ky) * plane.stride + x..][..size];
                    let krow = &kernel.weights[ky * size..][..size];
                    for (w, v) in krow.iter().zip(row) {
                        acc += w * v;
                    }
                }
                data[y * width + x][ki] = acc;
            }
        }
    }
    Ok(FeaturePlane {
        width,
        height,
        data,
    })
}

/// Color and texture planes of one image plus the configuration that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelFeatures {
    pub config: FeatureConfig,
    pub color: ColorPlane,
    pub texture: TexturePlane,
}

impl PixelFeatures {
    pub fn width(&self) -> usize {
        self.color.width
    }

    pub fn height(&self) -> usize {
        self.color.height
    }
}

/// Reusable extractor holding a prebuilt filter bank.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    bank: FilterBank,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self, FeatureError> {
        let bank = build_filter_bank(config.filter_size)?;
        Ok(Self { config, bank })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn extract(&self, rgb: &RgbImage) -> Result<PixelFeatures, FeatureError> {
        let lab = rgb_to_lab(rgb);
        let norm = &self.config.normalization;
        Ok(PixelFeatures {
            config: self.config,
            color: extract_color_features(rgb, &lab, norm)?,
            texture: extract_texture_features(&lab, &self.bank, norm)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lab_image(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> (RgbImage, LabImage) {
        let rgb = RgbImage::from_fn(width, height, f);
        let lab = rgb_to_lab(&rgb);
        (rgb, lab)
    }

    #[test]
    fn bank_shape_and_normalization() {
        for s in FILTER_SIZES {
            let bank = build_filter_bank(s).unwrap();
            assert_eq!(bank.kernels().len(), 17);
            for k in bank.kernels() {
                assert_eq!(k.weights.len(), s * s);
                let sum: f64 = k.weights.iter().sum();
                match k.kind {
                    FilterKind::Gaussian => assert!((sum - 1.0).abs() < 1e-9),
                    _ => {
                        assert!(sum.abs() < 1e-9, "{:?} σ={} sums to {sum}", k.kind, k.sigma);
                        let l1: f64 = k.weights.iter().map(|w| w.abs()).sum();
                        assert!((l1 - 1.0).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_window() {
        for s in [0, 3, 4, 6, 17] {
            assert_eq!(build_filter_bank(s).unwrap_err(), FeatureError::InvalidWindowSize(s));
        }
    }

    #[test]
    fn log_sigma_two_on_nine_window() {
        // Independent evaluation of the Laplacian of Gaussian on the 9x9 grid.
        let sigma: f64 = 2.0;
        let mut raw = Vec::new();
        for y in -4i32..=4 {
            for x in -4i32..=4 {
                let rr = f64::from(x * x + y * y);
                let g = (-rr / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma.powi(2));
                raw.push(g * (rr - 2.0 * sigma * sigma) / sigma.powi(4));
            }
        }
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        let shifted: Vec<f64> = raw.iter().map(|v| v - mean).collect();
        let l1: f64 = shifted.iter().map(|v| v.abs()).sum();
        let expected: Vec<f64> = shifted.iter().map(|v| v / l1).collect();

        let bank = build_filter_bank(9).unwrap();
        let log = bank
            .kernels()
            .iter()
            .find(|k| k.kind == FilterKind::LaplacianOfGaussian && k.sigma == 2.0)
            .unwrap();
        assert!(log.weights.iter().sum::<f64>().abs() < 1e-9);
        assert!(log.at(0, 0) < 0.0);
        for (a, b) in log.weights.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_sign_convention() {
        let bank = build_filter_bank(7).unwrap();
        let dx = &bank.kernels()[13];
        let dy = &bank.kernels()[15];
        assert_eq!((dx.kind, dx.sigma), (FilterKind::DerivativeX, 2.0));
        assert_eq!((dy.kind, dy.sigma), (FilterKind::DerivativeY, 2.0));
        assert!(dx.at(1, 0) > 0.0 && dx.at(-1, 0) < 0.0);
        assert!(dy.at(0, 1) > 0.0 && dy.at(0, -1) < 0.0);
    }

    #[test]
    fn color_feature_normalization() {
        let (rgb, lab) = lab_image(2, 1, |x, _| if x == 0 { [0, 0, 0] } else { [255, 255, 255] });
        let plane = extract_color_features(&rgb, &lab, &Normalization::default()).unwrap();
        let black = plane.get(0, 0);
        assert_eq!(&black[..4], &[0.0, 0.0, 0.0, 0.0]);
        assert!((black[4] - 0.5).abs() < 1e-12 && (black[5] - 0.5).abs() < 1e-12);
        let white = plane.get(1, 0);
        for v in &white[..4] {
            assert!((v - 1.0).abs() < 1e-9);
        }
        assert!((white[4] - 0.5).abs() < 1e-3 && (white[5] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn color_dimension_mismatch() {
        let (rgb, _) = lab_image(3, 3, |_, _| [1, 2, 3]);
        let (_, lab) = lab_image(2, 3, |_, _| [1, 2, 3]);
        assert!(matches!(
            extract_color_features(&rgb, &lab, &Normalization::default()),
            Err(FeatureError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn constant_image_responses() {
        let (_, lab) = lab_image(20, 16, |_, _| [90, 160, 40]);
        let norm = Normalization::default();
        let expected = norm.lab(lab.pixel(0, 0));
        let bank = build_filter_bank(7).unwrap();
        let plane = extract_texture_features(&lab, &bank, &norm).unwrap();
        for v in plane.as_slice() {
            for (i, k) in bank.kernels().iter().enumerate() {
                if k.kind == FilterKind::Gaussian {
                    assert!((v[i] - expected[k.channel.index()]).abs() < 1e-9);
                } else {
                    assert!(v[i].abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn vertical_step_edge() {
        // Dark left half, bright right half: intensity changes along x only.
        let (_, lab) = lab_image(24, 12, |x, _| if x < 12 { [20, 20, 20] } else { [230, 230, 230] });
        let bank = build_filter_bank(7).unwrap();
        let plane = extract_texture_features(&lab, &bank, &Normalization::default()).unwrap();
        let y = 6;
        let row: Vec<f64> = (0..24).map(|x| plane.get(x, y)[13]).collect();
        let peak = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        assert!(peak == 11 || peak == 12, "peak at {peak}");
        assert!(row[peak] > 0.0);
        for x in 0..24 {
            for ky in [15, 16] {
                assert!(plane.get(x, y)[ky].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn too_small_image() {
        let (_, lab) = lab_image(6, 9, |_, _| [0, 0, 0]);
        let bank = build_filter_bank(7).unwrap();
        assert!(matches!(
            extract_texture_features(&lab, &bank, &Normalization::default()),
            Err(FeatureError::ImageSmallerThanKernel { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn responses_bounded_and_shift_equivariant(
            seed in proptest::collection::vec(any::<u8>(), 30 * 30 * 3),
            dx in 0usize..4,
            dy in 0usize..4,
        ) {
            let rgb = RgbImage::new(30, 30, seed).unwrap();
            let shifted = RgbImage::from_fn(26, 26, |x, y| rgb.pixel(x + dx, y + dy));
            let bank = build_filter_bank(5).unwrap();
            let norm = Normalization::default();
            let full = extract_texture_features(&rgb_to_lab(&rgb), &bank, &norm).unwrap();
            let part = extract_texture_features(&rgb_to_lab(&shifted), &bank, &norm).unwrap();
            for v in full.as_slice() {
                for r in v {
                    prop_assert!(r.abs() <= 1.0 + 1e-12);
                }
            }
            // Interior pixels (away from both images' borders) see identical windows.
            for y in 2..24 {
                for x in 2..24 {
                    let a = part.get(x, y);
                    let b = full.get(x + dx, y + dy);
                    for i in 0..TEXTURE_DIM {
                        prop_assert!((a[i] - b[i]).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

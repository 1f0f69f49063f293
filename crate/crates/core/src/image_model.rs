//! Images, CIELab conversion, resizing, class palettes and label maps.

use std::collections::HashMap;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label value reserved for pixels whose class is not known.
pub const UNKNOWN: u8 = u8::MAX;

/// Width and height natural images are scaled to before classification.
pub const WORKING_SIZE: (usize, usize) = (320, 240);

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid image dimensions {width}x{height} for {len} values")]
    InvalidDimensions { width: usize, height: usize, len: usize },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("pixel ({x}, {y}) has color {rgb:?} which is not in the palette")]
    UnknownColor { x: usize, y: usize, rgb: [u8; 3] },
    #[error("pixel ({x}, {y}) has class index {index} outside the palette")]
    IndexOutOfPalette { x: usize, y: usize, index: u8 },
    #[error("invalid palette: {0}")]
    InvalidPalette(String),
    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),
    #[error("palette parse error: {0}")]
    PaletteParse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 8-bit RGB image stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(ImageError::InvalidDimensions {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image of a single color. Panics on a zero dimension.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel. Panics on a zero dimension.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn from_dynamic(img: &DynamicImage) -> Result<Self, ImageError> {
        let rgb = img.to_rgb8();
        Self::new(rgb.width() as usize, rgb.height() as usize, rgb.into_raw())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ImageError> {
        Self::from_dynamic(&image::load_from_memory(bytes)?)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        Self::from_dynamic(&image::open(path)?)
    }

    pub fn to_png(&self) -> Result<Vec<u8>, ImageError> {
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction");
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    /// Returns the sub-image with top-left corner `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || x + width > self.width || y + height > self.height {
            return Err(ImageError::InvalidDimensions {
                width,
                height,
                len: self.data.len(),
            });
        }
        Ok(Self::from_fn(width, height, |cx, cy| self.pixel(x + cx, y + cy)))
    }
}

/// CIELab image, one `[L, a, b]` triple per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl LabImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[[f64; 3]] {
        &self.data
    }
}

// sRGB primaries, D65 white.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

fn srgb_decode(v: u8) -> f64 {
    let c = f64::from(v) / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn linear_to_xyz(rgb: [f64; 3]) -> [f64; 3] {
    let m = &RGB_TO_XYZ;
    [
        m[0][0] * rgb[0] + m[0][1] * rgb[1] + m[0][2] * rgb[2],
        m[1][0] * rgb[0] + m[1][1] * rgb[1] + m[1][2] * rgb[2],
        m[2][0] * rgb[0] + m[2][1] * rgb[1] + m[2][2] * rgb[2],
    ]
}

/// Converts one 8-bit sRGB triple to CIELab.
pub fn rgb_pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    lab_from_linear([srgb_decode(rgb[0]), srgb_decode(rgb[1]), srgb_decode(rgb[2])])
}

fn lab_from_linear(linear: [f64; 3]) -> [f64; 3] {
    // The white point is the image of linear (1,1,1), so gray stays neutral.
    let white = linear_to_xyz([1.0, 1.0, 1.0]);
    let xyz = linear_to_xyz(linear);
    let fx = lab_f(xyz[0] / white[0]);
    let fy = lab_f(xyz[1] / white[1]);
    let fz = lab_f(xyz[2] / white[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    let decode: Vec<f64> = (0..=255u8).map(srgb_decode).collect();
    let data = img
        .pixels()
        .map(|p| {
            lab_from_linear([
                decode[p[0] as usize],
                decode[p[1] as usize],
                decode[p[2] as usize],
            ])
        })
        .collect();
    LabImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Bilinear resampling with pixel-center alignment and clamped borders.
///
/// Output sample `(x, y)` reads the source at `((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5)`,
/// so resizing to the same size returns the input unchanged.
pub fn resize_bilinear(img: &RgbImage, width: usize, height: usize) -> RgbImage {
    assert!(width > 0 && height > 0, "target dimensions must be positive");
    if width == img.width && height == img.height {
        return img.clone();
    }
    let taps = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let scale = src_len as f64 / dst_len as f64;
        let s = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, s - i0 as f64)
    };
    let xs: Vec<_> = (0..width).map(|x| taps(x, img.width, width)).collect();
    let ys: Vec<_> = (0..height).map(|y| taps(y, img.height, height)).collect();
    let mut data = Vec::with_capacity(width * height * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = img.pixel(x0, y0);
            let p10 = img.pixel(x1, y0);
            let p01 = img.pixel(x0, y1);
            let p11 = img.pixel(x1, y1);
            for c in 0..3 {
                let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p10[c]) * fx;
                let bottom = f64::from(p01[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RgbImage {
        width,
        height,
        data,
    }
}

/// Per-pixel class indices; `UNKNOWN` marks unlabeled pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(ImageError::InvalidDimensions {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, label: u8) -> Self {
        assert!(width > 0 && height > 0, "label map dimensions must be positive");
        Self {
            width,
            height,
            data: vec![label; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        self.data[y * self.width + x] = label;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    /// Nearest-neighbour resampling, used to bring ground truth to the working size.
    pub fn resize_nearest(&self, width: usize, height: usize) -> LabelMap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = ((y as f64 + 0.5) * self.height as f64 / height as f64) as usize;
            for x in 0..width {
                let sx = ((x as f64 + 0.5) * self.width as f64 / width as f64) as usize;
                data.push(self.get(sx.min(self.width - 1), sy.min(self.height - 1)));
            }
        }
        LabelMap {
            width,
            height,
            data,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub name: String,
    pub rgb: [u8; 3],
}

/// Ordered class names with display colors, plus the reserved unknown color.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassPalette {
    classes: Vec<PaletteEntry>,
    unknown: PaletteEntry,
}

impl ClassPalette {
    pub fn new(classes: Vec<PaletteEntry>, unknown_rgb: [u8; 3]) -> Result<Self, ImageError> {
        let mut entries = classes;
        entries.push(PaletteEntry {
            name: "unknown".into(),
            rgb: unknown_rgb,
        });
        Self::from_entries(entries)
    }

    /// Builds a palette whose last entry is the unknown class.
    pub fn from_entries(mut entries: Vec<PaletteEntry>) -> Result<Self, ImageError> {
        let unknown = entries
            .pop()
            .ok_or_else(|| ImageError::InvalidPalette("palette is empty".into()))?;
        if !unknown.name.eq_ignore_ascii_case("unknown") {
            return Err(ImageError::InvalidPalette(format!(
                "last entry must be \"unknown\", found {:?}",
                unknown.name
            )));
        }
        if entries.is_empty() {
            return Err(ImageError::InvalidPalette("no classes".into()));
        }
        if entries.len() >= UNKNOWN as usize {
            return Err(ImageError::InvalidPalette(format!(
                "at most {} classes are supported",
                UNKNOWN as usize - 1
            )));
        }
        let mut names = HashMap::new();
        let mut colors = HashMap::new();
        for e in entries.iter().chain(std::iter::once(&unknown)) {
            if names.insert(e.name.to_ascii_lowercase(), ()).is_some() {
                return Err(ImageError::InvalidPalette(format!("duplicate class name {:?}", e.name)));
            }
            if colors.insert(e.rgb, ()).is_some() {
                return Err(ImageError::InvalidPalette(format!("duplicate color {:?}", e.rgb)));
            }
        }
        Ok(Self {
            classes: entries,
            unknown,
        })
    }

    /// Parses the JSON form: an array of `{name, rgb: [r, g, b]}` ending with `unknown`.
    pub fn from_json(text: &str) -> Result<Self, ImageError> {
        Self::from_entries(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<_> = self.classes.iter().chain(std::iter::once(&self.unknown)).collect();
        serde_json::to_string_pretty(&entries).expect("palette serializes")
    }

    /// Number of real classes, excluding unknown.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[PaletteEntry] {
        &self.classes
    }

    pub fn names(&self) -> Vec<String> {
        self.classes.iter().map(|e| e.name.clone()).collect()
    }

    pub fn unknown_color(&self) -> [u8; 3] {
        self.unknown.rgb
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|e| e.name == name)
    }

    /// Display color of a label, `UNKNOWN` included.
    pub fn color(&self, label: u8) -> Option<[u8; 3]> {
        if label == UNKNOWN {
            Some(self.unknown.rgb)
        } else {
            self.classes.get(label as usize).map(|e| e.rgb)
        }
    }
}

/// Decodes a ground-truth file: 8-bit grayscale files hold class indices directly
/// (255 meaning unknown), anything else is matched color-exactly against the palette.
pub fn decode_label_map(bytes: &[u8], palette: &ClassPalette) -> Result<LabelMap, ImageError> {
    let img = image::load_from_memory(bytes)?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    if let DynamicImage::ImageLuma8(gray) = &img {
        let data = gray.as_raw().clone();
        for (i, &v) in data.iter().enumerate() {
            if v != UNKNOWN && v as usize >= palette.len() {
                return Err(ImageError::IndexOutOfPalette {
                    x: i % width,
                    y: i / width,
                    index: v,
                });
            }
        }
        return LabelMap::new(width, height, data);
    }
    let lookup: HashMap<[u8; 3], u8> = palette
        .classes
        .iter()
        .enumerate()
        .map(|(i, e)| (e.rgb, i as u8))
        .chain(std::iter::once((palette.unknown.rgb, UNKNOWN)))
        .collect();
    let rgb = img.to_rgb8();
    let mut data = Vec::with_capacity(width * height);
    for (i, px) in rgb.as_raw().chunks_exact(3).enumerate() {
        let key = [px[0], px[1], px[2]];
        match lookup.get(&key) {
            Some(&label) => data.push(label),
            None => {
                return Err(ImageError::UnknownColor {
                    x: i % width,
                    y: i / width,
                    rgb: key,
                })
            }
        }
    }
    LabelMap::new(width, height, data)
}

/// Renders a label map as an RGB PNG using palette colors.
pub fn encode_label_map(lm: &LabelMap, palette: &ClassPalette) -> Result<Vec<u8>, ImageError> {
    colorize_label_map(lm, palette)?.to_png()
}

pub fn colorize_label_map(lm: &LabelMap, palette: &ClassPalette) -> Result<RgbImage, ImageError> {
    let mut data = Vec::with_capacity(lm.data.len() * 3);
    for (i, &label) in lm.data.iter().enumerate() {
        let rgb = palette.color(label).ok_or(ImageError::IndexOutOfPalette {
            x: i % lm.width,
            y: i / lm.width,
            index: label,
        })?;
        data.extend_from_slice(&rgb);
    }
    RgbImage::new(lm.width, lm.height, data)
}

/// Writes class indices as an 8-bit grayscale PNG.
pub fn encode_label_indices(lm: &LabelMap) -> Result<Vec<u8>, ImageError> {
    let buf = image::GrayImage::from_raw(lm.width as u32, lm.height as u32, lm.data.clone())
        .expect("buffer length checked at construction");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

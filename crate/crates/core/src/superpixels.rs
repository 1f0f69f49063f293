//! Graph-based oversegmentation (Felzenszwalb and Huttenlocher) on an 8-connected grid.

use std::io::Cursor;

use image::{ImageBuffer, ImageFormat, Luma};
use thiserror::Error;

use crate::image_model::RgbImage;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("image area {area} is smaller than the minimum segment size {min_size}")]
    ImageTooSmall { area: usize, min_size: usize },
    #[error("invalid segmentation parameters: {0}")]
    InvalidParams(String),
    #[error("label buffer of length {found} does not cover a {width}x{height} image")]
    DimensionMismatch { width: usize, height: usize, found: usize },
    #[error("too many segments ({0}) for a 16-bit id image")]
    TooManySegments(usize),
    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegParams {
    /// Gaussian pre-smoothing σ; 0 disables smoothing.
    pub sigma: f64,
    /// Threshold scale: larger values favour larger segments.
    pub k: f64,
    pub min_size: usize,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            k: 80.0,
            min_size: 80,
        }
    }
}

impl SegParams {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SegmentError::InvalidParams(format!("sigma {} must be >= 0", self.sigma)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(SegmentError::InvalidParams(format!("k {} must be > 0", self.k)));
        }
        if self.min_size == 0 {
            return Err(SegmentError::InvalidParams("min_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Dense per-pixel segment ids with the pixel list of every segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    segments: Vec<Vec<usize>>,
}

impl SuperpixelMap {
    /// Builds a map from arbitrary per-pixel ids, renumbering them densely in raster order.
    pub fn from_labels(width: usize, height: usize, raw: &[usize]) -> Result<Self, SegmentError> {
        if width == 0 || height == 0 || raw.len() != width * height {
            return Err(SegmentError::DimensionMismatch {
                width,
                height,
                found: raw.len(),
            });
        }
        let mut remap = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        let mut segments: Vec<Vec<usize>> = Vec::new();
        for (i, &r) in raw.iter().enumerate() {
            let id = *remap.entry(r).or_insert_with(|| {
                segments.push(Vec::new());
                segments.len() - 1
            });
            segments[id].push(i);
            labels.push(id as u32);
        }
        Ok(Self {
            width,
            height,
            labels,
            segments,
        })
    }

    /// Every pixel its own segment.
    pub fn singletons(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: (0..(width * height) as u32).collect(),
            segments: (0..width * height).map(|i| vec![i]).collect(),
        }
    }

    /// The whole image as one segment.
    pub fn whole(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width * height],
            segments: vec![(0..width * height).collect()],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn label(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x] as usize
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Pixel indices (`y * width + x`) of each segment, in raster order.
    pub fn segments(&self) -> &[Vec<usize>] {
        &self.segments
    }

    pub fn segment_sizes(&self) -> Vec<usize> {
        self.segments.iter().map(Vec::len).collect()
    }

    /// Segment ids as a 16-bit grayscale PNG.
    pub fn to_id_png(&self) -> Result<Vec<u8>, SegmentError> {
        if self.len() > usize::from(u16::MAX) + 1 {
            return Err(SegmentError::TooManySegments(self.len()));
        }
        let data: Vec<u16> = self.labels.iter().map(|&l| l as u16).collect();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, data).expect("length matches");
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    /// Copy of `img` with pixels on a segment boundary painted `color`.
    pub fn boundary_overlay(&self, img: &RgbImage, color: [u8; 3]) -> RgbImage {
        let mut out = img.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                let l = self.label(x, y);
                let edge = (x + 1 < self.width && self.label(x + 1, y) != l)
                    || (y + 1 < self.height && self.label(x, y + 1) != l);
                if edge {
                    out.set_pixel(x, y, color);
                }
            }
        }
        out
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Joins two roots and returns the new root.
    fn join(&mut self, a: usize, b: usize) -> usize {
        let (root, child) = if self.rank[a] >= self.rank[b] { (a, b) } else { (b, a) };
        if self.rank[a] == self.rank[b] {
            self.rank[root] += 1;
        }
        self.parent[child] = root;
        self.size[root] += self.size[child];
        root
    }
}

struct Edge {
    w: f64,
    a: usize,
    b: usize,
}

fn smooth_channel(src: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let len = (sigma * 4.0).ceil() as usize + 1;
    let mut mask: Vec<f64> = (0..len).map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp()).collect();
    let norm = 2.0 * mask.iter().sum::<f64>() - mask[0];
    mask.iter_mut().for_each(|m| *m /= norm);

    let blur = |src: &[f64], w: usize, h: usize, horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                let at = |o: isize| -> f64 {
                    if horizontal {
                        let xx = (x as isize + o).clamp(0, w as isize - 1) as usize;
                        src[y * w + xx]
                    } else {
                        let yy = (y as isize + o).clamp(0, h as isize - 1) as usize;
                        src[yy * w + x]
                    }
                };
                let mut acc = mask[0] * at(0);
                for (i, m) in mask.iter().enumerate().skip(1) {
                    acc += m * (at(-(i as isize)) + at(i as isize));
                }
                out[y * w + x] = acc;
            }
        }
        out
    };
    let tmp = blur(src, width, height, true);
    blur(&tmp, width, height, false)
}

pub fn segment_graph_based(img: &RgbImage, params: &SegParams) -> Result<SuperpixelMap, SegmentError> {
    params.validate()?;
    let (width, height) = (img.width(), img.height());
    let n = width * height;
    if n < params.min_size {
        return Err(SegmentError::ImageTooSmall {
            area: n,
            min_size: params.min_size,
        });
    }

    let mut channels: Vec<Vec<f64>> = (0..3)
        .map(|c| img.pixels().map(|p| f64::from(p[c])).collect())
        .collect();
    if params.sigma > 0.0 {
        channels = channels
            .iter()
            .map(|ch| smooth_channel(ch, width, height, params.sigma))
            .collect();
    }
    let diff = |a: usize, b: usize| -> f64 {
        channels
            .iter()
            .map(|ch| (ch[a] - ch[b]) * (ch[a] - ch[b]))
            .sum::<f64>()
            .sqrt()
    };

    let mut edges = Vec::with_capacity(n * 4);
    for y in 0..height {
        for x in 0..width {
            let a = y * width + x;
            let mut push = |b: usize| edges.push(Edge { w: diff(a, b), a, b });
            if x + 1 < width {
                push(a + 1);
            }
            if y + 1 < height {
                push(a + width);
            }
            if x + 1 < width && y + 1 < height {
                push(a + width + 1);
            }
            if x + 1 < width && y > 0 {
                push(a - width + 1);
            }
        }
    }
    edges.sort_by(|e, f| e.w.total_cmp(&f.w).then(e.a.cmp(&f.a)).then(e.b.cmp(&f.b)));

    let mut sets = DisjointSet::new(n);
    let mut threshold = vec![params.k; n];
    for e in &edges {
        let a = sets.find(e.a);
        let b = sets.find(e.b);
        if a != b && e.w <= threshold[a] && e.w <= threshold[b] {
            let root = sets.join(a, b);
            threshold[root] = e.w + params.k / sets.size[root] as f64;
        }
    }
    // Small components join the neighbour across their cheapest boundary edge.
    for e in &edges {
        let a = sets.find(e.a);
        let b = sets.find(e.b);
        if a != b && (sets.size[a] < params.min_size || sets.size[b] < params.min_size) {
            sets.join(a, b);
        }
    }

    let roots: Vec<usize> = (0..n).map(|i| sets.find(i)).collect();
    SuperpixelMap::from_labels(width, height, &roots)
}

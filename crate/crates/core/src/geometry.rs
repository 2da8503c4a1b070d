//! Pixel containers and axis-aligned box geometry shared by every stage.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Coverage at or above this value counts as "on" for all binary geometry.
pub const COVERAGE_THRESHOLD: f32 = 0.5;

/// An 8-bit, 3-channel, row-major color image.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Raster")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Raster {
    /// Creates a raster filled with a single color.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width >= 1 && height >= 1, "raster dimensions must be >= 1");
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<u8>) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(GeometryError::BufferLength { expected, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// Copies out the sub-rectangle `b`, which must lie inside the raster.
    pub fn crop(&self, b: BBox) -> Raster {
        assert!(b.fits_within(self.width, self.height), "crop box {b:?} outside raster");
        let mut data = Vec::with_capacity(b.area() as usize * 3);
        for y in b.y as u32..b.bottom() as u32 {
            let start = self.offset(b.x as u32, y);
            data.extend_from_slice(&self.data[start..start + b.w as usize * 3]);
        }
        Raster { width: b.w, height: b.h, data }
    }

    /// Splits into three floating point channel planes.
    pub fn to_planes(&self) -> [Vec<f32>; 3] {
        let n = self.width as usize * self.height as usize;
        let mut planes = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                planes[c][i] = px[c] as f32;
            }
        }
        planes
    }

    /// Reassembles a raster from planes, rounding half away from zero and clamping.
    pub fn from_planes(width: u32, height: u32, planes: &[Vec<f32>; 3]) -> Raster {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for i in 0..n {
            for plane in planes {
                data.push(quantize_level(plane[i] as f64));
            }
        }
        Raster { width, height, data }
    }
}

/// Rounds a floating intensity to the nearest 8-bit level.
#[inline]
pub fn quantize_level(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

impl From<&image::RgbImage> for Raster {
    fn from(img: &image::RgbImage) -> Self {
        Raster { width: img.width(), height: img.height(), data: img.as_raw().clone() }
    }
}

impl From<image::RgbImage> for Raster {
    fn from(img: image::RgbImage) -> Self {
        let (width, height) = img.dimensions();
        Raster { width, height, data: img.into_raw() }
    }
}

impl From<Raster> for image::RgbImage {
    fn from(r: Raster) -> Self {
        image::RgbImage::from_raw(r.width, r.height, r.data).expect("raster buffer length is an invariant")
    }
}

/// Per-pixel coverage in `[0, 1]`.
#[derive(Clone, PartialEq)]
pub struct AlphaMask {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl std::fmt::Debug for AlphaMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlphaMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("on_pixels", &self.count_on())
            .finish()
    }
}

impl AlphaMask {
    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be >= 1");
        Self { width, height, data: vec![value.clamp(0.0, 1.0); width as usize * height as usize] }
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Builds a mask from raw coverage values; values outside `[0, 1]` are rejected.
    pub fn from_vec(width: u32, height: u32, data: Vec<f32>) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(GeometryError::BufferLength { expected, actual: data.len() });
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(GeometryError::CoverageOutOfRange);
        }
        Ok(Self { width, height, data })
    }

    /// Builds a mask from 8-bit values, 0 = background and 255 = object.
    pub fn from_u8(width: u32, height: u32, values: &[u8]) -> Result<Self, GeometryError> {
        Self::from_vec(width, height, values.iter().map(|&v| v as f32 / 255.0).collect())
    }

    /// Builds a binary mask from a predicate over pixel coordinates.
    pub fn from_fn(width: u32, height: u32, mut on: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                if on(x, y) {
                    m.set(x, y, 1.0);
                }
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: f32) {
        self.data[y as usize * self.width as usize + x as usize] = v.clamp(0.0, 1.0);
    }

    #[inline]
    pub fn is_on(&self, x: u32, y: u32) -> bool {
        self.get(x, y) >= COVERAGE_THRESHOLD
    }

    pub fn count_on(&self) -> usize {
        self.data.iter().filter(|&&v| v >= COVERAGE_THRESHOLD).count()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    /// Thresholded copy with values in `{0, 1}`.
    pub fn binarized(&self) -> AlphaMask {
        AlphaMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| if v >= COVERAGE_THRESHOLD { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn crop(&self, b: BBox) -> AlphaMask {
        assert!(b.fits_within(self.width, self.height), "crop box {b:?} outside mask");
        let mut data = Vec::with_capacity(b.area() as usize);
        for y in b.y as u32..b.bottom() as u32 {
            let start = y as usize * self.width as usize + b.x as usize;
            data.extend_from_slice(&self.data[start..start + b.w as usize]);
        }
        AlphaMask { width: b.w, height: b.h, data }
    }

    /// 8-bit rendering, 0 = background and 255 = full coverage.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize_level(v as f64 * 255.0)).collect()
    }

    pub(crate) fn from_plane_clamped(width: u32, height: u32, plane: Vec<f32>) -> AlphaMask {
        AlphaMask { width, height, data: plane.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() }
    }
}

/// Integer axis-aligned box anchored at its top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    /// Returns `None` for zero-sized boxes.
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Option<BBox> {
        (w >= 1 && h >= 1).then_some(BBox { x, y, w, h })
    }

    pub fn right(&self) -> i64 {
        self.x as i64 + self.w as i64
    }

    pub fn bottom(&self) -> i64 {
        self.y as i64 + self.h as i64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = (self.x as i64).max(other.x as i64);
        let y0 = (self.y as i64).max(other.y as i64);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        Some(BBox { x: x0 as i32, y: y0 as i32, w: (x1 - x0) as u32, h: (y1 - y0) as u32 })
    }

    pub fn intersection_area(&self, other: &BBox) -> u64 {
        self.intersection(other).map_or(0, |b| b.area())
    }

    /// Clips to a `width` x `height` frame; `None` when nothing remains.
    pub fn clip_to(&self, width: u32, height: u32) -> Option<BBox> {
        self.intersection(&BBox { x: 0, y: 0, w: width, h: height })
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.x >= 0 && self.y >= 0 && self.right() <= width as i64 && self.bottom() <= height as i64
    }

    pub fn translated(&self, dx: i32, dy: i32) -> BBox {
        BBox { x: self.x + dx, y: self.y + dy, ..*self }
    }

    /// Grows the box by `margin` pixels on every side.
    pub fn padded(&self, margin: u32) -> BBox {
        BBox {
            x: self.x - margin as i32,
            y: self.y - margin as i32,
            w: self.w + 2 * margin,
            h: self.h + 2 * margin,
        }
    }

    /// COCO `[x, y, w, h]` layout.
    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x as f64, self.y as f64, self.w as f64, self.h as f64]
    }
}

/// Intersection over union of two boxes, measured in pixel area.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Smallest box containing every pixel whose coverage reaches the binary threshold.
pub fn tight_bbox(mask: &AlphaMask) -> Result<BBox, GeometryError> {
    let (w, h) = mask.dims();
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
    let mut any = false;
    for y in 0..h {
        let row = &mask.data[y as usize * w as usize..(y as usize + 1) * w as usize];
        let first = row.iter().position(|&v| v >= COVERAGE_THRESHOLD);
        if let Some(first) = first {
            let last = row.iter().rposition(|&v| v >= COVERAGE_THRESHOLD).unwrap_or(first);
            any = true;
            x0 = x0.min(first as u32);
            x1 = x1.max(last as u32);
            y0 = y0.min(y);
            y1 = y;
        }
    }
    if !any {
        return Err(GeometryError::EmptyMask);
    }
    Ok(BBox { x: x0 as i32, y: y0 as i32, w: x1 - x0 + 1, h: y1 - y0 + 1 })
}

use serde::{Deserialize, Serialize};

use crate::error::GapError;
use crate::geometry::{iou, BBox, Raster};
use crate::rng::RngStream;

use super::network::{INPUT_LEN, INPUT_MEAN, INPUT_STD, PATCH};

/// Background windows must stay below this IoU with every ground-truth box.
pub const BACKGROUND_MAX_IOU: f64 = 0.1;
/// ... and at most this fraction of a background window may overlap any box.
pub const BACKGROUND_MAX_COVER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn label(self) -> usize {
        match self {
            Domain::Source => 0,
            Domain::Target => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Foreground,
    Background,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Foreground => "foreground",
            Region::Background => "background",
        }
    }
}

/// A 32x32 RGB patch in row-major interleaved layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pixels: Vec<u8>,
    pub scene: String,
}

impl Patch {
    pub fn new(pixels: Vec<u8>, scene: impl Into<String>) -> Result<Self, GapError> {
        if pixels.len() != INPUT_LEN {
            return Err(GapError::PatchSize(pixels.len()));
        }
        Ok(Patch { pixels, scene: scene.into() })
    }

    pub fn from_raster(r: &Raster, scene: impl Into<String>) -> Result<Self, GapError> {
        Patch::new(r.data().to_vec(), scene)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn to_raster(&self) -> Raster {
        Raster::from_vec(PATCH as u32, PATCH as u32, self.pixels.clone()).expect("patch size is an invariant")
    }

    /// Channel-major classifier input: pixels scaled to `[0, 1]`, then
    /// normalized with mean 0.5 and std 0.5, i.e. mapped onto `[-1, 1]`.
    pub fn to_tensor(&self) -> Vec<f32> {
        let mut t = vec![0.0f32; INPUT_LEN];
        let plane = PATCH * PATCH;
        for (i, px) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                t[c * plane + i] = (px[c] as f32 / 255.0 - INPUT_MEAN) / INPUT_STD;
            }
        }
        t
    }

    pub fn map_raster(&self, f: impl Fn(&Raster) -> Raster) -> Patch {
        Patch { pixels: f(&self.to_raster()).into_vec(), scene: self.scene.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub patches: Vec<Patch>,
    pub domain: Domain,
    pub region: Region,
}

impl PatchSet {
    pub fn new(patches: Vec<Patch>, domain: Domain, region: Region) -> Self {
        PatchSet { patches, domain, region }
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Same patches tagged with another domain.
    pub fn relabeled(&self, domain: Domain) -> PatchSet {
        PatchSet { domain, ..self.clone() }
    }
}

/// An image with its ground-truth boxes and scene identity.
#[derive(Debug, Clone)]
pub struct AnnotatedImage {
    pub raster: Raster,
    pub boxes: Vec<BBox>,
    pub scene: String,
}

/// Whether a background window is far enough from every box.
pub fn is_background_window(window: &BBox, boxes: &[BBox]) -> bool {
    boxes.iter().all(|b| {
        let cover = window.intersection_area(b) as f64 / window.area() as f64;
        iou(window, b) < BACKGROUND_MAX_IOU && cover < BACKGROUND_MAX_COVER
    })
}

/// Samples `n` 32x32 patches of the given region.
///
/// Foreground patches are uniform crops fully inside a uniformly chosen box
/// (boxes smaller than 32x32 are skipped). Background patches are
/// rejection-sampled uniform windows accepted by [`is_background_window`].
/// Gives up with `InsufficientRegion` after `64 n + 1024` attempts.
pub fn extract_patches(
    images: &[AnnotatedImage],
    region: Region,
    domain: Domain,
    n: usize,
    rng: &mut RngStream,
) -> Result<PatchSet, GapError> {
    let side = PATCH as u32;
    let budget = 64 * n + 1024;
    let mut patches = Vec::with_capacity(n);
    let mut attempts = 0;
    while patches.len() < n && attempts < budget && !images.is_empty() {
        attempts += 1;
        let img = &images[rng.index(images.len())];
        let (w, h) = img.raster.dims();
        if w < side || h < side {
            continue;
        }
        let window = match region {
            Region::Foreground => {
                let eligible: Vec<BBox> = img
                    .boxes
                    .iter()
                    .filter_map(|b| b.clip_to(w, h))
                    .filter(|b| b.w >= side && b.h >= side)
                    .collect();
                if eligible.is_empty() {
                    continue;
                }
                let b = eligible[rng.index(eligible.len())];
                let x = rng.int_in(b.x as i64, b.right() - side as i64);
                let y = rng.int_in(b.y as i64, b.bottom() - side as i64);
                BBox { x: x as i32, y: y as i32, w: side, h: side }
            }
            Region::Background => {
                let x = rng.int_in(0, (w - side) as i64);
                let y = rng.int_in(0, (h - side) as i64);
                let window = BBox { x: x as i32, y: y as i32, w: side, h: side };
                if !is_background_window(&window, &img.boxes) {
                    continue;
                }
                window
            }
        };
        patches.push(Patch { pixels: img.raster.crop(window).into_vec(), scene: img.scene.clone() });
    }
    if patches.len() < n {
        return Err(GapError::InsufficientRegion { requested: n, found: patches.len() });
    }
    Ok(PatchSet { patches, domain, region })
}

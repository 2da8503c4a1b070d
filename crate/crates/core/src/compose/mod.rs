//! Scene composition: transform, place, blend and annotate pasted instances.

mod blend;
mod placement;
mod poisson;
mod transform;

pub use blend::{blend, blend_into, BlendMode, BlendOutcome};
pub use placement::{sample_position, Position};
pub use poisson::{guidance_from_source, poisson_solve, Plane, PoissonSettings, PoissonSolution};
pub use transform::{crop_instance, transform_instance};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::diversify::{select_seed, ClassId, Provenance, SeedInstance};
use crate::error::ComposeError;
use crate::geometry::{tight_bbox, AlphaMask, BBox, Raster};
use crate::rng::RngStream;

/// Relative weights of the blend modes drawn per paste.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendMix {
    pub direct: f64,
    pub feathered: f64,
    pub poisson: f64,
}

impl Default for BlendMix {
    fn default() -> Self {
        BlendMix { direct: 1.0, feathered: 1.0, poisson: 1.0 }
    }
}

impl BlendMix {
    fn total(&self) -> f64 {
        self.direct + self.feathered + self.poisson
    }

    pub fn validate(&self) -> Result<(), String> {
        let ws = [self.direct, self.feathered, self.poisson];
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || self.total() <= 0.0 {
            return Err("weights must be non-negative with a positive sum".into());
        }
        Ok(())
    }

    pub fn draw(&self, feather_sigma: f64, rng: &mut RngStream) -> BlendMode {
        let u = rng.uniform() * self.total();
        if u < self.direct {
            BlendMode::Direct
        } else if u < self.direct + self.feathered {
            BlendMode::Feathered { sigma: feather_sigma }
        } else {
            BlendMode::Poisson
        }
    }
}

/// Which extent an annotation box covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxExtent {
    /// Bounds the pixels still visible after later pastes.
    #[default]
    Visible,
    /// Bounds the whole pasted instance, clipped to the canvas.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComposeConfig {
    /// Inclusive range of instances pasted per image.
    pub objects_per_image: (u32, u32),
    pub occ_prob: f64,
    pub scale_range: (f64, f64),
    pub rotation_range: (f64, f64),
    pub min_visible_fraction: f64,
    pub blend_mix: BlendMix,
    pub feather_sigma: f64,
    /// Drop annotation boxes smaller than `min_box` (pixels stay in the image).
    pub min_box_filter: bool,
    pub min_box: (u32, u32),
    pub box_extent: BoxExtent,
    pub poisson: PoissonSettings,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        ComposeConfig {
            objects_per_image: (3, 8),
            occ_prob: 0.5,
            scale_range: (0.5, 1.5),
            rotation_range: (-30.0, 30.0),
            min_visible_fraction: 0.25,
            blend_mix: BlendMix::default(),
            feather_sigma: 2.0,
            min_box_filter: true,
            min_box: (50, 30),
            box_extent: BoxExtent::Visible,
            poisson: PoissonSettings::default(),
        }
    }
}

impl ComposeConfig {
    /// Returns `(field, reason)` for the first violated constraint.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let (lo, hi) = self.objects_per_image;
        if lo > hi {
            return Err(("compose.objects_per_image", format!("min {lo} exceeds max {hi}")));
        }
        if !(0.0..=1.0).contains(&self.occ_prob) {
            return Err(("compose.occ_prob", format!("must lie in [0, 1], got {}", self.occ_prob)));
        }
        let (slo, shi) = self.scale_range;
        if !(slo > 0.0 && slo <= shi && shi.is_finite()) {
            return Err(("compose.scale_range", format!("need 0 < min <= max, got ({slo}, {shi})")));
        }
        if self.rotation_range.0 > self.rotation_range.1 {
            return Err(("compose.rotation_range", "min exceeds max".into()));
        }
        if !(self.min_visible_fraction > 0.0 && self.min_visible_fraction <= 1.0) {
            return Err(("compose.min_visible_fraction", "must lie in (0, 1]".into()));
        }
        if !(self.feather_sigma >= 0.0 && self.feather_sigma.is_finite()) {
            return Err(("compose.feather_sigma", "must be >= 0".into()));
        }
        self.blend_mix.validate().map_err(|e| ("compose.blend_mix", e))?;
        if self.poisson.max_iterations == 0 || !(self.poisson.tolerance > 0.0) {
            return Err(("compose.poisson", "need max_iterations >= 1 and tolerance > 0".into()));
        }
        Ok(())
    }
}

/// Original and styled instances of one class.
#[derive(Debug, Clone, Default)]
pub struct ClassPool {
    pub class_id: ClassId,
    pub original: Vec<SeedInstance>,
    pub styled: Vec<SeedInstance>,
}

#[derive(Debug, Clone)]
pub struct SeedPools {
    pub classes: Vec<ClassPool>,
    /// Probability of drawing from the styled pool.
    pub p_styled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub class_id: ClassId,
    pub seed_index: usize,
    pub provenance: Provenance,
    pub scale: f64,
    pub rotation_deg: f64,
    /// Canvas position of the instance's tight box top-left corner.
    pub translation: (i32, i32),
    pub blend_mode: BlendMode,
    pub near_previous: bool,
    /// Full extent of the pasted instance (may extend past the canvas).
    pub placed_box: BBox,
    /// Box of the finally visible pixels, if any remain.
    pub visible_box: Option<BBox>,
    pub visible_pixels: u64,
    /// Whether the instance made it into the annotations.
    pub annotated: bool,
    pub blend: BlendOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedObject {
    pub class_id: ClassId,
    pub bbox: BBox,
    /// Visible pixel count.
    pub area: u64,
    /// Index into the scene's placement records.
    pub placement: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub image_id: u64,
    pub objects: Vec<AnnotatedObject>,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub image: Raster,
    pub annotation: SceneAnnotation,
    pub placements: Vec<PlacementRecord>,
    /// Per-pixel owner: 0 for background, `k + 1` for placement `k`.
    pub owner: Vec<u32>,
    /// Reasons for instances that could not be pasted.
    pub skipped: Vec<String>,
}

impl Scene {
    /// Final visible mask of placement `k`.
    pub fn visible_mask(&self, k: usize) -> AlphaMask {
        let (w, h) = self.image.dims();
        let id = k as u32 + 1;
        AlphaMask::from_fn(w, h, |x, y| self.owner[(y * w + x) as usize] == id)
    }
}

/// Pastes `k ~ U[objects_per_image]` instances onto `bg`.
///
/// Per instance: pick a class uniformly, select a seed (original or styled),
/// scale and rotate it, choose a position (occlusion-seeking with
/// `occ_prob`), blend it in with a randomly drawn mode and record ownership of
/// its in-mask pixels. Later pastes occlude earlier ones. Instances that cannot
/// be pasted are skipped and logged; the scene itself never fails.
pub fn compose_scene(bg: &Raster, pools: &SeedPools, cfg: &ComposeConfig, image_id: u64, rng: &mut RngStream) -> Scene {
    let (cw, ch) = bg.dims();
    let mut canvas = bg.clone();
    let mut owner = vec![0u32; cw as usize * ch as usize];
    let mut placements: Vec<PlacementRecord> = Vec::new();
    let mut placed_boxes: Vec<BBox> = Vec::new();
    let mut skipped = Vec::new();

    let k = if pools.classes.is_empty() {
        0
    } else {
        rng.int_in(cfg.objects_per_image.0 as i64, cfg.objects_per_image.1 as i64) as usize
    };

    for i in 0..k {
        match paste_one(&mut canvas, &mut owner, pools, cfg, &placed_boxes, placements.len() as u32 + 1, rng) {
            Ok(record) => {
                placed_boxes.push(record.placed_box);
                placements.push(record);
            }
            Err(e) => {
                debug!("image {image_id}: instance {i} skipped: {e}");
                skipped.push(format!("instance {i}: {e}"));
            }
        }
    }

    // visible extents from the owner map
    let mut extents: Vec<Option<(u32, u32, u32, u32)>> = vec![None; placements.len()];
    let mut counts = vec![0u64; placements.len()];
    for y in 0..ch {
        for x in 0..cw {
            let id = owner[(y * cw + x) as usize];
            if id == 0 {
                continue;
            }
            let k = id as usize - 1;
            counts[k] += 1;
            let e = extents[k].get_or_insert((x, y, x, y));
            e.0 = e.0.min(x);
            e.1 = e.1.min(y);
            e.2 = e.2.max(x);
            e.3 = e.3.max(y);
        }
    }

    let mut objects = Vec::new();
    for (k, rec) in placements.iter_mut().enumerate() {
        rec.visible_pixels = counts[k];
        rec.visible_box = extents[k].map(|(x0, y0, x1, y1)| BBox { x: x0 as i32, y: y0 as i32, w: x1 - x0 + 1, h: y1 - y0 + 1 });
        let Some(visible) = rec.visible_box else { continue };
        let bbox = match cfg.box_extent {
            BoxExtent::Visible => visible,
            BoxExtent::Full => rec.placed_box.clip_to(cw, ch).unwrap_or(visible),
        };
        if cfg.min_box_filter && (bbox.w < cfg.min_box.0 || bbox.h < cfg.min_box.1) {
            continue;
        }
        rec.annotated = true;
        objects.push(AnnotatedObject { class_id: rec.class_id, bbox, area: counts[k], placement: k });
    }

    Scene { image: canvas, annotation: SceneAnnotation { image_id, objects }, placements, owner, skipped }
}

fn paste_one(
    canvas: &mut Raster,
    owner: &mut [u32],
    pools: &SeedPools,
    cfg: &ComposeConfig,
    priors: &[BBox],
    id: u32,
    rng: &mut RngStream,
) -> Result<PlacementRecord, ComposeError> {
    let pool = &pools.classes[rng.index(pools.classes.len())];
    let seed = select_seed(&pool.original, &pool.styled, pools.p_styled, rng)?;
    let scale = rng.uniform_in(cfg.scale_range.0, cfg.scale_range.1);
    let rotation_deg = rng.uniform_in(cfg.rotation_range.0, cfg.rotation_range.1);
    let blend_mode = cfg.blend_mix.draw(cfg.feather_sigma, rng);

    let transformed = transform_instance(seed, scale, rotation_deg)?;
    let margin = match blend_mode {
        BlendMode::Feathered { sigma } => (3.0 * sigma).ceil() as u32 + 1,
        _ => 1,
    };
    let (inst, core) = crop_instance(&transformed, margin)?;

    let (cw, ch) = canvas.dims();
    let pos = sample_position((cw, ch), (core.w, core.h), priors, cfg.occ_prob, cfg.min_visible_fraction, rng)?;
    let origin = (pos.x - core.x, pos.y - core.y);
    let outcome = blend_into(canvas, &inst, origin, blend_mode, &cfg.poisson);
    if !outcome.converged {
        log::warn!("poisson solve hit the iteration cap ({} sweeps)", outcome.iterations);
    }

    let (fw, fh) = inst.mask.dims();
    for iy in 0..fh {
        let cy = origin.1 + iy as i32;
        if cy < 0 || cy >= ch as i32 {
            continue;
        }
        for ix in 0..fw {
            let cx = origin.0 + ix as i32;
            if cx >= 0 && cx < cw as i32 && inst.mask.is_on(ix, iy) {
                owner[(cy as u32 * cw + cx as u32) as usize] = id;
            }
        }
    }

    debug_assert_eq!(tight_bbox(&inst.mask).ok(), Some(core));
    Ok(PlacementRecord {
        class_id: inst.class_id,
        seed_index: inst.seed_index,
        provenance: inst.provenance.clone(),
        scale,
        rotation_deg,
        translation: (pos.x, pos.y),
        blend_mode,
        near_previous: pos.near_previous,
        placed_box: BBox { x: pos.x, y: pos.y, w: core.w, h: core.h },
        visible_box: None,
        visible_pixels: 0,
        annotated: false,
        blend: outcome,
    })
}

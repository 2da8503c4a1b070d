use serde::{Deserialize, Serialize};

use super::poisson::{poisson_solve, Plane, PoissonSettings};
use crate::diversify::SeedInstance;
use crate::geometry::{quantize_level, BBox, Raster};
use crate::maskproc::feather;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BlendMode {
    Direct,
    Feathered { sigma: f64 },
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlendOutcome {
    /// Sweeps used by the Poisson solver (zero for other modes).
    pub iterations: usize,
    pub converged: bool,
}

/// Pastes `inst` with its frame's top-left corner at `at` (canvas coordinates).
pub fn blend(canvas: &Raster, inst: &SeedInstance, at: (i32, i32), mode: BlendMode, poisson: &PoissonSettings) -> (Raster, BlendOutcome) {
    let mut out = canvas.clone();
    let outcome = blend_into(&mut out, inst, at, mode, poisson);
    (out, outcome)
}

/// In-place form of [`blend`].
pub fn blend_into(canvas: &mut Raster, inst: &SeedInstance, at: (i32, i32), mode: BlendMode, poisson: &PoissonSettings) -> BlendOutcome {
    let (fw, fh) = inst.raster.dims();
    let frame = BBox { x: at.0, y: at.1, w: fw, h: fh };
    let Some(region) = frame.clip_to(canvas.width(), canvas.height()) else {
        return BlendOutcome { iterations: 0, converged: true };
    };
    match mode {
        BlendMode::Direct => {
            for_each_pixel(region, at, |cx, cy, ix, iy| {
                if inst.mask.is_on(ix, iy) {
                    canvas.set_pixel(cx, cy, inst.raster.pixel(ix, iy));
                }
            });
            BlendOutcome { iterations: 0, converged: true }
        }
        BlendMode::Feathered { sigma } => {
            let alpha = feather(&inst.mask.binarized(), sigma);
            for_each_pixel(region, at, |cx, cy, ix, iy| {
                let a = alpha.get(ix, iy) as f64;
                if a <= 0.0 {
                    return;
                }
                let fg = inst.raster.pixel(ix, iy);
                let bg = canvas.pixel(cx, cy);
                let mut px = [0u8; 3];
                for c in 0..3 {
                    px[c] = quantize_level(a * fg[c] as f64 + (1.0 - a) * bg[c] as f64);
                }
                canvas.set_pixel(cx, cy, px);
            });
            BlendOutcome { iterations: 0, converged: true }
        }
        BlendMode::Poisson => poisson_blend(canvas, inst, at, region, poisson),
    }
}

fn for_each_pixel(region: BBox, at: (i32, i32), mut f: impl FnMut(u32, u32, u32, u32)) {
    for cy in region.y..region.bottom() as i32 {
        for cx in region.x..region.right() as i32 {
            f(cx as u32, cy as u32, (cx - at.0) as u32, (cy - at.1) as u32);
        }
    }
}

/// Solves over the visible part of the frame. Guidance across an edge comes
/// from the foreground when either end lies inside the mask and from the
/// canvas otherwise. Only in-mask pixels are written back.
fn poisson_blend(canvas: &mut Raster, inst: &SeedInstance, at: (i32, i32), region: BBox, settings: &PoissonSettings) -> BlendOutcome {
    let (w, h) = (region.w as usize, region.h as usize);
    let mut on = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let (ix, iy) = ((region.x + x as i32 - at.0) as u32, (region.y + y as i32 - at.1) as u32);
            on[y * w + x] = inst.mask.is_on(ix, iy);
        }
    }
    let mut worst = BlendOutcome { iterations: 0, converged: true };
    for c in 0..3 {
        let mut fg = vec![0.0; w * h];
        let mut bg = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (cx, cy) = ((region.x + x as i32) as u32, (region.y + y as i32) as u32);
                bg[y * w + x] = canvas.pixel(cx, cy)[c] as f64;
                fg[y * w + x] = inst.raster.pixel((cx as i32 - at.0) as u32, (cy as i32 - at.1) as u32)[c] as f64;
            }
        }
        // initial guess is the direct paste; in-mask pixels on the ring keep the foreground value
        let initial: Vec<f64> = (0..w * h).map(|i| if on[i] { fg[i] } else { bg[i] }).collect();
        let mut guidance = vec![0.0; w * h];
        for y in 1..h.saturating_sub(1) {
            for x in 1..w.saturating_sub(1) {
                let p = y * w + x;
                let mut sum = 0.0;
                for q in [p - 1, p + 1, p - w, p + w] {
                    sum += if on[p] || on[q] { fg[p] - fg[q] } else { bg[p] - bg[q] };
                }
                guidance[p] = sum;
            }
        }
        let sol = poisson_solve(&Plane::new(w, h, initial), &Plane::new(w, h, guidance), settings);
        for y in 0..h {
            for x in 0..w {
                if on[y * w + x] {
                    let (cx, cy) = ((region.x + x as i32) as u32, (region.y + y as i32) as u32);
                    let mut px = canvas.pixel(cx, cy);
                    px[c] = quantize_level(sol.values.at(x, y));
                    canvas.set_pixel(cx, cy, px);
                }
            }
        }
        worst.iterations = worst.iterations.max(sol.iterations);
        worst.converged &= sol.converged;
    }
    worst
}

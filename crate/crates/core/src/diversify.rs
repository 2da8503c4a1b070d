//! Foreground diversification with a parametric lighting stylizer.
//!
//! Each variant of a seed instance receives a spotlight (a Gaussian brightness
//! bump centred somewhere on the object) followed by a per-channel color tone
//! shift. Only pixels inside the mask are touched, so the mask and its tight
//! box never change. Pre-styled images produced elsewhere plug in through the
//! [`Stylizer`] trait (see [`crate::dataset::VariantsDirectory`]).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{ComposeError, GeometryError};
use crate::geometry::{quantize_level, tight_bbox, AlphaMask, Raster};
use crate::rng::RngStream;

pub type ClassId = u32;

pub const SPOTLIGHT_GAIN_RANGE: (f64, f64) = (1.0, 1.8);
pub const SPOTLIGHT_RADIUS_RANGE: (f64, f64) = (0.2, 0.8);
pub const TONE_GAIN_RANGE: (f64, f64) = (0.7, 1.3);
pub const TONE_OFFSET_RANGE: (f64, f64) = (-25.0, 25.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleParams {
    /// Normalized `(u, v)` position inside the instance's tight box.
    pub spotlight_center: (f64, f64),
    /// Fraction of the tight box diagonal.
    pub spotlight_radius: f64,
    pub spotlight_gain: f64,
    pub tone_gain: [f64; 3],
    pub tone_offset: [f64; 3],
}

impl StyleParams {
    /// Parameters that leave every pixel unchanged.
    pub fn neutral() -> Self {
        StyleParams {
            spotlight_center: (0.5, 0.5),
            spotlight_radius: 0.5,
            spotlight_gain: 1.0,
            tone_gain: [1.0; 3],
            tone_offset: [0.0; 3],
        }
    }

    pub fn sample(rng: &mut RngStream) -> Self {
        let u = rng.uniform();
        let v = rng.uniform();
        let spotlight_radius = rng.uniform_in(SPOTLIGHT_RADIUS_RANGE.0, SPOTLIGHT_RADIUS_RANGE.1);
        let spotlight_gain = rng.uniform_in(SPOTLIGHT_GAIN_RANGE.0, SPOTLIGHT_GAIN_RANGE.1);
        let mut tone_gain = [0.0; 3];
        let mut tone_offset = [0.0; 3];
        for g in &mut tone_gain {
            *g = rng.uniform_in(TONE_GAIN_RANGE.0, TONE_GAIN_RANGE.1);
        }
        for o in &mut tone_offset {
            *o = rng.uniform_in(TONE_OFFSET_RANGE.0, TONE_OFFSET_RANGE.1);
        }
        StyleParams { spotlight_center: (u, v), spotlight_radius, spotlight_gain, tone_gain, tone_offset }
    }

    pub fn is_within_ranges(&self) -> bool {
        let inr = |v: f64, r: (f64, f64)| v >= r.0 && v <= r.1;
        inr(self.spotlight_center.0, (0.0, 1.0))
            && inr(self.spotlight_center.1, (0.0, 1.0))
            && self.spotlight_radius > 0.0
            && inr(self.spotlight_gain, SPOTLIGHT_GAIN_RANGE)
            && self.tone_gain.iter().all(|&g| inr(g, TONE_GAIN_RANGE))
            && self.tone_offset.iter().all(|&o| inr(o, TONE_OFFSET_RANGE))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Styled { params: StyleParams },
    /// A pre-styled image loaded from a variants directory.
    External { path: PathBuf },
}

impl Provenance {
    pub fn is_styled(&self) -> bool {
        !matches!(self, Provenance::Original)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedInstance {
    pub raster: Raster,
    pub mask: AlphaMask,
    pub class_id: ClassId,
    /// Index of the original seed this instance derives from.
    pub seed_index: usize,
    pub provenance: Provenance,
}

impl SeedInstance {
    pub fn new(raster: Raster, mask: AlphaMask, class_id: ClassId, seed_index: usize) -> Result<Self, GeometryError> {
        if raster.dims() != mask.dims() {
            return Err(GeometryError::DimensionMismatch { raster: raster.dims(), mask: mask.dims() });
        }
        Ok(SeedInstance { raster, mask, class_id, seed_index, provenance: Provenance::Original })
    }
}

/// Multiplies in-mask pixels by a Gaussian spotlight `1 + (gain - 1) exp(-d^2 / 2r^2)`.
pub fn spotlight(img: &Raster, mask: &AlphaMask, p: &StyleParams) -> Raster {
    let mut out = img.clone();
    let Ok(bb) = tight_bbox(mask) else {
        return out;
    };
    if p.spotlight_gain == 1.0 {
        return out;
    }
    let cx = bb.x as f64 + p.spotlight_center.0 * bb.w as f64;
    let cy = bb.y as f64 + p.spotlight_center.1 * bb.h as f64;
    let diag = ((bb.w as f64).powi(2) + (bb.h as f64).powi(2)).sqrt();
    let r = (p.spotlight_radius * diag).max(1e-6);
    for y in bb.y as u32..bb.bottom() as u32 {
        for x in bb.x as u32..bb.right() as u32 {
            if !mask.is_on(x, y) {
                continue;
            }
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            let factor = 1.0 + (p.spotlight_gain - 1.0) * (-d2 / (2.0 * r * r)).exp();
            let px = out.pixel(x, y);
            out.set_pixel(x, y, px.map(|c| quantize_level(c as f64 * factor)));
        }
    }
    out
}

/// In-mask affine color change `c' = c * gain_c + offset_c`.
pub fn tone_shift(img: &Raster, mask: &AlphaMask, p: &StyleParams) -> Raster {
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if !mask.is_on(x, y) {
                continue;
            }
            let px = out.pixel(x, y);
            let mut q = [0u8; 3];
            for c in 0..3 {
                q[c] = quantize_level(px[c] as f64 * p.tone_gain[c] + p.tone_offset[c]);
            }
            out.set_pixel(x, y, q);
        }
    }
    out
}

/// Spotlight followed by tone shift.
pub fn apply_style(seed: &SeedInstance, params: StyleParams) -> SeedInstance {
    let lit = spotlight(&seed.raster, &seed.mask, &params);
    let raster = tone_shift(&lit, &seed.mask, &params);
    SeedInstance {
        raster,
        mask: seed.mask.clone(),
        class_id: seed.class_id,
        seed_index: seed.seed_index,
        provenance: Provenance::Styled { params },
    }
}

/// Produces styled copies of a seed instance.
pub trait Stylizer {
    fn variants(&self, seed: &SeedInstance, n: usize, rng: &mut RngStream) -> Vec<SeedInstance>;
}

/// The default lighting stylizer.
#[derive(Debug, Clone, Copy, Default)]
pub struct LightingStylizer;

impl Stylizer for LightingStylizer {
    fn variants(&self, seed: &SeedInstance, n: usize, rng: &mut RngStream) -> Vec<SeedInstance> {
        make_variants(seed, n, rng)
    }
}

pub fn make_variants(seed: &SeedInstance, n: usize, rng: &mut RngStream) -> Vec<SeedInstance> {
    (0..n).map(|_| apply_style(seed, StyleParams::sample(rng))).collect()
}

/// Picks the styled pool with probability `p_styled`, then a uniform member of it.
pub fn select_seed<'a>(
    pool_original: &'a [SeedInstance],
    pool_styled: &'a [SeedInstance],
    p_styled: f64,
    rng: &mut RngStream,
) -> Result<&'a SeedInstance, ComposeError> {
    let styled = rng.chance(p_styled);
    let pool = if styled { pool_styled } else { pool_original };
    if pool.is_empty() {
        return Err(ComposeError::EmptyPool { styled });
    }
    Ok(&pool[rng.index(pool.len())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;

    fn textured_seed() -> SeedInstance {
        let (w, h) = (24u32, 20u32);
        let data = (0..w * h * 3).map(|i| (40 + (i * 37) % 150) as u8).collect();
        let raster = Raster::from_vec(w, h, data).unwrap();
        let mask = AlphaMask::from_fn(w, h, |x, y| (4..20).contains(&x) && (3..17).contains(&y));
        SeedInstance::new(raster, mask, 1, 0).unwrap()
    }

    #[test]
    fn neutral_params_are_identity() {
        let s = textured_seed();
        let p = StyleParams::neutral();
        assert_eq!(spotlight(&s.raster, &s.mask, &p), s.raster);
        assert_eq!(tone_shift(&s.raster, &s.mask, &p), s.raster);
    }

    #[test]
    fn spotlight_center_clamps() {
        let img = Raster::filled(5, 5, [200, 200, 200]);
        let mask = AlphaMask::filled(5, 5, 1.0);
        // tight box (0,0,5,5); center (0.5,0.5) of the box is pixel coordinate (2.5, 2.5)
        let p = StyleParams { spotlight_gain: 1.5, spotlight_center: (0.5, 0.5), ..StyleParams::neutral() };
        let out = spotlight(&img, &mask, &p);
        // nearest pixel to the center still gets almost the full gain
        assert_eq!(out.pixel(2, 2), [255; 3]);
    }

    #[test]
    fn spotlight_at_one_radius() {
        let mask = AlphaMask::filled(10, 10, 1.0);
        let img = Raster::filled(10, 10, [100, 100, 100]);
        // center at pixel (0, 0), radius = 3 px via fraction of the diagonal
        let diag = (200.0f64).sqrt();
        let p = StyleParams {
            spotlight_center: (0.0, 0.0),
            spotlight_radius: 3.0 / diag,
            spotlight_gain: 1.4,
            ..StyleParams::neutral()
        };
        let out = spotlight(&img, &mask, &p);
        let expected = (100.0 * (1.0 + 0.4 * (-0.5f64).exp())).round() as u8;
        assert_eq!(expected, 124);
        assert_eq!(out.pixel(3, 0), [expected; 3]);
        assert_eq!(out.pixel(0, 0), [140; 3]);
    }

    #[test]
    fn tone_shift_examples() {
        let mask = AlphaMask::filled(1, 1, 1.0);
        let p = StyleParams { tone_gain: [1.2, 1.3, 1.0], tone_offset: [10.0, 0.0, 0.0], ..StyleParams::neutral() };
        let out = tone_shift(&Raster::filled(1, 1, [100, 250, 7]), &mask, &p);
        assert_eq!(out.pixel(0, 0), [130, 255, 7]);
    }

    #[test]
    fn styling_only_touches_mask_pixels() {
        let s = textured_seed();
        let mut rng = rng_stream(9, 9);
        for v in make_variants(&s, 6, &mut rng) {
            assert_eq!(v.mask, s.mask);
            assert_eq!(tight_bbox(&v.mask), tight_bbox(&s.mask));
            assert!(v.provenance.is_styled());
            for y in 0..s.raster.height() {
                for x in 0..s.raster.width() {
                    if !s.mask.is_on(x, y) {
                        assert_eq!(v.raster.pixel(x, y), s.raster.pixel(x, y));
                    }
                }
            }
        }
    }

    #[test]
    fn make_variants_counts_and_determinism() {
        let s = textured_seed();
        assert!(make_variants(&s, 0, &mut rng_stream(1, 1)).is_empty());
        let a = make_variants(&s, 4, &mut rng_stream(1, 1));
        let b = make_variants(&s, 4, &mut rng_stream(1, 1));
        assert_eq!(a.len(), 4);
        assert_eq!(a, b);
    }

    #[test]
    fn variants_differ_on_enough_mask_pixels() {
        let s = textured_seed();
        let on = s.mask.count_on();
        let mut rng = rng_stream(77, 0);
        for v in make_variants(&s, 50, &mut rng) {
            let Provenance::Styled { params } = &v.provenance else { unreachable!() };
            assert!(params.is_within_ranges());
            let changed = (0..s.raster.height())
                .flat_map(|y| (0..s.raster.width()).map(move |x| (x, y)))
                .filter(|&(x, y)| s.mask.is_on(x, y) && v.raster.pixel(x, y) != s.raster.pixel(x, y))
                .count();
            assert!(changed * 100 >= on, "only {changed} of {on} pixels changed");
        }
    }

    #[test]
    fn select_seed_probabilities() {
        let s = textured_seed();
        let originals = vec![s.clone()];
        let styled = make_variants(&s, 3, &mut rng_stream(5, 5));
        let mut rng = rng_stream(3, 3);
        for _ in 0..200 {
            assert!(!select_seed(&originals, &styled, 0.0, &mut rng).unwrap().provenance.is_styled());
            assert!(select_seed(&originals, &styled, 1.0, &mut rng).unwrap().provenance.is_styled());
        }
        // binomial sd for 10k draws at p = 0.5 is 0.005, so 0.015 is 3 sd
        let n = 10_000;
        let hits = (0..n).filter(|_| select_seed(&originals, &styled, 0.5, &mut rng).unwrap().provenance.is_styled()).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() <= 0.015);
    }

    #[test]
    fn select_seed_empty_pool() {
        let s = textured_seed();
        let mut rng = rng_stream(0, 0);
        assert_eq!(select_seed(&[s], &[], 1.0, &mut rng), Err(ComposeError::EmptyPool { styled: true }));
        assert_eq!(select_seed(&[], &[], 0.0, &mut rng), Err(ComposeError::EmptyPool { styled: false }));
    }
}

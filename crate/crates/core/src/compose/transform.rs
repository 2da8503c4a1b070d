use crate::diversify::SeedInstance;
use crate::error::ComposeError;
use crate::geometry::{quantize_level, tight_bbox, AlphaMask, BBox, Raster};

/// Scales and rotates an instance about its frame centre with bilinear resampling.
///
/// The output frame is the bounding rectangle of the transformed input frame.
/// Fails with `DegenerateScale` when the transformed mask's tight box is
/// smaller than 2x2.
pub fn transform_instance(seed: &SeedInstance, scale: f64, rotation_deg: f64) -> Result<SeedInstance, ComposeError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(ComposeError::DegenerateScale { w: 0, h: 0 });
    }
    let out = if scale == 1.0 && rotation_deg == 0.0 {
        seed.clone()
    } else {
        resample(seed, scale, rotation_deg)
    };
    match tight_bbox(&out.mask) {
        Ok(b) if b.w >= 2 && b.h >= 2 => Ok(out),
        Ok(b) => Err(ComposeError::DegenerateScale { w: b.w, h: b.h }),
        Err(_) => Err(ComposeError::DegenerateScale { w: 0, h: 0 }),
    }
}

fn resample(seed: &SeedInstance, scale: f64, rotation_deg: f64) -> SeedInstance {
    let (sw, sh) = seed.raster.dims();
    let theta = rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let extent = |a: f64, b: f64| ((scale * (a * cos.abs() + b * sin.abs()) - 1e-9).ceil() as u32).max(1);
    let (ow, oh) = (extent(sw as f64, sh as f64), extent(sh as f64, sw as f64));

    let mut raster = Raster::filled(ow, oh, [0, 0, 0]);
    let mut mask = AlphaMask::zeros(ow, oh);
    let src_rgb = seed.raster.data();
    let src_mask = seed.mask.data();
    let (swi, shi) = (sw as i64, sh as i64);

    for y in 0..oh {
        for x in 0..ow {
            let px = x as f64 + 0.5 - ow as f64 / 2.0;
            let py = y as f64 + 0.5 - oh as f64 / 2.0;
            let u = (cos * px + sin * py) / scale + sw as f64 / 2.0 - 0.5;
            let v = (-sin * px + cos * py) / scale + sh as f64 / 2.0 - 0.5;

            let x0 = u.floor() as i64;
            let y0 = v.floor() as i64;
            let fx = u - x0 as f64;
            let fy = v - y0 as f64;
            let taps = [(x0, y0, (1.0 - fx) * (1.0 - fy)), (x0 + 1, y0, fx * (1.0 - fy)), (x0, y0 + 1, (1.0 - fx) * fy), (x0 + 1, y0 + 1, fx * fy)];

            let mut cov = 0.0;
            let mut rgb = [0.0f64; 3];
            for &(tx, ty, wgt) in &taps {
                if tx >= 0 && ty >= 0 && tx < swi && ty < shi {
                    cov += wgt * src_mask[(ty * swi + tx) as usize] as f64;
                }
                let cx = tx.clamp(0, swi - 1);
                let cy = ty.clamp(0, shi - 1);
                let o = ((cy * swi + cx) * 3) as usize;
                for c in 0..3 {
                    rgb[c] += wgt * src_rgb[o + c] as f64;
                }
            }
            mask.set(x, y, cov as f32);
            raster.set_pixel(x, y, rgb.map(quantize_level));
        }
    }
    SeedInstance { raster, mask, ..seed.clone() }
}

/// Crops the instance to its tight box grown by `margin` (clipped to the frame).
///
/// Returns the cropped instance and the tight box in the cropped frame.
pub fn crop_instance(inst: &SeedInstance, margin: u32) -> Result<(SeedInstance, BBox), ComposeError> {
    let core = tight_bbox(&inst.mask)?;
    let (w, h) = inst.raster.dims();
    let frame = core.padded(margin).clip_to(w, h).expect("tight box lies inside the frame");
    let cropped = SeedInstance {
        raster: inst.raster.crop(frame),
        mask: inst.mask.crop(frame),
        ..inst.clone()
    };
    Ok((cropped, core.translated(-frame.x, -frame.y)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_instance(fw: u32, fh: u32, r: BBox) -> SeedInstance {
        let raster = Raster::from_vec(fw, fh, (0..fw * fh * 3).map(|i| (i % 200) as u8).collect()).unwrap();
        let mask = AlphaMask::from_fn(fw, fh, |x, y| {
            x as i32 >= r.x && (x as i64) < r.right() && y as i32 >= r.y && (y as i64) < r.bottom()
        });
        SeedInstance::new(raster, mask, 1, 0).unwrap()
    }

    #[test]
    fn identity_transform() {
        let s = rect_instance(30, 20, BBox::new(5, 4, 12, 9).unwrap());
        assert_eq!(transform_instance(&s, 1.0, 0.0).unwrap(), s);
        // the general resampling path is also exact at identity
        assert_eq!(resample(&s, 1.0, 0.0), s);
    }

    #[test]
    fn quarter_turn_swaps_box_dims() {
        let s = rect_instance(40, 30, BBox::new(6, 8, 20, 10).unwrap());
        for angle in [90.0, -90.0] {
            let t = transform_instance(&s, 1.0, angle).unwrap();
            assert_eq!(t.raster.dims(), (30, 40));
            let b = tight_bbox(&t.mask).unwrap();
            assert!((b.w as i64 - 10).abs() <= 1 && (b.h as i64 - 20).abs() <= 1, "{b:?}");
        }
    }

    #[test]
    fn half_scale_halves_box() {
        let s = rect_instance(64, 48, BBox::new(8, 8, 40, 24).unwrap());
        let t = transform_instance(&s, 0.5, 0.0).unwrap();
        // resampling oracle: a point-sampled rectangle maps [8, 48) x [8, 32) to [4, 24) x [4, 16)
        let b = tight_bbox(&t.mask).unwrap();
        assert!((b.w as i64 - 20).abs() <= 1 && (b.h as i64 - 12).abs() <= 1, "{b:?}");
        assert!((b.x - 4).abs() <= 1 && (b.y - 4).abs() <= 1);
        assert!(t.mask.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn rotation_keeps_mask_in_range_and_area_close() {
        let s = rect_instance(50, 50, BBox::new(10, 10, 30, 30).unwrap());
        let t = transform_instance(&s, 1.2, 30.0).unwrap();
        assert!(t.mask.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let expected = 30.0 * 30.0 * 1.44;
        assert!((t.mask.sum() - expected).abs() / expected < 0.03);
    }

    #[test]
    fn degenerate_scale() {
        let s = rect_instance(20, 20, BBox::new(5, 5, 6, 6).unwrap());
        assert!(matches!(transform_instance(&s, 0.05, 0.0), Err(ComposeError::DegenerateScale { .. })));
        assert!(matches!(transform_instance(&s, 0.0, 0.0), Err(ComposeError::DegenerateScale { .. })));
    }

    #[test]
    fn crop_keeps_margin_inside_frame() {
        let s = rect_instance(20, 20, BBox::new(1, 5, 6, 6).unwrap());
        let (c, core) = crop_instance(&s, 3).unwrap();
        assert_eq!(c.raster.dims(), (10, 12));
        assert_eq!(core, BBox::new(1, 3, 6, 6).unwrap());
        assert_eq!(tight_bbox(&c.mask).unwrap(), core);
    }
}

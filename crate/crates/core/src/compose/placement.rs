use serde::{Deserialize, Serialize};

use crate::error::ComposeError;
use crate::geometry::BBox;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub x: i32,
    pub y: i32,
    pub near_previous: bool,
}

/// Inclusive range of top-left coordinates that keep at least `visible_px`
/// pixels of an extent `len` inside `0..canvas`.
fn axis_range(canvas: u32, len: u32, visible_px: u32) -> Option<(i64, i64)> {
    let lo = visible_px as i64 - len as i64;
    let hi = canvas as i64 - visible_px as i64;
    (lo <= hi).then_some((lo, hi))
}

/// Chooses the top-left corner for an instance whose tight box is `inst` (w, h).
///
/// With probability `occ_prob`, and only when earlier boxes exist, the new
/// centre is drawn uniformly within half a box size of a random earlier box's
/// centre (`near_previous`). Otherwise the corner is uniform over all positions
/// that keep at least `min_visible` of the box area in frame (at least
/// `sqrt(min_visible)` of each side).
pub fn sample_position(
    canvas: (u32, u32),
    inst: (u32, u32),
    priors: &[BBox],
    occ_prob: f64,
    min_visible: f64,
    rng: &mut RngStream,
) -> Result<Position, ComposeError> {
    let (w, h) = inst;
    let side = min_visible.clamp(0.0, 1.0).sqrt();
    let need = |len: u32| (((side * len as f64) - 1e-9).ceil() as u32).clamp(1, len);
    let err = ComposeError::NoValidPosition { w, h };
    let (xlo, xhi) = axis_range(canvas.0, w, need(w)).ok_or(err.clone())?;
    let (ylo, yhi) = axis_range(canvas.1, h, need(h)).ok_or(err)?;

    let near = !priors.is_empty() && rng.chance(occ_prob);
    if near {
        let prior = priors[rng.index(priors.len())];
        let (pcx, pcy) = prior.center();
        let cx = pcx + rng.uniform_in(-(prior.w as f64) / 2.0, prior.w as f64 / 2.0);
        let cy = pcy + rng.uniform_in(-(prior.h as f64) / 2.0, prior.h as f64 / 2.0);
        let x = ((cx - w as f64 / 2.0).round() as i64).clamp(xlo, xhi);
        let y = ((cy - h as f64 / 2.0).round() as i64).clamp(ylo, yhi);
        return Ok(Position { x: x as i32, y: y as i32, near_previous: true });
    }
    let x = rng.int_in(xlo, xhi);
    let y = rng.int_in(ylo, yhi);
    Ok(Position { x: x as i32, y: y as i32, near_previous: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;

    fn in_frame_fraction(p: &Position, w: u32, h: u32, canvas: (u32, u32)) -> f64 {
        let b = BBox::new(p.x, p.y, w, h).unwrap();
        b.clip_to(canvas.0, canvas.1).map_or(0.0, |c| c.area() as f64 / b.area() as f64)
    }

    #[test]
    fn no_priors_means_uniform() {
        let mut rng = rng_stream(1, 2);
        for _ in 0..500 {
            let p = sample_position((200, 100), (40, 30), &[], 1.0, 0.25, &mut rng).unwrap();
            assert!(!p.near_previous);
            assert!(in_frame_fraction(&p, 40, 30, (200, 100)) >= 0.25);
        }
    }

    #[test]
    fn zero_occ_prob_never_near() {
        let priors = [BBox::new(50, 20, 30, 30).unwrap()];
        let mut rng = rng_stream(1, 3);
        assert!((0..500).all(|_| !sample_position((200, 100), (20, 20), &priors, 0.0, 0.25, &mut rng).unwrap().near_previous));
    }

    #[test]
    fn near_fraction_is_binomial() {
        let priors = [BBox::new(50, 20, 30, 30).unwrap(), BBox::new(120, 50, 40, 20).unwrap()];
        let mut rng = rng_stream(8, 8);
        let n = 10_000;
        let near = (0..n)
            .filter(|_| sample_position((200, 100), (20, 20), &priors, 0.5, 0.25, &mut rng).unwrap().near_previous)
            .count();
        assert!((near as f64 / n as f64 - 0.5).abs() <= 0.015, "{near}");
    }

    #[test]
    fn near_positions_overlap_their_prior_region() {
        let prior = BBox::new(80, 40, 40, 20).unwrap();
        let mut rng = rng_stream(2, 2);
        for _ in 0..1000 {
            let p = sample_position((300, 200), (10, 10), &[prior], 1.0, 0.25, &mut rng).unwrap();
            let (cx, cy) = (p.x as f64 + 5.0, p.y as f64 + 5.0);
            assert!((cx - 100.0).abs() <= 20.5 && (cy - 50.0).abs() <= 10.5);
        }
    }

    #[test]
    fn visibility_clamp_and_failure() {
        let prior = BBox::new(-50, -50, 60, 60).unwrap();
        let mut rng = rng_stream(5, 1);
        for _ in 0..300 {
            let p = sample_position((100, 80), (50, 50), &[prior], 1.0, 0.5, &mut rng).unwrap();
            assert!(in_frame_fraction(&p, 50, 50, (100, 80)) >= 0.5 - 1e-9);
        }
        // sqrt(0.81) * 400 = 360 columns must be visible on a 300-wide canvas
        assert_eq!(
            sample_position((300, 300), (400, 10), &[], 0.0, 0.81, &mut rng),
            Err(ComposeError::NoValidPosition { w: 400, h: 10 })
        );
    }
}

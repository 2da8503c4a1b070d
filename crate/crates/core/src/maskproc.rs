//! Mask refinement applied before compositing.

use std::collections::VecDeque;

use crate::filter::{blur_plane, gaussian_kernel};
use crate::geometry::AlphaMask;

/// Fills interior holes: every off-pixel that is not 4-connected to the image
/// border through other off-pixels is switched on.
pub fn fill_holes(mask: &AlphaMask) -> AlphaMask {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut exterior = vec![false; w * h];
    let mut queue = VecDeque::new();

    let seed = |x: usize, y: usize, exterior: &mut Vec<bool>, queue: &mut VecDeque<(usize, usize)>| {
        let i = y * w + x;
        if !exterior[i] && !mask.is_on(x as u32, y as u32) {
            exterior[i] = true;
            queue.push_back((x, y));
        }
    };
    for x in 0..w {
        seed(x, 0, &mut exterior, &mut queue);
        seed(x, h - 1, &mut exterior, &mut queue);
    }
    for y in 0..h {
        seed(0, y, &mut exterior, &mut queue);
        seed(w - 1, y, &mut exterior, &mut queue);
    }

    while let Some((x, y)) = queue.pop_front() {
        if x > 0 {
            seed(x - 1, y, &mut exterior, &mut queue);
        }
        if x + 1 < w {
            seed(x + 1, y, &mut exterior, &mut queue);
        }
        if y > 0 {
            seed(x, y - 1, &mut exterior, &mut queue);
        }
        if y + 1 < h {
            seed(x, y + 1, &mut exterior, &mut queue);
        }
    }

    let mut out = mask.clone();
    for y in 0..h {
        for x in 0..w {
            if !exterior[y * w + x] && !mask.is_on(x as u32, y as u32) {
                out.set(x as u32, y as u32, 1.0);
            }
        }
    }
    out
}

/// Softens mask edges with a Gaussian of the given sigma (reflect borders).
pub fn feather(mask: &AlphaMask, sigma: f64) -> AlphaMask {
    if sigma <= 0.0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let blurred = blur_plane(mask.data(), w as usize, h as usize, &gaussian_kernel(sigma));
    AlphaMask::from_plane_clamped(w, h, blurred)
}

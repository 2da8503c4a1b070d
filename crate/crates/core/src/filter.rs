//! Separable Gaussian filtering on floating point planes.

/// Normalized sampled Gaussian with radius `ceil(3 sigma)`.
///
/// `sigma <= 0` yields the single-tap identity kernel.
pub fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| (w / total) as f32).collect()
}

/// Maps any integer coordinate into `0..n` by symmetric reflection (`... 1 0 | 0 1 ... n-1 | n-1 n-2 ...`).
#[inline]
pub fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// Horizontal then vertical pass with reflect borders.
pub fn blur_plane(plane: &[f32], width: usize, height: usize, kernel: &[f32]) -> Vec<f32> {
    if kernel.len() == 1 {
        return plane.to_vec();
    }
    let radius = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0f32; plane.len()];

    let mut padded = vec![0.0f32; width + 2 * radius as usize];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for (j, p) in padded.iter_mut().enumerate() {
            *p = row[reflect(j as i64 - radius, width)];
        }
        let out = &mut tmp[y * width..(y + 1) * width];
        for (x, o) in out.iter_mut().enumerate() {
            let window = &padded[x..x + kernel.len()];
            *o = window.iter().zip(kernel).map(|(v, k)| v * k).sum();
        }
    }

    let mut out = vec![0.0f32; plane.len()];
    for (k, &w) in kernel.iter().enumerate() {
        let dy = k as i64 - radius;
        for y in 0..height {
            let src = reflect(y as i64 + dy, height);
            let src_row = &tmp[src * width..(src + 1) * width];
            let dst_row = &mut out[y * width..(y + 1) * width];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += w * s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        for sigma in [0.5, 1.0, 2.0, 3.7] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len(), 2 * (3.0f64 * sigma).ceil() as usize + 1);
            let s: f32 = k.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            for i in 0..k.len() {
                assert_eq!(k[i], k[k.len() - 1 - i]);
            }
        }
        assert_eq!(gaussian_kernel(0.0), vec![1.0]);
    }

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(reflect(-5, 1), 0);
        assert_eq!(reflect(100, 3), reflect(100 % 6, 3));
    }

    #[test]
    fn constant_plane_is_fixed_point_even_with_wide_kernel() {
        let plane = vec![0.75f32; 5 * 3];
        let out = blur_plane(&plane, 5, 3, &gaussian_kernel(4.0));
        assert!(out.iter().all(|v| (v - 0.75).abs() < 1e-5));
    }
}

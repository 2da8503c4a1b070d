//! Background degradation: blur, gray conversion and 3-3-2 color quantization.

use serde::{Deserialize, Serialize};

use crate::filter::{blur_plane, gaussian_kernel};
use crate::geometry::Raster;

pub const DEFAULT_BLUR_SIGMA: f64 = 2.0;

fn default_sigma() -> f64 {
    DEFAULT_BLUR_SIGMA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimplifyStep {
    None,
    GaussianBlur {
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    Gray,
    #[serde(rename = "quantize_8bit")]
    Quantize8Bit,
}

/// Ordered chain of simplification steps; an empty chain is the identity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplifySpec(pub Vec<SimplifyStep>);

impl SimplifySpec {
    pub fn none() -> Self {
        Self(Vec::new())
    }

    pub fn gray() -> Self {
        Self(vec![SimplifyStep::Gray])
    }

    pub fn validate(&self) -> Result<(), String> {
        for step in &self.0 {
            if let SimplifyStep::GaussianBlur { sigma } = step {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(format!("gaussian_blur sigma must be > 0, got {sigma}"));
                }
            }
        }
        Ok(())
    }
}

/// Per-channel separable Gaussian blur, radius `ceil(3 sigma)`, reflect borders.
pub fn gaussian_blur(img: &Raster, sigma: f64) -> Raster {
    if sigma <= 0.0 {
        return img.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let (w, h) = img.dims();
    let planes = img.to_planes();
    let blurred = planes.map(|p| blur_plane(&p, w as usize, h as usize, &kernel));
    Raster::from_planes(w, h, &blurred)
}

/// BT.601 luma, rounded half up, replicated into all three channels.
#[inline]
pub fn luma(rgb: [u8; 3]) -> u8 {
    let weighted = 299 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32;
    ((weighted + 500) / 1000) as u8
}

pub fn to_gray(img: &Raster) -> Raster {
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let l = luma([px[0], px[1], px[2]]);
        px.fill(l);
    }
    out
}

#[inline]
fn reconstruct(bucket: u32, levels: u32) -> u8 {
    // round(bucket * 255 / (levels - 1)) in integer arithmetic
    let d = levels - 1;
    ((2 * bucket * 255 + d) / (2 * d)) as u8
}

/// Keeps the top 3 bits of red and green and the top 2 bits of blue.
#[inline]
pub fn quantize_pixel(rgb: [u8; 3]) -> [u8; 3] {
    [
        reconstruct(rgb[0] as u32 >> 5, 8),
        reconstruct(rgb[1] as u32 >> 5, 8),
        reconstruct(rgb[2] as u32 >> 6, 4),
    ]
}

pub fn quantize_8bit(img: &Raster) -> Raster {
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let q = quantize_pixel([px[0], px[1], px[2]]);
        px.copy_from_slice(&q);
    }
    out
}

/// Applies the chain in declared order.
pub fn simplify_background(img: &Raster, spec: &SimplifySpec) -> Raster {
    let mut out = img.clone();
    for step in &spec.0 {
        out = match *step {
            SimplifyStep::None => out,
            SimplifyStep::GaussianBlur { sigma } => gaussian_blur(&out, sigma),
            SimplifyStep::Gray => to_gray(&out),
            SimplifyStep::Quantize8Bit => quantize_8bit(&out),
        };
    }
    out
}

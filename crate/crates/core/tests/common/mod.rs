//! Synthetic inputs shared by the integration tests.
#![allow(dead_code)]

use synthpaste::gapmeter::{Domain, Patch, PatchSet, Region};
use synthpaste::RngStream;

pub const SIDE: usize = 32;

/// Gaussian sample via Box-Muller.
pub fn normal(rng: &mut RngStream, mean: f64, sd: f64) -> f64 {
    let u1 = 1.0 - rng.uniform();
    let u2 = rng.uniform();
    mean + sd * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Textured patch: a random base color, a random linear ramp and pixel noise.
pub fn textured_patch(rng: &mut RngStream, base: [f64; 3]) -> Vec<u8> {
    let ramp = [rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
    let mut px = Vec::with_capacity(SIDE * SIDE * 3);
    for y in 0..SIDE {
        for x in 0..SIDE {
            let shade = ramp[0] * (x as f64 - 15.5) + ramp[1] * (y as f64 - 15.5);
            for b in base {
                px.push(clamp_u8(b + shade + rng.uniform_in(-12.0, 12.0)));
            }
        }
    }
    px
}

/// Colorful patches with an independent uniform base color each.
pub fn colorful_patch(rng: &mut RngStream) -> Vec<u8> {
    let base = [rng.uniform_in(30.0, 225.0), rng.uniform_in(30.0, 225.0), rng.uniform_in(30.0, 225.0)];
    textured_patch(rng, base)
}

/// Red-dominant (`red = true`) or blue-dominant patches.
pub fn tinted_patch(rng: &mut RngStream, red: bool) -> Vec<u8> {
    let hi = rng.uniform_in(160.0, 225.0);
    let lo = rng.uniform_in(20.0, 90.0);
    let g = rng.uniform_in(20.0, 90.0);
    textured_patch(rng, if red { [hi, g, lo] } else { [lo, g, hi] })
}

/// Constant gray patch with brightness drawn from `N(mean, sd)`.
pub fn constant_patch(rng: &mut RngStream, mean: f64, sd: f64) -> Vec<u8> {
    vec![clamp_u8(normal(rng, mean, sd)); SIDE * SIDE * 3]
}

/// `n` patches from `gen`, each tagged with its own scene id `"{prefix}{i}"`.
pub fn patch_set(n: usize, domain: Domain, prefix: &str, mut gen: impl FnMut() -> Vec<u8>) -> PatchSet {
    let patches = (0..n).map(|i| Patch::new(gen(), format!("{prefix}{i}")).unwrap()).collect();
    PatchSet::new(patches, domain, Region::Background)
}

/// Luma-gray version of a patch.
pub fn gray_patch(p: &Patch) -> Patch {
    p.map_raster(synthpaste::simplify::to_gray)
}

/// Irregular blob seed with a textured body and an alpha channel.
fn seed_image(rng: &mut RngStream, w: u32, h: u32, hue: [f64; 3]) -> image::RgbaImage {
    let lobes: Vec<(f64, f64)> = (0..3).map(|_| (rng.uniform_in(0.1, 0.25), rng.uniform_in(0.0, std::f64::consts::TAU))).collect();
    let stripes = rng.uniform_in(4.0, 12.0);
    image::RgbaImage::from_fn(w, h, |x, y| {
        let (dx, dy) = ((x as f64 + 0.5) / w as f64 - 0.5, (y as f64 + 0.5) / h as f64 - 0.5);
        let theta = dy.atan2(dx);
        let radius = 0.42 * (1.0 + lobes.iter().enumerate().map(|(k, (a, p))| a * ((k as f64 + 2.0) * theta + p).sin()).sum::<f64>()) / 1.3;
        let inside = (dx * dx + dy * dy).sqrt() <= radius;
        let t = 0.5 + 0.5 * (stripes * (x as f64 / w as f64) * std::f64::consts::TAU).sin();
        let px = hue.map(|c| clamp_u8(c * (0.6 + 0.4 * t) + 25.0 * dy));
        image::Rgba([px[0], px[1], px[2], if inside { 255 } else { 0 }])
    })
}

/// Noisy two-color gradient background.
fn background_image(rng: &mut RngStream, w: u32, h: u32) -> image::RgbImage {
    let a = [rng.uniform_in(20.0, 235.0), rng.uniform_in(20.0, 235.0), rng.uniform_in(20.0, 235.0)];
    let b = [rng.uniform_in(20.0, 235.0), rng.uniform_in(20.0, 235.0), rng.uniform_in(20.0, 235.0)];
    let noise: Vec<f64> = (0..w * h).map(|_| rng.uniform_in(-10.0, 10.0)).collect();
    image::RgbImage::from_fn(w, h, |x, y| {
        let t = (x + y) as f64 / (w + h) as f64;
        let n = noise[(y * w + x) as usize];
        image::Rgb([0, 1, 2].map(|c| clamp_u8(a[c] * (1.0 - t) + b[c] * t + n)))
    })
}

/// Writes `classes` seed folders of `seeds` blobs each (about `seed_size`
/// pixels) and `backgrounds` images, and returns a config pointing at them.
pub fn scene_fixture(
    root: &std::path::Path,
    classes: usize,
    seeds: usize,
    seed_size: (u32, u32),
    backgrounds: usize,
    bg_size: (u32, u32),
) -> synthpaste::config::GenerationConfig {
    let mut rng = synthpaste::rng_stream(99, 0);
    for c in 0..classes {
        let dir = root.join("seeds").join(format!("class{c}"));
        std::fs::create_dir_all(&dir).unwrap();
        for s in 0..seeds {
            let hue = [rng.uniform_in(40.0, 230.0), rng.uniform_in(40.0, 230.0), rng.uniform_in(40.0, 230.0)];
            let w = (seed_size.0 as f64 * rng.uniform_in(0.8, 1.2)) as u32;
            let h = (seed_size.1 as f64 * rng.uniform_in(0.8, 1.2)) as u32;
            seed_image(&mut rng, w, h, hue).save(dir.join(format!("seed{s}.png"))).unwrap();
        }
    }
    let bg = root.join("backgrounds");
    std::fs::create_dir_all(&bg).unwrap();
    for b in 0..backgrounds {
        background_image(&mut rng, bg_size.0, bg_size.1).save(bg.join(format!("scene{b:03}.png"))).unwrap();
    }
    synthpaste::config::GenerationConfig {
        seeds_dir: root.join("seeds"),
        backgrounds_dir: bg,
        output_dir: root.join("out"),
        seeds_per_class: seeds,
        resolution: bg_size,
        ..Default::default()
    }
}

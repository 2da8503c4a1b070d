//! Loading seed objects, styled variants and backgrounds from disk.

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::DynamicImage;

use crate::coco::CocoCategory;
use crate::compose::{crop_instance, transform_instance, ClassPool, SeedPools};
use crate::config::GenerationConfig;
use crate::diversify::{make_variants, ClassId, Provenance, SeedInstance};
use crate::error::{Error, Result};
use crate::geometry::{tight_bbox, AlphaMask, Raster};
use crate::maskproc::fill_holes;
use crate::rng::{rng_stream, streams};

/// Margin kept around a seed's object box after loading.
const SEED_MARGIN: u32 = 2;
const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];
const MASK_SUFFIX: &str = "_mask";

fn has_image_extension(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Image files directly inside `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && has_image_extension(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Sorted subdirectory names of `dir`.
pub fn list_subdirs(dir: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            out.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    out.sort();
    Ok(out)
}

pub fn open_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::image(path, e))
}

pub fn load_raster(path: &Path) -> Result<Raster> {
    Ok(open_image(path)?.into_rgb8().into())
}

/// Reads the object mask of a seed image: `<stem>_mask.<ext>` next to it
/// (gray level / 255 as coverage), else the image's alpha channel.
pub fn load_seed_mask(img_path: &Path, img: &DynamicImage) -> Result<AlphaMask> {
    let dir = img_path.parent().unwrap_or(Path::new("."));
    let name = stem(img_path);
    let companion = IMAGE_EXTENSIONS.iter().map(|e| dir.join(format!("{name}{MASK_SUFFIX}.{e}"))).find(|p| p.is_file());
    let (w, h) = (img.width(), img.height());
    let mask = if let Some(mp) = companion {
        let m = open_image(&mp)?.into_luma8();
        if m.dimensions() != (w, h) {
            return Err(Error::Dataset(format!("{}: mask is {:?}, image is {:?}", mp.display(), m.dimensions(), (w, h))));
        }
        AlphaMask::from_u8(w, h, m.as_raw())?
    } else if img.color().has_alpha() {
        let rgba = img.to_rgba8();
        let alpha: Vec<u8> = rgba.pixels().map(|p| p.0[3]).collect();
        AlphaMask::from_u8(w, h, &alpha)?
    } else {
        return Err(Error::Dataset(format!("{}: no {name}{MASK_SUFFIX} file and no alpha channel", img_path.display())));
    };
    Ok(fill_holes(&mask))
}

/// Seed image paths of one class directory (mask files excluded).
pub fn seed_images(class_dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(list_images(class_dir)?.into_iter().filter(|p| !stem(p).ends_with(MASK_SUFFIX)).collect())
}

/// Pre-styled variants of a seed: `<dir>/<seed stem>_<k>.<ext>`, ordered by `k`.
pub fn variant_images(dir: &Path, seed_stem: &str) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let prefix = format!("{seed_stem}_");
    let mut found: Vec<(u64, PathBuf)> = list_images(dir)?
        .into_iter()
        .filter_map(|p| {
            let s = stem(&p);
            let k = s.strip_prefix(&prefix)?.parse::<u64>().ok()?;
            Some((k, p))
        })
        .collect();
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// Rescale factor bringing the longer object side to `size` pixels.
fn base_scale(mask: &AlphaMask, size: Option<u32>) -> Result<f64> {
    let Some(size) = size else { return Ok(1.0) };
    let b = tight_bbox(mask)?;
    Ok(size as f64 / b.w.max(b.h) as f64)
}

fn prepare(inst: SeedInstance, scale: f64) -> Result<SeedInstance> {
    let scaled = transform_instance(&inst, scale, 0.0)?;
    Ok(crop_instance(&scaled, SEED_MARGIN)?.0)
}

/// Loaded seed pools plus the category list they were built from.
#[derive(Debug, Clone)]
pub struct SeedLibrary {
    pub categories: Vec<CocoCategory>,
    pub pools: SeedPools,
}

/// Loads `seeds_per_class` seeds per class, fills mask holes, crops to the
/// object, and builds the styled pool either from `variants_dir` or with the
/// lighting stylizer (stream `VARIANTS + seed index`). Class ids start at 1 in
/// class order.
pub fn load_seed_library(cfg: &GenerationConfig) -> Result<SeedLibrary> {
    let classes = if cfg.classes.is_empty() { list_subdirs(&cfg.seeds_dir)? } else { cfg.classes.clone() };
    if classes.is_empty() {
        return Err(Error::Dataset(format!("{}: no class directories", cfg.seeds_dir.display())));
    }
    let mut categories = Vec::new();
    let mut pools = Vec::new();
    let mut seed_index = 0usize;
    for (ci, name) in classes.iter().enumerate() {
        let class_id = ci as ClassId + 1;
        let dir = cfg.seeds_dir.join(name);
        if !dir.is_dir() {
            return Err(Error::Dataset(format!("class directory {} not found", dir.display())));
        }
        let mut paths = seed_images(&dir)?;
        if paths.is_empty() {
            return Err(Error::Dataset(format!("{}: no seed images", dir.display())));
        }
        if paths.len() < cfg.seeds_per_class {
            log::warn!("class {name}: only {} of {} seed images", paths.len(), cfg.seeds_per_class);
        }
        paths.truncate(cfg.seeds_per_class);

        let mut pool = ClassPool { class_id, original: Vec::new(), styled: Vec::new() };
        for path in &paths {
            let img = open_image(path)?;
            let mask = load_seed_mask(path, &img)?;
            let raster: Raster = img.into_rgb8().into();
            let scale = base_scale(&mask, cfg.base_object_size).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
            let seed = SeedInstance::new(raster, mask.clone(), class_id, seed_index)?;
            let original = prepare(seed.clone(), scale)?;

            match &cfg.variants_dir {
                Some(vdir) => {
                    for vp in variant_images(&vdir.join(name), &stem(path))? {
                        let raster = load_raster(&vp)?;
                        if raster.dims() != seed.raster.dims() {
                            return Err(Error::Dataset(format!("{}: variant size differs from its seed", vp.display())));
                        }
                        let variant = SeedInstance { raster, provenance: Provenance::External { path: vp.clone() }, ..seed.clone() };
                        pool.styled.push(prepare(variant, scale)?);
                    }
                }
                None => {
                    let mut rng = rng_stream(cfg.global_seed, streams::VARIANTS + seed_index as u64);
                    pool.styled.extend(make_variants(&original, cfg.diversify.variants_per_seed, &mut rng));
                }
            }
            pool.original.push(original);
            seed_index += 1;
        }
        log::info!("class {name} (id {class_id}): {} seeds, {} styled", pool.original.len(), pool.styled.len());
        categories.push(CocoCategory { id: class_id, name: name.clone(), supercategory: "object".into() });
        pools.push(pool);
    }
    Ok(SeedLibrary { categories, pools: SeedPools { classes: pools, p_styled: cfg.diversify.p_styled } })
}

/// Scales `img` to cover `(w, h)` and center-crops the overflow.
pub fn fit_background(img: &Raster, (w, h): (u32, u32)) -> Raster {
    if img.dims() == (w, h) {
        return img.clone();
    }
    let (iw, ih) = img.dims();
    let s = (w as f64 / iw as f64).max(h as f64 / ih as f64);
    let (sw, sh) = (((iw as f64 * s).round() as u32).max(w), ((ih as f64 * s).round() as u32).max(h));
    let rgb: image::RgbImage = img.clone().into();
    let resized = image::imageops::resize(&rgb, sw, sh, FilterType::Triangle);
    let (ox, oy) = ((sw - w) / 2, (sh - h) / 2);
    image::imageops::crop_imm(&resized, ox, oy, w, h).to_image().into()
}

pub fn load_background(path: &Path, resolution: (u32, u32)) -> Result<Raster> {
    Ok(fit_background(&load_raster(path)?, resolution))
}

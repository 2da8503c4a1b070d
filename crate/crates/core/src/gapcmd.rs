//! Gap measurement on directories of annotated images or pre-cut patches.

use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coco::CocoDataset;
use crate::dataset::{list_images, list_subdirs, load_raster};
use crate::error::{Error, GapError, Result};
use crate::gapmeter::divergence::{gap_report, write_features, BeforeAfter, DivergenceReport, GapMeasurement, GapOptions};
use crate::gapmeter::{extract_patches, AnnotatedImage, Domain, Patch, PatchSet, Region};
use crate::rng::{rng_stream, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapmeterOptions {
    /// Patches per region and domain.
    pub patches: usize,
    /// Annotated images loaded per domain (a random subset when there are more).
    pub max_images: usize,
    pub seed: u64,
    pub gap: GapOptions,
}

impl Default for GapmeterOptions {
    fn default() -> Self {
        GapmeterOptions { patches: 10_000, max_images: 500, seed: 0, gap: GapOptions::default() }
    }
}

/// A measurement input: annotated images or pre-cut foreground/background patches.
#[derive(Debug, Clone)]
pub enum PatchSource {
    Annotated(PathBuf),
    PatchDirs { fg: Vec<Patch>, bg: Vec<Patch> },
}

/// Recognizes `annotations.json` (COCO) or `fg/` + `bg/` patch directories.
pub fn open_source(dir: &Path) -> Result<PatchSource> {
    if dir.join("annotations.json").is_file() {
        return Ok(PatchSource::Annotated(dir.to_path_buf()));
    }
    if dir.join("fg").is_dir() && dir.join("bg").is_dir() {
        return Ok(PatchSource::PatchDirs { fg: load_patch_dir(&dir.join("fg"))?, bg: load_patch_dir(&dir.join("bg"))? });
    }
    Err(Error::Dataset(format!("{}: expected annotations.json or fg/ and bg/ patch directories", dir.display())))
}

/// Loads 32x32 patches. Files in a subdirectory take its name as scene id,
/// loose files their own stem.
pub fn load_patch_dir(dir: &Path) -> Result<Vec<Patch>> {
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    for p in list_images(dir)? {
        let scene = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        files.push((p, scene));
    }
    for sub in list_subdirs(dir)? {
        for p in list_images(&dir.join(&sub))? {
            files.push((p, sub.clone()));
        }
    }
    files
        .par_iter()
        .map(|(p, scene)| {
            let r = load_raster(p)?;
            Patch::from_raster(&r, scene.clone()).map_err(|e| Error::Dataset(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Loads up to `max_images` annotated images (uniform subset, sorted by id).
/// Scene ids come from the image's `scene_id`, else its file stem.
pub fn load_annotated(dir: &Path, max_images: usize, seed: u64, stream: u64) -> Result<Vec<AnnotatedImage>> {
    let path = dir.join("annotations.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let coco: CocoDataset = serde_json::from_str(&text).map_err(|source| Error::Json { path: path.clone(), source })?;
    let mut chosen: Vec<usize> = (0..coco.images.len()).collect();
    if chosen.len() > max_images {
        rng_stream(seed, stream).shuffle(&mut chosen);
        chosen.truncate(max_images);
        chosen.sort_unstable();
    }
    chosen
        .par_iter()
        .map(|&i| {
            let im = &coco.images[i];
            let raster = load_raster(&dir.join(&im.file_name))?;
            let boxes = coco.annotations_for(im.id).filter_map(|a| a.to_bbox()).collect();
            let scene = im.scene_id.clone().unwrap_or_else(|| {
                Path::new(&im.file_name).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            });
            Ok(AnnotatedImage { raster, boxes, scene })
        })
        .collect()
}

fn subsample(mut patches: Vec<Patch>, n: usize, seed: u64, stream: u64) -> Vec<Patch> {
    if patches.len() > n {
        rng_stream(seed, stream).shuffle(&mut patches);
        patches.truncate(n);
    } else if patches.len() < n {
        log::warn!("only {} patches available, {n} requested", patches.len());
    }
    patches
}

/// Foreground and background patch sets of one domain.
pub fn domain_patches(dir: &Path, domain: Domain, opts: &GapmeterOptions) -> Result<(PatchSet, PatchSet)> {
    let base = streams::GAPMETER + 8 * domain.label() as u64;
    match open_source(dir)? {
        PatchSource::Annotated(dir) => {
            let images = load_annotated(&dir, opts.max_images, opts.seed, base)?;
            let fg = extract_patches(&images, Region::Foreground, domain, opts.patches, &mut rng_stream(opts.seed, base + 1))?;
            let bg = extract_patches(&images, Region::Background, domain, opts.patches, &mut rng_stream(opts.seed, base + 2))?;
            Ok((fg, bg))
        }
        PatchSource::PatchDirs { fg, bg } => {
            if fg.is_empty() || bg.is_empty() {
                return Err(GapError::InsufficientRegion { requested: opts.patches, found: fg.len().min(bg.len()) }.into());
            }
            let fg = PatchSet::new(subsample(fg, opts.patches, opts.seed, base + 1), domain, Region::Foreground);
            let bg = PatchSet::new(subsample(bg, opts.patches, opts.seed, base + 2), domain, Region::Background);
            Ok((fg, bg))
        }
    }
}

/// Measures foreground and background divergence between two directories.
/// With `features`, also writes fc2 activations of every patch as CSV.
pub fn measure_dirs(source: &Path, target: &Path, opts: &GapmeterOptions, features: Option<&Path>) -> Result<DivergenceReport> {
    let (fg_s, bg_s) = domain_patches(source, Domain::Source, opts)?;
    let (fg_t, bg_t) = domain_patches(target, Domain::Target, opts)?;
    let mut rng = rng_stream(opts.seed, streams::GAPMETER + 16);
    let GapMeasurement { report, foreground, background } = gap_report(&fg_s, &fg_t, &bg_s, &bg_t, &opts.gap, &mut rng)?;
    if let Some(path) = features {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        write_features(&mut w, &foreground.params, &[&fg_s, &fg_t], true).map_err(|e| Error::io(path, e))?;
        write_features(&mut w, &background.params, &[&bg_s, &bg_t], false).map_err(|e| Error::io(path, e))?;
    }
    Ok(report)
}

/// `stem_label.ext` next to `path`.
fn suffixed(path: &Path, label: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}_{label}{ext}"))
}

/// Runs the measurement on `source/before` and `source/after` against the same target.
pub fn measure_before_after(source: &Path, target: &Path, opts: &GapmeterOptions, features: Option<&Path>) -> Result<BeforeAfter> {
    let before = measure_dirs(&source.join("before"), target, opts, features.map(|f| suffixed(f, "before")).as_deref())?;
    let after = measure_dirs(&source.join("after"), target, opts, features.map(|f| suffixed(f, "after")).as_deref())?;
    Ok(BeforeAfter::new(before, after))
}

//! Batch generation and preview.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coco::{CocoAnnotation, CocoCategory, CocoDataset, CocoImage};
use crate::compose::{compose_scene, PlacementRecord, Scene};
use crate::config::{GenerationConfig, ImageFormat};
use crate::dataset::{list_images, load_background, load_seed_library, SeedLibrary};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Raster};
use crate::rng::{rng_stream, streams};
use crate::simplify::simplify_background;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 over the dimensions and the RGB buffer.
pub fn pixel_hash(r: &Raster) -> String {
    let mut h = Sha256::new();
    h.update(r.width().to_le_bytes());
    h.update(r.height().to_le_bytes());
    h.update(r.data());
    hex::encode(h.finalize())
}

/// Everything the generator needs besides the config.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub library: SeedLibrary,
    pub backgrounds: Vec<PathBuf>,
}

impl Inputs {
    pub fn load(cfg: &GenerationConfig) -> Result<Self> {
        let library = load_seed_library(cfg)?;
        let backgrounds = list_images(&cfg.backgrounds_dir)?;
        if backgrounds.is_empty() {
            return Err(Error::Dataset(format!("{}: no background images", cfg.backgrounds_dir.display())));
        }
        Ok(Inputs { library, backgrounds })
    }
}

/// One composed image and the background it was built on.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub index: usize,
    pub background: PathBuf,
    pub scene: Scene,
}

/// Stream index used for image `index`.
pub fn scene_stream(index: usize) -> u64 {
    streams::SCENE + index as u64
}

/// Builds image `index`: draws a background, simplifies it and composes a
/// scene, all from the image's own random stream.
pub fn render_image(cfg: &GenerationConfig, inputs: &Inputs, index: usize) -> Result<Rendered> {
    let mut rng = rng_stream(cfg.global_seed, scene_stream(index));
    let background = inputs.backgrounds[rng.index(inputs.backgrounds.len())].clone();
    let bg = load_background(&background, cfg.resolution)?;
    let simplified = simplify_background(&bg, &cfg.simplify);
    let scene = compose_scene(&simplified, &inputs.library.pools, &cfg.compose, index as u64 + 1, &mut rng);
    Ok(Rendered { index, background, scene })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub index: usize,
    pub image_id: u64,
    pub file_name: String,
    pub stream_index: u64,
    pub background: String,
    pub sha256: String,
    pub objects: usize,
    pub placements: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped_instances: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub index: usize,
    pub reason: String,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub global_seed: u64,
    /// Image `i` draws from stream `scene_stream_base + i`.
    pub scene_stream_base: u64,
    pub config: GenerationConfig,
    pub categories: Vec<CocoCategory>,
    pub images: Vec<ImageRecord>,
    pub skipped_images: Vec<SkippedImage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub images_written: usize,
    pub skipped_images: usize,
    pub skipped_instances: usize,
    pub annotations: usize,
}

enum Outcome {
    Done(ImageRecord, Vec<CocoAnnotation>, String),
    Skipped(SkippedImage),
}

fn file_name(cfg: &GenerationConfig, index: usize) -> String {
    format!("images/{}_{index:06}.{}", cfg.run_name, cfg.image_format.extension())
}

fn write_image(r: &Raster, path: &Path, format: ImageFormat) -> Result<()> {
    let rgb: image::RgbImage = r.clone().into();
    let fmt = match format {
        ImageFormat::Png => image::ImageFormat::Png,
        ImageFormat::Jpeg => image::ImageFormat::Jpeg,
    };
    rgb.save_with_format(path, fmt).map_err(|e| Error::image(path, e))
}

fn annotations_of(scene: &Scene, image_id: u64) -> Vec<CocoAnnotation> {
    scene
        .annotation
        .objects
        .iter()
        .map(|o| CocoAnnotation {
            id: 0,
            image_id,
            category_id: o.class_id,
            bbox: o.bbox.to_xywh(),
            area: o.area as f64,
            iscrowd: 0,
        })
        .collect()
}

fn process(cfg: &GenerationConfig, inputs: &Inputs, index: usize) -> Result<Outcome> {
    let rendered = match render_image(cfg, inputs, index) {
        Ok(r) => r,
        Err(e) => {
            log::error!("image {index} skipped: {e}");
            return Ok(Outcome::Skipped(SkippedImage { index, reason: e.to_string() }));
        }
    };
    let scene = &rendered.scene;
    let name = file_name(cfg, index);
    write_image(&scene.image, &cfg.output_dir.join(&name), cfg.image_format)?;
    if cfg.dump_visible_masks {
        for (k, obj) in scene.annotation.objects.iter().enumerate() {
            let m = scene.visible_mask(obj.placement);
            let path = cfg.output_dir.join(format!("masks/{}_{index:06}_{k}.png", cfg.run_name));
            let img = image::GrayImage::from_raw(m.width(), m.height(), m.to_u8()).expect("mask buffer length");
            img.save(&path).map_err(|e| Error::image(&path, e))?;
        }
    }
    let image_id = index as u64 + 1;
    let record = ImageRecord {
        index,
        image_id,
        file_name: name,
        stream_index: scene_stream(index),
        background: rendered.background.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        sha256: pixel_hash(&scene.image),
        objects: scene.annotation.objects.len(),
        placements: scene.placements.len(),
        skipped_instances: scene.skipped.clone(),
    };
    let scene_id = rendered.background.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Outcome::Done(record, annotations_of(scene, image_id), scene_id))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Dataset(format!("cannot start worker pool: {e}")))
}

/// Generates `n_images` composites with `annotations.json` and `manifest.json`.
///
/// Images are independent jobs on a pool of `workers` threads; outputs are
/// assembled in image-index order, so results do not depend on the worker
/// count. Images whose inputs fail to load are skipped and listed in the
/// manifest; write failures abort the run.
pub fn generate(cfg: &GenerationConfig) -> Result<RunSummary> {
    let inputs = Inputs::load(cfg)?;
    let images_dir = cfg.output_dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    if cfg.dump_visible_masks {
        let masks = cfg.output_dir.join("masks");
        std::fs::create_dir_all(&masks).map_err(|e| Error::io(&masks, e))?;
    }

    let pool = thread_pool(cfg.workers)?;
    log::info!("generating {} images on {} threads", cfg.n_images, pool.current_num_threads());
    let outcomes: Vec<Outcome> = pool.install(|| (0..cfg.n_images).into_par_iter().map(|i| process(cfg, &inputs, i)).collect::<Result<_>>())?;

    let mut coco = CocoDataset { categories: inputs.library.categories.clone(), ..CocoDataset::default() };
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut summary = RunSummary::default();
    for outcome in outcomes {
        match outcome {
            Outcome::Done(record, anns, scene_id) => {
                coco.images.push(CocoImage {
                    id: record.image_id,
                    file_name: record.file_name.clone(),
                    width: cfg.resolution.0,
                    height: cfg.resolution.1,
                    scene_id: Some(scene_id),
                });
                for mut a in anns {
                    a.id = coco.annotations.len() as u64 + 1;
                    coco.annotations.push(a);
                }
                summary.skipped_instances += record.skipped_instances.len();
                records.push(record);
            }
            Outcome::Skipped(s) => skipped.push(s),
        }
    }
    summary.images_written = records.len();
    summary.skipped_images = skipped.len();
    summary.annotations = coco.annotations.len();

    write_json(&cfg.output_dir.join("annotations.json"), &coco)?;
    let manifest = Manifest {
        tool: "synthpaste".into(),
        version: VERSION.into(),
        global_seed: cfg.global_seed,
        scene_stream_base: streams::SCENE,
        config: cfg.clone(),
        categories: inputs.library.categories,
        images: records,
        skipped_images: skipped,
    };
    write_json(&cfg.output_dir.join("manifest.json"), &manifest)?;
    log::info!(
        "wrote {} images, {} annotations ({} images and {} instances skipped)",
        summary.images_written,
        summary.annotations,
        summary.skipped_images,
        summary.skipped_instances
    );
    Ok(summary)
}

/// Outline color of a class in previews.
pub fn class_color(class_id: u32) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 6] = [[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 0], [255, 0, 255], [0, 255, 255]];
    PALETTE[(class_id as usize).wrapping_sub(1) % PALETTE.len()]
}

/// Draws a one-pixel outline on the box perimeter.
pub fn draw_box(img: &mut Raster, b: &BBox, color: [u8; 3]) {
    let Some(b) = b.clip_to(img.width(), img.height()) else { return };
    let (x0, y0) = (b.x as u32, b.y as u32);
    let (x1, y1) = (x0 + b.w - 1, y0 + b.h - 1);
    for x in x0..=x1 {
        img.set_pixel(x, y0, color);
        img.set_pixel(x, y1, color);
    }
    for y in y0..=y1 {
        img.set_pixel(x0, y, color);
        img.set_pixel(x1, y, color);
    }
}

/// Grid shape for `k` tiles: `ceil(sqrt k)` columns.
pub fn grid_dims(k: usize) -> (usize, usize) {
    let cols = (1..=k.max(1)).find(|c| c * c >= k).unwrap_or(1);
    (cols, k.div_ceil(cols))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewTile {
    pub index: usize,
    /// Top-left corner of the tile on the sheet.
    pub origin: (u32, u32),
    pub background: String,
    pub annotations: Vec<CocoAnnotation>,
    pub placements: Vec<PlacementRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewSheet {
    pub columns: usize,
    pub rows: usize,
    pub tile_size: (u32, u32),
    pub tiles: Vec<PreviewTile>,
}

/// Renders the first `k` images of the run with boxes burned in, tiles them
/// row-major into one sheet at `out` and writes the layout next to it as JSON.
pub fn preview(cfg: &GenerationConfig, k: usize, out: &Path) -> Result<PreviewSheet> {
    if k == 0 {
        return Err(Error::Dataset("preview needs k >= 1".into()));
    }
    let inputs = Inputs::load(cfg)?;
    let pool = thread_pool(cfg.workers)?;
    let rendered: Vec<Rendered> = pool.install(|| (0..k).into_par_iter().map(|i| render_image(cfg, &inputs, i)).collect::<Result<_>>())?;
    let (cols, rows) = grid_dims(k);
    let (tw, th) = cfg.resolution;
    let mut sheet = Raster::filled(tw * cols as u32, th * rows as u32, [0, 0, 0]);
    let mut tiles = Vec::new();
    for r in &rendered {
        let mut img = r.scene.image.clone();
        for o in &r.scene.annotation.objects {
            draw_box(&mut img, &o.bbox, class_color(o.class_id));
        }
        let origin = ((r.index % cols) as u32 * tw, (r.index / cols) as u32 * th);
        for y in 0..th {
            for x in 0..tw {
                sheet.set_pixel(origin.0 + x, origin.1 + y, img.pixel(x, y));
            }
        }
        let mut annotations = annotations_of(&r.scene, r.index as u64 + 1);
        for (j, a) in annotations.iter_mut().enumerate() {
            a.id = j as u64 + 1;
        }
        tiles.push(PreviewTile {
            index: r.index,
            origin,
            background: r.background.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            annotations,
            placements: r.scene.placements.clone(),
        });
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_image(&sheet, out, ImageFormat::Png)?;
    let layout = PreviewSheet { columns: cols, rows, tile_size: (tw, th), tiles };
    write_json(&out.with_extension("json"), &layout)?;
    Ok(layout)
}

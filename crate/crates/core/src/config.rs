//! Generation config: JSON schema, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compose::ComposeConfig;
use crate::error::ConfigError;
use crate::simplify::SimplifySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    #[default]
    Png,
    Jpeg,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Jpeg => "jpg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiversifyConfig {
    /// Styled variants generated per seed image (ignored with `variants_dir`).
    pub variants_per_seed: usize,
    /// Probability that a paste draws from the styled pool.
    pub p_styled: f64,
}

impl Default for DiversifyConfig {
    fn default() -> Self {
        DiversifyConfig { variants_per_seed: 4, p_styled: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// `<seeds_dir>/<class>/<name>.png` plus `<name>_mask.png` or an alpha channel.
    pub seeds_dir: PathBuf,
    pub backgrounds_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Pre-styled variants, `<variants_dir>/<class>/<seed name>_<k>.<ext>`.
    pub variants_dir: Option<PathBuf>,
    /// Class directory names; empty means every subdirectory of `seeds_dir`, sorted.
    pub classes: Vec<String>,
    pub seeds_per_class: usize,
    pub n_images: usize,
    /// Output `(width, height)`.
    pub resolution: (u32, u32),
    pub run_name: String,
    pub simplify: SimplifySpec,
    pub diversify: DiversifyConfig,
    pub compose: ComposeConfig,
    pub global_seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub image_format: ImageFormat,
    /// Also write each annotated object's final visible mask.
    pub dump_visible_masks: bool,
    /// Rescale every seed so the longer side of its object box has this many pixels.
    pub base_object_size: Option<u32>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            seeds_dir: PathBuf::new(),
            backgrounds_dir: PathBuf::new(),
            output_dir: PathBuf::new(),
            variants_dir: None,
            classes: Vec::new(),
            seeds_per_class: 8,
            n_images: 6000,
            resolution: (640, 480),
            run_name: "synth".into(),
            simplify: SimplifySpec::gray(),
            diversify: DiversifyConfig::default(),
            compose: ComposeConfig::default(),
            global_seed: 0,
            workers: 0,
            image_format: ImageFormat::Png,
            dump_visible_masks: false,
            base_object_size: None,
        }
    }
}

impl GenerationConfig {
    /// Parses JSON text. A run manifest is accepted too: its `config` member is used.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let parse_err = |e: serde_json::Error| ConfigError::Parse { line: e.line(), column: e.column(), message: e.to_string() };
        let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        let is_manifest = value.get("config").is_some_and(|c| c.is_object()) && value.get("seeds_dir").is_none();
        if is_manifest {
            return serde_json::from_value(value["config"].clone()).map_err(|e| ConfigError::Parse {
                line: 0,
                column: 0,
                message: format!("manifest config: {e}"),
            });
        }
        // parse again from text so errors carry positions
        serde_json::from_str(text).map_err(parse_err)
    }

    /// Reads, parses and validates a config file. Relative paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_json_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.seeds_dir);
        fix(&mut self.backgrounds_dir);
        fix(&mut self.output_dir);
        if let Some(v) = self.variants_dir.as_mut() {
            fix(v);
        }
    }

    /// Checks value ranges and that input directories exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: &str, reason: String| ConfigError::invalid(field, reason);
        for (field, p) in [("seeds_dir", &self.seeds_dir), ("backgrounds_dir", &self.backgrounds_dir)] {
            if p.as_os_str().is_empty() {
                return Err(invalid(field, "is required".into()));
            }
            if !p.is_dir() {
                return Err(invalid(field, format!("{} is not a directory", p.display())));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir", "is required".into()));
        }
        if let Some(v) = &self.variants_dir {
            if !v.is_dir() {
                return Err(invalid("variants_dir", format!("{} is not a directory", v.display())));
            }
        }
        if self.n_images == 0 {
            return Err(invalid("n_images", "must be at least 1".into()));
        }
        if self.seeds_per_class == 0 {
            return Err(invalid("seeds_per_class", "must be at least 1".into()));
        }
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return Err(invalid("resolution", "width and height must be positive".into()));
        }
        if self.run_name.is_empty() || self.run_name.contains(['/', '\\']) {
            return Err(invalid("run_name", "must be a non-empty file name fragment".into()));
        }
        if !(0.0..=1.0).contains(&self.diversify.p_styled) {
            return Err(invalid("diversify.p_styled", format!("must lie in [0, 1], got {}", self.diversify.p_styled)));
        }
        if self.base_object_size == Some(0) {
            return Err(invalid("base_object_size", "must be positive".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.classes.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(invalid("classes", format!("duplicate class {dup:?}")));
        }
        self.simplify.validate().map_err(|e| invalid("simplify", e))?;
        self.compose.validate().map_err(|(field, reason)| invalid(field, reason))?;
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

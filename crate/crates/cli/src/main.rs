use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use synthpaste::config::GenerationConfig;
use synthpaste::gapcmd::{measure_before_after, measure_dirs, GapmeterOptions};
use synthpaste::pipeline::{generate, preview};
use synthpaste::Error;

const EXIT_INVALID: u8 = 1;
const EXIT_SKIPPED: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "synthpaste", version, about = "Cut-and-paste synthetic detection data and domain-gap measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset from a config file.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (overrides the config).
        #[arg(long)]
        workers: Option<usize>,
        /// Global seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Measure foreground/background domain gaps between two datasets.
    Gapmeter {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Measure `source/before` and `source/after` against the target.
        #[arg(long)]
        before_after: bool,
        /// Report file (printed to stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Patches per region and domain.
        #[arg(long, default_value_t = 10_000)]
        patches: usize,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Annotated images loaded per domain.
        #[arg(long, default_value_t = 500)]
        max_images: usize,
        /// Write fc2 features of every patch to this CSV file.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Render the first k images with boxes drawn into one contact sheet.
    Preview {
        #[arg(long)]
        config: PathBuf,
        #[arg(short = 'k', default_value_t = 9)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        EXIT_INVALID
    } else {
        EXIT_IO
    }
}

fn load_config(path: &PathBuf) -> Result<GenerationConfig, Error> {
    Ok(GenerationConfig::load(path)?)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Generate { config, workers, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(s) = seed {
                cfg.global_seed = s;
            }
            let summary = generate(&cfg)?;
            println!(
                "{} images, {} annotations written to {} ({} images skipped, {} instances skipped)",
                summary.images_written,
                summary.annotations,
                cfg.output_dir.display(),
                summary.skipped_images,
                summary.skipped_instances
            );
            Ok(if summary.skipped_images > 0 { EXIT_SKIPPED } else { 0 })
        }
        Command::Gapmeter { source, target, before_after, out, patches, epochs, seed, max_images, features, workers } => {
            if let Some(w) = workers {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
                    log::warn!("cannot size the thread pool: {e}");
                }
            }
            let mut opts = GapmeterOptions { patches, max_images, seed, ..GapmeterOptions::default() };
            if let Some(e) = epochs {
                opts.gap.train.epochs = e;
            }
            let json = if before_after {
                let ba = measure_before_after(&source, &target, &opts, features.as_deref())?;
                eprintln!("before: fg {:.3} bg {:.3} gap {:.3}", ba.before.fg, ba.before.bg, ba.before.gap);
                eprintln!("after:  fg {:.3} bg {:.3} gap {:.3} (delta {:+.3})", ba.after.fg, ba.after.bg, ba.after.gap, ba.gap_delta);
                serde_json::to_string_pretty(&ba)
            } else {
                let rep = measure_dirs(&source, &target, &opts, features.as_deref())?;
                eprintln!("fg {:.3} bg {:.3} gap {:.3}", rep.fg, rep.bg, rep.gap);
                serde_json::to_string_pretty(&rep)
            }
            .expect("report serializes");
            match out {
                Some(path) => std::fs::write(&path, json + "\n").map_err(|e| Error::Io { path, source: e })?,
                None => println!("{json}"),
            }
            Ok(0)
        }
        Command::Preview { config, k, out } => {
            let cfg = load_config(&config)?;
            let sheet = preview(&cfg, k, &out)?;
            for tile in &sheet.tiles {
                println!("image {} (background {}, tile at {:?}):", tile.index, tile.background, tile.origin);
                for (j, p) in tile.placements.iter().enumerate() {
                    println!(
                        "  #{j} class {} seed {} {} scale {:.2} rot {:+.1} at {:?} blend {:?}{}{}",
                        p.class_id,
                        p.seed_index,
                        if p.provenance.is_styled() { "styled" } else { "original" },
                        p.scale,
                        p.rotation_deg,
                        p.translation,
                        p.blend_mode,
                        if p.near_previous { " near-previous" } else { "" },
                        if p.annotated { "" } else { " (not annotated)" },
                    );
                }
            }
            println!("contact sheet {}x{} written to {}", sheet.columns, sheet.rows, out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

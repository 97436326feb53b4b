use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mf_backend::server::{router as backend_router, BackgroundServer};
use mf_backend::Capability;
use mf_core::metrics::{Aggregation, EvalConfig};
use mf_pipeline::media::{self, frame_name};
use mf_store::Stage;
use mf_synth::{corpus, Scene, SceneSpec, SyntheticBackend, View};

use mf_cli::app;
use mf_cli::export::{export_benchmark, DEFAULT_CAP};
use mf_cli::manifest::{self, BenchmarkManifest};
use mf_cli::oracle;
use mf_cli::review::{self, ReviewState};

#[derive(Parser)]
#[command(name = "mf", version, about = "Animal motion-track pipeline")]
struct Cli {
    /// Configuration file; defaults to $MF_CONFIG or ./mf.toml.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create the data directory, the store and a default config file.
    Init,
    /// Search for videos of each category and queue them for collection.
    Seed { categories: Vec<String> },
    /// Run workers on one stage until it drains or a signal arrives.
    Run {
        stage: StageArg,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Keep polling for new work instead of exiting when drained.
        #[arg(long)]
        watch: bool,
    },
    /// Print item counts per stage and status.
    Status,
    /// Serve the review API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Export accepted tracks as a benchmark directory.
    Export {
        #[arg(long, default_value = "benchmark")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Score prediction sets against a benchmark.
    Evaluate {
        /// Benchmark directory or its manifest.json.
        #[arg(long)]
        manifest: PathBuf,
        /// Predictions root holding one directory per method.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = AggregationArg::FrameWeighted)]
        aggregation: AggregationArg,
        #[arg(long, default_value_t = 10)]
        kt_stride: usize,
    },
    /// Synthetic scenes and backends.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Render a scene spec to frames and per-actor masks.
    Gen {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the fixture corpus scene specs.
    Corpus { dir: PathBuf },
    /// Serve the synthetic backends over HTTP.
    Serve {
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long, default_value_t = 8700)]
        port: u16,
    },
    /// Write scene ground truth for an exported benchmark as a prediction set.
    Oracle {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "oracle")]
        method: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Collect,
    Preprocess,
    Track,
    Feature,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Collect => Stage::Collect,
            StageArg::Preprocess => Stage::Preprocess,
            StageArg::Track => Stage::Track,
            StageArg::Feature => Stage::Feature,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    FrameWeighted,
    SequenceMean,
}

fn stop_flag() -> Result<Arc<AtomicBool>> {
    let stop = Arc::new(AtomicBool::new(false));
    for sig in [signal_hook::consts::SIGTERM, signal_hook::consts::SIGINT] {
        signal_hook::flag::register(sig, stop.clone())?;
    }
    Ok(stop)
}

fn wait_for_signal(stop: &AtomicBool) {
    while !stop.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(100));
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = real_main(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn scenes_dir(config: &Path, given: Option<PathBuf>) -> PathBuf {
    given.unwrap_or_else(|| config.to_path_buf())
}

fn real_main(cli: Cli) -> Result<()> {
    let config_arg = cli.config.as_deref();
    match cli.command {
        Command::Init => {
            let file = app::config_path(config_arg).unwrap_or_else(|| PathBuf::from(app::DEFAULT_CONFIG));
            let config = if file.is_file() {
                app::load_config(Some(&file))?
            } else {
                mf_pipeline::Config::load(None)?
            };
            app::init(&config, &file)?;
            println!("initialized {} (store {}, config {})", config.data_dir, config.store, file.display());
        }
        Command::Seed { categories } => {
            if categories.is_empty() {
                bail!("name at least one category");
            }
            let ctx = app::context(app::load_config(config_arg)?)?;
            for c in categories {
                let added = mf_pipeline::seed_collect(&ctx, &c)?;
                println!("{c}: queued {} videos", added.len());
            }
        }
        Command::Run { stage, workers, watch } => {
            let ctx = app::context(app::load_config(config_arg)?)?;
            let stop = stop_flag()?;
            let report = app::run(&ctx, stage.into(), workers, !watch, &stop)?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Status => {
            let config = app::load_config(config_arg)?;
            let store = app::open_store(&config)?;
            for (stage, status, n) in store.stats()? {
                println!("{stage:<11} {status:<12} {n}");
            }
        }
        Command::Serve { port, host } => {
            let config = app::load_config(config_arg)?;
            let state = Arc::new(ReviewState {
                store: app::open_store(&config)?,
                layout: media::Layout::new(&config.data_dir),
                skeleton: mf_core::Skeleton::quadruped17(),
            });
            let addr: SocketAddr = format!("{host}:{port}").parse().context("listen address")?;
            let stop = stop_flag()?;
            let server = BackgroundServer::start(addr, review::router(state))?;
            println!("review API on {}", server.url());
            wait_for_signal(&stop);
        }
        Command::Export { out, cap } => {
            let config = app::load_config(config_arg)?;
            let store = app::open_store(&config)?;
            let layout = media::Layout::new(&config.data_dir);
            let m = export_benchmark(&store, &layout, &mf_core::Skeleton::quadruped17(), &out, cap)?;
            println!("exported {} sequences in {} categories to {}", m.sequences.len(), m.categories.len(), out.display());
        }
        Command::Evaluate {
            manifest,
            pred,
            out,
            aggregation,
            kt_stride,
        } => {
            let cfg = EvalConfig {
                kt_stride,
                aggregation: match aggregation {
                    AggregationArg::FrameWeighted => Aggregation::FrameWeighted,
                    AggregationArg::SequenceMean => Aggregation::SequenceMean,
                },
                ..EvalConfig::default()
            };
            let report = app::evaluate_dir(&manifest, &pred, &cfg, &out)?;
            print!("{}", report.to_table());
        }
        Command::Synth { command } => synth(command, config_arg)?,
    }
    Ok(())
}

fn synth(command: SynthCommand, config_arg: Option<&Path>) -> Result<()> {
    let default_scenes = || -> Result<PathBuf> { Ok(PathBuf::from(app::load_config(config_arg)?.backend.scenes_dir)) };
    match command {
        SynthCommand::Gen { spec, out } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let scene = Scene::new(SceneSpec::from_json(&text)?);
            render_scene(&scene, &out)?;
            println!("rendered {} frames to {}", scene.spec.frames, out.display());
        }
        SynthCommand::Corpus { dir } => {
            let written = corpus::write_corpus(&dir)?;
            println!("wrote {} scene specs to {}", written.len(), dir.display());
        }
        SynthCommand::Serve { scenes, port } => {
            let dir = scenes_dir(&default_scenes()?, scenes);
            let backend = Arc::new(SyntheticBackend::new(corpus::load_dir(&dir)?));
            let stop = stop_flag()?;
            let app = backend_router(backend, Capability::ALL.to_vec());
            let server = BackgroundServer::start(SocketAddr::from(([127, 0, 0, 1], port)), app)?;
            println!("synthetic backends on {}", server.url());
            wait_for_signal(&stop);
        }
        SynthCommand::Oracle {
            manifest,
            scenes,
            out,
            method,
        } => {
            let dir = scenes_dir(&default_scenes()?, scenes);
            let backend = SyntheticBackend::new(corpus::load_dir(&dir)?);
            let (file, root) = manifest::resolve(&manifest);
            let m = BenchmarkManifest::load(&file)?;
            let n = oracle::write_oracle(&backend, &m, &root, &out, &method)?;
            println!("wrote ground truth for {n} sequences to {}", out.join(&method).display());
        }
    }
    Ok(())
}

fn render_scene(scene: &Scene, out: &Path) -> Result<()> {
    media::create_dir(&out.join("frames"))?;
    for f in 0..scene.spec.frames {
        media::write_rgb(&out.join("frames").join(frame_name(f, "png")), &scene.render(f, &View::Full))?;
    }
    for (i, actor) in scene.spec.actors.iter().enumerate() {
        let dir = out.join("masks").join(actor.id.to_string());
        media::create_dir(&dir)?;
        for f in 0..scene.spec.frames {
            media::write_mask(&dir.join(frame_name(f, "png")), &scene.mask(i, f, &View::Full))?;
        }
    }
    media::write_json(&out.join("scene.json"), &scene.spec)?;
    Ok(())
}

//! `mlgsc` command line: `generate | train | cluster | evaluate`.
//!
//! Files written under `--out` (default from the config):
//!
//! | command    | files                                                   |
//! |------------|---------------------------------------------------------|
//! | `generate` | `scene.hdr/.raw`, `truth.hdr/.raw`                      |
//! | `train`    | `state.bin`, `history.csv`, `config.toml`               |
//! | `cluster`  | `clusters.hdr/.raw`, `cluster_map.ppm`, `metrics.toml`  |
//!
//! Exit codes: 0 success, 2 config validation, 3 data error, 4 numeric failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::clustering::{evaluate, NmiNorm};
use crate::config::RunConfig;
use crate::data::{load_labels, save_cube, save_labels};
use crate::error::{Error, Result};
use crate::pipeline::{build_scene_views, cluster_state, generate_scene, load_scene, train_views};
use crate::render::write_ppm;
use crate::trainer::{write_history, TrainState};

pub const STATE_FILE: &str = "state.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const SCENE_STEM: &str = "scene";
pub const TRUTH_STEM: &str = "truth";
pub const CLUSTERS_STEM: &str = "clusters";
pub const MAP_FILE: &str = "cluster_map.ppm";
pub const METRICS_FILE: &str = "metrics.toml";

/// Caps the worker threads used for per-view parallelism.
pub const THREADS_ENV: &str = "MLGSC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mlgsc", version, about = "Hyperspectral image clustering with multi-level graph contrastive learning")]
pub struct Cli {
    /// TOML run config; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Print the effective config and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured synthetic scene to the container format.
    Generate,
    /// Build views, train, and save the state and loss history.
    Train,
    /// Cluster from a trained state; writes labels, map and metrics.
    Cluster {
        /// Trained state; defaults to `<out>/state.bin`.
        #[arg(long, value_name = "PATH")]
        state: Option<PathBuf>,
    },
    /// Score a predicted label map against ground truth.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        pred: PathBuf,
        #[arg(long, value_name = "PATH")]
        truth: PathBuf,
        #[arg(long, value_enum, default_value_t = NmiArg::Arithmetic)]
        nmi_norm: NmiArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NmiArg {
    Arithmetic,
    Geometric,
    Max,
}

impl From<NmiArg> for NmiNorm {
    fn from(a: NmiArg) -> Self {
        match a {
            NmiArg::Arithmetic => NmiNorm::Arithmetic,
            NmiArg::Geometric => NmiNorm::Geometric,
            NmiArg::Max => NmiNorm::Max,
        }
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let mut cfg = RunConfig::load(path)?;
            cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            cfg
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // A second call in the same process (tests) finds the pool already built.
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("thread pool already initialized; {THREADS_ENV} ignored");
    }
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    Ok(&cfg.out_dir)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn execute(cli: &Cli) -> Result<()> {
    configure_threads()?;
    let cfg = effective_config(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml_string());
        return Ok(());
    }
    match &cli.command {
        None => Err(Error::Config("no subcommand given (generate, train, cluster, evaluate)".into())),
        Some(Command::Generate) => cmd_generate(&cfg),
        Some(Command::Train) => cmd_train(&cfg),
        Some(Command::Cluster { state }) => {
            let path = state.clone().unwrap_or_else(|| cfg.out_dir.join(STATE_FILE));
            cmd_cluster(&cfg, &path)
        }
        Some(Command::Evaluate { pred, truth, nmi_norm }) => {
            let report = cmd_evaluate(pred, truth, (*nmi_norm).into())?;
            print!("{}", report.to_toml());
            Ok(())
        }
    }
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let (cube, labels) = generate_scene(cfg)?;
    let dir = out_dir(cfg)?;
    save_cube(&cube, &dir.join(SCENE_STEM))?;
    save_labels(&labels, &dir.join(TRUTH_STEM))?;
    let mut counts = vec![0usize; labels.num_classes()];
    for &l in labels.labels() {
        if l > 0 {
            counts[l as usize - 1] += 1;
        }
    }
    println!(
        "scene {}x{}x{} with {} classes, pixels per class {:?}, written to {}",
        cube.height(),
        cube.width(),
        cube.bands(),
        counts.len(),
        counts,
        dir.display()
    );
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let scene = load_scene(cfg)?;
    let mv = build_scene_views(cfg, &scene).map_err(|e| e.context("building views"))?;
    log::info!("training on {} nodes for {} epochs", mv.num_nodes(), cfg.train.epochs);
    let state = train_views(cfg, &mv).map_err(|e| e.context("training"))?;
    let dir = out_dir(cfg)?;
    state.save(&dir.join(STATE_FILE))?;
    write_history(&dir.join(HISTORY_FILE), &state.history)?;
    write_file(&dir.join(CONFIG_FILE), cfg.to_toml_string())?;
    let last = state.history.last().expect("at least one epoch");
    println!("trained {} epochs, final total loss {:.6}", state.epoch, last.total);
    Ok(())
}

pub fn cmd_cluster(cfg: &RunConfig, state_path: &Path) -> Result<()> {
    let state = TrainState::load(state_path).map_err(|e| e.context(format!("loading state {}", state_path.display())))?;
    let scene = load_scene(cfg)?;
    let mv = build_scene_views(cfg, &scene).map_err(|e| e.context("building views"))?;
    let outcome = cluster_state(cfg, &scene, &mv, &state)?;
    let dir = out_dir(cfg)?;
    save_labels(&outcome.map, &dir.join(CLUSTERS_STEM))?;
    write_ppm(&outcome.map, &dir.join(MAP_FILE))?;
    match &outcome.metrics {
        Some(m) => {
            write_file(&dir.join(METRICS_FILE), m.to_toml())?;
            println!("k={} OA {:.4} NMI {:.4} Kappa {:.4}", outcome.k, m.oa, m.nmi, m.kappa);
        }
        None => println!("k={} (no ground truth, metrics skipped)", outcome.k),
    }
    Ok(())
}

/// Background (0) in the truth map is ignored; predicted labels there are
/// not scored. Predicted ids are used as-is after shifting to 0-based.
pub fn cmd_evaluate(pred: &Path, truth: &Path, norm: NmiNorm) -> Result<crate::clustering::MetricsReport> {
    let p = load_labels(pred).map_err(|e| e.context(format!("loading {}", pred.display())))?;
    let t = load_labels(truth).map_err(|e| e.context(format!("loading {}", truth.display())))?;
    if (p.height(), p.width()) != (t.height(), t.width()) {
        return Err(Error::Compatibility(format!(
            "prediction is {}x{} but truth is {}x{}",
            p.height(),
            p.width(),
            t.height(),
            t.width()
        )));
    }
    let (mut pv, mut tv) = (Vec::new(), Vec::new());
    for (&a, &b) in p.labels().iter().zip(t.labels()) {
        if b == 0 {
            continue;
        }
        if a == 0 {
            return Err(Error::Compatibility("prediction is background on a labeled pixel".into()));
        }
        pv.push(a as usize - 1);
        tv.push(b as usize - 1);
    }
    evaluate(&pv, &tv, norm)
}

//! `gdm`: dataset generation, scenario runs, snapshot inspection and PCA
//! projection export.

mod config;
mod inspect;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gdm_core::datagen::{dataset_files, generate, read_dataset, write_dataset, DataFormat};
use gdm_core::gdm::Profile;
use gdm_core::metric::MetricKind;
use gdm_core::scenarios::{self, ScenarioKind};
use gdm_core::{GdmError, Result};

use crate::config::{one_line, ConfigFile, ProfileSection};
use crate::manifest::{digest_files, unix_ms, RunManifest};

#[derive(Parser)]
#[command(name = "gdm", version, about = "Growing dual-memory continual learning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sequential dataset.
    Generate(GenerateArgs),
    /// Run an experiment protocol on a dataset.
    Run(RunArgs),
    /// Project neuron weights onto two principal components.
    Project(ProjectArgs),
    /// Print a summary of a model or network snapshot.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML file with named profiles.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Profile to use from the config file (default: "default").
    #[arg(long)]
    profile: Option<String>,
}

impl ConfigArgs {
    fn section(&self) -> Result<ProfileSection> {
        match &self.config {
            Some(p) => ConfigFile::load(p)?.section(self.profile.as_deref()),
            None if self.profile.is_some() => Err(GdmError::Config("--profile requires --config".into())),
            None => Ok(ProfileSection::default()),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Binary,
    Text,
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory for the collection files and manifest.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    categories: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    instances: Option<u64>,
    /// Frames per sequence.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    frames: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dim: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    collections: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    test_collections: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    drop_prob: Option<f64>,
    #[arg(long)]
    occlusion: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long, value_enum, default_value = "binary")]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Batch,
    Incremental,
}

#[derive(Args)]
struct RunArgs {
    /// batch, incremental, ni, nc or nic.
    kind: ScenarioKind,
    /// Dataset directory or single collection file.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for metrics, snapshots and manifest.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: Option<u64>,
    #[arg(long, overrides_with = "no_replay")]
    replay: bool,
    #[arg(long)]
    no_replay: bool,
    /// Run both memories with K = 0.
    #[arg(long)]
    no_temporal_context: bool,
    #[arg(long, value_enum)]
    hyperparams: Option<ProfileArg>,
    #[arg(long)]
    label_availability: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep the category order instead of shuffling it per trial.
    #[arg(long)]
    fixed_order: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    passes: Option<u64>,
    #[arg(long)]
    test_collections: Option<usize>,
    /// Skip scoring the training data after every epoch.
    #[arg(long)]
    no_train_eval: bool,
    #[arg(long)]
    metric: Option<MetricKind>,
    #[arg(long)]
    removal_threshold: Option<f64>,
    #[arg(long)]
    max_edge_age: Option<u32>,
    /// Parallel trial workers.
    #[arg(long, env = "GDM_WORKERS", value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
}

#[derive(Args)]
struct ProjectArgs {
    snapshot: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Which memory of a model snapshot to project: em or sm.
    #[arg(long, default_value = "em")]
    net: String,
}

#[derive(Args)]
struct InspectArgs {
    snapshot: PathBuf,
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let started = unix_ms();
    let mut spec = config::dataset_spec(&a.cfg.section()?)?;
    let set = |slot: &mut usize, v: Option<u64>| {
        if let Some(v) = v {
            *slot = v as usize;
        }
    };
    set(&mut spec.categories, a.categories);
    set(&mut spec.instances_per_category, a.instances);
    set(&mut spec.frames_per_sequence, a.frames);
    set(&mut spec.dim, a.dim);
    set(&mut spec.collections, a.collections);
    set(&mut spec.test_collections, a.test_collections);
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if let Some(v) = a.noise {
        spec.augmentation.noise_sigma = v;
    }
    if let Some(v) = a.drop_prob {
        spec.augmentation.drop_prob = v;
    }
    if let Some(v) = a.occlusion {
        spec.augmentation.occlusion_block = v;
    }
    if let Some(v) = a.separation {
        spec.separation = v;
    }
    spec.validate()?;
    let ds = generate(&spec)?;
    let format = match a.format {
        FormatArg::Binary => DataFormat::Binary,
        FormatArg::Text => DataFormat::Text,
    };
    let paths = write_dataset(&ds, &a.out, format)?;
    let mut m = RunManifest::new("generate", serde_json::to_value(&spec).expect("spec serialises"), spec.seed, started);
    m.dataset_digest = Some(digest_files(&paths)?);
    for p in &paths {
        m.add_output(&a.out, p)?;
    }
    m.write(&a.out)?;
    println!(
        "wrote {} collections ({} frames, dim {}) to {}",
        paths.len(),
        ds.frame_count(),
        ds.dim,
        a.out.display()
    );
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let started = unix_ms();
    let mut cfg = config::scenario_config(&a.cfg.section()?, a.kind)?;
    if let Some(v) = a.trials {
        cfg.trials = v as usize;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = Some(v as usize);
    }
    if a.replay {
        cfg.replay = true;
    }
    if a.no_replay {
        cfg.replay = false;
    }
    if a.no_temporal_context {
        cfg.temporal_context = false;
    }
    if let Some(p) = a.hyperparams {
        cfg.profile = Some(match p {
            ProfileArg::Batch => Profile::Batch,
            ProfileArg::Incremental => Profile::Incremental,
        });
    }
    if let Some(v) = a.label_availability {
        cfg.label_availability = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.fixed_order {
        cfg.fixed_order = true;
    }
    if let Some(v) = a.passes {
        cfg.passes_per_batch = v as usize;
    }
    if let Some(v) = a.test_collections {
        cfg.test_collections = v;
    }
    if a.no_train_eval {
        cfg.evaluate_train = false;
    }
    if let Some(m) = a.metric {
        cfg.overrides.metric = Some(m);
    }
    if let Some(v) = a.removal_threshold {
        cfg.overrides.removal_threshold = Some(v);
    }
    if let Some(v) = a.max_edge_age {
        cfg.overrides.max_edge_age = Some(v);
    }
    if let Some(v) = a.workers {
        cfg.workers = v as usize;
    }
    cfg.validate()?;

    let files = dataset_files(&a.data)?;
    let ds = read_dataset(&a.data)?;
    ds.check_label_integrity()?;
    let report = scenarios::run(&cfg, &ds)?;

    fs::create_dir_all(&a.out)?;
    let effective = serde_json::json!({
        "scenario": cfg,
        "model": cfg.gdm_config(),
    });
    let mut m = RunManifest::new(&format!("run {}", cfg.kind), effective, cfg.seed, started);
    m.workers = cfg.workers;
    m.dataset_digest = Some(digest_files(&files)?);

    let metrics = a.out.join("metrics.jsonl");
    let mut buf = Vec::new();
    report.write_metrics(&mut buf)?;
    fs::write(&metrics, &buf)?;
    m.add_output(&a.out, &metrics)?;
    let timings = a.out.join("timings.jsonl");
    let mut buf = Vec::new();
    report.write_timings(&mut buf)?;
    fs::write(&timings, &buf)?;
    m.add_output(&a.out, &timings)?;
    for t in &report.trials {
        let p = a.out.join(format!("model_trial{}.gdms", t.trial));
        fs::write(&p, t.model.to_bytes())?;
        m.add_output(&a.out, &p)?;
    }
    m.write(&a.out)?;

    if let Some(s) = report.final_summary() {
        println!(
            "{} ({} trials, replay {}): final category accuracy {:.4} ± {:.4}, instance accuracy {:.4}, EM {:.1} / SM {:.1} neurons",
            cfg.kind,
            cfg.trials,
            cfg.replay,
            s.acc_category_test.mean,
            s.acc_category_test.sd,
            s.acc_instance_test.mean,
            s.neurons_em.mean,
            s.neurons_sm.mean
        );
    }
    Ok(())
}

fn load_snapshot(path: &Path) -> Result<inspect::Snapshot> {
    let bytes = fs::read(path)?;
    inspect::Snapshot::from_bytes(&bytes).map_err(|e| match e {
        GdmError::Parse { offset, message } => GdmError::Parse {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn cmd_project(a: ProjectArgs) -> Result<()> {
    let snap = load_snapshot(&a.snapshot)?;
    let net = snap.network(&a.net)?;
    let (table, proj) = inspect::projection_table(net)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&a.out, table)?;
    println!(
        "projected {} neurons (rank {}, eigenvalues {:.6e} {:.6e}) to {}",
        net.len(),
        proj.rank,
        proj.eigenvalues[0],
        proj.eigenvalues[1],
        a.out.display()
    );
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Result<()> {
    let snap = load_snapshot(&a.snapshot)?;
    print!("{}", inspect::summary(&snap));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("E_USAGE: {}", one_line(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    let res = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Project(a) => cmd_project(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {}", e.code(), one_line(&e.to_string()));
            ExitCode::from(1)
        }
    }
}

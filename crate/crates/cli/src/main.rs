use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spice_core::envs::{gen_bandit_context, gen_darkroom_dataset, sample_bandit, DarkroomManifest};
use spice_core::evidence::io::{read_dataset_json, write_dataset_csv, write_dataset_json};
use spice_core::harness::{
    read_series_csv, run_experiment, summarize, write_outputs, write_summary_csv, ExperimentConfig, ExperimentKind,
};
use spice_core::priors::{EnsembleConfig, EnsemblePrior, HeadArch, StateFeatures};
use spice_core::seed::{mix, rng};
use spice_core::training::{train, write_trace_csv, TrainConfig};

#[derive(Parser)]
#[command(name = "spice", version, about = "Bayesian in-context decision making experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Experiment name; alternative to the positional argument.
    #[arg(long)]
    experiment: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Theorem {
    Theorem1,
    Theorem2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Env {
    Bandit,
    Darkroom,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled training dataset.
    GenerateData {
        env: Env,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bandit contexts, or darkroom episodes per training goal.
        #[arg(long, default_value_t = 1000)]
        contexts: usize,
    },
    /// Pretrain an ensemble prior on a dataset written by generate-data.
    TrainPrior {
        env: Env,
        /// Dataset JSON.
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint JSON to write.
        #[arg(long)]
        out: PathBuf,
        /// Training options (JSON); defaults otherwise.
        #[arg(long)]
        train_config: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        heads: usize,
        /// Hidden width; linear heads when absent.
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-epoch loss trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run an experiment.
    Run {
        name: Option<String>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Run a theorem verification.
    Verify {
        theorem: Theorem,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Recompute summary.csv from a long-form records.csv.
    Summarize {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData {
            env,
            out,
            config,
            seed,
            contexts,
        } => generate_data(env, &out, config.as_deref(), seed, contexts),
        Command::TrainPrior {
            env,
            data,
            out,
            train_config,
            heads,
            hidden,
            seed,
            trace,
        } => train_prior(env, &data, &out, train_config.as_deref(), heads, hidden, seed, trace.as_deref()),
        Command::Run { name, args } => {
            let kind = match (name, &args.experiment) {
                (Some(a), Some(b)) if a != *b => bail!("experiment given twice: '{a}' and '{b}'"),
                (Some(a), _) => Some(a),
                (None, b) => b.clone(),
            };
            run(kind.as_deref(), &args)
        }
        Command::Verify { theorem, args } => {
            let kind = match theorem {
                Theorem::Theorem1 => "theorem1_verify",
                Theorem::Theorem2 => "theorem2_verify",
            };
            run(Some(kind), &args)
        }
        Command::Summarize { input, out } => {
            let file = fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let summaries = summarize(&read_series_csv(file)?)?;
            let out = out.unwrap_or_else(|| input.with_file_name("summary.csv"));
            write_summary_csv(&summaries, fs::File::create(&out)?)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn load_config(kind: Option<&str>, args: &RunArgs) -> Result<ExperimentConfig> {
    let kind: Option<ExperimentKind> = kind.map(str::parse).transpose()?;
    let mut cfg = match (&args.config, kind) {
        (Some(path), k) => {
            let cfg = ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))?;
            if let Some(k) = k {
                if k != cfg.experiment {
                    bail!("config describes '{}' but '{}' was requested", cfg.experiment, k);
                }
            }
            cfg
        }
        (None, Some(k)) => ExperimentConfig::default_for(k),
        (None, None) => bail!("name an experiment or pass --config"),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(o) = &args.out {
        cfg.output_dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(kind: Option<&str>, args: &RunArgs) -> Result<()> {
    let cfg = load_config(kind, args)?;
    let out = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| Path::new("results").join(cfg.experiment.name()));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let result = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            fs::write(out.join("error.txt"), format!("{e}\n"))?;
            fs::write(out.join("config.json"), cfg.to_json_pretty()?)?;
            return Err(e).context(format!("{} failed; diagnostics in {}", cfg.experiment, out.display()));
        }
    };
    let manifest = write_outputs(&result, &cfg, &out)?;
    print!("{}", result.report);
    println!("\nwrote {} files to {} (config {})", manifest.outputs.len() + 1, out.display(), &manifest.config_hash[..12]);
    Ok(())
}

fn generate_data(env: Env, out: &Path, config: Option<&Path>, seed: u64, contexts: usize) -> Result<()> {
    fs::create_dir_all(out)?;
    let kind = match env {
        Env::Bandit => ExperimentKind::BanditOffline,
        Env::Darkroom => ExperimentKind::DarkroomOnline,
    };
    let cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_for(kind),
    };
    let (data, stem) = match env {
        Env::Bandit => {
            let b = &cfg.bandit;
            let data = (0..contexts)
                .map(|j| {
                    let s = mix(seed, j as u64);
                    let task = sample_bandit(s, b.num_arms, b.sigma)?;
                    Ok(gen_bandit_context(&task, &b.behaviour, b.train_context_length, &mut rng(mix(s, 1)))?.to_labelled())
                })
                .collect::<Result<Vec<_>>>()?;
            (data, "bandit")
        }
        Env::Darkroom => {
            let manifest = DarkroomManifest::generate(seed, cfg.darkroom.size, cfg.horizon)?;
            manifest.save_json(&out.join("darkroom_manifest.json"))?;
            let data = gen_darkroom_dataset(
                &manifest.train,
                contexts,
                cfg.darkroom.train_episode_length,
                &mut rng(mix(seed, 0xD7)),
            )?;
            (data, "darkroom")
        }
    };
    write_dataset_json(&data, fs::File::create(out.join(format!("{stem}.json")))?)?;
    write_dataset_csv(&data, out, stem)?;
    println!("wrote {} labelled contexts to {}", data.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train_prior(
    env: Env,
    data: &Path,
    out: &Path,
    train_config: Option<&Path>,
    heads: usize,
    hidden: Option<usize>,
    seed: u64,
    trace: Option<&Path>,
) -> Result<()> {
    let samples = read_dataset_json(fs::File::open(data).with_context(|| format!("opening {}", data.display()))?)?;
    let (actions, features) = match env {
        Env::Bandit => {
            let a = samples
                .iter()
                .flat_map(|s| s.context.iter().map(|t| t.action).chain([s.label]))
                .max()
                .map_or(0, |m| m + 1);
            (a, StateFeatures::Constant)
        }
        Env::Darkroom => (spice_core::envs::darkroom::NUM_ACTIONS, StateFeatures::GridOneHot { size: 10 }),
    };
    let tc: TrainConfig = match train_config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    let mut ec = EnsembleConfig::new(heads, actions, features);
    ec.seed = seed;
    if let Some(w) = hidden {
        ec.arch = HeadArch::Hidden { width: w };
    }
    let mut ens = EnsemblePrior::new(ec)?;
    let outcome = train(&mut ens, &samples, &tc)?;
    ens.save_json(out)?;
    if let Some(t) = trace {
        write_trace_csv(&outcome.trace, fs::File::create(t)?)?;
    }
    if let Some(last) = outcome.trace.last() {
        println!("epoch {}: total loss {:.6}", last.epoch, last.total);
    }
    println!("wrote {}", out.display());
    Ok(())
}

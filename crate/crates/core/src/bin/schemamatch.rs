use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use schemamatch::chimeric::{ChimericModel, ModelCheckpoint, Translation};
use schemamatch::dataset::Dataset;
use schemamatch::io::{load_with_mapped, read_mapped_list, write_dataset_csv, write_mapped_list};
use schemamatch::matcher::{read_proposals, write_proposals};
use schemamatch::pipeline::{
    evaluate, normalize, run_benchmark, run_method, tune_hyperparams, ExperimentConfig, Method, PipelineConfig, TuneProtocol,
};
use schemamatch::synthgen::ScenarioSpec;

#[derive(Parser)]
#[command(name = "schemamatch", version, about = "Match the columns of two tabular databases")]
struct Cli {
    /// Master seed; overrides the seed in any config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Kmf,
    Chimeric,
    KmfThenChimeric,
    Kang,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Kmf => Method::Kmf,
            MethodArg::Chimeric => Method::Chimeric,
            MethodArg::KmfThenChimeric => Method::KmfThenChimeric,
            MethodArg::Kang => Method::Kang,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    AToB,
    BToA,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    LeaveOneOut,
    HalfSplit,
}

#[derive(clap::Args)]
struct Inputs {
    /// Data CSV of database A.
    #[arg(long)]
    a: PathBuf,
    /// Data CSV of database B.
    #[arg(long)]
    b: PathBuf,
    /// Known-mapped features of A (`name[,weight]` per line).
    #[arg(long)]
    mapped: PathBuf,
    /// Known-mapped features of B in the same order; defaults to `--mapped`.
    #[arg(long)]
    mapped_b: Option<PathBuf>,
    /// Pipeline config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one synthetic scenario: a.csv, b.csv, mapped.txt, manifest.json.
    Synth {
        /// Experiment config JSON; defaults describe the 20-D Gaussian benchmark.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Value of the config's swept parameter.
        #[arg(long)]
        value: Option<usize>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, default_value_t = 0)]
        permutation: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a method and write its proposals CSV.
    Match {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value = "kmf-then-chimeric")]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
        /// Where to save the trained chimeric model, if any.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Write chimeric translations of one database into the other's columns.
    Translate {
        #[command(flatten)]
        inputs: Inputs,
        /// Saved model; trained from the inputs when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "a-to-b")]
        direction: DirectionArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a proposals CSV against a scenario manifest.
    Eval {
        #[arg(long)]
        proposals: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-pair outcomes CSV.
        #[arg(long)]
        outcomes: Option<PathBuf>,
    },
    /// Cross-validate a grid of pipeline configs and write the best one.
    Tune {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        mapped: PathBuf,
        #[arg(long)]
        mapped_b: Option<PathBuf>,
        /// JSON array of pipeline configs.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_enum, default_value = "leave-one-out")]
        protocol: ProtocolArg,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, value_enum, default_value = "kmf-then-chimeric")]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark sweep and write its CSVs.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_pair(a: &Path, b: &Path, mapped: &Path, mapped_b: Option<&Path>) -> Result<(Dataset, Dataset)> {
    let ma = read_mapped_list(File::open(mapped).with_context(|| format!("reading {}", mapped.display()))?)?;
    let mb = match mapped_b {
        Some(p) => read_mapped_list(File::open(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => ma.clone(),
    };
    if ma.len() != mb.len() {
        bail!("mapped lists differ in length ({} vs {})", ma.len(), mb.len());
    }
    let (da, wa) = load_with_mapped(a, &ma).with_context(|| format!("loading {}", a.display()))?;
    let (db, wb) = load_with_mapped(b, &mb).with_context(|| format!("loading {}", b.display()))?;
    for w in wa.iter().chain(&wb) {
        log::warn!("{w:?}");
    }
    Ok((da, db))
}

fn pipeline_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg: PipelineConfig = match path {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.chimeric.seed = s;
        cfg.kang.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, value, trial, permutation, out } => {
            let mut cfg: ExperimentConfig = match &config {
                Some(p) => ExperimentConfig::from_json(&fs::read_to_string(p)?)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let value = value.unwrap_or(cfg.sweep.values[0]);
            let sc = cfg.scenario(value, trial, permutation)?;
            fs::create_dir_all(&out)?;
            write_dataset_csv(&sc.a, create(&out.join("a.csv"))?)?;
            write_dataset_csv(&sc.b, create(&out.join("b.csv"))?)?;
            let mapped: Vec<(String, f64)> = sc.spec.mapped.iter().map(|m| (m.clone(), 1.0)).collect();
            write_mapped_list(&mapped, create(&out.join("mapped.txt"))?)?;
            fs::write(out.join("manifest.json"), sc.spec.to_json()?)?;
            if sc.withheld_a.n_features() > 0 {
                write_dataset_csv(&sc.withheld_a, create(&out.join("withheld_a.csv"))?)?;
            }
            log::info!("wrote scenario with {} gold pairs to {}", sc.spec.gold_map.len(), out.display());
        }
        Command::Match { inputs, method, out, model_out } => {
            let (a, b) = load_pair(&inputs.a, &inputs.b, &inputs.mapped, inputs.mapped_b.as_deref())?;
            let cfg = pipeline_config(inputs.config.as_deref(), cli.seed)?;
            let result = run_method(method.into(), &a, &b, &cfg)?;
            write_proposals(&result.proposals, create(&out)?)?;
            let accepted = result.proposals.iter().filter(|p| p.accepted).count();
            log::info!("{} proposals, {accepted} accepted", result.proposals.len());
            if let Some(path) = model_out {
                match &result.model {
                    Some(m) => serde_json::to_writer(create(&path)?, &m.to_checkpoint())?,
                    None => bail!("method {} trains no model", Method::from(method).label()),
                }
            }
        }
        Command::Translate { inputs, model, direction, out } => {
            let (a, b) = load_pair(&inputs.a, &inputs.b, &inputs.mapped, inputs.mapped_b.as_deref())?;
            let cfg = pipeline_config(inputs.config.as_deref(), cli.seed)?;
            let (a, b) = (normalize(&a, cfg.normalization), normalize(&b, cfg.normalization));
            let model = match model {
                Some(p) => ChimericModel::from_checkpoint(&read_json::<ModelCheckpoint>(&p)?)?,
                None => schemamatch::chimeric::train(&a, &b, &cfg.chimeric)?,
            };
            let z = match direction {
                DirectionArg::AToB => model.translate(&a, Translation::AToB)?,
                DirectionArg::BToA => model.translate(&b, Translation::BToA)?,
            };
            write_dataset_csv(&z, create(&out)?)?;
        }
        Command::Eval { proposals, manifest, out, outcomes } => {
            let props = read_proposals(File::open(&proposals).with_context(|| format!("reading {}", proposals.display()))?)?;
            let spec = ScenarioSpec::from_json(&fs::read_to_string(&manifest)?)?;
            let rep = evaluate(&props, &spec)?;
            let mut w = csv::Writer::from_writer(create(&out)?);
            w.write_record(["tp", "fp", "fn", "ignored", "gold", "precision", "recall", "f1"])?;
            w.write_record([
                rep.tp.to_string(),
                rep.fp.to_string(),
                rep.fn_.to_string(),
                rep.ignored.to_string(),
                rep.gold_size.to_string(),
                rep.precision.to_string(),
                rep.recall.to_string(),
                rep.f1.to_string(),
            ])?;
            w.flush()?;
            if let Some(path) = outcomes {
                let mut w = csv::Writer::from_writer(create(&path)?);
                w.write_record(["featureA", "featureB", "outcome"])?;
                for o in &rep.outcomes {
                    let label = serde_json::to_value(o.outcome)?;
                    w.write_record([o.feature_a.as_str(), o.feature_b.as_str(), label.as_str().unwrap_or_default()])?;
                }
                w.flush()?;
            }
            println!("F1 {:.4} (tp {}, fp {}, fn {})", rep.f1, rep.tp, rep.fp, rep.fn_);
        }
        Command::Tune { a, b, mapped, mapped_b, grid, protocol, folds, method, out } => {
            let (a, b) = load_pair(&a, &b, &mapped, mapped_b.as_deref())?;
            let mut grid: Vec<PipelineConfig> = read_json(&grid)?;
            if let Some(s) = cli.seed {
                for g in &mut grid {
                    g.seed = s;
                    g.chimeric.seed = s;
                    g.kang.seed = s;
                }
            }
            let protocol = match protocol {
                ProtocolArg::LeaveOneOut => TuneProtocol::LeaveOneOut,
                ProtocolArg::HalfSplit => TuneProtocol::HalfSplit { folds },
            };
            let result = tune_hyperparams(&a, &b, &grid, protocol, method.into(), cli.seed.unwrap_or(0))?;
            serde_json::to_writer_pretty(create(&out)?, &result)?;
            log::info!("best grid point {} with mean F1 {:.4}", result.best_index, result.mean_scores[result.best_index]);
        }
        Command::Bench { config, out } => {
            let mut cfg = ExperimentConfig::from_json(&fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.out_dir = out;
            }
            if cfg.out_dir.is_none() {
                bail!("bench needs an output directory (--out or out_dir in the config)");
            }
            let report = run_benchmark(&cfg)?;
            print!("{}", report.summary_csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).target(env_logger::Target::Stderr).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}

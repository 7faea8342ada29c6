use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use headsum_core::corpus::write_corpus;
use headsum_core::harness::{self, parse_alpha_grid, parse_systems, ExperimentConfig, Overrides};
use headsum_core::synthetic::{generate, SyntheticConfig};
use headsum_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "headsum",
    version,
    about = "Headline-guided extractive summarization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Maximum oracle summary size.
    #[arg(long)]
    tau: Option<usize>,
    /// Comma-separated alphas, e.g. `0,0.25,0.5,0.75,1`.
    #[arg(long, value_name = "LIST")]
    alpha_grid: Option<String>,
    /// Comma-separated systems, e.g. `sel-only,sa,hm,lead-2,hl,hl-cos`.
    #[arg(long, value_name = "LIST")]
    systems: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Seeded partition of `split.input` into the train/validation/test files.
    Split(Common),
    /// Prepare the corpus and write oracle labels.
    Oracle(Common),
    /// Train the sentence scorer and write the checkpoint.
    Train(Common),
    /// Write per-sentence score dumps for model-backed systems.
    Score(Common),
    /// Evaluate the requested systems on the test split.
    Eval(Common),
    /// F1 of the weighted rule across the alpha grid.
    SweepAlpha(Common),
    /// Similarity distributions, aggregation surfaces and per-index PRF.
    Analyze(Common),
    /// Oracle, training, scoring and evaluation in one go.
    Run(Common),
    /// Write a synthetic corpus with a known answer.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Positives carry a cue word.
    Cue,
    /// Half the positives are identifiable only through the headline.
    Headline,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "cue")]
    kind: SynthKind,
    #[arg(long, default_value_t = 20)]
    documents: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    log::info!("loaded {}", common.config.display());
    let overrides = Overrides {
        tau: common.tau,
        alpha_grid: common
            .alpha_grid
            .as_deref()
            .map(parse_alpha_grid)
            .transpose()?,
        systems: common
            .systems
            .as_deref()
            .map(|s| parse_systems(s).map(|v| v.iter().map(ToString::to_string).collect()))
            .transpose()?,
        seed: common.seed,
        out_dir: common.out.clone(),
    };
    cfg.apply(&overrides);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Split(c) => {
            let counts = harness::run_split(&load(&c)?)?;
            println!(
                "train {}  validation {}  test {}  dropped {}",
                counts.train, counts.validation, counts.test, counts.dropped
            );
        }
        Command::Oracle(c) => {
            let cfg = load(&c)?;
            let prepared = harness::run_oracle(&cfg)?;
            for s in prepared.splits() {
                println!(
                    "{:<10} kept {:>6}  excluded {:>6}  truncated {:>6}",
                    s.name,
                    s.documents.len(),
                    s.excluded.len() + s.record_errors.len(),
                    s.truncated
                );
            }
            println!("labels written to {}", cfg.out_dir.join("labels").display());
        }
        Command::Train(c) => {
            let cfg = load(&c)?;
            let trained = harness::run_train(&cfg)?;
            if let Some(last) = trained.log.last() {
                println!("epoch {} train loss {:.6}", last.epoch, last.train_loss);
            }
            println!(
                "checkpoint written to {}",
                cfg.out_dir.join(harness::CHECKPOINT_FILE).display()
            );
        }
        Command::Score(c) => {
            for path in harness::run_score(&load(&c)?)? {
                println!("{}", path.display());
            }
        }
        Command::Eval(c) => print!("{}", harness::run_eval(&load(&c)?)?.to_text()),
        Command::Run(c) => print!("{}", harness::run_pipeline(&load(&c)?)?.to_text()),
        Command::SweepAlpha(c) => {
            let cfg = load(&c)?;
            if cfg.eval.alpha_grid.is_empty() {
                return Err(Error::Config("alpha grid is empty".into()));
            }
            print!("{}", harness::alpha_tsv(&harness::run_alpha_sweep(&cfg)?));
        }
        Command::Analyze(c) => {
            let cfg = load(&c)?;
            let bundle = harness::run_analyze(&cfg)?;
            if let Some(d) = bundle.sim_distribution {
                for (class, s) in [("positive", d.positive), ("negative", d.negative)] {
                    match s {
                        Some(s) => println!(
                            "{class:<8} n={:<7} q1 {:.4}  median {:.4}  q3 {:.4}",
                            s.count, s.q1, s.median, s.q3
                        ),
                        None => println!("{class:<8} n=0"),
                    }
                }
            }
            println!(
                "analysis written to {}",
                cfg.out_dir.join("analysis.json").display()
            );
        }
        Command::Synth(a) => {
            let mut scfg = match a.kind {
                SynthKind::Cue => SyntheticConfig::separable(a.documents, a.seed),
                SynthKind::Headline => SyntheticConfig::headline_signal(a.documents, a.seed),
            };
            scfg.documents = a.documents;
            let articles: Vec<_> = generate(&scfg).into_iter().map(|s| s.article).collect();
            write_corpus(&a.out, &articles)?;
            println!("{} articles written to {}", articles.len(), a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are config errors here; 2 is reserved for data
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            })
        }
    }
}

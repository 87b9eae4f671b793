use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crgan::checkpoint::Checkpoint;
use crgan::config::RunConfig;
use crgan::metrics::{frechet_distance_samples, mode_report};
use crgan::train::{generate, mixture, sweep, train};
use crgan::{Error, LossForm, Rng, Stream};

#[derive(Parser)]
#[command(
    name = "crgan",
    version,
    about = "Cascading-rejection GAN heads on a 2D Gaussian-mixture benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write logs, snapshots and a checkpoint.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "n-heads")]
        n_heads: Option<usize>,
        #[arg(long)]
        loss: Option<LossForm>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every (N, seed) pair and write summary.csv.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "n-heads", value_delimiter = ',', default_value = "1,2,4,8,16")]
        n_heads: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the bundled invariant checks.
    Selftest,
    /// Sample a trained generator and report its metrics.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 8000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Divergence { .. } | Error::NonFinite(_) | Error::Numeric(_) | Error::DegenerateWeight { .. } => 2,
        _ => 1,
    }
}

fn load_config(path: Option<&Path>) -> crgan::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::parse(&std::fs::read_to_string(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> crgan::Result<ExitCode> {
    match cli.command {
        Command::Train {
            config,
            seed,
            n_heads,
            loss,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = n_heads {
                cfg.n_heads = n;
            }
            if let Some(l) = loss {
                cfg.loss_form = l;
            }
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            cfg.validate()?;
            let log = train(&cfg)?;
            println!("{}", log.csv_header());
            for row in &log.rows {
                let r = &row.report;
                print!(
                    "{},{:.6},{},{:.4}",
                    row.iter, row.fd, r.modes_covered, r.high_quality_fraction
                );
                match r.class_accuracy {
                    Some(acc) => println!(",{acc:.4}"),
                    None => println!(),
                }
            }
            println!("wall clock {:.1}s", log.wall_clock.as_secs_f64());
        }
        Command::Sweep {
            config,
            n_heads,
            seeds,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            cfg.validate()?;
            let summary = sweep(&cfg, &n_heads, &seeds)?;
            print!("{}", summary.to_csv());
        }
        Command::Selftest => {
            if !crgan::selftest::run_and_report() {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Eval {
            checkpoint,
            samples,
            seed,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let cfg = RunConfig::parse(&ckpt.config_text)?;
            let spec = mixture(&cfg);
            let mut rng = Rng::new(seed, Stream::Eval);
            let real = spec.sample(samples, &mut rng);
            let fake = generate(&ckpt.generator, &spec, samples, &mut rng)?;
            let fd = frechet_distance_samples(&real.points, &fake.points)?;
            let r = mode_report(&fake.points, &spec, fake.labels.as_deref())?;
            println!("g_updates {}", ckpt.g_updates);
            println!("fd {fd}");
            println!("modes_covered {} of {}", r.modes_covered, spec.num_modes());
            println!("hq_fraction {}", r.high_quality_fraction);
            let counts: Vec<String> = r.per_mode_counts.iter().map(usize::to_string).collect();
            println!("per_mode_counts {}", counts.join(","));
            if let Some(acc) = r.class_accuracy {
                println!("class_accuracy {acc}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

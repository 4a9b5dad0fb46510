use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cr_harness::bench::bench_sumtree;
use cr_harness::compare::{compare, Arm, Metric};
use cr_harness::sweep::{sweep, Axis};
use cr_harness::{report, runner, HarnessError, Result, RunConfig};
use curious_replay::Strategy;

#[derive(Parser)]
#[command(name = "cr", version, about = "Curiosity-prioritized replay experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Override the prioritization strategy.
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Override the number of environment steps.
    #[arg(long)]
    total_steps: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one seeded run and write its metrics.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare strategies or configs across seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated seeds shared by every arm.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        /// Comma-separated strategies; each becomes one arm per config.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<Strategy>,
        #[arg(long, default_value = "steps_to_interaction:5")]
        metric: Metric,
    },
    /// Run the cartesian product of swept keys.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        /// `dotted.key=v1,v2,...`; repeat for more axes.
        #[arg(long = "set", required = true)]
        axes: Vec<String>,
        #[arg(long, default_value = "steps_to_interaction:5")]
        metric: Metric,
    },
    /// Sum-tree microbenchmark.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "10,12,14,16,18,20")]
        exponents: Vec<u32>,
        #[arg(long, default_value_t = 1_000_000)]
        ops: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render tables and SVG plots from metrics files or directories.
    Report {
        #[arg(long, required = true)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Print the default configuration.
    DefaultConfig,
}

impl Common {
    fn configs(&self) -> Result<Vec<(String, RunConfig)>> {
        let mut loaded = if self.config.is_empty() {
            vec![("default".to_owned(), RunConfig::default())]
        } else {
            self.config
                .iter()
                .map(|p| {
                    let stem = p.file_stem().map_or("config".into(), |s| s.to_string_lossy().into_owned());
                    RunConfig::load(p).map(|c| (stem, c))
                })
                .collect::<Result<Vec<_>>>()?
        };
        for (_, c) in &mut loaded {
            if let Some(s) = self.strategy {
                c.priority.strategy = s;
            }
            if let Some(t) = self.total_steps {
                c.total_steps = t;
            }
            c.output = None;
        }
        Ok(loaded)
    }
}

fn single(configs: Vec<(String, RunConfig)>) -> Result<RunConfig> {
    match <[_; 1]>::try_from(configs) {
        Ok([(_, c)]) => Ok(c),
        Err(_) => Err(HarnessError::config("config", "this subcommand takes one config")),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { common, seed } => {
            let mut config = single(common.configs()?)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            match &common.out {
                Some(dir) => {
                    let file = format!("{}-{}-seed{}.jsonl", config.env.name(), config.strategy().name(), config.seed);
                    config.output = Some(dir.join(file));
                    let metrics = runner::run(&config)?;
                    println!(
                        "{}: {} steps, {} interactions, 5th interaction after {}",
                        config.output.as_ref().expect("set above").display(),
                        metrics.summary.steps,
                        metrics.summary.interactions,
                        metrics.steps_to_kth_interaction(5).map_or("never".into(), |s| format!("{s} steps")),
                    );
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    runner::run_with_writer(&config, &mut lock)?;
                }
            }
        }
        Command::Compare { common, seeds, strategies, metric } => {
            let configs = common.configs()?;
            let multi = configs.len() > 1;
            let mut arms = Vec::new();
            for (stem, config) in configs {
                if strategies.is_empty() {
                    let label = if multi { stem.clone() } else { config.strategy().name().to_owned() };
                    arms.push(Arm::new(label, config));
                } else {
                    for &s in &strategies {
                        let label = if multi { format!("{stem}-{}", s.name()) } else { s.name().to_owned() };
                        arms.push(Arm::new(label, config.clone().with_strategy(s)));
                    }
                }
            }
            let (report, _) = compare(&arms, &seeds, metric, common.out.as_deref())?;
            print!("{}", report.to_markdown());
        }
        Command::Sweep { common, seeds, axes, metric } => {
            let base = single(common.configs()?)?;
            let axes = axes.iter().map(|a| Axis::parse(a)).collect::<Result<Vec<_>>>()?;
            let (report, _) = sweep(&base, &axes, &seeds, metric, common.out.as_deref())?;
            print!("{}", report.to_markdown());
        }
        Command::Bench { exponents, ops, seed, out } => {
            let report = bench_sumtree(&exponents, ops, seed)?;
            let md = report.to_markdown();
            print!("{md}");
            if let Some(dir) = out {
                let json = serde_json::to_string_pretty(&report).expect("bench report serializes");
                write_text(&dir.join("bench.json"), &(json + "\n"))?;
                write_text(&dir.join("bench.md"), &md)?;
            }
        }
        Command::Report { out, inputs } => {
            for path in report::write_report(&inputs, &out)? {
                println!("{}", path.display());
            }
        }
        Command::DefaultConfig => print!("{}", RunConfig::default().to_toml_string()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Sweep runner: `run` executes an experiment, `table` and `plot` render
//! stored CSV results.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 accuracy
//! contract violated (some `E` above the threshold).

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bie_direct::bench::{self, Experiment, ExperimentConfig, ExperimentRow};
use bie_direct::Error;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bie-bench", about = "Update-solver experiment sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment sweep and write `<out-dir>/<experiment>.csv`.
    Run {
        #[arg(long)]
        experiment: Option<String>,
        /// Plain `key = value` file; flags given here override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        /// Comma-separated sizes (`N_o`, or `N_p` for star-refine).
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[arg(long)]
        dense_oracle: bool,
        #[arg(long)]
        parallel: bool,
        /// `svg` also writes a log-log timing plot.
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Print stored results as a table with fitted slopes.
    Table {
        /// CSV files, or directories searched for `*.csv`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Render stored results as SVG next to each CSV, or into `--out-dir`.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Accuracy(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run {
            experiment,
            config,
            eps,
            sweep,
            seed,
            out_dir,
            dense_oracle,
            parallel,
            format,
        } => build_config(experiment, config, eps, sweep, seed, dense_oracle, parallel)
            .and_then(|cfg| run(&cfg, &out_dir, format)),
        Command::Table { inputs } => table(&inputs),
        Command::Plot { inputs, out_dir } => plot(&inputs, out_dir.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Accuracy(m)) => {
            eprintln!("accuracy violation: {m}");
            ExitCode::from(2)
        }
    }
}

fn build_config(
    experiment: Option<String>,
    config: Option<PathBuf>,
    eps: Option<f64>,
    sweep: Option<String>,
    seed: Option<u64>,
    dense_oracle: bool,
    parallel: bool,
) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match (&config, &experiment) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(name)) => ExperimentConfig::new(name.parse::<Experiment>()?),
        (None, None) => return Err(Failure::Config("give --experiment or --config".into())),
    };
    let mut overrides: Vec<(&str, String)> = Vec::new();
    if let Some(name) = experiment.filter(|_| config.is_some()) {
        overrides.push(("experiment", name));
    }
    if let Some(v) = eps {
        overrides.push(("eps", v.to_string()));
    }
    if let Some(v) = sweep {
        overrides.push(("sweep", v));
    }
    if let Some(v) = seed {
        overrides.push(("seed", v.to_string()));
    }
    for (key, value) in overrides {
        cfg.set(key, &value).map_err(|m| Failure::Config(format!("--{key}: {m}")))?;
    }
    cfg.dense_oracle |= dense_oracle;
    cfg.parallel |= parallel;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cfg: &ExperimentConfig, out_dir: &Path, format: Format) -> Result<(), Failure> {
    fs::create_dir_all(out_dir)?;
    let name = cfg.experiment.name();
    if cfg.parallel {
        eprintln!("note: sweep points run concurrently; timings are not isolated");
    }
    let rows = bench::run_experiment(cfg).map_err(|e| Failure::Accuracy(format!("{name}: {e}")))?;
    let csv_path = bench::output_path(out_dir, name, "csv");
    bench::write_csv(&rows, File::create(&csv_path)?)?;
    print_report(&rows);
    println!("wrote {}", csv_path.display());
    if format == Format::Svg {
        let svg_path = bench::output_path(out_dir, name, "svg");
        fs::write(&svg_path, bench::plot_svg(&rows, name)?)?;
        println!("wrote {}", svg_path.display());
    }
    let bad = bench::accuracy_violations(&rows, cfg.e_threshold);
    if let Some(r) = bad.first() {
        return Err(Failure::Accuracy(format!(
            "{} of {} rows exceed E = {:e}; first at N_o = {}, N_p = {} with E = {:e}",
            bad.len(),
            rows.len(),
            cfg.e_threshold,
            r.n_o,
            r.n_p,
            r.e
        )));
    }
    Ok(())
}

fn print_report(rows: &[ExperimentRow]) {
    print!("{}", bench::format_table(rows));
    match bench::fit_scaling(rows) {
        Ok(fit) => print!("{}", bench::format_fit(&fit)),
        Err(e) => println!("no slope fit: {e}"),
    }
}

/// Expands directories into their `*.csv` files, sorted.
fn csv_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Failure::Config("no CSV inputs found".into()));
    }
    Ok(out)
}

fn load(path: &Path) -> Result<Vec<ExperimentRow>, Failure> {
    bench::read_csv(File::open(path)?).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn table(inputs: &[PathBuf]) -> Result<(), Failure> {
    for path in csv_inputs(inputs)? {
        println!("== {}", path.display());
        print_report(&load(&path)?);
    }
    Ok(())
}

fn plot(inputs: &[PathBuf], out_dir: Option<&Path>) -> Result<(), Failure> {
    for path in csv_inputs(inputs)? {
        let rows = load(&path)?;
        let title = path.file_stem().map_or("results".into(), |s| s.to_string_lossy().into_owned());
        let target = match out_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                bench::output_path(dir, &title, "svg")
            }
            None => path.with_extension("svg"),
        };
        fs::write(&target, bench::plot_svg(&rows, &title)?)?;
        println!("wrote {}", target.display());
    }
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ewclab::config::{parse_config_file, parse_grid, parse_methods, PartialOptions, RunOptions};
use ewclab::{cmd_run, cmd_tune, AppError};

/// Continual-learning laboratory: sequential EWC training on permuted
/// image tasks, per-weight importance estimation, and correlation
/// surfaces.
#[derive(Parser)]
#[command(name = "ewclab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sequential experiment and write all artifacts.
    Run(CommonArgs),
    /// Grid-search the EWC strength lambda.
    Tune(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding the four IDX files.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of permuted tasks.
    #[arg(long)]
    tasks: Option<usize>,
    /// SGD epochs per task.
    #[arg(long)]
    epochs: Option<usize>,
    /// Minibatch size.
    #[arg(long)]
    batch: Option<usize>,
    /// SGD learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// EWC penalty strength (run).
    #[arg(long)]
    lambda: Option<f64>,
    /// Master seed for init, permutations, and shuffles.
    #[arg(long)]
    seed: Option<u64>,
    /// Desk-scale cap on train samples per task.
    #[arg(long)]
    train_cap: Option<usize>,
    /// Desk-scale cap on test samples per task.
    #[arg(long)]
    test_cap: Option<usize>,
    /// Comma-separated estimators to record: fis,mas,si,sig.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated lambda grid (tune).
    #[arg(long)]
    grid: Option<String>,
    /// Also emit Spearman surfaces (extra output, outside the standard
    /// report).
    #[arg(long)]
    spearman: bool,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunOptions, AppError> {
        let mut options = RunOptions::default();
        if let Some(config) = &self.config {
            parse_config_file(config)?.apply_to(&mut options);
        }
        let flags = PartialOptions {
            data_dir: self.data_dir.clone(),
            out_dir: self.out.clone(),
            tasks: self.tasks,
            epochs: self.epochs,
            batch: self.batch,
            lr: self.lr,
            lambda: self.lambda,
            grid: self.grid.as_deref().map(parse_grid).transpose()?,
            seed: self.seed,
            train_cap: self.train_cap,
            test_cap: self.test_cap,
            methods: self.methods.as_deref().map(parse_methods).transpose()?,
            spearman: self.spearman.then_some(true),
        };
        flags.apply_to(&mut options);
        Ok(options)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are not usage errors.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(args) => args.resolve().and_then(|options| cmd_run(&options)),
        Command::Tune(args) => args.resolve().and_then(|options| cmd_tune(&options)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("ewclab: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

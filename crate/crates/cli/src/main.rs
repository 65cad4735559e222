//! `phishscan` command-line entry point.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "phishscan", version, about = "Phishing page detection over actionable HTML elements")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Seed for every randomized step (training, sampling, manipulations).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Config file; falls back to $PHISHSCAN_CONFIG, then built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Turn every parser hardening patch on or off.
    #[arg(long, global = true, value_enum)]
    pub patches: Option<Switch>,
    /// Output format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Cap on worker pools.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Style {
    Modern,
    Saved,
    Mixed,
}

#[derive(Debug, Clone, Args)]
pub struct PageArgs {
    /// HTML file, or `-` for stdin.
    pub input: PathBuf,
    /// Url the page was served from; relative links resolve against it.
    #[arg(long, default_value = "http://localhost/")]
    pub url: String,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Reference model file; overrides the configured scorer.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the parsed representation of a page.
    Parse {
        #[command(flatten)]
        page: PageArgs,
    },
    /// Print the sliding-window chunks of a page.
    Chunk {
        #[command(flatten)]
        page: PageArgs,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Generate a synthetic labeled corpus directory.
    Corpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        phishing: usize,
        #[arg(long, default_value_t = 100)]
        benign: usize,
        #[arg(long, value_enum, default_value_t = Style::Mixed)]
        style: Style,
    },
    /// Train the reference scorer on a corpus directory.
    Train {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Train on this fraction and report metrics on the rest.
        #[arg(long)]
        split: Option<f64>,
    },
    /// Evaluate a model on a corpus directory, or cross-validate.
    Eval {
        corpus: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// K-fold cross-validation of freshly trained models instead.
        #[arg(long, value_name = "K")]
        cv: Option<usize>,
    },
    /// Fetch and scan one url.
    Scan {
        url: String,
        #[command(flatten)]
        model: ModelArgs,
        /// Blocklist file to record the result in.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Run the scan API, optionally consuming the live feed too.
    Serve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        live: bool,
    },
    /// Scan every url of a replay file.
    Replay {
        file: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        store: Option<PathBuf>,
        /// Emission rate in urls per second; unlimited by default.
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Run the query-budgeted optimizer against a page.
    Attack {
        #[command(flatten)]
        page: PageArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        budget: Option<usize>,
        /// Hiding strategy S1-S4.
        #[arg(long)]
        strategy: Option<String>,
        /// Also run the removal round for co-primary attribution.
        #[arg(long)]
        rerun: bool,
        /// AttackRun trace file; defaults to `<input>.attack.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply one manipulation and print the modified page.
    Manipulate {
        #[command(flatten)]
        page: PageArgs,
        /// Manipulation id A1-A15.
        #[arg(long = "id")]
        id: String,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Adversarially retrain a model against one manipulation.
    Retrain {
        corpus: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Manipulation id A1-A15.
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: PathBuf,
        /// Copies of each adversarial page in the training set.
        #[arg(long, default_value_t = phishscan_core::adversarial::DEFAULT_ADVERSARIAL_WEIGHT)]
        weight: usize,
    },
    /// Explain a phishing verdict with a structured warning.
    Explain {
        #[command(flatten)]
        page: PageArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Assign the evasion category of a page.
    Profile {
        #[command(flatten)]
        page: PageArgs,
    },
    /// Query the blocklist store.
    Blocklist {
        #[command(subcommand)]
        action: BlocklistAction,
        #[arg(long, global = true)]
        store: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum BlocklistAction {
    /// List records, oldest first.
    List {
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        category: Option<String>,
        #[arg(long)]
        status: Option<String>,
        #[arg(long, default_value_t = 1)]
        page: usize,
        #[arg(long, default_value_t = 100)]
        page_size: usize,
    },
    /// Latest record for a url.
    Get { url: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            eprintln!("run `phishscan --help` for the command contract");
            ExitCode::from(2)
        }
        Err(commands::CliError::Operational(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

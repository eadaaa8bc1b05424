use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use sstpca::cli::config::{Command, InitChoice, Preset, RunConfig, Suite};
use sstpca::cli::io::InputFormat;
use sstpca::cli::run::{self, EXIT_INPUT};
use sstpca::Scheme;

#[derive(Parser)]
#[command(name = "sstpca", version, about = "Semi-symmetric tensor PCA for network series")]
struct Cli {
    /// Worker threads (default: SSTPCA_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run a JSON config file instead of a subcommand.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit one or more factors by successive deflation.
    Decompose {
        #[command(flatten)]
        input: InputArgs,
        /// Factor ranks in fit order, e.g. `--rank 3 --rank 2` or `--rank 3,2`.
        #[arg(long = "rank", value_delimiter = ',', default_value = "1")]
        ranks: Vec<usize>,
        #[arg(long, value_enum, default_value_t = SchemeArg::Hotelling)]
        scheme: SchemeArg,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Zero principal-network entries below this magnitude in the report.
        #[arg(long)]
        edge_threshold: Option<f64>,
    },
    /// Locate a single mean change with the CUSUM tensor.
    Changepoint {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Zero principal-network entries below this magnitude in the report.
        #[arg(long)]
        edge_threshold: Option<f64>,
    },
    /// Generate data or convergence traces from a preset.
    Simulate {
        #[arg(long, value_enum)]
        preset: PresetArg,
        /// Rank used by the spike preset.
        #[arg(long, default_value_t = 1)]
        rank: usize,
        /// Write the generated tensor here as LongCSV.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte Carlo error tables.
    Benchmark {
        #[arg(long, value_enum, default_value_t = SuiteArg::Rates)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Choose factor ranks by greedy BIC.
    RankSelect {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 3)]
        r_max: usize,
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        #[arg(long, value_enum, default_value_t = SchemeArg::Hotelling)]
        scheme: SchemeArg,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args)]
struct InputArgs {
    /// LongCSV file (`t,i,j,w`, 1-based nodes) or directory of dense slice CSVs.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Node count for LongCSV input (default: largest index seen).
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Stable)]
    init: InitArg,
    /// Scale V-update eigenvectors by sqrt(|eigenvalue|).
    #[arg(long)]
    eigen_scaled: bool,
}

#[derive(Args)]
struct OutputArgs {
    /// Results JSON (default: standard output).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Optional CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Hotelling,
    Projection,
    Schur,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    LongCsv,
    SliceDir,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Stable,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Fig3,
    Shift,
    Spike,
    Sbm,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Rates,
    Methods,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Hotelling => Scheme::Hotelling,
            SchemeArg::Projection => Scheme::Projection,
            SchemeArg::Schur => Scheme::Schur,
        }
    }
}

fn apply_input(cfg: &mut RunConfig, a: InputArgs) {
    cfg.input = Some(a.input);
    cfg.nodes = a.nodes;
    cfg.format = a.format.map(|f| match f {
        FormatArg::LongCsv => InputFormat::LongCsv,
        FormatArg::SliceDir => InputFormat::SliceDir,
    });
}

fn apply_fit(cfg: &mut RunConfig, a: FitArgs) {
    cfg.seed = a.seed;
    cfg.tol = a.tol;
    cfg.max_iter = a.max_iter;
    cfg.eigen_scaled = a.eigen_scaled;
    cfg.init = match a.init {
        InitArg::Stable => InitChoice::Stable,
        InitArg::Random => InitChoice::Random,
    };
}

fn apply_out(cfg: &mut RunConfig, a: OutputArgs) {
    cfg.output = a.output;
    cfg.csv = a.csv;
}

fn to_config(cmd: Cmd) -> RunConfig {
    match cmd {
        Cmd::Decompose { input, ranks, scheme, fit, out, edge_threshold } => {
            let mut cfg = RunConfig::new(Command::Decompose);
            apply_input(&mut cfg, input);
            apply_fit(&mut cfg, fit);
            apply_out(&mut cfg, out);
            cfg.ranks = ranks;
            cfg.scheme = scheme.into();
            cfg.edge_threshold = edge_threshold;
            cfg
        }
        Cmd::Changepoint { input, rank, fit, out, edge_threshold } => {
            let mut cfg = RunConfig::new(Command::Changepoint);
            apply_input(&mut cfg, input);
            apply_fit(&mut cfg, fit);
            apply_out(&mut cfg, out);
            cfg.ranks = vec![rank];
            cfg.edge_threshold = edge_threshold;
            cfg
        }
        Cmd::Simulate { preset, rank, data, fit, out } => {
            let mut cfg = RunConfig::new(Command::Simulate);
            apply_fit(&mut cfg, fit);
            apply_out(&mut cfg, out);
            cfg.ranks = vec![rank];
            cfg.data = data;
            cfg.preset = Some(match preset {
                PresetArg::Fig3 => Preset::Fig3,
                PresetArg::Shift => Preset::Shift,
                PresetArg::Spike => Preset::Spike,
                PresetArg::Sbm => Preset::Sbm,
            });
            cfg
        }
        Cmd::Benchmark { suite, reps, fit, out } => {
            let mut cfg = RunConfig::new(Command::Benchmark);
            apply_fit(&mut cfg, fit);
            apply_out(&mut cfg, out);
            cfg.reps = reps;
            cfg.suite = match suite {
                SuiteArg::Rates => Suite::Rates,
                SuiteArg::Methods => Suite::Methods,
            };
            cfg
        }
        Cmd::RankSelect { input, r_max, k_max, scheme, fit, out } => {
            let mut cfg = RunConfig::new(Command::RankSelect);
            apply_input(&mut cfg, input);
            apply_fit(&mut cfg, fit);
            apply_out(&mut cfg, out);
            cfg.r_max = r_max;
            cfg.k_max = k_max;
            cfg.scheme = scheme.into();
            cfg
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let result = (|| -> anyhow::Result<i32> {
        run::configure_threads(cli.threads)?;
        let cfg = match (cli.config, cli.command) {
            (Some(_), Some(_)) => anyhow::bail!("--config cannot be combined with a subcommand"),
            (Some(path), None) => RunConfig::load(&path).with_context(|| format!("loading {}", path.display()))?,
            (None, Some(cmd)) => to_config(cmd),
            (None, None) => anyhow::bail!("expected a subcommand or --config"),
        };
        let outcome = run::run(&cfg)?;
        if cfg.output.is_none() {
            print!("{}", outcome.json);
        }
        Ok(outcome.exit_code)
    })();

    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .chain()
                .find_map(|e| e.downcast_ref::<sstpca::Error>())
                .map(run::exit_code_for)
                .unwrap_or(EXIT_INPUT);
            ExitCode::from(code as u8)
        }
    }
}

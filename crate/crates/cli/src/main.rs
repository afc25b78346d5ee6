mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use detstab_core::Error;

#[derive(Parser, Debug)]
#[command(name = "detstab", version, about = "Spectral stability of viscous detonations near the ZND limit")]
struct Cli {
    /// Worker threads (0 = rayon default).
    #[arg(long, global = true, env = "DETSTAB_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, env = "DETSTAB_CONFIG")]
    pub config: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute a profile and write its cache file.
    Profile {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, env = "DETSTAB_KIND")]
        kind: Kind,
        /// Viscosity for `rns` (defaults to the first configured value).
        #[arg(long, env = "DETSTAB_EPS")]
        eps: Option<f64>,
        #[arg(long, env = "DETSTAB_OUT")]
        out: PathBuf,
    },
    /// Tabulate a determinant as CSV.
    #[command(group(ArgGroup::new("source").required(true).args(["lambda", "contour", "circle", "random"])))]
    Evans {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        points: Points,
        /// CSV file (stdout if omitted).
        #[arg(long, env = "DETSTAB_OUT")]
        out: Option<PathBuf>,
    },
    /// Winding number of a determinant along a contour.
    Winding {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: Target,
        #[arg(long, conflicts_with = "circle")]
        contour: Option<PathBuf>,
        #[arg(long)]
        circle: Option<f64>,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, env = "DETSTAB_OUT")]
        out: Option<PathBuf>,
    },
    /// Run the region study and write the result bundle.
    Study {
        #[command(flatten)]
        common: Common,
        /// Comma separated subset of 1,2,3.
        #[arg(long, env = "DETSTAB_REGIONS", value_delimiter = ',')]
        regions: Option<Vec<u8>>,
        /// Comma separated viscosities, overriding the config.
        #[arg(long, env = "DETSTAB_EPS", value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long, env = "DETSTAB_OUT")]
        out: Option<PathBuf>,
    },
    /// Check the structural hypotheses at the end states.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = "DETSTAB_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Znd,
    Ns,
    Rns,
}

#[derive(Args, Debug, Clone)]
pub struct Target {
    #[arg(long, value_enum, env = "DETSTAB_KIND")]
    pub kind: Kind,
    #[arg(long, env = "DETSTAB_EPS")]
    pub eps: Option<f64>,
}

#[derive(Args, Debug, Clone)]
#[group(skip)]
pub struct Points {
    /// Spectral point `re,im` (repeatable; `ns` points are in the stretched variable).
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Vec<String>,
    /// Contour JSON; its sample points are tabulated.
    #[arg(long)]
    pub contour: Option<PathBuf>,
    /// Radius of a centred circle sampled at `--count` points.
    #[arg(long)]
    pub circle: Option<f64>,
    /// Number of uniform random points in `[-1, 1]^2` scaled by `--scale`.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub count: usize,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, env = "DETSTAB_SEED", default_value_t = 0)]
    pub seed: u64,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_usage() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let result = match cli.command {
        Command::Profile { common, kind, eps, out } => commands::profile(&common, kind, eps, &out),
        Command::Evans {
            common,
            target,
            points,
            out,
        } => commands::evans(&common, &target, &points, out.as_deref()),
        Command::Winding {
            common,
            target,
            contour,
            circle,
            samples,
            out,
        } => commands::winding(&common, &target, contour.as_deref(), circle, samples, out.as_deref()),
        Command::Study {
            common,
            regions,
            eps,
            out,
        } => commands::study(&common, regions, eps, out),
        Command::Validate { common, out } => commands::validate(&common, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dissim_cli::commands::{self, CliError, CriteriaFlags, Output, Settings, Status};
use dissim_cli::document::{self, GridSpec};
use dissim_core::linalg::c64;
use dissim_core::C64;

/// Characteristic functions and similarity criteria for dissipative
/// integral operators.
///
/// Exit status: 0 ok / verdict holds, 1 usage or input error, 2 verdict
/// fails (or the document is invalid, or the oracle disagrees), 3
/// inconclusive (including flagged rows in a sweep).
#[derive(Parser)]
#[command(name = "dissim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a problem document against the schema and the operator invariants.
    Validate(Common),
    /// CSV sweep of S_A(z), det S_A(z) and tr(I − S*S).
    Charfn {
        #[command(flatten)]
        common: Common,
        /// Dump the whole path G(t, z) instead of its value at t = 0.
        #[arg(long)]
        path: bool,
    },
    /// CSV sweep of det S_A(z), with the Blaschke/outer product when commutativity is declared.
    Det(Common),
    /// JSON report of the similarity criteria; exit status follows the verdict.
    Criteria {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: CriteriaArgs,
    },
    /// JSON comparison of the solvers against the dense oracle (atomic measures only).
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: CriteriaArgs,
        /// Largest discrepancy still counted as agreement.
        #[arg(long, default_value_t = commands::DEFAULT_AGREE_TOL)]
        agree_tol: f64,
    },
    /// Every analysis requested by the document's run block, as one JSON document.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: CriteriaArgs,
        #[arg(long, default_value_t = commands::DEFAULT_AGREE_TOL)]
        agree_tol: f64,
    },
}

#[derive(Args)]
struct Common {
    /// Problem document (JSON).
    document: PathBuf,
    /// Evaluation point `re,im`; repeatable. Replaces run.z.
    #[arg(long = "z", value_name = "RE,IM", value_parser = parse_z, allow_hyphen_values = true)]
    z: Vec<C64>,
    /// Rectangular grid, Im z log-spaced. Replaces run.zgrid.
    #[arg(long, value_name = "RE_MIN,RE_MAX,IM_MIN,IM_MAX,NX,NY", allow_hyphen_values = true)]
    zgrid: Option<GridSpec>,
    /// Local tolerance of the ODE integrator [default: 1e-10].
    #[arg(long)]
    tol: Option<f64>,
    /// Condition number above which a matrix counts as singular [default: 1e12].
    #[arg(long)]
    cond_limit: Option<f64>,
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CriteriaArgs {
    /// Columns of the adaptive grid [default: 64].
    #[arg(long)]
    nx: Option<usize>,
    /// Rows of the adaptive grid [default: 64].
    #[arg(long)]
    ny: Option<usize>,
    /// Coarsest bin count of the ν_c density [default: 64].
    #[arg(long)]
    bins: Option<usize>,
    /// Bin halvings compared against the coarsest level [default: 3].
    #[arg(long)]
    halvings: Option<usize>,
    /// Window ratios above this count as unbounded [default: 64].
    #[arg(long)]
    window_cap: Option<f64>,
    /// Largest dense dimension for the linear resolvent growth constant [default: 200].
    #[arg(long)]
    dense_limit: Option<usize>,
}

impl From<CriteriaArgs> for CriteriaFlags {
    fn from(a: CriteriaArgs) -> Self {
        CriteriaFlags {
            nx: a.nx,
            ny: a.ny,
            bins: a.bins,
            halvings: a.halvings,
            window_cap: a.window_cap,
            dense_limit: a.dense_limit,
        }
    }
}

fn parse_z(s: &str) -> Result<C64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected re,im, got {s:?}"))?;
    let f = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok(c64(f(re)?, f(im)?))
}

fn settings(c: &Common) -> Settings {
    Settings {
        z: c.z.clone(),
        zgrid: c.zgrid,
        tol: c.tol,
        cond_limit: c.cond_limit,
        ..Settings::default()
    }
}

fn run(command: Command) -> Result<(Output, Option<PathBuf>), CliError> {
    let load = |p: &Path| document::load(p).map_err(CliError::from);
    Ok(match command {
        Command::Validate(c) => (commands::validate(&document::read(&c.document)?), c.out),
        Command::Charfn { common, path } => {
            let s = Settings {
                path,
                ..settings(&common)
            };
            (commands::charfn(&load(&common.document)?, &s)?, common.out)
        }
        Command::Det(c) => (commands::det(&load(&c.document)?, &settings(&c))?, c.out),
        Command::Criteria { common, flags } => {
            let s = Settings {
                criteria: flags.into(),
                ..settings(&common)
            };
            (commands::criteria(&load(&common.document)?, &s)?, common.out)
        }
        Command::Oracle {
            common,
            flags,
            agree_tol,
        } => {
            let s = Settings {
                criteria: flags.into(),
                agree_tol: Some(agree_tol),
                ..settings(&common)
            };
            (commands::oracle(&load(&common.document)?, &s)?, common.out)
        }
        Command::Report {
            common,
            flags,
            agree_tol,
        } => {
            let s = Settings {
                criteria: flags.into(),
                agree_tol: Some(agree_tol),
                ..settings(&common)
            };
            (commands::report(&load(&common.document)?, &s)?, common.out)
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Usage.code() } else { 0 });
        }
    };
    match run(cli.command) {
        Ok((out, path)) => {
            if let Some(path) = path {
                if let Err(e) = std::fs::write(&path, &out.text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(Status::Usage.code());
                }
            } else {
                print!("{}", out.text);
            }
            ExitCode::from(out.status.code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Status::Usage.code())
        }
    }
}

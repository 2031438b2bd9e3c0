//! `mrdprice`: optimal wholesale prices, stochastic orders and market
//! performance from the command line.
//!
//! Exit codes: 0 ok, 1 input error, 2 no finite optimum, 3 order fails.

mod commands;
mod figures;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "mrdprice", version, about = "Wholesale pricing under stochastic linear demand")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Directory for CSV/JSON outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Monte Carlo seed.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Monte Carlo draws.
    #[arg(long, global = true, default_value_t = mrdprice::sim::DEFAULT_DRAWS)]
    pub draws: usize,
    /// Absolute tolerance: root finding for `solve`, order violations for `orders`.
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    /// Grid resolution of scans, order checks and curves.
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Accept |gamma| > beta in the market structure.
    #[arg(long, global = true)]
    pub allow_beta_le_gamma: bool,
    /// Read every normal law as untruncated (demand may be negative).
    #[arg(long, global = true)]
    pub untruncated_normal: bool,
    /// Also write a gnuplot script next to the data.
    #[arg(long, global = true)]
    pub gnuplot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal price, diagnostics and the profit curve.
    Solve {
        #[arg(long)]
        dist: PathBuf,
    },
    /// Checks a stochastic order between two laws.
    Orders {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        dist2: PathBuf,
        /// st, hr, mrl, cx, disp or ew.
        #[arg(long)]
        order: String,
    },
    /// Comparative-statics rows for one scenario or an array of them.
    Statics {
        #[arg(long)]
        scenario: PathBuf,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Realized profits, shares and no-trade data across markets.
    Performance {
        /// Demand law; Gamma(2, 2) when omitted.
        #[arg(long)]
        dist: Option<PathBuf>,
        /// Retailer counts, e.g. 2,5,8.
        #[arg(long, default_value = "2,5,8")]
        n: String,
        /// Demand intercepts LO:HI:STEPS; 0:12r*:601 when omitted.
        #[arg(long)]
        alpha_grid: Option<String>,
    },
    /// Monte Carlo play of the two-stage game.
    Simulate {
        #[arg(long)]
        dist: PathBuf,
        /// JSON SimConfig overriding seed, draws, structure and price grid.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "cournot_n")]
        structure: String,
        #[arg(long, default_value = "2")]
        n: String,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        /// optimal_stochastic or oracle_deterministic.
        #[arg(long, default_value = "optimal_stochastic")]
        policy: String,
        /// Prices LO:HI:STEPS; 21 points on [r*/2, 3r*/2] when omitted.
        #[arg(long)]
        price_grid: Option<String>,
    },
    /// Probability of no trade at the optimal price.
    Notrade {
        #[arg(long)]
        dist: PathBuf,
    },
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    NoOptimum(String),
    OrderFails(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::NoOptimum(_) => 2,
            Failure::OrderFails(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::NoOptimum(m) => write!(f, "{m}"),
            Failure::OrderFails(m) => write!(f, "order fails: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = &cli.common;
    let result = match &cli.command {
        Command::Solve { dist } => commands::solve(c, dist),
        Command::Orders { dist, dist2, order } => commands::orders(c, dist, dist2, order),
        Command::Statics { scenario, json } => commands::statics(c, scenario, *json),
        Command::Performance { dist, n, alpha_grid } => commands::performance(c, dist.as_deref(), n, alpha_grid.as_deref()),
        Command::Simulate { dist, config, structure, n, beta, gamma, policy, price_grid } => commands::simulate(
            c,
            &commands::SimArgs {
                dist,
                config: config.as_deref(),
                structure,
                n,
                beta: *beta,
                gamma: *gamma,
                policy,
                price_grid: price_grid.as_deref(),
            },
        ),
        Command::Notrade { dist } => commands::notrade(c, dist),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mrdprice: {e}");
            ExitCode::from(e.code())
        }
    }
}

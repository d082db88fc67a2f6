use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use atsp_lab::bnb::{BranchRule, IncumbentInit, SearchOrder};
use atsp_lab::harness::{self, Config, Method, Report};
use atsp_lab::Result;

#[derive(Parser)]
#[command(name = "atsp-lab", version, about = "Seeded ATSP branch-and-bound experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gap between the optimal tour and the assignment bound.
    GapScan(Common),
    /// Branch-and-bound node counts across sizes.
    NodesScan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bnb: BnbArgs,
    },
    /// Structural statistics of the assignment relaxation.
    StructureScan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        zeta: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
    },
    /// Build and check a tree of near-optimal matchings.
    Witness {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Solve a single instance.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Instance file; otherwise one is generated from --n and --seed-start.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[command(flatten)]
        bnb: BnbArgs,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    seed_start: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Generator id, e.g. "splitmix64/uniform".
    #[arg(long)]
    generator: Option<String>,
    /// Output file; defaults to $ATSP_LAB_OUT_DIR/<command>.<ext>, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add wall-clock columns (output is then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct BnbArgs {
    #[arg(long, value_enum)]
    branch_rule: Option<BranchRule>,
    #[arg(long, value_enum)]
    search_order: Option<SearchOrder>,
    #[arg(long, value_enum)]
    incumbent: Option<IncumbentInit>,
    #[arg(long)]
    prune_ties: Option<bool>,
    #[arg(long)]
    timeout_ms: Option<u64>,
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if !self.n.is_empty() {
            cfg.n = self.n.clone();
        }
        if self.seeds.is_some() {
            cfg.seeds = self.seeds;
        }
        if let Some(s) = self.seed_start {
            cfg.seed_start = s;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(g) = &self.generator {
            cfg.generator = g.clone();
        }
        cfg.timing |= self.timing;
        Ok(cfg)
    }
}

impl BnbArgs {
    fn apply(&self, cfg: &mut Config) {
        let o = &mut cfg.bnb;
        if let Some(r) = self.branch_rule {
            o.branch_rule = r;
        }
        if let Some(s) = self.search_order {
            o.search_order = s;
        }
        if let Some(i) = self.incumbent {
            o.incumbent_init = i;
        }
        if let Some(p) = self.prune_ties {
            o.prune_ties = p;
        }
        if self.timeout_ms.is_some() {
            o.time_limit_ms = self.timeout_ms;
        }
    }
}

fn run(cli: &Cli) -> Result<(Report, Option<PathBuf>)> {
    let (common, report) = match &cli.command {
        Command::GapScan(common) => (common, harness::gap_scan(&common.config()?)?),
        Command::NodesScan { common, bnb } => {
            let mut cfg = common.config()?;
            bnb.apply(&mut cfg);
            (common, harness::nodes_scan(&cfg)?)
        }
        Command::StructureScan { common, zeta, d } => {
            let mut cfg = common.config()?;
            cfg.zeta = zeta.or(cfg.zeta);
            cfg.d = d.or(cfg.d);
            (common, harness::structure_scan(&cfg)?)
        }
        Command::Witness { common, d, depth } => {
            let mut cfg = common.config()?;
            cfg.d = d.or(cfg.d);
            if let Some(depth) = depth {
                cfg.depth = *depth;
            }
            (common, harness::witness(&cfg)?)
        }
        Command::Solve {
            common,
            input,
            method,
            bnb,
        } => {
            let mut cfg = common.config()?;
            if input.is_some() {
                cfg.input = input.clone();
            }
            if let Some(m) = method {
                cfg.method = *m;
            }
            bnb.apply(&mut cfg);
            (common, harness::solve(&cfg)?)
        }
    };
    let path = harness::output_path(common.out.as_deref(), &report);
    Ok((report, path))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((report, path)) => {
            let written = match &path {
                Some(p) => harness::write_report(p, &report),
                None => std::io::stdout()
                    .write_all(report.text.as_bytes())
                    .map_err(Into::into),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            for s in &report.soft_failures {
                eprintln!("soft check failed: {s}");
            }
            if report.guard_hits > 0 {
                eprintln!("{} rows hit a size guard or time limit", report.guard_hits);
            }
            ExitCode::from(report.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::error_exit_code(&e))
        }
    }
}

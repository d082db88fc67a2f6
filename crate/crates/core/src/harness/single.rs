use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Config, Report, SCHEMA_VERSION, TOOL_VERSION};
use crate::assignment::{solve_ap, Restriction};
use crate::bnb::{build_witness_tree, solve_bnb, BnbRun, WitnessChecks};
use crate::error::{Error, Result};
use crate::exact::{brute_force_atsp, held_karp, HELD_KARP_MAX_N};
use crate::instance::CostMatrix;
use crate::tour::karp_patch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bnb,
    HeldKarp,
    Brute,
    Patch,
}

#[derive(Serialize)]
struct InstanceInfo<'a> {
    n: usize,
    seed: Option<u64>,
    generator_id: &'a str,
}

impl<'a> InstanceInfo<'a> {
    fn of(c: &'a CostMatrix) -> Self {
        Self {
            n: c.n(),
            seed: c.seed(),
            generator_id: c.generator_id(),
        }
    }
}

fn render_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// The single (n, seed) cell a one-instance command runs on.
fn single_cell(cfg: &Config) -> Result<(usize, u64)> {
    match (cfg.n.as_slice(), cfg.seed_count()) {
        ([n], 1) => Ok((*n, cfg.seed_start)),
        _ => Err(Error::InvalidOptions(
            "this command takes exactly one n and one seed".into(),
        )),
    }
}

#[derive(Serialize)]
struct WitnessOutput<'a> {
    schema: u32,
    version: &'static str,
    command: &'static str,
    config: &'a Config,
    instance: InstanceInfo<'a>,
    epsilon: f64,
    d: usize,
    depth: usize,
    alt_threshold: f64,
    z_ap: f64,
    leaf_count: usize,
    expected_leaves: usize,
    complete: bool,
    shortfall_nodes: usize,
    checks: WitnessChecks,
    max_leaf_cost_minus_z_ap: f64,
    z_atsp: Option<f64>,
    leaves_below_z_atsp: Option<bool>,
}

/// Builds and checks one witness tree, comparing its leaves with the
/// optimal tour when that is computable.
pub fn witness(config: &Config) -> Result<Report> {
    let cfg = config.resolved(&[15], 1);
    cfg.validate()?;
    let (n, seed) = single_cell(&cfg)?;
    let c = cfg.instance(n, seed)?;
    let params = cfg.params(n)?;
    let tree = build_witness_tree(&c, &params, cfg.depth)?;
    let z_atsp = (n <= HELD_KARP_MAX_N).then(|| held_karp(&c)).transpose()?.map(|(z, _)| z);
    let max_leaf = tree.max_leaf_cost();
    let below = z_atsp.map(|z| max_leaf < z);
    let out = WitnessOutput {
        schema: SCHEMA_VERSION,
        version: TOOL_VERSION,
        command: "witness",
        config: &cfg,
        instance: InstanceInfo::of(&c),
        epsilon: params.epsilon,
        d: params.d,
        depth: cfg.depth,
        alt_threshold: params.alt_threshold,
        z_ap: tree.root_value,
        leaf_count: tree.leaf_count(),
        expected_leaves: params.d.pow(cfg.depth as u32),
        complete: tree.complete,
        shortfall_nodes: tree.nodes.iter().filter(|v| v.shortfall).count(),
        checks: tree.checks,
        max_leaf_cost_minus_z_ap: max_leaf - tree.root_value,
        z_atsp,
        leaves_below_z_atsp: below,
    };
    let mut soft = Vec::new();
    if !tree.complete {
        soft.push("fewer than d alternatives at some node".into());
    }
    if !tree.checks.all() {
        soft.push(format!("witness checks failed: {:?}", tree.checks));
    }
    if tree.complete && below == Some(false) {
        soft.push("some leaf matching is not cheaper than the optimal tour".into());
    }
    Ok(Report {
        command: "witness",
        extension: "json",
        text: render_json(&out)?,
        soft_failures: soft,
        guard_hits: 0,
    })
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    schema: u32,
    version: &'static str,
    command: &'static str,
    config: &'a Config,
    instance: InstanceInfo<'a>,
    method: Method,
    cost: f64,
    tour: Vec<usize>,
    z_ap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    run: Option<BnbRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runtime_ms: Option<f64>,
}

/// Solves one instance, read from `config.input` or generated from the
/// single configured (n, seed).
pub fn solve(config: &Config) -> Result<Report> {
    let cfg = if config.input.is_some() {
        config.clone()
    } else {
        config.resolved(&[12], 1)
    };
    cfg.validate()?;
    let c = match &cfg.input {
        Some(path) => CostMatrix::load(path)?,
        None => {
            let (n, seed) = single_cell(&cfg)?;
            cfg.instance(n, seed)?
        }
    };
    let started = Instant::now();
    let z_ap = solve_ap(&c, &Restriction::empty(c.n()))?.value;
    let mut run = None;
    let (cost, tour) = match cfg.method {
        Method::Bnb => {
            let r = solve_bnb(&c, &cfg.bnb)?;
            let out = (r.cost, r.tour.order.clone());
            run = Some(r);
            out
        }
        Method::HeldKarp => {
            let (z, t) = held_karp(&c)?;
            (z, t.order)
        }
        Method::Brute => {
            let (z, t) = brute_force_atsp(&c)?;
            (z, t.order)
        }
        Method::Patch => {
            let t = karp_patch(&c, &solve_ap(&c, &Restriction::empty(c.n()))?);
            (t.cost, t.order)
        }
    };
    let runtime_ms = cfg.timing.then(|| started.elapsed().as_secs_f64() * 1e3);
    let guard_hits = usize::from(run.as_ref().is_some_and(|r| !r.complete));
    let out = SolveOutput {
        schema: SCHEMA_VERSION,
        version: TOOL_VERSION,
        command: "solve",
        config: &cfg,
        instance: InstanceInfo::of(&c),
        method: cfg.method,
        cost,
        tour,
        z_ap,
        run,
        runtime_ms,
    };
    Ok(Report {
        command: "solve",
        extension: "json",
        text: render_json(&out)?,
        soft_failures: Vec::new(),
        guard_hits,
    })
}

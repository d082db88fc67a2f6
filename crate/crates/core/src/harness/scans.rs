use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{fit_line, median, opt, opt_real, quantile, real, Config, Report, Table};
use crate::assignment::{alternatives, basis_tree, solve_ap, AnalysisParams, Restriction, TIGHT_TOLERANCE};
use crate::bnb::{solve_bnb, verify_counting_bound, BnbRun};
use crate::error::{Error, Result};
use crate::exact::{held_karp, HELD_KARP_MAX_N};
use crate::instance::CostMatrix;
use crate::structure::{
    ab_diameter, build_neighbor_digraph, contract_and_degrees, max_dual_magnitude, max_matching_edge_cost,
    BackwardWeight, DiameterMode,
};

/// Largest n the nodes scan will attempt.
pub const NODES_SCAN_MAX_N: usize = 40;
/// Largest n at which the nodes scan also checks the counting bound.
pub const COUNTING_CHECK_MAX_N: usize = 12;
/// Soft limit on the fraction of seeds whose gap is within n^(-3/2).
pub const GAP_SOFT_LIMIT: f64 = 0.2;
/// Soft lower limit on the fraction of seeds meeting each structure bound.
pub const STRUCTURE_SOFT_FRACTION: f64 = 0.9;

const PREFIX: [&str; 11] = [
    "experiment",
    "n",
    "seed",
    "generator_id",
    "control",
    "epsilon",
    "zeta",
    "gamma",
    "d",
    "gap_threshold",
    "alt_threshold",
];

fn columns(rest: &[&str]) -> Vec<String> {
    PREFIX.iter().chain(rest).map(|s| s.to_string()).collect()
}

fn prefix(experiment: &str, c: &CostMatrix, control: bool, p: &AnalysisParams, zeta: usize) -> Vec<String> {
    vec![
        experiment.to_string(),
        c.n().to_string(),
        opt(c.seed()),
        c.generator_id().to_string(),
        control.to_string(),
        real(p.epsilon),
        zeta.to_string(),
        real(p.gamma),
        p.d.to_string(),
        real(p.gap_threshold),
        real(p.alt_threshold),
    ]
}

fn kebab<T: Serialize>(t: &T) -> String {
    serde_json::to_value(t)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn guard_message(e: &Error) -> Option<String> {
    matches!(e, Error::SizeGuard { .. }).then(|| e.to_string())
}

/// Z_ATSP - Z_AP per seed, against n^(-3/2).
pub fn gap_scan(config: &Config) -> Result<Report> {
    let cfg = config.resolved(&[20], 200);
    cfg.validate()?;
    let mut table = Table::new(columns(&["z_ap", "z_atsp", "gap", "gap_within_threshold", "error"]));

    struct Cell {
        row: Vec<String>,
        gap: Option<(f64, bool)>,
        guarded: bool,
    }
    let run = |c: &CostMatrix, control: bool| -> Result<Cell> {
        let p = cfg.params(c.n())?;
        let mut row = prefix("gap-scan", c, control, &p, p.zeta);
        let z_ap = solve_ap(c, &Restriction::empty(c.n()))?.value;
        match held_karp(c) {
            Ok((z, _)) => {
                let gap = z - z_ap;
                let within = gap <= p.gap_threshold;
                row.extend([real(z_ap), real(z), real(gap), within.to_string(), String::new()]);
                Ok(Cell { row, gap: Some((gap, within)), guarded: false })
            }
            Err(e) => {
                let msg = guard_message(&e).ok_or(e)?;
                row.extend([real(z_ap), String::new(), String::new(), String::new(), msg]);
                Ok(Cell { row, gap: None, guarded: true })
            }
        }
    };

    let cells: Vec<Result<Cell>> = cfg
        .cells()
        .par_iter()
        .map(|&(n, seed)| run(&cfg.instance(n, seed)?, false))
        .collect();
    let mut cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    let mut summary = Vec::new();
    let mut soft = Vec::new();
    let mut guard_hits = 0;
    let per_n = cfg.seed_count();
    for &n in &cfg.n {
        if n <= HELD_KARP_MAX_N {
            let control = CostMatrix::constant(n, 0.5)?;
            table.rows.push(run(&control, true)?.row);
        }
        let chunk: Vec<Cell> = cells.drain(..per_n).collect();
        let gaps: Vec<(f64, bool)> = chunk.iter().filter_map(|c| c.gap).collect();
        guard_hits += chunk.iter().filter(|c| c.guarded).count();
        table.rows.extend(chunk.into_iter().map(|c| c.row));
        if gaps.is_empty() {
            summary.push(format!("n={n} no seeds solved"));
            continue;
        }
        let within = gaps.iter().filter(|g| g.1).count();
        let prob = within as f64 / gaps.len() as f64;
        let holds = prob <= GAP_SOFT_LIMIT;
        summary.push(format!(
            "n={n} seeds={} within_threshold={within} probability={} soft_limit={GAP_SOFT_LIMIT} holds={holds}",
            gaps.len(),
            real(prob)
        ));
        let g: Vec<f64> = gaps.iter().map(|g| g.0).collect();
        let q = |x| opt_real(quantile(&g, x));
        summary.push(format!(
            "n={n} gap min={} q10={} q25={} median={} q75={} q90={} max={} mean={}",
            q(0.0),
            q(0.1),
            q(0.25),
            q(0.5),
            q(0.75),
            q(0.9),
            q(1.0),
            real(g.iter().sum::<f64>() / g.len() as f64)
        ));
        if !holds {
            soft.push(format!("gap probability {prob} exceeds {GAP_SOFT_LIMIT} at n={n}"));
        }
    }
    Ok(Report {
        command: "gap-scan",
        extension: "csv",
        text: table.render("gap-scan", &cfg, &summary)?,
        soft_failures: soft,
        guard_hits,
    })
}

/// Branch-and-bound node counts per seed, with medians and a growth fit.
pub fn nodes_scan(config: &Config) -> Result<Report> {
    let cfg = config.resolved(&[10, 12, 14, 16, 18, 20], 30);
    cfg.validate()?;
    let mut rest = vec![
        "branch_rule",
        "search_order",
        "incumbent_init",
        "prune_ties",
        "time_limit_ms",
        "nodes_explored",
        "nodes_pruned_by_bound",
        "nodes_fathomed_as_tours",
        "nodes_infeasible",
        "nodes_branched",
        "max_depth",
        "z_ap",
        "z_atsp",
        "complete",
        "matchings_below_z_atsp",
        "counting_bound_holds",
        "error",
    ];
    if cfg.timing {
        rest.push("runtime_ms");
    }
    let mut table = Table::new(columns(&rest));
    let o = &cfg.bnb;

    struct Cell {
        row: Vec<String>,
        nodes: Option<usize>,
        counting: Option<bool>,
        guarded: bool,
    }
    let cells: Vec<Result<Cell>> = cfg
        .cells()
        .par_iter()
        .map(|&(n, seed)| -> Result<Cell> {
            let c = cfg.instance(n, seed)?;
            let p = cfg.params(n)?;
            let mut row = prefix("nodes-scan", &c, false, &p, p.zeta);
            row.extend([
                kebab(&o.branch_rule),
                kebab(&o.search_order),
                kebab(&o.incumbent_init),
                o.prune_ties.to_string(),
                opt(o.time_limit_ms),
            ]);
            if n > NODES_SCAN_MAX_N {
                row.extend(std::iter::repeat_n(String::new(), 11));
                row.push(format!("nodes scan supports n <= {NODES_SCAN_MAX_N}"));
                if cfg.timing {
                    row.push(String::new());
                }
                return Ok(Cell { row, nodes: None, counting: None, guarded: true });
            }
            let started = Instant::now();
            let run: BnbRun = solve_bnb(&c, o)?;
            let elapsed = started.elapsed().as_secs_f64() * 1e3;
            let report = if run.complete && n <= COUNTING_CHECK_MAX_N {
                Some(verify_counting_bound(&run, &c)?)
            } else {
                None
            };
            row.extend([
                run.nodes_explored.to_string(),
                run.nodes_pruned_by_bound.to_string(),
                run.nodes_fathomed_as_tours.to_string(),
                run.nodes_infeasible.to_string(),
                run.nodes_branched.to_string(),
                run.max_depth.to_string(),
                real(run.root_bound),
                real(run.cost),
                run.complete.to_string(),
                opt(report.as_ref().map(|r| r.matchings_below)),
                opt(report.as_ref().map(|r| r.holds)),
                if run.complete { String::new() } else { "limit reached".into() },
            ]);
            if cfg.timing {
                row.push(real(elapsed));
            }
            Ok(Cell {
                row,
                nodes: run.complete.then_some(run.nodes_explored),
                counting: report.map(|r| r.holds),
                guarded: !run.complete,
            })
        })
        .collect();
    let mut cells = cells.into_iter().collect::<Result<Vec<_>>>()?;

    let mut summary = Vec::new();
    let mut soft = Vec::new();
    let mut guard_hits = 0;
    let mut medians = Vec::new();
    let per_n = cfg.seed_count();
    let xi = cfg.epsilon / 3.0;
    for &n in &cfg.n {
        let chunk: Vec<Cell> = cells.drain(..per_n).collect();
        guard_hits += chunk.iter().filter(|c| c.guarded).count();
        let nodes: Vec<f64> = chunk.iter().filter_map(|c| c.nodes).map(|x| x as f64).collect();
        let checked: Vec<bool> = chunk.iter().filter_map(|c| c.counting).collect();
        let violations = checked.iter().filter(|&&h| !h).count();
        table.rows.extend(chunk.into_iter().map(|c| c.row));
        let m = median(&nodes);
        summary.push(format!(
            "n={n} solved={} median_nodes={} counting_checked={} counting_violations={violations}",
            nodes.len(),
            opt_real(m),
            checked.len()
        ));
        if violations > 0 {
            soft.push(format!("counting bound violated on {violations} seeds at n={n}"));
        }
        if let Some(m) = m {
            medians.push((n, m));
        }
    }
    let increasing = medians.windows(2).all(|w| w[1].1 > w[0].1);
    summary.push(format!("medians_strictly_increasing={increasing}"));
    if !increasing {
        soft.push("median node counts are not strictly increasing in n".into());
    }
    let points: Vec<(f64, f64)> = medians
        .iter()
        .map(|&(n, m)| ((n as f64).powf(xi), m.ln()))
        .collect();
    match fit_line(&points) {
        Some((a, b)) => summary.push(format!(
            "fit ln(median_nodes) = a + b * n^xi xi={} a={} b={}",
            real(xi),
            real(a),
            real(b)
        )),
        None => summary.push("fit unavailable: fewer than two sizes".into()),
    }
    Ok(Report {
        command: "nodes-scan",
        extension: "csv",
        text: table.render("nodes-scan", &cfg, &summary)?,
        soft_failures: soft,
        guard_hits,
    })
}

struct StructureRow {
    row: Vec<String>,
    /// (unweighted diameter, weighted diameter, dual max, matching max) bounds met.
    holds: [bool; 4],
    unweighted: f64,
}

fn structure_cell(cfg: &Config, c: &CostMatrix, zeta: usize, control: bool) -> Result<StructureRow> {
    let n = c.n();
    let p = cfg.params(n)?;
    let f = Restriction::empty(n);
    let sol = solve_ap(c, &f)?;
    let g = build_neighbor_digraph(c, &f, &sol, zeta)?;
    let unweighted = ab_diameter(&g, DiameterMode::Unweighted);
    let weighted = ab_diameter(&g, DiameterMode::Weighted(BackwardWeight::Zero));
    let dual = max_dual_magnitude(&sol);
    let edge = max_matching_edge_cost(&sol, c);
    let alts = alternatives(c, &f, &p)?;
    let tree = basis_tree(c, &f, &sol, TIGHT_TOLERANCE);
    let contracted = contract_and_degrees(&tree, &sol)?;
    let diameter_bound = 3.0 / p.epsilon;
    let holds = [
        unweighted <= diameter_bound,
        weighted <= p.gamma,
        dual <= 2.0 * p.gamma,
        edge <= p.gamma,
    ];
    let mut row = prefix("structure-scan", c, control, &p, zeta);
    row.extend([
        real(unweighted),
        real(diameter_bound),
        holds[0].to_string(),
        real(weighted),
        holds[1].to_string(),
        real(dual),
        real(2.0 * p.gamma),
        holds[2].to_string(),
        real(edge),
        holds[3].to_string(),
        alts.items.len().to_string(),
        alts.shortfall.to_string(),
        real(contracted.leaf_fraction()),
        tree.completed_with_slack.to_string(),
    ]);
    Ok(StructureRow { row, holds, unweighted })
}

/// Neighbour-digraph diameters, dual and matching-edge magnitudes,
/// alternatives and basis-tree shape per seed.
pub fn structure_scan(config: &Config) -> Result<Report> {
    let cfg = config.resolved(&[500], 50);
    cfg.validate()?;
    let mut table = Table::new(columns(&[
        "diameter_unweighted",
        "diameter_bound",
        "diameter_unweighted_holds",
        "diameter_weighted",
        "diameter_weighted_holds",
        "dual_max",
        "dual_bound",
        "dual_max_holds",
        "matching_edge_max",
        "matching_edge_max_holds",
        "alternatives_found",
        "alternatives_shortfall",
        "leaf_fraction",
        "basis_completed_with_slack",
    ]));
    let cells: Vec<Result<StructureRow>> = cfg
        .cells()
        .par_iter()
        .map(|&(n, seed)| {
            let c = cfg.instance(n, seed)?;
            let zeta = cfg.zeta.unwrap_or(cfg.params(n)?.zeta);
            structure_cell(&cfg, &c, zeta, false)
        })
        .collect();
    let mut cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    let mut summary = Vec::new();
    let mut soft = Vec::new();
    let names = ["diameter_unweighted", "diameter_weighted", "dual_max", "matching_edge_max"];
    for &n in &cfg.n {
        // Saturated neighbourhoods make every B vertex one step away.
        let control_matrix = cfg.instance(n, cfg.seed_start)?;
        let control = structure_cell(&cfg, &control_matrix, n - 1, true)?;
        let control_ok = control.unweighted == 1.0;
        table.rows.push(control.row);
        summary.push(format!("n={n} control zeta={} diameter_unweighted={} holds={control_ok}", n - 1, real(control.unweighted)));
        if !control_ok {
            soft.push(format!("saturated control diameter is not 1 at n={n}"));
        }
        let chunk: Vec<StructureRow> = cells.drain(..cfg.seed_count()).collect();
        let k = chunk.len() as f64;
        for (b, name) in names.iter().enumerate() {
            let frac = chunk.iter().filter(|r| r.holds[b]).count() as f64 / k;
            let holds = frac >= STRUCTURE_SOFT_FRACTION;
            summary.push(format!(
                "n={n} {name} fraction_within_bound={} soft_min={STRUCTURE_SOFT_FRACTION} holds={holds}",
                real(frac)
            ));
            if !holds {
                soft.push(format!("{name} bound holds on only {frac} of seeds at n={n}"));
            }
        }
        table.rows.extend(chunk.into_iter().map(|r| r.row));
    }
    Ok(Report {
        command: "structure-scan",
        extension: "csv",
        text: table.render("structure-scan", &cfg, &summary)?,
        soft_failures: soft,
        guard_hits: 0,
    })
}

//! Subcommand bodies.

use std::io::Write;

use rayon::prelude::*;
use treesplit::analytics::{asymptotic_throughput, scan_windowed_mst, CriTable, SplitParams};
use treesplit::crp::{export_tree, run_cri, NodeFate, ProtocolKind, ScriptedCoins, SeededCoins, SplitCoins};
use treesplit::signal::PacketId;
use treesplit::traffic::{
    collision_degree_distribution, collisions_per_cri_cdf, delay_stats, feedback_cost, mean_packets_in_system,
    run_replications, AccessPolicy, MetricsReport, SimConfig,
};

use crate::config::ExperimentConfig;
use crate::emit::{fmt_float, Cell, Meta, OutDir, Table};
use crate::CliError;

fn params(cfg: &ExperimentConfig) -> Result<SplitParams, CliError> {
    Ok(SplitParams::new(cfg.p)?)
}

fn say(stdout: &mut dyn Write, line: String) {
    let _ = writeln!(stdout, "{line}");
}

fn config_err(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

pub fn analytic(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    if cfg.n_max == 0 {
        return Err(config_err("n_max", "must be at least 1"));
    }
    let mut table = CriTable::build(params(cfg)?, cfg.n_max);
    let mut out = Table::new(&["n", "L_n", "T_n"]);
    for n in 1..=cfg.n_max {
        let s = table.stats(n);
        out.push(vec![n.into(), s.expected_length.into(), s.throughput.into()]);
    }
    let meta = Meta::new("analytic", cfg);
    let mut dir = OutDir::create(cfg.resolve_out_dir())?;
    let path = dir.write_csv("analytic.csv", &meta, &out)?;
    let last = table.stats(cfg.n_max);
    say(
        stdout,
        format!(
            "analytic p={} n=1..{}: T_{}={} -> {}",
            fmt_float(cfg.p),
            cfg.n_max,
            cfg.n_max,
            fmt_float(last.throughput),
            path.display()
        ),
    );
    Ok(())
}

pub fn asymptote(cfg: &ExperimentConfig, grid: &[f64], stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut out = Table::new(&["p", "throughput"]);
    for &p in grid {
        let params = SplitParams::new(p).map_err(|e| config_err("p_grid", e.to_string()))?;
        out.push(vec![p.into(), asymptotic_throughput(params).into()]);
    }
    let meta = Meta::new("asymptote", cfg);
    let mut dir = OutDir::create(cfg.resolve_out_dir())?;
    let path = dir.write_csv("asymptote.csv", &meta, &out)?;
    for row in &out.rows {
        if let (Cell::Float(p), Cell::Float(t)) = (&row[0], &row[1]) {
            say(stdout, format!("asymptote p={}: {}", fmt_float(*p), fmt_float(*t)));
        }
    }
    say(stdout, format!("asymptote -> {}", path.display()));
    Ok(())
}

pub fn windowed_scan(
    cfg: &ExperimentConfig,
    load_min: f64,
    load_max: f64,
    points: usize,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    if !(load_min.is_finite() && load_min > 0.0) {
        return Err(config_err("load_min", format!("must be positive, got {load_min}")));
    }
    if !(load_max.is_finite() && load_max >= load_min) {
        return Err(config_err(
            "load_max",
            format!("must be at least load_min, got {load_max}"),
        ));
    }
    if points == 0 {
        return Err(config_err("points", "must be positive"));
    }
    let grid: Vec<f64> = if points == 1 {
        vec![load_min]
    } else {
        let (a, b) = (load_min.ln(), load_max.ln());
        (0..points)
            .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
            .collect()
    };
    let params = params(cfg)?;
    let scan = scan_windowed_mst(&grid, params)?;
    let mut out = Table::new(&["load", "expected_cri", "rate"]);
    for &(load, rate) in &scan.points {
        out.push(vec![load.into(), (load / rate).into(), rate.into()]);
    }
    let meta = Meta::new("windowed-scan", cfg);
    let mut dir = OutDir::create(cfg.resolve_out_dir())?;
    let path = dir.write_csv("windowed_scan.csv", &meta, &out)?;
    say(
        stdout,
        format!(
            "windowed-scan p={} {} loads: best rate {} at load {} (gated limit {}) -> {}",
            fmt_float(cfg.p),
            grid.len(),
            fmt_float(scan.best_rate),
            fmt_float(scan.best_load),
            fmt_float(asymptotic_throughput(params)),
            path.display()
        ),
    );
    Ok(())
}

fn sim_config(cfg: &ExperimentConfig, protocol: ProtocolKind, lambda: f64, seed: u64) -> SimConfig {
    SimConfig {
        protocol,
        policy: cfg.policy,
        lambda,
        budget: cfg.budget,
        seed,
        p: cfg.p,
    }
}

/// All (protocol, rate, replication) runs in a fixed order, executed in
/// parallel. Replication `i` uses seed `seed + i`.
fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<MetricsReport>, CliError> {
    let seed = cfg.require_seed()?;
    let lambdas = cfg.lambdas()?;
    let seeds: Vec<u64> = (0..u64::from(cfg.replications)).map(|i| seed.wrapping_add(i)).collect();
    let jobs: Vec<(ProtocolKind, f64)> = cfg
        .protocols
        .iter()
        .flat_map(|&p| lambdas.iter().map(move |&l| (p, l)))
        .collect();
    let nested: Vec<Vec<MetricsReport>> = jobs
        .par_iter()
        .map(|&(p, l)| run_replications(&sim_config(cfg, p, l, seed), &seeds))
        .collect::<Result<_, _>>()?;
    Ok(nested.into_iter().flatten().collect())
}

const SUMMARY_COLUMNS: [&str; 25] = [
    "protocol",
    "policy",
    "delta",
    "lambda",
    "seed",
    "budget",
    "p",
    "throughput",
    "arrivals",
    "decoded",
    "backlog",
    "saturated",
    "backlog_slope",
    "delay_mean",
    "delay_var",
    "delay_p50",
    "delay_p95",
    "delay_p99",
    "delay_max",
    "in_system",
    "collision_slots",
    "degree2_share",
    "k_max",
    "feedback_bits_mean",
    "cris",
];

fn blank() -> Cell {
    Cell::Text(String::new())
}

fn summary_row(r: &MetricsReport, packet_bits: u32) -> Result<Vec<Cell>, CliError> {
    let c = &r.config;
    let (policy, delta) = match c.policy {
        AccessPolicy::Gated => ("gated", blank()),
        AccessPolicy::Windowed { delta } => ("windowed", delta.into()),
    };
    let delay = delay_stats(r).ok();
    let pick = |f: fn(&treesplit::traffic::DelayStats) -> Cell| delay.as_ref().map_or_else(blank, f);
    let share2 = collision_degree_distribution(r, None)
        .ok()
        .map_or_else(blank, |d| d.get(&2).copied().unwrap_or(0.0).into());
    let cost = feedback_cost(r, packet_bits)?;
    Ok(vec![
        c.protocol.name().into(),
        policy.into(),
        delta,
        c.lambda.into(),
        c.seed.into(),
        c.budget.into(),
        c.p.into(),
        r.throughput.into(),
        r.arrivals.into(),
        r.packets_decoded.into(),
        r.terminal_backlog.into(),
        r.saturated.into(),
        r.backlog_slope.into(),
        pick(|d| d.mean.into()),
        pick(|d| d.variance.into()),
        pick(|d| d.p50.into()),
        pick(|d| d.p95.into()),
        pick(|d| d.p99.into()),
        pick(|d| d.max.into()),
        mean_packets_in_system(r).ok().map_or_else(blank, Cell::from),
        r.collision_slots().into(),
        share2,
        cost.k_max.into(),
        cost.mean_bits_per_slot.into(),
        r.cris.len().into(),
    ])
}

fn summary_table(reports: &[MetricsReport], packet_bits: u32) -> Result<Table, CliError> {
    let mut t = Table::new(&SUMMARY_COLUMNS);
    for r in reports {
        t.push(summary_row(r, packet_bits)?);
    }
    Ok(t)
}

fn summary_line(command: &str, r: &MetricsReport) -> String {
    let delay = delay_stats(r).map_or_else(|_| "n/a".to_string(), |d| fmt_float(d.mean));
    format!(
        "{command} {} lambda={} seed={}: throughput {} mean delay {} backlog {}{}",
        r.config.protocol,
        fmt_float(r.config.lambda),
        r.config.seed,
        fmt_float(r.throughput),
        delay,
        r.terminal_backlog,
        if r.saturated { " (saturated)" } else { "" }
    )
}

pub fn simulate(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    if cfg.protocols.len() != 1 {
        return Err(config_err(
            "protocols",
            "simulate runs one protocol; use compare for several",
        ));
    }
    if cfg.lambdas()?.len() != 1 {
        return Err(config_err("lambda", "simulate runs one rate; use sweep for a grid"));
    }
    let reports = run_grid(cfg)?;
    let meta = Meta::new("simulate", cfg);
    let mut dir = OutDir::create(cfg.resolve_out_dir())?;
    dir.write_json("simulate.json", &meta, "reports", &reports)?;
    let path = dir.write_csv("simulate.csv", &meta, &summary_table(&reports, cfg.packet_bits)?)?;
    for r in &reports {
        say(stdout, summary_line("simulate", r));
    }
    say(stdout, format!("simulate -> {}", path.display()));
    Ok(())
}

pub fn sweep(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let reports = run_grid(cfg)?;
    let mut t = Table::new(&[
        "lambda",
        "protocol",
        "mean",
        "var",
        "p50",
        "p95",
        "n_samples",
        "in_system",
        "throughput",
        "saturated",
        "seed",
    ]);
    for r in &reports {
        let d = delay_stats(r).ok();
        t.push(vec![
            r.config.lambda.into(),
            r.config.protocol.name().into(),
            d.map_or_else(blank, |d| d.mean.into()),
            d.map_or_else(blank, |d| d.variance.into()),
            d.map_or_else(blank, |d| d.p50.into()),
            d.map_or_else(blank, |d| d.p95.into()),
            r.delay_samples().into(),
            mean_packets_in_system(r).ok().map_or_else(blank, Cell::from),
            r.throughput.into(),
            r.saturated.into(),
            r.config.seed.into(),
        ]);
    }
    let meta = Meta::new("sweep", cfg);
    let mut dir = OutDir::create(cfg.resolve_out_dir())?;
    let path = dir.write_csv("delay.csv", &meta, &t)?;
    for r in &reports {
        say(stdout, summary_line("sweep", r));
    }
    say(stdout, format!("sweep {} runs -> {}", reports.len(), path.display()));
    Ok(())
}

pub fn compare(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let reports = run_grid(cfg)?;
    let meta = Meta::new("compare", cfg);
    let mut dir = OutDir::create(cfg.resolve_out_dir())?;
    let path = dir.write_csv("compare.csv", &meta, &summary_table(&reports, cfg.packet_bits)?)?;

    let key = |r: &MetricsReport| -> Vec<Cell> {
        vec![
            r.config.protocol.name().into(),
            r.config.lambda.into(),
            r.config.seed.into(),
        ]
    };
    let mut delay = Table::new(&["protocol", "lambda", "seed", "delay", "count"]);
    let mut degree = Table::new(&["protocol", "lambda", "seed", "degree", "count", "share"]);
    let mut skips = Table::new(&["protocol", "lambda", "seed", "k", "count", "share"]);
    let mut cdf = Table::new(&["protocol", "lambda", "seed", "collisions", "cdf"]);
    for r in &reports {
        for (&d, &c) in &r.delay_hist {
            delay.push([key(r), vec![d.into(), c.into()]].concat());
        }
        let total: u64 = r.collision_degree_hist.values().sum();
        for (&d, &c) in &r.collision_degree_hist {
            degree.push([key(r), vec![d.into(), c.into(), (c as f64 / total as f64).into()]].concat());
        }
        let total: u64 = r.feedback_k_hist.values().sum();
        for (&k, &c) in &r.feedback_k_hist {
            skips.push([key(r), vec![k.into(), c.into(), (c as f64 / total as f64).into()]].concat());
        }
        if let Ok(dist) = collisions_per_cri_cdf(r) {
            for &(c, v) in &dist.cdf {
                cdf.push([key(r), vec![c.into(), v.into()]].concat());
            }
        }
    }
    dir.write_csv("compare_delay_hist.csv", &meta, &delay)?;
    dir.write_csv("compare_collision_degree.csv", &meta, &degree)?;
    dir.write_csv("compare_skip_values.csv", &meta, &skips)?;
    dir.write_csv("compare_collisions_per_cri.csv", &meta, &cdf)?;
    for r in &reports {
        say(stdout, summary_line("compare", r));
    }
    say(stdout, format!("compare {} runs -> {}", reports.len(), path.display()));
    Ok(())
}

/// Parses `id=LR…` entries separated by commas.
fn parse_script(text: &str) -> Result<Vec<(PacketId, String)>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|entry| {
            let (id, letters) = entry
                .split_once('=')
                .ok_or_else(|| config_err("script", format!("expected id=LR..., got `{entry}`")))?;
            let id: u64 = id
                .trim()
                .parse()
                .map_err(|_| config_err("script", format!("`{id}` is not a user id")))?;
            Ok((PacketId(id), letters.trim().to_string()))
        })
        .collect()
}

pub fn tree(cfg: &ExperimentConfig, script: Option<&str>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let seed = cfg.require_seed()?;
    let users = cfg
        .users
        .ok_or_else(|| config_err("users", "the number of users is required"))?;
    if cfg.protocols.len() != 1 {
        return Err(config_err("protocols", "tree draws one protocol"));
    }
    let protocol = cfg.protocols[0];
    let ids: Vec<PacketId> = (1..=users).map(PacketId).collect();
    let mut coins: Box<dyn SplitCoins> = match script {
        Some(text) => {
            let entries = parse_script(text)?;
            if let Some((id, _)) = entries.iter().find(|(id, _)| !ids.contains(id)) {
                return Err(config_err(
                    "script",
                    format!("user {} is not among users 1..={users}", id.0),
                ));
            }
            Box::new(
                ScriptedCoins::from_letters(entries)
                    .map_err(|e| config_err("script", e))?
                    .with_fallback(seed),
            )
        }
        None => Box::new(SeededCoins::new(seed)),
    };
    let trace = run_cri(protocol, &ids, cfg.p, coins.as_mut())?;
    let meta = Meta::new("tree", cfg);
    let mut dir = OutDir::create(cfg.resolve_out_dir())?;
    let dot = format!("{}{}", meta.comment_line("//"), export_tree(&trace));
    let path = dir.write_bytes("tree.dot", dot.as_bytes())?;
    let mut lines = serde_json::to_string(&serde_json::json!({ "meta": meta })).expect("meta serialises");
    lines.push('\n');
    lines.push_str(&trace.to_json_lines());
    dir.write_bytes("tree.jsonl", lines.as_bytes())?;
    let solid = trace
        .nodes
        .iter()
        .filter(|n| matches!(n.fate, NodeFate::Transmitted { .. }))
        .count();
    let dashed = trace.nodes.iter().filter(|n| n.is_skipped()).count();
    say(
        stdout,
        format!(
            "tree {protocol} users={users} seed={seed}: {} slots, {solid} transmitted and {dashed} skipped nodes -> {}",
            trace.length(),
            path.display()
        ),
    );
    Ok(())
}

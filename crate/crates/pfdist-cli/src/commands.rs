use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use pfdist::baseline::{kac_expected, random_poly_distribution, MAX_RANDOM_DEGREE};
use pfdist::distribution::{
    histogram_csv, run_distribution, sample_sphere, summarize, trial_rng, DistributionConfig,
    DistributionError, DistributionSummary,
};
use pfdist::exec::Pool;
use pfdist::monodromy::to_pairs;
use pfdist::network::Network;
use pfdist::regions::{
    colormap_csv, default_colormap, region_csv, render_ppm, sample_region, RegionSpec,
    RegionsError,
};
use pfdist::solver::{
    build_start_set, check_tree_trivial, max_real_construction, solve_all,
    verify_infinite_family, GroupMode, SolutionSet, SolveError, SolveOptions, StartSet,
};
use pfdist::tracker::TrackOptions;

use crate::{
    BoundsArgs, Cli, Cmd, DistributionArgs, GroupModeArg, KacArgs, RegionsArgs, SolveArgs,
    TheoremArg, VerifyArgs, EXIT_DEGENERATE, EXIT_INCOMPLETE, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE,
};

pub enum CmdError {
    Usage(String),
    Runtime(String),
}

fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

fn runtime(msg: impl ToString) -> CmdError {
    CmdError::Runtime(msg.to_string())
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

pub struct Ctx {
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub pool: Pool,
}

pub fn run(cli: Cli) -> i32 {
    let seed = match cli.seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            println!("seed: {s}");
            s
        }
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| std::env::var_os("PFDIST_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_RUNTIME;
    }
    let ctx = Ctx { seed, workers: cli.workers, pool: Pool::new(cli.workers), out_dir };
    let result = match cli.command {
        Cmd::Solve(args) => cmd_solve(&ctx, &args),
        Cmd::Distribution(args) => cmd_distribution(&ctx, &args),
        Cmd::Regions(args) => cmd_regions(&ctx, &args),
        Cmd::Kac(args) => cmd_kac(&ctx, &args),
        Cmd::Bounds(args) => cmd_bounds(&ctx, &args),
        Cmd::Verify(args) => cmd_verify(&ctx, &args),
    };
    match result {
        Ok(code) => code,
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CmdError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: Value,
    seed: u64,
    version: &'a str,
    tolerances: Value,
    start_set_sha256: Option<String>,
    created_at_unix: u64,
}

fn write_manifest(
    ctx: &Ctx,
    command: &str,
    config: Value,
    tolerances: Value,
    start_set_sha256: Option<String>,
) -> Result<(), CmdError> {
    let manifest = RunManifest {
        command,
        config,
        seed: ctx.seed,
        version: env!("CARGO_PKG_VERSION"),
        tolerances,
        start_set_sha256,
        created_at_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let path = ctx.out_dir.join(format!("{command}-manifest.json"));
    fs::write(path, serde_json::to_string_pretty(&manifest).map_err(runtime)? + "\n")?;
    Ok(())
}

fn track_tolerances(t: &TrackOptions, o: &SolveOptions) -> Value {
    json!({
        "corrector_tol": t.corrector_tol,
        "endgame_tol": t.endgame_tol,
        "cond_limit": t.cond_limit,
        "real_tol": o.real_tol,
        "dedup_tol": o.dedup_tol,
    })
}

fn parse_topology(spec: &str) -> Result<Network, CmdError> {
    let bad = || usage("topology must be cycle:N, complete:N, or tree:EDGES");
    let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
    match kind {
        "cycle" => {
            let n: usize = rest.parse().map_err(|_| bad())?;
            Network::cycle(n).map_err(|e| usage(format!("bad topology: {e}")))
        }
        "complete" => {
            let n: usize = rest.parse().map_err(|_| bad())?;
            Network::complete(n).map_err(|e| usage(format!("bad topology: {e}")))
        }
        "tree" => {
            let text = match rest.strip_prefix('@') {
                Some(path) => fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read {path}: {e}")))?,
                None => rest.to_string(),
            };
            let mut edges = Vec::new();
            for tok in text.split(|c: char| c == ',' || c.is_whitespace()) {
                if tok.is_empty() {
                    continue;
                }
                let (a, b) = tok
                    .split_once('-')
                    .ok_or_else(|| usage(format!("bad edge {tok:?}, expected A-B")))?;
                let a: usize = a.trim().parse().map_err(|_| usage(format!("bad edge {tok:?}")))?;
                let b: usize = b.trim().parse().map_err(|_| usage(format!("bad edge {tok:?}")))?;
                edges.push((a, b));
            }
            let n = edges.iter().map(|&(a, b)| a.max(b)).max().map_or(0, |m| m + 1);
            Network::tree_from_edges(n, &edges).map_err(|e| usage(format!("bad topology: {e}")))
        }
        _ => Err(bad()),
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, CmdError> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| usage(format!("bad number {t:?}"))))
        .collect()
}

fn group_mode(arg: GroupModeArg) -> GroupMode {
    match arg {
        GroupModeArg::Auto => GroupMode::Auto,
        GroupModeArg::YNegation => GroupMode::YNegationOnly,
    }
}

/// Load the start set from `path` when it exists, otherwise build one and,
/// if a path was given, save it there for the next run.
fn resolve_start_set(
    ctx: &Ctx,
    net: &Network,
    mode: GroupMode,
    path: Option<&Path>,
) -> Result<StartSet, CmdError> {
    let track = TrackOptions::default();
    if let Some(p) = path {
        if p.exists() {
            let set = StartSet::from_json(&fs::read_to_string(p)?)
                .map_err(|e| usage(format!("cannot parse start set {}: {e}", p.display())))?;
            if !set.matches(net) {
                return Err(usage("start set does not match the topology and injections"));
            }
            if set.group_mode != mode {
                return Err(usage(
                    "start set was built under a different group mode; pass the matching --group-mode",
                ));
            }
            return Ok(set);
        }
    }
    let set = build_start_set(net, mode, ctx.seed, &track, &ctx.pool).map_err(runtime)?;
    if !set.complete {
        eprintln!("warning: start set may be missing orbits (no closed-form count to stop on)");
    }
    if let Some(p) = path {
        fs::write(p, set.to_json() + "\n")?;
    }
    Ok(set)
}

fn solutions_json(net: &Network, sol: &SolutionSet) -> Value {
    json!({
        "network": net.family_label(),
        "n": net.n(),
        "edges": net.edges(),
        "injections": net.injections(),
        "b": sol.b,
        "expected_nontrivial": sol.expected,
        "found_nontrivial": sol.found,
        "completeness": sol.completeness,
        "degenerate": sol.degenerate,
        "paths_tracked": sol.paths_tracked,
        "trivial": sol.trivial.iter().map(|p| to_pairs(p)).collect::<Vec<_>>(),
        "nontrivial": sol.nontrivial.iter().map(|p| to_pairs(p)).collect::<Vec<_>>(),
        "real": sol.real,
        "real_nontrivial": sol.real_count(),
    })
}

fn map_solve_err(e: SolveError) -> CmdError {
    match e {
        SolveError::ZeroParameters
        | SolveError::BadParameterCount { .. }
        | SolveError::StartSetMismatch
        | SolveError::UnsupportedFamily(_)
        | SolveError::NotATree => usage(e.to_string()),
        other => runtime(other.to_string()),
    }
}

fn cmd_solve(ctx: &Ctx, args: &SolveArgs) -> Result<i32, CmdError> {
    let mut net = parse_topology(&args.topology)?;
    if let Some(inj) = &args.injections {
        let v = parse_floats(inj)?;
        net = net.with_injections(&v).map_err(|e| usage(format!("bad injections: {e}")))?;
    }
    let b = if let Some(inline) = &args.b {
        parse_floats(inline)?
    } else if let Some(path) = &args.b_file {
        parse_floats(&fs::read_to_string(path)?)?
    } else {
        sample_sphere(&mut trial_rng(ctx.seed, 0), net.edge_count())
    };
    if b.len() != net.edge_count() {
        return Err(usage(format!(
            "{} susceptances given for {} edges",
            b.len(),
            net.edge_count()
        )));
    }
    let mode = group_mode(args.group_mode);
    let set = resolve_start_set(ctx, &net, mode, args.start_set.as_deref())?;
    let opts = SolveOptions::default();
    let mut rng = trial_rng(ctx.seed, 1);
    let sol = solve_all(&net, &set, &b, &opts, &mut rng, &ctx.pool).map_err(map_solve_err)?;

    fs::write(
        ctx.out_dir.join("solutions.json"),
        serde_json::to_string_pretty(&solutions_json(&net, &sol)).map_err(runtime)? + "\n",
    )?;
    write_manifest(
        ctx,
        "solve",
        json!({
            "topology": args.topology,
            "b": sol.b,
            "injections": net.injections(),
            "group_mode": format!("{:?}", mode),
            "workers": ctx.workers,
        }),
        track_tolerances(&opts.track, &opts),
        Some(set.sha256_hex()),
    )?;

    println!(
        "{}: {} nontrivial complex found of {} expected over {} paths",
        net.family_label(),
        sol.found,
        sol.expected,
        sol.paths_tracked
    );
    let total_real = sol.trivial.len() + sol.real_count();
    println!("{} real ({} nontrivial)", total_real, sol.real_count());
    if sol.degenerate {
        println!("degenerate parameters");
        return Ok(EXIT_DEGENERATE);
    }
    if sol.found < sol.expected {
        println!("incomplete: {} of {}", sol.found, sol.expected);
        return Ok(EXIT_INCOMPLETE);
    }
    Ok(EXIT_OK)
}

fn cmd_distribution(ctx: &Ctx, args: &DistributionArgs) -> Result<i32, CmdError> {
    let net = parse_topology(&args.topology)?;
    let log = match &args.resume {
        Some(p) => {
            if !p.exists() {
                return Err(usage(format!("resume log {} does not exist", p.display())));
            }
            p.clone()
        }
        None => {
            let p = ctx.out_dir.join("trials.jsonl");
            if p.exists() {
                return Err(usage(format!(
                    "{} already exists; pass --resume to continue it",
                    p.display()
                )));
            }
            p
        }
    };
    let mode = group_mode(args.group_mode);
    let set = resolve_start_set(ctx, &net, mode, args.start_set.as_deref())?;
    let cfg = DistributionConfig {
        trials: args.trials,
        seed: ctx.seed,
        alpha: args.alpha,
        chunk: args.chunk,
        max_failure_rate: args.max_failure_rate,
        ..DistributionConfig::default()
    };
    let opts = SolveOptions::default();
    let (_, dist) = run_distribution(&net, &set, &cfg, &opts, Some(&log), &ctx.pool).map_err(
        |e| match e {
            DistributionError::LogMismatch(m) => {
                usage(format!("log does not belong to this run: {m}"))
            }
            other => runtime(other),
        },
    )?;

    let summary = summarize(&net, &cfg, &dist);
    fs::write(ctx.out_dir.join("histogram.csv"), histogram_csv(&dist))?;
    fs::write(ctx.out_dir.join("summary.json"), summary.to_json() + "\n")?;
    write_manifest(
        ctx,
        "distribution",
        json!({
            "topology": args.topology,
            "trials": args.trials,
            "alpha": args.alpha,
            "chunk": args.chunk,
            "max_failure_rate": args.max_failure_rate,
            "log": log,
            "group_mode": format!("{:?}", mode),
            "workers": ctx.workers,
        }),
        track_tolerances(&opts.track, &opts),
        Some(set.sha256_hex()),
    )?;

    println!(
        "{}: {} trials, {} excluded, mean {:.4}, error bound {:.4} at alpha {}",
        net.family_label(),
        summary.trials,
        summary.excluded,
        summary.mean,
        summary.epsilon,
        summary.alpha
    );
    for (count, occ, p) in &summary.histogram {
        println!("  {count}: {occ} ({:.2}%)", 100.0 * p);
    }
    Ok(EXIT_OK)
}

fn cmd_regions(ctx: &Ctx, args: &RegionsArgs) -> Result<i32, CmdError> {
    let net = parse_topology(&args.topology)?;
    let free_list = parse_floats(&args.free)?;
    if free_list.len() != 3 || free_list.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
        return Err(usage("--free needs exactly 3 edge indices"));
    }
    let free = [free_list[0] as usize, free_list[1] as usize, free_list[2] as usize];
    let mut fixed = Vec::new();
    for pair in &args.fixed {
        let (e, v) = pair
            .split_once('=')
            .ok_or_else(|| usage(format!("bad --fixed {pair:?}, expected EDGE=VALUE")))?;
        let e: usize = e.trim().parse().map_err(|_| usage(format!("bad edge in {pair:?}")))?;
        let v: f64 = v.trim().parse().map_err(|_| usage(format!("bad value in {pair:?}")))?;
        fixed.push((e, v));
    }
    let spec = RegionSpec { free, fixed, width: args.width, height: args.height };
    let mode = group_mode(args.group_mode);
    let set = resolve_start_set(ctx, &net, mode, args.start_set.as_deref())?;
    let opts = SolveOptions::default();
    let map = sample_region(&net, &set, &spec, ctx.seed, &opts, &ctx.pool).map_err(|e| match e {
        RegionsError::BadSpec(m) => usage(m),
        RegionsError::Solve(s) => map_solve_err(s),
        other => runtime(other),
    })?;

    let colors = default_colormap();
    let ppm = render_ppm(&map, &colors).map_err(runtime)?;
    fs::write(ctx.out_dir.join("regions.ppm"), ppm)?;
    fs::write(ctx.out_dir.join("regions.csv"), region_csv(&map, &net))?;
    fs::write(ctx.out_dir.join("colormap.csv"), colormap_csv(&colors))?;
    write_manifest(
        ctx,
        "regions",
        json!({
            "topology": args.topology,
            "free": spec.free,
            "fixed": spec.fixed,
            "width": args.width,
            "height": args.height,
            "group_mode": format!("{:?}", mode),
            "workers": ctx.workers,
            "metadata": {
                "cells": map.cells.len(),
                "degenerate_fraction": map.degenerate_fraction(),
                "warning": map.warning(),
            },
        }),
        track_tolerances(&opts.track, &opts),
        Some(set.sha256_hex()),
    )?;

    println!(
        "{}x{} cells, {:.2}% flagged",
        args.width,
        args.height,
        100.0 * map.degenerate_fraction()
    );
    if let Some(w) = map.warning() {
        println!("warning: {w}");
    }
    Ok(EXIT_OK)
}

fn cmd_kac(ctx: &Ctx, args: &KacArgs) -> Result<i32, CmdError> {
    if !args.compare.is_empty() {
        let mut csv = String::from("network,mean,degree,kac_expected\n");
        let mut rows = Vec::new();
        for path in &args.compare {
            let summary = DistributionSummary::from_json(&fs::read_to_string(path)?)
                .map_err(|e| usage(format!("cannot parse {}: {e}", path.display())))?;
            let degree = summary.nontrivial.ok_or_else(|| {
                usage(format!("{} has no generic count to compare against", summary.network))
            })?;
            if degree < 1 {
                return Err(usage(format!("{} expects no nontrivial solutions", summary.network)));
            }
            let kac = kac_expected(degree as u32);
            csv.push_str(&format!("{},{},{degree},{kac}\n", summary.network, summary.mean));
            rows.push((summary.network, summary.mean, degree, kac));
        }
        fs::write(ctx.out_dir.join("comparison.csv"), &csv)?;
        write_manifest(
            ctx,
            "kac",
            json!({ "compare": args.compare, "workers": ctx.workers }),
            json!({ "quadrature_tol": 1e-10 }),
            None,
        )?;
        for (network, mean, degree, kac) in rows {
            println!("{network}: mean {mean:.4} vs {kac:.4} for a random degree-{degree} polynomial");
        }
        return Ok(EXIT_OK);
    }

    let degree = args.degree.ok_or_else(|| usage("pass --degree or --compare"))?;
    if degree < 1 {
        return Err(usage("--degree must be at least 1"));
    }
    let expected = kac_expected(degree);
    println!("expected real roots at degree {degree}: {expected:.4}");
    let mut out = json!({ "degree": degree, "kac_expected": expected });
    if let Some(trials) = args.mc_trials {
        if degree as usize > MAX_RANDOM_DEGREE {
            return Err(usage(format!(
                "Monte Carlo supports degree up to {MAX_RANDOM_DEGREE}"
            )));
        }
        let (_, dist) =
            random_poly_distribution(degree as usize, trials, ctx.seed, 0.01, &ctx.pool)
                .map_err(runtime)?;
        println!(
            "sampled mean over {} trials: {:.4} ({} excluded)",
            trials, dist.mean, dist.excluded
        );
        out["monte_carlo"] = json!({
            "trials": trials,
            "mean": dist.mean,
            "excluded": dist.excluded,
            "epsilon": dist.epsilon,
        });
    }
    fs::write(
        ctx.out_dir.join("kac.json"),
        serde_json::to_string_pretty(&out).map_err(runtime)? + "\n",
    )?;
    write_manifest(
        ctx,
        "kac",
        json!({ "degree": degree, "mc_trials": args.mc_trials, "workers": ctx.workers }),
        json!({ "quadrature_tol": 1e-10 }),
        None,
    )?;
    Ok(EXIT_OK)
}

fn cmd_bounds(ctx: &Ctx, args: &BoundsArgs) -> Result<i32, CmdError> {
    let net = parse_topology(&args.topology)?;
    let bounds = net
        .solution_count_bounds()
        .ok_or_else(|| runtime("no closed-form count for this topology"))?;
    write_manifest(
        ctx,
        "bounds",
        json!({
            "topology": args.topology,
            "total": bounds.total,
            "nontrivial": bounds.nontrivial,
        }),
        json!({}),
        None,
    )?;
    println!("{}: total {}, nontrivial {}", net.family_label(), bounds.total, bounds.nontrivial);
    Ok(EXIT_OK)
}

fn cmd_verify(ctx: &Ctx, args: &VerifyArgs) -> Result<i32, CmdError> {
    let net = parse_topology(&args.topology)?;
    let (pass, detail) = match args.theorem {
        TheoremArg::MaxReal => {
            let (b, total) = max_real_construction(&net).map_err(map_solve_err)?;
            let set = resolve_start_set(ctx, &net, GroupMode::Auto, None)?;
            let opts = SolveOptions::default();
            let mut rng = trial_rng(ctx.seed, 1);
            let sol = solve_all(&net, &set, &b, &opts, &mut rng, &ctx.pool).map_err(map_solve_err)?;
            let total_real = (sol.trivial.len() + sol.real_count()) as u64;
            (
                !sol.degenerate && sol.found >= sol.expected && total_real == total,
                format!("{total_real} real"),
            )
        }
        TheoremArg::InfiniteFamily => {
            let b = vec![1.0; net.edge_count()];
            let ok = verify_infinite_family(&net, &b).map_err(map_solve_err)?;
            (ok, "family residuals within tolerance".to_string())
        }
        TheoremArg::TreeTrivial => {
            let mut rng = trial_rng(ctx.seed, 0);
            let ok = check_tree_trivial(&net, args.trials, args.grid, &mut rng)
                .map_err(map_solve_err)?;
            (ok, format!("only trivial real solutions in {} trials", args.trials))
        }
    };
    write_manifest(
        ctx,
        "verify",
        json!({
            "theorem": format!("{:?}", args.theorem),
            "topology": args.topology,
            "trials": args.trials,
            "grid": args.grid,
            "pass": pass,
        }),
        json!({}),
        None,
    )?;
    if pass {
        println!("PASS, {detail}");
        Ok(EXIT_OK)
    } else {
        println!("FAIL, {detail}");
        Ok(EXIT_RUNTIME)
    }
}

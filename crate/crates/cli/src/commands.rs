//! Subcommand implementations. Each writes its human-readable report to `out`
//! and its CSV files under the configured output directory.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use stringnet::charsim::{self, Extinction, SimOptions, SimReport};
use stringnet::fdref::{crosscheck, CrosscheckReport};
use stringnet::network::{BoundaryKind, NetworkError, TimingReport};
use stringnet::spectrum::{
    bone_eigenvalues, eigen_family_for, eigen_residual, star_eigenvalues, EigenFamily, Geometry,
    SpectrumError,
};

use crate::config::{LoadedNetwork, RunConfig};
use crate::error::CliError;
use crate::table::{fixed, CsvFile};

pub const DEFAULT_OUTPUT: &str = "out";
pub const THREADS_VAR: &str = "STRINGNET_THREADS";

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(|e| CliError::io("<stdout>", e))?
    };
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn bc_name(bc: BoundaryKind) -> &'static str {
    match bc {
        BoundaryKind::Dirichlet => "dirichlet",
        BoundaryKind::Neumann => "neumann",
        BoundaryKind::Transparent => "transparent",
    }
}

fn describe_rescaling(net: &LoadedNetwork, out: &mut dyn Write) -> Result<(), CliError> {
    for r in &net.rescaled {
        say!(
            out,
            "rescaled edge {}-{}: length {} with speed {} becomes unit length with speed {}",
            r.from,
            r.to,
            r.length,
            r.speed,
            r.unit_speed
        );
    }
    Ok(())
}

fn edge_table(net: &LoadedNetwork, dir: &std::path::Path) -> Result<(), CliError> {
    let mut csv = CsvFile::create(&dir.join("edges.csv"), &["edge", "from", "to", "speed"])?;
    for e in 1..=net.tree.edge_count() {
        let (a, b) = net.endpoints(e);
        csv.record([e.to_string(), a.to_string(), b.to_string(), fixed(net.tree.speed(e))])?;
    }
    csv.finish()
}

pub fn validate(cfg: &RunConfig, out: &mut dyn Write) -> Result<LoadedNetwork, CliError> {
    let net = cfg.network()?;
    let tree = &net.tree;
    say!(
        out,
        "valid network: {} nodes, {} edges, {} root",
        tree.node_count(),
        tree.edge_count(),
        bc_name(tree.root_bc())
    );
    describe_rescaling(&net, out)?;
    for n in tree.internal_nodes() {
        say!(
            out,
            "node {}: k = {}, alpha = {}",
            tree.label(n),
            tree.degree(n),
            tree.alpha(n).unwrap()
        );
    }
    match tree.check_fts() {
        Ok(()) => say!(out, "finite-time condition alpha = k - 2 holds at every internal node"),
        Err(NetworkError::ConditionFtsViolated { node, alpha, expected }) => say!(
            out,
            "finite-time condition fails at node {}: alpha = {alpha}, k - 2 = {expected}",
            tree.label(node)
        ),
        Err(e) => return Err(e.into()),
    }
    Ok(net)
}

pub fn timing(cfg: &RunConfig, out: &mut dyn Write) -> Result<TimingReport, CliError> {
    let net = cfg.network()?;
    let tree = &net.tree;
    let report = tree.timing_report();
    describe_rescaling(&net, out)?;
    say!(out, "{:>6} {:>6} {:>6} {:>12} {:>12}", "edge", "from", "to", "speed", "t_i");
    for e in 1..=tree.edge_count() {
        let (a, b) = net.endpoints(e);
        say!(out, "{e:>6} {a:>6} {b:>6} {:>12.6} {:>12.6}", tree.speed(e), report.edge_times[e]);
    }
    say!(out, "root time T(R) = {}", report.root_time);
    for &(leaf, t) in &report.per_leaf {
        say!(out, "rooted at node {leaf}: T = {t}");
    }
    say!(out, "tree time T(T) = {}", report.tree_time);
    match report.predicted_extinction {
        Some(t) => say!(out, "predicted extinction at t = {t} ({} root)", bc_name(tree.root_bc())),
        None => say!(out, "no extinction prediction: finite-time condition fails"),
    }
    if let Some(dir) = &cfg.output {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut csv = CsvFile::create(&dir.join("timing.csv"), &["edge", "from", "to", "speed", "t"])?;
        for e in 1..=tree.edge_count() {
            let (a, b) = net.endpoints(e);
            csv.record([
                e.to_string(),
                a.to_string(),
                b.to_string(),
                fixed(tree.speed(e)),
                fixed(report.edge_times[e]),
            ])?;
        }
        csv.finish()?;
        let mut csv = CsvFile::create(&dir.join("leaves.csv"), &["node", "root_time"])?;
        for &(leaf, t) in &report.per_leaf {
            csv.record([leaf.to_string(), fixed(t)])?;
        }
        csv.finish()?;
    }
    Ok(report)
}

/// One-line extinction verdict.
pub fn extinction_summary(report: &SimReport) -> String {
    match (report.extinction, report.predicted_extinction) {
        (Extinction::At(t), Some(p)) if t <= p + report.dt + 1e-9 => {
            format!("extinct at t ≤ {p:.3} (below {:e} from t = {t:.6})", report.epsilon)
        }
        (Extinction::At(t), Some(p)) => format!(
            "extinct at t ≤ {t:.3}, later than the predicted {p:.3} (threshold {:e})",
            report.epsilon
        ),
        (Extinction::At(t), None) => {
            format!("extinct at t ≤ {t:.3} (threshold {:e}, no prediction)", report.epsilon)
        }
        (Extinction::HorizonTooShort { candidate }, _) => format!(
            "no extinction within horizon (below threshold from t = {candidate:.6} for less than one persistence window)"
        ),
        (Extinction::NotObserved, _) => "no extinction within horizon".to_string(),
    }
}

pub fn simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<SimReport, CliError> {
    let net = cfg.network()?;
    let tree = &net.tree;
    let init = cfg.initial_data(&net)?;
    let (dt, horizon) = (cfg.require_dt()?, cfg.require_horizon()?);
    if cfg.stride == 0 {
        return Err(CliError::config(&cfg.source, "stride", "stride must be at least 1"));
    }
    let options = SimOptions {
        stride: cfg.stride,
        epsilon: cfg.epsilon,
        snapshot_times: cfg.snapshots.clone(),
        ..SimOptions::default()
    };
    let report = charsim::run(tree, &init, dt, horizon, &options)?;
    let dir = output_dir(cfg)?;
    edge_table(&net, &dir)?;

    let mut energy = CsvFile::create(&dir.join("energy.csv"), &["t", "E", "sup_s", "sup_d"])?;
    for r in 0..report.times.len() {
        energy.row(&[report.times[r], report.energy[r], report.sup_s[r], report.sup_d[r]])?;
    }
    energy.finish()?;

    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(report.nodes.iter().map(|&n| format!("v_{}", tree.label(n))))
        .collect();
    let mut nodes = CsvFile::create(&dir.join("nodes.csv"), &header)?;
    for (r, &t) in report.times.iter().enumerate() {
        let row: Vec<f64> = std::iter::once(t).chain(report.node_velocity[r].iter().copied()).collect();
        nodes.row(&row)?;
    }
    nodes.finish()?;

    if !report.snapshots.is_empty() {
        let mut index = CsvFile::create(&dir.join("snapshots.csv"), &["file", "t"])?;
        for (i, snap) in report.snapshots.iter().enumerate() {
            let name = format!("snapshot_{i:03}.csv");
            let mut csv = CsvFile::create(&dir.join(&name), &["edge", "x", "u", "s", "d"])?;
            for e in &snap.edges {
                for j in 0..e.x.len() {
                    csv.record([e.edge.to_string(), fixed(e.x[j]), fixed(e.u[j]), fixed(e.s[j]), fixed(e.d[j])])?;
                }
            }
            csv.finish()?;
            index.record([name, fixed(snap.time)])?;
        }
        index.finish()?;
    }

    describe_rescaling(&net, out)?;
    say!(
        out,
        "simulated {} steps of dt = {dt} to t = {}; {} trace rows in {}",
        ((horizon / dt) - 1e-9).ceil().max(0.0) as u64,
        report.times.last().copied().unwrap_or(0.0),
        report.times.len(),
        dir.display()
    );
    match report.predicted_extinction {
        Some(p) => say!(out, "predicted extinction: t = {p}"),
        None => say!(out, "predicted extinction: none (finite-time condition fails)"),
    }
    say!(out, "{}", extinction_summary(&report));
    if report.extinction.time().is_some() {
        say!(out, "final state constant {} (spread {:e})", report.final_constant, report.final_spread);
    }
    Ok(report)
}

/// Parsed `--sweep` grid: `alpha1=START:STOP:STEP[,alpha2=START:STOP:STEP]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub alpha1: Option<Vec<f64>>,
    pub alpha2: Option<Vec<f64>>,
}

impl Sweep {
    pub fn parse(spec: &str) -> Result<Sweep, String> {
        let mut sweep = Sweep {
            alpha1: None,
            alpha2: None,
        };
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, range) = part
                .split_once('=')
                .ok_or_else(|| format!("expected NAME=START:STOP:STEP, got {part:?}"))?;
            let nums: Vec<f64> = range
                .split(':')
                .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number {v:?} in {part:?}")))
                .collect::<Result<_, _>>()?;
            let [start, stop, step] = nums[..] else {
                return Err(format!("expected START:STOP:STEP, got {range:?}"));
            };
            if !(step > 0.0 && step.is_finite() && start.is_finite() && stop >= start) {
                return Err(format!("need START <= STOP and STEP > 0 in {part:?}"));
            }
            // Points by index so the grid is exact where the arithmetic is.
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            let grid = (0..=count).map(|i| start + i as f64 * step).collect();
            let slot = match name.trim() {
                "alpha1" => &mut sweep.alpha1,
                "alpha2" => &mut sweep.alpha2,
                other => return Err(format!("unknown sweep parameter {other:?}; use alpha1 or alpha2")),
            };
            if slot.replace(grid).is_some() {
                return Err(format!("{} given twice", name.trim()));
            }
        }
        if sweep.alpha1.is_none() && sweep.alpha2.is_none() {
            return Err("empty sweep".into());
        }
        Ok(sweep)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub alpha1: f64,
    pub alpha2: Option<f64>,
    pub re_lambda0: Option<f64>,
    pub exists: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSummary {
    pub family: EigenFamily,
    /// `(k, lambda_k, eigen residual)`.
    pub ladder: Vec<(i64, num_complex::Complex64, f64)>,
    pub sweep: Vec<SweepPoint>,
    /// Grid points skipped because `alpha = k` there.
    pub ill_posed_points: usize,
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::config(THREADS_VAR, "(environment)", format!("expected a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::config(THREADS_VAR, "(environment)", e.to_string()))
}

fn run_sweep(family: &EigenFamily, sweep: &Sweep) -> Result<(Vec<SweepPoint>, usize), String> {
    let grid: Vec<(f64, Option<f64>)> = match family.geometry {
        Geometry::Star { alpha1, .. } => {
            if sweep.alpha2.is_some() {
                return Err("a star has one internal node; only alpha1 can be swept".into());
            }
            let a1 = sweep.alpha1.clone().unwrap_or(vec![alpha1]);
            a1.into_iter().map(|a| (a, None)).collect()
        }
        Geometry::Bone { alpha1, alpha2, .. } => {
            let a1 = sweep.alpha1.clone().unwrap_or(vec![alpha1]);
            let a2 = sweep.alpha2.clone().unwrap_or(vec![alpha2]);
            a1.iter().flat_map(|&x| a2.iter().map(move |&y| (x, Some(y)))).collect()
        }
    };
    let evaluate = |&(a1, a2): &(f64, Option<f64>)| match family.geometry {
        Geometry::Star { n, c1, .. } => star_eigenvalues(n, a1, c1),
        Geometry::Bone { k1, k2, c2, .. } => bone_eigenvalues(k1, k2, a1, a2.unwrap(), c2),
    };
    let pool = thread_pool().map_err(|e| e.to_string())?;
    // Collecting an indexed parallel iterator keeps grid order.
    let results: Vec<Result<EigenFamily, SpectrumError>> =
        pool.install(|| grid.par_iter().map(evaluate).collect());
    let mut points = Vec::with_capacity(grid.len());
    let mut ill_posed = 0;
    for ((a1, a2), r) in grid.into_iter().zip(results) {
        match r {
            Ok(f) => points.push(SweepPoint {
                alpha1: a1,
                alpha2: a2,
                re_lambda0: f.lambda(0).map(|l| l.re),
                exists: f.exists,
            }),
            Err(SpectrumError::IllPosedAlpha { .. }) => ill_posed += 1,
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok((points, ill_posed))
}

pub fn spectrum(cfg: &RunConfig, out: &mut dyn Write) -> Result<SpectrumSummary, CliError> {
    let net = cfg.network()?;
    let tree = &net.tree;
    let opts = cfg.spectrum.clone().unwrap_or_default();
    if opts.k_min > opts.k_max {
        return Err(CliError::config(&cfg.source, "spectrum.k_min", "k_min exceeds k_max"));
    }
    let family = eigen_family_for(tree)?;
    let mut ladder = Vec::new();
    if family.exists {
        for k in opts.k_min..=opts.k_max {
            let eigen = cfg.eigenfunction(&net, k, opts.samples)?;
            let residual = eigen_residual(tree, eigen.lambda, &eigen)?;
            ladder.push((k, eigen.lambda, residual));
        }
    }
    let (sweep, ill_posed_points) = match &opts.sweep {
        Some(spec) => {
            let parsed = Sweep::parse(spec).map_err(|m| CliError::config(&cfg.source, "spectrum.sweep", m))?;
            run_sweep(&family, &parsed).map_err(|m| CliError::config(&cfg.source, "spectrum.sweep", m))?
        }
        None => (Vec::new(), 0),
    };

    let dir = output_dir(cfg)?;
    let mut csv = CsvFile::create(&dir.join("spectrum.csv"), &["k", "re", "im", "residual"])?;
    for &(k, l, r) in &ladder {
        csv.record([k.to_string(), fixed(l.re), fixed(l.im), fixed(r)])?;
    }
    csv.finish()?;
    if !sweep.is_empty() || ill_posed_points > 0 {
        let two = matches!(family.geometry, Geometry::Bone { .. });
        let header: &[&str] = if two {
            &["alpha1", "alpha2", "re_lambda0", "exists"]
        } else {
            &["alpha1", "re_lambda0", "exists"]
        };
        let mut csv = CsvFile::create(&dir.join("sweep.csv"), header)?;
        for p in &sweep {
            let mut row = vec![fixed(p.alpha1)];
            row.extend(p.alpha2.map(fixed));
            row.push(fixed(p.re_lambda0.unwrap_or(f64::NAN)));
            row.push(p.exists.to_string());
            csv.record(row)?;
        }
        csv.finish()?;
    }

    match family.geometry {
        Geometry::Star { n, alpha1, c1 } => {
            say!(out, "star with {n} edges, alpha_1 = {alpha1}, c_1 = {c1}")
        }
        Geometry::Bone { k1, k2, alpha1, alpha2, c2 } => say!(
            out,
            "bone with k = ({k1}, {k2}), alpha = ({alpha1}, {alpha2}), link speed {c2}"
        ),
    }
    if family.exists {
        let l0 = family.lambda(0).unwrap();
        say!(
            out,
            "eigenvalues lambda_k = {} + {} i + k * {} i",
            l0.re,
            l0.im,
            family.spacing.im
        );
        let worst = ladder.iter().map(|l| l.2).fold(0.0, f64::max);
        say!(out, "largest eigenfunction residual over k = {}..={}: {worst:e}", opts.k_min, opts.k_max);
        if l0.re < 0.0 {
            say!(out, "exponentially stable with rate {}; not finite-time stable", -l0.re);
        } else {
            say!(out, "not asymptotically stable: Re lambda = {}", l0.re);
        }
    } else {
        say!(out, "no point spectrum; finite-time stable");
    }
    if !sweep.is_empty() {
        let flips = sweep.iter().filter(|p| !p.exists).count();
        say!(out, "sweep: {} grid points, {flips} without point spectrum", sweep.len());
    }
    if ill_posed_points > 0 {
        say!(out, "sweep: skipped {ill_posed_points} ill-posed grid point(s) with alpha = k");
    }
    say!(out, "wrote {}", dir.display());
    Ok(SpectrumSummary {
        family,
        ladder,
        sweep,
        ill_posed_points,
    })
}

pub fn crosscheck_command(cfg: &RunConfig, out: &mut dyn Write) -> Result<Vec<CrosscheckReport>, CliError> {
    let net = cfg.network()?;
    let tree = &net.tree;
    let init = cfg.initial_data(&net)?;
    let opts = cfg.crosscheck.clone().unwrap_or_default();
    let sim_dt = opts
        .dt
        .or(cfg.dt)
        .ok_or_else(|| CliError::config(&cfg.source, "crosscheck.dt", "a simulator time step is required"))?;
    if opts.times.is_empty() {
        return Err(CliError::config(&cfg.source, "crosscheck.times", "no comparison times"));
    }
    let mut reports = Vec::new();
    for &t in &opts.times {
        reports.push(crosscheck(tree, &init, sim_dt, opts.cells, opts.courant, t)?);
    }
    let dir = output_dir(cfg)?;
    let mut csv = CsvFile::create(
        &dir.join("crosscheck.csv"),
        &["t", "cells", "relative_l2", "relative_sup", "absolute_l2", "absolute_sup"],
    )?;
    for r in &reports {
        for (p, d) in [(r.cells, r.coarse), (2 * r.cells, r.fine)] {
            csv.record([
                fixed(r.time),
                p.to_string(),
                fixed(d.relative_l2),
                fixed(d.relative_sup),
                fixed(d.absolute_l2),
                fixed(d.absolute_sup),
            ])?;
        }
    }
    csv.finish()?;
    for r in &reports {
        say!(
            out,
            "t = {}: cells {} relative L2 {:e}, sup {:e}; cells {} relative L2 {:e}, sup {:e}",
            r.time,
            r.cells,
            r.coarse.relative_l2,
            r.coarse.relative_sup,
            2 * r.cells,
            r.fine.relative_l2,
            r.fine.relative_sup
        );
        if r.coarse.absolute_sup == 0.0 && r.fine.absolute_sup == 0.0 && r.coarse.relative_l2 == 0.0 {
            say!(out, "  both solutions agree exactly");
        } else {
            say!(out, "  convergence ratio {:.4}", r.convergence_ratio);
        }
    }
    Ok(reports)
}

//! Second-order finite-difference reference solver for the displacement.
//!
//! Leapfrog in the interior of each edge. The node value shared by the edges
//! meeting at a node is found each step from one-sided second-order space
//! stencils and a BDF2 time derivative, which makes every node law a
//! scalar linear equation. Test oracle only; it never feeds the simulator.

use thiserror::Error;

use crate::charsim::{
    check_initial_data, classify_extinction, EdgeSnapshot, InitialData, SimError, SimReport, SimState, Snapshot,
    DEFAULT_RELATIVE_EPSILON,
};
use crate::network::{BoundaryKind, NetworkTree};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdError {
    #[error("Courant number {courant} on edge {edge} exceeds 1")]
    CourantViolation { edge: usize, courant: f64 },
    #[error("invalid finite-difference configuration: {0}")]
    InvalidConfig(String),
    #[error("node {node}: discrete node law is singular for this time step")]
    SingularNodeClosure { node: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdConfig {
    /// Cells per edge; each edge carries `cells + 1` points.
    pub cells: usize,
    /// Target `max_i c_i dt / dx`; `dt` is the largest `1/K` not above it.
    pub courant: f64,
    /// Explicit time step; overrides `courant` when set.
    pub dt: Option<f64>,
    pub horizon: f64,
    pub stride: usize,
    pub snapshot_times: Vec<f64>,
    pub epsilon: Option<f64>,
}

impl FdConfig {
    pub fn new(cells: usize, horizon: f64) -> Self {
        FdConfig {
            cells,
            courant: 0.9,
            dt: None,
            horizon,
            stride: 1,
            snapshot_times: Vec::new(),
            epsilon: None,
        }
    }

    pub fn time_step(&self, tree: &NetworkTree) -> Result<f64, FdError> {
        if self.cells < 2 {
            return Err(FdError::InvalidConfig(format!("need at least 2 cells per edge, got {}", self.cells)));
        }
        let h = 1.0 / self.cells as f64;
        let c_max = tree.speeds().iter().copied().fold(0.0, f64::max);
        let dt = match self.dt {
            Some(dt) => dt,
            None => {
                if !(self.courant > 0.0) {
                    return Err(FdError::InvalidConfig(format!("courant must be positive, got {}", self.courant)));
                }
                1.0 / (c_max / (self.courant * h)).ceil()
            }
        };
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FdError::InvalidConfig(format!("time step must be positive, got {dt}")));
        }
        for e in 1..=tree.edge_count() {
            let nu = tree.speed(e) * dt / h;
            if nu > 1.0 + 1e-12 {
                return Err(FdError::CourantViolation { edge: e, courant: nu });
            }
        }
        Ok(dt)
    }
}

/// Three time levels of `u` per edge, edge `i` at index `i - 1`.
struct Levels {
    prev: Vec<Vec<f64>>,
    cur: Vec<Vec<f64>>,
    next: Vec<Vec<f64>>,
}

struct Solver<'a> {
    tree: &'a NetworkTree,
    h: f64,
    dt: f64,
    cells: usize,
}

impl Solver<'_> {
    fn c(&self, e: usize) -> f64 {
        self.tree.speed(e)
    }

    /// Interior leapfrog into `next`; node values are set afterwards.
    fn interior(&self, lv: &mut Levels) {
        for e in 1..=self.tree.edge_count() {
            let nu2 = (self.c(e) * self.dt / self.h).powi(2);
            let (p, c, n) = (&lv.prev[e - 1], &lv.cur[e - 1], &mut lv.next[e - 1]);
            for j in 1..self.cells {
                n[j] = 2.0 * c[j] - p[j] + nu2 * (c[j + 1] - 2.0 * c[j] + c[j - 1]);
            }
        }
    }

    fn nodes(&self, lv: &mut Levels) -> Result<(), FdError> {
        let m = self.cells;
        let (h, dt) = (self.h, self.dt);
        let bdf = |cur: f64, prev: f64| (4.0 * cur - prev) / (2.0 * dt);

        // root, x = 0 on edge 1
        let (a, b) = (lv.next[0][1], lv.next[0][2]);
        let root = match self.tree.root_bc() {
            BoundaryKind::Dirichlet => 0.0,
            BoundaryKind::Neumann => (4.0 * a - b) / 3.0,
            BoundaryKind::Transparent => {
                let c = self.c(1);
                (c * (4.0 * a - b) / (2.0 * h) + bdf(lv.cur[0][0], lv.prev[0][0]))
                    / (3.0 * c / (2.0 * h) + 3.0 / (2.0 * dt))
            }
        };
        lv.next[0][0] = root;

        for node in 1..self.tree.node_count() {
            let p = node - 1;
            let (a, b) = (lv.next[p][m - 1], lv.next[p][m - 2]);
            let (un, unm1) = (lv.cur[p][m], lv.prev[p][m]);
            let value = if self.tree.is_external(node) {
                let c = self.c(node);
                (c * (4.0 * a - b) / (2.0 * h) + bdf(un, unm1)) / (3.0 * c / (2.0 * h) + 3.0 / (2.0 * dt))
            } else {
                let alpha = self.tree.alpha(node).unwrap();
                let mut coeff = 3.0 * self.c(node) / (2.0 * h) - 3.0 * alpha / (2.0 * dt);
                let mut rhs = self.c(node) * (4.0 * a - b) / (2.0 * h) - alpha * bdf(un, unm1);
                for &ch in self.tree.children(node) {
                    let c = self.c(ch);
                    coeff += 3.0 * c / (2.0 * h);
                    rhs += c * (4.0 * lv.next[ch - 1][1] - lv.next[ch - 1][2]) / (2.0 * h);
                }
                if coeff.abs() < 1e-9 * (1.0 / h + 1.0 / dt) {
                    return Err(FdError::SingularNodeClosure { node });
                }
                rhs / coeff
            };
            lv.next[p][m] = value;
            for &ch in self.tree.children(node) {
                lv.next[ch - 1][0] = value;
            }
        }
        Ok(())
    }

    /// `(u_t, u_x)` on every edge at the middle level, `u_t` centred in time.
    fn derivatives(&self, before: &[Vec<f64>], at: &[Vec<f64>], after: &[Vec<f64>]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let m = self.cells;
        let h = self.h;
        (0..self.tree.edge_count())
            .map(|i| {
                let ut: Vec<f64> = (0..=m).map(|j| (after[i][j] - before[i][j]) / (2.0 * self.dt)).collect();
                let u = &at[i];
                let ux: Vec<f64> = (0..=m)
                    .map(|j| {
                        if j == 0 {
                            (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
                        } else if j == m {
                            (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) / (2.0 * h)
                        } else {
                            (u[j + 1] - u[j - 1]) / (2.0 * h)
                        }
                    })
                    .collect();
                (ut, ux)
            })
            .collect()
    }
}

/// Runs the reference solver and reports in the simulator's trace format.
/// Invariants are formed from centred differences of the displacement.
pub fn fd_run(tree: &NetworkTree, init: &InitialData, cfg: &FdConfig) -> Result<SimReport, FdError> {
    check_initial_data(tree, init)?;
    if !(cfg.horizon >= 0.0 && cfg.horizon.is_finite()) {
        return Err(SimError::InvalidHorizon { horizon: cfg.horizon }.into());
    }
    let dt = cfg.time_step(tree)?;
    let m = cfg.cells;
    let h = 1.0 / m as f64;
    let solver = Solver { tree, h, dt, cells: m };
    let n_edges = tree.edge_count();
    let xs: Vec<f64> = (0..=m).map(|j| j as f64 * h).collect();

    let u0: Vec<Vec<f64>> = (1..=n_edges)
        .map(|e| xs.iter().map(|&x| init.edge(e).displacement.value(x)).collect())
        .collect();
    let mut u1: Vec<Vec<f64>> = (1..=n_edges)
        .map(|e| {
            let ei = init.edge(e);
            let c2 = tree.speed(e).powi(2);
            xs.iter()
                .map(|&x| {
                    ei.displacement.value(x)
                        + dt * ei.velocity.value(x)
                        + 0.5 * dt * dt * c2 * ei.displacement.second_derivative(x)
                })
                .collect()
        })
        .collect();
    // one shared value per node at the first level
    if tree.root_bc() == BoundaryKind::Dirichlet {
        u1[0][0] = 0.0;
    }
    for node in tree.internal_nodes() {
        let value = u1[node - 1][m];
        for &ch in tree.children(node) {
            u1[ch - 1][0] = value;
        }
    }

    let total_steps = (cfg.horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let stride = cfg.stride.max(1);
    let mut snapshot_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|&t| (t / dt).round().max(0.0) as usize)
        .collect();
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();

    let nodes: Vec<usize> = tree.internal_nodes().collect();
    let mut report = empty_report(tree, dt, &nodes);

    let mut lv = Levels {
        prev: u0.clone(),
        cur: u1,
        next: vec![vec![0.0; m + 1]; n_edges],
    };
    let exact_start: Vec<(Vec<f64>, Vec<f64>)> = (1..=n_edges)
        .map(|e| {
            let ei = init.edge(e);
            (
                xs.iter().map(|&x| ei.velocity.value(x)).collect(),
                xs.iter().map(|&x| ei.displacement.derivative(x)).collect(),
            )
        })
        .collect();

    let mut last_u = u0.clone();
    for n in 0..=total_steps {
        // level n is `prev` when n == 0, else `cur` after the shift below
        let (u_n, derivs) = if n == 0 {
            (u0.clone(), exact_start.clone())
        } else {
            solver.interior(&mut lv);
            solver.nodes(&mut lv)?;
            let d = solver.derivatives(&lv.prev, &lv.cur, &lv.next);
            (lv.cur.clone(), d)
        };
        let wanted_snapshot = snapshot_steps.binary_search(&n).is_ok();
        if n % stride == 0 || n == total_steps || wanted_snapshot {
            let snap = snapshot_of(tree, n as f64 * dt, &xs, &u_n, &derivs);
            if n % stride == 0 || n == total_steps {
                record(tree, &mut report, &snap, &nodes);
            }
            if wanted_snapshot {
                report.snapshots.push(snap.clone());
            }
            if n == total_steps {
                report.final_state = snap;
            }
        }
        if n > 0 {
            std::mem::swap(&mut lv.prev, &mut lv.cur);
            std::mem::swap(&mut lv.cur, &mut lv.next);
        }
        last_u = u_n;
    }

    let initial_sup = report.sup_s[0].max(report.sup_d[0]);
    report.epsilon = cfg.epsilon.unwrap_or(DEFAULT_RELATIVE_EPSILON * initial_sup);
    report.extinction = classify_extinction(&report.times, &report.sup_invariants(), report.epsilon, tree.tree_time());
    let all = last_u.iter().flatten();
    let (lo, hi) = all.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| (lo.min(u), hi.max(u)));
    report.final_constant = all.clone().sum::<f64>() / all.count() as f64;
    report.final_spread = hi - lo;
    Ok(report)
}

fn empty_report(tree: &NetworkTree, dt: f64, nodes: &[usize]) -> SimReport {
    SimReport {
        dt,
        times: Vec::new(),
        energy: Vec::new(),
        sup_s: Vec::new(),
        sup_d: Vec::new(),
        boundary_flux: Vec::new(),
        nodes: nodes.to_vec(),
        node_velocity: Vec::new(),
        edge_sup_s: Vec::new(),
        u_min: Vec::new(),
        u_max: Vec::new(),
        epsilon: 0.0,
        extinction: crate::charsim::Extinction::NotObserved,
        predicted_extinction: tree.predicted_extinction().ok(),
        final_constant: 0.0,
        final_spread: 0.0,
        snapshots: Vec::new(),
        final_state: Snapshot {
            time: 0.0,
            edges: Vec::new(),
        },
    }
}

fn snapshot_of(tree: &NetworkTree, time: f64, xs: &[f64], u: &[Vec<f64>], derivs: &[(Vec<f64>, Vec<f64>)]) -> Snapshot {
    Snapshot {
        time,
        edges: (1..=tree.edge_count())
            .map(|e| {
                let c = tree.speed(e);
                let (ut, ux) = &derivs[e - 1];
                EdgeSnapshot {
                    edge: e,
                    x: xs.to_vec(),
                    u: u[e - 1].clone(),
                    s: ut.iter().zip(ux).map(|(t, x)| t + c * x).collect(),
                    d: ut.iter().zip(ux).map(|(t, x)| t - c * x).collect(),
                }
            })
            .collect(),
    }
}

fn record(tree: &NetworkTree, report: &mut SimReport, snap: &Snapshot, nodes: &[usize]) {
    let trap = |v: &[f64], f: &dyn Fn(f64) -> f64| {
        let n = v.len();
        let total: f64 = v.iter().map(|&x| f(x)).sum();
        (total - 0.5 * (f(v[0]) + f(v[n - 1]))) / (n - 1) as f64
    };
    let sq = |x: f64| x * x;
    let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut energy = 0.0;
    let mut flux = 0.0;
    let (mut sup_s, mut sup_d) = (0.0_f64, 0.0_f64);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut edge_sup = Vec::new();
    for e in &snap.edges {
        let c = tree.speed(e.edge);
        energy += (trap(&e.s, &sq) + trap(&e.d, &sq)) / (4.0 * c);
        let n = e.s.len() - 1;
        flux += 0.25 * ((sq(e.s[n]) - sq(e.d[n])) - (sq(e.s[0]) - sq(e.d[0])));
        sup_s = sup_s.max(max_abs(&e.s));
        sup_d = sup_d.max(max_abs(&e.d));
        edge_sup.push(max_abs(&e.s));
        for &u in &e.u {
            lo = lo.min(u);
            hi = hi.max(u);
        }
    }
    report.times.push(snap.time);
    report.energy.push(energy);
    report.boundary_flux.push(flux);
    report.sup_s.push(sup_s);
    report.sup_d.push(sup_d);
    report.edge_sup_s.push(edge_sup);
    report.u_min.push(lo);
    report.u_max.push(hi);
    report.node_velocity.push(
        nodes
            .iter()
            .map(|&n| {
                let e = &snap.edges[n - 1];
                let last = e.s.len() - 1;
                0.5 * (e.s[last] + e.d[last])
            })
            .collect(),
    );
}

/// Deviation of one displacement field from a reference on the same edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    /// `||u - ref||_2 / ||ref||_2` over all edges (trapezoid rule).
    pub relative_l2: f64,
    /// `max |u - ref| / max |ref|`.
    pub relative_sup: f64,
    pub absolute_l2: f64,
    pub absolute_sup: f64,
}

/// Linear interpolation of samples on a uniform grid over `[0, 1]`.
pub fn interpolate(samples: &[f64], x: f64) -> f64 {
    let m = samples.len() - 1;
    let pos = (x * m as f64).clamp(0.0, m as f64);
    let j = (pos.floor() as usize).min(m - 1);
    let w = pos - j as f64;
    if w == 0.0 {
        samples[j]
    } else {
        (1.0 - w) * samples[j] + w * samples[j + 1]
    }
}

/// Compares a finite-difference snapshot against a simulator snapshot,
/// interpolating the latter to the former's points.
pub fn compare_snapshots(fd: &Snapshot, reference: &Snapshot) -> Deviation {
    let (mut diff2, mut ref2, mut diff_sup, mut ref_sup) = (0.0, 0.0, 0.0_f64, 0.0_f64);
    for (a, r) in fd.edges.iter().zip(&reference.edges) {
        let n = a.x.len();
        for (j, (&x, &u)) in a.x.iter().zip(&a.u).enumerate() {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 } / (n - 1) as f64;
            let rv = interpolate(&r.u, x);
            diff2 += w * (u - rv).powi(2);
            ref2 += w * rv * rv;
            diff_sup = diff_sup.max((u - rv).abs());
            ref_sup = ref_sup.max(rv.abs());
        }
    }
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else if num == 0.0 { 0.0 } else { f64::INFINITY };
    Deviation {
        relative_l2: rel(diff2.sqrt(), ref2.sqrt()),
        relative_sup: rel(diff_sup, ref_sup),
        absolute_l2: diff2.sqrt(),
        absolute_sup: diff_sup,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrosscheckReport {
    pub time: f64,
    pub cells: usize,
    pub coarse: Deviation,
    pub fine: Deviation,
    /// Coarse over fine relative L2 deviation.
    pub convergence_ratio: f64,
}

/// Runs the simulator (step `sim_dt`) and the finite-difference solver at
/// `cells` and `2 * cells` to `time`, comparing displacements there.
pub fn crosscheck(
    tree: &NetworkTree,
    init: &InitialData,
    sim_dt: f64,
    cells: usize,
    courant: f64,
    time: f64,
) -> Result<CrosscheckReport, FdError> {
    let mut state = SimState::new(tree, init, sim_dt)?;
    let steps = (time / sim_dt).round() as u64;
    for _ in 0..steps {
        state.step();
    }
    let reference = state.snapshot();
    let run_at = |p: usize| -> Result<Deviation, FdError> {
        let mut cfg = FdConfig::new(p, time);
        cfg.courant = courant;
        cfg.stride = usize::MAX;
        let report = fd_run(tree, init, &cfg)?;
        Ok(compare_snapshots(&report.final_state, &reference))
    };
    let coarse = run_at(cells)?;
    let fine = run_at(2 * cells)?;
    Ok(CrosscheckReport {
        time: reference.time,
        cells,
        coarse,
        fine,
        convergence_ratio: coarse.relative_l2 / fine.relative_l2,
    })
}

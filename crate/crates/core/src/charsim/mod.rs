//! Exact delay-line evolution of the Riemann invariants.
//!
//! On edge `i` the invariants `d = u_t - c u_x` and `s = u_t + c u_x` are
//! sampled at `x_j = j / M_i`, where `M_i c_i dt = 1`. One step moves every
//! `d` sample one cell toward `x = 1` and every `s` sample one cell toward
//! `x = 0`; only the samples entering at the edge ends are computed, from the
//! junction maps and boundary rules. The result is the exact flow of the
//! continuous problem at grid times.
//!
//! Displacement is carried by the d'Alembert potentials `u = f + g`, with
//! `f` transported like `d` and `g` like `s`. Their boundary increments obey
//! the same junction maps as the invariants, so `u` is exact too.

mod delay_line;
pub mod profile;

use thiserror::Error;

use crate::network::{BoundaryKind, NetworkTree};
use crate::scattering::{closed_form_internal, root_reflection, NodeScatterMatrix, ScatterError};

pub use delay_line::DelayLine;
pub use profile::{EdgeInit, InitialData, Profile};

/// Relative tolerance for `M_i c_i dt = 1`.
pub const COMMENSURABILITY_TOLERANCE: f64 = 1e-9;
/// Tolerance for displacement continuity of initial data at nodes.
pub const CONTINUITY_TOLERANCE: f64 = 1e-12;
/// Default extinction threshold, relative to the initial sup-norm.
pub const DEFAULT_RELATIVE_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("time step must be positive and finite, got {dt}")]
    InvalidTimestep { dt: f64 },
    #[error("edge {edge}: 1/(c*dt) = {ratio} is not an integer")]
    IncommensurableTimestep { edge: usize, ratio: f64 },
    #[error("edge {edge}: time step resolves only {cells} cell(s), at least 2 are needed")]
    TimestepTooCoarse { edge: usize, cells: usize },
    #[error("incompatible initial data: {reason}")]
    IncompatibleInitialData { node: Option<usize>, reason: String },
    #[error("horizon must be non-negative and finite, got {horizon}")]
    InvalidHorizon { horizon: f64 },
    #[error("persistence window from t = {candidate} of length {window} extends past trace end {end}")]
    HorizonTooShort { candidate: f64, window: f64, end: f64 },
    #[error(transparent)]
    Scatter(#[from] ScatterError),
}

impl SimError {
    pub fn is_timestep(&self) -> bool {
        matches!(
            self,
            SimError::InvalidTimestep { .. }
                | SimError::IncommensurableTimestep { .. }
                | SimError::TimestepTooCoarse { .. }
        )
    }
}

/// How the displacement is obtained from the invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisplacementRule {
    /// Transported d'Alembert potentials; exact at grid points.
    #[default]
    Potential,
    /// `u += dt/2 (v_old + v_new)` per sample; second order in `dt`.
    Trapezoid,
}

/// Number of cells on each edge for a given step, index 0 unused.
pub fn cell_counts(tree: &NetworkTree, dt: f64) -> Result<Vec<usize>, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::InvalidTimestep { dt });
    }
    let mut cells = vec![0];
    for edge in 1..=tree.edge_count() {
        let ratio = 1.0 / (tree.speed(edge) * dt);
        let m = ratio.round();
        if m < 1.0 || ((m - ratio) / ratio).abs() > COMMENSURABILITY_TOLERANCE {
            return Err(SimError::IncommensurableTimestep { edge, ratio });
        }
        let m = m as usize;
        if m < 2 {
            return Err(SimError::TimestepTooCoarse { edge, cells: m });
        }
        cells.push(m);
    }
    Ok(cells)
}

/// Checks displacement continuity at internal nodes and the Dirichlet root
/// condition, plus profile parameters.
pub fn check_initial_data(tree: &NetworkTree, init: &InitialData) -> Result<(), SimError> {
    let incompatible = |node: Option<usize>, reason: String| SimError::IncompatibleInitialData { node, reason };
    if init.edges.len() != tree.edge_count() {
        return Err(incompatible(
            None,
            format!("{} edge entries for a network with {} edges", init.edges.len(), tree.edge_count()),
        ));
    }
    for (i, e) in init.edges.iter().enumerate() {
        for p in [&e.displacement, &e.velocity] {
            p.check()
                .map_err(|r| incompatible(None, format!("edge {}: {r}", i + 1)))?;
        }
    }
    for n in tree.internal_nodes() {
        let at_node = init.edge(n).displacement.value(1.0);
        for &c in tree.children(n) {
            let start = init.edge(c).displacement.value(0.0);
            if (start - at_node).abs() > CONTINUITY_TOLERANCE * (1.0 + at_node.abs()) {
                return Err(incompatible(
                    Some(tree.label(n)),
                    format!(
                        "displacement is discontinuous at node {}: {at_node} on edge {n}, {start} on edge {c}",
                        tree.label(n)
                    ),
                ));
            }
        }
    }
    if tree.root_bc() == BoundaryKind::Dirichlet {
        let u0 = init.edge(1).displacement.value(0.0);
        if u0.abs() > CONTINUITY_TOLERANCE {
            return Err(incompatible(
                Some(tree.label(0)),
                format!("Dirichlet root requires zero displacement at the root, got {u0}"),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Junction {
    node: usize,
    children: Vec<usize>,
    /// Index into `SimState::matrices`.
    matrix: usize,
}

/// Sampled state of the whole network.
#[derive(Debug, Clone)]
pub struct SimState {
    tree: NetworkTree,
    dt: f64,
    steps: u64,
    cells: Vec<usize>,
    s: Vec<DelayLine>,
    d: Vec<DelayLine>,
    f: Vec<DelayLine>,
    g: Vec<DelayLine>,
    trapezoid: Option<Vec<Vec<f64>>>,
    junctions: Vec<Junction>,
    /// One map per distinct `(k, alpha)`.
    matrices: Vec<NodeScatterMatrix>,
    leaves: Vec<usize>,
    root_coefficient: f64,
    // scratch, indexed by edge
    in_s: Vec<f64>,
    in_d: Vec<f64>,
    in_f: Vec<f64>,
    in_g: Vec<f64>,
}

/// Edge-local sample vectors; index 0 of the outer vector is edge 1.
pub type EdgeSamples = Vec<Vec<f64>>;

impl SimState {
    pub fn new(tree: &NetworkTree, init: &InitialData, dt: f64) -> Result<Self, SimError> {
        Self::with_rule(tree, init, dt, DisplacementRule::Potential)
    }

    pub fn with_rule(
        tree: &NetworkTree,
        init: &InitialData,
        dt: f64,
        rule: DisplacementRule,
    ) -> Result<Self, SimError> {
        let cells = cell_counts(tree, dt)?;
        check_initial_data(tree, init)?;
        let n_edges = tree.edge_count();
        let mut s = vec![DelayLine::from_samples(vec![0.0])];
        let mut d = s.clone();
        let mut f = s.clone();
        let mut g = s.clone();
        for edge in 1..=n_edges {
            let m = cells[edge];
            let c = tree.speed(edge);
            let e = init.edge(edge);
            let xs: Vec<f64> = (0..=m).map(|j| j as f64 / m as f64).collect();
            let sample = |h: &dyn Fn(f64) -> f64| DelayLine::from_samples(xs.iter().map(|&x| h(x)).collect());
            s.push(sample(&|x| e.velocity.value(x) + c * e.displacement.derivative(x)));
            d.push(sample(&|x| e.velocity.value(x) - c * e.displacement.derivative(x)));
            f.push(sample(&|x| {
                0.5 * e.displacement.value(x) - e.velocity.antiderivative(x) / (2.0 * c)
            }));
            g.push(sample(&|x| {
                0.5 * e.displacement.value(x) + e.velocity.antiderivative(x) / (2.0 * c)
            }));
        }
        let trapezoid = match rule {
            DisplacementRule::Potential => None,
            DisplacementRule::Trapezoid => Some(
                (1..=n_edges)
                    .map(|edge| {
                        let m = cells[edge];
                        (0..=m)
                            .map(|j| init.edge(edge).displacement.value(j as f64 / m as f64))
                            .collect()
                    })
                    .collect(),
            ),
        };
        let mut junctions = Vec::new();
        let mut matrices: Vec<NodeScatterMatrix> = Vec::new();
        for node in tree.internal_nodes() {
            let k = tree.degree(node);
            let alpha = tree.alpha(node).expect("internal nodes carry alpha");
            let matrix = match matrices
                .iter()
                .position(|m| m.k() == k && m.alpha().to_bits() == alpha.to_bits())
            {
                Some(i) => i,
                None => {
                    matrices.push(closed_form_internal(k, alpha)?);
                    matrices.len() - 1
                }
            };
            junctions.push(Junction {
                node,
                children: tree.children(node).to_vec(),
                matrix,
            });
        }
        let leaves = tree.external_nodes().filter(|&n| n != 0).collect();
        Ok(SimState {
            tree: tree.clone(),
            dt,
            steps: 0,
            cells,
            s,
            d,
            f,
            g,
            trapezoid,
            junctions,
            matrices,
            leaves,
            root_coefficient: root_reflection(tree.root_bc()).coefficient,
            in_s: vec![0.0; n_edges + 1],
            in_d: vec![0.0; n_edges + 1],
            in_f: vec![0.0; n_edges + 1],
            in_g: vec![0.0; n_edges + 1],
        })
    }

    pub fn tree(&self) -> &NetworkTree {
        &self.tree
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Cells on edge `edge`; the edge carries `cells + 1` samples.
    pub fn cells(&self, edge: usize) -> usize {
        self.cells[edge]
    }

    pub fn s(&self, edge: usize) -> &DelayLine {
        &self.s[edge]
    }

    pub fn d(&self, edge: usize) -> &DelayLine {
        &self.d[edge]
    }

    /// Advances by one time step.
    pub fn step(&mut self) {
        let n_edges = self.tree.edge_count();
        let mut incoming = [0.0; 16];
        let mut outgoing = [0.0; 16];
        let mut big_in = Vec::new();
        let mut big_out = Vec::new();
        for junction in &self.junctions {
            let p = junction.node;
            let matrix = &self.matrices[junction.matrix];
            let k = matrix.k();
            let (inc, out) = if k <= 16 {
                (&mut incoming[..k], &mut outgoing[..k])
            } else {
                big_in.resize(k, 0.0);
                big_out.resize(k, 0.0);
                (&mut big_in[..], &mut big_out[..])
            };
            let mp = self.cells[p];
            inc[0] = self.d[p].get(mp - 1);
            for (j, &c) in junction.children.iter().enumerate() {
                inc[j + 1] = self.s[c].get(1);
            }
            matrix.apply(inc, out);
            self.in_s[p] = out[0];
            for (j, &c) in junction.children.iter().enumerate() {
                self.in_d[c] = out[j + 1];
            }

            inc[0] = self.f[p].get(mp - 1) - self.f[p].get(mp);
            for (j, &c) in junction.children.iter().enumerate() {
                inc[j + 1] = self.g[c].get(1) - self.g[c].get(0);
            }
            matrix.apply(inc, out);
            self.in_g[p] = self.g[p].get(mp) + out[0];
            for (j, &c) in junction.children.iter().enumerate() {
                self.in_f[c] = self.f[c].get(0) + out[j + 1];
            }
        }
        for &leaf in &self.leaves {
            self.in_s[leaf] = 0.0;
            self.in_g[leaf] = self.g[leaf].get(self.cells[leaf]);
        }
        let kappa = self.root_coefficient;
        self.in_d[1] = kappa * self.s[1].get(1);
        self.in_f[1] = self.f[1].get(0) + kappa * (self.g[1].get(1) - self.g[1].get(0));

        let old_v = self.trapezoid.as_ref().map(|_| self.velocities());
        for e in 1..=n_edges {
            self.s[e].shift_toward_start(self.in_s[e]);
            self.d[e].shift_toward_end(self.in_d[e]);
            self.f[e].shift_toward_end(self.in_f[e]);
            self.g[e].shift_toward_start(self.in_g[e]);
        }
        if let Some(old_v) = old_v {
            let new_v = self.velocities();
            let half = 0.5 * self.dt;
            let acc = self.trapezoid.as_mut().unwrap();
            for ((u, a), b) in acc.iter_mut().zip(&old_v).zip(&new_v) {
                for ((uj, aj), bj) in u.iter_mut().zip(a).zip(b) {
                    *uj += half * (aj + bj);
                }
            }
        }
        self.steps += 1;
    }

    /// `v = (s + d) / 2` at every sample.
    pub fn velocities(&self) -> EdgeSamples {
        (1..=self.tree.edge_count())
            .map(|e| {
                self.s[e]
                    .iter()
                    .zip(self.d[e].iter())
                    .map(|(s, d)| 0.5 * (s + d))
                    .collect()
            })
            .collect()
    }

    /// `u_x = (s - d) / (2c)` at every sample.
    pub fn slopes(&self) -> EdgeSamples {
        (1..=self.tree.edge_count())
            .map(|e| {
                let c = self.tree.speed(e);
                self.s[e]
                    .iter()
                    .zip(self.d[e].iter())
                    .map(|(s, d)| 0.5 * (s - d) / c)
                    .collect()
            })
            .collect()
    }

    /// Displacement on edge `edge` at every sample.
    pub fn edge_displacement(&self, edge: usize) -> Vec<f64> {
        match &self.trapezoid {
            Some(acc) => acc[edge - 1].clone(),
            None => self.f[edge]
                .iter()
                .zip(self.g[edge].iter())
                .map(|(f, g)| f + g)
                .collect(),
        }
    }

    pub fn reconstruct_displacement(&self) -> EdgeSamples {
        (1..=self.tree.edge_count())
            .map(|e| self.edge_displacement(e))
            .collect()
    }

    /// `(min, max, mean)` of the displacement over all samples.
    pub fn displacement_stats(&self) -> (f64, f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut count = 0usize;
        for e in 1..=self.tree.edge_count() {
            let mut visit = |u: f64| {
                lo = lo.min(u);
                hi = hi.max(u);
                sum += u;
                count += 1;
            };
            match &self.trapezoid {
                Some(acc) => acc[e - 1].iter().copied().for_each(&mut visit),
                None => self.f[e]
                    .iter()
                    .zip(self.g[e].iter())
                    .for_each(|(f, g)| visit(f + g)),
            }
        }
        (lo, hi, sum / count as f64)
    }

    /// `sum_i int (s_i^2 + d_i^2) / (4 c_i) dx`, trapezoid rule in space.
    pub fn energy(&self) -> f64 {
        (1..=self.tree.edge_count())
            .map(|e| {
                let dx = 1.0 / self.cells[e] as f64;
                (self.s[e].trapezoid_sum_sq() + self.d[e].trapezoid_sum_sq()) * dx
                    / (4.0 * self.tree.speed(e))
            })
            .sum()
    }

    /// `sum_i [(s_i^2 - d_i^2)/4]` evaluated between `x = 0` and `x = 1`; the
    /// rate of change of the energy. Once the boundary laws hold it equals
    /// `sum alpha_n v_n^2` over internal nodes minus `u_t^2` summed over
    /// transparent external nodes. Over one step,
    /// `(E(t+dt) - E(t)) / dt` is the mean of the flux at both ends.
    pub fn boundary_flux(&self) -> f64 {
        (1..=self.tree.edge_count())
            .map(|e| {
                let end = |line: &DelayLine, j: usize| {
                    let v = line.get(j);
                    v * v
                };
                let m = self.cells[e];
                0.25 * ((end(&self.s[e], m) - end(&self.d[e], m)) - (end(&self.s[e], 0) - end(&self.d[e], 0)))
            })
            .sum()
    }

    /// Velocity `u_t` at a node.
    pub fn node_velocity(&self, node: usize) -> f64 {
        if node == 0 {
            0.5 * (self.s[1].first() + self.d[1].first())
        } else {
            0.5 * (self.s[node].last() + self.d[node].last())
        }
    }

    /// `sum alpha_n v_n^2 - sum u_t^2` over transparent external nodes,
    /// from node velocities.
    pub fn dissipation_law(&self) -> f64 {
        let damping: f64 = self
            .junctions
            .iter()
            .map(|j| {
                let v = self.node_velocity(j.node);
                self.matrices[j.matrix].alpha() * v * v
            })
            .sum();
        let radiated: f64 = self
            .leaves
            .iter()
            .map(|&n| self.node_velocity(n).powi(2))
            .sum::<f64>()
            + if self.tree.root_bc() == BoundaryKind::Transparent {
                self.node_velocity(0).powi(2)
            } else {
                0.0
            };
        damping - radiated
    }

    pub fn sup_s(&self) -> f64 {
        self.s[1..].iter().map(DelayLine::max_abs).fold(0.0, f64::max)
    }

    pub fn sup_d(&self) -> f64 {
        self.d[1..].iter().map(DelayLine::max_abs).fold(0.0, f64::max)
    }

    /// Sup-norm of `s` per edge, edge 1 first.
    pub fn edge_sup_s(&self) -> Vec<f64> {
        self.s[1..].iter().map(DelayLine::max_abs).collect()
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            time: self.time(),
            edges: (1..=self.tree.edge_count())
                .map(|e| {
                    let m = self.cells[e];
                    EdgeSnapshot {
                        edge: e,
                        x: (0..=m).map(|j| j as f64 / m as f64).collect(),
                        u: self.edge_displacement(e),
                        s: self.s[e].to_vec(),
                        d: self.d[e].to_vec(),
                    }
                })
                .collect(),
        }
    }
}

/// Sampled fields on one edge at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSnapshot {
    pub edge: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub edges: Vec<EdgeSnapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Record traces every `stride` steps (the final step is always kept).
    pub stride: usize,
    /// Absolute extinction threshold; defaults to
    /// `DEFAULT_RELATIVE_EPSILON` times the initial sup-norm.
    pub epsilon: Option<f64>,
    pub snapshot_times: Vec<f64>,
    pub displacement: DisplacementRule,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            stride: 1,
            epsilon: None,
            snapshot_times: Vec::new(),
            displacement: DisplacementRule::Potential,
        }
    }
}

/// Result of checking the sup-norm trace for extinction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extinction {
    /// Below threshold from this recorded time to the end, for at least one
    /// persistence window.
    At(f64),
    /// Above threshold at the last recorded time.
    NotObserved,
    /// Below threshold from `candidate` on, but for less than a window.
    HorizonTooShort { candidate: f64 },
}

impl Extinction {
    pub fn time(&self) -> Option<f64> {
        match self {
            Extinction::At(t) => Some(*t),
            _ => None,
        }
    }
}

/// Recorded traces of one run. All traces share `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub dt: f64,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub sup_s: Vec<f64>,
    pub sup_d: Vec<f64>,
    /// Energy rate from boundary values.
    pub boundary_flux: Vec<f64>,
    /// Internal nodes in ascending order.
    pub nodes: Vec<usize>,
    /// `node_velocity[r][j]` is the velocity of `nodes[j]` at `times[r]`.
    pub node_velocity: Vec<Vec<f64>>,
    /// `edge_sup_s[r][i]` is the sup of `s` on edge `i + 1` at `times[r]`.
    pub edge_sup_s: Vec<Vec<f64>>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub epsilon: f64,
    pub extinction: Extinction,
    pub predicted_extinction: Option<f64>,
    /// Mean displacement over all samples at the final time.
    pub final_constant: f64,
    /// `max u - min u` at the final time.
    pub final_spread: f64,
    pub snapshots: Vec<Snapshot>,
    pub final_state: Snapshot,
}

impl SimReport {
    /// `max(sup_s, sup_d)` per recorded time.
    pub fn sup_invariants(&self) -> Vec<f64> {
        self.sup_s
            .iter()
            .zip(&self.sup_d)
            .map(|(a, b)| a.max(*b))
            .collect()
    }
}

/// First recorded time after which `sup` stays at or below `epsilon` to the
/// end of the trace. `Ok(None)` when the last sample exceeds `epsilon`;
/// `HorizonTooShort` when fewer than `window` time units follow the
/// candidate.
pub fn detect_extinction(
    times: &[f64],
    sup: &[f64],
    epsilon: f64,
    window: f64,
) -> Result<Option<f64>, SimError> {
    match classify_extinction(times, sup, epsilon, window) {
        Extinction::At(t) => Ok(Some(t)),
        Extinction::NotObserved => Ok(None),
        Extinction::HorizonTooShort { candidate } => Err(SimError::HorizonTooShort {
            candidate,
            window,
            end: times.last().copied().unwrap_or(0.0),
        }),
    }
}

pub(crate) fn classify_extinction(times: &[f64], sup: &[f64], epsilon: f64, window: f64) -> Extinction {
    let Some(&end) = times.last() else {
        return Extinction::NotObserved;
    };
    let candidate = match sup.iter().rposition(|&v| !(v <= epsilon)) {
        None => times[0],
        Some(i) if i + 1 == sup.len() => return Extinction::NotObserved,
        Some(i) => times[i + 1],
    };
    let slack = 1e-9 * end.abs().max(1.0);
    if candidate + window > end + slack {
        Extinction::HorizonTooShort { candidate }
    } else {
        Extinction::At(candidate)
    }
}

/// Runs from `t = 0` to `horizon` (rounded to a whole number of steps).
pub fn run(
    tree: &NetworkTree,
    init: &InitialData,
    dt: f64,
    horizon: f64,
    options: &SimOptions,
) -> Result<SimReport, SimError> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(SimError::InvalidHorizon { horizon });
    }
    let mut state = SimState::with_rule(tree, init, dt, options.displacement)?;
    let total_steps = (horizon / dt - 1e-9).ceil().max(0.0) as u64;
    let stride = options.stride.max(1) as u64;
    let mut snapshot_steps: Vec<u64> = options
        .snapshot_times
        .iter()
        .map(|&t| (t / dt).round().max(0.0) as u64)
        .collect();
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();

    let nodes: Vec<usize> = tree.internal_nodes().collect();
    let mut report = SimReport {
        dt,
        times: Vec::new(),
        energy: Vec::new(),
        sup_s: Vec::new(),
        sup_d: Vec::new(),
        boundary_flux: Vec::new(),
        nodes: nodes.clone(),
        node_velocity: Vec::new(),
        edge_sup_s: Vec::new(),
        u_min: Vec::new(),
        u_max: Vec::new(),
        epsilon: 0.0,
        extinction: Extinction::NotObserved,
        predicted_extinction: tree.predicted_extinction().ok(),
        final_constant: 0.0,
        final_spread: 0.0,
        snapshots: Vec::new(),
        final_state: state.snapshot(),
    };
    let mut next_snapshot = snapshot_steps.iter().peekable();
    let record = |state: &SimState, report: &mut SimReport| {
        report.times.push(state.time());
        report.energy.push(state.energy());
        report.sup_s.push(state.sup_s());
        report.sup_d.push(state.sup_d());
        report.boundary_flux.push(state.boundary_flux());
        report
            .node_velocity
            .push(nodes.iter().map(|&n| state.node_velocity(n)).collect());
        report.edge_sup_s.push(state.edge_sup_s());
        let (lo, hi, _) = state.displacement_stats();
        report.u_min.push(lo);
        report.u_max.push(hi);
    };

    for n in 0..=total_steps {
        if n > 0 {
            state.step();
        }
        if n % stride == 0 || n == total_steps {
            record(&state, &mut report);
        }
        while next_snapshot.peek().is_some_and(|&&s| s <= n) {
            if **next_snapshot.peek().unwrap() == n {
                report.snapshots.push(state.snapshot());
            }
            next_snapshot.next();
        }
    }

    let initial_sup = report.sup_s[0].max(report.sup_d[0]);
    report.epsilon = options
        .epsilon
        .unwrap_or(DEFAULT_RELATIVE_EPSILON * initial_sup);
    report.extinction = classify_extinction(
        &report.times,
        &report.sup_invariants(),
        report.epsilon,
        tree.tree_time(),
    );
    let (lo, hi, mean) = state.displacement_stats();
    report.final_constant = mean;
    report.final_spread = hi - lo;
    report.final_state = state.snapshot();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::catalog;
    use crate::network::AlphaSpec;
    use crate::network::{EdgeSpec, TreeSpec};

    fn single_edge(speed: f64) -> NetworkTree {
        TreeSpec {
            node_count: 2,
            edges: vec![EdgeSpec {
                from: 0,
                to: 1,
                speed,
            }],
            alpha: AlphaSpec::Uniform(0.0),
            root_bc: BoundaryKind::Transparent,
        }
        .validate()
        .unwrap()
    }

    fn bump(center: f64) -> Profile {
        Profile::Gaussian {
            center,
            width: 0.05,
            amplitude: 1.0,
        }
    }

    #[test]
    fn cell_counts_follow_speeds() {
        let tree = catalog::star(&[1.0, 2.0], 0.5, BoundaryKind::Dirichlet)
            .validate()
            .unwrap();
        assert_eq!(cell_counts(&tree, 0.25).unwrap(), vec![0, 4, 2]);
        assert!(matches!(
            cell_counts(&tree, 0.3),
            Err(SimError::IncommensurableTimestep { edge: 1, .. })
        ));
        assert!(matches!(
            cell_counts(&tree, 0.5),
            Err(SimError::TimestepTooCoarse { edge: 2, cells: 1 })
        ));
    }

    #[test]
    fn sine_mode_invariants() {
        let tree = single_edge(1.0);
        let init = InitialData::zero(1).with_edge(
            1,
            EdgeInit::displacement(Profile::Sine {
                mode: 1,
                amplitude: 1.0,
            }),
        );
        let state = SimState::new(&tree, &init, 0.01).unwrap();
        for j in 0..=100 {
            let x = j as f64 / 100.0;
            let expected = std::f64::consts::PI * (std::f64::consts::PI * x).cos();
            assert!((state.s(1).get(j) - expected).abs() < 1e-13);
            assert!((state.d(1).get(j) + expected).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let tree = catalog::star(&[1.0, 1.0, 1.0], 1.0, BoundaryKind::Dirichlet)
            .validate()
            .unwrap();
        let mut state = SimState::new(&tree, &InitialData::zero(3), 0.1).unwrap();
        for _ in 0..50 {
            state.step();
        }
        assert_eq!(state.sup_s(), 0.0);
        assert_eq!(state.sup_d(), 0.0);
        assert_eq!(state.energy(), 0.0);
        assert_eq!(state.displacement_stats(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn transparent_edge_transports_without_reflection() {
        let tree = single_edge(1.0);
        // u0 = 0, u1 = h: s and d both start as h and split.
        let h = bump(0.5);
        let init = InitialData::zero(1).with_edge(
            1,
            EdgeInit {
                displacement: Profile::Zero,
                velocity: h.clone(),
            },
        );
        let dt = 0.01;
        let mut state = SimState::new(&tree, &init, dt).unwrap();
        for n in 1..=40 {
            state.step();
            let t = n as f64 * dt;
            for j in 0..=100 {
                let x = j as f64 / 100.0;
                assert!((state.d(1).get(j) - h.value(x - t)).abs() < 1e-14, "n={n} j={j}");
                assert!((state.s(1).get(j) - h.value(x + t)).abs() < 1e-14, "n={n} j={j}");
            }
        }
        for _ in 0..100 {
            state.step();
        }
        assert!(state.sup_s() < 1e-14 && state.sup_d() < 1e-14);
        let (lo, hi, _) = state.displacement_stats();
        assert!(hi - lo < 1e-12);
    }

    #[test]
    fn dirichlet_root_flips_sign() {
        let tree = single_edge(1.0).with_root_bc(BoundaryKind::Dirichlet);
        let h = bump(0.3);
        let init = InitialData::zero(1).with_edge(
            1,
            EdgeInit {
                displacement: Profile::Zero,
                velocity: h.clone(),
            },
        );
        let mut state = SimState::new(&tree, &init, 0.01).unwrap();
        for _ in 0..60 {
            state.step();
        }
        // The s pulse hit the root at t = 0.3 and returned as -d.
        for j in 0..=100 {
            let x = j as f64 / 100.0;
            let expected = h.value(x - 0.6) - h.value(0.6 - x);
            assert!((state.d(1).get(j) - expected).abs() < 1e-14, "j={j}");
        }
    }

    #[test]
    fn energy_of_constant_invariant() {
        let tree = single_edge(1.0);
        let init = InitialData::zero(1).with_edge(
            1,
            EdgeInit::displacement(Profile::Polynomial {
                coefficients: vec![0.0, 1.0],
            }),
        );
        // s = c u_x = 1, d = -1: E = (1 + 1) / 4
        let state = SimState::new(&tree, &init, 0.1).unwrap();
        assert!((state.energy() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn discontinuous_data_rejected() {
        let tree = catalog::star(&[1.0, 1.0, 1.0], 0.0, BoundaryKind::Neumann)
            .validate()
            .unwrap();
        let init = InitialData::zero(3).with_edge(
            2,
            EdgeInit::displacement(Profile::Polynomial {
                coefficients: vec![1.0],
            }),
        );
        assert!(matches!(
            SimState::new(&tree, &init, 0.1),
            Err(SimError::IncompatibleInitialData { node: Some(1), .. })
        ));
        let dirichlet = tree.with_root_bc(BoundaryKind::Dirichlet);
        let shifted = InitialData::zero(3).with_edge(
            1,
            EdgeInit::displacement(Profile::Polynomial {
                coefficients: vec![0.5, -0.5],
            }),
        );
        assert!(SimState::new(&dirichlet, &shifted, 0.1).is_err());
    }

    #[test]
    fn extinction_detection_rules() {
        let times: Vec<f64> = (0..=10).map(f64::from).collect();
        let mut sup = vec![1.0; 11];
        for v in &mut sup[4..] {
            *v = 0.0;
        }
        assert_eq!(detect_extinction(&times, &sup, 1e-10, 3.0), Ok(Some(4.0)));
        assert!(matches!(
            detect_extinction(&times, &sup, 1e-10, 7.0),
            Err(SimError::HorizonTooShort { .. })
        ));
        assert_eq!(detect_extinction(&times, &[0.0; 11], 0.0, 2.0), Ok(Some(0.0)));
        sup[10] = 1.0;
        assert_eq!(detect_extinction(&times, &sup, 1e-10, 1.0), Ok(None));
    }

    #[test]
    fn trapezoid_rule_is_second_order() {
        let tree = single_edge(1.0).with_root_bc(BoundaryKind::Dirichlet);
        let init = InitialData::zero(1).with_edge(
            1,
            EdgeInit::displacement(Profile::Gaussian {
                center: 0.5,
                width: 0.08,
                amplitude: 1.0,
            }),
        );
        let err = |dt: f64| {
            let mut a = SimState::with_rule(&tree, &init, dt, DisplacementRule::Trapezoid).unwrap();
            let mut b = SimState::new(&tree, &init, dt).unwrap();
            for _ in 0..(0.5 / dt).round() as usize {
                a.step();
                b.step();
            }
            a.edge_displacement(1)
                .iter()
                .zip(b.edge_displacement(1))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.01) / err(0.005);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}

//! Closed-form point spectra of star and bone trees.
//!
//! Star: Dirichlet root, edge 1 into a centre of degree `N`, all other edges
//! pendant. Bone: transparent root, edge 1 into node 1 of degree `k1`, edge 2
//! linking node 1 to node 2 of degree `k2`, all other edges pendant.
//! Eigenfunctions are `U = (u, lambda u)` with `u_i = a_i e^{lambda x/c_i} +
//! b_i e^{-lambda x/c_i}` on each edge.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::charsim::{EdgeInit, InitialData, Profile};
use crate::network::{BoundaryKind, NetworkTree, ALPHA_TOLERANCE};

/// Distance from the cut (or zero) below which `branch_log` refuses.
pub const BRANCH_CUT_TOLERANCE: f64 = 1e-12;
/// Fewest samples per edge accepted by `eigen_residual`.
pub const MIN_RESIDUAL_POINTS: usize = 5;
/// Fewest trace points accepted by `decay_rate_fit`.
pub const MIN_FIT_POINTS: usize = 10;
/// Energies at or below this fraction of the trace maximum count as zero.
pub const ZERO_ENERGY_FRACTION: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("log is undefined at {z} (zero or on the negative imaginary axis)")]
    BranchCut { z: Complex64 },
    #[error("ill-posed junction: alpha = {alpha} equals its degree {k}")]
    IllPosedAlpha { alpha: f64, k: usize },
    #[error("junction degree must be at least 2, got {k}")]
    DegreeTooSmall { k: usize },
    #[error("no point spectrum: the defining ratio vanishes")]
    NoEigenvalue,
    #[error("need at least {MIN_RESIDUAL_POINTS} samples per edge, edge {edge} has {points}")]
    GridTooCoarse { edge: usize, points: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("need at least {MIN_FIT_POINTS} trace points with positive energy, got {points}")]
    InsufficientTrace { points: usize },
    #[error("energy vanishes on the fitted window; an extinct trajectory has no decay rate")]
    ZeroEnergy,
    #[error("tree is neither a Dirichlet star nor a transparent bone")]
    UnsupportedGeometry,
    #[error("expected {expected} edge speeds, got {got}")]
    SpeedCount { expected: usize, got: usize },
}

/// Logarithm on the plane slit along the negative imaginary axis, with
/// argument in `(-pi/2, 3pi/2)`.
pub fn branch_log(z: Complex64) -> Result<Complex64, SpectrumError> {
    if z.norm() <= BRANCH_CUT_TOLERANCE || (z.re.abs() <= BRANCH_CUT_TOLERANCE && z.im < 0.0) {
        return Err(SpectrumError::BranchCut { z });
    }
    let mut arg = z.im.atan2(z.re);
    if arg <= -PI / 2.0 {
        arg += 2.0 * PI;
    }
    Ok(Complex64::new(z.norm().ln(), arg))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Star { n: usize, alpha1: f64, c1: f64 },
    Bone { k1: usize, k2: usize, alpha1: f64, alpha2: f64, c2: f64 },
}

impl Geometry {
    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        match *self {
            Geometry::Star { n, .. } => n,
            Geometry::Bone { k1, k2, .. } => k1 + k2 - 1,
        }
    }

    /// Speed that sets the ladder spacing.
    pub fn ladder_speed(&self) -> f64 {
        match *self {
            Geometry::Star { c1, .. } => c1,
            Geometry::Bone { c2, .. } => c2,
        }
    }
}

/// Eigenvalues `lambda_k = base + k * spacing`, `k` any integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenFamily {
    pub geometry: Geometry,
    /// Right-hand side of `e^{2 lambda / c} = ratio`.
    pub ratio: f64,
    pub base: Option<Complex64>,
    pub spacing: Complex64,
    pub exists: bool,
}

impl EigenFamily {
    fn from_ratio(geometry: Geometry, ratio: f64) -> Result<Self, SpectrumError> {
        let c = geometry.ladder_speed();
        let spacing = Complex64::new(0.0, c * PI);
        if ratio == 0.0 {
            return Ok(EigenFamily {
                geometry,
                ratio,
                base: None,
                spacing,
                exists: false,
            });
        }
        let base = 0.5 * c * branch_log(Complex64::new(ratio, 0.0))?;
        Ok(EigenFamily {
            geometry,
            ratio,
            base: Some(base),
            spacing,
            exists: true,
        })
    }

    pub fn lambda(&self, k: i64) -> Option<Complex64> {
        self.base.map(|b| b + self.spacing * k as f64)
    }

    pub fn lambdas(&self, ks: impl IntoIterator<Item = i64>) -> Vec<(i64, Complex64)> {
        ks.into_iter()
            .filter_map(|k| self.lambda(k).map(|l| (k, l)))
            .collect()
    }
}

fn check_junction(k: usize, alpha: f64) -> Result<(), SpectrumError> {
    if k < 2 {
        return Err(SpectrumError::DegreeTooSmall { k });
    }
    if (alpha - k as f64).abs() <= ALPHA_TOLERANCE {
        return Err(SpectrumError::IllPosedAlpha { alpha, k });
    }
    Ok(())
}

/// Snaps a factor within the damping tolerance of zero to exactly zero.
fn snapped(x: f64) -> f64 {
    if x.abs() <= ALPHA_TOLERANCE {
        0.0
    } else {
        x
    }
}

pub fn star_eigenvalues(n: usize, alpha1: f64, c1: f64) -> Result<EigenFamily, SpectrumError> {
    check_junction(n, alpha1)?;
    let nf = n as f64;
    let ratio = snapped(nf - 2.0 - alpha1) / (nf - alpha1);
    EigenFamily::from_ratio(Geometry::Star { n, alpha1, c1 }, ratio)
}

pub fn bone_eigenvalues(
    k1: usize,
    k2: usize,
    alpha1: f64,
    alpha2: f64,
    c2: f64,
) -> Result<EigenFamily, SpectrumError> {
    check_junction(k1, alpha1)?;
    check_junction(k2, alpha2)?;
    let (k1f, k2f) = (k1 as f64, k2 as f64);
    let ratio = snapped(2.0 + alpha1 - k1f) * snapped(2.0 + alpha2 - k2f)
        / ((alpha1 - k1f) * (alpha2 - k2f));
    EigenFamily::from_ratio(
        Geometry::Bone {
            k1,
            k2,
            alpha1,
            alpha2,
            c2,
        },
        ratio,
    )
}

/// Recognises a star (Dirichlet root) or bone (transparent root) tree.
pub fn eigen_family_for(tree: &NetworkTree) -> Result<EigenFamily, SpectrumError> {
    let internal: Vec<usize> = tree.internal_nodes().collect();
    match (tree.root_bc(), internal.as_slice()) {
        (BoundaryKind::Dirichlet, [1]) => {
            star_eigenvalues(tree.degree(1), tree.alpha(1).unwrap(), tree.speed(1))
        }
        (BoundaryKind::Transparent, [1, m]) if tree.parent_node(*m) == 1 => {
            // bone_eigenfunction additionally needs the link to be edge 2.
            bone_eigenvalues(
                tree.degree(1),
                tree.degree(*m),
                tree.alpha(1).unwrap(),
                tree.alpha(*m).unwrap(),
                tree.speed(*m),
            )
        }
        _ => Err(SpectrumError::UnsupportedGeometry),
    }
}

/// Eigenfunction on one edge: coefficients plus samples of `u` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeEigen {
    pub edge: usize,
    pub speed: f64,
    pub a: Complex64,
    pub b: Complex64,
    pub x: Vec<f64>,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl EdgeEigen {
    fn new(edge: usize, speed: f64, lambda: Complex64, a: Complex64, b: Complex64, points: usize) -> Self {
        let x: Vec<f64> = (0..points).map(|j| j as f64 / (points - 1) as f64).collect();
        let u: Vec<Complex64> = x.iter().map(|&x| eval(a, b, lambda / speed, x, 0)).collect();
        let v = u.iter().map(|u| lambda * u).collect();
        EdgeEigen {
            edge,
            speed,
            a,
            b,
            x,
            u,
            v,
        }
    }

    /// `u` (order 0) or `u'` (order 1) from the coefficients.
    pub fn analytic(&self, lambda: Complex64, x: f64, order: u32) -> Complex64 {
        eval(self.a, self.b, lambda / self.speed, x, order)
    }
}

fn eval(a: Complex64, b: Complex64, rate: Complex64, x: f64, order: u32) -> Complex64 {
    let ep = (rate * x).exp();
    let em = (-rate * x).exp();
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    rate.powu(order) * (a * ep + sign * b * em)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenFunctionSamples {
    pub lambda: Complex64,
    /// Entry `i - 1` belongs to edge `i`.
    pub edges: Vec<EdgeEigen>,
}

impl EigenFunctionSamples {
    /// Real part of `scale * U`, as initial data for the simulator.
    pub fn initial_data(&self, scale: Complex64) -> InitialData {
        InitialData {
            edges: self
                .edges
                .iter()
                .map(|e| {
                    let component = |s: Complex64| Profile::EigenReal {
                        a: e.a,
                        b: e.b,
                        rate: self.lambda / e.speed,
                        scale: s,
                    };
                    EdgeInit {
                        displacement: component(scale),
                        velocity: component(scale * self.lambda),
                    }
                })
                .collect(),
        }
    }

    /// `Re(e^{lambda t} u_i(x))` from the coefficients.
    pub fn evolved_displacement(&self, edge: usize, t: f64, x: f64) -> f64 {
        let e = &self.edges[edge - 1];
        ((self.lambda * t).exp() * e.analytic(self.lambda, x, 0)).re
    }
}

fn check_speeds(geometry: &Geometry, speeds: &[f64]) -> Result<(), SpectrumError> {
    if speeds.len() != geometry.edge_count() {
        return Err(SpectrumError::SpeedCount {
            expected: geometry.edge_count(),
            got: speeds.len(),
        });
    }
    if let Some(i) = speeds.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(SpectrumError::DegenerateInput(format!(
            "edge {} has non-positive speed {}",
            i + 1,
            speeds[i]
        )));
    }
    Ok(())
}

/// `u_1 = e^{lambda x/c_1} - e^{-lambda x/c_1}` on the root edge and
/// `u_i = (e^{lambda/c_1} - e^{-lambda/c_1}) e^{-lambda x/c_i}` elsewhere.
/// `speeds[0]` must equal the family's `c1`.
pub fn star_eigenfunction(
    family: &EigenFamily,
    speeds: &[f64],
    k: i64,
    samples_per_edge: usize,
) -> Result<EigenFunctionSamples, SpectrumError> {
    let Geometry::Star { c1, .. } = family.geometry else {
        return Err(SpectrumError::UnsupportedGeometry);
    };
    check_speeds(&family.geometry, speeds)?;
    let lambda = family.lambda(k).ok_or(SpectrumError::NoEigenvalue)?;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let at_centre = (lambda / c1).exp() - (-lambda / c1).exp();
    let points = samples_per_edge.max(2);
    let mut edges = vec![EdgeEigen::new(1, c1, lambda, one, -one, points)];
    for (i, &c) in speeds.iter().enumerate().skip(1) {
        edges.push(EdgeEigen::new(i + 1, c, lambda, zero, at_centre, points));
    }
    Ok(EigenFunctionSamples { lambda, edges })
}

/// Bone eigenfunction normalised by `a_1 = 1`. Edges as in
/// `catalog::bone`: pendants of node 1 are `3..=k1`, of node 2
/// `k1+1..=k1+k2-1`.
pub fn bone_eigenfunction(
    family: &EigenFamily,
    speeds: &[f64],
    k: i64,
    samples_per_edge: usize,
) -> Result<EigenFunctionSamples, SpectrumError> {
    let Geometry::Bone { k1, alpha1, c2, .. } = family.geometry else {
        return Err(SpectrumError::UnsupportedGeometry);
    };
    check_speeds(&family.geometry, speeds)?;
    let lambda = family.lambda(k).ok_or(SpectrumError::NoEigenvalue)?;
    let c1 = speeds[0];
    let zero = Complex64::new(0.0, 0.0);
    let a1 = Complex64::new(1.0, 0.0);
    let e1 = (lambda / c1).exp();
    let a2 = -(alpha1 - k1 as f64) * e1 * a1 / 2.0;
    let b2 = a1 * e1 - a2;
    let at_node2 = a2 * (lambda / c2).exp() + b2 * (-lambda / c2).exp();
    let points = samples_per_edge.max(2);
    let mut edges = vec![
        EdgeEigen::new(1, c1, lambda, a1, zero, points),
        EdgeEigen::new(2, speeds[1], lambda, a2, b2, points),
    ];
    for (i, &c) in speeds.iter().enumerate().skip(2) {
        let b = if i < k1 { a1 * e1 } else { at_node2 };
        edges.push(EdgeEigen::new(i + 1, c, lambda, zero, b, points));
    }
    Ok(EigenFunctionSamples { lambda, edges })
}

/// Largest normalised defect of `(u, v)` as an eigenpair on `tree`:
///
/// * interior: `c^2 u''` by three-point differences against `lambda^2 u`,
///   using the exact discrete symbol of exponentials, as a backward error;
/// * agreement of samples with the stored coefficients;
/// * node conditions (continuity, damped Kirchhoff law, root and leaf
///   conditions) from analytic derivatives;
/// * `v = lambda u`.
///
/// Everything but the interior term is scaled by `sup |u|` times
/// `max(1, |lambda|)`.
pub fn eigen_residual(
    tree: &NetworkTree,
    lambda: Complex64,
    eigen: &EigenFunctionSamples,
) -> Result<f64, SpectrumError> {
    if eigen.edges.len() != tree.edge_count() {
        return Err(SpectrumError::DegenerateInput(format!(
            "{} edges sampled for a network with {} edges",
            eigen.edges.len(),
            tree.edge_count()
        )));
    }
    for e in &eigen.edges {
        if e.u.len() < MIN_RESIDUAL_POINTS || e.v.len() != e.u.len() || e.x.len() != e.u.len() {
            return Err(SpectrumError::GridTooCoarse {
                edge: e.edge,
                points: e.u.len().min(e.v.len()).min(e.x.len()),
            });
        }
    }
    let sup = eigen
        .edges
        .iter()
        .flat_map(|e| e.u.iter())
        .map(|u| u.norm())
        .fold(0.0, f64::max);
    if !(sup > 0.0) {
        return Err(SpectrumError::DegenerateInput(
            "eigenfunction vanishes identically".into(),
        ));
    }
    let scale = sup * lambda.norm().max(1.0);
    let mut worst: f64 = 0.0;

    for (i, e) in eigen.edges.iter().enumerate() {
        let c = tree.speed(i + 1);
        let h = e.x[1] - e.x[0];
        let mu_h = lambda / c * h;
        let symbol = if mu_h.norm() < 1e-4 {
            // 2 (cosh z - 1) / z^2 by its series
            let z2 = mu_h * mu_h;
            1.0 + z2 / 12.0 + z2 * z2 / 360.0
        } else {
            2.0 * (mu_h.cosh() - 1.0) / (mu_h * mu_h)
        };
        for j in 1..e.u.len() - 1 {
            let second = (e.u[j - 1] - 2.0 * e.u[j] + e.u[j + 1]) * (c * c / (h * h));
            let target = lambda * lambda * symbol * e.u[j];
            let magnitude = (e.u[j - 1].norm() + 2.0 * e.u[j].norm() + e.u[j + 1].norm()) * (c * c / (h * h))
                + target.norm();
            worst = worst.max((second - target).norm() / magnitude.max(f64::MIN_POSITIVE));
        }
        for ((x, u), v) in e.x.iter().zip(&e.u).zip(&e.v) {
            worst = worst.max((u - e.analytic(lambda, *x, 0)).norm() / sup);
            worst = worst.max((v - lambda * u).norm() / scale);
        }
    }

    let edge = |i: usize| &eigen.edges[i - 1];
    let u_at = |i: usize, x: f64| edge(i).analytic(lambda, x, 0);
    let cu_x = |i: usize, x: f64| tree.speed(i) * edge(i).analytic(lambda, x, 1);

    let root = match tree.root_bc() {
        BoundaryKind::Dirichlet => u_at(1, 0.0) * lambda.norm().max(1.0),
        BoundaryKind::Neumann => cu_x(1, 0.0),
        // d = u_t - c u_x = 0
        BoundaryKind::Transparent => lambda * u_at(1, 0.0) - cu_x(1, 0.0),
    };
    worst = worst.max(root.norm() / scale);

    for n in 1..tree.node_count() {
        if tree.is_external(n) {
            // s = u_t + c u_x = 0
            let leaf = lambda * u_at(n, 1.0) + cu_x(n, 1.0);
            worst = worst.max(leaf.norm() / scale);
            continue;
        }
        let at_node = u_at(n, 1.0);
        let mut kirchhoff = cu_x(n, 1.0) - tree.alpha(n).unwrap() * lambda * at_node;
        for &c in tree.children(n) {
            worst = worst.max((u_at(c, 0.0) - at_node).norm() / sup);
            kirchhoff -= cu_x(c, 0.0);
        }
        worst = worst.max(kirchhoff.norm() / scale);
    }
    Ok(worst)
}

/// Least-squares slope of `ln E` against `t` over the trailing half of the
/// trace.
pub fn decay_rate_fit(times: &[f64], energy: &[f64]) -> Result<f64, SpectrumError> {
    let n = times.len().min(energy.len());
    let positive = energy[..n].iter().filter(|&&e| e > 0.0).count();
    if positive < MIN_FIT_POINTS {
        return Err(if n >= MIN_FIT_POINTS {
            SpectrumError::ZeroEnergy
        } else {
            SpectrumError::InsufficientTrace { points: positive }
        });
    }
    let peak = energy[..n].iter().copied().fold(0.0, f64::max);
    let start = n / 2;
    let (ts, es) = (&times[start..n], &energy[start..n]);
    if es.iter().any(|&e| !(e > ZERO_ENERGY_FRACTION * peak)) {
        return Err(SpectrumError::ZeroEnergy);
    }
    let m = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / m;
    let y_mean = es.iter().map(|e| e.ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, e) in ts.iter().zip(es) {
        sxy += (t - t_mean) * (e.ln() - y_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    if sxx == 0.0 {
        return Err(SpectrumError::InsufficientTrace { points: ts.len() });
    }
    Ok(sxy / sxx)
}

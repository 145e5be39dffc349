//! Junction maps between incoming and outgoing characteristic values.
//!
//! At an internal node joining a parent edge and `k - 1` child edges, the
//! incoming values are `(d_parent(1), s_child_1(0), ..., s_child_{k-1}(0))`
//! and the outgoing ones `(s_parent(1), d_child_1(0), ..., d_child_{k-1}(0))`,
//! children in ascending edge order. Continuity of displacement and the
//! damped Kirchhoff law
//!
//! ```text
//! s_1 + d_1 = s_i + d_i,                       i = 2..k
//! (1 - a) s_1 + sum d_i = (1 + a) d_1 + sum s_i
//! ```
//!
//! determine the outgoing values uniquely whenever `a != k`.

use thiserror::Error;

use crate::network::{BoundaryKind, ALPHA_TOLERANCE};

/// Pivots smaller than this are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScatterError {
    #[error("junction with k = {k} and alpha = {alpha} has no unique solution")]
    SingularJunction { k: usize, alpha: f64 },
    #[error("junction degree must be at least 2, got {k}")]
    DegreeTooSmall { k: usize },
}

/// Row-major `k x k` map from incoming to outgoing characteristic values.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeScatterMatrix {
    k: usize,
    alpha: f64,
    entries: Vec<f64>,
}

impl NodeScatterMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.k + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.k..(row + 1) * self.k]
    }

    /// Outgoing values for the given incoming values.
    pub fn apply(&self, incoming: &[f64], outgoing: &mut [f64]) {
        debug_assert_eq!(incoming.len(), self.k);
        for (r, out) in outgoing.iter_mut().enumerate().take(self.k) {
            *out = self
                .row(r)
                .iter()
                .zip(incoming)
                .map(|(a, x)| a * x)
                .sum();
        }
    }

    pub fn max_abs_diff(&self, other: &NodeScatterMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check(k: usize, alpha: f64) -> Result<(), ScatterError> {
    if k < 2 {
        return Err(ScatterError::DegreeTooSmall { k });
    }
    if (alpha - k as f64).abs() <= ALPHA_TOLERANCE {
        return Err(ScatterError::SingularJunction { k, alpha });
    }
    Ok(())
}

/// Solves the junction system by Gaussian elimination with partial pivoting.
pub fn assemble_internal(k: usize, alpha: f64) -> Result<NodeScatterMatrix, ScatterError> {
    check(k, alpha)?;
    // M * out = B * in, unknowns (s_1, d_2..d_k), knowns (d_1, s_2..s_k).
    let mut m = vec![0.0; k * k];
    let mut b = vec![0.0; k * k];
    m[0] = 1.0 - alpha;
    b[0] = 1.0 + alpha;
    for j in 1..k {
        m[j] = 1.0;
        b[j] = 1.0;
        // s_1 - d_j = s_j - d_1
        m[j * k] = 1.0;
        m[j * k + j] = -1.0;
        b[j * k] = -1.0;
        b[j * k + j] = 1.0;
    }

    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&r1, &r2| m[r1 * k + col].abs().total_cmp(&m[r2 * k + col].abs()))
            .unwrap();
        if m[pivot_row * k + col].abs() < PIVOT_TOLERANCE {
            return Err(ScatterError::SingularJunction { k, alpha });
        }
        if pivot_row != col {
            for c in 0..k {
                m.swap(col * k + c, pivot_row * k + c);
                b.swap(col * k + c, pivot_row * k + c);
            }
        }
        let p = m[col * k + col];
        for r in 0..k {
            if r == col {
                continue;
            }
            let f = m[r * k + col] / p;
            if f == 0.0 {
                continue;
            }
            for c in 0..k {
                m[r * k + c] -= f * m[col * k + c];
                b[r * k + c] -= f * b[col * k + c];
            }
        }
    }
    for r in 0..k {
        let p = m[r * k + r];
        for c in 0..k {
            b[r * k + c] /= p;
        }
    }
    Ok(NodeScatterMatrix {
        k,
        alpha,
        entries: b,
    })
}

/// Builds the junction map by back-substitution: `d_k` first, then the
/// chain `d_{j} = d_{j+1} - s_j + s_{j+1}` down to `d_2`, then
/// `s_1 = d_2 - d_1 + s_2`.
pub fn closed_form_internal(k: usize, alpha: f64) -> Result<NodeScatterMatrix, ScatterError> {
    check(k, alpha)?;
    // Rows are coefficient vectors over the inputs (d_1, s_2, ..., s_k),
    // where s_j sits at input index j - 1.
    let mut rows = vec![vec![0.0; k]; k];
    let denom = k as f64 - alpha;
    let last = &mut rows[k - 1];
    last[0] = 2.0 / denom;
    for coeff in last.iter_mut().take(k - 1).skip(1) {
        *coeff = 2.0 / denom;
    }
    last[k - 1] += (alpha - k as f64 + 2.0) / denom;

    for j in (2..k).rev() {
        // output row of d_j is j - 1; d_{j+1} is row j
        let mut row = rows[j].clone();
        row[j - 1] -= 1.0;
        row[j] += 1.0;
        rows[j - 1] = row;
    }
    let mut s1 = rows[1].clone();
    s1[0] -= 1.0;
    s1[1] += 1.0;
    rows[0] = s1;

    Ok(NodeScatterMatrix {
        k,
        alpha,
        entries: rows.concat(),
    })
}

/// Residuals of the junction equations for a given incoming/outgoing pair:
/// maximum over continuity mismatches and the Kirchhoff balance.
pub fn junction_residual(alpha: f64, incoming: &[f64], outgoing: &[f64]) -> f64 {
    let (d1, s1) = (incoming[0], outgoing[0]);
    let mut worst: f64 = 0.0;
    let mut kirchhoff = (1.0 - alpha) * s1 - (1.0 + alpha) * d1;
    for j in 1..incoming.len() {
        let (sj, dj) = (incoming[j], outgoing[j]);
        worst = worst.max(((s1 + d1) - (sj + dj)).abs());
        kirchhoff += dj - sj;
    }
    worst.max(kirchhoff.abs())
}

/// `(1 - alpha) v_parent + sum v_children`. When `alpha = k` a classical
/// solution exists only if this vanishes for the initial velocities at the
/// junction.
pub fn compatibility_defect(v_parent: f64, v_children: &[f64], alpha: f64) -> f64 {
    (1.0 - alpha) * v_parent + v_children.iter().sum::<f64>()
}

/// Root condition in characteristic form, `d(0, t) = coefficient * s(0, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootReflection {
    pub kind: BoundaryKind,
    pub coefficient: f64,
}

pub fn root_reflection(kind: BoundaryKind) -> RootReflection {
    let coefficient = match kind {
        BoundaryKind::Dirichlet => -1.0,
        BoundaryKind::Neumann => 1.0,
        BoundaryKind::Transparent => 0.0,
    };
    RootReflection { kind, coefficient }
}

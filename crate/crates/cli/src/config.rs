//! JSON run configuration. The schema is documented in `docs/config.md`.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use stringnet::charsim::{EdgeInit, InitialData, Profile};
use stringnet::network::{AlphaSpec, BoundaryKind, EdgeSpec, NetworkTree, TreeSpec};
use stringnet::spectrum::{bone_eigenfunction, eigen_family_for, star_eigenfunction, EigenFunctionSamples, Geometry};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkConfig,
    #[serde(default, skip_serializing_if = "InitialConfig::is_empty")]
    pub initial: InitialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Absolute extinction threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crosscheck: Option<CrosscheckConfig>,
    /// File the config was read from, for error messages.
    #[serde(skip)]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Node labels are `0..nodes`; label 0 is the root.
    pub nodes: usize,
    pub edges: Vec<EdgeConfig>,
    /// A number, `"fts"`, or an object keyed by internal node label.
    pub alpha: AlphaSpec,
    pub root_bc: BoundaryKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub from: usize,
    pub to: usize,
    pub speed: f64,
    /// Physical length; the loader uses `speed / length` on a unit edge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeInitConfig>,
    /// Real part of a closed-form eigenfunction, added to `edges`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen: Option<EigenSeed>,
}

impl InitialConfig {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty() && self.eigen.is_none()
    }
}

/// Profiles are in the edge coordinate running from the endpoint nearer the
/// root (`x = 0`) to the other (`x = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeInitConfig {
    /// Endpoint labels, in either order.
    pub edge: [usize; 2],
    #[serde(default)]
    pub displacement: Profile,
    #[serde(default)]
    pub velocity: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenSeed {
    #[serde(default)]
    pub k: i64,
    #[serde(default = "unit")]
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_k_min")]
    pub k_min: i64,
    #[serde(default = "default_k_max")]
    pub k_max: i64,
    /// Samples per edge for the eigenfunction residual.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Same grammar as `--sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            k_min: default_k_min(),
            k_max: default_k_max(),
            samples: default_samples(),
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosscheckConfig {
    /// Coarse finite-difference resolution; the fine run uses twice this.
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_courant")]
    pub courant: f64,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    /// Simulator step; falls back to the top-level `dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for CrosscheckConfig {
    fn default() -> Self {
        CrosscheckConfig {
            cells: default_cells(),
            courant: default_courant(),
            times: default_times(),
            dt: None,
        }
    }
}

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn default_k_min() -> i64 {
    -2
}
fn default_k_max() -> i64 {
    2
}
fn default_samples() -> usize {
    201
}
fn default_cells() -> usize {
    400
}
fn default_courant() -> f64 {
    0.5
}
fn default_times() -> Vec<f64> {
    vec![1.0]
}

/// One edge whose length was folded into its speed.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaling {
    pub from: usize,
    pub to: usize,
    pub length: f64,
    pub speed: f64,
    pub unit_speed: f64,
}

/// Validated network plus the bookkeeping needed to report in config labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedNetwork {
    pub tree: NetworkTree,
    pub rescaled: Vec<Rescaling>,
}

impl LoadedNetwork {
    /// Config labels of the endpoints of internal edge `edge`, parent first.
    pub fn endpoints(&self, edge: usize) -> (usize, usize) {
        let t = &self.tree;
        (t.label(t.parent_node(edge)), t.label(edge))
    }

    /// Internal edge joining two labelled nodes.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        let (na, nb) = (self.tree.node_by_label(a)?, self.tree.node_by_label(b)?);
        if na != 0 && self.tree.parent_node(na) == nb {
            Some(na)
        } else if nb != 0 && self.tree.parent_node(nb) == na {
            Some(nb)
        } else {
            None
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, source: &str) -> Result<RunConfig, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = match e.path().to_string() {
                p if p == "." => "(top level)".to_string(),
                p => p,
            };
            CliError::config(source, field, e.into_inner().to_string())
        })?;
        cfg.source = source.to_string();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        RunConfig::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn error(&self, field: impl Into<String>, message: impl Into<String>) -> CliError {
        CliError::config(&self.source, field, message)
    }

    /// Builds and validates the tree, folding edge lengths into speeds.
    pub fn network(&self) -> Result<LoadedNetwork, CliError> {
        let net = &self.network;
        let mut edges = Vec::with_capacity(net.edges.len());
        let mut rescaled = Vec::new();
        for (i, e) in net.edges.iter().enumerate() {
            let mut speed = e.speed;
            if let Some(length) = e.length {
                if !(length > 0.0 && length.is_finite()) {
                    return Err(self.error(
                        format!("network.edges[{i}].length"),
                        format!("edge length must be positive and finite, got {length}"),
                    ));
                }
                speed = e.speed / length;
                if length != 1.0 {
                    rescaled.push(Rescaling {
                        from: e.from,
                        to: e.to,
                        length,
                        speed: e.speed,
                        unit_speed: speed,
                    });
                }
            }
            edges.push(EdgeSpec {
                from: e.from,
                to: e.to,
                speed,
            });
        }
        let tree = TreeSpec {
            node_count: net.nodes,
            edges,
            alpha: net.alpha.clone(),
            root_bc: net.root_bc,
        }
        .validate()?;
        Ok(LoadedNetwork { tree, rescaled })
    }

    pub fn require_dt(&self) -> Result<f64, CliError> {
        self.dt.ok_or_else(|| self.error("dt", "a time step is required for this command"))
    }

    pub fn require_horizon(&self) -> Result<f64, CliError> {
        self.horizon
            .ok_or_else(|| self.error("horizon", "a horizon is required for this command"))
    }

    /// Initial data in internal edge order.
    pub fn initial_data(&self, net: &LoadedNetwork) -> Result<InitialData, CliError> {
        let mut data = InitialData::zero(net.tree.edge_count());
        let mut seen = vec![false; net.tree.edge_count() + 1];
        for (i, e) in self.initial.edges.iter().enumerate() {
            let field = format!("initial.edges[{i}]");
            let id = net.edge_between(e.edge[0], e.edge[1]).ok_or_else(|| {
                self.error(
                    format!("{field}.edge"),
                    format!("no edge between nodes {} and {}", e.edge[0], e.edge[1]),
                )
            })?;
            if std::mem::replace(&mut seen[id], true) {
                return Err(self.error(format!("{field}.edge"), "edge listed twice"));
            }
            for (name, p) in [("displacement", &e.displacement), ("velocity", &e.velocity)] {
                p.check().map_err(|m| self.error(format!("{field}.{name}"), m))?;
            }
            data = data.with_edge(
                id,
                EdgeInit {
                    displacement: e.displacement.clone(),
                    velocity: e.velocity.clone(),
                },
            );
        }
        if let Some(seed) = &self.initial.eigen {
            let eigen = self
                .eigenfunction(net, seed.k, 2)
                .map_err(|e| self.error("initial.eigen", e.to_string()))?;
            data = data.combine(1.0, &eigen.initial_data(Complex64::new(seed.scale, 0.0)), 1.0);
        }
        Ok(data)
    }

    /// Closed-form eigenfunction of index `k` on a Dirichlet star or a
    /// transparent bone whose link is edge 2.
    pub fn eigenfunction(
        &self,
        net: &LoadedNetwork,
        k: i64,
        samples: usize,
    ) -> Result<EigenFunctionSamples, CliError> {
        let tree = &net.tree;
        let family = eigen_family_for(tree)?;
        let speeds = tree.speeds().to_vec();
        let eigen = match family.geometry {
            Geometry::Star { .. } => star_eigenfunction(&family, &speeds, k, samples)?,
            Geometry::Bone { .. } => {
                let k1 = tree.degree(1);
                let laid_out = tree.node_count() > 2
                    && tree.is_internal(2)
                    && (2..tree.node_count()).all(|e| (tree.parent_node(e) == 1) == (e <= k1));
                if !laid_out {
                    return Err(self.error(
                        "network.edges",
                        "bone eigenfunctions need edge 2 to join the internal nodes and \
                         edges 3..=k1 to hang off node 1",
                    ));
                }
                bone_eigenfunction(&family, &speeds, k, samples)?
            }
        };
        Ok(eigen)
    }
}

//! Network instance model and constraint functions.
//!
//! An instance holds `n` nodes and `n0` ranged edges, each with strictly
//! positive squared lower/upper distance bounds. Constraints are indexed
//! `k = 0..=r` with `r = 2 * n0`:
//!
//! - `k = 0`: objective `f0(x) = sum_i ||x_i||^2`,
//! - `1 <= k <= n0`: squared edge length `||x_i - x_j||^2` of edge `k - 1`,
//! - `n0 < k <= r`: the reflected form `2 * lower_sq - ||x_i - x_j||^2`
//!   that turns each lower bound into an upper-bounded constraint.
//!
//! Node indices are 0-based in memory; the text formats in [`crate::fileio`]
//! use 1-based labels.

use crate::error::{Error, Result};

/// Spatial dimension; this artifact is planar throughout.
pub const DIMENSION: usize = 2;

/// A ranged link between two distinct nodes, bounds stored squared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// First endpoint, 0-based.
    pub i: usize,
    /// Second endpoint, 0-based.
    pub j: usize,
    /// Squared lower distance bound, strictly positive.
    pub lower_sq: f64,
    /// Squared upper distance bound, at least `lower_sq`.
    pub upper_sq: f64,
}

/// Immutable noisy-distance network instance.
#[derive(Debug, Clone)]
pub struct NetworkInstance {
    node_count: usize,
    edges: Vec<Edge>,
}

impl NetworkInstance {
    /// Validates and builds an instance. Rejects self-loops, duplicate
    /// unordered pairs, out-of-range node indices, and bound violations
    /// (`0 < lower_sq <= upper_sq`).
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::InvalidInstance(format!(
                "need at least 2 nodes, got {node_count}"
            )));
        }
        if edges.is_empty() {
            return Err(Error::InvalidInstance("edge list is empty".into()));
        }
        let mut seen: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (idx, e) in edges.iter().enumerate() {
            if e.i >= node_count || e.j >= node_count {
                return Err(Error::InvalidInstance(format!(
                    "edge {idx} references node out of range ({}, {})",
                    e.i, e.j
                )));
            }
            if e.i == e.j {
                return Err(Error::InvalidInstance(format!(
                    "edge {idx} is a self-loop on node {}",
                    e.i
                )));
            }
            if !(e.lower_sq.is_finite() && e.upper_sq.is_finite()) {
                return Err(Error::InvalidInstance(format!(
                    "edge {idx} has non-finite bounds"
                )));
            }
            if e.lower_sq <= 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "edge {idx} has non-positive squared lower bound {}",
                    e.lower_sq
                )));
            }
            if e.lower_sq > e.upper_sq {
                return Err(Error::InvalidInstance(format!(
                    "edge {idx} has lower_sq {} > upper_sq {}",
                    e.lower_sq, e.upper_sq
                )));
            }
            seen.push((e.i.min(e.j), e.i.max(e.j)));
        }
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInstance(
                "duplicate unordered node pair in edge list".into(),
            ));
        }
        Ok(Self { node_count, edges })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn dimension(&self) -> usize {
        DIMENSION
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of ranged edges, `n0`.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of inequality constraints, `r = 2 * n0`.
    pub fn constraint_count(&self) -> usize {
        2 * self.edges.len()
    }

    /// Length of a configuration vector, `d * n`.
    pub fn dof(&self) -> usize {
        DIMENSION * self.node_count
    }

    fn check_shape(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dof() {
            return Err(Error::ShapeMismatch {
                expected: self.dof(),
                got: coords.len(),
            });
        }
        Ok(())
    }

    fn edge_sq_dist(&self, e: &Edge, coords: &[f64]) -> f64 {
        let mut acc = 0.0;
        for t in 0..DIMENSION {
            let diff = coords[DIMENSION * e.i + t] - coords[DIMENSION * e.j + t];
            acc += diff * diff;
        }
        acc
    }

    /// Value of constraint function `k` at `x` (see module docs for the
    /// index convention).
    pub fn constraint_value(&self, k: usize, x: &Configuration) -> Result<f64> {
        self.check_shape(x.coords())?;
        let n0 = self.edge_count();
        let r = self.constraint_count();
        if k == 0 {
            Ok(x.coords().iter().map(|v| v * v).sum())
        } else if k <= n0 {
            Ok(self.edge_sq_dist(&self.edges[k - 1], x.coords()))
        } else if k <= r {
            let e = &self.edges[k - n0 - 1];
            Ok(2.0 * e.lower_sq - self.edge_sq_dist(e, x.coords()))
        } else {
            Err(Error::ConstraintIndex { index: k, r })
        }
    }

    /// Analytic gradient of constraint function `k` at `x`, flat like a
    /// configuration.
    pub fn constraint_gradient(&self, k: usize, x: &Configuration) -> Result<Vec<f64>> {
        self.check_shape(x.coords())?;
        let n0 = self.edge_count();
        let r = self.constraint_count();
        let coords = x.coords();
        if k == 0 {
            return Ok(coords.iter().map(|v| 2.0 * v).collect());
        }
        if k > r {
            return Err(Error::ConstraintIndex { index: k, r });
        }
        let (edge_idx, sign) = if k <= n0 { (k - 1, 1.0) } else { (k - n0 - 1, -1.0) };
        let e = &self.edges[edge_idx];
        let mut grad = vec![0.0; self.dof()];
        for t in 0..DIMENSION {
            let diff = coords[DIMENSION * e.i + t] - coords[DIMENSION * e.j + t];
            grad[DIMENSION * e.i + t] = sign * 2.0 * diff;
            grad[DIMENSION * e.j + t] = -sign * 2.0 * diff;
        }
        Ok(grad)
    }

    /// Checks `f_k(x) <= c_k` for every `k = 1..=r` against the instance
    /// bounds, reporting relative violations `max(0, (f_k - c_k) / c_k)`.
    pub fn feasibility_check(&self, x: &Configuration, rel_tol: f64) -> Result<FeasibilityReport> {
        self.check_shape(x.coords())?;
        if !(rel_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be >= 0, got {rel_tol}"
            )));
        }
        let n0 = self.edge_count();
        let mut max_violation = 0.0f64;
        let mut violating = Vec::new();
        for (m, e) in self.edges.iter().enumerate() {
            let sq = self.edge_sq_dist(e, x.coords());
            let upper_violation = ((sq - e.upper_sq) / e.upper_sq).max(0.0);
            let lower_violation = (((2.0 * e.lower_sq - sq) - e.lower_sq) / e.lower_sq).max(0.0);
            if upper_violation > rel_tol {
                violating.push(m + 1);
            }
            if lower_violation > rel_tol {
                violating.push(n0 + m + 1);
            }
            max_violation = max_violation.max(upper_violation).max(lower_violation);
        }
        violating.sort_unstable();
        Ok(FeasibilityReport {
            max_relative_violation: max_violation,
            violating_constraint_indices: violating,
            feasible: max_violation <= rel_tol,
            rel_tol,
        })
    }

    /// Fraction of possible links present, `2 * n0 / (n * (n - 1))`.
    pub fn density(&self) -> f64 {
        network_density(self.node_count, self.edge_count())
            .expect("validated instance has at least 2 nodes")
    }
}

/// Density of a graph with `node_count` nodes and `edge_count` edges.
pub fn network_density(node_count: usize, edge_count: usize) -> Result<f64> {
    if node_count < 2 {
        return Err(Error::DegenerateNetwork(node_count));
    }
    Ok(2.0 * edge_count as f64 / (node_count as f64 * (node_count - 1) as f64))
}

/// A point in configuration space: `n` planar node positions stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration(Vec<f64>);

impl Configuration {
    /// Wraps a flat coordinate vector; every entry must be finite and the
    /// length a multiple of the dimension.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % DIMENSION != 0 {
            return Err(Error::InvalidParameter(format!(
                "configuration length {} is not a positive multiple of {DIMENSION}",
                coords.len()
            )));
        }
        if !coords.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("configuration coordinates"));
        }
        Ok(Self(coords))
    }

    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * DIMENSION);
        for &(x, y) in points {
            coords.push(x);
            coords.push(y);
        }
        Self::new(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// Number of nodes represented.
    pub fn node_count(&self) -> usize {
        self.0.len() / DIMENSION
    }

    /// Position of node `i` (0-based).
    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.0[DIMENSION * i], self.0[DIMENSION * i + 1])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.node_count()).map(move |i| self.point(i))
    }
}

/// Outcome of [`NetworkInstance::feasibility_check`].
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    /// Largest relative violation over all constraints (0 when feasible).
    pub max_relative_violation: f64,
    /// Constraint indices `k` (1..=r) violating beyond the tolerance.
    pub violating_constraint_indices: Vec<usize>,
    /// Whether `max_relative_violation <= rel_tol`.
    pub feasible: bool,
    /// The tolerance this report was computed with.
    pub rel_tol: f64,
}

//! Distance matrices and neighbour-ball resolution.
//!
//! The estimator consumes nothing but the matrix of pairwise distances.
//! This module builds that matrix from feature vectors, validates
//! user-supplied matrices, and resolves each seed's `h`-nearest ball,
//! including the fractional weighting of boundary draws.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Supported point metrics. Identifiers are the lowercase strings
/// `euclidean`, `manhattan`, `chebyshev`, `hamming`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Manhattan,
    Chebyshev,
    Hamming,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Chebyshev => "chebyshev",
            Metric::Hamming => "hamming",
        }
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Chebyshev => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            Metric::Hamming => a.iter().zip(b).filter(|(x, y)| x != y).count() as f64,
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            "chebyshev" => Ok(Metric::Chebyshev),
            "hamming" => Ok(Metric::Hamming),
            other => Err(Error::Domain(format!(
                "unknown metric '{other}' (expected euclidean, manhattan, chebyshev or hamming)"
            ))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symmetric nonnegative distance matrix with zero diagonal, stored
/// row-major. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Every entry multiplied by `factor` (> 0). Rescaling preserves the
    /// neighbour structure, so estimates computed from the scaled matrix
    /// match the original.
    pub fn scaled(&self, factor: f64) -> Result<DistanceMatrix> {
        if factor <= 0.0 || !factor.is_finite() {
            return Err(Error::Domain(format!(
                "scale factor must be positive and finite, got {factor}"
            )));
        }
        Ok(DistanceMatrix {
            n: self.n,
            entries: self.entries.iter().map(|d| d * factor).collect(),
        })
    }
}

/// Full pairwise distance matrix of `points` under `metric`.
///
/// All vectors must share one dimension. Rows are computed in parallel;
/// the result is deterministic and exactly symmetric because every
/// metric here is evaluated coordinate-wise in a fixed order.
pub fn pairwise_distances(points: &[Vec<f64>], metric: Metric) -> Result<DistanceMatrix> {
    if points.is_empty() {
        return Err(Error::Domain("no points given".into()));
    }
    let dim = points[0].len();
    if dim == 0 {
        return Err(Error::Shape("points must have at least one coordinate".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::Shape(format!(
                "point {i} has {} coordinates, expected {dim}",
                p.len()
            )));
        }
    }
    let n = points.len();
    let mut entries = vec![0.0; n * n];
    entries
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            for j in 0..n {
                row[j] = if i == j {
                    0.0
                } else {
                    metric.distance(&points[i], &points[j])
                };
            }
        });
    Ok(DistanceMatrix { n, entries })
}

/// Validate a square matrix of user-supplied distances.
///
/// Accepts iff the diagonal is zero, entries are finite and nonnegative,
/// and the matrix is symmetric to 1e-9 relative tolerance (asymmetric
/// pairs within tolerance are averaged). The triangle inequality is not
/// checked; non-metric dissimilarities are allowed.
pub fn validate_matrix(rows: &[Vec<f64>]) -> Result<DistanceMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Shape(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    const REL_TOL: f64 = 1e-9;
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = rows[i][j];
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "entry ({i}, {j}) is not finite"
                )));
            }
            if v < 0.0 {
                return Err(Error::Validation(format!(
                    "entry ({i}, {j}) is negative: {v}"
                )));
            }
        }
        if rows[i][i] != 0.0 {
            return Err(Error::Validation(format!(
                "diagonal entry ({i}, {i}) is {} instead of 0",
                rows[i][i]
            )));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let a = rows[i][j];
            let b = rows[j][i];
            if (a - b).abs() > REL_TOL * a.max(b) {
                return Err(Error::Validation(format!(
                    "asymmetric entries at ({i}, {j}): {a} vs {b}"
                )));
            }
            let avg = 0.5 * (a + b);
            entries[i * n + j] = avg;
            entries[j * n + i] = avg;
        }
    }
    Ok(DistanceMatrix { n, entries })
}

/// Resolution of a seed's `h`-nearest ball.
///
/// `inner` holds the points strictly closer than the boundary radius
/// (always containing the seed itself), `boundary` the points at exactly
/// that radius. When the boundary group overfills the ball, each of its
/// `b` members counts with weight `(h - c) / b` where `c = |inner|`;
/// with no draw the weight is 1. For `h = 1` the ball is the seed alone
/// and `boundary` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborBall {
    pub seed: usize,
    pub h: usize,
    pub inner: Vec<usize>,
    pub boundary: Vec<usize>,
    pub boundary_weight: f64,
    pub radius: f64,
}

impl NeighborBall {
    /// `|inner| + boundary_weight * |boundary|`; equals `h` exactly up
    /// to rounding.
    pub fn occupancy(&self) -> f64 {
        self.inner.len() as f64 + self.boundary_weight * self.boundary.len() as f64
    }

    /// True when the ball resolved without a fractional draw.
    pub fn draw_free(&self) -> bool {
        self.boundary_weight == 1.0
    }
}

fn check_ball_args(n: usize, seed: usize, h: usize) -> Result<()> {
    if seed >= n {
        return Err(Error::Domain(format!(
            "seed index {seed} out of range for {n} points"
        )));
    }
    if h < 1 || h > n {
        return Err(Error::Domain(format!(
            "h = {h} outside the valid range 1..={n}"
        )));
    }
    Ok(())
}

/// Walk a seed's neighbours in distance order and resolve the ball.
///
/// `order` lists all non-seed indices sorted by distance to the seed
/// (ties broken by index). Radii within `tie_epsilon` relative of the
/// group's smallest member merge into one boundary group; epsilon zero
/// means exact float equality.
fn resolve_ball(
    row: &[f64],
    order: &[u32],
    seed: usize,
    h: usize,
    tie_epsilon: f64,
) -> NeighborBall {
    let mut inner = Vec::with_capacity(h);
    inner.push(seed);
    if h == 1 {
        return NeighborBall {
            seed,
            h,
            inner,
            boundary: Vec::new(),
            boundary_weight: 1.0,
            radius: 0.0,
        };
    }
    let mut cum = 1usize;
    let mut pos = 0usize;
    loop {
        let anchor = row[order[pos] as usize];
        let limit = anchor * (1.0 + tie_epsilon);
        let mut end = pos + 1;
        while end < order.len() && row[order[end] as usize] <= limit {
            end += 1;
        }
        let group = end - pos;
        if cum + group >= h {
            let c = cum;
            let b = group;
            let weight = (h - c) as f64 / b as f64;
            // Smallest radius at which the cumulative count reaches h.
            let radius = row[order[pos + (h - c) - 1] as usize];
            let boundary = order[pos..end].iter().map(|&i| i as usize).collect();
            return NeighborBall {
                seed,
                h,
                inner,
                boundary,
                boundary_weight: weight,
                radius,
            };
        }
        inner.extend(order[pos..end].iter().map(|&i| i as usize));
        cum += group;
        pos = end;
    }
}

fn sorted_row_order(dm: &DistanceMatrix, seed: usize) -> Vec<u32> {
    let row = dm.row(seed);
    let mut order: Vec<u32> = (0..dm.size() as u32)
        .filter(|&j| j as usize != seed)
        .collect();
    order.sort_unstable_by(|&a, &b| {
        row[a as usize]
            .total_cmp(&row[b as usize])
            .then(a.cmp(&b))
    });
    order
}

/// Resolve the `h`-nearest ball around `seed` with exact tie detection.
pub fn neighbor_ball(dm: &DistanceMatrix, seed: usize, h: usize) -> Result<NeighborBall> {
    neighbor_ball_with_epsilon(dm, seed, h, 0.0)
}

/// As [`neighbor_ball`], merging boundary radii within `tie_epsilon`
/// relative tolerance into one draw group.
pub fn neighbor_ball_with_epsilon(
    dm: &DistanceMatrix,
    seed: usize,
    h: usize,
    tie_epsilon: f64,
) -> Result<NeighborBall> {
    check_ball_args(dm.size(), seed, h)?;
    let order = sorted_row_order(dm, seed);
    Ok(resolve_ball(dm.row(seed), &order, seed, h, tie_epsilon))
}

/// Per-seed neighbour orderings, sorted once and shared across `h`
/// values. Row sorting dominates the estimator's cost, so sweeps reuse
/// this table instead of re-sorting for every `h`.
#[derive(Debug)]
pub struct NeighborTable {
    n: usize,
    order: Vec<u32>, // n rows of n-1 sorted non-seed indices
}

impl NeighborTable {
    pub fn new(dm: &DistanceMatrix) -> Self {
        let n = dm.size();
        let stride = n.saturating_sub(1);
        let mut order = vec![0u32; n * stride];
        order
            .par_chunks_mut(stride.max(1))
            .enumerate()
            .take(n)
            .for_each(|(seed, slot)| {
                let sorted = sorted_row_order(dm, seed);
                slot[..sorted.len()].copy_from_slice(&sorted);
            });
        NeighborTable { n, order }
    }

    pub fn ball(
        &self,
        dm: &DistanceMatrix,
        seed: usize,
        h: usize,
        tie_epsilon: f64,
    ) -> Result<NeighborBall> {
        check_ball_args(self.n, seed, h)?;
        let stride = self.n - 1;
        let order = &self.order[seed * stride..(seed + 1) * stride];
        Ok(resolve_ball(dm.row(seed), order, seed, h, tie_epsilon))
    }
}

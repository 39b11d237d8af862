//! Uniform lattice on the belief simplex with Freudenthal (Kuhn)
//! triangulation for barycentric interpolation.
//!
//! Lattice points are beliefs with coordinates k_i / M, Σ k_i = M. A query
//! belief is mapped to suffix-sum coordinates z_j = M Σ_{i≥j} π(i),
//! j = 2..X, which lie in the ordered region M ≥ z_2 ≥ … ≥ z_X ≥ 0. The unit
//! cube containing z is split into simplices by the ordering of the
//! fractional parts, and those simplices tile the ordered region exactly, so
//! every vertex of the containing simplex is a lattice point.

use crate::error::{Error, Result};

/// Largest supported number of states.
pub const MAX_DIM: usize = 8;

/// Default cap on the number of lattice points.
pub const DEFAULT_POINT_CAP: usize = 2_000_000;

/// Coordinates this close to an integer are snapped onto it, so that grid
/// points interpolate to exactly their stored value.
const SNAP_TOL: f64 = 1e-9;

/// Simplex containing a query point: lattice indices with barycentric
/// weights. Only vertices with positive weight are listed.
#[derive(Debug, Clone, Copy)]
pub struct Cell {
    vertices: [(usize, f64); MAX_DIM],
    len: usize,
}

impl Cell {
    pub fn vertices(&self) -> &[(usize, f64)] {
        &self.vertices[..self.len]
    }

    /// Vertex carrying the largest weight (first one on ties).
    pub fn nearest(&self) -> usize {
        let mut best = self.vertices[0];
        for v in &self.vertices[1..self.len] {
            if v.1 > best.1 {
                best = *v;
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    dim: usize,
    resolution: usize,
    points: Vec<f64>,
    lattice: Vec<u32>,
    /// binom[k][n] = C(n, k) for k ≤ dim, n ≤ resolution + dim.
    binom: Vec<Vec<u64>>,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of lattice points C(M + X − 1, X − 1).
pub fn point_count(dim: usize, resolution: usize) -> u128 {
    binomial((resolution + dim - 1) as u128, (dim - 1) as u128)
}

/// Builds the lattice of resolution `resolution` on the `dim`-simplex.
pub fn build_grid(dim: usize, resolution: usize) -> Result<SimplexGrid> {
    build_grid_with_cap(dim, resolution, DEFAULT_POINT_CAP)
}

pub fn build_grid_with_cap(dim: usize, resolution: usize, cap: usize) -> Result<SimplexGrid> {
    if !(2..=MAX_DIM).contains(&dim) {
        return Err(Error::InvalidParameter {
            field: "dimension".into(),
            reason: format!("{dim} outside 2..={MAX_DIM}"),
        });
    }
    if resolution == 0 {
        return Err(Error::InvalidParameter {
            field: "resolution".into(),
            reason: "must be at least 1".into(),
        });
    }
    let count = point_count(dim, resolution);
    if count > cap as u128 {
        return Err(Error::GridTooLarge { points: count, cap });
    }
    let n = count as usize;

    let binom = (0..=dim)
        .map(|k| {
            (0..=resolution + dim)
                .map(|m| binomial(m as u128, k as u128) as u64)
                .collect()
        })
        .collect();

    // Lexicographic order on the reversed counts (k_X, k_{X-1}, …, k_1),
    // which puts the X = 2 grid in order of increasing π(2).
    let mut lattice = Vec::with_capacity(n * dim);
    let mut rev = vec![0u32; dim];
    fn fill(rev: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<u32>) {
        let dim = rev.len();
        if pos == dim - 1 {
            rev[pos] = remaining;
            out.extend(rev.iter().rev());
            return;
        }
        for q in 0..=remaining {
            rev[pos] = q;
            fill(rev, pos + 1, remaining - q, out);
        }
    }
    fill(&mut rev, 0, resolution as u32, &mut lattice);
    debug_assert_eq!(lattice.len(), n * dim);

    let m = resolution as f64;
    let points = lattice.iter().map(|&k| k as f64 / m).collect();
    Ok(SimplexGrid {
        dim,
        resolution,
        points,
        lattice,
        binom,
    })
}

impl SimplexGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.lattice.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// Belief coordinates of point `i` (0-based point index).
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Integer counts k of point `i`, Σ k = M.
    pub fn lattice(&self, i: usize) -> &[u32] {
        &self.lattice[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Index of the lattice point with counts `k`, if it is on this grid.
    pub fn index_of(&self, k: &[u32]) -> Option<usize> {
        if k.len() != self.dim || k.iter().map(|&v| v as usize).sum::<usize>() != self.resolution {
            return None;
        }
        Some(self.rank_reversed(k.iter().rev().copied()))
    }

    fn rank_reversed(&self, rev: impl Iterator<Item = u32>) -> usize {
        let x = self.dim;
        let mut remaining = self.resolution;
        let mut rank = 0u64;
        for (j, q) in rev.enumerate().take(x - 1) {
            let parts = x - 1 - j;
            let q = q as usize;
            rank += self.binom[parts][remaining + parts] - self.binom[parts][remaining - q + parts];
            remaining -= q;
        }
        rank as usize
    }

    /// Index of a point given suffix sums s_2..s_X (s_1 = M implied).
    fn rank_suffix(&self, s: &[i64]) -> usize {
        // k_j = s_j - s_{j+1}; reversed order starts from k_X = s_X.
        let x = self.dim;
        let m = self.resolution as i64;
        let suffix = |j: usize| -> i64 {
            // j is 1-based state index
            if j == 1 {
                m
            } else if j > x {
                0
            } else {
                s[j - 2]
            }
        };
        self.rank_reversed((1..=x).rev().map(|j| (suffix(j) - suffix(j + 1)) as u32))
    }

    /// Simplex of the triangulation containing `pi` with barycentric weights.
    pub fn locate(&self, pi: &[f64]) -> Cell {
        let x = self.dim;
        let m = self.resolution as f64;
        let mut z = [0.0f64; MAX_DIM];
        let mut acc = 0.0;
        for j in (1..x).rev() {
            acc += pi[j];
            let mut v = (m * acc).clamp(0.0, m);
            let r = v.round();
            if (v - r).abs() < SNAP_TOL {
                v = r;
            }
            z[j - 1] = v;
        }
        let n = x - 1;
        let mut base = [0i64; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        let mut order = [0usize; MAX_DIM];
        for j in 0..n {
            let f = z[j].floor();
            base[j] = f as i64;
            frac[j] = z[j] - f;
            order[j] = j;
        }
        // decreasing fractional part, ties by coordinate index
        order[..n].sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));

        let mut cell = Cell {
            vertices: [(0, 0.0); MAX_DIM],
            len: 0,
        };
        let mut vertex = base;
        let mut prev = 1.0;
        for step in 0..=n {
            let next = if step < n { frac[order[step]] } else { 0.0 };
            let w = prev - next;
            if w > 0.0 {
                cell.vertices[cell.len] = (self.rank_suffix(&vertex[..n]), w);
                cell.len += 1;
            }
            if step < n {
                vertex[order[step]] += 1;
                prev = next;
            }
        }
        cell
    }

    /// Barycentric interpolation of per-point `values` at `pi`.
    #[inline]
    pub fn interpolate(&self, values: &[f64], pi: &[f64]) -> f64 {
        self.locate(pi)
            .vertices()
            .iter()
            .map(|&(i, w)| w * values[i])
            .sum()
    }
}

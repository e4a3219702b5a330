//! Cell-list neighbor index for the random geometric graph `G_n(r)`.
//!
//! Points are hashed into `b^d` buckets of side `1/b >= r`, `b = max(1, ⌊1/r⌋)`,
//! so every neighbor of a point lies in the `3^d` buckets around its own
//! (with torus wrap). Adjacency is never materialised; each query scans
//! candidates and filters by the closed-ball test `D(x, y) <= r`.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::{torus_distance_sq, PointSet};

#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    points: &'a PointSet,
    radius: f64,
    buckets_per_side: usize,
    /// CSR layout: vertices of bucket `k` are `members[starts[k]..starts[k + 1]]`.
    starts: Vec<usize>,
    members: Vec<u32>,
    /// Fewer than three buckets per side: every query scans all points.
    scan_all: bool,
}

/// Degree distribution of `G_n(r)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeStats {
    /// `histogram[k]` is the number of vertices of degree `k`.
    pub histogram: Vec<usize>,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

impl<'a> NeighborIndex<'a> {
    pub fn build(points: &'a PointSet, r: f64) -> Result<Self> {
        if !(r > 0.0) || r.is_nan() {
            return invalid(format!("radius must be positive, got {r}"));
        }
        if points.len() > u32::MAX as usize {
            return invalid("too many points for a 32-bit vertex index");
        }
        let d = points.dim();
        let b = if r >= 1.0 { 1 } else { ((1.0 / r).floor() as usize).max(1) };
        // Cap the bucket table so sparse high-dimensional grids stay small;
        // coarser buckets keep side >= r, so queries stay exact.
        let mut b = b;
        while b > 1 && b.checked_pow(d as u32).is_none_or(|t| t > 4 * points.len() + 64) {
            b -= 1;
        }
        let total = b.pow(d as u32);
        let mut counts = vec![0usize; total + 1];
        let bucket_of: Vec<usize> = points.iter().map(|p| bucket_index(p, b)).collect();
        for &k in &bucket_of {
            counts[k + 1] += 1;
        }
        for k in 0..total {
            counts[k + 1] += counts[k];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut members = vec![0u32; points.len()];
        for (i, &k) in bucket_of.iter().enumerate() {
            members[fill[k]] = i as u32;
            fill[k] += 1;
        }
        Ok(NeighborIndex {
            points,
            radius: r,
            buckets_per_side: b,
            starts,
            members,
            scan_all: b < 3,
        })
    }

    pub fn points(&self) -> &'a PointSet {
        self.points
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn buckets_per_side(&self) -> usize {
        self.buckets_per_side
    }

    /// Vertices stored in bucket `k` (flat id).
    pub fn bucket(&self, k: usize) -> &[u32] {
        &self.members[self.starts[k]..self.starts[k + 1]]
    }

    pub fn bucket_count(&self) -> usize {
        self.starts.len() - 1
    }

    /// Calls `f` with every vertex whose bucket is adjacent (with wrap) to
    /// the bucket of `x`. Requires `reach <= 1/b`.
    pub(crate) fn for_each_candidate(&self, x: &[f64], mut f: impl FnMut(usize)) {
        if self.scan_all {
            for v in 0..self.len() {
                f(v);
            }
            return;
        }
        let b = self.buckets_per_side as isize;
        let d = x.len();
        let home: Vec<isize> = x.iter().map(|&c| axis_bucket(c, b as usize) as isize).collect();
        let mut offset = vec![-1isize; d];
        loop {
            let mut flat = 0usize;
            for j in (0..d).rev() {
                let c = (home[j] + offset[j]).rem_euclid(b) as usize;
                flat = flat * b as usize + c;
            }
            for &v in self.bucket(flat) {
                f(v as usize);
            }
            // Odometer over {-1, 0, 1}^d.
            let mut j = 0;
            while j < d {
                offset[j] += 1;
                if offset[j] <= 1 {
                    break;
                }
                offset[j] = -1;
                j += 1;
            }
            if j == d {
                break;
            }
        }
    }

    /// Calls `f(j)` for every neighbor `j != i` with `D(X_i, X_j) <= r`, in
    /// unspecified order.
    pub fn for_each_neighbor(&self, i: usize, mut f: impl FnMut(usize)) {
        let x = self.points.point(i);
        let r2 = self.radius * self.radius;
        self.for_each_candidate(x, |j| {
            if j != i && torus_distance_sq(x, self.points.point(j)) <= r2 {
                f(j);
            }
        });
    }

    /// Sorted neighbor list of vertex `i`, self excluded.
    pub fn neighbors_of(&self, i: usize) -> Result<Vec<usize>> {
        if i >= self.len() {
            return invalid(format!("vertex {i} out of range (n = {})", self.len()));
        }
        let mut out = Vec::new();
        self.for_each_neighbor(i, |j| out.push(j));
        out.sort_unstable();
        Ok(out)
    }

    pub fn degree(&self, i: usize) -> usize {
        let mut k = 0;
        self.for_each_neighbor(i, |_| k += 1);
        k
    }

    /// Number of points within distance `reach <= r` of an arbitrary location.
    /// `strict` selects the open ball.
    pub fn count_within(&self, x: &[f64], reach: f64, strict: bool) -> usize {
        debug_assert!(reach <= self.radius || self.scan_all);
        let r2 = reach * reach;
        let mut k = 0;
        self.for_each_candidate(x, |j| {
            let d2 = torus_distance_sq(x, self.points.point(j));
            if d2 < r2 || (!strict && d2 == r2) {
                k += 1;
            }
        });
        k
    }

    /// Number of points in the closed cube of side `side <= 2r` centred at `x`
    /// (per-coordinate wrapped offset at most `side / 2`).
    pub fn count_in_cube(&self, x: &[f64], side: f64) -> usize {
        let half = side / 2.0;
        let mut k = 0;
        self.for_each_candidate(x, |j| {
            let y = self.points.point(j);
            if x.iter().zip(y).all(|(&a, &b)| crate::geometry::wrapped_diff(a, b) <= half) {
                k += 1;
            }
        });
        k
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees: Vec<usize> = (0..self.len()).map(|i| self.degree(i)).collect();
        let max = degrees.iter().copied().max().unwrap_or(0);
        let min = degrees.iter().copied().min().unwrap_or(0);
        let mut histogram = vec![0usize; max + 1];
        for &k in &degrees {
            histogram[k] += 1;
        }
        let mean = degrees.iter().sum::<usize>() as f64 / degrees.len().max(1) as f64;
        DegreeStats { histogram, min, max, mean }
    }

    /// Writes the undirected edge list as CSV rows `i,j` with `i < j`.
    pub fn write_edges_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["i", "j"])?;
        for i in 0..self.len() {
            for j in self.neighbors_of(i)? {
                if i < j {
                    out.write_record([i.to_string(), j.to_string()])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[inline]
fn axis_bucket(x: f64, b: usize) -> usize {
    ((x * b as f64).floor().max(0.0) as usize).min(b - 1)
}

fn bucket_index(p: &[f64], b: usize) -> usize {
    p.iter().rev().fold(0, |acc, &x| acc * b + axis_bucket(x, b))
}

//! Toroidal geometry: point generation, the torus metric, ball volumes and
//! the analysis grid with its snake ordering.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Per-coordinate wrapped difference `min(|a - b|, 1 - |a - b|)`.
#[inline]
pub fn wrapped_diff(a: f64, b: f64) -> f64 {
    let t = (a - b).abs();
    t.min(1.0 - t)
}

/// Squared torus distance without length checks.
#[inline]
pub(crate) fn torus_distance_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let t = wrapped_diff(a, b);
            t * t
        })
        .sum()
}

/// Euclidean distance on the unit torus.
pub fn torus_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return invalid(format!("dimension mismatch: {} vs {}", x.len(), y.len()));
    }
    Ok(torus_distance_sq(x, y).sqrt())
}

/// Volume of the Euclidean unit ball in `R^d`, `π^{d/2} / Γ(d/2 + 1)`.
pub fn ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return invalid("ball_volume needs d >= 1");
    }
    // v_d = v_{d-2} * 2π / d with v_0 = 1, v_1 = 2.
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    Ok(v)
}

/// Lebesgue measure of a torus ball of radius `r` in dimension `d`.
///
/// Equal to `v_d r^d` while `r <= 1/2`; beyond that the ball overlaps itself
/// and the measure is the volume of the Euclidean ball clipped to the
/// fundamental cell, computed by nested adaptive quadrature.
pub fn torus_ball_measure(r: f64, d: usize) -> Result<f64> {
    if d == 0 {
        return invalid("torus_ball_measure needs d >= 1");
    }
    if r <= 0.0 {
        return Ok(0.0);
    }
    Ok(clipped_ball(r, d))
}

fn clipped_ball(r: f64, d: usize) -> f64 {
    if d == 0 {
        return 1.0;
    }
    if r <= 0.5 {
        return ball_volume(d).unwrap() * r.powi(d as i32);
    }
    if r * r >= d as f64 * 0.25 {
        return 1.0;
    }
    let a = 0.5_f64.min(r);
    let f = |t: f64| clipped_ball((r * r - t * t).max(0.0).sqrt(), d - 1);
    2.0 * adaptive_simpson(&f, 0.0, a, 1e-10, 24)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    rec(f, a, b, fa, fm, fb, whole, tol, depth)
}

/// `n` points of `[0,1)^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    seed: u64,
}

impl PointSet {
    /// Draws `n` i.i.d. uniform points; deterministic in `(n, d, seed)`.
    pub fn sample(n: usize, d: usize, seed: u64) -> Result<Self> {
        if n == 0 || d == 0 {
            return invalid(format!("sample_points needs n >= 1 and d >= 1 (got n={n}, d={d})"));
        }
        let mut rng = rng::stream(seed, rng::POINT_STREAM);
        let coords = (0..n * d).map(|_| rng.random::<f64>()).collect();
        Ok(PointSet { dim: d, coords, seed })
    }

    /// Builds a point set from explicit coordinates, e.g. for crafted instances.
    pub fn from_points(dim: usize, points: &[Vec<f64>], seed: u64) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be >= 1");
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return invalid(format!("point {i} has {} coordinates, expected {dim}", p.len()));
            }
            if let Some(x) = p.iter().find(|x| !(0.0..1.0).contains(*x)) {
                return invalid(format!("point {i} has coordinate {x} outside [0,1)"));
            }
            coords.extend_from_slice(p);
        }
        Ok(PointSet { dim, coords, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Writes `n,d,seed`, its values, then one comma-separated row per point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,d,seed")?;
        writeln!(w, "{},{},{}", self.len(), self.dim, self.seed)?;
        for p in self.iter() {
            let row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Parse(format!("missing {what}")))
        };
        if next("header")?.trim() != "n,d,seed" {
            return Err(Error::Parse("expected header `n,d,seed`".into()));
        }
        let meta = next("metadata row")?;
        let fields: Vec<&str> = meta.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("bad metadata row `{meta}`")));
        }
        let parse_u = |s: &str| s.parse::<u64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
        let n = parse_u(fields[0])? as usize;
        let dim = parse_u(fields[1])? as usize;
        let seed = parse_u(fields[2])?;
        let mut points = Vec::with_capacity(n);
        for i in 0..n {
            let line = next(&format!("point row {i}"))?;
            let p = line
                .trim()
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            points.push(p);
        }
        PointSet::from_points(dim, &points, seed)
    }
}

/// The analysis partition of the torus into `m^d` cubes of side `1/m`,
/// `m = ⌈2√d / r⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub cells_per_side: usize,
    pub side: f64,
    pub radius: f64,
}

/// Integer coordinates of a grid cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId(pub Vec<usize>);

impl Grid {
    pub fn for_radius(r: f64, d: usize) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return invalid(format!("grid radius must be positive and finite, got {r}"));
        }
        if d == 0 {
            return invalid("grid dimension must be >= 1");
        }
        let m = (2.0 * (d as f64).sqrt() / r).ceil() as usize;
        Self::with_cells(m.max(1), d, r)
    }

    /// A grid with an explicit number of cells per side.
    pub fn with_cells(m: usize, d: usize, r: f64) -> Result<Self> {
        if m == 0 || d == 0 {
            return invalid("grid needs m >= 1 and d >= 1");
        }
        if m.checked_pow(d as u32).is_none() {
            return invalid(format!("grid with {m}^{d} cells is too large"));
        }
        Ok(Grid { dim: d, cells_per_side: m, side: 1.0 / m as f64, radius: r })
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_side.pow(self.dim as u32)
    }

    pub fn cell_of(&self, point: &[f64]) -> Result<CellId> {
        if point.len() != self.dim {
            return invalid(format!("point has {} coordinates, grid has {}", point.len(), self.dim));
        }
        Ok(CellId(point.iter().map(|&x| self.axis_index(x)).collect()))
    }

    #[inline]
    fn axis_index(&self, x: f64) -> usize {
        let m = self.cells_per_side;
        ((x * m as f64).floor().max(0.0) as usize).min(m - 1)
    }

    /// Flat index of the cell holding `point`, first coordinate fastest.
    #[inline]
    pub fn flat_cell_of(&self, point: &[f64]) -> usize {
        let m = self.cells_per_side;
        point.iter().rev().fold(0, |acc, &x| acc * m + self.axis_index(x))
    }

    pub fn flat_index(&self, cell: &CellId) -> usize {
        let m = self.cells_per_side;
        cell.0.iter().rev().fold(0, |acc, &c| acc * m + c)
    }

    pub fn cell_from_flat(&self, mut flat: usize) -> CellId {
        let m = self.cells_per_side;
        let mut coords = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            coords.push(flat % m);
            flat /= m;
        }
        CellId(coords)
    }

    pub fn cell_center(&self, cell: &CellId) -> Vec<f64> {
        cell.0.iter().map(|&c| (c as f64 + 0.5) * self.side).collect()
    }

    /// Boustrophedon enumeration of all cells: consecutive cells share a
    /// (d-1)-face without using the torus wrap.
    pub fn snake_order(&self) -> Vec<CellId> {
        self.snake_flat().into_iter().map(|f| self.cell_from_flat(f)).collect()
    }

    /// [`Grid::snake_order`] as flat indices.
    pub fn snake_flat(&self) -> Vec<usize> {
        let m = self.cells_per_side;
        let d = self.dim;
        let mut digits = vec![0usize; d];
        let mut coords = vec![0usize; d];
        let mut out = Vec::with_capacity(self.cell_count());
        for k in 0..self.cell_count() {
            let mut rest = k;
            for digit in digits.iter_mut() {
                *digit = rest % m;
                rest /= m;
            }
            // Coordinate j runs backwards whenever the coordinates above it sum
            // to an odd number (reflected mixed-radix counting).
            let mut higher = 0usize;
            for j in (0..d).rev() {
                coords[j] = if higher.is_multiple_of(2) { digits[j] } else { m - 1 - digits[j] };
                higher += coords[j];
            }
            out.push(coords.iter().rev().fold(0, |acc, &c| acc * m + c));
        }
        out
    }
}

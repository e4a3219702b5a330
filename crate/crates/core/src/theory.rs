//! Closed-form thresholds and budget constants, plus an empirical checker
//! for the point-regularity event.
//!
//! Unsubscripted logarithms are natural; `log₂` is used only where the
//! formulas call for it explicitly (`f` and the exploration depth).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{ball_volume, torus_ball_measure, Grid, PointSet};
use crate::rgg::NeighborIndex;

pub const DEFAULT_EPS: f64 = 0.1;

/// Connectivity radius of `G_n(r)`: `(ln n / (n v_d))^{1/d}`.
pub fn penrose_radius(n: usize, d: usize) -> Result<f64> {
    if n < 3 {
        return invalid(format!("penrose_radius needs n >= 3, got {n}"));
    }
    let v = ball_volume(d)?;
    let n = n as f64;
    Ok((n.ln() / (n * v)).powf(1.0 / d as f64))
}

/// Irrigation threshold at the connectivity radius: `√(2 ln n / ln ln n)`.
pub fn cstar(n: usize) -> Result<f64> {
    let ln = (n as f64).ln();
    let lnln = ln.ln();
    if n < 2 || !(lnln > 0.0) {
        return Err(Error::Domain(format!("ln ln n must be positive, got n = {n}")));
    }
    Ok((2.0 * ln / lnln).sqrt())
}

/// `f(x) = ⌈√((1 + x² + 8√x + ε) / (x − 2x² log₂(1/x)))⌉`.
pub fn f_of(x: f64, eps: f64) -> Result<u64> {
    if !(x > 0.0 && x < 1.0) {
        return invalid(format!("f needs x in (0,1), got {x}"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("f needs eps in (0,1), got {eps}"));
    }
    let denom = x - 2.0 * x * x * (1.0 / x).log2();
    if !(denom > 0.0) {
        return Err(Error::Domain(format!("f({x}) has non-positive denominator {denom}")));
    }
    let num = 1.0 + x * x + 8.0 * x.sqrt() + eps;
    Ok((num / denom).sqrt().ceil() as u64)
}

/// `r = γ n^{-(1-δ)/d}`. Not clipped to the torus diameter.
pub fn radius_from_delta(n: usize, d: usize, delta: f64, gamma: f64) -> f64 {
    gamma * (n as f64).powf(-(1.0 - delta) / d as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub delta: f64,
    pub eps: f64,
    pub d: usize,
    pub gamma: f64,
    pub n: usize,
}

impl TheoryParams {
    pub fn new(n: usize, d: usize, delta: f64, gamma: f64, eps: f64) -> Result<Self> {
        let p = TheoryParams { delta, eps, d, gamma, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return invalid(format!("eps must lie in (0,1), got {}", self.eps));
        }
        if self.d == 0 {
            return invalid("dimension must be >= 1");
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return invalid(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.n == 0 {
            return invalid("n must be >= 1");
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        radius_from_delta(self.n, self.d, self.delta, self.gamma)
    }

    /// `min(δ², 1/25)`, the exponent scale of the first two growth phases.
    pub fn growth_exponent(&self) -> f64 {
        (self.delta * self.delta).min(1.0 / 25.0)
    }
}

/// Per-phase connection budgets `c = k1 + k2 + k3 + 1` and the derived
/// densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    pub c_total: usize,
    pub alpha_d: f64,
    /// Lower bound on the chance that a choice lands in a given cell.
    pub p_d: f64,
    /// Per-step failure exponent of the propagation phase (diagnostic).
    pub eta_d: f64,
}

impl BudgetPlan {
    pub fn budgets(&self) -> [usize; 4] {
        [self.k1, self.k2, self.k3, 1]
    }
}

pub fn budget_plan(p: &TheoryParams) -> Result<BudgetPlan> {
    p.validate()?;
    let d = p.d as f64;
    let eps = p.eps;
    let v = ball_volume(p.d)?;
    let cube = (2.0 * d.sqrt()).powi(p.d as i32);
    let alpha_d = (1.0 - eps) / (2.0 * cube);
    let k1 = if p.delta <= 0.2 { f_of(p.delta, eps)? } else { f_of(0.2, eps)? } as usize;
    let k2 = (8.0 * (1.0 + eps) * v * cube / (1.0 - eps)).ceil() as usize;
    let k3 = (4.0 * (1.0 + eps) * v / alpha_d).sqrt().ceil() as usize;
    let p_d = alpha_d / ((1.0 + eps) * v);
    let eta_d = alpha_d.powi(3) / (12.0 * k3 as f64 * (1.0 + eps).powi(2) * v * v);
    Ok(BudgetPlan { k1, k2, k3, c_total: k1 + k2 + k3 + 1, alpha_d, p_d, eta_d })
}

/// Evaluation of the isolated-clique lower bound on `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    /// `ln(n r^d) / ln ln n`, the finite-n stand-in for the limit λ.
    pub lambda: f64,
    /// `None` when `λ <= 1/2`, where the bound does not apply.
    pub c: Option<f64>,
}

/// `√((1−ε) (λ/(λ−1/2)) ln n / ln(n r^d))` with λ estimated at this `n`.
pub fn lower_bound_c(n: usize, r: f64, d: usize, eps: f64) -> Result<LowerBound> {
    let (ln_n, ln_nrd) = lower_bound_logs(n, r, d)?;
    let lnln = ln_n.ln();
    if !(lnln > 0.0) {
        return Err(Error::Domain(format!("ln ln n must be positive, got n = {n}")));
    }
    let lambda = ln_nrd / lnln;
    Ok(LowerBound { lambda, c: lower_bound_c_with_lambda(n, r, d, eps, lambda)? })
}

/// Same display with an explicit λ; `f64::INFINITY` gives the λ = ∞ limit
/// `√((1−ε) ln n / ln(n r^d))`.
pub fn lower_bound_c_with_lambda(
    n: usize,
    r: f64,
    d: usize,
    eps: f64,
    lambda: f64,
) -> Result<Option<f64>> {
    let (ln_n, ln_nrd) = lower_bound_logs(n, r, d)?;
    if !(lambda > 0.5) {
        return Ok(None);
    }
    let factor = if lambda.is_infinite() { 1.0 } else { lambda / (lambda - 0.5) };
    Ok(Some(((1.0 - eps) * factor * ln_n / ln_nrd).sqrt()))
}

fn lower_bound_logs(n: usize, r: f64, d: usize) -> Result<(f64, f64)> {
    if d == 0 || n < 2 {
        return invalid("lower bound needs n >= 2 and d >= 1");
    }
    let ln_n = (n as f64).ln();
    let ln_nrd = ln_n + d as f64 * r.ln();
    if !(ln_nrd > 0.0) {
        return Err(Error::Domain(format!("n r^d must exceed 1 (ln n r^d = {ln_nrd})")));
    }
    Ok((ln_n, ln_nrd))
}

/// Outcome of the discretised regularity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub eps: f64,
    pub radius: f64,
    pub ball_ratio_min: f64,
    pub ball_ratio_max: f64,
    pub ball_ratio_mean: f64,
    pub cube_ratio_min: f64,
    pub cube_ratio_max: f64,
    pub holds: bool,
    pub centers_checked: usize,
    /// Always true: the supremum over all centers is approximated by the
    /// data points plus the analysis-grid cell centers.
    pub approximate: bool,
}

impl RegularityReport {
    /// Re-evaluates `holds` for another tolerance without recounting.
    pub fn holds_at(&self, eps: f64) -> bool {
        let inside = |x: f64| x > 1.0 - eps && x < 1.0 + eps;
        inside(self.ball_ratio_min)
            && inside(self.ball_ratio_max)
            && inside(self.cube_ratio_min)
            && inside(self.cube_ratio_max)
    }
}

/// Counts points in open balls `B(x, r)` and closed cubes of side `r/(2√d)`
/// around every data point and every analysis-grid cell center, and compares
/// each count with its expectation `n · measure`.
pub fn check_regularity(points: &PointSet, r: f64, eps: f64) -> Result<RegularityReport> {
    let d = points.dim();
    if !(r > 0.0) || r > (d as f64).sqrt() / 2.0 {
        return invalid(format!("regularity radius must lie in (0, √d/2], got {r}"));
    }
    let n = points.len() as f64;
    let index = NeighborIndex::build(points, r)?;
    let grid = Grid::for_radius(r, d)?;
    let side = r / (2.0 * (d as f64).sqrt());
    let ball_expect = n * torus_ball_measure(r, d)?;
    let cube_expect = n * side.powi(d as i32);

    let count = |x: &[f64]| (index.count_within(x, r, true), index.count_in_cube(x, side));
    let from_points = (0..points.len()).into_par_iter().map(|i| count(points.point(i)));
    let from_cells = (0..grid.cell_count())
        .into_par_iter()
        .map(|f| count(&grid.cell_center(&grid.cell_from_flat(f))));

    #[derive(Clone, Copy)]
    struct Acc {
        ball_min: usize,
        ball_max: usize,
        ball_sum: u64,
        cube_min: usize,
        cube_max: usize,
        centers: usize,
    }
    let empty = Acc {
        ball_min: usize::MAX,
        ball_max: 0,
        ball_sum: 0,
        cube_min: usize::MAX,
        cube_max: 0,
        centers: 0,
    };
    let merge = |a: Acc, b: Acc| Acc {
        ball_min: a.ball_min.min(b.ball_min),
        ball_max: a.ball_max.max(b.ball_max),
        ball_sum: a.ball_sum + b.ball_sum,
        cube_min: a.cube_min.min(b.cube_min),
        cube_max: a.cube_max.max(b.cube_max),
        centers: a.centers + b.centers,
    };
    let acc = from_points
        .chain(from_cells)
        .map(|(b, c)| Acc {
            ball_min: b,
            ball_max: b,
            ball_sum: b as u64,
            cube_min: c,
            cube_max: c,
            centers: 1,
        })
        .reduce(|| empty, merge);

    let mut report = RegularityReport {
        eps,
        radius: r,
        ball_ratio_min: acc.ball_min as f64 / ball_expect,
        ball_ratio_max: acc.ball_max as f64 / ball_expect,
        ball_ratio_mean: acc.ball_sum as f64 / acc.centers as f64 / ball_expect,
        cube_ratio_min: acc.cube_min as f64 / cube_expect,
        cube_ratio_max: acc.cube_max as f64 / cube_expect,
        holds: false,
        centers_checked: acc.centers,
        approximate: true,
    };
    report.holds = report.holds_at(eps);
    Ok(report)
}

//! Instrumented four-phase growth protocol.
//!
//! A component is grown from a start vertex using disjoint budget groups of
//! each vertex's choices:
//!
//! 1. **Explore** (`k1` choices): directed BFS to depth
//!    `ℓ = ⌊min(δ², 1/25) log₂ n⌋`, then pick the grid cell holding the most
//!    reached vertices.
//! 2. **Densify** (`k2` choices): repeatedly reveal the choices of the
//!    vertices newly found in that cell, requiring round `i` to find at least
//!    `2^i n^{min(δ²,1/25)/3}` new in-cell vertices, until the cell holds
//!    `α_d n r^d` component vertices.
//! 3. **Propagate** (`k3` choices): walk the snake order of the grid from the
//!    dense cell. At each step `M = ⌊2α_d n r^d / (3k3)⌋` enlisted vertices of
//!    the current cell reveal choices one at a time until `M` new component
//!    vertices are found in the next cell.
//! 4. **Stitch** (1 choice): grow the same process from every vertex not yet
//!    covered, stopping a growth as soon as it touches an earlier one, then
//!    reveal the last choice of every vertex outside the start's component.
//!
//! Every reveal is recorded, so each vertex uses at most its stage budget in
//! each phase and the whole run is a deterministic function of the sampled
//! irrigation graph.

use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{invalid, Result};
use crate::geometry::{CellId, Grid, PointSet};
use crate::irrigation::IrrigationGraph;
use crate::rgg::NeighborIndex;
use crate::theory::{budget_plan, BudgetPlan, TheoryParams};
use crate::unionfind::UnionFind;

const NONE: u32 = u32::MAX;

const EXPLORE: usize = 0;
const DENSIFY: usize = 1;
const PROPAGATE: usize = 2;
const FINAL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase1Report {
    pub start: usize,
    pub ell: usize,
    /// New vertices per BFS generation; generation 0 is the start itself.
    pub generation_sizes: Vec<usize>,
    /// The reached set `A`, ascending.
    pub reached: Vec<usize>,
    pub dense_cell: CellId,
    pub dense_count: usize,
    pub target: f64,
    /// `target < 2`: the polynomial target is below one meaningful vertex,
    /// so the phase is not judged against it.
    pub degenerate: bool,
    /// The growth touched an earlier growth (stitching only).
    pub hit: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase2Report {
    pub dense_cell: CellId,
    /// `N_0`, the phase-1 vertices already in the dense cell.
    pub initial: usize,
    /// `N_1, N_2, ...`: new in-cell vertices found per round.
    pub rounds: Vec<usize>,
    /// Required minimum of each round, `2^i n^{min(δ²,1/25)/3}`.
    pub quotas: Vec<f64>,
    /// `α_d n r^d`.
    pub target: f64,
    /// `L` with `2^L t <= α_d n r^d < 2^{L+1} t`.
    #[serde(rename = "L")]
    pub max_doublings: usize,
    /// Component vertices in the dense cell at the end of the phase.
    pub cell_members: Vec<usize>,
    pub degenerate: bool,
    pub hit: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase3Report {
    /// `M = ⌊2 α_d n r^d / (3 k3)⌋`.
    pub quota: usize,
    /// Component vertices per cell (flat index) when the phase ended.
    pub per_cell_counts: Vec<usize>,
    /// Completed snake steps.
    pub steps: usize,
    pub failed_cell: Option<CellId>,
    /// `M == 0`: the propagation is vacuous.
    pub degenerate: bool,
    pub hit: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub n: usize,
    pub d: usize,
    pub radius: f64,
    pub delta: f64,
    pub eps: f64,
    pub seed: u64,
    pub budgets: BudgetPlan,
    pub phase1: Phase1Report,
    /// `None` when phase 1 failed.
    pub phase2: Option<Phase2Report>,
    /// `None` when phase 2 failed or did not run.
    pub phase3: Option<Phase3Report>,
    /// Growth processes run, the start's included.
    pub growths: usize,
    /// Growths that stopped on touching an earlier growth.
    pub growths_merged: usize,
    /// Components of the protocol's revealed graph before the final stage.
    pub components_before_final: usize,
    /// Final-stage choices revealed.
    pub extra_edges_used: usize,
    /// The revealed graph is connected after the final stage.
    pub stitched: bool,
    /// The full `Γ(r, c)` is connected.
    pub connected: bool,
}

impl ProtocolReport {
    pub fn phase1_success(&self) -> bool {
        self.phase1.success
    }

    pub fn phase2_success(&self) -> bool {
        self.phase2.as_ref().is_some_and(|p| p.success)
    }

    pub fn phase3_success(&self) -> bool {
        self.phase3.as_ref().is_some_and(|p| p.success)
    }

    pub fn degenerate(&self) -> bool {
        self.phase1.degenerate
            || self.phase2.as_ref().is_some_and(|p| p.degenerate)
            || self.phase3.as_ref().is_some_and(|p| p.degenerate)
    }
}

enum Touch {
    New,
    Own,
    Hit,
}

/// Reveal state shared by all growths of one protocol run.
pub struct Protocol<'g> {
    graph: &'g IrrigationGraph,
    grid: Grid,
    plan: BudgetPlan,
    delta: f64,
    cell: Vec<u32>,
    owner: Vec<u32>,
    uf: UnionFind,
    /// `revealed[stage][v]`: choices of `v` revealed within that stage.
    revealed: [Vec<u32>; 4],
    growth: u32,
    growths: usize,
    members: Vec<usize>,
    hit: bool,
    depth: Option<usize>,
}

impl<'g> Protocol<'g> {
    pub fn new(
        graph: &'g IrrigationGraph,
        points: &PointSet,
        grid: Grid,
        plan: BudgetPlan,
        delta: f64,
    ) -> Result<Self> {
        if graph.budgets() != plan.budgets() {
            return invalid(format!(
                "graph budgets {:?} do not match the plan {:?}",
                graph.budgets(),
                plan.budgets()
            ));
        }
        if points.len() != graph.n() || points.dim() != grid.dim {
            return invalid("points, graph and grid disagree on n or d");
        }
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("delta must lie in (0,1), got {delta}"));
        }
        let n = graph.n();
        let cell = points.iter().map(|p| grid.flat_cell_of(p) as u32).collect();
        Ok(Protocol {
            graph,
            grid,
            plan,
            delta,
            cell,
            owner: vec![NONE; n],
            uf: UnionFind::new(n),
            revealed: std::array::from_fn(|_| vec![0; n]),
            growth: NONE,
            growths: 0,
            members: Vec::new(),
            hit: false,
            depth: None,
        })
    }

    /// Replaces the exploration depth `ℓ` by a fixed value.
    pub fn with_exploration_depth(mut self, ell: usize) -> Self {
        self.depth = Some(ell);
        self
    }

    fn n(&self) -> usize {
        self.graph.n()
    }

    fn exponent(&self) -> f64 {
        (self.delta * self.delta).min(1.0 / 25.0)
    }

    /// `n^{min(δ², 1/25)/3}`.
    pub fn polynomial_target(&self) -> f64 {
        (self.n() as f64).powf(self.exponent() / 3.0)
    }

    /// `⌊min(δ², 1/25) log₂ n⌋`.
    pub fn exploration_depth(&self) -> usize {
        if let Some(ell) = self.depth {
            return ell;
        }
        (self.exponent() * (self.n() as f64).log2()).floor().max(0.0) as usize
    }

    /// `α_d n r^d`.
    pub fn density_target(&self) -> f64 {
        self.plan.alpha_d * self.n() as f64 * self.graph.radius().powi(self.grid.dim as i32)
    }

    /// `⌊2 α_d n r^d / (3 k3)⌋`.
    pub fn propagation_quota(&self) -> usize {
        let k3 = self.plan.k3.max(1) as f64;
        (2.0 * self.density_target() / (3.0 * k3)).floor().max(0.0) as usize
    }

    /// Growth that claimed `v`, if any.
    pub fn owner_of(&self, v: usize) -> Option<usize> {
        (self.owner[v] != NONE).then_some(self.owner[v] as usize)
    }

    /// Choices revealed per vertex within `stage` (0..4).
    pub fn reveal_counts(&self, stage: usize) -> &[u32] {
        &self.revealed[stage]
    }

    pub fn same_component(&mut self, a: usize, b: usize) -> bool {
        self.uf.same(a, b)
    }

    fn begin_growth(&mut self, start: usize) {
        self.growth = self.growths as u32;
        self.growths += 1;
        self.owner[start] = self.growth;
        self.members.clear();
        self.members.push(start);
        self.hit = false;
    }

    /// Next unrevealed choice of `v` in `stage`, if any.
    fn reveal(&mut self, v: usize, stage: usize) -> Option<usize> {
        let range = self.graph.stage_range(v, stage);
        let pos = range.start + self.revealed[stage][v] as usize;
        if pos >= range.end {
            return None;
        }
        self.revealed[stage][v] += 1;
        let u = self.graph.choices(v)[pos] as usize;
        self.uf.union(v, u);
        Some(u)
    }

    fn touch(&mut self, u: usize) -> Touch {
        match self.owner[u] {
            NONE => {
                self.owner[u] = self.growth;
                self.members.push(u);
                Touch::New
            }
            g if g == self.growth => Touch::Own,
            _ => {
                self.hit = true;
                Touch::Hit
            }
        }
    }

    /// Phase 1 from `start`: BFS over stage-1 directed choices to depth `ℓ`.
    pub fn phase1_explore(&mut self, start: usize) -> Result<Phase1Report> {
        if start >= self.n() {
            return invalid(format!("start vertex {start} out of range"));
        }
        if self.owner[start] != NONE {
            return invalid(format!("start vertex {start} already belongs to a growth"));
        }
        self.begin_growth(start);
        let ell = self.exploration_depth();
        let target = self.polynomial_target();
        let mut reached = vec![start];
        let mut generation_sizes = vec![1];
        let mut frontier = vec![start];
        'bfs: for _ in 0..ell {
            let mut next = Vec::new();
            for &v in &frontier {
                while let Some(u) = self.reveal(v, EXPLORE) {
                    match self.touch(u) {
                        Touch::New => next.push(u),
                        Touch::Own => {}
                        Touch::Hit => break 'bfs,
                    }
                }
            }
            generation_sizes.push(next.len());
            reached.extend_from_slice(&next);
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        let (dense_flat, dense_count) = self.densest_cell(&reached);
        reached.sort_unstable();
        let degenerate = target < 2.0;
        let success = !self.hit && (dense_count as f64 >= target || degenerate);
        Ok(Phase1Report {
            start,
            ell,
            generation_sizes,
            reached,
            dense_cell: self.grid.cell_from_flat(dense_flat),
            dense_count,
            target,
            degenerate,
            hit: self.hit,
            success,
        })
    }

    /// Cell with the most of `vertices`; ties go to the lowest flat index.
    fn densest_cell(&self, vertices: &[usize]) -> (usize, usize) {
        let mut counts = std::collections::HashMap::new();
        for &v in vertices {
            *counts.entry(self.cell[v] as usize).or_insert(0usize) += 1;
        }
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .unwrap_or((0, 0))
    }

    fn members_in_cell(&self, flat: usize) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.members.iter().copied().filter(|&v| self.cell[v] as usize == flat).collect();
        out.sort_unstable();
        out
    }

    /// Phase 2: doubling rounds in the phase-1 dense cell.
    pub fn phase2_densify(&mut self, report1: &Phase1Report) -> Result<Phase2Report> {
        if !report1.success {
            return invalid("phase 2 needs a successful phase-1 report");
        }
        if self.owner[report1.start] != self.growth {
            return invalid("phase-1 report does not belong to the current growth");
        }
        let dense = self.grid.flat_index(&report1.dense_cell);
        let target = self.density_target();
        let unit = self.polynomial_target();
        let max_doublings =
            if target >= unit { (target / unit).log2().floor().max(0.0) as usize } else { 0 };

        let mut frontier = self.members_in_cell(dense);
        let initial = frontier.len();
        let mut cumulative = initial;
        let mut rounds = Vec::new();
        let mut quotas = Vec::new();
        let mut success = cumulative as f64 >= target;
        // One round beyond L: meeting every quota through round L only
        // guarantees (2^{L+1} - 1) t, which can fall just short of the target.
        let mut round = 1;
        while !success && !self.hit && round <= max_doublings + 1 {
            let quota = 2f64.powi(round as i32) * unit;
            let mut next = Vec::new();
            'round: for &v in &frontier {
                while let Some(u) = self.reveal(v, DENSIFY) {
                    match self.touch(u) {
                        Touch::New if self.cell[u] as usize == dense => next.push(u),
                        Touch::Hit => break 'round,
                        _ => {}
                    }
                }
            }
            rounds.push(next.len());
            quotas.push(quota);
            cumulative += next.len();
            if self.hit {
                break;
            }
            if cumulative as f64 >= target {
                success = true;
            } else if (next.len() as f64) < quota {
                break;
            }
            frontier = next;
            round += 1;
        }
        Ok(Phase2Report {
            dense_cell: report1.dense_cell.clone(),
            initial,
            rounds,
            quotas,
            target,
            max_doublings,
            cell_members: self.members_in_cell(dense),
            degenerate: target < 2.0,
            hit: self.hit,
            success: success && !self.hit,
        })
    }

    /// Members of `flat` that have not used any stage-3 choice, lowest ids
    /// first, at most `m` of them.
    fn fresh_in_cell(&self, flat: usize, m: usize) -> Vec<usize> {
        self.members_in_cell(flat)
            .into_iter()
            .filter(|&v| self.revealed[PROPAGATE][v] == 0)
            .take(m)
            .collect()
    }

    /// One snake step: enlisted `sources` reveal stage-3 choices one at a
    /// time until `m` new component vertices land in cell `next`.
    fn propagate_step(&mut self, sources: &[usize], next: usize, m: usize) -> Vec<usize> {
        let mut found = Vec::with_capacity(m);
        for &v in sources {
            while let Some(u) = self.reveal(v, PROPAGATE) {
                match self.touch(u) {
                    Touch::New if self.cell[u] as usize == next => {
                        found.push(u);
                        if found.len() == m {
                            return found;
                        }
                    }
                    Touch::Hit => return found,
                    _ => {}
                }
            }
        }
        found
    }

    /// Phase 3: propagate density along the snake order, forwards from the
    /// dense cell to the end and then backwards to the beginning.
    pub fn phase3_propagate(&mut self, report2: &Phase2Report) -> Result<Phase3Report> {
        if !report2.success {
            return invalid("phase 3 needs a successful phase-2 report");
        }
        let m = self.propagation_quota();
        let dense = self.grid.flat_index(&report2.dense_cell);
        let mut steps = 0;
        let mut failed_cell = None;
        if m > 0 {
            let order = self.grid.snake_flat();
            let p = order.iter().position(|&c| c == dense).expect("dense cell in snake");
            let legs: [Vec<(usize, usize)>; 2] = [
                (p..order.len() - 1).map(|i| (order[i], order[i + 1])).collect(),
                (1..=p).rev().map(|i| (order[i], order[i - 1])).collect(),
            ];
            'walk: for leg in legs {
                let mut sources = self.fresh_in_cell(dense, m);
                for (_, next) in leg {
                    let found = self.propagate_step(&sources, next, m);
                    if self.hit {
                        break 'walk;
                    }
                    if found.len() < m {
                        failed_cell = Some(self.grid.cell_from_flat(next));
                        break 'walk;
                    }
                    steps += 1;
                    sources = found;
                }
            }
        }
        let mut per_cell_counts = vec![0; self.grid.cell_count()];
        for &v in &self.members {
            per_cell_counts[self.cell[v] as usize] += 1;
        }
        Ok(Phase3Report {
            quota: m,
            per_cell_counts,
            steps,
            degenerate: m == 0,
            hit: self.hit,
            success: failed_cell.is_none() && !self.hit,
            failed_cell,
        })
    }

    /// Runs phases 1 to 3 from `start`; returns whether the growth stopped by
    /// touching an earlier one.
    fn grow(&mut self, start: usize) -> Result<bool> {
        let r1 = self.phase1_explore(start)?;
        if r1.success {
            let r2 = self.phase2_densify(&r1)?;
            if r2.success {
                self.phase3_propagate(&r2)?;
            }
        }
        Ok(self.hit)
    }

    /// Grows from every uncovered vertex, reveals the final choice of every
    /// vertex outside `start`'s component, and assembles the report.
    pub fn stitch(
        mut self,
        params: &TheoryParams,
        seed: u64,
        phase1: Phase1Report,
        phase2: Option<Phase2Report>,
        phase3: Option<Phase3Report>,
    ) -> Result<ProtocolReport> {
        let start = phase1.start;
        let mut merged = 0;
        for v in 0..self.n() {
            if self.owner[v] == NONE && self.grow(v)? {
                merged += 1;
            }
        }
        let components_before_final = self.uf.sets();
        let root = self.uf.find(start);
        let outside: Vec<usize> = (0..self.n()).filter(|&v| self.uf.find(v) != root).collect();
        let mut extra_edges_used = 0;
        for v in outside {
            if self.reveal(v, FINAL).is_some() {
                extra_edges_used += 1;
            }
        }
        let stitched = self.uf.sets() == 1;
        let connected = analysis::is_connected(&self.graph.full_view());
        Ok(ProtocolReport {
            n: self.n(),
            d: self.grid.dim,
            radius: self.graph.radius(),
            delta: params.delta,
            eps: params.eps,
            seed,
            budgets: self.plan,
            phase1,
            phase2,
            phase3,
            growths: self.growths,
            growths_merged: merged,
            components_before_final,
            extra_edges_used,
            stitched,
            connected,
        })
    }

    /// Phases 1 to 3 from `start` followed by [`Protocol::stitch`].
    pub fn run(mut self, start: usize, params: &TheoryParams, seed: u64) -> Result<ProtocolReport> {
        let p1 = self.phase1_explore(start)?;
        let p2 = if p1.success { Some(self.phase2_densify(&p1)?) } else { None };
        let p3 = match &p2 {
            Some(r2) if r2.success => Some(self.phase3_propagate(r2)?),
            _ => None,
        };
        self.stitch(params, seed, p1, p2, p3)
    }
}

/// Samples `Γ(r, k1 + k2 + k3 + 1)` with `r = γ n^{-(1-δ)/d}` on `points`
/// and runs the protocol from vertex 0.
pub fn run_protocol(points: &PointSet, params: &TheoryParams, seed: u64) -> Result<ProtocolReport> {
    params.validate()?;
    if params.n != points.len() || params.d != points.dim() {
        return invalid(format!(
            "params (n={}, d={}) do not match the point set (n={}, d={})",
            params.n,
            params.d,
            points.len(),
            points.dim()
        ));
    }
    let r = params.radius();
    let index = NeighborIndex::build(points, r)?;
    let plan = budget_plan(params)?;
    let graph = IrrigationGraph::sample(&index, &plan.budgets(), seed)?;
    let grid = Grid::for_radius(r, params.d)?;
    Protocol::new(&graph, points, grid, plan, params.delta)?.run(0, params, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::torus_distance;

    fn plan_with(k: [usize; 3], alpha_d: f64) -> BudgetPlan {
        BudgetPlan {
            k1: k[0],
            k2: k[1],
            k3: k[2],
            c_total: k[0] + k[1] + k[2] + 1,
            alpha_d,
            p_d: 0.0,
            eta_d: 0.0,
        }
    }

    #[test]
    fn degree_zero_start() {
        let pts = vec![vec![0.1, 0.1], vec![0.6, 0.6], vec![0.62, 0.6]];
        let ps = PointSet::from_points(2, &pts, 0).unwrap();
        let idx = NeighborIndex::build(&ps, 0.05).unwrap();
        let plan = plan_with([2, 2, 2], 0.05);
        let g = IrrigationGraph::sample(&idx, &plan.budgets(), 1).unwrap();
        let grid = Grid::for_radius(0.05, 2).unwrap();
        let mut proto = Protocol::new(&g, &ps, grid, plan, 0.5).unwrap();
        let r1 = proto.phase1_explore(0).unwrap();
        assert_eq!(r1.reached, vec![0]);
        assert_eq!(r1.ell, 0);
        assert!(proto.phase1_explore(0).is_err());
    }

    #[test]
    fn phases_reject_failed_reports() {
        let ps = PointSet::sample(50, 2, 3).unwrap();
        let params = TheoryParams::new(50, 2, 0.5, 1.0, 0.1).unwrap();
        let r = params.radius();
        let idx = NeighborIndex::build(&ps, r).unwrap();
        let plan = budget_plan(&params).unwrap();
        let g = IrrigationGraph::sample(&idx, &plan.budgets(), 3).unwrap();
        let grid = Grid::for_radius(r, 2).unwrap();
        let mut proto = Protocol::new(&g, &ps, grid, plan, 0.5).unwrap();
        let mut r1 = proto.phase1_explore(0).unwrap();
        r1.success = false;
        assert!(proto.phase2_densify(&r1).is_err());
        r1.success = true;
        let mut r2 = proto.phase2_densify(&r1).unwrap();
        r2.success = false;
        assert!(proto.phase3_propagate(&r2).is_err());
    }

    #[test]
    fn mismatched_budgets_rejected() {
        let ps = PointSet::sample(30, 2, 3).unwrap();
        let idx = NeighborIndex::build(&ps, 0.3).unwrap();
        let g = IrrigationGraph::sample(&idx, &[1, 1, 1], 3).unwrap();
        let grid = Grid::for_radius(0.3, 2).unwrap();
        assert!(Protocol::new(&g, &ps, grid, plan_with([1, 1, 1], 0.05), 0.5).is_err());
    }

    #[test]
    fn target_met_by_phase1_needs_no_rounds() {
        // Single-cell grid, complete graph, tiny α so N_0 = 1 suffices.
        let ps = PointSet::sample(40, 2, 9).unwrap();
        let r = 0.8;
        let idx = NeighborIndex::build(&ps, r).unwrap();
        let plan = plan_with([2, 3, 2], 1e-3);
        let g = IrrigationGraph::sample(&idx, &plan.budgets(), 4).unwrap();
        let grid = Grid::with_cells(1, 2, r).unwrap();
        let mut proto = Protocol::new(&g, &ps, grid, plan, 0.5).unwrap();
        let r1 = proto.phase1_explore(0).unwrap();
        let r2 = proto.phase2_densify(&r1).unwrap();
        assert!(r2.success);
        assert!(r2.rounds.is_empty());
        let r3 = proto.phase3_propagate(&r2).unwrap();
        assert!(r3.success && r3.degenerate);
        assert_eq!(r3.per_cell_counts, vec![r2.initial + r2.rounds.iter().sum::<usize>()]);
    }

    #[test]
    fn sparse_cell_fails_phase2_without_error() {
        // Two points only: the cell can never hold α n r^d = 5 vertices.
        let ps = PointSet::from_points(2, &[vec![0.1, 0.1], vec![0.12, 0.1]], 0).unwrap();
        let r = 0.5;
        let idx = NeighborIndex::build(&ps, r).unwrap();
        let plan = plan_with([1, 1, 1], 80.0);
        let g = IrrigationGraph::sample(&idx, &plan.budgets(), 0).unwrap();
        let grid = Grid::for_radius(r, 2).unwrap();
        let mut proto = Protocol::new(&g, &ps, grid, plan, 0.5).unwrap();
        let r1 = proto.phase1_explore(0).unwrap();
        assert!(r1.success);
        let r2 = proto.phase2_densify(&r1).unwrap();
        assert!(!r2.success);
        assert!(r2.target > 2.0);
    }

    #[test]
    fn single_cell_grid_propagation_is_trivial() {
        let ps = PointSet::sample(60, 2, 5).unwrap();
        let r = 0.8;
        let idx = NeighborIndex::build(&ps, r).unwrap();
        let plan = plan_with([2, 6, 2], 0.5);
        let g = IrrigationGraph::sample(&idx, &plan.budgets(), 2).unwrap();
        let grid = Grid::with_cells(1, 2, r).unwrap();
        let mut proto = Protocol::new(&g, &ps, grid, plan, 0.5).unwrap();
        assert!(proto.propagation_quota() >= 1);
        let r1 = proto.phase1_explore(0).unwrap();
        let r2 = proto.phase2_densify(&r1).unwrap();
        assert!(r2.success);
        let r3 = proto.phase3_propagate(&r2).unwrap();
        assert!(r3.success);
        assert_eq!(r3.steps, 0);
        assert_eq!(r3.per_cell_counts, vec![r2.cell_members.len()]);
    }

    #[test]
    fn tiny_instance_is_degenerate_but_runs() {
        let ps = PointSet::sample(50, 2, 11).unwrap();
        let params = TheoryParams::new(50, 2, 0.5, 1.0, 0.1).unwrap();
        let rep = run_protocol(&ps, &params, 11).unwrap();
        assert!(rep.phase1.degenerate);
        assert!(rep.degenerate());
        assert_eq!(rep.phase1.ell, 0);
        assert_eq!(rep.phase1.reached, vec![0]);
        if rep.stitched {
            assert!(rep.connected);
        }
    }

    #[test]
    fn protocol_is_deterministic() {
        let ps = PointSet::sample(3000, 2, 21).unwrap();
        let params = TheoryParams::new(3000, 2, 0.5, 1.0, 0.1).unwrap();
        let a = run_protocol(&ps, &params, 5).unwrap();
        let b = run_protocol(&ps, &params, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn connected_agrees_with_analysis() {
        let ps = PointSet::sample(2000, 2, 8).unwrap();
        let params = TheoryParams::new(2000, 2, 0.5, 1.0, 0.1).unwrap();
        let rep = run_protocol(&ps, &params, 8).unwrap();
        let idx = NeighborIndex::build(&ps, params.radius()).unwrap();
        let g = IrrigationGraph::sample(&idx, &budget_plan(&params).unwrap().budgets(), 8).unwrap();
        assert_eq!(rep.connected, analysis::is_connected(&g.full_view()));
        if rep.stitched {
            assert!(rep.connected);
        }
    }

    #[test]
    fn reached_set_bounds_and_locality() {
        let ps = PointSet::sample(4000, 2, 13).unwrap();
        let params = TheoryParams::new(4000, 2, 0.5, 1.0, 0.1).unwrap();
        let r = params.radius();
        let idx = NeighborIndex::build(&ps, r).unwrap();
        let plan = plan_with([3, 4, 4], 0.05);
        let g = IrrigationGraph::sample(&idx, &plan.budgets(), 13).unwrap();
        let grid = Grid::for_radius(r, 2).unwrap();
        let mut proto = Protocol::new(&g, &ps, grid, plan, 0.5).unwrap().with_exploration_depth(4);
        let r1 = proto.phase1_explore(0).unwrap();
        assert_eq!(r1.ell, 4);
        assert!(r1.generation_sizes.len() <= 5);
        let bound: usize = (0..=r1.ell).map(|i| plan.k1.pow(i as u32)).sum();
        assert!(r1.reached.len() <= bound);
        assert!(r1.reached.len() > 1);
        assert_eq!(r1.generation_sizes.iter().sum::<usize>(), r1.reached.len());
        for &v in &r1.reached {
            let dist = torus_distance(ps.point(0), ps.point(v)).unwrap();
            assert!(dist <= r1.ell as f64 * r + 1e-12);
        }
        for v in 0..ps.len() {
            assert!(proto.reveal_counts(0)[v] as usize <= plan.k1);
        }
    }

    #[test]
    fn budget_accounting_and_containment() {
        let ps = PointSet::sample(3000, 2, 17).unwrap();
        let params = TheoryParams::new(3000, 2, 0.5, 1.0, 0.1).unwrap();
        let r = params.radius();
        let idx = NeighborIndex::build(&ps, r).unwrap();
        let plan = plan_with([3, 6, 3], 0.3);
        let g = IrrigationGraph::sample(&idx, &plan.budgets(), 17).unwrap();
        let grid = Grid::for_radius(r, 2).unwrap();
        let mut proto = Protocol::new(&g, &ps, grid, plan, 0.5).unwrap().with_exploration_depth(3);
        let r1 = proto.phase1_explore(0).unwrap();
        if let Ok(r2) = proto.phase2_densify(&r1) {
            if r2.success {
                proto.phase3_propagate(&r2).unwrap();
            }
        }
        let limits = plan.budgets();
        for (stage, &k) in limits.iter().enumerate() {
            for v in 0..ps.len() {
                assert!(proto.reveal_counts(stage)[v] as usize <= k);
                assert!(proto.reveal_counts(stage)[v] as usize <= g.stage_range(v, stage).len());
            }
        }
        // Every vertex claimed by the growth is in the start's component of
        // the graph restricted to the first three stages.
        let lab = analysis::components(&g.view(3).unwrap());
        for v in 0..ps.len() {
            if proto.owner_of(v).is_some() {
                assert_eq!(lab.labels[v], lab.labels[0]);
                assert!(proto.same_component(v, 0));
            }
        }
    }

    #[test]
    fn two_clusters_are_stitched_by_final_choices() {
        // Complete graph on two clusters; the first three stages stay inside a
        // vertex's own cluster, the final choice is uniform over everything.
        let half = 20;
        let pts: Vec<Vec<f64>> = (0..2 * half)
            .map(|i| vec![if i < half { 0.1 } else { 0.6 } + 0.001 * (i % half) as f64, 0.3])
            .collect();
        let ps = PointSet::from_points(2, &pts, 0).unwrap();
        let r = 0.9;
        let idx = NeighborIndex::build(&ps, r).unwrap();
        let plan = plan_with([3, 1, 1], 1e-3);
        let mut ok = 0;
        for seed in 0..100u64 {
            let mut rng = crate::rng::stream(seed, 0);
            let choices: Vec<Vec<usize>> = (0..2 * half)
                .map(|v| {
                    let base = if v < half { 0 } else { half };
                    let mut out: Vec<usize> = rand::seq::index::sample(&mut rng, half, 6)
                        .into_iter()
                        .map(|k| base + k)
                        .filter(|&u| u != v)
                        .take(5)
                        .collect();
                    loop {
                        let u = rand::Rng::random_range(&mut rng, 0..2 * half);
                        if u != v && !out.contains(&u) {
                            out.push(u);
                            break;
                        }
                    }
                    out
                })
                .collect();
            let g = IrrigationGraph::from_choices(&idx, &plan.budgets(), &choices, seed).unwrap();
            let grid = Grid::with_cells(2, 2, r).unwrap();
            let params = TheoryParams::new(2 * half, 2, 0.5, 1.0, 0.1).unwrap();
            let rep = Protocol::new(&g, &ps, grid, plan, 0.5)
                .unwrap()
                .with_exploration_depth(10)
                .run(0, &params, seed)
                .unwrap();
            assert!(rep.components_before_final >= 2);
            assert_eq!(rep.stitched, rep.connected);
            if rep.stitched {
                ok += 1;
            }
        }
        assert!(ok >= 95, "stitched in {ok}/100");
    }
}

//! Irrigation graphs `Γ_n(r, c)` and their directed variant `Γ⁺_n(r, c)`.
//!
//! Every vertex draws one ordered, without-replacement sample of
//! `min(c, deg)` neighbors up front. The sample is split into consecutive
//! budget groups `(b_1, ..., b_s)` with `Σ b_j = c`; a [`StageView`] reveals
//! the first `s'` groups. Because a uniform ordered sample has uniform
//! prefixes, every view is itself distributed as `Γ_n(r, b_1 + ... + b_s')`,
//! and views of one sample are nested.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::rgg::NeighborIndex;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct IrrigationGraph {
    n: usize,
    /// `choices[offsets[i]..offsets[i + 1]]` is vertex `i`'s ordered sample.
    offsets: Vec<usize>,
    choices: Vec<u32>,
    budgets: Vec<usize>,
    radius: f64,
    seed: u64,
}

/// The first `stage_count` budget groups of an [`IrrigationGraph`].
#[derive(Debug, Clone, Copy)]
pub struct StageView<'g> {
    graph: &'g IrrigationGraph,
    stage_count: usize,
    prefix: usize,
}

fn check_budgets(budgets: &[usize]) -> Result<usize> {
    if budgets.is_empty() {
        return invalid("budget list is empty");
    }
    let c: usize = budgets.iter().sum();
    if c == 0 {
        return invalid("total budget must be at least 1");
    }
    Ok(c)
}

/// Ordered uniform sample of `k` items from `pool` (partial Fisher-Yates).
fn sample_prefix<R: Rng>(pool: &mut [usize], k: usize, rng: &mut R) {
    for t in 0..k {
        let j = rng.random_range(t..pool.len());
        pool.swap(t, j);
    }
}

impl IrrigationGraph {
    /// Samples every vertex's choices; deterministic in `(index, budgets, seed)`
    /// and independent of the iteration order over vertices.
    pub fn sample(index: &NeighborIndex<'_>, budgets: &[usize], seed: u64) -> Result<Self> {
        let c = check_budgets(budgets)?;
        let n = index.len();
        let per_vertex: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut pool = index.neighbors_of(i).expect("vertex in range");
                let k = c.min(pool.len());
                let mut rng = rng::vertex_stream(seed, i);
                sample_prefix(&mut pool, k, &mut rng);
                pool[..k].iter().map(|&j| j as u32).collect()
            })
            .collect();
        Ok(Self::assemble(per_vertex, budgets.to_vec(), index.radius(), seed))
    }

    /// Builds a graph from explicit choice lists, checking every invariant
    /// against `index`: choices are distinct neighbors, `min(c, deg)` of them.
    pub fn from_choices(
        index: &NeighborIndex<'_>,
        budgets: &[usize],
        choices: &[Vec<usize>],
        seed: u64,
    ) -> Result<Self> {
        let c = check_budgets(budgets)?;
        if choices.len() != index.len() {
            return invalid(format!("{} choice lists for {} vertices", choices.len(), index.len()));
        }
        let mut per_vertex = Vec::with_capacity(choices.len());
        for (i, list) in choices.iter().enumerate() {
            let nbrs = index.neighbors_of(i)?;
            if list.len() != c.min(nbrs.len()) {
                return invalid(format!(
                    "vertex {i} has {} choices, expected min({c}, {}) ",
                    list.len(),
                    nbrs.len()
                ));
            }
            let mut seen = std::collections::HashSet::new();
            for &j in list {
                if nbrs.binary_search(&j).is_err() {
                    return invalid(format!("vertex {i} chose non-neighbor {j}"));
                }
                if !seen.insert(j) {
                    return invalid(format!("vertex {i} chose {j} twice"));
                }
            }
            per_vertex.push(list.iter().map(|&j| j as u32).collect());
        }
        Ok(Self::assemble(per_vertex, budgets.to_vec(), index.radius(), seed))
    }

    fn assemble(per_vertex: Vec<Vec<u32>>, budgets: Vec<usize>, radius: f64, seed: u64) -> Self {
        let mut offsets = Vec::with_capacity(per_vertex.len() + 1);
        offsets.push(0);
        let mut choices = Vec::with_capacity(per_vertex.iter().map(Vec::len).sum());
        for list in &per_vertex {
            choices.extend_from_slice(list);
            offsets.push(choices.len());
        }
        IrrigationGraph { n: per_vertex.len(), offsets, choices, budgets, radius, seed }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn budgets(&self) -> &[usize] {
        &self.budgets
    }

    pub fn total_budget(&self) -> usize {
        self.budgets.iter().sum()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// All choices of vertex `i`, in draw order.
    pub fn choices(&self, i: usize) -> &[u32] {
        &self.choices[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Index range (into [`IrrigationGraph::choices`]) of budget group `stage`
    /// (zero-based) for vertex `i`, truncated to the vertex's sample size.
    pub fn stage_range(&self, i: usize, stage: usize) -> std::ops::Range<usize> {
        let start: usize = self.budgets[..stage].iter().sum();
        let end = start + self.budgets[stage];
        let len = self.offsets[i + 1] - self.offsets[i];
        start.min(len)..end.min(len)
    }

    pub fn stage_count(&self) -> usize {
        self.budgets.len()
    }

    pub fn view(&self, stage_count: usize) -> Result<StageView<'_>> {
        if stage_count > self.budgets.len() {
            return invalid(format!(
                "view of {stage_count} stages requested, graph has {}",
                self.budgets.len()
            ));
        }
        let prefix = self.budgets[..stage_count].iter().sum();
        Ok(StageView { graph: self, stage_count, prefix })
    }

    /// All stages revealed.
    pub fn full_view(&self) -> StageView<'_> {
        self.view(self.budgets.len()).expect("full view")
    }

    /// Writes the directed choice lists as CSV rows `vertex,rank,chosen`.
    pub fn write_choices_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["vertex", "rank", "chosen"])?;
        for i in 0..self.n {
            for (rank, &j) in self.choices(i).iter().enumerate() {
                out.write_record([i.to_string(), rank.to_string(), j.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

impl<'g> StageView<'g> {
    pub fn graph(&self) -> &'g IrrigationGraph {
        self.graph
    }

    pub fn stage_count(&self) -> usize {
        self.stage_count
    }

    pub fn n(&self) -> usize {
        self.graph.n
    }

    /// Number of choices revealed per vertex (before truncation by degree).
    pub fn revealed_budget(&self) -> usize {
        self.prefix
    }

    /// Revealed out-neighbors without bounds checking beyond slice indexing.
    #[inline]
    pub fn out(&self, i: usize) -> &'g [u32] {
        let all = self.graph.choices(i);
        &all[..self.prefix.min(all.len())]
    }

    /// Revealed prefix of vertex `i`'s choices.
    pub fn out_neighbors(&self, i: usize) -> Result<&'g [u32]> {
        if i >= self.graph.n {
            return invalid(format!("vertex {i} out of range (n = {})", self.graph.n));
        }
        Ok(self.out(i))
    }

    /// Undirected edges `(i, j)`, `i < j`, sorted and without duplicates.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = (0..self.graph.n)
            .flat_map(|i| {
                self.out(i).iter().map(move |&j| {
                    let j = j as usize;
                    (i.min(j), i.max(j))
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// True if `{a, b}` is a revealed undirected edge.
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.out(a).contains(&(b as u32)) || self.out(b).contains(&(a as u32))
    }
}

//! Connectivity structure of revealed irrigation graphs: union-find
//! components, the connectivity test, and isolated `(c+1)`-clique detection.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::irrigation::{IrrigationGraph, StageView};
use crate::unionfind::UnionFind;

/// Canonical component labels: component ids are numbered by their smallest
/// vertex, so the labeling does not depend on edge order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentLabeling {
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
    pub count: usize,
}

impl ComponentLabeling {
    fn from_union_find(uf: &mut UnionFind) -> Self {
        let n = uf.len();
        let mut root_label = vec![usize::MAX; n];
        let mut labels = Vec::with_capacity(n);
        let mut sizes = Vec::new();
        for v in 0..n {
            let r = uf.find(v);
            if root_label[r] == usize::MAX {
                root_label[r] = sizes.len();
                sizes.push(0);
            }
            labels.push(root_label[r]);
            sizes[root_label[r]] += 1;
        }
        let count = sizes.len();
        ComponentLabeling { labels, sizes, count }
    }

    pub fn is_connected(&self) -> bool {
        self.count <= 1
    }

    pub fn largest(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    /// `(size, number of components of that size)`, ascending by size.
    pub fn size_histogram(&self) -> Vec<(usize, usize)> {
        let mut h = BTreeMap::new();
        for &s in &self.sizes {
            *h.entry(s).or_insert(0) += 1;
        }
        h.into_iter().collect()
    }

    /// Writes the size histogram as CSV `size,count`.
    pub fn write_size_histogram_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["size", "count"])?;
        for (size, count) in self.size_histogram() {
            out.write_record([size.to_string(), count.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Vertex lists per component, each sorted ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (v, &l) in self.labels.iter().enumerate() {
            out[l].push(v);
        }
        out
    }
}

fn union_view(view: &StageView<'_>) -> UnionFind {
    let mut uf = UnionFind::new(view.n());
    for i in 0..view.n() {
        for &j in view.out(i) {
            uf.union(i, j as usize);
        }
    }
    uf
}

/// Connected components of the undirected revealed graph.
pub fn components(view: &StageView<'_>) -> ComponentLabeling {
    ComponentLabeling::from_union_find(&mut union_view(view))
}

pub fn is_connected(view: &StageView<'_>) -> bool {
    union_view(view).sets() <= 1
}

/// Number of components after each successive stage, for stage counts
/// `0, 1, ..., s`. Computed incrementally on one union-find.
pub fn component_counts_by_stage(graph: &IrrigationGraph) -> Vec<usize> {
    let n = graph.n();
    let mut uf = UnionFind::new(n);
    let mut out = Vec::with_capacity(graph.stage_count() + 1);
    out.push(uf.sets());
    for stage in 0..graph.stage_count() {
        for i in 0..n {
            let range = graph.stage_range(i, stage);
            for &j in &graph.choices(i)[range] {
                uf.union(i, j as usize);
            }
        }
        out.push(uf.sets());
    }
    out
}

/// Isolated `(c+1)`-cliques: components of exactly `c+1` vertices whose
/// induced subgraph is complete.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueReport {
    pub clique_size: usize,
    pub cliques: Vec<Vec<usize>>,
}

impl CliqueReport {
    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }
}

/// Scans components of size exactly `c+1` for completeness. Meant for the
/// full view, where every vertex has revealed all `c` choices.
pub fn find_isolated_cliques(view: &StageView<'_>, c: usize) -> CliqueReport {
    let labeling = components(view);
    find_isolated_cliques_in(view, &labeling, c)
}

/// [`find_isolated_cliques`] reusing an existing labeling of the same view.
pub fn find_isolated_cliques_in(
    view: &StageView<'_>,
    labeling: &ComponentLabeling,
    c: usize,
) -> CliqueReport {
    let target = c + 1;
    let mut cliques = Vec::new();
    if labeling.sizes.contains(&target) {
        for members in labeling.members() {
            if members.len() != target {
                continue;
            }
            let complete = members.iter().enumerate().all(|(k, &a)| {
                members[k + 1..].iter().all(|&b| view.has_edge(a, b))
            });
            if complete {
                cliques.push(members);
            }
        }
    }
    CliqueReport { clique_size: target, cliques }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointSet;
    use crate::rgg::NeighborIndex;

    fn line(n: usize, gap: f64) -> PointSet {
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 * gap]).collect();
        PointSet::from_points(1, &pts, 0).unwrap()
    }

    #[test]
    fn no_edges_means_singletons() {
        let ps = line(5, 0.19);
        let idx = NeighborIndex::build(&ps, 0.1).unwrap();
        let g = IrrigationGraph::sample(&idx, &[2], 0).unwrap();
        let lab = components(&g.full_view());
        assert_eq!(lab.count, 5);
        assert_eq!(lab.sizes, vec![1; 5]);
        assert!(!is_connected(&g.full_view()));
        let lab0 = components(&g.view(0).unwrap());
        assert_eq!(lab0.labels, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn path_is_one_component() {
        // Spacing 0.1 with r = 0.15: only consecutive points are visible.
        let ps = PointSet::from_points(1, &[vec![0.0], vec![0.1], vec![0.2], vec![0.3]], 0).unwrap();
        let idx = NeighborIndex::build(&ps, 0.15).unwrap();
        let g = IrrigationGraph::from_choices(
            &idx,
            &[1],
            &[vec![1], vec![2], vec![3], vec![2]],
            0,
        )
        .unwrap();
        let lab = components(&g.full_view());
        assert_eq!(lab.count, 1);
        assert!(is_connected(&g.full_view()));
        assert_eq!(lab.size_histogram(), vec![(4, 1)]);
    }

    #[test]
    fn single_vertex_is_connected() {
        let ps = PointSet::sample(1, 2, 0).unwrap();
        let idx = NeighborIndex::build(&ps, 0.1).unwrap();
        let g = IrrigationGraph::sample(&idx, &[1], 0).unwrap();
        assert!(is_connected(&g.full_view()));
    }

    #[test]
    fn far_pair_is_disconnected_for_any_c() {
        let ps = PointSet::from_points(2, &[vec![0.1, 0.1], vec![0.6, 0.6]], 0).unwrap();
        let idx = NeighborIndex::build(&ps, 0.2).unwrap();
        for c in 1..5 {
            let g = IrrigationGraph::sample(&idx, &[c], c as u64).unwrap();
            assert!(!is_connected(&g.full_view()));
        }
    }

    #[test]
    fn crafted_isolated_clique() {
        // Three mutually visible points, each choosing the other two; a far
        // pair elsewhere.
        let pts = vec![
            vec![0.10, 0.10],
            vec![0.12, 0.10],
            vec![0.11, 0.12],
            vec![0.60, 0.60],
            vec![0.62, 0.60],
        ];
        let ps = PointSet::from_points(2, &pts, 0).unwrap();
        let idx = NeighborIndex::build(&ps, 0.05).unwrap();
        let g = IrrigationGraph::from_choices(
            &idx,
            &[2],
            &[vec![1, 2], vec![2, 0], vec![0, 1], vec![4], vec![3]],
            0,
        )
        .unwrap();
        let rep = find_isolated_cliques(&g.full_view(), 2);
        assert_eq!(rep.cliques, vec![vec![0, 1, 2]]);
        assert!(!is_connected(&g.full_view()));
        // The pair is an isolated 2-clique at c = 1 semantics.
        let rep1 = find_isolated_cliques(&g.full_view(), 1);
        assert_eq!(rep1.cliques, vec![vec![3, 4]]);
    }

    #[test]
    fn connected_graph_has_no_isolated_clique() {
        let ps = PointSet::sample(60, 2, 4).unwrap();
        let idx = NeighborIndex::build(&ps, 0.8).unwrap();
        let g = IrrigationGraph::sample(&idx, &[3], 1).unwrap();
        assert!(is_connected(&g.full_view()));
        assert!(find_isolated_cliques(&g.full_view(), 3).is_empty());
    }

    #[test]
    fn stage_counts_are_non_increasing() {
        let ps = PointSet::sample(300, 2, 21).unwrap();
        let idx = NeighborIndex::build(&ps, 0.1).unwrap();
        let g = IrrigationGraph::sample(&idx, &[1, 1, 1, 2], 5).unwrap();
        let counts = component_counts_by_stage(&g);
        assert_eq!(counts[0], 300);
        assert!(counts.windows(2).all(|w| w[1] <= w[0]));
        for s in 0..=4 {
            assert_eq!(counts[s], components(&g.view(s).unwrap()).count);
        }
    }

    #[test]
    fn histogram_csv() {
        let ps = line(5, 0.19);
        let idx = NeighborIndex::build(&ps, 0.1).unwrap();
        let g = IrrigationGraph::sample(&idx, &[2], 0).unwrap();
        let mut buf = Vec::new();
        components(&g.full_view()).write_size_histogram_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "size,count\n1,5\n");
    }
}

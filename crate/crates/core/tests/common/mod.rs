//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use std::collections::VecDeque;

use bluegraph::geometry::PointSet;
use bluegraph::irrigation::StageView;

/// Torus distance by minimising the Euclidean distance over all `3^d`
/// integer shifts of `y`.
pub fn shifted_distance(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len();
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(d as u32) {
        let mut k = code;
        let mut s = 0.0;
        for j in 0..d {
            let shift = (k % 3) as f64 - 1.0;
            k /= 3;
            let diff = x[j] - (y[j] + shift);
            s += diff * diff;
        }
        best = best.min(s.sqrt());
    }
    best
}

/// Sorted neighbor lists of `G_n(r)` by scanning all pairs.
pub fn brute_neighbors(points: &PointSet, r: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && shifted_distance(points.point(i), points.point(j)) <= r {
                adj[i].push(j);
            }
        }
    }
    adj
}

/// Undirected adjacency lists of a revealed view, built from raw out-lists.
pub fn view_adjacency(view: &StageView<'_>) -> Vec<Vec<usize>> {
    let n = view.n();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for &j in view.out(i) {
            let j = j as usize;
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Flood-fill labels numbered in order of the smallest vertex.
pub fn bfs_labels(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if label[u] == usize::MAX {
                    label[u] = next;
                    queue.push_back(u);
                }
            }
        }
        next += 1;
    }
    label
}

/// Every vertex set of size `c + 1` that is complete and has no edge
/// leaving it, found by brute force over components.
pub fn brute_isolated_cliques(adj: &[Vec<usize>], c: usize) -> Vec<Vec<usize>> {
    let labels = bfs_labels(adj);
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); count];
    for (v, &l) in labels.iter().enumerate() {
        groups[l].push(v);
    }
    groups
        .into_iter()
        .filter(|g| g.len() == c + 1)
        .filter(|g| g.iter().all(|&a| g.iter().all(|&b| a == b || adj[a].contains(&b))))
        .collect()
}

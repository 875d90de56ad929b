//! Reverse Cuthill–McKee node ordering, used to keep skyline profiles narrow.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

/// Node adjacency from element connectivity (compressed rows, sorted, no self loops).
pub fn node_graph(n_nodes: usize, elements: &[[usize; 8]]) -> (Vec<usize>, Vec<usize>) {
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for e in elements {
        for &a in e {
            for &b in e {
                if a != b {
                    lists[a].push(b);
                }
            }
        }
    }
    let mut ptr = Vec::with_capacity(n_nodes + 1);
    let mut adj = Vec::new();
    ptr.push(0);
    for l in &mut lists {
        l.sort_unstable();
        l.dedup();
        adj.extend_from_slice(l);
        ptr.push(adj.len());
    }
    (ptr, adj)
}

fn bfs_levels(start: usize, ptr: &[usize], adj: &[usize], mark: &mut [usize], stamp: usize) -> (usize, usize) {
    // returns (eccentricity, last node of the last level with minimum degree)
    let mut frontier = vec![start];
    mark[start] = stamp;
    let mut depth = 0;
    let mut last = start;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[ptr[v]..ptr[v + 1]] {
                if mark[w] != stamp {
                    mark[w] = stamp;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            last = frontier
                .iter()
                .copied()
                .min_by_key(|&v| ptr[v + 1] - ptr[v])
                .unwrap_or(last);
            return (depth, last);
        }
        depth += 1;
        frontier = next;
    }
}

/// Returns `order` such that `order[k]` is the node placed at position `k`.
pub fn reverse_cuthill_mckee(ptr: &[usize], adj: &[usize]) -> Vec<usize> {
    let n = ptr.len() - 1;
    let degree = |v: usize| ptr[v + 1] - ptr[v];
    let mut placed = vec![false; n];
    let mut mark = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut stamp = 0;
    for seed in 0..n {
        if placed[seed] {
            continue;
        }
        // pseudo-peripheral start node of this component
        let mut start = seed;
        let (mut ecc, mut cand) = bfs_levels(start, ptr, adj, &mut mark, stamp);
        stamp += 1;
        for _ in 0..8 {
            let (e2, c2) = bfs_levels(cand, ptr, adj, &mut mark, stamp);
            stamp += 1;
            if e2 > ecc {
                start = cand;
                ecc = e2;
                cand = c2;
            } else {
                start = if e2 == ecc { cand } else { start };
                break;
            }
        }
        let mut queue = VecDeque::new();
        queue.push_back(start);
        placed[start] = true;
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(adj[ptr[v]..ptr[v + 1]].iter().copied().filter(|&w| !placed[w]));
            nbrs.sort_by_key(|&w| (degree(w), w));
            for &w in &nbrs {
                placed[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

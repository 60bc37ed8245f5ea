//! Elementary circuits of a directed graph (Johnson, 1975).
//!
//! Each cycle is reported once, rotated so that its least vertex comes
//! first. Self-loops are cycles of length one.

struct Search<'a> {
    adj: &'a [Vec<usize>],
    allowed: Vec<bool>,
    blocked: Vec<bool>,
    blocked_by: Vec<Vec<usize>>,
    stack: Vec<usize>,
    out: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn unblock(&mut self, u: usize) {
        self.blocked[u] = false;
        while let Some(w) = self.blocked_by[u].pop() {
            if self.blocked[w] {
                self.unblock(w);
            }
        }
    }

    fn circuit(&mut self, v: usize, start: usize) -> bool {
        let mut found = false;
        self.stack.push(v);
        self.blocked[v] = true;
        let adj = self.adj;
        for &w in &adj[v] {
            if !self.allowed[w] {
                continue;
            }
            if w == start {
                self.out.push(self.stack.clone());
                found = true;
            } else if !self.blocked[w] && self.circuit(w, start) {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &w in &adj[v] {
                if self.allowed[w] && !self.blocked_by[w].contains(&v) {
                    self.blocked_by[w].push(v);
                }
            }
        }
        self.stack.pop();
        found
    }
}

/// Vertices of the strongly connected component of `s` inside `{v : v ≥ s}`.
fn component_of(adj: &[Vec<usize>], s: usize) -> Vec<bool> {
    let n = adj.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut todo = vec![s];
        seen[s] = true;
        while let Some(v) = todo.pop() {
            for w in s..n {
                let edge = if forward {
                    adj[v].contains(&w)
                } else {
                    adj[w].contains(&v)
                };
                if edge && !seen[w] {
                    seen[w] = true;
                    todo.push(w);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    let bwd = reach(false);
    fwd.iter().zip(&bwd).map(|(a, b)| *a && *b).collect()
}

/// All elementary cycles of the graph given by adjacency lists.
pub fn simple_cycles(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut out = Vec::new();
    for s in 0..n {
        let allowed = component_of(adj, s);
        let mut search = Search {
            adj,
            allowed,
            blocked: vec![false; n],
            blocked_by: vec![Vec::new(); n],
            stack: Vec::new(),
            out: Vec::new(),
        };
        search.circuit(s, s);
        out.append(&mut search.out);
    }
    out
}

/// Adjacency lists of the complete digraph on `n` vertices, loops included.
pub fn complete_digraph(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|_| (0..n).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// `Σ_k C(n, k)·(k − 1)!`
    fn complete_count(n: usize) -> usize {
        let mut total = 0;
        for k in 1..=n {
            let mut choose = 1usize;
            for i in 0..k {
                choose = choose * (n - i) / (i + 1);
            }
            let fact: usize = (1..k).product();
            total += choose * fact;
        }
        total
    }

    /// Brute force: every vertex sequence starting at its minimum with no repeats
    /// whose consecutive edges (and closing edge) exist.
    fn brute_force(adj: &[Vec<usize>]) -> HashSet<Vec<usize>> {
        fn extend(adj: &[Vec<usize>], path: &mut Vec<usize>, out: &mut HashSet<Vec<usize>>) {
            let last = *path.last().unwrap();
            if adj[last].contains(&path[0]) {
                out.insert(path.clone());
            }
            for &w in &adj[last] {
                if w > path[0] && !path.contains(&w) {
                    path.push(w);
                    extend(adj, path, out);
                    path.pop();
                }
            }
        }
        let mut out = HashSet::new();
        for s in 0..adj.len() {
            extend(adj, &mut vec![s], &mut out);
        }
        out
    }

    #[test]
    fn complete_digraph_counts() {
        for n in 1..=6 {
            let cycles = simple_cycles(&complete_digraph(n));
            assert_eq!(cycles.len(), complete_count(n), "n = {n}");
            let unique: HashSet<_> = cycles.iter().cloned().collect();
            assert_eq!(unique.len(), cycles.len());
        }
    }

    #[test]
    fn matches_brute_force_on_sparse_graphs() {
        let graphs: Vec<Vec<Vec<usize>>> = vec![
            vec![vec![1], vec![2], vec![0]],
            vec![vec![1, 2], vec![2], vec![0, 1], vec![3]],
            vec![vec![0, 1], vec![0, 2, 3], vec![3], vec![1, 2], vec![]],
            vec![vec![], vec![], vec![]],
        ];
        for g in graphs {
            let got: HashSet<_> = simple_cycles(&g).into_iter().collect();
            assert_eq!(got, brute_force(&g), "{g:?}");
        }
    }
}

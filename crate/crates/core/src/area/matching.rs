//! Hopcroft–Karp maximum matching on a bipartite graph given as left-side
//! adjacency lists.

use std::collections::VecDeque;

const NIL: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    n_right: usize,
    adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn new(n_left: usize, n_right: usize) -> Self {
        BipartiteGraph {
            n_right,
            adj: vec![Vec::new(); n_left],
        }
    }

    pub fn add_edge(&mut self, left: usize, right: usize) {
        debug_assert!(right < self.n_right);
        if !self.adj[left].contains(&right) {
            self.adj[left].push(right);
        }
    }

    /// Returns `match_left[l] = Some(r)` for a maximum matching.
    pub fn max_matching(&self) -> Vec<Option<usize>> {
        let n_left = self.adj.len();
        let mut match_l = vec![NIL; n_left];
        let mut match_r = vec![NIL; self.n_right];
        let mut dist = vec![0usize; n_left];

        while self.bfs(&match_l, &match_r, &mut dist) {
            for l in 0..n_left {
                if match_l[l] == NIL {
                    self.dfs(l, &mut match_l, &mut match_r, &mut dist);
                }
            }
        }
        match_l
            .into_iter()
            .map(|r| if r == NIL { None } else { Some(r) })
            .collect()
    }

    fn bfs(&self, match_l: &[usize], match_r: &[usize], dist: &mut [usize]) -> bool {
        let mut queue = VecDeque::new();
        for l in 0..self.adj.len() {
            if match_l[l] == NIL {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in &self.adj[l] {
                let next = match_r[r];
                if next == NIL {
                    found = true;
                } else if dist[next] == usize::MAX {
                    dist[next] = dist[l] + 1;
                    queue.push_back(next);
                }
            }
        }
        found
    }

    fn dfs(
        &self,
        l: usize,
        match_l: &mut [usize],
        match_r: &mut [usize],
        dist: &mut [usize],
    ) -> bool {
        for &r in &self.adj[l] {
            let next = match_r[r];
            if next == NIL
                || (dist[next] == dist[l] + 1 && self.dfs(next, match_l, match_r, dist))
            {
                match_l[l] = r;
                match_r[r] = l;
                return true;
            }
        }
        dist[l] = usize::MAX;
        false
    }
}

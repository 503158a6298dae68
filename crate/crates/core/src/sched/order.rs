//! Dependency DAGs over context entries and the topological-order check.

use crate::model::Context;

/// Mutable DAG over `0..n` used by the scheduling rounds.
#[derive(Debug, Clone)]
pub struct Dag {
    alive: Vec<bool>,
    edges: Vec<(usize, usize)>,
}

impl Dag {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        Dag {
            alive: vec![true; n],
            edges: edges.to_vec(),
        }
    }

    pub fn from_context(ctx: &Context) -> Self {
        Self::new(ctx.len(), &ctx.edges)
    }

    pub fn is_empty(&self) -> bool {
        !self.alive.iter().any(|&a| a)
    }

    /// Remaining nodes with no remaining parent, ascending.
    pub fn roots(&self) -> Vec<usize> {
        (0..self.alive.len())
            .filter(|&v| self.alive[v] && !self.edges.iter().any(|&(p, c)| c == v && self.alive[p]))
            .collect()
    }

    pub fn remove(&mut self, v: usize) {
        self.alive[v] = false;
    }
}

/// True iff no node appears in `schedule` before one of its ancestors.
/// Nodes absent from `schedule` impose no constraint.
pub fn dependency_order_check(edges: &[(usize, usize)], schedule: &[usize]) -> bool {
    let n = edges
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .chain(schedule.iter().copied())
        .max()
        .map_or(0, |m| m + 1);
    let mut seen_at = vec![usize::MAX; n];
    for (i, &v) in schedule.iter().enumerate() {
        if seen_at[v] == usize::MAX {
            seen_at[v] = i;
        }
    }
    // ancestor relation, so unscheduled intermediate nodes still count
    let mut anc: Vec<Vec<bool>> = vec![vec![false; n]; n];
    for &(p, c) in edges {
        anc[c][p] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if anc[i][k] {
                for j in 0..n {
                    if anc[k][j] {
                        anc[i][j] = true;
                    }
                }
            }
        }
    }
    for c in 0..n {
        for a in 0..n {
            if anc[c][a] && seen_at[c] != usize::MAX && seen_at[a] != usize::MAX && seen_at[a] > seen_at[c] {
                return false;
            }
        }
    }
    true
}

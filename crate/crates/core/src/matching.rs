//! Per-slot RB assignment as a min-cost bipartite b-matching.
//!
//! Each BS may take up to `bs_capacity` RBs and each RB serves at most one BS.
//! The constraint matrix is totally unimodular, so the LP optimum is attained
//! at a binary point; successive shortest paths on the flow network
//! `source -> BS -> RB -> sink` reach it directly.
//!
//! RB nodes are eliminated from the shortest-path search: a path alternates
//! between BSs, and the hop `a -> b` means "BS `a` takes over an RB that BS `b`
//! holds". The cheapest such RB for every ordered pair, and the cheapest free
//! RB for every BS, are kept in lazily pruned heaps. An augmentation then costs
//! a Bellman-Ford pass over `N + 2` nodes plus heap updates, independent of `K`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// Weights are laid out `n * K + k`. Only strictly negative entries can be
/// selected; anything else is treated as absent.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub num_bs: usize,
    pub num_rb: usize,
    pub weights: Vec<f64>,
    pub bs_capacity: usize,
}

impl AssignmentProblem {
    pub fn new(num_bs: usize, num_rb: usize, weights: Vec<f64>, bs_capacity: usize) -> Self {
        assert_eq!(weights.len(), num_bs * num_rb, "weight matrix shape");
        assert!(bs_capacity >= 1, "BS capacity must be at least 1");
        Self {
            num_bs,
            num_rb,
            weights,
            bs_capacity,
        }
    }

    #[inline]
    pub fn weight(&self, n: usize, k: usize) -> f64 {
        self.weights[n * self.num_rb + k]
    }
}

/// Integral assignment stored as the owning BS of each RB.
///
/// Equality compares the selection only, not the weight it was scored with.
#[derive(Debug, Clone)]
pub struct BinaryAssignment {
    pub num_bs: usize,
    pub owner: Vec<Option<usize>>,
    pub total_weight: f64,
}

impl PartialEq for BinaryAssignment {
    fn eq(&self, other: &Self) -> bool {
        self.num_bs == other.num_bs && self.owner == other.owner
    }
}

impl BinaryAssignment {
    pub fn empty(num_bs: usize, num_rb: usize) -> Self {
        Self {
            num_bs,
            owner: vec![None; num_rb],
            total_weight: 0.0,
        }
    }

    pub fn num_rb(&self) -> usize {
        self.owner.len()
    }

    pub fn is_selected(&self, n: usize, k: usize) -> bool {
        self.owner[k] == Some(n)
    }

    /// Dense 0/1 matrix, `n * K + k` layout.
    pub fn select_matrix(&self) -> Vec<u8> {
        let k_total = self.num_rb();
        let mut m = vec![0u8; self.num_bs * k_total];
        for (k, o) in self.owner.iter().enumerate() {
            if let Some(n) = o {
                m[n * k_total + k] = 1;
            }
        }
        m
    }

    /// Selected `(n, k)` pairs in RB order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.owner
            .iter()
            .enumerate()
            .filter_map(|(k, o)| o.map(|n| (n, k)))
    }

    pub fn len(&self) -> usize {
        self.owner.iter().filter(|o| o.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn loads(&self) -> Vec<usize> {
        let mut l = vec![0; self.num_bs];
        for n in self.owner.iter().flatten() {
            l[*n] += 1;
        }
        l
    }

    pub fn max_load(&self) -> usize {
        self.loads().into_iter().max().unwrap_or(0)
    }

    /// Both capacity families hold (RB side holds by construction).
    pub fn is_feasible(&self, bs_capacity: usize) -> bool {
        self.owner.iter().flatten().all(|&n| n < self.num_bs) && self.max_load() <= bs_capacity
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

type MinHeap = BinaryHeap<Reverse<Key>>;

struct Solver<'a> {
    p: &'a AssignmentProblem,
    owner: Vec<Option<usize>>,
    load: Vec<usize>,
    free: Vec<MinHeap>,
    // moves[a * N + b]: RBs held by b that a could take, keyed by w_a - w_b.
    moves: Vec<MinHeap>,
}

impl<'a> Solver<'a> {
    fn new(p: &'a AssignmentProblem) -> Self {
        let (n_bs, n_rb) = (p.num_bs, p.num_rb);
        let free = (0..n_bs)
            .map(|n| {
                (0..n_rb)
                    .filter(|&k| p.weight(n, k) < 0.0)
                    .map(|k| Reverse(Key(p.weight(n, k), k)))
                    .collect()
            })
            .collect();
        Self {
            p,
            owner: vec![None; n_rb],
            load: vec![0; n_bs],
            free,
            moves: (0..n_bs * n_bs).map(|_| MinHeap::new()).collect(),
        }
    }

    fn free_top(&mut self, n: usize) -> Option<Key> {
        let heap = &mut self.free[n];
        while let Some(Reverse(key)) = heap.peek() {
            if self.owner[key.1].is_none() {
                return Some(*key);
            }
            heap.pop();
        }
        None
    }

    fn move_top(&mut self, a: usize, b: usize) -> Option<Key> {
        let heap = &mut self.moves[a * self.p.num_bs + b];
        while let Some(Reverse(key)) = heap.peek() {
            if self.owner[key.1] == Some(b) {
                return Some(*key);
            }
            heap.pop();
        }
        None
    }

    fn assign(&mut self, k: usize, b: usize) {
        self.owner[k] = Some(b);
        let wb = self.p.weight(b, k);
        for c in 0..self.p.num_bs {
            let wc = self.p.weight(c, k);
            if c != b && wc < 0.0 {
                self.moves[c * self.p.num_bs + b].push(Reverse(Key(wc - wb, k)));
            }
        }
    }

    /// One augmentation along a cheapest negative path; false when none remains.
    fn augment(&mut self) -> bool {
        let n_bs = self.p.num_bs;
        let cap = self.p.bs_capacity;
        let mut dist: Vec<f64> = (0..n_bs)
            .map(|a| {
                if self.load[a] < cap {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let mut pred: Vec<Option<usize>> = vec![None; n_bs];

        let mut edge = vec![f64::INFINITY; n_bs * n_bs];
        for a in 0..n_bs {
            for b in 0..n_bs {
                if a != b {
                    if let Some(key) = self.move_top(a, b) {
                        edge[a * n_bs + b] = key.0;
                    }
                }
            }
        }
        for _ in 1..n_bs {
            let mut changed = false;
            for a in 0..n_bs {
                if dist[a].is_infinite() {
                    continue;
                }
                for b in 0..n_bs {
                    let c = dist[a] + edge[a * n_bs + b];
                    if c < dist[b] {
                        dist[b] = c;
                        pred[b] = Some(a);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut best: Option<(f64, usize, usize)> = None;
        for z in 0..n_bs {
            if dist[z].is_infinite() {
                continue;
            }
            if let Some(key) = self.free_top(z) {
                let c = dist[z] + key.0;
                if best.map_or(true, |(bc, _, _)| c < bc) {
                    best = Some((c, z, key.1));
                }
            }
        }
        let Some((cost, last, free_rb)) = best else {
            return false;
        };
        if cost >= 0.0 {
            return false;
        }

        // Walk predecessors back to the BS that absorbs the extra unit.
        let mut path = vec![last];
        let mut cur = last;
        while let Some(prev) = pred[cur] {
            if path.len() > n_bs {
                // Only reachable through a rounding-induced negative cycle.
                return false;
            }
            path.push(prev);
            cur = prev;
        }
        path.reverse();
        let transfers: Vec<usize> = path
            .windows(2)
            .map(|w| self.move_top(w[0], w[1]).expect("edge on shortest path").1)
            .collect();
        for (i, &k) in transfers.iter().enumerate() {
            self.assign(k, path[i]);
        }
        self.assign(free_rb, last);
        self.load[path[0]] += 1;
        true
    }
}

/// Minimum-weight integral assignment under both capacity families.
pub fn min_cost_b_matching(problem: &AssignmentProblem) -> BinaryAssignment {
    let mut s = Solver::new(problem);
    while s.augment() {}
    let total_weight = s
        .owner
        .iter()
        .enumerate()
        .filter_map(|(k, o)| o.map(|n| problem.weight(n, k)))
        .sum();
    BinaryAssignment {
        num_bs: problem.num_bs,
        owner: s.owner,
        total_weight,
    }
}

/// Relative offset used to evaluate one-sided limits around a water level.
pub fn limit_offset(level: f64) -> f64 {
    (1e-7 * level.abs()).max(1e-12)
}

/// Optimal assignments just below and just above `level`.
pub fn limit_assignments<F>(level: f64, weight_fn: F) -> (BinaryAssignment, BinaryAssignment)
where
    F: Fn(f64) -> AssignmentProblem,
{
    let eps = limit_offset(level);
    (
        min_cost_b_matching(&weight_fn(level - eps)),
        min_cost_b_matching(&weight_fn(level + eps)),
    )
}

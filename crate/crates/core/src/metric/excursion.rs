//! Nested trees spanned by Poisson marks under a normalized Brownian-type excursion.

use rand::Rng as _;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::{ghp_masks, hausdorff_masks, span_mask, TreeMeasure, TreePoint};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tree::{NodeId, SubtreeMask, Tree};

pub const MIN_STEPS: usize = 1000;

#[derive(Debug, Clone)]
pub struct ExcursionLevel {
    pub lam: f64,
    /// Arena leaves of the marks kept at this level, in time order.
    pub leaves: Vec<NodeId>,
    pub mask: SubtreeMask,
    /// The level's tree on its own, leaf mass `1 / lam`.
    pub tree: Tree,
    pub measure: TreeMeasure,
}

#[derive(Debug, Clone)]
pub struct ExcursionFamily {
    /// Tree spanned by all marks; every level is a mask on it.
    pub arena: Tree,
    /// Excursion values on the grid `k / n`.
    pub path: Vec<f64>,
    /// Mark times in increasing order.
    pub times: Vec<f64>,
    /// Arena leaf of each mark.
    pub mark_leaves: Vec<NodeId>,
    /// Depth of each mark's leaf.
    pub leaf_depths: Vec<f64>,
    /// Depth of the branch point between consecutive marks.
    pub separators: Vec<f64>,
    pub levels: Vec<ExcursionLevel>,
}

impl ExcursionFamily {
    fn check_pair(&self, small: usize, big: usize) -> Result<()> {
        if small >= self.levels.len() || big >= self.levels.len() || small > big {
            return Err(Error::Domain(format!("levels ({small}, {big}) are not an ordered pair")));
        }
        Ok(())
    }

    /// Hausdorff distance between level `small` and the larger level `big`.
    pub fn hausdorff_pair(&self, small: usize, big: usize) -> Result<f64> {
        self.check_pair(small, big)?;
        hausdorff_masks(&self.arena, &self.levels[big].mask, &self.levels[small].mask, f64::INFINITY)
    }

    /// Identity-embedding GHP bound between level `small` and the larger level `big`.
    pub fn ghp_pair(&self, small: usize, big: usize) -> Result<f64> {
        self.check_pair(small, big)?;
        let (s, b) = (&self.levels[small], &self.levels[big]);
        ghp_masks(&self.arena, &b.mask, &s.mask, &b.measure, &s.measure, f64::INFINITY)
    }
}

/// Bridge value at `t` between `(tl, vl)` and `(tr, vr)`.
fn bridge_point(rng: &mut Rng, tl: f64, vl: f64, tr: f64, vr: f64, t: f64) -> f64 {
    let w = tr - tl;
    let mean = vl + (t - tl) / w * (vr - vl);
    let var = ((t - tl) * (tr - t) / w).max(0.0);
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * z
}

/// Minimum of a Brownian bridge from `a` to `b` over duration `tau`.
fn bridge_min(rng: &mut Rng, a: f64, b: f64, tau: f64) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    0.5 * (a + b - ((a - b) * (a - b) - 2.0 * tau * u.ln()).sqrt())
}

/// Discrete bridge turned into an excursion by a cyclic shift at its minimum.
fn sample_path(n: usize, rng: &mut Rng) -> Vec<f64> {
    let scale = 1.0 / (n as f64).sqrt();
    let mut walk = vec![0.0; n + 1];
    for k in 1..=n {
        let z: f64 = StandardNormal.sample(rng);
        walk[k] = walk[k - 1] + scale * z;
    }
    let end = walk[n];
    let bridge: Vec<f64> = (0..=n).map(|k| walk[k] - k as f64 / n as f64 * end).collect();
    let m = (0..n).min_by(|&i, &j| bridge[i].total_cmp(&bridge[j])).unwrap();
    (0..=n).map(|k| bridge[(m + k) % n] - bridge[m]).collect()
}

struct Draft {
    parent: Vec<usize>,
    depth: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl Draft {
    fn add(&mut self, parent: usize, depth: f64) -> usize {
        self.parent.push(parent);
        self.depth.push(depth);
        self.children.push(Vec::new());
        self.children[parent].push(self.depth.len() - 1);
        self.depth.len() - 1
    }
}

/// Tree whose consecutive leaves at `leaf_depths` meet at `separators`.
fn cartesian_tree(leaf_depths: &[f64], separators: &[f64]) -> (Tree, Vec<NodeId>) {
    let mut d = Draft { parent: vec![0], depth: vec![0.0], children: vec![Vec::new()] };
    let mut leaves = Vec::with_capacity(leaf_depths.len());
    let mut stack = vec![0usize];
    for (i, &h) in leaf_depths.iter().enumerate() {
        let attach = if i == 0 {
            0
        } else {
            let m = separators[i - 1];
            let mut last = None;
            while d.depth[*stack.last().unwrap()] > m {
                last = stack.pop();
            }
            let top = *stack.last().unwrap();
            match last {
                Some(below) if d.depth[top] < m => {
                    let w = d.add(top, m);
                    d.children[top].retain(|&c| c != below);
                    d.parent[below] = w;
                    d.children[w].insert(0, below);
                    stack.push(w);
                    w
                }
                _ => top,
            }
        };
        let leaf = d.add(attach, h);
        leaves.push(leaf);
        stack.push(leaf);
    }
    let mut tree = Tree::new();
    let mut map = vec![0usize; d.depth.len()];
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &c in &d.children[u] {
            map[c] = tree.add_child(map[u], d.depth[c] - d.depth[u]);
            queue.push_back(c);
        }
    }
    (tree, leaves.into_iter().map(|v| map[v]).collect())
}

/// Excursion values on the grid `k / n`, interpolated by Brownian bridges.
#[derive(Debug, Clone)]
pub struct Excursion {
    pub path: Vec<f64>,
}

impl Excursion {
    pub fn sample(n_steps: usize, rng: &mut Rng) -> Result<Self> {
        if n_steps < MIN_STEPS {
            return Err(Error::Domain(format!("need at least {MIN_STEPS} steps")));
        }
        Ok(Excursion { path: sample_path(n_steps, rng) })
    }

    /// Nested trees of fresh Poisson marks at each intensity in `lams`.
    ///
    /// Marks form a Poisson process of rate `lams.last()` on `[0, 1]`; a mark is kept at
    /// intensity `lam` when its auxiliary uniform is at most `lam / lams.last()`. With
    /// `allow_empty` unset, an empty smallest level is a `Degenerate` error.
    pub fn subtrees(&self, lams: &[f64], rng: &mut Rng, allow_empty: bool) -> Result<ExcursionFamily> {
        mark_excursion(&self.path, lams, rng, allow_empty)
    }
}

/// Sample one excursion and the nested trees of marks at each intensity in `lams`.
pub fn sample_excursion_subtrees(n_steps: usize, lams: &[f64], rng: &mut Rng, allow_empty: bool) -> Result<ExcursionFamily> {
    Excursion::sample(n_steps, rng)?.subtrees(lams, rng, allow_empty)
}

fn mark_excursion(path: &[f64], lams: &[f64], rng: &mut Rng, allow_empty: bool) -> Result<ExcursionFamily> {
    let n_steps = path.len() - 1;
    if lams.is_empty() || lams.iter().any(|&l| !(l > 0.0 && l.is_finite())) || lams.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("intensities must be positive and strictly increasing".into()));
    }
    let top = *lams.last().unwrap();
    let count = Poisson::new(top).map_err(|e| Error::Domain(e.to_string()))?.sample(rng) as usize;
    let mut marks: Vec<(f64, f64)> = (0..count).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    marks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let n = n_steps as f64;
    let mut leaf_values = Vec::with_capacity(count);
    let mut separators = Vec::with_capacity(count.saturating_sub(1));
    let mut running = f64::INFINITY;
    let mut lowest = f64::INFINITY;
    let mut next = 0;
    for k in 0..n_steps {
        let t1 = (k + 1) as f64 / n;
        let (mut tl, mut vl) = (k as f64 / n, path[k]);
        while next < count && marks[next].0 < t1 {
            let t = marks[next].0.max(tl);
            let v = bridge_point(rng, tl, vl, t1, path[k + 1], t);
            let low = bridge_min(rng, vl, v, t - tl);
            running = running.min(low);
            lowest = lowest.min(low);
            if next > 0 {
                separators.push(running);
            }
            leaf_values.push(v);
            running = f64::INFINITY;
            tl = t;
            vl = v;
            next += 1;
        }
        let low = bridge_min(rng, vl, path[k + 1], t1 - tl);
        running = running.min(low);
        lowest = lowest.min(low);
    }
    let base = lowest.min(0.0);
    let leaf_depths: Vec<f64> = leaf_values.iter().map(|v| v - base).collect();
    let separators: Vec<f64> = separators.iter().map(|v| v - base).collect();
    let (arena, mark_leaves) = if count == 0 { (Tree::new(), Vec::new()) } else { cartesian_tree(&leaf_depths, &separators) };
    let depths = arena.depths();

    let mut levels = Vec::with_capacity(lams.len());
    for &lam in lams {
        let keep = lam / top;
        let leaves: Vec<NodeId> =
            marks.iter().zip(&mark_leaves).filter(|((_, u), _)| *u <= keep).map(|(_, &v)| v).collect();
        if leaves.is_empty() && levels.is_empty() && !allow_empty {
            return Err(Error::Degenerate(format!("no marks at intensity {lam}")));
        }
        let mass = 1.0 / lam;
        let mask = span_mask(&arena, &leaves);
        let tree = if leaves.is_empty() {
            Tree::new().with_leaf_mass(mass)
        } else {
            arena.span(&leaves)?.with_leaf_mass(mass)
        };
        let measure = leaves.iter().map(|&v| (TreePoint::at_node(&depths, v), mass)).collect();
        levels.push(ExcursionLevel { lam, leaves, mask, tree, measure });
    }
    let times = marks.iter().map(|m| m.0).collect();
    Ok(ExcursionFamily { arena, path: path.to_vec(), times, mark_leaves, leaf_depths, separators, levels })
}

//! Prohorov and nested Gromov-Hausdorff-Prohorov distances on finite trees.

pub mod excursion;
pub mod oracle;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tree::{NodeId, SubtreeMask, Tree};

pub use excursion::{sample_excursion_subtrees, Excursion, ExcursionFamily, ExcursionLevel};

/// Finite measure on integer-labelled points.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(usize, f64)>,
    total: f64,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(usize, f64)>) -> Result<Self> {
        if atoms.iter().any(|&(_, m)| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::Domain("atom masses must be finite and non-negative".into()));
        }
        let total = atoms.iter().map(|a| a.1).sum();
        Ok(AtomicMeasure { atoms, total })
    }

    pub fn atoms(&self) -> &[(usize, f64)] {
        &self.atoms
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Dense symmetric distance table.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    n: usize,
    d: Vec<f64>,
}

impl DistanceTable {
    pub fn from_fn<F: Fn(usize, usize) -> f64>(n: usize, f: F) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        DistanceTable { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

struct FlowNet {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

impl FlowNet {
    fn new(n: usize) -> Self {
        FlowNet { adj: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new() }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: f64) {
        self.adj[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(c);
        self.adj[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0.0);
    }

    /// Dinic's algorithm; residual capacities below `eps` count as saturated.
    fn max_flow(&mut self, s: usize, t: usize, eps: f64) -> f64 {
        let n = self.adj.len();
        let mut total = 0.0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[s] = 0;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if level[v] == usize::MAX && self.cap[e] > eps {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if level[t] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; n];
            loop {
                let pushed = self.augment(s, t, f64::INFINITY, &level, &mut next, eps);
                if pushed <= eps {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(&mut self, u: usize, t: usize, limit: f64, level: &[usize], next: &mut [usize], eps: f64) -> f64 {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let v = self.to[e];
            if self.cap[e] > eps && level[v] == level[u] + 1 {
                let got = self.augment(v, t, limit.min(self.cap[e]), level, next, eps);
                if got > eps {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            next[u] += 1;
        }
        0.0
    }
}

/// Largest mass transportable from `mu` to `nu` along pairs at distance at most `radius`.
fn transport(mu: &AtomicMeasure, nu: &AtomicMeasure, dist: &DistanceTable, radius: f64, eps: f64) -> f64 {
    let (a, b) = (mu.atoms.len(), nu.atoms.len());
    let (s, t) = (a + b, a + b + 1);
    let mut net = FlowNet::new(a + b + 2);
    for (i, &(_, m)) in mu.atoms.iter().enumerate() {
        net.add_edge(s, i, m);
    }
    for (j, &(_, m)) in nu.atoms.iter().enumerate() {
        net.add_edge(a + j, t, m);
    }
    for (i, &(p, _)) in mu.atoms.iter().enumerate() {
        for (j, &(q, _)) in nu.atoms.iter().enumerate() {
            if dist.get(p, q) <= radius {
                net.add_edge(i, a + j, f64::INFINITY);
            }
        }
    }
    net.max_flow(s, t, eps)
}

/// Prohorov distance with open halos, exact up to the flow tolerance `tol`.
///
/// For radii in `(d_j, d_{j+1}]` between consecutive pair distances the halo
/// condition in both directions reduces to `max(|mu|, |nu|) - F_j <= eps`,
/// where `F_j` is the maximal transport along pairs at distance at most `d_j`.
pub fn prohorov_atomic(mu: &AtomicMeasure, nu: &AtomicMeasure, dist: &DistanceTable, tol: f64) -> f64 {
    let big = mu.total.max(nu.total);
    if big == 0.0 {
        return 0.0;
    }
    let mut radii: Vec<f64> = Vec::with_capacity(mu.atoms.len() * nu.atoms.len() + 1);
    radii.push(0.0);
    for &(p, _) in &mu.atoms {
        for &(q, _) in &nu.atoms {
            radii.push(dist.get(p, q));
        }
    }
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let eps = tol.max(1e-15) * big * 1e-3;
    let deficit = |j: usize| (big - transport(mu, nu, dist, radii[j], eps)).max(0.0);
    let upper = |j: usize| radii.get(j + 1).copied().unwrap_or(f64::INFINITY);
    let (mut lo, mut hi) = (0usize, radii.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if deficit(mid) <= upper(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    radii[lo].max(deficit(lo))
}

/// Point at absolute depth `depth` on the edge above `node`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreePoint {
    pub node: NodeId,
    pub depth: f64,
}

impl TreePoint {
    pub fn at_node(depths: &[f64], node: NodeId) -> Self {
        TreePoint { node, depth: depths[node] }
    }
}

pub type TreeMeasure = Vec<(TreePoint, f64)>;

/// Genuine leaves of `t`, each with mass `t.leaf_mass()`.
pub fn leaf_measure(t: &Tree) -> TreeMeasure {
    let depths = t.depths();
    t.leaves().into_iter().map(|v| (TreePoint::at_node(&depths, v), t.leaf_mass())).collect()
}

/// Lowest common ancestors by binary lifting.
#[derive(Debug, Clone)]
pub struct Lca {
    up: Vec<Vec<NodeId>>,
    generation: Vec<usize>,
    depths: Vec<f64>,
}

impl Lca {
    pub fn new(t: &Tree) -> Self {
        let n = t.len();
        let generation = t.generations();
        let mut up = vec![(0..n).map(|v| t.parent(v).unwrap_or(0)).collect::<Vec<_>>()];
        let max_gen = generation.iter().copied().max().unwrap_or(0);
        let mut span = 1;
        while span < max_gen {
            let prev = up.last().unwrap();
            let next: Vec<NodeId> = (0..n).map(|v| prev[prev[v]]).collect();
            up.push(next);
            span *= 2;
        }
        Lca { up, generation, depths: t.depths() }
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn lca(&self, mut a: NodeId, mut b: NodeId) -> NodeId {
        if self.generation[a] < self.generation[b] {
            std::mem::swap(&mut a, &mut b);
        }
        let mut diff = self.generation[a] - self.generation[b];
        let mut k = 0;
        while diff > 0 {
            if diff & 1 == 1 {
                a = self.up[k][a];
            }
            diff >>= 1;
            k += 1;
        }
        if a == b {
            return a;
        }
        for k in (0..self.up.len()).rev() {
            if self.up[k][a] != self.up[k][b] {
                a = self.up[k][a];
                b = self.up[k][b];
            }
        }
        self.up[0][a]
    }

    pub fn distance(&self, p: TreePoint, q: TreePoint) -> f64 {
        let c = self.lca(p.node, q.node);
        let meet = if p.node == q.node {
            p.depth.min(q.depth)
        } else if c == p.node {
            p.depth
        } else if c == q.node {
            q.depth
        } else {
            self.depths[c]
        };
        (p.depth - meet) + (q.depth - meet)
    }
}

fn point_key(p: TreePoint) -> (NodeId, u64) {
    (p.node, p.depth.to_bits())
}

/// Prohorov distance between two measures on points of the same tree.
pub fn prohorov_tree(lca: &Lca, mu: &TreeMeasure, nu: &TreeMeasure, tol: f64) -> f64 {
    let mut ids: HashMap<(NodeId, u64), usize> = HashMap::new();
    let mut points = Vec::new();
    let mut label = |p: TreePoint| {
        *ids.entry(point_key(p)).or_insert_with(|| {
            points.push(p);
            points.len() - 1
        })
    };
    let a: Vec<(usize, f64)> = mu.iter().map(|&(p, m)| (label(p), m)).collect();
    let b: Vec<(usize, f64)> = nu.iter().map(|&(p, m)| (label(p), m)).collect();
    let table = DistanceTable::from_fn(points.len(), |i, j| lca.distance(points[i], points[j]));
    let a = AtomicMeasure::new(a).expect("masses validated by caller");
    let b = AtomicMeasure::new(b).expect("masses validated by caller");
    prohorov_atomic(&a, &b, &table, tol)
}

fn check_measure(mu: &TreeMeasure, t: &Tree, mask: &SubtreeMask, depths: &[f64]) -> Result<()> {
    for &(p, m) in mu {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::Domain("measure masses must be finite and non-negative".into()));
        }
        if p.node >= t.len() {
            return Err(Error::Embedding(format!("point on unknown node {}", p.node)));
        }
        let lo = t.parent(p.node).map_or(0.0, |q| depths[q]);
        if p.depth < lo - 1e-12 || p.depth > depths[p.node] + 1e-12 || !mask.contains_point(t, depths, p.node, p.depth) {
            return Err(Error::Embedding(format!("measure point off the sub-tree at node {}", p.node)));
        }
    }
    Ok(())
}

/// Hausdorff distance between nested masks `inner` within `outer` on the arena `t`,
/// both restricted to depths at most `r`.
pub fn hausdorff_masks(t: &Tree, outer: &SubtreeMask, inner: &SubtreeMask, r: f64) -> Result<f64> {
    outer.validate(t)?;
    inner.validate(t)?;
    if !inner.is_within(outer) {
        return Err(Error::Embedding("inner mask is not contained in the outer one".into()));
    }
    let depths = t.depths();
    let mut down = vec![0.0; t.len()];
    for v in (1..t.len()).rev() {
        let below = if outer.is_full(t, v) { t.children(v).iter().map(|&c| down[c]).fold(0.0, f64::max) } else { 0.0 };
        down[v] = outer.retained(v) + below;
    }
    let mut worst: f64 = 0.0;
    for v in 1..t.len() {
        let p = t.parent(v).unwrap();
        if inner.retained(v) >= outer.retained(v) || !inner.is_full(t, p) {
            continue;
        }
        let attach = depths[p] + inner.retained(v);
        if attach >= r {
            continue;
        }
        let reach = (depths[p] + down[v]).min(r);
        worst = worst.max(reach - attach);
    }
    Ok(worst)
}

/// Hausdorff distance from `big` to its sub-tree `small`.
pub fn hausdorff_nested(big: &Tree, small: &SubtreeMask) -> Result<f64> {
    hausdorff_masks(big, &SubtreeMask::full(big), small, f64::INFINITY)
}

fn restrict_mask(t: &Tree, m: &SubtreeMask, depths: &[f64], r: f64) -> SubtreeMask {
    let retained = (0..t.len())
        .map(|v| match t.parent(v) {
            None => 0.0,
            Some(p) => m.retained(v).min((r - depths[p]).max(0.0)),
        })
        .collect();
    SubtreeMask::from_retained(t, retained).expect("restriction keeps validity")
}

fn restrict_measure(mu: &TreeMeasure, r: f64) -> TreeMeasure {
    mu.iter().copied().filter(|(p, _)| p.depth <= r).collect()
}

/// Identity-embedding upper bound on the rooted GHP distance between nested
/// masks, both restricted to depth `r`.
pub fn ghp_masks(
    t: &Tree,
    outer: &SubtreeMask,
    inner: &SubtreeMask,
    mu_outer: &TreeMeasure,
    mu_inner: &TreeMeasure,
    r: f64,
) -> Result<f64> {
    let lca = Lca::new(t);
    ghp_masks_with(t, &lca, outer, inner, mu_outer, mu_inner, r)
}

fn ghp_masks_with(
    t: &Tree,
    lca: &Lca,
    outer: &SubtreeMask,
    inner: &SubtreeMask,
    mu_outer: &TreeMeasure,
    mu_inner: &TreeMeasure,
    r: f64,
) -> Result<f64> {
    let depths = lca.depths();
    let (mu_outer, mu_inner) = (restrict_measure(mu_outer, r), restrict_measure(mu_inner, r));
    check_measure(&mu_outer, t, outer, depths)?;
    check_measure(&mu_inner, t, inner, depths)?;
    let h = hausdorff_masks(t, outer, inner, r)?;
    let p = prohorov_tree(lca, &mu_outer, &mu_inner, 1e-12);
    Ok(h + p)
}

/// Upper bound on the rooted GHP distance between `big` and its sub-tree `small`.
pub fn ghp_nested_upper(big: &Tree, small: &SubtreeMask, mu_big: &TreeMeasure, mu_small: &TreeMeasure) -> Result<f64> {
    ghp_masks(big, &SubtreeMask::full(big), small, mu_big, mu_small, f64::INFINITY)
}

/// Localized distance `int_0^inf e^{-r} min(1, d(r)) dr` on masks, by the
/// trapezoid rule on `[0, r_max]` plus the tail bound `e^{-r_max}`.
pub fn ghp_localized_masks(
    t: &Tree,
    outer: &SubtreeMask,
    inner: &SubtreeMask,
    mu_outer: &TreeMeasure,
    mu_inner: &TreeMeasure,
    r_max: f64,
    grid_n: usize,
) -> Result<f64> {
    if !(r_max > 0.0) || grid_n < 2 {
        return Err(Error::Domain("localized distance needs r_max > 0 and at least two grid points".into()));
    }
    let lca = Lca::new(t);
    let depths = lca.depths().to_vec();
    let step = r_max / (grid_n - 1) as f64;
    let mut total = 0.0;
    for i in 0..grid_n {
        let r = step * i as f64;
        let o = restrict_mask(t, outer, &depths, r);
        let n = restrict_mask(t, inner, &depths, r);
        let d = ghp_masks_with(t, &lca, &o, &n, mu_outer, mu_inner, r)?;
        let w = if i == 0 || i == grid_n - 1 { 0.5 } else { 1.0 };
        total += w * step * (-r).exp() * d.min(1.0);
    }
    Ok((total + (-r_max).exp()).min(1.0))
}

pub fn ghp_localized(
    big: &Tree,
    small: &SubtreeMask,
    mu_big: &TreeMeasure,
    mu_small: &TreeMeasure,
    r_max: f64,
    grid_n: usize,
) -> Result<f64> {
    ghp_localized_masks(big, &SubtreeMask::full(big), small, mu_big, mu_small, r_max, grid_n)
}

/// Mask of the sub-tree spanned by the root and `points`.
pub fn span_mask(t: &Tree, nodes: &[NodeId]) -> SubtreeMask {
    let mut keep = vec![0.0; t.len()];
    for &v in nodes {
        let mut u = v;
        while u != 0 && keep[u] == 0.0 {
            keep[u] = t.edge_length(u);
            u = t.parent(u).unwrap();
        }
    }
    SubtreeMask::from_retained(t, keep).expect("spanned mask is valid")
}

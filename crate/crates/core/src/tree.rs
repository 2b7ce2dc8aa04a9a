//! Finite rooted real trees stored as index arenas.
//!
//! Node 0 is the root and every parent index is smaller than its children's,
//! so a forward pass over the arena visits parents before children.

pub mod newick;

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<NodeId>,
    /// Length of the edge to the parent; zero on the root.
    pub edge_length: f64,
    pub children: Vec<NodeId>,
    /// Leaf created by cutting at a restriction level; carries no mass.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    leaf_mass: f64,
}

/// Where a tree is grafted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Node(NodeId),
    /// Interior point of the edge above `child`, `offset` away from the parent end.
    Edge { child: NodeId, offset: f64 },
}

impl Default for Tree {
    fn default() -> Self {
        Self::new()
    }
}

impl Tree {
    /// A bare root.
    pub fn new() -> Self {
        Tree { nodes: vec![Node { parent: None, edge_length: 0.0, children: Vec::new(), truncated: false }], leaf_mass: 0.0 }
    }

    /// Root followed by a single edge of the given length.
    pub fn segment(length: f64) -> Self {
        let mut t = Tree::new();
        t.add_child(0, length);
        t
    }

    pub fn add_child(&mut self, parent: NodeId, length: f64) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { parent: Some(parent), edge_length: length, children: Vec::new(), truncated: false });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn mark_truncated(&mut self, id: NodeId) {
        self.nodes[id].truncated = true;
    }

    pub(crate) fn set_edge_length(&mut self, id: NodeId, length: f64) {
        self.nodes[id].edge_length = length;
    }

    pub fn set_leaf_mass(&mut self, mass: f64) {
        self.leaf_mass = mass;
    }

    pub fn with_leaf_mass(mut self, mass: f64) -> Self {
        self.leaf_mass = mass;
        self
    }

    pub fn leaf_mass(&self) -> f64 {
        self.leaf_mass
    }

    pub const fn root(&self) -> NodeId {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn edge_length(&self, id: NodeId) -> f64 {
        self.nodes[id].edge_length
    }

    /// Childless non-root node that is not a truncation point.
    pub fn is_leaf(&self, id: NodeId) -> bool {
        id != 0 && self.nodes[id].children.is_empty() && !self.nodes[id].truncated
    }

    pub fn is_tip(&self, id: NodeId) -> bool {
        id != 0 && self.nodes[id].children.is_empty()
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        (1..self.nodes.len()).filter(|&i| self.is_leaf(i)).collect()
    }

    /// Number of genuine leaves.
    pub fn leaf_count(&self) -> usize {
        (1..self.nodes.len()).filter(|&i| self.is_leaf(i)).count()
    }

    /// Number of childless non-root nodes, truncation points included.
    pub fn tip_count(&self) -> usize {
        (1..self.nodes.len()).filter(|&i| self.is_tip(i)).count()
    }

    /// Non-root nodes with at least two children.
    pub fn branch_nodes(&self) -> Vec<NodeId> {
        (1..self.nodes.len()).filter(|&i| self.nodes[i].children.len() >= 2).collect()
    }

    /// Distance from the root to every node.
    pub fn depths(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nodes.len()];
        for i in 1..self.nodes.len() {
            let n = &self.nodes[i];
            d[i] = d[n.parent.expect("non-root node has a parent")] + n.edge_length;
        }
        d
    }

    /// Number of edges between the root and every node.
    pub fn generations(&self) -> Vec<usize> {
        let mut g = vec![0; self.nodes.len()];
        for i in 1..self.nodes.len() {
            g[i] = g[self.nodes[i].parent.unwrap()] + 1;
        }
        g
    }

    /// Largest distance from each node to one of its descendants.
    pub fn heights_below(&self) -> Vec<f64> {
        let mut h = vec![0.0_f64; self.nodes.len()];
        for i in (1..self.nodes.len()).rev() {
            let p = self.nodes[i].parent.unwrap();
            let v = h[i] + self.nodes[i].edge_length;
            if v > h[p] {
                h[p] = v;
            }
        }
        h
    }

    pub fn height(&self) -> f64 {
        self.depths().into_iter().fold(0.0, f64::max)
    }

    pub fn total_length(&self) -> f64 {
        self.nodes.iter().map(|n| n.edge_length).sum()
    }

    /// Number of points at distance exactly `a` from the root.
    pub fn leaves_at_level(&self, a: f64) -> usize {
        if a == 0.0 {
            return 1;
        }
        let d = self.depths();
        (1..self.nodes.len())
            .filter(|&i| {
                let p = self.nodes[i].parent.unwrap();
                d[p] < a && a <= d[i]
            })
            .count()
    }

    /// The sub-tree of points at distance at most `a` from the root.
    pub fn restrict(&self, a: f64) -> Tree {
        let d = self.depths();
        let mut out = Tree::new().with_leaf_mass(self.leaf_mass);
        let mut stack = vec![(0usize, 0usize)];
        while let Some((old, new)) = stack.pop() {
            let mut kept = 0;
            for &c in self.nodes[old].children.iter().rev() {
                if d[c] <= a {
                    let id = out.add_child(new, self.nodes[c].edge_length);
                    out.nodes[id].truncated = self.nodes[c].truncated;
                    stack.push((c, id));
                    kept += 1;
                } else if d[old] < a {
                    let id = out.add_child(new, a - d[old]);
                    out.nodes[id].truncated = true;
                    kept += 1;
                }
            }
            if kept == 0 && !self.nodes[old].children.is_empty() && new != 0 {
                out.nodes[new].truncated = true;
            }
        }
        out.reindexed()
    }

    /// Graft each tree at its position. Unary nodes created at former leaves are contracted.
    pub fn graft(&self, attachments: &[(Position, &Tree)]) -> Result<Tree> {
        if attachments.is_empty() {
            return Ok(self.clone());
        }
        let mut work = self.clone();
        let mut targets = Vec::with_capacity(attachments.len());
        // Edge positions grouped per edge, split from the bottom up.
        let mut splits: Vec<(NodeId, f64, usize)> = Vec::new();
        for (i, (pos, _)) in attachments.iter().enumerate() {
            match *pos {
                Position::Node(id) => {
                    if id >= self.len() {
                        return Err(Error::Position(format!("node {id} does not exist")));
                    }
                    targets.push(Some(id));
                }
                Position::Edge { child, offset } => {
                    if child == 0 || child >= self.len() {
                        return Err(Error::Position(format!("edge above {child} does not exist")));
                    }
                    let l = self.nodes[child].edge_length;
                    if !(offset > 0.0 && offset < l) {
                        return Err(Error::Position(format!("offset {offset} outside (0, {l})")));
                    }
                    targets.push(None);
                    splits.push((child, offset, i));
                }
            }
        }
        splits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
        let mut k = 0;
        while k < splits.len() {
            let child = splits[k].0;
            let mut lower = child;
            let mut lower_offset = self.nodes[child].edge_length;
            while k < splits.len() && splits[k].0 == child {
                let (_, offset, idx) = splits[k];
                if offset < lower_offset {
                    lower = work.split_edge(lower, lower_offset - offset);
                    lower_offset = offset;
                }
                targets[idx] = Some(lower);
                k += 1;
            }
        }
        for (i, (_, g)) in attachments.iter().enumerate() {
            work.attach_copy(targets[i].unwrap(), g);
        }
        Ok(work.contract_unary(|_| false).0)
    }

    /// Insert a node on the edge above `child` at distance `below` above `child`; returns it.
    fn split_edge(&mut self, child: NodeId, below: f64) -> NodeId {
        let parent = self.nodes[child].parent.unwrap();
        let upper = self.nodes[child].edge_length - below;
        let mid = self.nodes.len();
        self.nodes.push(Node { parent: Some(parent), edge_length: upper, children: vec![child], truncated: false });
        for c in self.nodes[parent].children.iter_mut() {
            if *c == child {
                *c = mid;
            }
        }
        self.nodes[child].parent = Some(mid);
        self.nodes[child].edge_length = below;
        mid
    }

    /// Copy the children of `g`'s root below `at`. May break index ordering.
    pub(crate) fn attach_copy(&mut self, at: NodeId, g: &Tree) {
        let mut stack: Vec<(NodeId, NodeId)> = g.nodes[0].children.iter().rev().map(|&c| (c, at)).collect();
        while let Some((old, parent)) = stack.pop() {
            let id = self.add_child(parent, g.nodes[old].edge_length);
            self.nodes[id].truncated = g.nodes[old].truncated;
            for &c in g.nodes[old].children.iter().rev() {
                stack.push((c, id));
            }
        }
    }

    /// Minimal sub-tree spanning the root and the given tips, unary nodes contracted.
    pub fn span(&self, marked: &[NodeId]) -> Result<Tree> {
        if marked.is_empty() {
            return Err(Error::EmptySpan);
        }
        let mut keep = vec![false; self.len()];
        for &m in marked {
            if m >= self.len() || !self.is_tip(m) {
                return Err(Error::Position(format!("node {m} is not a leaf")));
            }
            let mut v = m;
            while !keep[v] {
                keep[v] = true;
                match self.nodes[v].parent {
                    Some(p) => v = p,
                    None => break,
                }
            }
        }
        let filtered = self.filtered(&keep);
        Ok(filtered.contract_unary(|_| false).0)
    }

    /// Copy of the nodes flagged in `keep` (which must be closed under taking parents).
    fn filtered(&self, keep: &[bool]) -> Tree {
        let mut map = vec![usize::MAX; self.len()];
        let mut out = Tree::new().with_leaf_mass(self.leaf_mass);
        map[0] = 0;
        for i in 1..self.len() {
            if keep[i] {
                let p = map[self.nodes[i].parent.unwrap()];
                let id = out.add_child(p, self.nodes[i].edge_length);
                out.nodes[id].truncated = self.nodes[i].truncated;
                map[i] = id;
            }
        }
        out
    }

    /// Merge every non-root node with exactly one child into its child, unless
    /// `pin` holds for it, and renumber in depth-first order.
    ///
    /// The returned map sends each old node to the new node whose parent edge
    /// contains it.
    pub fn contract_unary<P: Fn(NodeId) -> bool>(&self, pin: P) -> (Tree, Vec<NodeId>) {
        let mut out = Tree::new().with_leaf_mass(self.leaf_mass);
        let mut map = vec![0; self.len()];
        let mut stack: Vec<(NodeId, NodeId)> = self.nodes[0].children.iter().rev().map(|&c| (c, 0)).collect();
        let mut pending = Vec::new();
        while let Some((first, new_parent)) = stack.pop() {
            let mut v = first;
            let mut length = self.nodes[v].edge_length;
            pending.clear();
            while self.nodes[v].children.len() == 1 && !pin(v) {
                pending.push(v);
                v = self.nodes[v].children[0];
                length += self.nodes[v].edge_length;
            }
            let id = out.add_child(new_parent, length);
            out.nodes[id].truncated = self.nodes[v].truncated;
            for &p in &pending {
                map[p] = id;
            }
            map[v] = id;
            for &c in self.nodes[v].children.iter().rev() {
                stack.push((c, id));
            }
        }
        (out, map)
    }

    /// Copy renumbered in depth-first order.
    pub fn reindexed(&self) -> Tree {
        self.contract_unary(|_| true).0
    }

    /// Structural check of the arena invariants.
    pub fn validate(&self) -> Result<()> {
        if self.nodes[0].parent.is_some() {
            return Err(Error::Position("root has a parent".into()));
        }
        for (i, n) in self.nodes.iter().enumerate().skip(1) {
            let p = n.parent.ok_or_else(|| Error::Position(format!("node {i} has no parent")))?;
            if p >= i {
                return Err(Error::Position(format!("node {i} precedes its parent")));
            }
            if !self.nodes[p].children.contains(&i) {
                return Err(Error::Position(format!("node {i} missing from its parent's children")));
            }
            if !(n.edge_length > 0.0) {
                return Err(Error::Position(format!("node {i} has non-positive edge length")));
            }
            if n.children.len() == 1 {
                return Err(Error::Position(format!("node {i} is unary")));
            }
        }
        Ok(())
    }

    /// Compare two trees up to child order, lengths within `tol`.
    pub fn isometric(&self, other: &Tree, tol: f64) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let ha = self.heights_below();
        let hb = other.heights_below();
        let key = |t: &Tree, h: &[f64], c: NodeId| (h[c] + t.nodes[c].edge_length, t.nodes[c].edge_length);
        let mut stack = vec![(0usize, 0usize)];
        while let Some((a, b)) = stack.pop() {
            let na = &self.nodes[a];
            let nb = &other.nodes[b];
            if na.children.len() != nb.children.len() || (na.children.is_empty() && na.truncated != nb.truncated) {
                return false;
            }
            if (na.edge_length - nb.edge_length).abs() > tol * (1.0 + na.edge_length.abs()) {
                return false;
            }
            let mut ca = na.children.clone();
            let mut cb = nb.children.clone();
            ca.sort_by(|&x, &y| key(self, &ha, x).partial_cmp(&key(self, &ha, y)).unwrap());
            cb.sort_by(|&x, &y| key(other, &hb, x).partial_cmp(&key(other, &hb, y)).unwrap());
            stack.extend(ca.into_iter().zip(cb));
        }
        true
    }
}

/// A sub-tree of a fixed tree sharing its arena: for every edge, the length
/// retained from its parent end.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtreeMask {
    retained: Vec<f64>,
}

impl SubtreeMask {
    pub fn full(t: &Tree) -> Self {
        SubtreeMask { retained: t.nodes.iter().map(|n| n.edge_length).collect() }
    }

    pub fn empty(t: &Tree) -> Self {
        SubtreeMask { retained: vec![0.0; t.len()] }
    }

    /// Build and validate a mask from per-edge retained lengths.
    pub fn from_retained(t: &Tree, retained: Vec<f64>) -> Result<Self> {
        let m = SubtreeMask { retained };
        m.validate(t)?;
        Ok(m)
    }

    pub fn validate(&self, t: &Tree) -> Result<()> {
        if self.retained.len() != t.len() {
            return Err(Error::Embedding("mask size differs from tree size".into()));
        }
        for i in 1..t.len() {
            let r = self.retained[i];
            let l = t.nodes[i].edge_length;
            if !(0.0..=l).contains(&r) {
                return Err(Error::Embedding(format!("edge {i} retains {r} of {l}")));
            }
            if r > 0.0 {
                let p = t.nodes[i].parent.unwrap();
                if p != 0 && !self.is_full(t, p) {
                    return Err(Error::Embedding(format!("edge {i} kept below a cut edge")));
                }
            }
        }
        Ok(())
    }

    pub fn retained(&self, id: NodeId) -> f64 {
        self.retained[id]
    }

    pub fn retained_lengths(&self) -> &[f64] {
        &self.retained
    }

    /// Whether the whole edge above `id` (and so the node `id`) is kept.
    pub fn is_full(&self, t: &Tree, id: NodeId) -> bool {
        id == 0 || (self.retained[id] > 0.0 && self.retained[id] == t.nodes[id].edge_length)
    }

    /// Whether the point at height `h` on the edge above `node` is kept.
    pub fn contains_point(&self, t: &Tree, depths: &[f64], node: NodeId, h: f64) -> bool {
        if node == 0 {
            return true;
        }
        let p = t.nodes[node].parent.unwrap();
        h <= depths[p] + self.retained[node] && self.retained[node] > 0.0
    }

    /// Whether this mask is contained in `other`.
    pub fn is_within(&self, other: &SubtreeMask) -> bool {
        self.retained.len() == other.retained.len() && self.retained.iter().zip(&other.retained).all(|(a, b)| a <= b)
    }

    pub fn total_length(&self) -> f64 {
        self.retained.iter().sum()
    }

    /// Extract the masked tree. Cut points become leaves; they are flagged as
    /// truncated when `cuts_truncated` holds.
    pub fn materialize(&self, t: &Tree, cuts_truncated: bool) -> (Tree, Vec<Option<NodeId>>) {
        let mut out = Tree::new().with_leaf_mass(t.leaf_mass);
        let mut map = vec![None; t.len()];
        map[0] = Some(0);
        for i in 1..t.len() {
            let r = self.retained[i];
            if r <= 0.0 {
                continue;
            }
            let p = map[t.nodes[i].parent.unwrap()].expect("parent retained");
            let id = out.add_child(p, r);
            map[i] = Some(id);
            let full = r == t.nodes[i].edge_length;
            out.nodes[id].truncated = if full { t.nodes[i].truncated } else { cuts_truncated };
        }
        for i in 1..t.len() {
            if let Some(id) = map[i] {
                if out.nodes[id].children.is_empty() && !t.nodes[i].children.is_empty() {
                    out.nodes[id].truncated = cuts_truncated;
                }
            }
        }
        (out, map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Root, edge of length `split` to a node with two leaf children of the given lengths.
    pub(crate) fn cherry(split: f64, a: f64, b: f64) -> Tree {
        let mut t = Tree::new();
        let n = t.add_child(0, split);
        t.add_child(n, a);
        t.add_child(n, b);
        t
    }

    #[test]
    fn leaf_count_examples() {
        assert_eq!(Tree::new().leaf_count(), 0);
        assert_eq!(Tree::segment(1.0).leaf_count(), 1);
        assert_eq!(cherry(1.0, 1.0, 1.0).leaf_count(), 2);
    }

    #[test]
    fn level_counts() {
        assert_eq!(Tree::segment(2.0).leaves_at_level(1.0), 1);
        assert_eq!(Tree::segment(2.0).leaves_at_level(3.0), 0);
        assert_eq!(cherry(1.0, 1.0, 1.0).leaves_at_level(1.5), 2);
        assert_eq!(cherry(1.0, 1.0, 1.0).leaves_at_level(1.0), 1);
    }

    #[test]
    fn restrict_examples() {
        assert_eq!(Tree::segment(2.0).restrict(3.0), Tree::segment(2.0));
        let r = Tree::segment(2.0).restrict(1.0);
        assert_eq!(r.edge_length(1), 1.0);
        assert!(r.node(1).truncated);
        assert_eq!(r.leaf_count(), 0);
        let r = cherry(1.0, 1.0, 2.0).restrict(2.5);
        assert_eq!(r.height(), 2.5);
        assert_eq!(r.leaf_count(), 1);
        assert_eq!(r.tip_count(), 2);
        assert_eq!(r.total_length(), 1.0 + 1.0 + 1.5);
    }

    #[test]
    fn restrict_at_branch_level_flags_the_node() {
        let r = cherry(1.0, 1.0, 2.0).restrict(1.0);
        assert_eq!(r.len(), 2);
        assert!(r.node(1).truncated);
    }

    #[test]
    fn graft_examples() {
        let t = cherry(1.0, 1.0, 2.0);
        assert_eq!(t.graft(&[]).unwrap(), t);
        let e = Tree::segment(1.0);
        let g = t.graft(&[(Position::Node(2), &e)]).unwrap();
        assert!(g.height() <= t.height() + 1.0);
        assert_eq!(g.leaf_count(), 2);
        let g = t.graft(&[(Position::Node(2), &e), (Position::Node(3), &e)]).unwrap();
        assert_eq!(g.leaf_count(), 2);
        assert_eq!(g.total_length(), t.total_length() + 2.0);
        g.validate().unwrap();
    }

    #[test]
    fn graft_on_edges() {
        let t = Tree::segment(3.0);
        let e = Tree::segment(1.0);
        let g = t
            .graft(&[(Position::Edge { child: 1, offset: 1.0 }, &e), (Position::Edge { child: 1, offset: 2.0 }, &e)])
            .unwrap();
        g.validate().unwrap();
        assert_eq!(g.leaf_count(), 3);
        assert_eq!(g.total_length(), 5.0);
        assert_eq!(g.leaves_at_level(1.5), 2);
        assert_eq!(g.leaves_at_level(2.5), 2);
        assert_eq!(g.leaves_at_level(2.0), 2);
        assert!(t.graft(&[(Position::Edge { child: 1, offset: 3.0 }, &e)]).is_err());
        assert!(t.graft(&[(Position::Node(9), &e)]).is_err());
    }

    #[test]
    fn span_examples() {
        let t = cherry(1.0, 1.0, 1.5);
        assert!(t.span(&t.leaves()).unwrap().isometric(&t, 0.0));
        let s = t.span(&[3]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.edge_length(1), 2.5);
        assert_eq!(t.span(&[]), Err(Error::EmptySpan));
    }

    #[test]
    fn mask_materializes_cuts() {
        let t = cherry(1.0, 1.0, 2.0);
        let m = SubtreeMask::from_retained(&t, vec![0.0, 1.0, 0.4, 2.0]).unwrap();
        let (s, map) = m.materialize(&t, false);
        assert_eq!(s.leaf_count(), 2);
        assert!((s.total_length() - 3.4).abs() < 1e-15);
        assert!(map[2].is_some());
        assert!(SubtreeMask::from_retained(&t, vec![0.0, 0.5, 0.4, 2.0]).is_err());
    }
}

//! Undirected tree view used for likelihood computation and tree search.

use crate::error::{Error, Result};
use crate::phylo::tree::{Node, Tree};

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub ends: [usize; 2],
    pub length: f64,
}

impl Edge {
    pub fn other(&self, node: usize) -> usize {
        if self.ends[0] == node {
            self.ends[1]
        } else {
            self.ends[0]
        }
    }
}

/// An unrooted tree stored as an adjacency list. Leaves are the labeled
/// degree-one nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct UTree {
    labels: Vec<Option<String>>,
    adj: Vec<Vec<(usize, usize)>>,
    edges: Vec<Edge>,
}

impl UTree {
    pub fn with_nodes(labels: Vec<Option<String>>) -> Self {
        let n = labels.len();
        UTree {
            labels,
            adj: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    pub fn add_node(&mut self, label: Option<String>) -> usize {
        self.labels.push(label);
        self.adj.push(Vec::new());
        self.labels.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize, length: f64) -> usize {
        let e = self.edges.len();
        self.edges.push(Edge { ends: [a, b], length });
        self.adj[a].push((b, e));
        self.adj[b].push((a, e));
        e
    }

    /// Converts a rooted tree, keeping every node (including a degree-two
    /// root). Branches without a length take `default_length`, or fail when
    /// none is given.
    pub fn from_tree(tree: &Tree, default_length: Option<f64>) -> Result<Self> {
        let mut u = UTree::with_nodes(tree.nodes().iter().map(|n| n.label.clone()).collect());
        for id in tree.preorder() {
            let node = tree.node(id);
            if let Some(parent) = node.parent {
                let len = node.length.or(default_length).ok_or_else(|| {
                    Error::Validation("tree has branches without lengths".into())
                })?;
                u.add_edge(parent, id, len);
            }
        }
        Ok(u)
    }

    /// Removes unlabeled degree-two nodes by joining their two branches.
    pub fn suppress_degree_two(&self) -> UTree {
        let mut keep: Vec<bool> = (0..self.labels.len())
            .map(|n| !(self.adj[n].len() == 2 && self.labels[n].is_none()))
            .collect();
        if keep.iter().all(|k| !k) {
            keep[0] = true;
        }
        let mut map = vec![usize::MAX; self.labels.len()];
        let mut out = UTree::with_nodes(Vec::new());
        for n in 0..self.labels.len() {
            if keep[n] {
                map[n] = out.add_node(self.labels[n].clone());
            }
        }
        let mut done = vec![false; self.edges.len()];
        for e in 0..self.edges.len() {
            if done[e] {
                continue;
            }
            let [a, b] = self.edges[e].ends;
            if !keep[a] && !keep[b] && self.edges.len() > 1 {
                // Interior of a chain; handled from its kept ends.
                continue;
            }
            let start = if keep[a] { a } else { b };
            // Walk from `start` through suppressed nodes.
            let mut prev = start;
            let mut edge = e;
            let mut total = 0.0;
            loop {
                done[edge] = true;
                total += self.edges[edge].length;
                let next = self.edges[edge].other(prev);
                if keep[next] {
                    if next != start || self.edges.len() == 1 {
                        out.add_edge(map[start], map[next], total);
                    }
                    break;
                }
                let &(_, onward) = self.adj[next]
                    .iter()
                    .find(|&&(_, f)| f != edge)
                    .expect("degree-two node");
                prev = next;
                edge = onward;
            }
        }
        out
    }

    /// Splits edge `e` with a new internal node and hangs a new leaf from
    /// it. Returns the new leaf.
    pub fn insert_leaf_on_edge(&mut self, e: usize, label: String, length: f64) -> usize {
        let [x, y] = self.edges[e].ends;
        let half = self.edges[e].length / 2.0;
        let mid = self.add_node(None);
        // Re-point e to end at `mid` instead of `y`.
        self.edges[e].ends = [x, mid];
        self.edges[e].length = half;
        self.adj[y].retain(|&(_, f)| f != e);
        self.adj[mid].push((x, e));
        for entry in self.adj[x].iter_mut() {
            if entry.1 == e {
                entry.0 = mid;
            }
        }
        self.add_edge(mid, y, half);
        let leaf = self.add_node(Some(label));
        self.add_edge(mid, leaf, length);
        leaf
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn set_length(&mut self, e: usize, length: f64) {
        self.edges[e].length = length;
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adj[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn label(&self, node: usize) -> Option<&str> {
        self.labels[node].as_deref()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.adj[node].len() <= 1
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&n| self.is_leaf(n)).collect()
    }

    pub fn find_label(&self, label: &str) -> Option<usize> {
        (0..self.labels.len()).find(|&n| self.is_leaf(n) && self.labels[n].as_deref() == Some(label))
    }

    /// Edges whose both ends are internal.
    pub fn internal_edges(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| {
                let [a, b] = self.edges[e].ends;
                !self.is_leaf(a) && !self.is_leaf(b)
            })
            .collect()
    }

    /// Edges in depth-first order starting from `start`, so consecutive
    /// edges are usually adjacent.
    pub fn edges_dfs(&self, start: usize) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.edges.len());
        let mut stack = vec![(start, usize::MAX)];
        while let Some((node, via)) = stack.pop() {
            if via != usize::MAX {
                order.push(via);
            }
            for &(next, e) in self.adj[node].iter().rev() {
                if e != via {
                    stack.push((next, e));
                }
            }
        }
        order
    }

    /// Swaps the subtree hanging from `edge_a` with the one hanging from
    /// `edge_b`. Both must touch the two ends of one internal edge, one on
    /// each side, and neither may be that internal edge. Calling it again with
    /// the same arguments undoes the swap. Returns the internal edge.
    pub fn swap_subtrees(&mut self, edge_a: usize, edge_b: usize) -> usize {
        let center = self
            .shared_center(edge_a, edge_b)
            .expect("edges must be on opposite ends of an internal edge");
        let [u, v] = self.edges[center].ends;
        let (ua, vb) = if self.edges[edge_a].ends.contains(&u) {
            (edge_a, edge_b)
        } else {
            (edge_b, edge_a)
        };
        let a = self.edges[ua].other(u);
        let b = self.edges[vb].other(v);
        self.reattach(ua, u, v, a);
        self.reattach(vb, v, u, b);
        center
    }

    fn reattach(&mut self, e: usize, from: usize, to: usize, far: usize) {
        let ends = &mut self.edges[e].ends;
        for end in ends.iter_mut() {
            if *end == from {
                *end = to;
            }
        }
        self.adj[from].retain(|&(_, f)| f != e);
        self.adj[to].push((far, e));
        for entry in self.adj[far].iter_mut() {
            if entry.1 == e {
                entry.0 = to;
            }
        }
    }

    fn shared_center(&self, edge_a: usize, edge_b: usize) -> Option<usize> {
        let ea = &self.edges[edge_a].ends;
        let eb = &self.edges[edge_b].ends;
        for &x in ea {
            for &(y, c) in &self.adj[x] {
                if c != edge_a && c != edge_b && eb.contains(&y) && !ea.contains(&y) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// The two nearest-neighbor interchanges around an internal edge, given
    /// as pairs of edges to pass to [`UTree::swap_subtrees`].
    pub fn nni_moves(&self, center: usize) -> Vec<(usize, usize)> {
        let [u, v] = self.edges[center].ends;
        let side = |n: usize| -> Vec<usize> {
            self.adj[n].iter().filter(|&&(_, e)| e != center).map(|&(_, e)| e).collect()
        };
        let (su, sv) = (side(u), side(v));
        if su.len() != 2 || sv.len() != 2 {
            return Vec::new();
        }
        vec![(su[1], sv[0]), (su[1], sv[1])]
    }

    /// The four edges touching an internal edge.
    pub fn adjacent_edges(&self, center: usize) -> Vec<usize> {
        let [u, v] = self.edges[center].ends;
        self.adj[u]
            .iter()
            .chain(&self.adj[v])
            .map(|&(_, e)| e)
            .filter(|&e| e != center)
            .collect()
    }

    /// Roots the tree at `root` (usually an internal node).
    pub fn to_tree(&self, root: usize) -> Tree {
        let mut nodes: Vec<Node> = Vec::with_capacity(self.labels.len());
        let mut map = vec![usize::MAX; self.labels.len()];
        let mut stack = vec![(root, usize::MAX, None::<usize>)];
        while let Some((n, via, parent)) = stack.pop() {
            let id = nodes.len();
            map[n] = id;
            nodes.push(Node {
                label: self.labels[n].clone(),
                length: (via != usize::MAX).then(|| self.edges[via].length),
                parent,
                children: Vec::new(),
            });
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            for &(next, e) in self.adj[n].iter().rev() {
                if e != via {
                    stack.push((next, e, Some(id)));
                }
            }
        }
        // Children were pushed in reverse adjacency order by the stack; restore it.
        for node in &mut nodes {
            node.children.sort_unstable();
        }
        let rooted = self.adj[root].len() == 2;
        Tree::from_nodes(nodes, rooted).expect("connected tree")
    }

    /// Canonical form for output: rooted at the neighbor of the leaf with
    /// the smallest label, children ordered by their smallest leaf label.
    pub fn to_tree_canonical(&self) -> Tree {
        let leaf = self
            .leaves()
            .into_iter()
            .min_by(|&a, &b| self.labels[a].cmp(&self.labels[b]));
        let mut tree = match leaf {
            Some(l) if !self.adj[l].is_empty() => self.to_tree(self.adj[l][0].0),
            _ => self.to_tree(0),
        };
        tree.sort_children_by_label();
        tree
    }
}

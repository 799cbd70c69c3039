//! Felsenstein pruning for the binary model with discrete Gamma rates.
//!
//! Characters are compressed into unique site patterns. The engine keeps one
//! conditional-likelihood message per directed edge and recomputes messages
//! lazily, so optimizing one branch at a time only touches the messages that
//! actually depend on it.

use std::collections::HashMap;

use crate::encode::{BinaryMatrix, Cell};
use crate::error::{Error, Result};
use crate::phylo::model::{BinaryCtmc, GammaRates};
use crate::phylo::tree::Tree;
use crate::phylo::utree::UTree;

pub const MIN_BRANCH: f64 = 1e-8;
pub const MAX_BRANCH: f64 = 20.0;

const MISSING: u8 = 2;

/// Unique columns of a binary matrix with their multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct SitePatterns {
    taxa: Vec<String>,
    /// Taxon-major: `states[taxon * n_patterns + pattern]`, 2 = missing.
    states: Vec<u8>,
    weights: Vec<f64>,
    n_patterns: usize,
    /// When set, the last two patterns are the all-absent and all-present
    /// columns (weight zero) used to condition on variable characters.
    conditioned: bool,
}

impl SitePatterns {
    pub fn from_matrix(matrix: &BinaryMatrix, conditioned: bool) -> Self {
        let columns: Vec<Vec<Cell>> = (0..matrix.n_chars())
            .map(|c| (0..matrix.n_taxa()).map(|t| matrix.cell(t, c)).collect())
            .collect();
        Self::from_columns(matrix.taxa().to_vec(), &columns, conditioned)
    }

    /// Builds patterns from raw columns (one cell per taxon). Unlike a
    /// [`BinaryMatrix`], columns may be entirely missing.
    pub fn from_columns(taxa: Vec<String>, raw: &[Vec<Cell>], conditioned: bool) -> Self {
        let n_taxa = taxa.len();
        let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut columns: Vec<Vec<u8>> = Vec::new();
        let mut weights = Vec::new();
        for column in raw {
            assert_eq!(column.len(), n_taxa, "one cell per taxon");
            let col: Vec<u8> = column
                .iter()
                .map(|c| match c {
                    Cell::Absent => 0,
                    Cell::Present => 1,
                    Cell::Missing => MISSING,
                })
                .collect();
            match index.get(&col) {
                Some(&i) => weights[i] += 1.0,
                None => {
                    index.insert(col.clone(), columns.len());
                    columns.push(col);
                    weights.push(1.0);
                }
            }
        }
        if conditioned {
            for state in [0u8, 1u8] {
                columns.push(vec![state; n_taxa]);
                weights.push(0.0);
            }
        }
        let n_patterns = columns.len();
        let mut states = vec![MISSING; n_taxa * n_patterns];
        for (p, col) in columns.iter().enumerate() {
            for (t, &s) in col.iter().enumerate() {
                states[t * n_patterns + p] = s;
            }
        }
        SitePatterns {
            taxa,
            states,
            weights,
            n_patterns,
            conditioned,
        }
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn n_patterns(&self) -> usize {
        self.n_patterns
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of characters represented.
    pub fn n_characters(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn state(&self, taxon: usize, pattern: usize) -> u8 {
        self.states[taxon * self.n_patterns + pattern]
    }

    pub fn is_conditioned(&self) -> bool {
        self.conditioned
    }
}

/// Mutable likelihood state for one tree, one data set and one model.
#[derive(Debug, Clone)]
pub struct LikelihoodEngine<'d> {
    data: &'d SitePatterns,
    tree: UTree,
    model: BinaryCtmc,
    gamma: GammaRates,
    node_row: Vec<Option<usize>>,
    messages: Vec<Vec<f64>>,
    valid: Vec<bool>,
}

impl<'d> LikelihoodEngine<'d> {
    pub fn new(tree: UTree, data: &'d SitePatterns, model: BinaryCtmc, gamma: GammaRates) -> Result<Self> {
        let node_row = Self::map_rows(&tree, data)?;
        if tree.edges().is_empty() {
            return Err(Error::Validation("likelihood needs a tree with at least one branch".into()));
        }
        let n_dir = tree.edges().len() * 2;
        Ok(LikelihoodEngine {
            data,
            tree,
            model,
            gamma,
            node_row,
            messages: vec![Vec::new(); n_dir],
            valid: vec![false; n_dir],
        })
    }

    fn map_rows(tree: &UTree, data: &SitePatterns) -> Result<Vec<Option<usize>>> {
        let mut rows = vec![None; tree.n_nodes()];
        for (i, taxon) in data.taxa.iter().enumerate() {
            let node = tree
                .find_label(taxon)
                .ok_or_else(|| Error::UnknownTaxon(format!("{taxon} is not in the tree")))?;
            rows[node] = Some(i);
        }
        Ok(rows)
    }

    pub fn tree(&self) -> &UTree {
        &self.tree
    }

    pub fn model(&self) -> &BinaryCtmc {
        &self.model
    }

    pub fn gamma(&self) -> &GammaRates {
        &self.gamma
    }

    pub fn data(&self) -> &SitePatterns {
        self.data
    }

    pub fn set_tree(&mut self, tree: UTree) -> Result<()> {
        self.node_row = Self::map_rows(&tree, self.data)?;
        let n_dir = tree.edges().len() * 2;
        self.tree = tree;
        self.messages.resize(n_dir, Vec::new());
        self.invalidate_all();
        Ok(())
    }

    pub fn set_model(&mut self, model: BinaryCtmc) {
        self.model = model;
        self.invalidate_all();
    }

    pub fn set_gamma(&mut self, gamma: GammaRates) {
        self.gamma = gamma;
        self.invalidate_all();
    }

    pub fn invalidate_all(&mut self) {
        self.valid.clear();
        self.valid.resize(self.tree.edges().len() * 2, false);
    }

    pub fn set_edge_length(&mut self, e: usize, length: f64) {
        self.tree.set_length(e, length);
        self.invalidate_away(e);
    }

    /// Invalidates every message pointing away from edge `e`.
    fn invalidate_away(&mut self, e: usize) {
        let [a, b] = self.tree.edge(e).ends;
        let mut stack = vec![(a, e), (b, e)];
        while let Some((node, via)) = stack.pop() {
            for &(next, f) in self.tree.neighbors(node) {
                if f == via {
                    continue;
                }
                let d = self.dir(node, f);
                if !self.valid[d] {
                    // Everything further out was already invalidated or never built.
                    continue;
                }
                self.valid[d] = false;
                stack.push((next, f));
            }
        }
    }

    /// Applies a subtree swap (see [`UTree::swap_subtrees`]). Messages
    /// flowing toward the swapped region stay valid.
    pub fn swap_subtrees(&mut self, edge_a: usize, edge_b: usize) {
        let center = self.tree.swap_subtrees(edge_a, edge_b);
        self.valid[2 * center] = false;
        self.valid[2 * center + 1] = false;
        self.invalidate_away(center);
    }

    /// Directed index of the message sent from `from` across edge `e`.
    fn dir(&self, from: usize, e: usize) -> usize {
        if self.tree.edge(e).ends[0] == from {
            2 * e
        } else {
            2 * e + 1
        }
    }

    fn stride(&self) -> usize {
        self.gamma.k() * 2
    }

    /// Makes sure the message from `from` across `e` is current.
    fn ensure(&mut self, from: usize, e: usize) {
        let d = self.dir(from, e);
        if self.valid[d] {
            return;
        }
        let inputs: Vec<(usize, usize)> = self
            .tree
            .neighbors(from)
            .iter()
            .filter(|&&(_, f)| f != e)
            .copied()
            .collect();
        for &(child, f) in &inputs {
            self.ensure(child, f);
        }
        let n_pat = self.data.n_patterns;
        let k = self.gamma.k();
        let stride = self.stride();
        let mut out = std::mem::take(&mut self.messages[d]);
        out.clear();
        match self.node_row[from] {
            Some(row) => {
                for p in 0..n_pat {
                    let tip = match self.data.state(row, p) {
                        0 => [1.0, 0.0],
                        1 => [0.0, 1.0],
                        _ => [1.0, 1.0],
                    };
                    for _ in 0..k {
                        out.extend_from_slice(&tip);
                    }
                }
            }
            None => out.resize(n_pat * stride, 1.0),
        }
        for &(child, f) in &inputs {
            let pm = self.transition_matrices(self.tree.edge(f).length);
            let cd = self.dir(child, f);
            let msg = &self.messages[cd];
            for p in 0..n_pat {
                for c in 0..k {
                    let base = p * stride + c * 2;
                    let (x0, x1) = (msg[base], msg[base + 1]);
                    let m = &pm[c];
                    out[base] *= m[0][0] * x0 + m[0][1] * x1;
                    out[base + 1] *= m[1][0] * x0 + m[1][1] * x1;
                }
            }
        }
        self.messages[d] = out;
        self.valid[d] = true;
    }

    fn transition_matrices(&self, length: f64) -> Vec<[[f64; 2]; 2]> {
        self.gamma
            .rates
            .iter()
            .map(|&r| self.model.transition_matrix(length, r))
            .collect()
    }

    /// Both messages across `e`, computing them if needed.
    fn edge_messages(&mut self, e: usize) -> (&[f64], &[f64]) {
        let [a, b] = self.tree.edge(e).ends;
        self.ensure(a, e);
        self.ensure(b, e);
        let (da, db) = (self.dir(a, e), self.dir(b, e));
        (&self.messages[da], &self.messages[db])
    }

    pub fn log_likelihood(&mut self) -> f64 {
        let length = self.tree.edge(0).length;
        let freqs = self.model.frequencies();
        let rates = self.gamma.rates.clone();
        let model = self.model;
        let data = self.data;
        let (a, b) = self.edge_messages(0);
        let pms: Vec<_> = rates.iter().map(|&r| model.transition_matrix(length, r)).collect();
        combine(data, freqs, &pms, a, b)
    }

    /// Optimizes the length of edge `e` with everything else fixed. Returns
    /// the resulting log-likelihood, never lower than before the call.
    pub fn optimize_edge(&mut self, e: usize, tolerance: f64) -> f64 {
        let current = self.tree.edge(e).length;
        let freqs = self.model.frequencies();
        let rates = self.gamma.rates.clone();
        let model = self.model;
        let data = self.data;
        let (a, b) = self.edge_messages(e);
        let exact = |t: f64| {
            let pms: Vec<_> = rates.iter().map(|&r| model.transition_matrix(t, r)).collect();
            combine(data, freqs, &pms, a, b)
        };
        let before = exact(current);
        let decay: Vec<f64> = rates.iter().map(|&r| model.mu() * r).collect();
        let curve = EdgeCurve::new(data, freqs, decay, a, b);
        let best_t = curve.maximize(current, tolerance);
        if best_t == current {
            return before;
        }
        let best = exact(best_t);
        if best > before {
            self.set_edge_length(e, best_t);
            best
        } else {
            before
        }
    }

    pub fn into_tree(self) -> UTree {
        self.tree
    }
}

/// Log-likelihood as a function of one branch length `t`. Per pattern and
/// category the site likelihood is `u + v * exp(-decay * t)`, so values and
/// derivatives need no further message passing.
struct EdgeCurve<'a> {
    data: &'a SitePatterns,
    decay: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl<'a> EdgeCurve<'a> {
    fn new(data: &'a SitePatterns, freqs: [f64; 2], decay: Vec<f64>, a: &[f64], b: &[f64]) -> Self {
        let k = decay.len();
        let w = 1.0 / k as f64;
        let n = data.n_patterns * k;
        let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let (a0, a1, b0, b1) = (a[2 * i], a[2 * i + 1], b[2 * i], b[2 * i + 1]);
            let ra = freqs[0] * a0 + freqs[1] * a1;
            let rb = freqs[0] * b0 + freqs[1] * b1;
            let same = freqs[0] * a0 * b0 + freqs[1] * a1 * b1;
            u.push(w * ra * rb);
            v.push(w * (same - ra * rb));
        }
        EdgeCurve { data, decay, u, v }
    }

    /// Site likelihood of pattern `p` and its first two derivatives.
    fn site(&self, p: usize, e: &[f64]) -> (f64, f64, f64) {
        let k = self.decay.len();
        let (mut l, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for c in 0..k {
            let term = self.v[p * k + c] * e[c];
            l += self.u[p * k + c] + term;
            d1 -= self.decay[c] * term;
            d2 += self.decay[c] * self.decay[c] * term;
        }
        (l, d1, d2)
    }

    /// Log-likelihood, gradient and curvature at `t`.
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let e: Vec<f64> = self.decay.iter().map(|d| (-d * t).exp()).collect();
        let data = self.data;
        let n = data.n_patterns;
        let informative = if data.conditioned { n - 2 } else { n };
        let (mut f, mut g, mut h) = (0.0, 0.0, 0.0);
        for p in 0..informative {
            let weight = data.weights[p];
            if weight <= 0.0 {
                continue;
            }
            let (l, d1, d2) = self.site(p, &e);
            if l <= f64::MIN_POSITIVE {
                f += weight * f64::MIN_POSITIVE.ln();
                continue;
            }
            let r = d1 / l;
            f += weight * l.ln();
            g += weight * r;
            h += weight * (d2 / l - r * r);
        }
        if data.conditioned {
            let (l0, a0, b0) = self.site(n - 2, &e);
            let (l1, a1, b1) = self.site(n - 1, &e);
            let rest = (1.0 - l0 - l1).max(f64::MIN_POSITIVE);
            let (s1, s2) = (a0 + a1, b0 + b1);
            let m = data.n_characters();
            f -= m * rest.ln();
            g += m * s1 / rest;
            h += m * (s2 / rest + (s1 / rest).powi(2));
        }
        (f, g, h)
    }

    /// Safeguarded Newton ascent from `start` within the branch bounds.
    fn maximize(&self, start: f64, tolerance: f64) -> f64 {
        let mut t = start.clamp(MIN_BRANCH, MAX_BRANCH);
        let (mut f, mut g, mut h) = self.eval(t);
        for _ in 0..100 {
            let mut next = if h < 0.0 {
                t - g / h
            } else if g > 0.0 {
                4.0 * t
            } else {
                0.25 * t
            };
            next = next.clamp(MIN_BRANCH, MAX_BRANCH);
            let mut moved = false;
            while (next - t).abs() > 0.5 * tolerance {
                let (fn_, gn, hn) = self.eval(next);
                if fn_ >= f {
                    moved = (next - t).abs() > tolerance;
                    (t, f, g, h) = (next, fn_, gn, hn);
                    break;
                }
                next = 0.5 * (t + next);
            }
            if !moved {
                break;
            }
        }
        t
    }
}

/// Log-likelihood from the two messages across one edge.
fn combine(data: &SitePatterns, freqs: [f64; 2], pms: &[[[f64; 2]; 2]], a: &[f64], b: &[f64]) -> f64 {
    let k = pms.len();
    let stride = 2 * k;
    let w = 1.0 / k as f64;
    let site = |p: usize| -> f64 {
        let mut total = 0.0;
        for (c, m) in pms.iter().enumerate() {
            let base = p * stride + c * 2;
            let (b0, b1) = (b[base], b[base + 1]);
            let s0 = freqs[0] * a[base] * (m[0][0] * b0 + m[0][1] * b1);
            let s1 = freqs[1] * a[base + 1] * (m[1][0] * b0 + m[1][1] * b1);
            total += s0 + s1;
        }
        total * w
    };
    let n = data.n_patterns;
    let informative = if data.conditioned { n - 2 } else { n };
    let mut logl = 0.0;
    for p in 0..informative {
        let weight = data.weights[p];
        if weight > 0.0 {
            logl += weight * site(p).max(f64::MIN_POSITIVE).ln();
        }
    }
    if data.conditioned {
        let variable = (1.0 - site(n - 2) - site(n - 1)).max(f64::MIN_POSITIVE);
        logl -= data.n_characters() * variable.ln();
    }
    logl
}

/// Log-likelihood of a matrix on a tree with branch lengths. The tree may
/// contain taxa absent from the matrix; they are treated as missing data.
pub fn log_likelihood(
    tree: &Tree,
    matrix: &BinaryMatrix,
    model: &BinaryCtmc,
    gamma: &GammaRates,
) -> Result<f64> {
    let data = SitePatterns::from_matrix(matrix, false);
    log_likelihood_patterns(tree, &data, model, gamma)
}

pub fn log_likelihood_patterns(
    tree: &Tree,
    data: &SitePatterns,
    model: &BinaryCtmc,
    gamma: &GammaRates,
) -> Result<f64> {
    let utree = UTree::from_tree(tree, None)?;
    let mut engine = LikelihoodEngine::new(utree, data, *model, gamma.clone())?;
    Ok(engine.log_likelihood())
}

//! Starting trees (random and stepwise-addition parsimony) and NNI
//! hill-climbing maximum-likelihood search.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::{BinaryMatrix, Cell};
use crate::error::{Error, Result};
use crate::phylo::fit::{empirical_pi1, fit_engine, optimize_all_branches, FitOptions};
use crate::phylo::likelihood::{LikelihoodEngine, SitePatterns};
use crate::phylo::model::{discretize_gamma, BinaryCtmc, GammaRates};
use crate::phylo::tree::Tree;
use crate::phylo::utree::UTree;
use crate::seed::{derive_seed, rng_from_seed};

pub const INITIAL_BRANCH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartKind {
    Random,
    Parsimony,
}

impl StartKind {
    pub fn name(self) -> &'static str {
        match self {
            StartKind::Random => "random",
            StartKind::Parsimony => "parsimony",
        }
    }
}

/// Builds a starting tree over the matrix taxa.
pub fn starting_tree(kind: StartKind, matrix: &BinaryMatrix, seed: u64) -> Result<Tree> {
    Ok(starting_utree(kind, matrix, seed)?.to_tree_canonical())
}

fn starting_utree(kind: StartKind, matrix: &BinaryMatrix, seed: u64) -> Result<UTree> {
    let n = matrix.n_taxa();
    if n < 3 {
        return Err(Error::Validation(format!("a starting tree needs at least 3 taxa, got {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let taxa = matrix.taxa();
    let mut tree = UTree::with_nodes(Vec::new());
    let center = tree.add_node(None);
    for &t in &order[..3] {
        let leaf = tree.add_node(Some(taxa[t].clone()));
        tree.add_edge(center, leaf, INITIAL_BRANCH);
    }
    for &t in &order[3..] {
        let e = match kind {
            StartKind::Random => rng.random_range(0..tree.edges().len()),
            StartKind::Parsimony => best_insertion(&tree, matrix, t),
        };
        tree.insert_leaf_on_edge(e, taxa[t].clone(), INITIAL_BRANCH);
    }
    for e in 0..tree.edges().len() {
        tree.set_length(e, INITIAL_BRANCH);
    }
    Ok(tree)
}

/// First edge (by id) whose insertion point gives the lowest Fitch score.
fn best_insertion(tree: &UTree, matrix: &BinaryMatrix, taxon: usize) -> usize {
    let label = &matrix.taxa()[taxon];
    let mut best = (usize::MAX, 0);
    for e in 0..tree.edges().len() {
        let mut candidate = tree.clone();
        candidate.insert_leaf_on_edge(e, label.clone(), INITIAL_BRANCH);
        let score = fitch_score(&candidate, matrix);
        if score < best.0 {
            best = (score, e);
        }
    }
    best.1
}

/// Fitch parsimony score; missing cells may take either state. Taxa in the
/// tree but not in the matrix are treated as missing.
pub fn fitch_score(tree: &UTree, matrix: &BinaryMatrix) -> usize {
    let leaves = tree.leaves();
    let Some(&root) = leaves.first() else {
        return 0;
    };
    // Postorder from the root leaf.
    let mut order = Vec::with_capacity(tree.n_nodes());
    let mut parent = vec![usize::MAX; tree.n_nodes()];
    let mut stack = vec![root];
    parent[root] = root;
    while let Some(n) = stack.pop() {
        order.push(n);
        for &(m, _) in tree.neighbors(n) {
            if parent[m] == usize::MAX {
                parent[m] = n;
                stack.push(m);
            }
        }
    }
    let row_of: Vec<Option<usize>> = (0..tree.n_nodes())
        .map(|n| {
            if tree.is_leaf(n) {
                tree.label(n).and_then(|l| matrix.taxon_index(l))
            } else {
                None
            }
        })
        .collect();
    let leaf_set = |n: usize, c: usize| -> u8 {
        match row_of[n].map(|r| matrix.cell(r, c)) {
            Some(Cell::Absent) => 1,
            Some(Cell::Present) => 2,
            _ => 3,
        }
    };
    let mut sets = vec![0u8; tree.n_nodes()];
    let mut score = 0;
    for c in 0..matrix.n_chars() {
        for &n in order.iter().rev() {
            if n != root && tree.is_leaf(n) {
                sets[n] = leaf_set(n, c);
                continue;
            }
            let mut inter = 3u8;
            let mut union = 0u8;
            let mut any = false;
            for &(m, _) in tree.neighbors(n) {
                if parent[m] == n && m != root {
                    inter &= sets[m];
                    union |= sets[m];
                    any = true;
                }
            }
            if n == root {
                let own = leaf_set(n, c);
                if any && own & inter == 0 {
                    score += 1;
                }
                continue;
            }
            if inter == 0 {
                score += 1;
                sets[n] = union;
            } else {
                sets[n] = inter;
            }
        }
    }
    score
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlConfig {
    pub n_random: usize,
    pub n_parsimony: usize,
    pub seed: u64,
    /// Gamma categories; 1 means no rate heterogeneity (BIN).
    pub gamma_categories: usize,
    pub initial_alpha: f64,
    /// Condition the likelihood on characters being variable.
    pub conditioned: bool,
    pub fit: FitOptions,
    pub max_nni_rounds: usize,
}

impl Default for MlConfig {
    fn default() -> Self {
        MlConfig {
            n_random: 10,
            n_parsimony: 10,
            seed: 1,
            gamma_categories: 4,
            initial_alpha: 1.0,
            conditioned: false,
            fit: FitOptions::default(),
            max_nni_rounds: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub start: StartKind,
    pub index: usize,
    pub tree: Tree,
    pub model: BinaryCtmc,
    pub gamma: GammaRates,
    pub log_likelihood: f64,
    /// Log-likelihood after the initial fit and after every accepted move.
    pub trajectory: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlResult {
    pub best: usize,
    pub results: Vec<SearchResult>,
}

impl MlResult {
    pub fn best(&self) -> &SearchResult {
        &self.results[self.best]
    }
}

/// Runs the configured random and parsimony searches and returns all of
/// them along with the index of the best.
pub fn ml_search(matrix: &BinaryMatrix, config: &MlConfig) -> Result<MlResult> {
    if matrix.n_taxa() < 4 {
        return Err(Error::Validation(format!(
            "ML search needs at least 4 taxa, got {}",
            matrix.n_taxa()
        )));
    }
    if config.n_random + config.n_parsimony == 0 {
        return Err(Error::Validation("at least one search required".into()));
    }
    let data = SitePatterns::from_matrix(matrix, config.conditioned);
    let jobs: Vec<(StartKind, usize)> = (0..config.n_random)
        .map(|i| (StartKind::Random, i))
        .chain((0..config.n_parsimony).map(|i| (StartKind::Parsimony, i)))
        .collect();
    let results: Vec<SearchResult> = jobs
        .par_iter()
        .map(|&(kind, i)| {
            let seed = derive_seed(config.seed, &format!("ml-{}", kind.name()), i as u64);
            let start = starting_utree(kind, matrix, seed)?;
            let mut result = search_from(start, &data, matrix, config)?;
            result.start = kind;
            result.index = i;
            Ok(result)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.log_likelihood > results[best].log_likelihood {
            best = i;
        }
    }
    Ok(MlResult { best, results })
}

fn initial_gamma(config: &MlConfig) -> Result<GammaRates> {
    if config.gamma_categories <= 1 {
        Ok(GammaRates::uniform())
    } else {
        discretize_gamma(config.initial_alpha, config.gamma_categories)
    }
}

/// Hill-climbs from one starting tree.
pub fn search_from(
    start: UTree,
    data: &SitePatterns,
    matrix: &BinaryMatrix,
    config: &MlConfig,
) -> Result<SearchResult> {
    let mut fit = config.fit.clone();
    if config.gamma_categories <= 1 {
        fit.alpha = false;
    }
    let model = BinaryCtmc::new(empirical_pi1(matrix))?;
    let mut engine = LikelihoodEngine::new(start, data, model, initial_gamma(config)?)?;
    let mut ll = fit_engine(&mut engine, &fit);
    let mut trajectory = vec![ll];
    // Model parameters are refit only once NNI stops improving; the search
    // resumes if the refit changes the likelihood.
    for _ in 0..config.max_nni_rounds {
        match best_nni(&mut engine, ll, fit.branch_tolerance) {
            Some(next) if next - ll > fit.logl_tolerance => {
                ll = if fit.branch_lengths {
                    optimize_all_branches(&mut engine, fit.branch_tolerance).max(next)
                } else {
                    next
                };
                trajectory.push(ll);
            }
            _ => {
                let refit = fit_engine(&mut engine, &fit);
                let resume = refit - ll > fit.logl_tolerance;
                if refit > ll {
                    ll = refit;
                    trajectory.push(ll);
                }
                if !resume {
                    break;
                }
            }
        }
    }
    Ok(SearchResult {
        start: StartKind::Random,
        index: 0,
        tree: engine.tree().to_tree_canonical(),
        model: *engine.model(),
        gamma: engine.gamma().clone(),
        log_likelihood: ll,
        trajectory,
    })
}

/// Evaluates every NNI neighbor, optimizing the central branch and its four
/// neighbors. Applies the best one if it beats `current` and returns its
/// log-likelihood; otherwise leaves the engine unchanged.
fn best_nni(engine: &mut LikelihoodEngine<'_>, current: f64, tolerance: f64) -> Option<f64> {
    let mut best: Option<(f64, usize, usize, Vec<(usize, f64)>)> = None;
    for center in engine.tree().internal_edges() {
        for (x, y) in engine.tree().nni_moves(center) {
            let mut region = vec![center];
            region.extend(engine.tree().adjacent_edges(center));
            let saved: Vec<(usize, f64)> = region.iter().map(|&e| (e, engine.tree().edge(e).length)).collect();
            engine.swap_subtrees(x, y);
            let mut ll = f64::NEG_INFINITY;
            for &e in &region {
                ll = engine.optimize_edge(e, tolerance);
            }
            if ll > current && best.as_ref().is_none_or(|b| ll > b.0) {
                let lengths = region.iter().map(|&e| (e, engine.tree().edge(e).length)).collect();
                best = Some((ll, x, y, lengths));
            }
            engine.swap_subtrees(x, y);
            for &(e, len) in &saved {
                engine.set_edge_length(e, len);
            }
        }
    }
    let (_, x, y, lengths) = best?;
    engine.swap_subtrees(x, y);
    for (e, len) in lengths {
        engine.set_edge_length(e, len);
    }
    let ll = engine.log_likelihood();
    if ll > current {
        Some(ll)
    } else {
        None
    }
}

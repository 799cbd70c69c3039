//! Strict-clock Bayesian inference by Metropolis-Hastings.
//!
//! The state is a rooted ultrametric tree (leaves at age 0), a global clock
//! rate, the Gamma shape and pi1. Priors: uniform over rooted topologies,
//! internal ages uniform given the root age, root age and clock rate
//! Exponential(1), pi1 uniform, alpha as configured.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::BinaryMatrix;
use crate::error::{Error, Result};
use crate::eval::{asdsf_from_splits, tree_splits, Split};
use crate::phylo::fit::empirical_pi1;
use crate::phylo::likelihood::{LikelihoodEngine, SitePatterns};
use crate::phylo::model::{discretize_gamma, BinaryCtmc, GammaRates};
use crate::phylo::tree::{Node, Tree};
use crate::phylo::utree::UTree;
use crate::seed::{stream, Rng};

const PI1_MIN: f64 = 1e-3;
const PI1_MAX: f64 = 1.0 - 1e-3;
/// Support used for the Exponential alpha prior.
const EXP_ALPHA_MIN: f64 = 1e-3;
const EXP_ALPHA_MAX: f64 = 1e3;
const MIN_SAMPLES_FOR_CHECK: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlphaPrior {
    Uniform { lower: f64, upper: f64 },
    Exponential { rate: f64 },
}

impl Default for AlphaPrior {
    fn default() -> Self {
        AlphaPrior::Uniform {
            lower: 0.01,
            upper: 100.0,
        }
    }
}

impl AlphaPrior {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            AlphaPrior::Uniform { lower, upper } => (lower, upper),
            AlphaPrior::Exponential { .. } => (EXP_ALPHA_MIN, EXP_ALPHA_MAX),
        }
    }

    fn log_density(&self, alpha: f64) -> f64 {
        match *self {
            AlphaPrior::Uniform { lower, upper } => -(upper - lower).ln(),
            AlphaPrior::Exponential { rate } => rate.ln() - rate * alpha,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            AlphaPrior::Uniform { lower, upper } => lower > 0.0 && upper > lower && upper.is_finite(),
            AlphaPrior::Exponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid alpha prior {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub generations_max: u64,
    pub sample_every: u64,
    pub burnin_fraction: f64,
    pub asdsf_target: f64,
    /// Splits below this frequency in every run are ignored by the ASDSF.
    pub asdsf_min_freq: f64,
    pub runs: usize,
    pub alpha_prior: AlphaPrior,
    /// Gamma categories; 1 disables rate heterogeneity and alpha sampling.
    pub gamma_categories: usize,
    /// Full width of the alpha sliding window.
    pub alpha_window: f64,
    /// Full width of the pi1 sliding window.
    pub pi1_window: f64,
    /// Scale-move tuning: factors are drawn as exp(tuning * (u - 0.5)).
    pub scale_tuning: f64,
    /// Number of trees drawn from the pooled post-burn-in samples.
    pub posterior_draws: usize,
    /// Ignore the data, sampling from the prior.
    pub prior_only: bool,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            generations_max: 1_000_000,
            sample_every: 1000,
            burnin_fraction: 0.25,
            asdsf_target: 0.01,
            asdsf_min_freq: 0.1,
            runs: 2,
            alpha_prior: AlphaPrior::default(),
            gamma_categories: 4,
            alpha_window: 20.0,
            pi1_window: 0.1,
            scale_tuning: 2.0 * 2f64.ln(),
            posterior_draws: 1000,
            prior_only: false,
            seed: 1,
        }
    }
}

impl McmcConfig {
    fn validate(&self) -> Result<()> {
        if !(self.burnin_fraction > 0.0 && self.burnin_fraction < 1.0) {
            return Err(Error::Domain(format!("burn-in fraction {} outside (0, 1)", self.burnin_fraction)));
        }
        if self.sample_every == 0 {
            return Err(Error::Domain("sample_every must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::Domain("at least one run required".into()));
        }
        if self.gamma_categories == 0 {
            return Err(Error::Domain("at least one rate category required".into()));
        }
        if !(self.alpha_window > 0.0 && self.pi1_window > 0.0 && self.scale_tuning > 0.0) {
            return Err(Error::Domain("proposal tuning parameters must be positive".into()));
        }
        self.alpha_prior.validate()
    }
}

/// Rooted ultrametric tree. Leaves come first, in matrix taxon order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockTree {
    /// Shared between copies; the labels never change.
    labels: Arc<[Option<String>]>,
    parent: Vec<Option<usize>>,
    children: Vec<[usize; 2]>,
    ages: Vec<f64>,
    root: usize,
    n_leaves: usize,
}

impl ClockTree {
    /// Random topology by joining random pairs of lineages, with internal
    /// ages spaced evenly up to `root_age`.
    fn random(taxa: &[String], root_age: f64, rng: &mut Rng) -> ClockTree {
        let n = taxa.len();
        let total = 2 * n - 1;
        let mut labels: Vec<Option<String>> = taxa.iter().cloned().map(Some).collect();
        labels.resize(total, None);
        let mut parent = vec![None; total];
        let mut children = vec![[usize::MAX; 2]; total];
        let mut ages = vec![0.0; total];
        let mut lineages: Vec<usize> = (0..n).collect();
        for (rank, node) in (n..total).enumerate() {
            lineages.shuffle(rng);
            let a = lineages.pop().expect("two lineages");
            let b = lineages.pop().expect("two lineages");
            children[node] = [a, b];
            parent[a] = Some(node);
            parent[b] = Some(node);
            ages[node] = root_age * (rank + 1) as f64 / (n - 1) as f64;
            lineages.push(node);
        }
        ClockTree {
            labels: labels.into(),
            parent,
            children,
            ages,
            root: total - 1,
            n_leaves: n,
        }
    }

    pub fn root_age(&self) -> f64 {
        self.ages[self.root]
    }

    pub fn age(&self, node: usize) -> f64 {
        self.ages[node]
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    fn internal(&self) -> std::ops::Range<usize> {
        self.n_leaves..self.labels.len()
    }

    fn sibling(&self, node: usize) -> usize {
        let p = self.parent[node].expect("non-root");
        let [a, b] = self.children[p];
        if a == node {
            b
        } else {
            a
        }
    }

    /// Log density of the internal ages given topology and root age:
    /// uniform over all age assignments consistent with the topology.
    fn log_age_density(&self) -> f64 {
        let mut internal_below = vec![0usize; self.labels.len()];
        let mut total = 0.0;
        for v in self.postorder() {
            if v >= self.n_leaves {
                let [a, b] = self.children[v];
                internal_below[v] = 1 + internal_below[a] + internal_below[b];
                if v != self.root {
                    total += (internal_below[v] as f64).ln();
                }
            }
        }
        total - (self.n_leaves as f64 - 2.0) * self.root_age().ln()
    }

    fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.labels.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            if v >= self.n_leaves {
                stack.extend(self.children[v]);
            }
        }
        out.reverse();
        out
    }

    /// Tree with branch lengths `age difference * rate`.
    pub fn to_tree(&self, rate: f64) -> Tree {
        let mut nodes = Vec::with_capacity(self.labels.len());
        let mut map = vec![usize::MAX; self.labels.len()];
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            let id = nodes.len();
            map[v] = id;
            let parent = self.parent[v].map(|p| map[p]);
            nodes.push(Node {
                label: self.labels[v].clone(),
                length: self.parent[v].map(|p| (self.ages[p] - self.ages[v]) * rate),
                parent,
                children: Vec::new(),
            });
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            if v >= self.n_leaves {
                stack.push(self.children[v][1]);
                stack.push(self.children[v][0]);
            }
        }
        let mut tree = Tree::from_nodes(nodes, true).expect("connected tree");
        tree.sort_children_by_label();
        tree
    }

    /// Unrooted view sharing node ids; `edge_of[v]` is the branch above `v`.
    fn to_utree(&self, rate: f64) -> (UTree, Vec<usize>) {
        let mut u = UTree::with_nodes(self.labels.to_vec());
        let mut edge_of = vec![usize::MAX; self.labels.len()];
        for v in 0..self.labels.len() {
            if let Some(p) = self.parent[v] {
                edge_of[v] = u.add_edge(p, v, (self.ages[p] - self.ages[v]) * rate);
            }
        }
        (u, edge_of)
    }

    /// Exchanges `c` (child of `i`) with `u` (sibling of `i`).
    fn exchange(&mut self, i: usize, c: usize, u: usize) {
        let g = self.parent[i].expect("non-root");
        for slot in self.children[i].iter_mut() {
            if *slot == c {
                *slot = u;
            }
        }
        for slot in self.children[g].iter_mut() {
            if *slot == u {
                *slot = c;
            }
        }
        self.parent[u] = Some(i);
        self.parent[c] = Some(g);
    }
}

#[derive(Debug, Clone, PartialEq)]
struct State {
    tree: ClockTree,
    rate: f64,
    alpha: Option<f64>,
    pi1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcSample {
    pub generation: u64,
    pub tree: ClockTree,
    pub clock_rate: f64,
    pub alpha: Option<f64>,
    pub pi1: f64,
    pub log_likelihood: f64,
    pub log_prior: f64,
}

impl McmcSample {
    pub fn log_posterior(&self) -> f64 {
        self.log_likelihood + self.log_prior
    }

    /// Sampled tree with branch lengths in expected substitutions.
    pub fn substitution_tree(&self) -> Tree {
        self.tree.to_tree(self.clock_rate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcRun {
    pub samples: Vec<McmcSample>,
    /// Accepted / proposed counts per move, in cycle order.
    pub acceptance: [(u64, u64); 6],
}

impl McmcRun {
    /// Samples after discarding the burn-in fraction.
    pub fn retained(&self, burnin_fraction: f64) -> &[McmcSample] {
        let skip = (self.samples.len() as f64 * burnin_fraction).floor() as usize;
        &self.samples[skip.min(self.samples.len())..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcResult {
    pub runs: Vec<McmcRun>,
    pub generations: u64,
    pub converged: bool,
    /// Last ASDSF computed, if any (needs at least two runs).
    pub asdsf: Option<f64>,
    /// Trees drawn from the pooled retained samples.
    pub posterior: Vec<Tree>,
}

pub const MOVE_NAMES: [&str; 6] = ["narrow_exchange", "node_slide", "root_scale", "rate_scale", "alpha_window", "pi1_window"];

struct Chain<'d> {
    state: State,
    engine: Option<LikelihoodEngine<'d>>,
    edge_of: Vec<usize>,
    categories: usize,
    log_likelihood: f64,
    log_prior: f64,
    rng: Rng,
    generation: u64,
    run: McmcRun,
    /// Splits of each sampled tree, kept for the convergence check.
    splits: Vec<BTreeSet<Split>>,
}

fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    loop {
        if x < lo {
            x = 2.0 * lo - x;
        } else if x > hi {
            x = 2.0 * hi - x;
        } else {
            return x;
        }
    }
}

impl<'d> Chain<'d> {
    fn new(data: Option<&'d SitePatterns>, matrix: &BinaryMatrix, config: &McmcConfig, run: usize) -> Result<Self> {
        let mut rng = stream(config.seed, "mcmc-run", run as u64);
        let tree = ClockTree::random(matrix.taxa(), 1.0, &mut rng);
        let rate = 0.5;
        let alpha = (config.gamma_categories > 1).then(|| {
            let (lo, hi) = config.alpha_prior.bounds();
            1.0f64.clamp(lo, hi)
        });
        let pi1 = empirical_pi1(matrix).clamp(PI1_MIN, PI1_MAX);
        let state = State { tree, rate, alpha, pi1 };
        let (utree, edge_of) = state.tree.to_utree(rate);
        let engine = match data {
            Some(d) => Some(LikelihoodEngine::new(utree, d, BinaryCtmc::new(pi1)?, gamma_for(alpha, config.gamma_categories)?)?),
            None => None,
        };
        let mut chain = Chain {
            state,
            engine,
            edge_of,
            categories: config.gamma_categories,
            log_likelihood: 0.0,
            log_prior: 0.0,
            rng,
            generation: 0,
            run: McmcRun {
                samples: Vec::new(),
                acceptance: [(0, 0); 6],
            },
            splits: Vec::new(),
        };
        chain.log_likelihood = chain.compute_likelihood();
        chain.log_prior = log_prior(&chain.state, config);
        Ok(chain)
    }

    fn compute_likelihood(&mut self) -> f64 {
        self.engine.as_mut().map_or(0.0, |e| e.log_likelihood())
    }

    fn sync_edge(&mut self, v: usize) {
        if let Some(engine) = self.engine.as_mut() {
            let t = &self.state.tree;
            let p = t.parent[v].expect("non-root");
            engine.set_edge_length(self.edge_of[v], (t.ages[p] - t.ages[v]) * self.state.rate);
        }
    }

    fn sync_all_edges(&mut self) {
        for v in 0..self.state.tree.labels.len() {
            if v != self.state.tree.root {
                self.sync_edge(v);
            }
        }
    }

    fn sync_model(&mut self) {
        if let Some(engine) = self.engine.as_mut() {
            engine.set_model(BinaryCtmc::new(self.state.pi1).expect("pi1 in bounds"));
            engine.set_gamma(gamma_for(self.state.alpha, self.categories).expect("alpha in bounds"));
        }
    }

    fn step(&mut self, config: &McmcConfig) {
        let kind = (self.generation % 6) as usize;
        self.generation += 1;
        let saved = self.state.clone();
        let Some((log_hastings, undo)) = self.propose(kind, config) else {
            return;
        };
        self.run.acceptance[kind].1 += 1;
        let new_prior = log_prior(&self.state, config);
        let new_ll = self.compute_likelihood();
        let log_ratio = new_ll - self.log_likelihood + new_prior - self.log_prior + log_hastings;
        if log_ratio >= 0.0 || self.rng.random::<f64>().ln() < log_ratio {
            self.log_likelihood = new_ll;
            self.log_prior = new_prior;
            self.run.acceptance[kind].0 += 1;
        } else {
            self.state = saved;
            self.revert(undo);
        }
    }

    /// Applies one proposal to the state and the engine. Returns the log
    /// Hastings ratio and what is needed to undo it, or `None` when the
    /// proposal is invalid or not applicable.
    fn propose(&mut self, kind: usize, config: &McmcConfig) -> Option<(f64, Undo)> {
        let n = self.state.tree.n_leaves;
        let tree = &self.state.tree;
        match kind {
            0 => {
                let candidates: Vec<usize> = tree.internal().filter(|&v| v != tree.root).collect();
                let i = candidates[self.rng.random_range(0..candidates.len())];
                let c = tree.children[i][self.rng.random_range(0..2)];
                let u = tree.sibling(i);
                if tree.ages[u] >= tree.ages[i] {
                    return None;
                }
                self.state.tree.exchange(i, c, u);
                if let Some(engine) = self.engine.as_mut() {
                    engine.swap_subtrees(self.edge_of[u], self.edge_of[c]);
                }
                self.sync_edge(u);
                self.sync_edge(c);
                Some((0.0, Undo::Exchange { u, c }))
            }
            1 => {
                let candidates: Vec<usize> = tree.internal().filter(|&v| v != tree.root).collect();
                let i = candidates[self.rng.random_range(0..candidates.len())];
                let [a, b] = tree.children[i];
                let lo = tree.ages[a].max(tree.ages[b]);
                let hi = tree.ages[tree.parent[i].expect("non-root")];
                if lo >= hi {
                    return None;
                }
                self.state.tree.ages[i] = self.rng.random_range(lo..hi);
                self.sync_edge(i);
                self.sync_edge(a);
                self.sync_edge(b);
                Some((0.0, Undo::Ages))
            }
            2 => {
                let s = (config.scale_tuning * (self.rng.random::<f64>() - 0.5)).exp();
                for v in n..2 * n - 1 {
                    self.state.tree.ages[v] *= s;
                }
                self.sync_all_edges();
                Some(((n as f64 - 1.0) * s.ln(), Undo::Ages))
            }
            3 => {
                let s = (config.scale_tuning * (self.rng.random::<f64>() - 0.5)).exp();
                self.state.rate *= s;
                self.sync_all_edges();
                Some((s.ln(), Undo::Ages))
            }
            4 => {
                let alpha = self.state.alpha?;
                let (lo, hi) = config.alpha_prior.bounds();
                let proposal = alpha + config.alpha_window * (self.rng.random::<f64>() - 0.5);
                self.state.alpha = Some(reflect(proposal, lo, hi));
                self.sync_model();
                Some((0.0, Undo::Model))
            }
            _ => {
                let proposal = self.state.pi1 + config.pi1_window * (self.rng.random::<f64>() - 0.5);
                self.state.pi1 = reflect(proposal, PI1_MIN, PI1_MAX);
                self.sync_model();
                Some((0.0, Undo::Model))
            }
        }
    }

    /// Restores the engine after `self.state` was reset.
    fn revert(&mut self, undo: Undo) {
        match undo {
            Undo::Exchange { u, c } => {
                if let Some(engine) = self.engine.as_mut() {
                    engine.swap_subtrees(self.edge_of[u], self.edge_of[c]);
                }
                self.sync_edge(u);
                self.sync_edge(c);
            }
            Undo::Ages => self.sync_all_edges(),
            Undo::Model => self.sync_model(),
        }
    }

    fn sample(&mut self) {
        self.splits
            .push(tree_splits(&self.state.tree.to_tree(1.0)).expect("at least 4 taxa"));
        self.run.samples.push(McmcSample {
            generation: self.generation,
            tree: self.state.tree.clone(),
            clock_rate: self.state.rate,
            alpha: self.state.alpha,
            pi1: self.state.pi1,
            log_likelihood: self.log_likelihood,
            log_prior: self.log_prior,
        });
    }
}

enum Undo {
    Exchange { u: usize, c: usize },
    Ages,
    Model,
}

fn gamma_for(alpha: Option<f64>, k: usize) -> Result<GammaRates> {
    match alpha {
        Some(a) if k > 1 => discretize_gamma(a, k),
        _ => Ok(GammaRates::uniform()),
    }
}

fn log_prior(state: &State, config: &McmcConfig) -> f64 {
    let root_age = state.tree.root_age();
    let mut lp = state.tree.log_age_density() - root_age - state.rate;
    if let Some(alpha) = state.alpha {
        lp += config.alpha_prior.log_density(alpha);
    }
    lp
}

/// Runs independent chains until the split frequencies agree across runs or
/// the generation limit is reached.
pub fn mcmc_run(matrix: &BinaryMatrix, config: &McmcConfig) -> Result<McmcResult> {
    if matrix.n_taxa() < 4 {
        return Err(Error::Validation(format!("MCMC needs at least 4 taxa, got {}", matrix.n_taxa())));
    }
    config.validate()?;
    let data = (!config.prior_only).then(|| SitePatterns::from_matrix(matrix, false));
    let mut chains = (0..config.runs)
        .map(|r| Chain::new(data.as_ref(), matrix, config, r))
        .collect::<Result<Vec<_>>>()?;
    let mut generations = 0;
    let mut converged = false;
    let mut last_asdsf = None;
    while generations < config.generations_max {
        let block = config.sample_every.min(config.generations_max - generations);
        chains.par_iter_mut().for_each(|chain| {
            for _ in 0..block {
                chain.step(config);
            }
            if block == config.sample_every {
                chain.sample();
            }
        });
        generations += block;
        let enough = chains.iter().all(|c| c.run.samples.len() >= MIN_SAMPLES_FOR_CHECK);
        if chains.len() >= 2 && enough {
            let value = retained_asdsf(&chains, config)?;
            last_asdsf = Some(value);
            if value < config.asdsf_target {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        log::warn!("MCMC did not reach ASDSF {} within {} generations", config.asdsf_target, config.generations_max);
    }
    let runs: Vec<McmcRun> = chains.into_iter().map(|c| c.run).collect();
    let posterior = draw_posterior(&runs, config);
    Ok(McmcResult {
        runs,
        generations,
        converged,
        asdsf: last_asdsf,
        posterior,
    })
}

fn retained_asdsf(chains: &[Chain<'_>], config: &McmcConfig) -> Result<f64> {
    let views: Vec<&[BTreeSet<Split>]> = chains
        .iter()
        .map(|c| {
            let skip = c.run.samples.len() - c.run.retained(config.burnin_fraction).len();
            &c.splits[skip..]
        })
        .collect();
    asdsf_from_splits(&views, config.asdsf_min_freq)
}

fn draw_posterior(runs: &[McmcRun], config: &McmcConfig) -> Vec<Tree> {
    let pool: Vec<&McmcSample> = runs.iter().flat_map(|r| r.retained(config.burnin_fraction)).collect();
    if pool.is_empty() || config.posterior_draws == 0 {
        return Vec::new();
    }
    let mut rng = stream(config.seed, "mcmc-draw", 0);
    let picks: Vec<usize> = if pool.len() >= config.posterior_draws {
        index::sample(&mut rng, pool.len(), config.posterior_draws).into_vec()
    } else {
        (0..config.posterior_draws).map(|_| rng.random_range(0..pool.len())).collect()
    };
    picks.into_iter().map(|i| pool[i].substitution_tree()).collect()
}

/// Tab-separated trace of one run.
pub fn write_trace(run: &McmcRun) -> String {
    let mut out = String::from("generation\tlog_likelihood\tlog_prior\tlog_posterior\talpha\tpi1\troot_age\tclock_rate\n");
    for s in &run.samples {
        let alpha = s.alpha.map_or_else(|| "NA".to_string(), |a| a.to_string());
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            s.generation,
            s.log_likelihood,
            s.log_prior,
            s.log_posterior(),
            alpha,
            s.pi1,
            s.tree.root_age(),
            s.clock_rate
        ));
    }
    out
}

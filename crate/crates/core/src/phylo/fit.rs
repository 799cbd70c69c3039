//! Maximum-likelihood estimation of branch lengths, the Gamma shape and the
//! stationary frequencies by coordinate ascent.

use serde::{Deserialize, Serialize};

use crate::encode::BinaryMatrix;
use crate::error::Result;
use crate::phylo::likelihood::{LikelihoodEngine, SitePatterns};
use crate::phylo::model::{discretize_gamma, BinaryCtmc, GammaRates, ALPHA_MAX, ALPHA_MIN};
use crate::phylo::optimize::maximize_with_bounds;
use crate::phylo::tree::Tree;
use crate::phylo::utree::UTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub branch_lengths: bool,
    pub alpha: bool,
    pub frequencies: bool,
    /// Absolute tolerance on each branch length.
    pub branch_tolerance: f64,
    /// Stop once a full round improves the log-likelihood by less than this.
    pub logl_tolerance: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub pi1_min: f64,
    pub pi1_max: f64,
    pub max_rounds: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            branch_lengths: true,
            alpha: true,
            frequencies: true,
            branch_tolerance: 1e-6,
            logl_tolerance: 1e-4,
            alpha_min: ALPHA_MIN,
            alpha_max: ALPHA_MAX,
            pi1_min: 0.001,
            pi1_max: 0.999,
            max_rounds: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub tree: Tree,
    pub model: BinaryCtmc,
    pub gamma: GammaRates,
    pub log_likelihood: f64,
}

/// Optimizes the requested parameters on a fixed topology. Branches
/// without lengths start at 0.1.
pub fn fit_parameters(
    tree: &Tree,
    matrix: &BinaryMatrix,
    model: BinaryCtmc,
    gamma: GammaRates,
    options: &FitOptions,
) -> Result<FitResult> {
    let data = SitePatterns::from_matrix(matrix, false);
    let utree = UTree::from_tree(tree, Some(0.1))?.suppress_degree_two();
    let mut engine = LikelihoodEngine::new(utree, &data, model, gamma)?;
    let log_likelihood = fit_engine(&mut engine, options);
    Ok(FitResult {
        tree: engine.tree().to_tree_canonical(),
        model: *engine.model(),
        gamma: engine.gamma().clone(),
        log_likelihood,
    })
}

/// One pass of single-branch optimizations in depth-first edge order.
pub fn optimize_all_branches(engine: &mut LikelihoodEngine<'_>, tolerance: f64) -> f64 {
    let mut ll = engine.log_likelihood();
    for e in engine.tree().edges_dfs(0) {
        ll = engine.optimize_edge(e, tolerance);
    }
    ll
}

fn optimize_alpha(engine: &mut LikelihoodEngine<'_>, current: f64, options: &FitOptions) -> f64 {
    let Some(alpha) = engine.gamma().alpha else {
        return current;
    };
    let k = engine.gamma().k();
    let original = engine.gamma().clone();
    let (lo, hi) = (options.alpha_min.ln(), options.alpha_max.ln());
    let (best_log_alpha, best) = maximize_with_bounds(
        |log_alpha: f64| {
            let g = discretize_gamma(log_alpha.exp().clamp(options.alpha_min, options.alpha_max), k)
                .expect("positive shape");
            engine.set_gamma(g);
            engine.log_likelihood()
        },
        lo,
        hi,
        1e-5,
    );
    if best > current {
        let a = best_log_alpha.exp().clamp(options.alpha_min, options.alpha_max);
        engine.set_gamma(discretize_gamma(a, k).expect("positive shape"));
        best
    } else {
        debug_assert_eq!(original.alpha, Some(alpha));
        engine.set_gamma(original);
        current
    }
}

fn optimize_frequencies(engine: &mut LikelihoodEngine<'_>, current: f64, options: &FitOptions) -> f64 {
    let original = *engine.model();
    let (best_pi1, best) = maximize_with_bounds(
        |pi1: f64| {
            engine.set_model(BinaryCtmc::new(pi1).expect("pi1 within bounds"));
            engine.log_likelihood()
        },
        options.pi1_min,
        options.pi1_max,
        1e-6,
    );
    if best > current {
        engine.set_model(BinaryCtmc::new(best_pi1).expect("pi1 within bounds"));
        best
    } else {
        engine.set_model(original);
        current
    }
}

/// Coordinate ascent on an engine; returns the final log-likelihood, which
/// is never below the starting value.
pub fn fit_engine(engine: &mut LikelihoodEngine<'_>, options: &FitOptions) -> f64 {
    let mut ll = engine.log_likelihood();
    for _ in 0..options.max_rounds {
        let start = ll;
        if options.branch_lengths {
            ll = optimize_all_branches(engine, options.branch_tolerance).max(ll);
        }
        if options.alpha {
            ll = optimize_alpha(engine, ll, options);
        }
        if options.frequencies {
            ll = optimize_frequencies(engine, ll, options);
        }
        if ll - start < options.logl_tolerance {
            break;
        }
    }
    ll
}

/// Fraction of present states among observed cells, clamped away from 0 and 1.
pub fn empirical_pi1(matrix: &BinaryMatrix) -> f64 {
    use crate::encode::Cell;
    let (mut ones, mut observed) = (0usize, 0usize);
    for t in 0..matrix.n_taxa() {
        for &c in matrix.row(t) {
            match c {
                Cell::Present => {
                    ones += 1;
                    observed += 1;
                }
                Cell::Absent => observed += 1,
                Cell::Missing => {}
            }
        }
    }
    if observed == 0 {
        0.5
    } else {
        (ones as f64 / observed as f64).clamp(0.01, 0.99)
    }
}

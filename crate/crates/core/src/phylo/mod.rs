//! Trees, the binary substitution model, likelihood, ML search and MCMC.

pub mod fit;
pub mod likelihood;
pub mod mcmc;
pub mod model;
pub mod optimize;
pub mod search;
pub mod simulate;
pub mod tree;
pub mod utree;

pub use fit::{fit_parameters, FitOptions, FitResult};
pub use likelihood::{log_likelihood, LikelihoodEngine, SitePatterns};
pub use mcmc::{mcmc_run, AlphaPrior, ClockTree, McmcConfig, McmcResult, McmcRun, McmcSample};
pub use model::{discretize_gamma, BinaryCtmc, GammaRates};
pub use search::{ml_search, starting_tree, MlConfig, MlResult, SearchResult, StartKind};
pub use simulate::simulate_matrix;
pub use tree::{parse_newick, parse_newick_multi, write_newick, Node, Tree};
pub use utree::UTree;

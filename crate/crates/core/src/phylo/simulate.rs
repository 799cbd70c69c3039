//! Forward simulation of binary characters under the gain/loss model.

use rand::Rng as _;

use crate::encode::{BinaryMatrix, Cell, Provenance};
use crate::error::{Error, Result};
use crate::phylo::model::{BinaryCtmc, GammaRates};
use crate::phylo::tree::Tree;
use crate::seed::rng_from_seed;

/// Simulates `n_chars` independent characters on `tree`, then masks each
/// cell to `?` with probability `missing_fraction`. If every cell of a
/// character gets masked, the first taxon keeps its state. Taxa follow the
/// tree's leaf order.
pub fn simulate_matrix(
    tree: &Tree,
    model: &BinaryCtmc,
    gamma: &GammaRates,
    n_chars: usize,
    missing_fraction: f64,
    seed: u64,
) -> Result<BinaryMatrix> {
    if n_chars == 0 {
        return Err(Error::Domain("at least one character required".into()));
    }
    if !(0.0..1.0).contains(&missing_fraction) {
        return Err(Error::Domain(format!("missing fraction {missing_fraction} outside [0, 1)")));
    }
    if !tree.has_lengths() {
        return Err(Error::Validation("simulation needs branch lengths".into()));
    }
    let mut rng = rng_from_seed(seed);
    let order = tree.preorder();
    let leaves = tree.leaves();
    let mut rows = vec![Vec::with_capacity(n_chars); leaves.len()];
    let mut state = vec![0u8; tree.len()];
    for _ in 0..n_chars {
        let rate = gamma.rates[rng.random_range(0..gamma.k())];
        for &n in &order {
            let node = tree.node(n);
            state[n] = match node.parent {
                None => u8::from(rng.random::<f64>() < model.pi1()),
                Some(p) => {
                    let pm = model.transition_matrix(node.length.unwrap_or(0.0), rate);
                    u8::from(rng.random::<f64>() < pm[state[p] as usize][1])
                }
            };
        }
        for (&l, row) in leaves.iter().zip(rows.iter_mut()) {
            row.push(if state[l] == 1 { Cell::Present } else { Cell::Absent });
        }
    }
    if missing_fraction > 0.0 {
        for c in 0..n_chars {
            let original = rows[0][c];
            let mut masked = 0;
            for row in rows.iter_mut() {
                if rng.random::<f64>() < missing_fraction {
                    row[c] = Cell::Missing;
                    masked += 1;
                }
            }
            if masked == rows.len() {
                // A matrix character needs at least one observed cell.
                rows[0][c] = original;
            }
        }
    }
    let taxa = leaves
        .iter()
        .map(|&l| tree.node(l).label.clone().unwrap_or_default())
        .collect();
    BinaryMatrix::new(
        taxa,
        (1..=n_chars).map(|i| format!("sim{i}")).collect(),
        vec![Provenance::Cognate; n_chars],
        rows,
    )
}

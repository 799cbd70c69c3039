//! The two-state gain/loss substitution model and discrete Gamma rates.

use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Bounds used when estimating the Gamma shape by maximum likelihood.
pub const ALPHA_MIN: f64 = 0.0201;
pub const ALPHA_MAX: f64 = 100.0;

/// Time-reversible binary CTMC parameterized by the stationary frequency of
/// state 1. The rate matrix is scaled so that branch lengths count expected
/// changes per character.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryCtmc {
    pi1: f64,
}

impl BinaryCtmc {
    pub fn new(pi1: f64) -> Result<Self> {
        if !(pi1 > 0.0 && pi1 < 1.0) {
            return Err(Error::Domain(format!("stationary frequency {pi1} outside (0, 1)")));
        }
        Ok(BinaryCtmc { pi1 })
    }

    pub fn pi0(&self) -> f64 {
        1.0 - self.pi1
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    pub fn frequencies(&self) -> [f64; 2] {
        [self.pi0(), self.pi1]
    }

    /// Normalization constant `1 / (2 pi0 pi1)`.
    pub fn mu(&self) -> f64 {
        1.0 / (2.0 * self.pi0() * self.pi1)
    }

    /// Rate matrix (rows sum to zero).
    pub fn rate_matrix(&self) -> [[f64; 2]; 2] {
        let mu = self.mu();
        [
            [-mu * self.pi1, mu * self.pi1],
            [mu * self.pi0(), -mu * self.pi0()],
        ]
    }

    /// `P(t * r)`, with `P[i][j]` the probability of ending in `j` from `i`.
    pub fn transition_matrix(&self, t: f64, r: f64) -> [[f64; 2]; 2] {
        let (p0, p1) = (self.pi0(), self.pi1);
        let e = (-self.mu() * r * t).exp();
        [[p0 + p1 * e, p1 * (1.0 - e)], [p0 * (1.0 - e), p1 + p0 * e]]
    }
}

impl Default for BinaryCtmc {
    fn default() -> Self {
        BinaryCtmc { pi1: 0.5 }
    }
}

/// Free function form of [`BinaryCtmc::transition_matrix`].
pub fn transition_matrix(model: &BinaryCtmc, t: f64, r: f64) -> [[f64; 2]; 2] {
    model.transition_matrix(t, r)
}

/// Equal-weight rate categories. `alpha` is `None` for the single-rate model.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaRates {
    pub alpha: Option<f64>,
    pub rates: Vec<f64>,
}

impl GammaRates {
    /// One category with rate 1 (no rate heterogeneity).
    pub fn uniform() -> Self {
        GammaRates {
            alpha: None,
            rates: vec![1.0],
        }
    }

    pub fn k(&self) -> usize {
        self.rates.len()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.rates.len() as f64
    }
}

/// Quantile of Gamma(shape, 1) at probability `p`, by safeguarded Newton
/// iteration on `log x`.
fn gamma_quantile(shape: f64, p: f64) -> f64 {
    let ln_norm = ln_gamma(shape);
    // Bracket in log space.
    let (mut lo, mut hi) = (-745.0f64, (shape + 50.0 * shape.sqrt() + 50.0).ln());
    let mut x = (shape.max(1e-3)).ln();
    for _ in 0..200 {
        let value = x.exp();
        let f = gamma_lr(shape, value) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if f.abs() < 1e-15 || hi - lo < 1e-14 {
            break;
        }
        // d/d(log x) of the CDF is the density times x.
        let ln_deriv = shape * x - value - ln_norm;
        let step = f / ln_deriv.exp();
        let next = x - step;
        x = if step.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    x.exp()
}

/// Equal-probability discretization of a mean-one Gamma distribution with
/// shape `alpha` into `k` categories, each represented by its conditional
/// mean.
pub fn discretize_gamma(alpha: f64, k: usize) -> Result<GammaRates> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("Gamma shape must be positive, got {alpha}")));
    }
    if k == 0 {
        return Err(Error::Domain("at least one rate category required".into()));
    }
    let kf = k as f64;
    // With X ~ Gamma(alpha, rate alpha) and Y = alpha X ~ Gamma(alpha, 1),
    // E[X; Y < y] = P(alpha + 1, y).
    let mut rates = Vec::with_capacity(k);
    let mut prev = 0.0;
    for i in 1..=k {
        let upper = if i == k {
            1.0
        } else {
            gamma_lr(alpha + 1.0, gamma_quantile(alpha, i as f64 / kf))
        };
        rates.push(kf * (upper - prev));
        prev = upper;
    }
    let mean = rates.iter().sum::<f64>() / kf;
    for r in &mut rates {
        *r /= mean;
    }
    Ok(GammaRates {
        alpha: Some(alpha),
        rates,
    })
}

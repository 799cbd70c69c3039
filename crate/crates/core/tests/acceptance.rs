//! Acceptance criteria, each checked against an oracle written here
//! independently of the library. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.
//!
//! `LEXIPHYLO_ACCEPTANCE=3,5` restricts the run to some criteria.
//! `LEXIPHYLO_DRAVLEX=<wordlist.tsv>` adds the Dravlex summary check.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lexiphylo::corpus::{parse_wordlist, summarize};
use lexiphylo::encode::{BinaryMatrix, Cell, Provenance};
use lexiphylo::eval::{gqd, majority_consensus, quartet_topology, tree_splits, QuartetTopology};
use lexiphylo::phylo::fit::{fit_parameters, FitOptions};
use lexiphylo::phylo::likelihood::log_likelihood;
use lexiphylo::phylo::mcmc::{mcmc_run, AlphaPrior, McmcConfig};
use lexiphylo::phylo::model::{discretize_gamma, BinaryCtmc, GammaRates};
use lexiphylo::phylo::search::{ml_search, MlConfig};
use lexiphylo::phylo::simulate::simulate_matrix;
use lexiphylo::phylo::tree::{parse_newick, Tree};
use lexiphylo::pipeline::{run_pipeline, PipelineConfig};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: &str) -> Outcome {
    check(
        elapsed < limit,
        format!("{detail}; {:.1}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

// Oracle trees: node i has children and a branch length to its parent.
// Leaves are 0..n, the root is the last node.

#[derive(Clone)]
struct OTree {
    children: Vec<Vec<usize>>,
    length: Vec<f64>,
    labels: Vec<String>,
}

impl OTree {
    fn n_leaves(&self) -> usize {
        self.labels.len()
    }

    fn root(&self) -> usize {
        self.children.len() - 1
    }

    fn newick(&self, lengths: bool) -> String {
        fn rec(t: &OTree, v: usize, lengths: bool, out: &mut String) {
            if v < t.n_leaves() {
                out.push_str(&t.labels[v]);
            } else {
                out.push('(');
                for (i, &c) in t.children[v].iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    rec(t, c, lengths, out);
                }
                out.push(')');
            }
            if lengths && v != t.root() {
                out.push_str(&format!(":{:e}", t.length[v]));
            }
        }
        let mut s = String::new();
        rec(self, self.root(), lengths, &mut s);
        s.push(';');
        s
    }

    fn tree(&self, lengths: bool) -> Tree {
        parse_newick(&self.newick(lengths)).unwrap()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.children.len()];
        for (v, cs) in self.children.iter().enumerate() {
            for &c in cs {
                adj[v].push(c);
                adj[c].push(v);
            }
        }
        adj
    }
}

/// Random rooted binary tree by repeatedly joining two random subtrees.
fn random_tree(rng: &mut ChaCha8Rng, n: usize, lengths: (f64, f64)) -> OTree {
    let labels: Vec<String> = (0..n).map(|i| format!("T{i}")).collect();
    let mut children = vec![Vec::new(); n];
    let mut length: Vec<f64> = (0..n).map(|_| rng.random_range(lengths.0..=lengths.1)).collect();
    let mut pool: Vec<usize> = (0..n).collect();
    while pool.len() > 1 {
        let a = pool.swap_remove(rng.random_range(0..pool.len()));
        let b = pool.swap_remove(rng.random_range(0..pool.len()));
        children.push(vec![a, b]);
        length.push(rng.random_range(lengths.0..=lengths.1));
        pool.push(children.len() - 1);
    }
    OTree {
        children,
        length,
        labels,
    }
}

// Two-state oracle: generator built from pi and exponentiated by scaling
// and squaring with a Taylor series.

fn expm2(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
        let mut z = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                z[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
            }
        }
        z
    };
    let norm = a.iter().map(|r| r[0].abs() + r[1].abs()).fold(0.0, f64::max);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let scale = 2f64.powi(s);
    let b = [[a[0][0] / scale, a[0][1] / scale], [a[1][0] / scale, a[1][1] / scale]];
    let mut result = [[1.0, 0.0], [0.0, 1.0]];
    let mut term = result;
    for k in 1..30 {
        term = mul(term, b);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        result = mul(result, result);
    }
    result
}

fn oracle_p(pi1: f64, t: f64, r: f64) -> [[f64; 2]; 2] {
    let pi0 = 1.0 - pi1;
    // Expected rate of change at stationarity is pi0*q01 + pi1*q10 = 1.
    let scale = 1.0 / (2.0 * pi0 * pi1);
    let q = [[-pi1 * scale, pi1 * scale], [pi0 * scale, -pi0 * scale]];
    expm2([[q[0][0] * t * r, q[0][1] * t * r], [q[1][0] * t * r, q[1][1] * t * r]])
}

/// Sum over every assignment of states to unobserved nodes.
fn brute_force_loglik(t: &OTree, columns: &[Vec<Option<u8>>], pi1: f64, rates: &[f64]) -> f64 {
    let n_nodes = t.children.len();
    let pi = [1.0 - pi1, pi1];
    let mut parent = vec![usize::MAX; n_nodes];
    for (v, cs) in t.children.iter().enumerate() {
        for &c in cs {
            parent[c] = v;
        }
    }
    let mut total = 0.0;
    for col in columns {
        let mut site = 0.0;
        for &r in rates {
            let p: Vec<[[f64; 2]; 2]> = (0..n_nodes).map(|v| oracle_p(pi1, t.length[v], r)).collect();
            let mut sum = 0.0;
            for mask in 0u32..(1 << n_nodes) {
                let state = |v: usize| ((mask >> v) & 1) as usize;
                if (0..t.n_leaves()).any(|l| col[l].is_some_and(|s| s as usize != state(l))) {
                    continue;
                }
                let mut prob = pi[state(t.root())];
                for v in 0..n_nodes {
                    if v != t.root() {
                        prob *= p[v][state(parent[v])][state(v)];
                    }
                }
                sum += prob;
            }
            site += sum / rates.len() as f64;
        }
        total += site.ln();
    }
    total
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(2..=5);
        let n_chars = rng.random_range(1..=6);
        let t = random_tree(&mut rng, n, (0.01, 2.0));
        let pi1 = rng.random_range(0.1..=0.9);
        let alpha = [0.5, 5.0, 100.0][rng.random_range(0..3)];
        let gamma = discretize_gamma(alpha, 4).unwrap();
        let mut columns = Vec::new();
        while columns.len() < n_chars {
            let col: Vec<Option<u8>> = (0..n)
                .map(|_| match rng.random_range(0..5) {
                    0 => None,
                    k => Some((k % 2) as u8),
                })
                .collect();
            if col.iter().any(Option::is_some) {
                columns.push(col);
            }
        }
        let rows = (0..n)
            .map(|l| {
                columns
                    .iter()
                    .map(|c| match c[l] {
                        None => Cell::Missing,
                        Some(0) => Cell::Absent,
                        Some(_) => Cell::Present,
                    })
                    .collect()
            })
            .collect();
        let matrix = BinaryMatrix::new(
            t.labels.clone(),
            (0..n_chars).map(|i| format!("c{i}")).collect(),
            vec![Provenance::Cognate; n_chars],
            rows,
        )
        .unwrap();
        let ours = log_likelihood(&t.tree(true), &matrix, &BinaryCtmc::new(pi1).unwrap(), &gamma).unwrap();
        let oracle = brute_force_loglik(&t, &columns, pi1, &gamma.rates);
        worst = worst.max((ours - oracle).abs() / oracle.abs());
    }
    let elapsed = start.elapsed();
    if worst > 1e-10 {
        return Err(format!("max relative error {worst:.2e} > 1e-10"));
    }
    within(elapsed, Duration::from_secs(10), &format!("50 instances, max relative error {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst, mut worst_balance): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let pi1 = rng.random_range(0.02..0.98);
        let t = rng.random_range(0.0..5.0);
        let r = rng.random_range(0.01..5.0);
        let model = BinaryCtmc::new(pi1).unwrap();
        let ours = model.transition_matrix(t, r);
        let oracle = oracle_p(pi1, t, r);
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((ours[i][j] - oracle[i][j]).abs());
            }
        }
        let pi = [1.0 - pi1, pi1];
        worst_balance = worst_balance.max((pi[0] * ours[0][1] - pi[1] * ours[1][0]).abs());
    }
    check(
        worst <= 1e-10 && worst_balance <= 1e-12,
        format!("100 triples, max |closed form - expm| {worst:.2e}, max detailed-balance gap {worst_balance:.2e}"),
    )
}

/// Composite Simpson rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn criterion_3() -> Outcome {
    // Gamma(1, 1) is Exp(1): quantiles are -ln(1 - p); category means by
    // integrating x e^{-x} numerically between them.
    let k = 4;
    let q: Vec<f64> = (0..=k)
        .map(|i| if i == k { 60.0 } else { -(1.0 - i as f64 / k as f64).ln() })
        .collect();
    let oracle: Vec<f64> = (0..k)
        .map(|i| k as f64 * simpson(|x| x * (-x).exp(), q[i], q[i + 1], 200_000))
        .collect();
    let ours = discretize_gamma(1.0, 4).unwrap().rates;
    let published = [0.1369, 0.4768, 1.0000, 2.3863];
    let vs_oracle = ours.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let vs_published = ours.iter().zip(&published).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut worst_mean: f64 = 0.0;
    for alpha in [0.05, 0.5, 1.0, 5.0, 50.0, 100.0] {
        let rates = discretize_gamma(alpha, 4).unwrap().rates;
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        worst_mean = worst_mean.max((mean - 1.0).abs());
    }
    check(
        vs_oracle <= 1e-3 && vs_published <= 1e-3 && worst_mean <= 1e-8,
        format!(
            "rates {:?}; max diff to integration {vs_oracle:.1e}, to published {vs_published:.1e}; max |mean - 1| {worst_mean:.1e}",
            ours.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>()
        ),
    )
}

/// Four-point condition on edge counts.
fn oracle_quartet(dist: &[Vec<usize>], q: [usize; 4]) -> Option<usize> {
    let [a, b, c, d] = q;
    let sums = [dist[a][b] + dist[c][d], dist[a][c] + dist[b][d], dist[a][d] + dist[b][c]];
    let min = *sums.iter().min().unwrap();
    let winners: Vec<usize> = (0..3).filter(|&i| sums[i] == min).collect();
    (winners.len() == 1).then(|| winners[0])
}

fn leaf_distances(t: &OTree) -> Vec<Vec<usize>> {
    let adj = t.adjacency();
    (0..t.n_leaves())
        .map(|s| {
            let mut d = vec![usize::MAX; adj.len()];
            d[s] = 0;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if d[w] == usize::MAX {
                        d[w] = d[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
            d.truncate(t.n_leaves());
            d
        })
        .collect()
}

fn oracle_gqd(inferred: &OTree, gold: &OTree) -> (u64, u64) {
    let (di, dg) = (leaf_distances(inferred), leaf_distances(gold));
    let n = gold.n_leaves();
    let (mut butterflies, mut discordant) = (0, 0);
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    if let Some(g) = oracle_quartet(&dg, [a, b, c, d]) {
                        butterflies += 1;
                        if oracle_quartet(&di, [a, b, c, d]) != Some(g) {
                            discordant += 1;
                        }
                    }
                }
            }
        }
    }
    (butterflies, discordant)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for i in 0..100 {
        let n = rng.random_range(5..=12);
        let gold = random_tree(&mut rng, n, (1.0, 1.0));
        let inferred = random_tree(&mut rng, n, (1.0, 1.0));
        let ours = gqd(&inferred.tree(false), &gold.tree(false)).map_err(|e| e.to_string())?;
        let (butterflies, discordant) = oracle_gqd(&inferred, &gold);
        if ours.butterflies_gold != butterflies
            || ours.discordant != discordant
            || ours.distance != discordant as f64 / butterflies as f64
        {
            return Err(format!(
                "pair {i} (n = {n}): library {}/{}, oracle {discordant}/{butterflies}",
                ours.discordant, ours.butterflies_gold
            ));
        }
        let identity = gqd(&gold.tree(false), &gold.tree(false)).map_err(|e| e.to_string())?;
        if identity.distance != 0.0 {
            return Err(format!("pair {i}: identity gives {}", identity.distance));
        }
    }
    let gold = parse_newick("((A,B),C,D,E);").unwrap();
    let inferred = parse_newick("(((A,C),B),(D,E));").unwrap();
    let worked = gqd(&inferred, &gold).map_err(|e| e.to_string())?;
    check(
        worked.distance == 2.0 / 3.0 && worked.discordant == 2 && worked.butterflies_gold == 3,
        format!("100 random pairs match brute force exactly; polytomy example {}/{}", worked.discordant, worked.butterflies_gold),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let (mut recovered, mut alpha_ok) = (0, 0);
    let mut alphas = Vec::new();
    for seed in 1..=10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let truth = random_tree(&mut rng, 10, (0.05, 0.3)).tree(true);
        let gamma = discretize_gamma(1.0, 4).unwrap();
        let matrix = simulate_matrix(&truth, &BinaryCtmc::new(0.4).unwrap(), &gamma, 2000, 0.0, seed).unwrap();
        let result = ml_search(&matrix, &MlConfig { seed, ..MlConfig::default() }).map_err(|e| e.to_string())?;
        let best = result.best();
        if gqd(&best.tree, &truth).map_err(|e| e.to_string())?.distance == 0.0 {
            recovered += 1;
        }
        let alpha = best.gamma.alpha.unwrap_or(f64::NAN);
        if (0.5..=2.0).contains(&alpha) {
            alpha_ok += 1;
        }
        alphas.push(format!("{alpha:.2}"));
    }
    let elapsed = start.elapsed();
    let detail = format!("topology recovered {recovered}/10, alpha within 2x {alpha_ok}/10 ({})", alphas.join(" "));
    if recovered < 9 || alpha_ok < 8 {
        return Err(detail);
    }
    within(elapsed, Duration::from_secs(120), &detail)
}

fn criterion_6() -> Outcome {
    // Under homogeneous rates the maximum sits on the upper alpha bound only
    // about half the time at a few thousand characters; interior optima
    // move toward the bound as the data grow, hence the large matrices.
    let fit_alpha = |gamma: &GammaRates, seed: u64| -> Result<f64, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let truth = random_tree(&mut rng, 10, (0.05, 0.3)).tree(true);
        let matrix = simulate_matrix(&truth, &BinaryCtmc::new(0.4).unwrap(), gamma, 100_000, 0.0, seed)
            .map_err(|e| e.to_string())?;
        let fit = fit_parameters(
            &truth,
            &matrix,
            BinaryCtmc::default(),
            discretize_gamma(1.0, 4).unwrap(),
            &FitOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        Ok(fit.gamma.alpha.unwrap())
    };
    let (mut high, mut low) = (Vec::new(), Vec::new());
    for seed in 1..=10 {
        high.push(fit_alpha(&GammaRates::uniform(), seed)?);
        low.push(fit_alpha(&discretize_gamma(0.5, 4).unwrap(), seed)?);
    }
    let n_high = high.iter().filter(|&&a| a > 99.0).count();
    let n_low = low.iter().filter(|&&a| a < 20.0).count();
    let fmt = |v: &[f64]| v.iter().map(|a| format!("{a:.2}")).collect::<Vec<_>>().join(" ");
    let mut detail = format!(
        "10 taxa x 100000 characters; homogeneous: alpha > 99 in {n_high}/10 ({}); alpha=0.5: alpha < 20 in {n_low}/10 ({})",
        fmt(&high),
        fmt(&low)
    );
    let mut ok = n_high >= 8 && n_low >= 8;
    match std::env::var_os("LEXIPHYLO_DRAVLEX") {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
            let s = summarize(&parse_wordlist(&text).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            ok &= (s.words, s.concepts, s.languages) == (1341, 100, 20);
            detail.push_str(&format!("; Dravlex {} words, {} concepts, {} languages", s.words, s.concepts, s.languages));
        }
        None => detail.push_str("; Dravlex check skipped (LEXIPHYLO_DRAVLEX unset)"),
    }
    check(ok, detail)
}

/// Kolmogorov-Smirnov statistic and asymptotic p-value against a CDF.
fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

fn dummy_matrix(taxa: &[&str]) -> BinaryMatrix {
    let rows = (0..taxa.len())
        .map(|i| (0..5).map(|c| if (i + c) % 2 == 0 { Cell::Present } else { Cell::Absent }).collect())
        .collect();
    BinaryMatrix::new(
        taxa.iter().map(|s| s.to_string()).collect(),
        (0..5).map(|c| format!("c{c}")).collect(),
        vec![Provenance::Cognate; 5],
        rows,
    )
    .unwrap()
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let prior = McmcConfig {
        prior_only: true,
        runs: 4,
        generations_max: 3_500_000,
        sample_every: 1000,
        asdsf_target: 0.0,
        seed: 7,
        ..McmcConfig::default()
    };
    let result = mcmc_run(&dummy_matrix(&["A", "B", "C", "D"]), &prior).map_err(|e| e.to_string())?;
    let samples: Vec<_> = result.runs.iter().flat_map(|r| r.retained(prior.burnin_fraction)).collect();
    let alphas: Vec<f64> = samples.iter().map(|s| s.alpha.unwrap()).collect();
    let roots: Vec<f64> = samples.iter().map(|s| s.tree.root_age()).collect();
    let mean_alpha = alphas.iter().sum::<f64>() / alphas.len() as f64;
    let (_, p_alpha) = ks_test(&alphas, |a| ((a - 0.01) / (100.0 - 0.01)).clamp(0.0, 1.0));
    let (_, p_root) = ks_test(&roots, |t| 1.0 - (-t).exp());
    let mut counts: std::collections::HashMap<QuartetTopology, usize> = Default::default();
    for s in &samples {
        let q = quartet_topology(&s.substitution_tree(), ["A", "B", "C", "D"]).map_err(|e| e.to_string())?;
        *counts.entry(q).or_default() += 1;
    }
    let freqs: Vec<f64> = [QuartetTopology::AbCd, QuartetTopology::AcBd, QuartetTopology::AdBc]
        .iter()
        .map(|q| *counts.get(q).unwrap_or(&0) as f64 / samples.len() as f64)
        .collect();
    let prior_ok = samples.len() >= 10_000
        && (45.0..=55.0).contains(&mean_alpha)
        && p_alpha > 0.01
        && p_root > 0.01
        && freqs.iter().all(|f| (f - 1.0 / 3.0).abs() <= 0.05);
    let prior_detail = format!(
        "prior: {} samples, alpha mean {mean_alpha:.2}, KS p alpha {p_alpha:.3} root age {p_root:.3}, topology freqs {:.3}/{:.3}/{:.3}",
        samples.len(),
        freqs[0],
        freqs[1],
        freqs[2]
    );

    let truth = parse_newick("((((A:0.1,B:0.1):0.1,C:0.2):0.15,(D:0.15,E:0.15):0.2):0.1,F:0.45);").unwrap();
    let gamma = discretize_gamma(1.0, 4).unwrap();
    let matrix = simulate_matrix(&truth, &BinaryCtmc::new(0.4).unwrap(), &gamma, 500, 0.0, 77).map_err(|e| e.to_string())?;
    let config = McmcConfig {
        generations_max: 500_000,
        alpha_prior: AlphaPrior::Uniform { lower: 0.01, upper: 100.0 },
        seed: 77,
        ..McmcConfig::default()
    };
    let result = mcmc_run(&matrix, &config).map_err(|e| e.to_string())?;
    let consensus = majority_consensus(&result.posterior).map_err(|e| e.to_string())?;
    let same = tree_splits(&consensus).map_err(|e| e.to_string())? == tree_splits(&truth).map_err(|e| e.to_string())?;
    let data_ok = result.converged && result.asdsf.is_some_and(|a| a < 0.01) && result.generations < 500_000 && same;
    let detail = format!(
        "{prior_detail}; simulated data: converged {} after {} generations (ASDSF {:.4}), consensus equals truth: {same}",
        result.converged,
        result.generations,
        result.asdsf.unwrap_or(f64::NAN)
    );
    if !(prior_ok && data_ok) {
        return Err(detail);
    }
    within(start.elapsed(), Duration::from_secs(300), &detail)
}

fn read_dir_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn criterion_8() -> Outcome {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy.toml");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    let mut trees = Vec::new();
    for run in ["first", "second"] {
        let mut config = PipelineConfig::load(&data).map_err(|e| e.to_string())?;
        config.output = tmp.path().join(run);
        reports.push(run_pipeline(&config).map_err(|e| format!("{e:#}"))?.report);
        trees.push(read_dir_bytes(&config.output));
    }
    let identical = trees[0] == trees[1] && !trees[0].is_empty();
    let report = &reports[0];
    let ml_gqd: Vec<(String, String)> = report
        .iter()
        .filter(|r| r.statistic == "ml_gqd")
        .map(|r| (r.character_type.clone(), r.value.clone()))
        .collect();
    let mut order: Vec<&str> = Vec::new();
    for r in report {
        if order.last() != Some(&r.character_type.as_str()) {
            order.push(&r.character_type);
        }
    }
    let ok = identical
        && ml_gqd.len() == 3
        && ml_gqd.iter().all(|(_, v)| v.parse::<f64>() == Ok(0.0))
        && order == ["cognates", "patterns", "combined"];
    check(
        ok,
        format!(
            "{} artifacts byte-identical: {identical}; ML GQD {}; report order {}",
            trees[0].len(),
            ml_gqd.iter().map(|(t, v)| format!("{t}={v}")).collect::<Vec<_>>().join(" "),
            order.join(",")
        ),
    )
}

fn main() {
    let selected: Option<Vec<usize>> = std::env::var("LEXIPHYLO_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 8] = [
        (1, "likelihood oracle equivalence", criterion_1),
        (2, "transition matrix", criterion_2),
        (3, "gamma discretization", criterion_3),
        (4, "GQD oracle", criterion_4),
        (5, "simulation round trip", criterion_5),
        (6, "rate heterogeneity regimes", criterion_6),
        (7, "MCMC calibration", criterion_7),
        (8, "pipeline determinism and recovery", criterion_8),
    ];
    let mut failed = 0;
    for (i, name, run) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&i)) {
            continue;
        }
        match run() {
            Ok(detail) => println!("PASS criterion {i} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {i} ({name}): {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Tree comparison: splits, the ASDSF convergence diagnostic, quartet
//! topologies and the generalized quartet distance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::phylo::tree::{Node, Tree};

/// A non-trivial bipartition of a taxon set. Stored as the sorted side that
/// does not contain the alphabetically first taxon.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Split {
    side: Vec<String>,
}

impl Split {
    /// Canonicalizes `side` against the full taxon set. Returns `None` for
    /// trivial or degenerate bipartitions.
    pub fn new(side: &BTreeSet<&str>, taxa: &BTreeSet<&str>) -> Option<Split> {
        let first = *taxa.iter().next()?;
        let key: Vec<String> = if side.contains(first) {
            taxa.difference(side).map(|s| s.to_string()).collect()
        } else {
            side.iter().map(|s| s.to_string()).collect()
        };
        (key.len() >= 2 && key.len() + 2 <= taxa.len()).then_some(Split { side: key })
    }

    pub fn side(&self) -> &[String] {
        &self.side
    }

    pub fn contains(&self, taxon: &str) -> bool {
        self.side.binary_search_by(|s| s.as_str().cmp(taxon)).is_ok()
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.side.join(","))
    }
}

/// Leaf label sets below each node, by node id.
fn clusters(tree: &Tree) -> Vec<BTreeSet<&str>> {
    let mut below: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); tree.len()];
    for n in tree.postorder() {
        let node = tree.node(n);
        if node.children.is_empty() {
            if let Some(l) = &node.label {
                below[n].insert(l.as_str());
            }
        } else {
            let mut set = BTreeSet::new();
            for &c in &node.children {
                set.extend(below[c].iter().copied());
            }
            below[n] = set;
        }
    }
    below
}

/// Splits of the unrooted tree, one per internal edge.
pub fn tree_splits(tree: &Tree) -> Result<BTreeSet<Split>> {
    let below = clusters(tree);
    let taxa = &below[tree.root()];
    if taxa.len() < 4 {
        return Err(Error::Validation(format!("splits need at least 4 taxa, got {}", taxa.len())));
    }
    Ok(below
        .iter()
        .enumerate()
        .filter(|&(n, _)| n != tree.root())
        .filter_map(|(_, side)| Split::new(side, taxa))
        .collect())
}

/// Average standard deviation of split frequencies across runs.
pub fn asdsf(runs: &[Vec<Tree>], min_freq: f64) -> Result<f64> {
    if runs.len() < 2 {
        return Err(Error::Validation("ASDSF needs at least 2 runs".into()));
    }
    if runs.iter().any(|r| r.is_empty()) {
        return Err(Error::Validation("every run needs at least one tree".into()));
    }
    let mut taxa: Option<BTreeSet<String>> = None;
    let mut split_runs = Vec::with_capacity(runs.len());
    for run in runs {
        let mut sets = Vec::with_capacity(run.len());
        for tree in run {
            let labels: BTreeSet<String> = tree.leaf_labels().into_iter().collect();
            match &taxa {
                None => taxa = Some(labels),
                Some(t) if *t != labels => {
                    return Err(Error::Validation("runs have different taxon sets".into()))
                }
                Some(_) => {}
            }
            sets.push(tree_splits(tree)?);
        }
        split_runs.push(sets);
    }
    let views: Vec<&[BTreeSet<Split>]> = split_runs.iter().map(Vec::as_slice).collect();
    asdsf_from_splits(&views, min_freq)
}

/// [`asdsf`] on precomputed split sets, one per sampled tree.
pub fn asdsf_from_splits(runs: &[&[BTreeSet<Split>]], min_freq: f64) -> Result<f64> {
    if runs.len() < 2 {
        return Err(Error::Validation("ASDSF needs at least 2 runs".into()));
    }
    if runs.iter().any(|r| r.is_empty()) {
        return Err(Error::Validation("every run needs at least one tree".into()));
    }
    let mut freqs: BTreeMap<&Split, Vec<f64>> = BTreeMap::new();
    for (i, run) in runs.iter().enumerate() {
        for sets in run.iter() {
            for split in sets {
                freqs.entry(split).or_insert_with(|| vec![0.0; runs.len()])[i] += 1.0 / run.len() as f64;
            }
        }
    }
    let m = runs.len() as f64;
    let sds: Vec<f64> = freqs
        .values()
        .filter(|f| f.iter().any(|&x| x >= min_freq))
        .map(|f| {
            let mean = f.iter().sum::<f64>() / m;
            (f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        })
        .collect();
    Ok(if sds.is_empty() {
        0.0
    } else {
        sds.iter().sum::<f64>() / sds.len() as f64
    })
}

/// Induced topology on four taxa `(a, b, c, d)`, named relative to that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuartetTopology {
    AbCd,
    AcBd,
    AdBc,
    Star,
}

impl fmt::Display for QuartetTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuartetTopology::AbCd => "AB|CD",
            QuartetTopology::AcBd => "AC|BD",
            QuartetTopology::AdBc => "AD|BC",
            QuartetTopology::Star => "STAR",
        })
    }
}

/// Split membership of each taxon, for fast quartet queries.
struct SplitTable {
    index: BTreeMap<String, usize>,
    /// `sides[s][t]` is true when taxon `t` is on the key side of split `s`.
    sides: Vec<Vec<bool>>,
}

impl SplitTable {
    fn new(tree: &Tree) -> SplitTable {
        let below = clusters(tree);
        let taxa = &below[tree.root()];
        let index: BTreeMap<String, usize> = taxa.iter().enumerate().map(|(i, t)| (t.to_string(), i)).collect();
        let sides = below
            .iter()
            .enumerate()
            .filter(|&(n, side)| n != tree.root() && side.len() >= 2 && side.len() + 2 <= taxa.len())
            .map(|(_, side)| {
                let mut row = vec![false; taxa.len()];
                for t in side {
                    row[index[*t]] = true;
                }
                row
            })
            .collect();
        SplitTable { index, sides }
    }

    fn get(&self, taxon: &str) -> Result<usize> {
        self.index
            .get(taxon)
            .copied()
            .ok_or_else(|| Error::UnknownTaxon(format!("{taxon} is not in the tree")))
    }

    fn quartet(&self, [a, b, c, d]: [usize; 4]) -> QuartetTopology {
        for s in &self.sides {
            let (x, y, z, w) = (s[a], s[b], s[c], s[d]);
            if x == y && z == w && x != z {
                return QuartetTopology::AbCd;
            }
            if x == z && y == w && x != y {
                return QuartetTopology::AcBd;
            }
            if x == w && y == z && x != y {
                return QuartetTopology::AdBc;
            }
        }
        QuartetTopology::Star
    }
}

pub fn quartet_topology(tree: &Tree, quartet: [&str; 4]) -> Result<QuartetTopology> {
    let table = SplitTable::new(tree);
    let mut idx = [0; 4];
    for (slot, taxon) in idx.iter_mut().zip(quartet) {
        *slot = table.get(taxon)?;
    }
    Ok(table.quartet(idx))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GqdResult {
    pub distance: f64,
    pub butterflies_gold: u64,
    pub discordant: u64,
    pub common_taxa: usize,
}

/// Generalized quartet distance: the fraction of quartets resolved in the
/// gold tree that the inferred tree resolves differently. Both trees are
/// restricted to their shared taxa.
pub fn gqd(inferred: &Tree, gold: &Tree) -> Result<GqdResult> {
    let ti = SplitTable::new(inferred);
    let tg = SplitTable::new(gold);
    let common: Vec<&String> = tg.index.keys().filter(|t| ti.index.contains_key(*t)).collect();
    if common.len() != tg.index.len() || common.len() != ti.index.len() {
        log::warn!(
            "comparing trees on {} shared taxa ({} inferred, {} gold)",
            common.len(),
            ti.index.len(),
            tg.index.len()
        );
    }
    if common.len() < 4 {
        return Err(Error::Validation(format!("only {} shared taxa, need 4", common.len())));
    }
    let gi: Vec<usize> = common.iter().map(|t| tg.index[*t]).collect();
    let ii: Vec<usize> = common.iter().map(|t| ti.index[*t]).collect();
    let n = common.len();
    let (mut butterflies, mut discordant) = (0u64, 0u64);
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let g = tg.quartet([gi[a], gi[b], gi[c], gi[d]]);
                    if g == QuartetTopology::Star {
                        continue;
                    }
                    butterflies += 1;
                    if ti.quartet([ii[a], ii[b], ii[c], ii[d]]) != g {
                        discordant += 1;
                    }
                }
            }
        }
    }
    if butterflies == 0 {
        return Err(Error::Undefined("gold tree resolves no quartet".into()));
    }
    Ok(GqdResult {
        distance: discordant as f64 / butterflies as f64,
        butterflies_gold: butterflies,
        discordant,
        common_taxa: n,
    })
}

/// Median with the midpoint convention for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn posterior_gqd_median(samples: &[Tree], gold: &Tree) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Validation("no tree samples".into()));
    }
    let mut d = samples
        .iter()
        .map(|t| gqd(t, gold).map(|r| r.distance))
        .collect::<Result<Vec<_>>>()?;
    Ok(median(&mut d).expect("non-empty"))
}

/// Majority-rule consensus (splits in more than half of the trees), as an
/// unrooted tree without branch lengths.
pub fn majority_consensus(trees: &[Tree]) -> Result<Tree> {
    let first = trees.first().ok_or_else(|| Error::Validation("no trees".into()))?;
    let taxa: BTreeSet<String> = first.leaf_labels().into_iter().collect();
    let mut counts: BTreeMap<Split, usize> = BTreeMap::new();
    for t in trees {
        if t.leaf_labels().into_iter().collect::<BTreeSet<_>>() != taxa {
            return Err(Error::Validation("trees have different taxon sets".into()));
        }
        for s in tree_splits(t)? {
            *counts.entry(s).or_default() += 1;
        }
    }
    let mut majority: Vec<Split> = counts
        .into_iter()
        .filter(|&(_, c)| 2 * c > trees.len())
        .map(|(s, _)| s)
        .collect();
    // Key sides exclude the first taxon, so they nest; add larger ones first.
    majority.sort_by(|a, b| b.side.len().cmp(&a.side.len()).then(a.cmp(b)));
    let mut nodes = vec![Node {
        label: None,
        length: None,
        parent: None,
        children: Vec::new(),
    }];
    let mut cluster_node: Vec<(usize, &Split)> = Vec::new();
    let smallest_container = |cluster_node: &[(usize, &Split)], taxon: &str| -> usize {
        cluster_node
            .iter()
            .rev()
            .find(|(_, s)| s.contains(taxon))
            .map_or(0, |&(n, _)| n)
    };
    for s in &majority {
        let parent = smallest_container(&cluster_node, &s.side[0]);
        let id = nodes.len();
        nodes.push(Node {
            label: None,
            length: None,
            parent: Some(parent),
            children: Vec::new(),
        });
        nodes[parent].children.push(id);
        cluster_node.push((id, s));
    }
    for t in &taxa {
        let parent = smallest_container(&cluster_node, t);
        let id = nodes.len();
        nodes.push(Node {
            label: Some(t.clone()),
            length: None,
            parent: Some(parent),
            children: Vec::new(),
        });
        nodes[parent].children.push(id);
    }
    let mut tree = Tree::from_nodes(nodes, false)?;
    tree.sort_children_by_label();
    Ok(tree)
}

/// One line of the evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub character_type: String,
    pub statistic: String,
    pub value: String,
}

pub fn write_report(rows: &[ReportRow]) -> String {
    let mut out = String::from("dataset\tcharacter_type\tstatistic\tvalue\n");
    for r in rows {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", r.dataset, r.character_type, r.statistic, r.value));
    }
    out
}

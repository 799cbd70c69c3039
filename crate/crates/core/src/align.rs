//! Phonetic alignment of cognate sets.
//!
//! Pairwise alignment is a Needleman-Wunsch global alignment with a linear
//! gap penalty, scoring sounds by their sound class. Multiple alignment is
//! progressive: an average-linkage guide tree over pairwise distances
//! decides the merge order, and clusters are merged as profiles.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::corpus::{CognateKey, Wordlist};
use crate::error::{Error, Result};

pub const GAP: &str = "-";

/// Coarse sound classes used by the default scoring scheme.
const DEFAULT_CLASSES: &[(&str, &[&str])] = &[
    (
        "V",
        &[
            "a", "e", "i", "o", "u", "y", "ɛ", "ɔ", "ə", "ɪ", "ʊ", "æ", "ɑ", "ɒ", "ø", "œ", "ɨ",
            "ʉ", "ɯ", "ɤ", "ʌ", "ɐ", "ɵ", "á", "é", "í", "ó", "ú", "à", "è", "ì", "ò", "ù", "ā",
            "ē", "ī", "ō", "ū", "ã", "ẽ", "ĩ", "õ", "ũ",
        ],
    ),
    ("P", &["p", "b", "ɓ", "β", "ɸ", "f", "v"]),
    ("T", &["t", "d", "ʈ", "ɖ", "ɗ", "θ", "ð"]),
    ("K", &["k", "g", "ɡ", "q", "ɢ", "c", "ɟ", "x", "ɣ", "χ", "ʁ"]),
    ("S", &["s", "z", "ʃ", "ʒ", "ɕ", "ʑ", "ʂ", "ʐ", "ç", "ʝ"]),
    ("C", &["ts", "dz", "tʃ", "dʒ", "tɕ", "dʑ", "ʈʂ", "ɖʐ", "ʦ", "ʣ", "ʧ", "ʤ"]),
    ("M", &["m", "ɱ"]),
    ("N", &["n", "ŋ", "ɲ", "ɳ", "ɴ"]),
    ("R", &["r", "l", "ɾ", "ɽ", "ɭ", "ʎ", "ɬ", "ɮ", "ʀ", "ɹ", "ɻ", "ʟ"]),
    ("W", &["w", "j", "ʋ", "ɥ", "ɰ"]),
    ("H", &["h", "ɦ", "ʔ", "ħ", "ʕ"]),
];

/// The bundled sound-class table.
pub fn default_class_map() -> HashMap<String, String> {
    DEFAULT_CLASSES
        .iter()
        .flat_map(|(class, symbols)| symbols.iter().map(|s| (s.to_string(), class.to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringScheme {
    pub match_score: f64,
    pub mismatch: f64,
    /// Penalty per gap position (negative).
    pub gap: f64,
    pub class_map: HashMap<String, String>,
}

impl Default for ScoringScheme {
    fn default() -> Self {
        ScoringScheme {
            match_score: 1.0,
            mismatch: -1.0,
            gap: -1.0,
            class_map: default_class_map(),
        }
    }
}

impl ScoringScheme {
    pub fn new(match_score: f64, mismatch: f64, gap: f64) -> Result<Self> {
        if match_score <= mismatch {
            return Err(Error::Domain("match score must exceed mismatch score".into()));
        }
        if gap >= 0.0 {
            return Err(Error::Domain("gap penalty must be negative".into()));
        }
        Ok(ScoringScheme {
            match_score,
            mismatch,
            gap,
            class_map: default_class_map(),
        })
    }

    /// Sound class of a symbol. Symbols missing from the table are looked up
    /// by their first character (so `tʰ` falls in the class of `t`), and
    /// otherwise form a class of their own.
    pub fn class_of<'a>(&'a self, symbol: &'a str) -> &'a str {
        if let Some(c) = self.class_map.get(symbol) {
            return c;
        }
        if let Some(first) = symbol.chars().next() {
            let mut buf = [0u8; 4];
            if let Some(c) = self.class_map.get(first.encode_utf8(&mut buf) as &str) {
                return c;
            }
        }
        symbol
    }

    pub fn substitution(&self, a: &str, b: &str) -> f64 {
        if self.class_of(a) == self.class_of(b) {
            self.match_score
        } else {
            self.mismatch
        }
    }

    /// Sum-of-pairs style score of two profile columns, averaged over pairs.
    fn column_score(&self, a: &[&str], b: &[&str]) -> f64 {
        let mut total = 0.0;
        for x in a {
            for y in b {
                total += match (*x == GAP, *y == GAP) {
                    (true, true) => 0.0,
                    (true, false) | (false, true) => self.gap,
                    (false, false) => self.substitution(x, y),
                };
            }
        }
        total / (a.len() * b.len()) as f64
    }

    fn column_gap_score(&self, a: &[&str]) -> f64 {
        let filled = a.iter().filter(|s| **s != GAP).count();
        self.gap * filled as f64 / a.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Diag,
    Up,
    Left,
}

/// Aligns two profiles given as column-major slices. Returns the traceback
/// path and its score.
fn align_profiles(a: &[Vec<&str>], b: &[Vec<&str>], scheme: &ScoringScheme) -> (Vec<Step>, f64) {
    let (n, m) = (a.len(), b.len());
    let mut score = vec![0.0f64; (n + 1) * (m + 1)];
    let mut trace = vec![Step::Diag; (n + 1) * (m + 1)];
    let at = |i: usize, j: usize| i * (m + 1) + j;
    for i in 1..=n {
        score[at(i, 0)] = score[at(i - 1, 0)] + scheme.column_gap_score(&a[i - 1]);
        trace[at(i, 0)] = Step::Up;
    }
    for j in 1..=m {
        score[at(0, j)] = score[at(0, j - 1)] + scheme.column_gap_score(&b[j - 1]);
        trace[at(0, j)] = Step::Left;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = score[at(i - 1, j - 1)] + scheme.column_score(&a[i - 1], &b[j - 1]);
            let up = score[at(i - 1, j)] + scheme.column_gap_score(&a[i - 1]);
            let left = score[at(i, j - 1)] + scheme.column_gap_score(&b[j - 1]);
            let (best, step) = if diag >= up && diag >= left {
                (diag, Step::Diag)
            } else if up >= left {
                (up, Step::Up)
            } else {
                (left, Step::Left)
            };
            score[at(i, j)] = best;
            trace[at(i, j)] = step;
        }
    }
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let step = trace[at(i, j)];
        path.push(step);
        match step {
            Step::Diag => {
                i -= 1;
                j -= 1;
            }
            Step::Up => i -= 1,
            Step::Left => j -= 1,
        }
    }
    path.reverse();
    (path, score[at(n, m)])
}

/// Global alignment of two token sequences.
pub fn pairwise_align(
    seq_a: &[String],
    seq_b: &[String],
    scheme: &ScoringScheme,
) -> (Vec<String>, Vec<String>, f64) {
    let cols_a: Vec<Vec<&str>> = seq_a.iter().map(|s| vec![s.as_str()]).collect();
    let cols_b: Vec<Vec<&str>> = seq_b.iter().map(|s| vec![s.as_str()]).collect();
    let (path, score) = align_profiles(&cols_a, &cols_b, scheme);
    let (mut out_a, mut out_b) = (Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    for step in path {
        match step {
            Step::Diag => {
                out_a.push(seq_a[i].clone());
                out_b.push(seq_b[j].clone());
                i += 1;
                j += 1;
            }
            Step::Up => {
                out_a.push(seq_a[i].clone());
                out_b.push(GAP.to_string());
                i += 1;
            }
            Step::Left => {
                out_a.push(GAP.to_string());
                out_b.push(seq_b[j].clone());
                j += 1;
            }
        }
    }
    (out_a, out_b, score)
}

/// Aligned words of one cognate set, one row per language.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub key: CognateKey,
    rows: Vec<(String, Vec<String>)>,
}

impl Alignment {
    pub fn new(key: CognateKey, rows: Vec<(String, Vec<String>)>) -> Result<Self> {
        if let Some(width) = rows.first().map(|r| r.1.len()) {
            if rows.iter().any(|r| r.1.len() != width) {
                return Err(Error::Validation(format!("ragged alignment for {key}")));
            }
        }
        let mut langs = HashSet::new();
        if rows.iter().any(|r| !langs.insert(r.0.as_str())) {
            return Err(Error::Validation(format!("duplicate language in alignment {key}")));
        }
        Ok(Alignment { key, rows })
    }

    pub fn rows(&self) -> &[(String, Vec<String>)] {
        &self.rows
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, |r| r.1.len())
    }

    pub fn column(&self, index: usize) -> impl Iterator<Item = (&str, &str)> {
        self.rows
            .iter()
            .map(move |(lang, toks)| (lang.as_str(), toks[index].as_str()))
    }

    fn gap_fraction(&self, index: usize) -> f64 {
        let gaps = self.column(index).filter(|(_, s)| *s == GAP).count();
        gaps as f64 / self.rows.len() as f64
    }
}

/// Progressive multiple alignment of the forms of one cognate set. When a
/// language contributes several synonyms only its first form is aligned.
pub fn progressive_msa(
    key: CognateKey,
    forms: &[(String, Vec<String>)],
    scheme: &ScoringScheme,
) -> Result<Alignment> {
    if forms.is_empty() {
        return Err(Error::Validation(format!("no forms to align for {key}")));
    }
    let mut seen = HashSet::new();
    let seqs: Vec<&(String, Vec<String>)> =
        forms.iter().filter(|(lang, _)| seen.insert(lang.as_str())).collect();
    let n = seqs.len();

    // Pairwise distances for the guide tree.
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (_, _, s) = pairwise_align(&seqs[i].1, &seqs[j].1, scheme);
            let longest = seqs[i].1.len().max(seqs[j].1.len()).max(1);
            let d = 1.0 - s / (scheme.match_score * longest as f64);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    // Each cluster holds member indices and its aligned rows (same order).
    let mut clusters: Vec<Option<(Vec<usize>, Vec<Vec<String>>)>> = seqs
        .iter()
        .enumerate()
        .map(|(i, (_, toks))| Some((vec![i], vec![toks.clone()])))
        .collect();
    let mut active = n;
    while active > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            let Some((ma, _)) = &clusters[a] else { continue };
            for b in (a + 1)..clusters.len() {
                let Some((mb, _)) = &clusters[b] else { continue };
                let mut total = 0.0;
                for &x in ma {
                    for &y in mb {
                        total += dist[x][y];
                    }
                }
                let avg = total / (ma.len() * mb.len()) as f64;
                if best.is_none_or(|(d, _, _)| avg < d) {
                    best = Some((avg, a, b));
                }
            }
        }
        let (_, a, b) = best.expect("at least two active clusters");
        let (mb, rows_b) = clusters[b].take().unwrap();
        let (ma, rows_a) = clusters[a].take().unwrap();
        let merged_rows = merge_profiles(&rows_a, &rows_b, scheme);
        let mut members = ma;
        members.extend(mb);
        clusters[a] = Some((members, merged_rows));
        active -= 1;
    }
    let (members, rows) = clusters.into_iter().flatten().next().unwrap();
    let mut ordered: Vec<(usize, Vec<String>)> = members.into_iter().zip(rows).collect();
    ordered.sort_by_key(|(i, _)| *i);
    let rows = ordered
        .into_iter()
        .map(|(i, toks)| (seqs[i].0.clone(), toks))
        .collect();
    Alignment::new(key, rows)
}

fn merge_profiles(a: &[Vec<String>], b: &[Vec<String>], scheme: &ScoringScheme) -> Vec<Vec<String>> {
    let columns = |rows: &[Vec<String>]| -> Vec<Vec<String>> {
        let width = rows[0].len();
        (0..width)
            .map(|c| rows.iter().map(|r| r[c].clone()).collect())
            .collect()
    };
    let cols_a_owned = columns(a);
    let cols_b_owned = columns(b);
    let cols_a: Vec<Vec<&str>> = cols_a_owned
        .iter()
        .map(|c| c.iter().map(String::as_str).collect())
        .collect();
    let cols_b: Vec<Vec<&str>> = cols_b_owned
        .iter()
        .map(|c| c.iter().map(String::as_str).collect())
        .collect();
    let (path, _) = align_profiles(&cols_a, &cols_b, scheme);
    let mut out: Vec<Vec<String>> = vec![Vec::with_capacity(path.len()); a.len() + b.len()];
    let (mut i, mut j) = (0, 0);
    for step in path {
        let (take_a, take_b) = match step {
            Step::Diag => (true, true),
            Step::Up => (true, false),
            Step::Left => (false, true),
        };
        for (r, row) in out.iter_mut().enumerate() {
            let cell = if r < a.len() {
                if take_a { a[r][i].clone() } else { GAP.to_string() }
            } else if take_b {
                b[r - a.len()][j].clone()
            } else {
                GAP.to_string()
            };
            row.push(cell);
        }
        i += usize::from(take_a);
        j += usize::from(take_b);
    }
    out
}

/// Aligns every cognate set of a wordlist, in order of first appearance.
pub fn align_wordlist(wordlist: &Wordlist, scheme: &ScoringScheme) -> Result<Vec<Alignment>> {
    wordlist
        .cognate_sets()
        .into_iter()
        .map(|(key, forms)| {
            let seqs: Vec<(String, Vec<String>)> = forms
                .iter()
                .map(|f| (f.language.clone(), f.tokens.clone()))
                .collect();
            progressive_msa(key, &seqs, scheme)
        })
        .collect()
}

/// Drops columns whose gap fraction exceeds `tau`. If that would remove
/// every column, the column with the lowest gap fraction is kept.
pub fn trim_alignment(alignment: &Alignment, tau: f64) -> Alignment {
    let width = alignment.width();
    if width == 0 {
        return alignment.clone();
    }
    let fractions: Vec<f64> = (0..width).map(|c| alignment.gap_fraction(c)).collect();
    let mut keep: Vec<usize> = (0..width).filter(|&c| fractions[c] <= tau).collect();
    if keep.is_empty() {
        let mut best = 0;
        for c in 1..width {
            if fractions[c] < fractions[best] {
                best = c;
            }
        }
        keep.push(best);
    }
    let rows = alignment
        .rows
        .iter()
        .map(|(lang, toks)| (lang.clone(), keep.iter().map(|&c| toks[c].clone()).collect()))
        .collect();
    Alignment {
        key: alignment.key.clone(),
        rows,
    }
}

/// Writes alignments as blocks: a `>concept<TAB>cognate_id` header followed
/// by `language<TAB>tokens` rows, blocks separated by a blank line.
pub fn write_alignments(alignments: &[Alignment]) -> String {
    let mut out = String::new();
    for (i, a) in alignments.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, ">{}\t{}", a.key.concept, a.key.cognate_id);
        for (lang, toks) in &a.rows {
            let _ = writeln!(out, "{}\t{}", lang, toks.join(" "));
        }
    }
    out
}

pub fn read_alignments(text: &str) -> Result<Vec<Alignment>> {
    let mut out = Vec::new();
    let mut current: Option<(CognateKey, Vec<(String, Vec<String>)>)> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            if let Some((key, rows)) = current.take() {
                out.push(Alignment::new(key, rows)?);
            }
            let (concept, cogid) = header.split_once('\t').ok_or_else(|| {
                Error::parse_at_line(lineno + 1, "block header must be >concept<TAB>cognate_id")
            })?;
            current = Some((
                CognateKey {
                    concept: concept.trim().to_string(),
                    cognate_id: cogid.trim().to_string(),
                },
                Vec::new(),
            ));
            continue;
        }
        let Some((_, rows)) = current.as_mut() else {
            return Err(Error::parse_at_line(lineno + 1, "row before block header"));
        };
        let (lang, toks) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse_at_line(lineno + 1, "row must be language<TAB>tokens"))?;
        rows.push((
            lang.trim().to_string(),
            toks.split_whitespace().map(str::to_string).collect(),
        ));
    }
    if let Some((key, rows)) = current {
        out.push(Alignment::new(key, rows)?);
    }
    Ok(out)
}

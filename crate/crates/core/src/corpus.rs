//! Cognate-coded wordlists: parsing, validation, summary statistics and
//! shared-cognate distances between languages.
//!
//! The on-disk format is a tab-separated table with (at least) the columns
//! `ID`, `LANGUAGE`, `CONCEPT`, `TOKENS` and `COGID`. `TOKENS` holds a
//! space-separated sequence of sound symbols. Lines starting with `#` are
//! comments; CRLF line endings are accepted.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};

pub const REQUIRED_COLUMNS: [&str; 5] = ["ID", "LANGUAGE", "CONCEPT", "TOKENS", "COGID"];

/// A single word: one language's expression of one concept, with its
/// segmented transcription and its cognate-set assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordForm {
    pub id: String,
    pub language: String,
    pub concept: String,
    pub tokens: Vec<String>,
    /// Cognate set identifier, scoped by `concept`.
    pub cognate_id: String,
}

impl WordForm {
    /// Key identifying the cognate set this form belongs to.
    pub fn cognate_key(&self) -> CognateKey {
        CognateKey {
            concept: self.concept.clone(),
            cognate_id: self.cognate_id.clone(),
        }
    }
}

/// A cognate set is identified by its concept together with the cognate id,
/// so the same id string under two concepts names two distinct sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CognateKey {
    pub concept: String,
    pub cognate_id: String,
}

impl std::fmt::Display for CognateKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.concept, self.cognate_id)
    }
}

/// A validated collection of word forms.
#[derive(Debug, Clone, PartialEq)]
pub struct Wordlist {
    forms: Vec<WordForm>,
    languages: Vec<String>,
    concepts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub words: usize,
    pub concepts: usize,
    pub languages: usize,
    /// Mean shared-cognate distance over language pairs with at least one
    /// concept in common.
    pub avg_distance: f64,
    pub avg_sounds: f64,
    pub avg_word_length: f64,
}

impl Wordlist {
    /// Builds a wordlist, checking that ids are unique and that every form
    /// has tokens and a cognate id. Languages and concepts are recorded in
    /// order of first appearance.
    pub fn new(forms: Vec<WordForm>) -> Result<Self> {
        let mut seen_ids = HashSet::new();
        let mut languages = Vec::new();
        let mut concepts = Vec::new();
        let mut lang_seen = HashSet::new();
        let mut concept_seen = HashSet::new();
        for form in &forms {
            if form.tokens.is_empty() || form.tokens.iter().any(|t| t.is_empty()) {
                return Err(Error::Validation(format!("form {} has no tokens", form.id)));
            }
            if form.tokens.iter().any(|t| t.chars().any(char::is_whitespace)) {
                return Err(Error::Validation(format!(
                    "form {} has a token containing whitespace",
                    form.id
                )));
            }
            if form.cognate_id.is_empty() {
                return Err(Error::Validation(format!("form {} has no cognate id", form.id)));
            }
            if !seen_ids.insert(form.id.as_str()) {
                return Err(Error::Validation(format!("duplicate form id {}", form.id)));
            }
            if lang_seen.insert(form.language.as_str()) {
                languages.push(form.language.clone());
            }
            if concept_seen.insert(form.concept.as_str()) {
                concepts.push(form.concept.clone());
            }
        }
        Ok(Wordlist {
            forms,
            languages,
            concepts,
        })
    }

    pub fn forms(&self) -> &[WordForm] {
        &self.forms
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    /// Cognate sets in order of first appearance, each with its member forms
    /// in input order.
    pub fn cognate_sets(&self) -> Vec<(CognateKey, Vec<&WordForm>)> {
        let mut index: HashMap<CognateKey, usize> = HashMap::new();
        let mut sets: Vec<(CognateKey, Vec<&WordForm>)> = Vec::new();
        for form in &self.forms {
            let key = form.cognate_key();
            match index.get(&key) {
                Some(&i) => sets[i].1.push(form),
                None => {
                    index.insert(key.clone(), sets.len());
                    sets.push((key, vec![form]));
                }
            }
        }
        sets
    }

    /// Concepts for which `language` has at least one form.
    pub fn attested_concepts(&self, language: &str) -> HashSet<&str> {
        self.forms
            .iter()
            .filter(|f| f.language == language)
            .map(|f| f.concept.as_str())
            .collect()
    }

    fn cognates_by_concept(&self, language: &str) -> HashMap<&str, HashSet<&str>> {
        let mut map: HashMap<&str, HashSet<&str>> = HashMap::new();
        for f in self.forms.iter().filter(|f| f.language == language) {
            map.entry(f.concept.as_str())
                .or_default()
                .insert(f.cognate_id.as_str());
        }
        map
    }
}

/// Parses a wordlist table.
pub fn parse_wordlist(text: &str) -> Result<Wordlist> {
    let mut header: Option<Vec<usize>> = None;
    let mut forms = Vec::new();
    let mut ids = HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let row = lineno + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        let Some(cols) = &header else {
            let names: Vec<String> = cells.iter().map(|c| c.trim().to_uppercase()).collect();
            let mut cols = Vec::with_capacity(REQUIRED_COLUMNS.len());
            for required in REQUIRED_COLUMNS {
                match names.iter().position(|n| n == required) {
                    Some(i) => cols.push(i),
                    None => {
                        return Err(Error::Format(format!("missing column {required}")));
                    }
                }
            }
            header = Some(cols);
            continue;
        };
        let cell = |i: usize| cells.get(cols[i]).map(|c| c.trim()).unwrap_or("");
        let id = cell(0);
        let language = cell(1);
        let concept = cell(2);
        let tokens: Vec<String> = cell(3).split_whitespace().map(str::to_string).collect();
        let cognate_id = cell(4);
        let fail = |message: &str| Error::Row {
            row,
            message: message.to_string(),
        };
        if id.is_empty() {
            return Err(fail("empty ID"));
        }
        if language.is_empty() {
            return Err(fail("empty LANGUAGE"));
        }
        if concept.is_empty() {
            return Err(fail("empty CONCEPT"));
        }
        if tokens.is_empty() {
            return Err(fail("empty TOKENS"));
        }
        if cognate_id.is_empty() {
            return Err(fail("empty COGID"));
        }
        if !ids.insert(id.to_string()) {
            return Err(Error::Row {
                row,
                message: format!("duplicate ID {id}"),
            });
        }
        forms.push(WordForm {
            id: id.to_string(),
            language: language.to_string(),
            concept: concept.to_string(),
            tokens,
            cognate_id: cognate_id.to_string(),
        });
    }
    if header.is_none() {
        return Err(Error::Format("missing header line".into()));
    }
    Wordlist::new(forms)
}

/// Serializes a wordlist in the same table format `parse_wordlist` reads.
pub fn write_wordlist(wordlist: &Wordlist) -> String {
    let mut out = REQUIRED_COLUMNS.join("\t");
    out.push('\n');
    for f in &wordlist.forms {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            f.id,
            f.language,
            f.concept,
            f.tokens.join(" "),
            f.cognate_id
        ));
    }
    out
}

/// Fraction of commonly attested concepts for which the two languages share
/// no cognate set.
pub fn cognate_distance(wordlist: &Wordlist, lang_a: &str, lang_b: &str) -> Result<f64> {
    for lang in [lang_a, lang_b] {
        if !wordlist.languages.iter().any(|l| l == lang) {
            return Err(Error::UnknownTaxon(lang.to_string()));
        }
    }
    let a = wordlist.cognates_by_concept(lang_a);
    let b = wordlist.cognates_by_concept(lang_b);
    distance_from_maps(&a, &b).ok_or_else(|| {
        Error::Undefined(format!("{lang_a} and {lang_b} share no concepts"))
    })
}

fn distance_from_maps(
    a: &HashMap<&str, HashSet<&str>>,
    b: &HashMap<&str, HashSet<&str>>,
) -> Option<f64> {
    let mut common = 0usize;
    let mut shared = 0usize;
    for (concept, sets_a) in a {
        if let Some(sets_b) = b.get(concept) {
            common += 1;
            if !sets_a.is_disjoint(sets_b) {
                shared += 1;
            }
        }
    }
    (common > 0).then(|| 1.0 - shared as f64 / common as f64)
}

pub fn summarize(wordlist: &Wordlist) -> Result<SummaryStats> {
    if wordlist.is_empty() {
        return Err(Error::Validation("empty wordlist".into()));
    }
    let words = wordlist.forms.len();
    let total_tokens: usize = wordlist.forms.iter().map(|f| f.tokens.len()).sum();

    let mut inventories: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for f in &wordlist.forms {
        inventories
            .entry(f.language.as_str())
            .or_default()
            .extend(f.tokens.iter().map(String::as_str));
    }
    let total_sounds: usize = inventories.values().map(BTreeSet::len).sum();

    let maps: Vec<_> = wordlist
        .languages
        .iter()
        .map(|l| wordlist.cognates_by_concept(l))
        .collect();
    let mut dist_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..maps.len() {
        for j in (i + 1)..maps.len() {
            if let Some(d) = distance_from_maps(&maps[i], &maps[j]) {
                dist_sum += d;
                pairs += 1;
            }
        }
    }

    Ok(SummaryStats {
        words,
        concepts: wordlist.concepts.len(),
        languages: wordlist.languages.len(),
        avg_distance: if pairs > 0 { dist_sum / pairs as f64 } else { 0.0 },
        avg_sounds: total_sounds as f64 / wordlist.languages.len() as f64,
        avg_word_length: total_tokens as f64 / words as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_ROWS: &str = "ID\tLANGUAGE\tCONCEPT\tTOKENS\tCOGID\n\
        1\tL1\thand\th a n t\tc1\n\
        2\tL2\thand\th a n d\tc1\n";

    fn toy() -> Wordlist {
        // L1 and L2 share concepts a, b, c, d; cognate sets shared on a and c.
        let text = "ID\tLANGUAGE\tCONCEPT\tTOKENS\tCOGID\n\
            1\tL1\ta\tp a\t1\n2\tL2\ta\tp o\t1\n\
            3\tL1\tb\tk i\t1\n4\tL2\tb\tm u\t2\n\
            5\tL1\tc\tt a\t1\n6\tL2\tc\tt e\t1\n\
            7\tL1\td\ts a\t1\n8\tL2\td\tr a\t2\n\
            9\tL1\te\tn a\t1\n";
        parse_wordlist(text).unwrap()
    }

    #[test]
    fn parses_two_rows() {
        let wl = parse_wordlist(TWO_ROWS).unwrap();
        assert_eq!(wl.len(), 2);
        assert_eq!(wl.languages(), ["L1", "L2"]);
        assert_eq!(wl.concepts(), ["hand"]);
        assert_eq!(wl.forms()[0].tokens, ["h", "a", "n", "t"]);
    }

    #[test]
    fn missing_cogid_cites_row() {
        let text = "ID\tLANGUAGE\tCONCEPT\tTOKENS\tCOGID\n1\tL1\thand\th a n t\t\n";
        match parse_wordlist(text) {
            Err(Error::Row { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("COGID"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_tokens_column_is_named() {
        let text = "ID\tLANGUAGE\tCONCEPT\tCOGID\n1\tL1\thand\tc1\n";
        let err = parse_wordlist(text).unwrap_err();
        assert!(matches!(&err, Error::Format(m) if m.contains("TOKENS")), "{err}");
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = "ID\tLANGUAGE\tCONCEPT\tTOKENS\tCOGID\n1\tL1\ta\tp\t1\n1\tL2\ta\tp\t1\n";
        assert!(matches!(parse_wordlist(text), Err(Error::Row { row: 3, .. })));
    }

    #[test]
    fn comments_and_crlf() {
        let text = "# a comment\r\nID\tLANGUAGE\tCONCEPT\tTOKENS\tCOGID\r\n# another\r\n1\tL1\ta\tp a\t1\r\n";
        let wl = parse_wordlist(text).unwrap();
        assert_eq!(wl.forms()[0].cognate_id, "1");
        assert_eq!(wl.forms()[0].tokens, ["p", "a"]);
    }

    #[test]
    fn summary_counts() {
        let wl = parse_wordlist(TWO_ROWS).unwrap();
        let s = summarize(&wl).unwrap();
        assert_eq!(s.words, 2);
        assert_eq!(s.concepts, 1);
        assert_eq!(s.languages, 2);
        assert_eq!(s.avg_word_length, 4.0);
        assert_eq!(s.avg_sounds, 4.0);
        assert_eq!(s.avg_distance, 0.0);
    }

    #[test]
    fn summary_of_empty_is_error() {
        let wl = Wordlist::new(vec![]).unwrap();
        assert!(summarize(&wl).is_err());
    }

    #[test]
    fn distances() {
        let wl = toy();
        assert_eq!(cognate_distance(&wl, "L1", "L2").unwrap(), 0.5);
        assert_eq!(cognate_distance(&wl, "L2", "L1").unwrap(), 0.5);
        assert_eq!(cognate_distance(&wl, "L1", "L1").unwrap(), 0.0);
        assert!(cognate_distance(&wl, "L1", "L9").is_err());
    }

    #[test]
    fn zero_overlap_distance_is_one() {
        let text = "ID\tLANGUAGE\tCONCEPT\tTOKENS\tCOGID\n1\tA\tx\tp\t1\n2\tB\tx\tq\t2\n";
        let wl = parse_wordlist(text).unwrap();
        assert_eq!(cognate_distance(&wl, "A", "B").unwrap(), 1.0);
    }

    #[test]
    fn no_shared_concept_is_undefined() {
        let text = "ID\tLANGUAGE\tCONCEPT\tTOKENS\tCOGID\n1\tA\tx\tp\t1\n2\tB\ty\tq\t1\n";
        let wl = parse_wordlist(text).unwrap();
        assert!(matches!(cognate_distance(&wl, "A", "B"), Err(Error::Undefined(_))));
    }

    #[test]
    fn same_cogid_under_two_concepts_is_two_sets() {
        let wl = toy();
        let sets = wl.cognate_sets();
        let ones = sets.iter().filter(|(k, _)| k.cognate_id == "1").count();
        assert_eq!(ones, 5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn wordlist() -> impl Strategy<Value = Wordlist> {
            let row = (0usize..4, 0usize..5, proptest::collection::vec("[a-z]{1,2}", 1..5), 0usize..3);
            proptest::collection::vec(row, 1..30).prop_map(|rows| {
                let forms = rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (l, c, tokens, cog))| WordForm {
                        id: (i + 1).to_string(),
                        language: format!("L{l}"),
                        concept: format!("c{c}"),
                        tokens,
                        cognate_id: cog.to_string(),
                    })
                    .collect();
                Wordlist::new(forms).unwrap()
            })
        }

        proptest! {
            #[test]
            fn round_trip_and_counts(wl in wordlist()) {
                let text = write_wordlist(&wl);
                let again = parse_wordlist(&text).unwrap();
                prop_assert_eq!(&again, &wl);
                prop_assert_eq!(summarize(&wl).unwrap().words, text.lines().count() - 1);
            }

            #[test]
            fn distance_symmetric_and_bounded(wl in wordlist()) {
                let langs = wl.languages().to_vec();
                for a in &langs {
                    for b in &langs {
                        match (cognate_distance(&wl, a, b), cognate_distance(&wl, b, a)) {
                            (Ok(x), Ok(y)) => {
                                prop_assert_eq!(x, y);
                                prop_assert!((0.0..=1.0).contains(&x));
                            }
                            (Err(_), Err(_)) => {}
                            _ => prop_assert!(false, "asymmetric definedness for {} {}", a, b),
                        }
                    }
                }
            }
        }
    }
}

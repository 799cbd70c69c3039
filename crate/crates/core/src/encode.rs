//! Binary presence/absence matrices and their Nexus serialization.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};

use crate::corpus::Wordlist;
use crate::error::{Error, Result};
use crate::patterns::Pattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Absent,
    Present,
    Missing,
}

impl Cell {
    pub fn symbol(self) -> char {
        match self {
            Cell::Absent => '0',
            Cell::Present => '1',
            Cell::Missing => '?',
        }
    }

    pub fn from_symbol(c: char) -> Option<Cell> {
        match c {
            '0' => Some(Cell::Absent),
            '1' => Some(Cell::Present),
            '?' | '-' => Some(Cell::Missing),
            _ => None,
        }
    }
}

/// Where a character came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Cognate,
    Pattern,
    Combined,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Cognate => "cognate",
            Provenance::Pattern => "pattern",
            Provenance::Combined => "combined",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cognate" => Some(Provenance::Cognate),
            "pattern" => Some(Provenance::Pattern),
            "combined" => Some(Provenance::Combined),
            _ => None,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Taxa × characters over {0, 1, ?}.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMatrix {
    taxa: Vec<String>,
    characters: Vec<String>,
    provenance: Vec<Provenance>,
    /// Row-major, `taxa.len() * characters.len()`.
    cells: Vec<Cell>,
}

impl BinaryMatrix {
    pub fn new(
        taxa: Vec<String>,
        characters: Vec<String>,
        provenance: Vec<Provenance>,
        rows: Vec<Vec<Cell>>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(dup) = taxa.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(Error::Validation(format!("duplicate taxon {dup}")));
        }
        if provenance.len() != characters.len() {
            return Err(Error::Validation("one provenance entry per character required".into()));
        }
        if rows.len() != taxa.len() {
            return Err(Error::Validation("one row per taxon required".into()));
        }
        let n = characters.len();
        if let Some(i) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::Validation(format!("row for {} has wrong length", taxa[i])));
        }
        let cells: Vec<Cell> = rows.into_iter().flatten().collect();
        for c in 0..n {
            if !taxa.is_empty() && (0..taxa.len()).all(|t| cells[t * n + c] == Cell::Missing) {
                return Err(Error::Validation(format!(
                    "character {} has no observed state",
                    characters[c]
                )));
            }
        }
        Ok(BinaryMatrix {
            taxa,
            characters,
            provenance,
            cells,
        })
    }

    pub fn empty() -> Self {
        BinaryMatrix {
            taxa: Vec::new(),
            characters: Vec::new(),
            provenance: Vec::new(),
            cells: Vec::new(),
        }
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn characters(&self) -> &[String] {
        &self.characters
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn n_taxa(&self) -> usize {
        self.taxa.len()
    }

    pub fn n_chars(&self) -> usize {
        self.characters.len()
    }

    pub fn cell(&self, taxon: usize, character: usize) -> Cell {
        self.cells[taxon * self.characters.len() + character]
    }

    pub fn row(&self, taxon: usize) -> &[Cell] {
        let n = self.characters.len();
        &self.cells[taxon * n..(taxon + 1) * n]
    }

    pub fn taxon_index(&self, name: &str) -> Option<usize> {
        self.taxa.iter().position(|t| t == name)
    }
}

/// One character per cognate set.
pub fn encode_cognates(wordlist: &Wordlist) -> BinaryMatrix {
    let taxa: Vec<String> = wordlist.languages().to_vec();
    let attested: Vec<HashSet<&str>> = taxa.iter().map(|t| wordlist.attested_concepts(t)).collect();

    // Cognate ids per concept in order of first appearance.
    let mut by_concept: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut members: HashMap<(&str, &str), HashSet<&str>> = HashMap::new();
    for f in wordlist.forms() {
        let ids = by_concept.entry(f.concept.as_str()).or_default();
        if !ids.contains(&f.cognate_id.as_str()) {
            ids.push(f.cognate_id.as_str());
        }
        members
            .entry((f.concept.as_str(), f.cognate_id.as_str()))
            .or_default()
            .insert(f.language.as_str());
    }

    let mut characters = Vec::new();
    let mut columns: Vec<Vec<Cell>> = Vec::new();
    for concept in wordlist.concepts() {
        for &cogid in &by_concept[concept.as_str()] {
            let set = &members[&(concept.as_str(), cogid)];
            characters.push(format!("{concept}:{cogid}"));
            columns.push(
                taxa.iter()
                    .zip(&attested)
                    .map(|(t, att)| {
                        if set.contains(t.as_str()) {
                            Cell::Present
                        } else if att.contains(concept.as_str()) {
                            Cell::Absent
                        } else {
                            Cell::Missing
                        }
                    })
                    .collect(),
            );
        }
    }
    from_columns(taxa, characters, Provenance::Cognate, columns)
}

/// One character per correspondence pattern.
pub fn encode_patterns(patterns: &[Pattern], wordlist: &Wordlist) -> BinaryMatrix {
    let taxa: Vec<String> = wordlist.languages().to_vec();
    let attested: Vec<HashSet<&str>> = taxa.iter().map(|t| wordlist.attested_concepts(t)).collect();
    let mut characters = Vec::new();
    let mut columns = Vec::new();
    for p in patterns {
        let concepts: HashSet<&str> = p.members.iter().map(|s| s.concept()).collect();
        characters.push(format!("pattern:{}", p.id));
        columns.push(
            taxa.iter()
                .zip(&attested)
                .map(|(t, att)| {
                    if p.assignment.contains_key(t) {
                        Cell::Present
                    } else if concepts.iter().any(|c| att.contains(c)) {
                        Cell::Absent
                    } else {
                        Cell::Missing
                    }
                })
                .collect(),
        );
    }
    from_columns(taxa, characters, Provenance::Pattern, columns)
}

fn from_columns(
    taxa: Vec<String>,
    characters: Vec<String>,
    provenance: Provenance,
    columns: Vec<Vec<Cell>>,
) -> BinaryMatrix {
    let n = characters.len();
    let mut cells = vec![Cell::Missing; taxa.len() * n];
    for (c, col) in columns.iter().enumerate() {
        for (t, &cell) in col.iter().enumerate() {
            cells[t * n + c] = cell;
        }
    }
    BinaryMatrix {
        provenance: vec![provenance; n],
        taxa,
        characters,
        cells,
    }
}

/// Column-wise concatenation; taxa missing from one side are coded `?` there.
pub fn concatenate(a: &BinaryMatrix, b: &BinaryMatrix) -> BinaryMatrix {
    let mut taxa = a.taxa.clone();
    for t in &b.taxa {
        if !taxa.contains(t) {
            taxa.push(t.clone());
        }
    }
    let n = a.n_chars() + b.n_chars();
    let mut cells = Vec::with_capacity(taxa.len() * n);
    for t in &taxa {
        for m in [a, b] {
            match m.taxon_index(t) {
                Some(i) => cells.extend_from_slice(m.row(i)),
                None => cells.extend(std::iter::repeat_n(Cell::Missing, m.n_chars())),
            }
        }
    }
    BinaryMatrix {
        taxa,
        characters: a.characters.iter().chain(&b.characters).cloned().collect(),
        provenance: a.provenance.iter().chain(&b.provenance).copied().collect(),
        cells,
    }
}

fn needs_quotes(label: &str) -> bool {
    label.is_empty() || !label.chars().all(|c| c.is_alphanumeric() || c == '_')
}

fn quote(label: &str) -> String {
    if needs_quotes(label) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

/// Serializes the matrix as a Nexus DATA block. Character labels and
/// provenance are stored in `CHARLABELS` and a SETS block respectively.
pub fn write_nexus(matrix: &BinaryMatrix) -> String {
    let mut out = String::from("#NEXUS\n\nBEGIN DATA;\n");
    let _ = writeln!(
        out,
        "\tDIMENSIONS NTAX={} NCHAR={};",
        matrix.n_taxa(),
        matrix.n_chars()
    );
    out.push_str("\tFORMAT DATATYPE=STANDARD SYMBOLS=\"01\" MISSING=? GAP=-;\n");
    if matrix.n_chars() > 0 {
        out.push_str("\tCHARLABELS");
        for c in &matrix.characters {
            out.push(' ');
            out.push_str(&quote(c));
        }
        out.push_str(";\n");
    }
    out.push_str("\tMATRIX\n");
    let labels: Vec<String> = matrix.taxa.iter().map(|t| quote(t)).collect();
    let width = labels.iter().map(|l| l.chars().count()).max().unwrap_or(0);
    for (i, label) in labels.iter().enumerate() {
        let pad = width - label.chars().count();
        let row: String = matrix.row(i).iter().map(|c| c.symbol()).collect();
        let _ = writeln!(out, "\t{}{}  {}", label, " ".repeat(pad), row);
    }
    out.push_str("\t;\nEND;\n");

    if matrix.n_chars() > 0 {
        out.push_str("\nBEGIN SETS;\n");
        for prov in [Provenance::Cognate, Provenance::Pattern, Provenance::Combined] {
            let ranges = ranges_of(&matrix.provenance, prov);
            if !ranges.is_empty() {
                let _ = writeln!(out, "\tCHARSET {} = {};", prov.name(), ranges.join(" "));
            }
        }
        out.push_str("END;\n");
    }
    out
}

fn ranges_of(provenance: &[Provenance], which: Provenance) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < provenance.len() {
        if provenance[i] != which {
            i += 1;
            continue;
        }
        let start = i;
        while i < provenance.len() && provenance[i] == which {
            i += 1;
        }
        if i - start == 1 {
            out.push(format!("{}", start + 1));
        } else {
            out.push(format!("{}-{}", start + 1, i));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
struct Token {
    text: String,
    quoted: bool,
    line: usize,
}

/// Splits Nexus text into words, punctuation (`;`, `=`) and quoted strings,
/// dropping `[...]` comments. Newlines are kept as tokens so matrix rows can
/// be recognised.
fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                tokens.push(Token {
                    text: "\n".into(),
                    quoted: false,
                    line,
                });
                line += 1;
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '[' => {
                let start = line;
                let mut depth = 0;
                loop {
                    match chars.next() {
                        Some('[') => depth += 1,
                        Some(']') => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        Some('\n') => line += 1,
                        Some(_) => {}
                        None => return Err(Error::parse_at_line(start, "unterminated comment")),
                    }
                }
            }
            ';' | '=' | ',' => {
                chars.next();
                tokens.push(Token {
                    text: c.to_string(),
                    quoted: false,
                    line,
                });
            }
            '\'' | '"' => {
                let q = c;
                chars.next();
                let start = line;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some(ch) if ch == q => {
                            if chars.peek() == Some(&q) {
                                chars.next();
                                s.push(q);
                            } else {
                                break;
                            }
                        }
                        Some('\n') => {
                            line += 1;
                            s.push('\n');
                        }
                        Some(ch) => s.push(ch),
                        None => return Err(Error::parse_at_line(start, "unterminated quoted string")),
                    }
                }
                tokens.push(Token {
                    text: s,
                    quoted: true,
                    line: start,
                });
            }
            _ => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_whitespace() || matches!(ch, ';' | '=' | '[' | ',' | '\'' | '"') {
                        break;
                    }
                    s.push(ch);
                    chars.next();
                }
                tokens.push(Token {
                    text: s,
                    quoted: false,
                    line,
                });
            }
        }
    }
    Ok(tokens)
}

fn is_kw(tok: &Token, kw: &str) -> bool {
    !tok.quoted && tok.text.eq_ignore_ascii_case(kw)
}

/// Parses a Nexus document containing a DATA (or CHARACTERS) block with a
/// binary matrix. Unknown blocks are ignored.
pub fn read_nexus(text: &str) -> Result<BinaryMatrix> {
    let tokens = tokenize(text)?;
    let first = tokens.iter().find(|t| t.text != "\n");
    if !first.is_some_and(|t| is_kw(t, "#NEXUS")) {
        return Err(Error::parse_at_line(first.map_or(1, |t| t.line), "missing #NEXUS header"));
    }
    let mut i = 0;
    let mut data: Option<DataBlock> = None;
    let mut charsets: Vec<(usize, Provenance, String)> = Vec::new();
    while i < tokens.len() {
        if is_kw(&tokens[i], "BEGIN") {
            let name = next_word(&tokens, i + 1)
                .ok_or_else(|| Error::parse_at_line(tokens[i].line, "BEGIN without block name"))?;
            let body_start = skip_statement(&tokens, i)?;
            let end = find_end(&tokens, body_start)?;
            let block = &tokens[body_start..end];
            match name.text.to_ascii_uppercase().as_str() {
                "DATA" | "CHARACTERS" => data = Some(parse_data_block(block, tokens[i].line)?),
                "SETS" | "ASSUMPTIONS" => parse_charsets(block, &mut charsets)?,
                _ => {}
            }
            i = skip_statement(&tokens, end)?;
        } else {
            i += 1;
        }
    }
    let data = data.ok_or_else(|| Error::parse_at_line(1, "no DATA block"))?;
    let nchar = data.nchar;
    let mut provenance = vec![Provenance::Cognate; nchar];
    for (line, prov, spec) in charsets {
        for part in spec.split_whitespace() {
            let (lo, hi) = match part.split_once('-') {
                Some((a, b)) => (a.parse::<usize>(), b.parse::<usize>()),
                None => (part.parse::<usize>(), part.parse::<usize>()),
            };
            let (Ok(lo), Ok(hi)) = (lo, hi) else {
                return Err(Error::parse_at_line(line, format!("bad character range {part}")));
            };
            if lo == 0 || hi > nchar || lo > hi {
                return Err(Error::parse_at_line(line, format!("character range {part} out of bounds")));
            }
            provenance[lo - 1..hi].fill(prov);
        }
    }
    let characters = data
        .labels
        .unwrap_or_else(|| (1..=nchar).map(|c| c.to_string()).collect());
    BinaryMatrix::new(data.taxa, characters, provenance, data.rows)
}

struct DataBlock {
    nchar: usize,
    taxa: Vec<String>,
    labels: Option<Vec<String>>,
    rows: Vec<Vec<Cell>>,
}

fn next_word(tokens: &[Token], from: usize) -> Option<&Token> {
    tokens[from..].iter().find(|t| t.text != "\n")
}

/// Index just past the `;` ending the statement that starts at `from`.
fn skip_statement(tokens: &[Token], from: usize) -> Result<usize> {
    tokens[from..]
        .iter()
        .position(|t| !t.quoted && t.text == ";")
        .map(|p| from + p + 1)
        .ok_or_else(|| Error::parse_at_line(tokens[from].line, "statement not terminated by ';'"))
}

fn find_end(tokens: &[Token], from: usize) -> Result<usize> {
    tokens[from..]
        .iter()
        .position(|t| is_kw(t, "END") || is_kw(t, "ENDBLOCK"))
        .map(|p| from + p)
        .ok_or_else(|| {
            Error::parse_at_line(tokens.get(from).map_or(1, |t| t.line), "block without END")
        })
}

/// Splits a block body into statements (without the trailing `;`).
fn statements(block: &[Token]) -> Vec<&[Token]> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in block.iter().enumerate() {
        if !t.quoted && t.text == ";" {
            out.push(&block[start..i]);
            start = i + 1;
        }
    }
    out
}

fn key_values(stmt: &[Token]) -> HashMap<String, (String, usize)> {
    let words: Vec<&Token> = stmt.iter().filter(|t| t.text != "\n").collect();
    let mut out = HashMap::new();
    let mut i = 1;
    while i < words.len() {
        if i + 2 < words.len() + 1 && words.get(i + 1).is_some_and(|t| t.text == "=") {
            if let Some(v) = words.get(i + 2) {
                out.insert(words[i].text.to_ascii_uppercase(), (v.text.clone(), v.line));
            }
            i += 3;
        } else {
            i += 1;
        }
    }
    out
}

fn parse_data_block(block: &[Token], begin_line: usize) -> Result<DataBlock> {
    let mut ntax = None;
    let mut nchar = None;
    let mut labels = None;
    let mut matrix: Option<&[Token]> = None;
    let mut missing = '?';
    let mut gap = '-';
    for stmt in statements(block) {
        let Some(head) = stmt.iter().find(|t| t.text != "\n") else { continue };
        match head.text.to_ascii_uppercase().as_str() {
            "DIMENSIONS" => {
                let kv = key_values(stmt);
                for (key, slot) in [("NTAX", &mut ntax), ("NCHAR", &mut nchar)] {
                    if let Some((v, line)) = kv.get(key) {
                        *slot = Some(v.parse::<usize>().map_err(|_| {
                            Error::parse_at_line(*line, format!("invalid {key} value {v}"))
                        })?);
                    }
                }
            }
            "FORMAT" => {
                let kv = key_values(stmt);
                if let Some((dt, line)) = kv.get("DATATYPE") {
                    if !dt.eq_ignore_ascii_case("STANDARD") {
                        return Err(Error::parse_at_line(*line, format!("unsupported DATATYPE {dt}")));
                    }
                }
                if let Some((sym, line)) = kv.get("SYMBOLS") {
                    let s: String = sym.chars().filter(|c| !c.is_whitespace()).collect();
                    if s != "01" {
                        return Err(Error::parse_at_line(*line, format!("unsupported SYMBOLS \"{sym}\"")));
                    }
                }
                if let Some((m, _)) = kv.get("MISSING") {
                    missing = m.chars().next().unwrap_or('?');
                }
                if let Some((g, _)) = kv.get("GAP") {
                    gap = g.chars().next().unwrap_or('-');
                }
            }
            "CHARLABELS" => {
                labels = Some(
                    stmt.iter()
                        .filter(|t| t.text != "\n")
                        .skip(1)
                        .map(|t| t.text.clone())
                        .collect::<Vec<_>>(),
                );
            }
            "MATRIX" => matrix = Some(stmt),
            _ => {}
        }
    }
    let ntax = ntax.ok_or_else(|| Error::parse_at_line(begin_line, "DIMENSIONS NTAX missing"))?;
    let nchar = nchar.ok_or_else(|| Error::parse_at_line(begin_line, "DIMENSIONS NCHAR missing"))?;
    if let Some(l) = &labels {
        if l.len() != nchar {
            return Err(Error::parse_at_line(
                begin_line,
                format!("{} character labels for NCHAR={nchar}", l.len()),
            ));
        }
    }
    let matrix = matrix.ok_or_else(|| Error::parse_at_line(begin_line, "MATRIX missing"))?;

    // Rows: the first word on each line is the taxon; the rest is the row.
    let mut taxa = Vec::new();
    let mut rows = Vec::new();
    let head = matrix.iter().position(|t| is_kw(t, "MATRIX")).unwrap_or(0);
    let body = &matrix[head + 1..];
    let mut lines: Vec<Vec<&Token>> = vec![Vec::new()];
    for t in body {
        if t.text == "\n" && !t.quoted {
            lines.push(Vec::new());
        } else {
            lines.last_mut().unwrap().push(t);
        }
    }
    for line in lines.into_iter().filter(|l| !l.is_empty()) {
        let taxon = line[0];
        let mut row = Vec::with_capacity(nchar);
        for t in &line[1..] {
            for ch in t.text.chars() {
                let cell = if ch == missing || ch == gap {
                    Some(Cell::Missing)
                } else {
                    Cell::from_symbol(ch)
                };
                match cell {
                    Some(c) => row.push(c),
                    None => {
                        return Err(Error::parse_at_line(
                            t.line,
                            format!("illegal state symbol '{ch}' for taxon {}", taxon.text),
                        ))
                    }
                }
            }
        }
        if row.len() != nchar {
            return Err(Error::parse_at_line(
                taxon.line,
                format!("taxon {} has {} states, expected {nchar}", taxon.text, row.len()),
            ));
        }
        taxa.push(taxon.text.clone());
        rows.push(row);
    }
    if taxa.len() != ntax {
        return Err(Error::parse_at_line(
            begin_line,
            format!("matrix has {} rows, expected NTAX={ntax}", taxa.len()),
        ));
    }
    Ok(DataBlock {
        nchar,
        taxa,
        labels,
        rows,
    })
}

fn parse_charsets(block: &[Token], out: &mut Vec<(usize, Provenance, String)>) -> Result<()> {
    for stmt in statements(block) {
        let words: Vec<&Token> = stmt.iter().filter(|t| t.text != "\n").collect();
        if words.len() < 3 || !is_kw(words[0], "CHARSET") || words[2].text != "=" {
            continue;
        }
        if let Some(prov) = Provenance::from_name(&words[1].text) {
            let spec: Vec<&str> = words[3..].iter().map(|t| t.text.as_str()).collect();
            out.push((words[0].line, prov, spec.join(" ")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_wordlist;
    use crate::corpus::CognateKey;
    use crate::patterns::{Site, SiteSource};

    fn wordlist() -> Wordlist {
        parse_wordlist(
            "ID\tLANGUAGE\tCONCEPT\tTOKENS\tCOGID\n\
             1\tL1\thand\th a n t\tc1\n\
             2\tL2\thand\th a n d\tc1\n\
             3\tL3\thand\tm a\tc2\n\
             4\tL4\teye\to k o\te1\n\
             5\tL1\teye\to k\te1\n",
        )
        .unwrap()
    }

    fn cells(s: &str) -> Vec<Cell> {
        s.chars().map(|c| Cell::from_symbol(c).unwrap()).collect()
    }

    fn column(m: &BinaryMatrix, c: usize) -> String {
        (0..m.n_taxa()).map(|t| m.cell(t, c).symbol()).collect()
    }

    #[test]
    fn cognate_encoding() {
        let m = encode_cognates(&wordlist());
        assert_eq!(m.taxa(), ["L1", "L2", "L3", "L4"]);
        assert_eq!(m.characters(), ["hand:c1", "hand:c2", "eye:e1"]);
        assert_eq!(column(&m, 0), "110?");
        assert_eq!(column(&m, 1), "001?");
        assert_eq!(column(&m, 2), "1??1");
    }

    #[test]
    fn synonyms_in_two_sets() {
        let wl = parse_wordlist(
            "ID\tLANGUAGE\tCONCEPT\tTOKENS\tCOGID\n\
             1\tL1\thand\th a n t\tc1\n\
             2\tL1\thand\tm a\tc2\n\
             3\tL2\thand\th a n d\tc1\n",
        )
        .unwrap();
        let m = encode_cognates(&wl);
        assert_eq!(column(&m, 0), "11");
        assert_eq!(column(&m, 1), "10");
    }

    #[test]
    fn single_set_all_present() {
        let wl = parse_wordlist(
            "ID\tLANGUAGE\tCONCEPT\tTOKENS\tCOGID\n1\tA\tx\tp\t1\n2\tB\tx\tp\t1\n",
        )
        .unwrap();
        assert_eq!(column(&encode_cognates(&wl), 0), "11");
    }

    fn site_for(concept: &str, pairs: &[(&str, &str)]) -> Site {
        Site {
            source: SiteSource {
                key: CognateKey {
                    concept: concept.into(),
                    cognate_id: "c1".into(),
                },
                column: 0,
            },
            assignment: pairs.iter().map(|(l, s)| (l.to_string(), s.to_string())).collect(),
        }
    }

    #[test]
    fn pattern_encoding() {
        let wl = wordlist();
        let s1 = site_for("hand", &[("L1", "t"), ("L2", "t"), ("L3", "d")]);
        let s2 = site_for("eye", &[("L4", "k")]);
        let patterns = vec![
            Pattern {
                id: 0,
                assignment: s1.assignment.clone(),
                members: vec![s1],
            },
            Pattern {
                id: 1,
                assignment: s2.assignment.clone(),
                members: vec![s2],
            },
        ];
        let m = encode_patterns(&patterns, &wl);
        assert_eq!(column(&m, 0), "111?");
        assert_eq!(column(&m, 1), "0??1");
        assert!(m.provenance().iter().all(|p| *p == Provenance::Pattern));
    }

    #[test]
    fn concatenation() {
        let a = BinaryMatrix::new(
            vec!["L1".into(), "L2".into()],
            vec!["a".into(), "b".into(), "c".into()],
            vec![Provenance::Cognate; 3],
            vec![cells("010"), cells("1?1")],
        )
        .unwrap();
        let b = BinaryMatrix::new(
            vec!["L2".into(), "L9".into()],
            vec!["d".into(), "e".into()],
            vec![Provenance::Pattern; 2],
            vec![cells("01"), cells("11")],
        )
        .unwrap();
        let ab = concatenate(&a, &b);
        assert_eq!(ab.taxa(), ["L1", "L2", "L9"]);
        assert_eq!(ab.n_chars(), 5);
        assert_eq!(ab.row(0), cells("010??").as_slice());
        assert_eq!(ab.row(1), cells("1?101").as_slice());
        assert_eq!(ab.row(2), cells("???11").as_slice());
        assert_eq!(ab.provenance()[3], Provenance::Pattern);
        assert_eq!(concatenate(&a, &BinaryMatrix::empty()), a);
    }

    #[test]
    fn nexus_round_trip() {
        let wl = wordlist();
        let m = concatenate(&encode_cognates(&wl), &encode_cognates(&wl));
        let text = write_nexus(&m);
        assert!(text.to_lowercase().contains("ntax=4 nchar=6"));
        assert!(text.contains("FORMAT DATATYPE=STANDARD SYMBOLS=\"01\" MISSING=? GAP=-;"));
        assert_eq!(read_nexus(&text).unwrap(), m);
    }

    #[test]
    fn nexus_quotes_labels() {
        let m = BinaryMatrix::new(
            vec!["Old English".into(), "Hittite".into()],
            vec!["x".into(), "y".into()],
            vec![Provenance::Cognate, Provenance::Pattern],
            vec![cells("01"), cells("1?")],
        )
        .unwrap();
        let text = write_nexus(&m);
        assert!(text.contains("'Old English'"));
        assert!(text.to_lowercase().contains("ntax=2 nchar=2"));
        assert_eq!(read_nexus(&text).unwrap(), m);
    }

    #[test]
    fn nexus_short_row_cites_taxon() {
        let text = "#NEXUS\nBEGIN DATA;\nDIMENSIONS NTAX=2 NCHAR=3;\nFORMAT DATATYPE=STANDARD SYMBOLS=\"01\" MISSING=? GAP=-;\nMATRIX\nA 010\nB 01\n;\nEND;\n";
        let err = read_nexus(text).unwrap_err();
        assert!(err.to_string().contains("taxon B"), "{err}");
        assert!(err.to_string().contains("line 7"), "{err}");
    }

    #[test]
    fn nexus_errors() {
        let bad_symbol = "#NEXUS\nBEGIN DATA;\nDIMENSIONS NTAX=1 NCHAR=2;\nMATRIX\nA 0x\n;\nEND;\n";
        assert!(read_nexus(bad_symbol).unwrap_err().to_string().contains("illegal state"));
        let wrong_ntax = "#NEXUS\nBEGIN DATA;\nDIMENSIONS NTAX=2 NCHAR=2;\nMATRIX\nA 01\n;\nEND;\n";
        assert!(read_nexus(wrong_ntax).is_err());
        let unterminated = "#NEXUS\nBEGIN DATA;\nDIMENSIONS NTAX=1 NCHAR=2;\nMATRIX\nA 01\n";
        assert!(read_nexus(unterminated).is_err());
        assert!(read_nexus("BEGIN DATA; END;").is_err());
    }

    #[test]
    fn nexus_without_labels_or_sets() {
        let text = "#NEXUS\n[comment]\nbegin data;\n dimensions ntax=2 nchar=4;\n format symbols=\"01\" missing=?;\n matrix\n A 01 0?\n B 1101\n ;\nend;\n";
        let m = read_nexus(text).unwrap();
        assert_eq!(m.characters(), ["1", "2", "3", "4"]);
        assert_eq!(m.row(0), cells("010?").as_slice());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix() -> impl Strategy<Value = BinaryMatrix> {
            (1usize..5, 1usize..8).prop_flat_map(|(nt, nc)| {
                (
                    proptest::collection::vec(proptest::collection::vec(0u8..3, nc), nt),
                    proptest::collection::vec(0u8..3, nc),
                )
                    .prop_map(move |(rows, provs)| {
                        let taxa = (0..nt).map(|t| format!("taxon {t}")).collect();
                        let chars = (0..nc).map(|c| format!("c:{c}")).collect();
                        let prov = provs
                            .iter()
                            .map(|p| [Provenance::Cognate, Provenance::Pattern, Provenance::Combined][*p as usize])
                            .collect();
                        let mut rows: Vec<Vec<Cell>> = rows
                            .iter()
                            .map(|r| r.iter().map(|v| [Cell::Absent, Cell::Present, Cell::Missing][*v as usize]).collect())
                            .collect();
                        for c in 0..nc {
                            if rows.iter().all(|r| r[c] == Cell::Missing) {
                                rows[0][c] = Cell::Present;
                            }
                        }
                        BinaryMatrix::new(taxa, chars, prov, rows).unwrap()
                    })
            })
        }

        proptest! {
            #[test]
            fn nexus_round_trips(m in matrix()) {
                prop_assert_eq!(read_nexus(&write_nexus(&m)).unwrap(), m);
            }

            #[test]
            fn concatenation_associative(a in matrix(), b in matrix(), c in matrix()) {
                let left = concatenate(&concatenate(&a, &b), &c);
                let right = concatenate(&a, &concatenate(&b, &c));
                prop_assert_eq!(left, right);
            }
        }
    }

    mod cognate_props {
        use super::*;
        use crate::corpus::{Wordlist, WordForm};
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn attested_concepts_are_fully_coded(rows in proptest::collection::vec((0usize..4, 0usize..4, 0usize..3), 1..30)) {
                let forms = rows
                    .iter()
                    .enumerate()
                    .map(|(i, &(l, c, cog))| WordForm {
                        id: i.to_string(),
                        language: format!("L{l}"),
                        concept: format!("c{c}"),
                        tokens: vec!["a".into()],
                        cognate_id: cog.to_string(),
                    })
                    .collect();
                let wl = Wordlist::new(forms).unwrap();
                let m = encode_cognates(&wl);
                prop_assert_eq!(m.n_taxa(), wl.languages().len());
                for (t, lang) in m.taxa().iter().enumerate() {
                    let attested = wl.attested_concepts(lang);
                    for concept in wl.concepts() {
                        let cols: Vec<usize> = (0..m.n_chars())
                            .filter(|&c| m.characters()[c].split(':').next() == Some(concept.as_str()))
                            .collect();
                        prop_assert!(!cols.is_empty());
                        if attested.contains(concept.as_str()) {
                            prop_assert!(cols.iter().all(|&c| m.cell(t, c) != Cell::Missing));
                            prop_assert!(cols.iter().any(|&c| m.cell(t, c) == Cell::Present));
                        } else {
                            prop_assert!(cols.iter().all(|&c| m.cell(t, c) == Cell::Missing));
                        }
                    }
                }
            }
        }
    }
}

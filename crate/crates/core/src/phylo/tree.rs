//! Rooted (multi)furcating trees and Newick I/O.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub label: Option<String>,
    /// Length of the branch to the parent.
    pub length: Option<f64>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Arena-backed tree. Node 0 is not necessarily the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    root: usize,
    pub rooted: bool,
}

impl Tree {
    /// A tree consisting of a single unlabeled root.
    pub fn new() -> Self {
        Tree {
            nodes: vec![Node {
                label: None,
                length: None,
                parent: None,
                children: Vec::new(),
            }],
            root: 0,
            rooted: false,
        }
    }

    pub fn add_child(&mut self, parent: usize, label: Option<String>, length: Option<f64>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            label,
            length,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: usize) -> &mut Node {
        &mut self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// Leaf node ids in depth-first (left to right) order.
    pub fn leaves(&self) -> Vec<usize> {
        self.preorder().into_iter().filter(|&n| self.is_leaf(n)).collect()
    }

    pub fn leaf_labels(&self) -> Vec<String> {
        self.leaves()
            .into_iter()
            .map(|n| self.nodes[n].label.clone().unwrap_or_default())
            .collect()
    }

    pub fn find_leaf(&self, label: &str) -> Option<usize> {
        self.leaves()
            .into_iter()
            .find(|&n| self.nodes[n].label.as_deref() == Some(label))
    }

    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    pub fn postorder(&self) -> Vec<usize> {
        let mut out = self.preorder();
        out.reverse();
        out
    }

    /// Every branch (non-root node) has a length.
    pub fn has_lengths(&self) -> bool {
        self.preorder()
            .into_iter()
            .filter(|&n| n != self.root)
            .all(|n| self.nodes[n].length.is_some())
    }

    pub fn set_all_lengths(&mut self, length: f64) {
        let root = self.root;
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if i != root {
                n.length = Some(length);
            }
        }
    }

    /// Orders every node's children by the smallest leaf label below them.
    pub fn sort_children_by_label(&mut self) {
        let mut smallest: Vec<Option<String>> = vec![None; self.len()];
        for n in self.postorder() {
            let node = &self.nodes[n];
            let own = node.label.clone().filter(|_| node.children.is_empty());
            smallest[n] = node
                .children
                .iter()
                .filter_map(|&c| smallest[c].clone())
                .chain(own)
                .min();
        }
        for node in &mut self.nodes {
            node.children.sort_by(|&a, &b| smallest[a].cmp(&smallest[b]));
        }
    }

    /// Builds a tree from raw nodes; the root is the single node without a
    /// parent.
    pub fn from_nodes(nodes: Vec<Node>, rooted: bool) -> Result<Self> {
        let roots: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].parent.is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Validation(format!("tree must have one root, found {}", roots.len())));
        }
        let tree = Tree {
            nodes,
            root: roots[0],
            rooted,
        };
        if tree.preorder().len() != tree.nodes.len() {
            return Err(Error::Validation("tree nodes are not connected".into()));
        }
        Ok(tree)
    }
}

impl Default for Tree {
    fn default() -> Self {
        Tree::new()
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    rooted: Option<bool>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse_at_pos(self.pos, msg)
    }

    fn skip_ws(&mut self) -> Result<()> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('[') => {
                    let start = self.pos;
                    let close = self.text[start..]
                        .find(']')
                        .ok_or_else(|| Error::parse_at_pos(start, "unterminated comment"))?;
                    let comment = &self.text[start + 1..start + close];
                    match comment.trim() {
                        c if c.eq_ignore_ascii_case("&R") => self.rooted = Some(true),
                        c if c.eq_ignore_ascii_case("&U") => self.rooted = Some(false),
                        _ => {}
                    }
                    self.pos = start + close + 1;
                }
                _ => return Ok(()),
            }
        }
    }

    fn label(&mut self) -> Result<Option<String>> {
        self.skip_ws()?;
        match self.peek() {
            Some('\'') => {
                let start = self.pos;
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some('\'') if self.peek() == Some('\'') => {
                            self.bump();
                            s.push('\'');
                        }
                        Some('\'') => return Ok(Some(s)),
                        Some(c) => s.push(c),
                        None => return Err(Error::parse_at_pos(start, "unterminated quoted label")),
                    }
                }
            }
            _ => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || "(),:;[]'".contains(c) {
                        break;
                    }
                    self.bump();
                }
                Ok((self.pos > start).then(|| self.text[start..self.pos].to_string()))
            }
        }
    }

    fn length(&mut self) -> Result<Option<f64>> {
        self.skip_ws()?;
        if self.peek() != Some(':') {
            return Ok(None);
        }
        self.bump();
        self.skip_ws()?;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || "+-.eE".contains(c) {
                self.bump();
            } else {
                break;
            }
        }
        let raw = &self.text[start..self.pos];
        let value: f64 = raw
            .parse()
            .map_err(|_| Error::parse_at_pos(start, format!("invalid branch length '{raw}'")))?;
        if value < 0.0 || !value.is_finite() {
            return Err(Error::parse_at_pos(start, format!("negative or non-finite branch length {raw}")));
        }
        Ok(Some(value))
    }

    /// Parses one subtree whose node has already been allocated as `id`.
    fn subtree(&mut self, nodes: &mut Vec<Node>, id: usize) -> Result<()> {
        self.skip_ws()?;
        if self.peek() == Some('(') {
            self.bump();
            loop {
                let child = nodes.len();
                nodes.push(Node {
                    label: None,
                    length: None,
                    parent: Some(id),
                    children: Vec::new(),
                });
                nodes[id].children.push(child);
                self.subtree(nodes, child)?;
                self.skip_ws()?;
                match self.bump() {
                    Some(',') => continue,
                    Some(')') => break,
                    Some(c) => return Err(Error::parse_at_pos(self.pos - c.len_utf8(), format!("unexpected '{c}'"))),
                    None => return Err(self.err("unexpected end of input, expected ')' or ','")),
                }
            }
        }
        nodes[id].label = self.label()?;
        nodes[id].length = self.length()?;
        if nodes[id].children.is_empty() && nodes[id].label.is_none() {
            return Err(self.err("leaf without label"));
        }
        Ok(())
    }
}

/// Parses a single Newick tree terminated by `;`.
pub fn parse_newick(text: &str) -> Result<Tree> {
    let mut parser = Parser {
        text,
        pos: 0,
        rooted: None,
    };
    let mut nodes = vec![Node {
        label: None,
        length: None,
        parent: None,
        children: Vec::new(),
    }];
    parser.skip_ws()?;
    if parser.peek().is_none() {
        return Err(parser.err("empty input"));
    }
    parser.subtree(&mut nodes, 0)?;
    parser.skip_ws()?;
    match parser.bump() {
        Some(';') => {}
        Some(c) => return Err(Error::parse_at_pos(parser.pos - c.len_utf8(), format!("unexpected '{c}'"))),
        None => return Err(parser.err("unexpected end of input, expected ';'")),
    }
    parser.skip_ws()?;
    if parser.peek().is_some() {
        return Err(parser.err("trailing characters after ';'"));
    }
    let mut seen = HashSet::new();
    for n in &nodes {
        if n.children.is_empty() {
            let label = n.label.as_deref().unwrap_or_default();
            if !seen.insert(label) {
                return Err(Error::parse_at_pos(0, format!("duplicate leaf label {label}")));
            }
        }
    }
    let rooted = parser.rooted.unwrap_or(nodes[0].children.len() == 2);
    Tree::from_nodes(nodes, rooted)
}

/// Parses one tree per non-empty line.
pub fn parse_newick_multi(text: &str) -> Result<Vec<Tree>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_newick(&format!("{s};")))
        .collect()
}

fn quote_label(label: &str) -> String {
    let plain = !label.is_empty()
        && label
            .chars()
            .all(|c| !c.is_whitespace() && !"(),:;[]'".contains(c));
    if plain {
        label.to_string()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

pub fn write_newick(tree: &Tree) -> String {
    fn go(tree: &Tree, id: usize, out: &mut String) {
        let node = tree.node(id);
        if !node.children.is_empty() {
            out.push('(');
            for (i, &c) in node.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                go(tree, c, out);
            }
            out.push(')');
        }
        if let Some(l) = &node.label {
            out.push_str(&quote_label(l));
        }
        if let Some(len) = node.length {
            let _ = write!(out, ":{len}");
        }
    }
    let mut out = String::new();
    go(tree, tree.root(), &mut out);
    out.push(';');
    out
}

//! Sound-correspondence patterns.
//!
//! Every alignment column is a *site*: a partial map from languages to the
//! sound (or gap) they show in that column. Sites that never disagree on a
//! shared language are compatible and can be merged into one pattern.
//! Patterns are built greedily, largest sites first.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::align::{Alignment, GAP};
use crate::corpus::CognateKey;

/// Language to sound, ordered by language name.
pub type Assignment = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteSource {
    pub key: CognateKey,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Site {
    pub source: SiteSource,
    pub assignment: Assignment,
}

impl Site {
    pub fn concept(&self) -> &str {
        &self.source.key.concept
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub id: usize,
    pub assignment: Assignment,
    pub members: Vec<Site>,
}

/// One site per alignment column, skipping columns that are gaps in every row.
pub fn extract_sites(alignments: &[Alignment]) -> Vec<Site> {
    let mut sites = Vec::new();
    for aln in alignments {
        for column in 0..aln.width() {
            if aln.column(column).all(|(_, s)| s == GAP) {
                continue;
            }
            let assignment = aln
                .column(column)
                .map(|(l, s)| (l.to_string(), s.to_string()))
                .collect();
            sites.push(Site {
                source: SiteSource {
                    key: aln.key.clone(),
                    column,
                },
                assignment,
            });
        }
    }
    sites
}

fn compatible(a: &Assignment, b: &Assignment) -> bool {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .all(|(lang, sound)| large.get(lang).is_none_or(|other| other == sound))
}

/// True when the site and the pattern agree on every language they share.
pub fn site_compatible(site: &Site, pattern: &Pattern) -> bool {
    compatible(&site.assignment, &pattern.assignment)
}

/// Greedy compatibility clustering of sites into patterns.
pub fn detect_patterns(sites: &[Site]) -> Vec<Pattern> {
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by(|&a, &b| {
        sites[b]
            .assignment
            .len()
            .cmp(&sites[a].assignment.len())
            .then(a.cmp(&b))
    });

    let mut patterns: Vec<Pattern> = Vec::new();
    for idx in order {
        let site = &sites[idx];
        let mut candidates: Vec<usize> = (0..patterns.len()).collect();
        candidates.sort_by(|&a, &b| {
            patterns[b]
                .members
                .len()
                .cmp(&patterns[a].members.len())
                .then(patterns[a].id.cmp(&patterns[b].id))
        });
        match candidates
            .into_iter()
            .find(|&p| site_compatible(site, &patterns[p]))
        {
            Some(p) => {
                let pattern = &mut patterns[p];
                for (lang, sound) in &site.assignment {
                    pattern
                        .assignment
                        .entry(lang.clone())
                        .or_insert_with(|| sound.clone());
                }
                pattern.members.push(site.clone());
            }
            None => patterns.push(Pattern {
                id: patterns.len(),
                assignment: site.assignment.clone(),
                members: vec![site.clone()],
            }),
        }
    }
    patterns
}

/// One line per pattern: `id<TAB>size<TAB>lang:sound,lang:sound,...`.
pub fn write_patterns(patterns: &[Pattern]) -> String {
    let mut out = String::new();
    for p in patterns {
        let pairs: Vec<String> = p
            .assignment
            .iter()
            .map(|(l, s)| format!("{l}:{s}"))
            .collect();
        let _ = writeln!(out, "{}\t{}\t{}", p.id, p.members.len(), pairs.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(n: usize, pairs: &[(&str, &str)]) -> Site {
        Site {
            source: SiteSource {
                key: CognateKey {
                    concept: format!("c{n}"),
                    cognate_id: "1".into(),
                },
                column: 0,
            },
            assignment: pairs
                .iter()
                .map(|(l, s)| (l.to_string(), s.to_string()))
                .collect(),
        }
    }

    fn pattern(pairs: &[(&str, &str)]) -> Pattern {
        Pattern {
            id: 0,
            assignment: site(0, pairs).assignment,
            members: vec![site(0, pairs)],
        }
    }

    /// Minimum number of groups of pairwise-compatible sites, by brute force
    /// over all assignments of sites to groups.
    fn min_clique_cover(sites: &[Site]) -> usize {
        fn go(i: usize, sites: &[Site], groups: &mut Vec<Vec<usize>>, best: &mut usize) {
            if groups.len() >= *best {
                return;
            }
            if i == sites.len() {
                *best = groups.len();
                return;
            }
            for g in 0..groups.len() {
                if groups[g]
                    .iter()
                    .all(|&j| compatible(&sites[i].assignment, &sites[j].assignment))
                {
                    groups[g].push(i);
                    go(i + 1, sites, groups, best);
                    groups[g].pop();
                }
            }
            groups.push(vec![i]);
            go(i + 1, sites, groups, best);
            groups.pop();
        }
        let mut best = sites.len().max(1) + 1;
        go(0, sites, &mut Vec::new(), &mut best);
        if sites.is_empty() { 0 } else { best }
    }

    #[test]
    fn extraction() {
        let aln = Alignment::new(
            CognateKey {
                concept: "hand".into(),
                cognate_id: "1".into(),
            },
            vec![
                ("L1".into(), vec!["h".into(), "a".into(), "t".into()]),
                ("L2".into(), vec!["h".into(), "a".into(), "-".into()]),
            ],
        )
        .unwrap();
        let sites = extract_sites(&[aln]);
        assert_eq!(sites.len(), 3);
        assert!(sites.iter().all(|s| s.assignment.len() == 2));
        assert_eq!(sites[2].assignment["L1"], "t");
        assert_eq!(sites[2].assignment["L2"], "-");
        assert_eq!(sites[2].concept(), "hand");
        assert!(extract_sites(&[]).is_empty());
    }

    #[test]
    fn compatibility() {
        let p = pattern(&[("L2", "t"), ("L3", "t")]);
        assert!(site_compatible(&site(1, &[("L1", "k")]), &p));
        assert!(site_compatible(&site(1, &[("L2", "t")]), &p));
        assert!(!site_compatible(&site(1, &[("L3", "d")]), &p));
    }

    #[test]
    fn three_sites_one_pattern() {
        let sites = vec![
            site(1, &[("L1", "t"), ("L2", "t")]),
            site(2, &[("L2", "t"), ("L3", "d")]),
            site(3, &[("L1", "t"), ("L3", "d")]),
        ];
        let patterns = detect_patterns(&sites);
        assert_eq!(patterns.len(), 1);
        assert_eq!(patterns[0].members.len(), 3);
        assert_eq!(patterns[0].assignment.len(), 3);
        assert_eq!(patterns[0].assignment["L3"], "d");
        assert_eq!(min_clique_cover(&sites), 1);
    }

    #[test]
    fn conflict_gives_two_patterns() {
        let sites = vec![site(1, &[("L1", "t")]), site(2, &[("L1", "d")])];
        assert_eq!(detect_patterns(&sites).len(), 2);
    }

    #[test]
    fn deterministic() {
        let sites = vec![
            site(1, &[("L1", "t"), ("L2", "d")]),
            site(2, &[("L1", "t")]),
            site(3, &[("L2", "s"), ("L3", "d")]),
            site(4, &[("L1", "k"), ("L3", "d")]),
        ];
        assert_eq!(detect_patterns(&sites), detect_patterns(&sites));
    }

    #[test]
    fn dump_format() {
        let sites = vec![site(1, &[("L1", "t"), ("L2", "d")])];
        let text = write_patterns(&detect_patterns(&sites));
        assert_eq!(text, "0\t1\tL1:t,L2:d\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sites_strategy(max: usize) -> impl Strategy<Value = Vec<Site>> {
            let langs = ["L1", "L2", "L3", "L4"];
            proptest::collection::vec(
                proptest::collection::btree_map(
                    prop::sample::select(langs.to_vec()),
                    prop::sample::select(vec!["t", "d", "-"]),
                    1..4,
                ),
                0..max,
            )
            .prop_map(|maps| {
                maps.into_iter()
                    .enumerate()
                    .map(|(i, m)| Site {
                        source: SiteSource {
                            key: CognateKey {
                                concept: format!("c{i}"),
                                cognate_id: "1".into(),
                            },
                            column: i,
                        },
                        assignment: m
                            .into_iter()
                            .map(|(l, s)| (l.to_string(), s.to_string()))
                            .collect(),
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn partition_and_consistency(sites in sites_strategy(30)) {
                let patterns = detect_patterns(&sites);
                let total: usize = patterns.iter().map(|p| p.members.len()).sum();
                prop_assert_eq!(total, sites.len());
                let mut sources: Vec<_> = patterns
                    .iter()
                    .flat_map(|p| p.members.iter().map(|m| m.source.clone()))
                    .collect();
                sources.sort();
                sources.dedup();
                prop_assert_eq!(sources.len(), sites.len());
                for p in &patterns {
                    let mut union = Assignment::new();
                    for (i, a) in p.members.iter().enumerate() {
                        for b in &p.members[i + 1..] {
                            prop_assert!(compatible(&a.assignment, &b.assignment));
                        }
                        union.extend(a.assignment.clone());
                    }
                    prop_assert_eq!(&union, &p.assignment);
                }
            }

            #[test]
            fn never_beats_exact_cover(sites in sites_strategy(9)) {
                let patterns = detect_patterns(&sites);
                prop_assert!(patterns.len() >= min_clique_cover(&sites));
            }

            #[test]
            fn conflicting_site_adds_one_pattern(sites in sites_strategy(12)) {
                let before = detect_patterns(&sites).len();
                // Uses a sound that no generated site carries on every language.
                let mut extended = sites.clone();
                extended.push(Site {
                    source: SiteSource {
                        key: CognateKey { concept: "new".into(), cognate_id: "1".into() },
                        column: 0,
                    },
                    assignment: ["L1", "L2", "L3", "L4"]
                        .iter()
                        .map(|l| (l.to_string(), "ʘ".to_string()))
                        .collect(),
                });
                prop_assert_eq!(detect_patterns(&extended).len(), before + 1);
            }
        }
    }
}

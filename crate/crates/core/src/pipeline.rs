//! End-to-end workflow: wordlist to matrices, trees and an evaluation report.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::align::{align_wordlist, trim_alignment, write_alignments, ScoringScheme};
use crate::corpus::{parse_wordlist, Wordlist};
use crate::encode::{concatenate, encode_cognates, encode_patterns, write_nexus, BinaryMatrix};
use crate::eval::{gqd, median, posterior_gqd_median, write_report, ReportRow};
use crate::patterns::{detect_patterns, extract_sites, write_patterns};
use crate::phylo::mcmc::{mcmc_run, write_trace, McmcConfig};
use crate::phylo::search::{ml_search, MlConfig};
use crate::phylo::tree::{parse_newick, write_newick};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CharacterType {
    Cognates,
    Patterns,
    Combined,
}

impl CharacterType {
    pub const ALL: [CharacterType; 3] = [CharacterType::Cognates, CharacterType::Patterns, CharacterType::Combined];

    pub fn name(self) -> &'static str {
        match self {
            CharacterType::Cognates => "cognates",
            CharacterType::Patterns => "patterns",
            CharacterType::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inference {
    Ml,
    Mcmc,
    Both,
}

impl Inference {
    fn ml(self) -> bool {
        matches!(self, Inference::Ml | Inference::Both)
    }

    fn mcmc(self) -> bool {
        matches!(self, Inference::Mcmc | Inference::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub match_score: f64,
    pub mismatch: f64,
    pub gap: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        let s = ScoringScheme::default();
        ScoringConfig {
            match_score: s.match_score,
            mismatch: s.mismatch,
            gap: s.gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub wordlist: PathBuf,
    pub gold_tree: PathBuf,
    pub output: PathBuf,
    pub seed: u64,
    #[serde(default = "default_dataset")]
    pub dataset: String,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default = "default_types")]
    pub character_types: Vec<CharacterType>,
    #[serde(default = "default_inference")]
    pub inference: Inference,
    #[serde(default)]
    pub ml: MlConfig,
    #[serde(default)]
    pub mcmc: McmcConfig,
}

fn default_dataset() -> String {
    "dataset".into()
}

fn default_tau() -> f64 {
    0.5
}

fn default_types() -> Vec<CharacterType> {
    CharacterType::ALL.to_vec()
}

fn default_inference() -> Inference {
    Inference::Both
}

impl PipelineConfig {
    /// Reads a TOML config; relative paths are taken relative to the file.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.wordlist, &mut config.gold_tree, &mut config.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        for (name, p) in [("wordlist", &self.wordlist), ("gold_tree", &self.gold_tree), ("output", &self.output)] {
            if p.as_os_str().is_empty() {
                bail!("{name} path is empty");
            }
        }
        if self.character_types.is_empty() {
            bail!("no character types selected");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            bail!("tau {} outside [0, 1]", self.tau);
        }
        Ok(())
    }
}

/// Output of [`run_pipeline`]: the report rows and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub report: Vec<ReportRow>,
    pub artifacts: Vec<PathBuf>,
}

struct Writer {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, relative: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.root.join(relative);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }
}

fn stage<T, E>(name: &str, r: Result<T, E>) -> anyhow::Result<T>
where
    E: std::error::Error + Send + Sync + 'static,
{
    r.with_context(|| format!("stage {name}"))
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

/// Builds the character matrices for the selected types.
pub fn build_matrices(
    wordlist: &Wordlist,
    scheme: &ScoringScheme,
    tau: f64,
    types: &[CharacterType],
) -> anyhow::Result<(String, String, Vec<(CharacterType, BinaryMatrix)>)> {
    let alignments = stage("align", align_wordlist(wordlist, scheme))?;
    let trimmed: Vec<_> = alignments.iter().map(|a| trim_alignment(a, tau)).collect();
    let patterns = detect_patterns(&extract_sites(&trimmed));
    let cognates = encode_cognates(wordlist);
    let pattern_matrix = encode_patterns(&patterns, wordlist);
    let mut out = Vec::new();
    for t in CharacterType::ALL {
        if !types.contains(&t) {
            continue;
        }
        let m = match t {
            CharacterType::Cognates => cognates.clone(),
            CharacterType::Patterns => pattern_matrix.clone(),
            CharacterType::Combined => concatenate(&cognates, &pattern_matrix),
        };
        out.push((t, m));
    }
    Ok((write_alignments(&trimmed), write_patterns(&patterns), out))
}

/// Runs every stage and writes all artifacts under `config.output`.
pub fn run_pipeline(config: &PipelineConfig) -> anyhow::Result<PipelineOutput> {
    config.validate()?;
    let text = fs::read_to_string(&config.wordlist)
        .with_context(|| format!("stage parse: reading {}", config.wordlist.display()))?;
    let wordlist = stage("parse", parse_wordlist(&text))?;
    let gold_text = fs::read_to_string(&config.gold_tree)
        .with_context(|| format!("stage gold: reading {}", config.gold_tree.display()))?;
    let gold = stage("gold", parse_newick(&gold_text))?;
    let scheme = stage(
        "align",
        ScoringScheme::new(config.scoring.match_score, config.scoring.mismatch, config.scoring.gap),
    )?;
    let (alignments, patterns, matrices) = build_matrices(&wordlist, &scheme, config.tau, &config.character_types)?;

    let mut w = Writer {
        root: config.output.clone(),
        written: Vec::new(),
    };
    w.write("alignments.tsv", &alignments)?;
    w.write("patterns.tsv", &patterns)?;
    let mut report = Vec::new();
    for (kind, matrix) in &matrices {
        let name = kind.name();
        w.write(&format!("matrix_{name}.nex"), &write_nexus(matrix))?;
        let mut row = |statistic: &str, value: String| {
            report.push(ReportRow {
                dataset: config.dataset.clone(),
                character_type: name.to_string(),
                statistic: statistic.to_string(),
                value,
            })
        };
        row("n_characters", matrix.n_chars().to_string());
        if matrix.n_chars() == 0 {
            log::warn!("no {name} characters; skipping inference");
            continue;
        }
        if config.inference.ml() {
            let ml_config = MlConfig {
                seed: derive_seed(config.seed, &format!("ml-{name}"), 0),
                ..config.ml.clone()
            };
            let result = stage("infer-ml", ml_search(matrix, &ml_config))?;
            let best = result.best();
            w.write(&format!("{name}/ml_best.nwk"), &format!("{}\n", write_newick(&best.tree)))?;
            w.write(&format!("{name}/ml_searches.tsv"), &ml_summary(&result))?;
            let d = stage("gqd", gqd(&best.tree, &gold))?;
            row("ml_log_likelihood", fmt(best.log_likelihood));
            row("ml_alpha", best.gamma.alpha.map_or("NA".into(), fmt));
            row("ml_pi1", fmt(best.model.pi1()));
            row("ml_gqd", fmt(d.distance));
        }
        if config.inference.mcmc() {
            let mcmc_config = McmcConfig {
                seed: derive_seed(config.seed, &format!("mcmc-{name}"), 0),
                ..config.mcmc.clone()
            };
            let result = stage("infer-mcmc", mcmc_run(matrix, &mcmc_config))?;
            for (k, run) in result.runs.iter().enumerate() {
                let trees: String = run
                    .samples
                    .iter()
                    .map(|s| format!("{}\n", write_newick(&s.substitution_tree())))
                    .collect();
                w.write(&format!("{name}/mcmc_run{}.trees", k + 1), &trees)?;
                w.write(&format!("{name}/mcmc_run{}.log", k + 1), &write_trace(run))?;
            }
            let posterior: String = result.posterior.iter().map(|t| format!("{}\n", write_newick(t))).collect();
            w.write(&format!("{name}/posterior.trees"), &posterior)?;
            row("mcmc_converged", result.converged.to_string());
            row("mcmc_generations", result.generations.to_string());
            row("mcmc_asdsf", result.asdsf.map_or("NA".into(), fmt));
            if result.posterior.is_empty() {
                row("mcmc_gqd_median", "NA".into());
            } else {
                row("mcmc_gqd_median", fmt(stage("gqd", posterior_gqd_median(&result.posterior, &gold))?));
            }
            let mut alphas: Vec<f64> = result
                .runs
                .iter()
                .flat_map(|r| r.retained(mcmc_config.burnin_fraction))
                .filter_map(|s| s.alpha)
                .collect();
            row("mcmc_alpha_median", median(&mut alphas).map_or("NA".into(), fmt));
        }
    }
    w.write("report.tsv", &write_report(&report))?;
    Ok(PipelineOutput {
        report,
        artifacts: w.written,
    })
}

fn ml_summary(result: &crate::phylo::search::MlResult) -> String {
    let mut out = String::from("search\tstart\tlog_likelihood\talpha\tpi1\tbest\ttree\n");
    for (i, r) in result.results.iter().enumerate() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            i + 1,
            r.start.name(),
            fmt(r.log_likelihood),
            r.gamma.alpha.map_or("NA".into(), fmt),
            fmt(r.model.pi1()),
            i == result.best,
            write_newick(&r.tree)
        ));
    }
    out
}

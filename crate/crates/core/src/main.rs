use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use lexiphylo::align::{align_wordlist, read_alignments, trim_alignment, write_alignments, ScoringScheme};
use lexiphylo::corpus::{parse_wordlist, summarize};
use lexiphylo::encode::{read_nexus, write_nexus};
use lexiphylo::eval::{gqd, posterior_gqd_median};
use lexiphylo::patterns::{detect_patterns, extract_sites, write_patterns};
use lexiphylo::phylo::mcmc::{mcmc_run, write_trace, AlphaPrior, McmcConfig};
use lexiphylo::phylo::model::{discretize_gamma, BinaryCtmc, GammaRates};
use lexiphylo::phylo::search::{ml_search, MlConfig};
use lexiphylo::phylo::simulate::simulate_matrix;
use lexiphylo::phylo::tree::{parse_newick, parse_newick_multi, write_newick};
use lexiphylo::pipeline::{build_matrices, run_pipeline, CharacterType, PipelineConfig};

#[derive(Parser)]
#[command(name = "lexiphylo", version, about = "Lexical and sound-correspondence characters for phylogenetic inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Scoring {
    #[arg(long = "match", default_value_t = 1.0, allow_hyphen_values = true)]
    match_score: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    mismatch: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    gap: f64,
}

impl Scoring {
    fn scheme(&self) -> Result<ScoringScheme> {
        Ok(ScoringScheme::new(self.match_score, self.mismatch, self.gap)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorKind {
    Uniform,
    Exponential,
}

#[derive(Subcommand)]
enum Command {
    /// Words, concepts, languages and average cognate distance of a wordlist.
    Summarize { wordlist: PathBuf },
    /// Align the forms of every cognate set.
    Align {
        wordlist: PathBuf,
        #[command(flatten)]
        scoring: Scoring,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Drop alignment columns whose gap fraction exceeds tau.
    Trim {
        alignments: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Detect sound-correspondence patterns in trimmed alignments.
    Patterns {
        alignments: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Encode a wordlist as a binary Nexus matrix.
    Encode {
        wordlist: PathBuf,
        /// Trimmed alignments; computed from the wordlist when omitted.
        #[arg(long)]
        alignments: Option<PathBuf>,
        #[arg(long = "type", value_enum, default_value = "cognates")]
        kind: CharacterKind,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[command(flatten)]
        scoring: Scoring,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Maximum-likelihood tree search on a Nexus matrix.
    InferMl {
        matrix: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        n_random: usize,
        #[arg(long, default_value_t = 10)]
        n_parsimony: usize,
        /// Gamma categories; 1 gives the model without rate variation.
        #[arg(long, default_value_t = 4)]
        categories: usize,
        /// Condition the likelihood on variable characters.
        #[arg(long)]
        conditioned: bool,
        /// Write the best tree here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write a per-search summary table.
        #[arg(long)]
        searches: Option<PathBuf>,
    },
    /// Strict-clock Bayesian inference on a Nexus matrix.
    InferMcmc {
        matrix: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        generations_max: u64,
        #[arg(long, default_value_t = 1000)]
        sample_every: u64,
        #[arg(long, default_value_t = 2)]
        runs: usize,
        #[arg(long, default_value_t = 0.25)]
        burnin_fraction: f64,
        #[arg(long, default_value_t = 0.01)]
        asdsf_target: f64,
        #[arg(long, value_enum, default_value = "uniform")]
        alpha_prior: PriorKind,
        #[arg(long, default_value_t = 4)]
        categories: usize,
        #[arg(long)]
        prior_only: bool,
        /// Directory for mcmc_run<k>.trees, mcmc_run<k>.log and posterior.trees.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generalized quartet distance of inferred tree(s) to a gold tree.
    Gqd { inferred: PathBuf, gold: PathBuf },
    /// Simulate a binary matrix on a tree with branch lengths.
    Simulate {
        tree: PathBuf,
        #[arg(long, default_value_t = 1000)]
        chars: usize,
        #[arg(long, default_value_t = 0.5)]
        pi1: f64,
        /// Gamma shape; omit for equal rates.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 4)]
        categories: usize,
        #[arg(long, default_value_t = 0.0)]
        missing: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the whole workflow from a TOML config.
    Pipeline {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CharacterKind {
    Cognates,
    Patterns,
    Combined,
}

impl From<CharacterKind> for CharacterType {
    fn from(k: CharacterKind) -> Self {
        match k {
            CharacterKind::Cognates => CharacterType::Cognates,
            CharacterKind::Patterns => CharacterType::Patterns,
            CharacterKind::Combined => CharacterType::Combined,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn stage_name(command: &Command) -> &'static str {
    match command {
        Command::Summarize { .. } => "summarize",
        Command::Align { .. } => "align",
        Command::Trim { .. } => "trim",
        Command::Patterns { .. } => "patterns",
        Command::Encode { .. } => "encode",
        Command::InferMl { .. } => "infer-ml",
        Command::InferMcmc { .. } => "infer-mcmc",
        Command::Gqd { .. } => "gqd",
        Command::Simulate { .. } => "simulate",
        Command::Pipeline { .. } => "pipeline",
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Summarize { wordlist } => {
            let wl = parse_wordlist(&read(&wordlist)?)?;
            let s = summarize(&wl)?;
            println!("words\t{}", s.words);
            println!("concepts\t{}", s.concepts);
            println!("languages\t{}", s.languages);
            println!("avg_distance\t{:.4}", s.avg_distance);
            println!("avg_sounds\t{:.2}", s.avg_sounds);
            println!("avg_word_length\t{:.2}", s.avg_word_length);
        }
        Command::Align { wordlist, scoring, output } => {
            let wl = parse_wordlist(&read(&wordlist)?)?;
            let alignments = align_wordlist(&wl, &scoring.scheme()?)?;
            emit(output.as_deref(), &write_alignments(&alignments))?;
        }
        Command::Trim { alignments, tau, output } => {
            if !(0.0..=1.0).contains(&tau) {
                anyhow::bail!("tau {tau} outside [0, 1]");
            }
            let alns = read_alignments(&read(&alignments)?)?;
            let trimmed: Vec<_> = alns.iter().map(|a| trim_alignment(a, tau)).collect();
            emit(output.as_deref(), &write_alignments(&trimmed))?;
        }
        Command::Patterns { alignments, output } => {
            let alns = read_alignments(&read(&alignments)?)?;
            emit(output.as_deref(), &write_patterns(&detect_patterns(&extract_sites(&alns))))?;
        }
        Command::Encode {
            wordlist,
            alignments,
            kind,
            tau,
            scoring,
            output,
        } => {
            let wl = parse_wordlist(&read(&wordlist)?)?;
            let kind = CharacterType::from(kind);
            let matrix = match alignments {
                Some(path) => {
                    let alns = read_alignments(&read(&path)?)?;
                    let patterns = detect_patterns(&extract_sites(&alns));
                    let cognates = lexiphylo::encode::encode_cognates(&wl);
                    let pm = lexiphylo::encode::encode_patterns(&patterns, &wl);
                    match kind {
                        CharacterType::Cognates => cognates,
                        CharacterType::Patterns => pm,
                        CharacterType::Combined => lexiphylo::encode::concatenate(&cognates, &pm),
                    }
                }
                None => {
                    let (_, _, mut matrices) = build_matrices(&wl, &scoring.scheme()?, tau, &[kind])?;
                    matrices.pop().expect("one matrix").1
                }
            };
            emit(output.as_deref(), &write_nexus(&matrix))?;
        }
        Command::InferMl {
            matrix,
            seed,
            n_random,
            n_parsimony,
            categories,
            conditioned,
            output,
            searches,
        } => {
            let m = read_nexus(&read(&matrix)?)?;
            let config = MlConfig {
                seed,
                n_random,
                n_parsimony,
                gamma_categories: categories,
                conditioned,
                ..MlConfig::default()
            };
            let result = ml_search(&m, &config)?;
            let best = result.best();
            eprintln!(
                "best log-likelihood {:.6}, alpha {}, pi1 {:.6}",
                best.log_likelihood,
                best.gamma.alpha.map_or("NA".to_string(), |a| format!("{a:.6}")),
                best.model.pi1()
            );
            if let Some(path) = searches {
                let mut text = String::from("search\tstart\tlog_likelihood\ttree\n");
                for (i, r) in result.results.iter().enumerate() {
                    text.push_str(&format!("{}\t{}\t{:.6}\t{}\n", i + 1, r.start.name(), r.log_likelihood, write_newick(&r.tree)));
                }
                emit(Some(&path), &text)?;
            }
            emit(output.as_deref(), &format!("{}\n", write_newick(&best.tree)))?;
        }
        Command::InferMcmc {
            matrix,
            seed,
            generations_max,
            sample_every,
            runs,
            burnin_fraction,
            asdsf_target,
            alpha_prior,
            categories,
            prior_only,
            output,
        } => {
            let m = read_nexus(&read(&matrix)?)?;
            let config = McmcConfig {
                seed,
                generations_max,
                sample_every,
                runs,
                burnin_fraction,
                asdsf_target,
                alpha_prior: match alpha_prior {
                    PriorKind::Uniform => AlphaPrior::default(),
                    PriorKind::Exponential => AlphaPrior::Exponential { rate: 1.0 },
                },
                gamma_categories: categories,
                prior_only,
                ..McmcConfig::default()
            };
            let result = mcmc_run(&m, &config)?;
            fs::create_dir_all(&output).with_context(|| format!("creating {}", output.display()))?;
            for (k, run) in result.runs.iter().enumerate() {
                let trees: String = run
                    .samples
                    .iter()
                    .map(|s| format!("{}\n", write_newick(&s.substitution_tree())))
                    .collect();
                emit(Some(&output.join(format!("mcmc_run{}.trees", k + 1))), &trees)?;
                emit(Some(&output.join(format!("mcmc_run{}.log", k + 1))), &write_trace(run))?;
            }
            let posterior: String = result.posterior.iter().map(|t| format!("{}\n", write_newick(t))).collect();
            emit(Some(&output.join("posterior.trees")), &posterior)?;
            println!("converged\t{}", result.converged);
            println!("generations\t{}", result.generations);
            println!("asdsf\t{}", result.asdsf.map_or("NA".to_string(), |a| format!("{a:.6}")));
        }
        Command::Gqd { inferred, gold } => {
            let gold = parse_newick(&read(&gold)?)?;
            let trees = parse_newick_multi(&read(&inferred)?)?;
            if let [tree] = trees.as_slice() {
                let r = gqd(tree, &gold)?;
                println!("gqd\t{:.6}", r.distance);
                println!("butterflies_gold\t{}", r.butterflies_gold);
                println!("discordant\t{}", r.discordant);
                println!("common_taxa\t{}", r.common_taxa);
            } else {
                println!("trees\t{}", trees.len());
                println!("gqd_median\t{:.6}", posterior_gqd_median(&trees, &gold)?);
            }
        }
        Command::Simulate {
            tree,
            chars,
            pi1,
            alpha,
            categories,
            missing,
            seed,
            output,
        } => {
            let t = parse_newick(&read(&tree)?)?;
            let gamma = match alpha {
                Some(a) => discretize_gamma(a, categories)?,
                None => GammaRates::uniform(),
            };
            let m = simulate_matrix(&t, &BinaryCtmc::new(pi1)?, &gamma, chars, missing, seed)?;
            emit(output.as_deref(), &write_nexus(&m))?;
        }
        Command::Pipeline { config, output, seed } => {
            let mut c = PipelineConfig::load(&config)?;
            if let Some(o) = output {
                c.output = o;
            }
            if let Some(s) = seed {
                c.seed = s;
            }
            let out = run_pipeline(&c)?;
            print!("{}", lexiphylo::eval::write_report(&out.report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let stage = stage_name(&cli.command);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: stage {stage}: {e:#}");
            ExitCode::FAILURE
        }
    }
}

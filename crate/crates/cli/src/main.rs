use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::warn;
use serde_json::json;

use familia::corpus::{Corpus, FactorSlot, Schema};
use familia::inference::infer_corpus;
use familia::model::{ModelConfig, TopicModel};
use familia::semantics::{generative_score, hellinger, jsd};
use familia::trainer::{train, TrainOptions, DEFAULT_CHECKPOINT_EVERY};
use familia::parse_schedule;

/// Configurable topic models: LDA, SentenceLDA, topics over time and
/// supervised LDA from one corpus format.
#[derive(Parser, Debug)]
#[command(name = "familia", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write model.json, report.csv and manifest.json.
    Train(TrainArgs),
    /// Print the most probable items of every topic.
    Topics {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
    },
    /// Infer topic proportions for each line of a corpus file.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score query/document pairs, one pair per line of the two inputs.
    Score(ScoreArgs),
}

#[derive(clap::Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    topics: usize,
    /// GS, MH<steps>, <a>MH-<b>GS, GS-to-MH@<t> or MH-to-GS@<t>.
    #[arg(long, default_value = "GS")]
    schedule: String,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Symmetric document prior; defaults to 50 / topics.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write a checkpoint every N iterations; 0 disables.
    #[arg(long, default_value_t = DEFAULT_CHECKPOINT_EVERY)]
    checkpoint_every: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ScoreMode {
    Jsd,
    Hellinger,
    Generative,
}

#[derive(clap::Args, Debug)]
struct ScoreArgs {
    #[arg(long, value_enum)]
    mode: ScoreMode,
    /// Query lines: topic vectors, or tokens in generative mode.
    #[arg(long)]
    queries: PathBuf,
    /// Document topic vectors, one per line.
    #[arg(long)]
    docs: PathBuf,
    /// Model file; required in generative mode.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Discrete factor the query tokens belong to.
    #[arg(long, default_value_t = 0)]
    factor: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn load_model(path: &Path) -> Result<TopicModel> {
    TopicModel::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let schema = Schema::parse(&read(&args.schema)?).with_context(|| format!("schema {}", args.schema.display()))?;
    let corpus = Corpus::parse(&read(&args.corpus)?, &schema).with_context(|| format!("corpus {}", args.corpus.display()))?;
    let schedule = parse_schedule(&args.schedule, args.iters)?;
    let mut config = ModelConfig::new(schema, args.topics).with_beta(args.beta);
    if let Some(alpha) = args.alpha {
        config = config.with_alpha(alpha);
    }
    config.validate().context("invalid model configuration")?;
    ensure!(args.workers >= 1, "--workers must be at least 1");

    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let manifest = json!({
        "command": "train",
        "corpus": args.corpus,
        "schema": args.schema,
        "topics": args.topics,
        "schedule": args.schedule,
        "iters": args.iters,
        "alpha": config.alpha[0],
        "beta": args.beta,
        "workers": args.workers,
        "seed": args.seed,
        "out": args.out,
        "checkpoint_every": args.checkpoint_every,
        "version": env!("CARGO_PKG_VERSION"),
    });
    write(&args.out.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;

    let options = TrainOptions {
        schedule,
        seed: args.seed,
        workers: args.workers,
        checkpoint_every: args.checkpoint_every,
        checkpoint_dir: (args.checkpoint_every > 0).then(|| args.out.join("checkpoints")),
    };
    let (state, report) = train(corpus, config, &options)?;
    let model_path = args.out.join("model.json");
    state.to_model(true).save(&model_path).with_context(|| format!("cannot write {}", model_path.display()))?;
    write(&args.out.join("report.csv"), &report.to_csv())?;
    println!(
        "trained {} topics for {} iterations; log-likelihood {:.6} -> {:.6}; model written to {}",
        args.topics,
        report.records.len(),
        report.initial_log_likelihood,
        report.final_log_likelihood(),
        model_path.display()
    );
    Ok(())
}

fn cmd_topics(model_path: &Path, top_n: usize) -> Result<()> {
    let model = load_model(model_path)?;
    let schema = &model.config.schema;
    let mut out = String::new();
    for k in 0..model.num_topics() {
        for factor_id in 0..schema.num_factors() {
            let Some(FactorSlot::Discrete(i)) = schema.slot(factor_id) else { continue };
            out.push_str(&format!("topic {k} factor {factor_id}\n"));
            let phi = model.phi(factor_id, k)?;
            let mut order: Vec<usize> = (0..phi.len()).collect();
            order.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));
            for &u in order.iter().take(top_n) {
                let token = model.vocabs[i].token(u as u32).unwrap_or("?");
                out.push_str(&format!("  {token}\t{:.6}\n", phi[u]));
            }
        }
    }
    print!("{out}");
    Ok(())
}

fn cmd_infer(model_path: &Path, input: &Path, iters: usize, seed: u64) -> Result<()> {
    let model = load_model(model_path)?;
    let text = read(input)?;
    let held = Corpus::parse_heldout(&text, &model.config.schema, &model.vocabs)
        .with_context(|| format!("input {}", input.display()))?;
    let results = infer_corpus(&model, &held.corpus, iters, seed);
    let mut out = String::new();
    for (d, inf) in results.iter().enumerate() {
        if inf.empty {
            warn!("document {} has no known items; printing the prior mean", d + 1);
        }
        out.push_str(&fmt_vec(&inf.theta));
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn parse_distribution(line: &str, line_no: usize, path: &Path) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("{}:{line_no}: not a list of numbers", path.display()))?;
    ensure!(!values.is_empty(), "{}:{line_no}: empty vector", path.display());
    ensure!(
        values.iter().all(|v| v.is_finite() && *v >= 0.0),
        "{}:{line_no}: entries must be finite and non-negative",
        path.display()
    );
    let sum: f64 = values.iter().sum();
    ensure!((sum - 1.0).abs() <= 1e-6, "{}:{line_no}: entries sum to {sum}, not 1", path.display());
    Ok(values)
}

fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.starts_with('#')).collect()
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let (qtext, dtext) = (read(&args.queries)?, read(&args.docs)?);
    let (queries, docs) = (content_lines(&qtext), content_lines(&dtext));
    if queries.len() != docs.len() {
        bail!("{} has {} lines but {} has {}", args.queries.display(), queries.len(), args.docs.display(), docs.len());
    }
    let model = match (args.mode, &args.model) {
        (ScoreMode::Generative, Some(p)) => Some(load_model(p)?),
        (ScoreMode::Generative, None) => bail!("--mode generative needs --model"),
        _ => None,
    };
    let mut out = String::new();
    for (&(qn, q), &(dn, d)) in queries.iter().zip(&docs) {
        let theta_d = parse_distribution(d, dn, &args.docs)?;
        let line = match args.mode {
            ScoreMode::Jsd | ScoreMode::Hellinger => {
                let theta_q = parse_distribution(q, qn, &args.queries)?;
                let value = if args.mode == ScoreMode::Jsd { jsd(&theta_q, &theta_d) } else { hellinger(&theta_q, &theta_d) }
                    .with_context(|| format!("{}:{qn}", args.queries.display()))?;
                format!("{value:.6}")
            }
            ScoreMode::Generative => {
                let tokens: Vec<&str> = q.split_whitespace().collect();
                let s = generative_score(&tokens, &theta_d, model.as_ref().expect("loaded above"), args.factor)
                    .with_context(|| format!("{}:{qn}", args.queries.display()))?;
                if s.dropped > 0 {
                    warn!("{}:{qn}: dropped {} unseen token(s)", args.queries.display(), s.dropped);
                }
                format!("{:.6}\t{:.6}", s.score.unwrap_or(0.0), s.log_score)
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Topics { model, top_n } => cmd_topics(&model, top_n),
        Command::Infer { model, input, iters, seed } => cmd_infer(&model, &input, iters, seed),
        Command::Score(args) => cmd_score(&args),
    }
}

/// Collapses a clap error to one line.
fn one_line(err: &clap::Error) -> String {
    err.to_string()
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", one_line(&e));
            return ExitCode::FAILURE;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::fmt::Write as _;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tabsum_core::harness::{
    default_grid, evaluate_prepared, full_grid, grid_search, load_manifest, prepare_corpus, HarnessError,
    LabeledDataset, PreparedCorpus,
};
use tabsum_core::ingest::extract_text;
use tabsum_core::{
    AggregationConfig, EmbeddingModel, IngestOptions, ModelFormat, OntologyFormat, Reduce, Summarizer, Summary, Tag,
    TokenTemplate, TreeFn, TreePlacement, TypeOntology,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "tabsum", version, about = "Descriptive type tags for tabular datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tag one CSV (or many with --warm) with ranked ontology types.
    Summarize(SummarizeArgs),
    /// Compare aggregation configurations on a labeled corpus.
    Grid(GridArgs),
    /// Match rate of one aggregation configuration on a labeled corpus.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// word2vec model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "binary")]
    model_format: ModelFormat,
    /// Type hierarchy file.
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long, default_value = "ntriples")]
    ontology_format: OntologyFormat,
    /// Pattern mapping a type id to its vocabulary token; `{}` is the id.
    #[arg(long, default_value = "{}")]
    token_template: String,
}

#[derive(Args)]
struct IngestArgs {
    /// First CSV row is a header (default).
    #[arg(long, overrides_with = "no_headers")]
    headers: bool,
    #[arg(long)]
    no_headers: bool,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Maximum sampled cells per column.
    #[arg(long, default_value_t = tabsum_core::ingest::DEFAULT_ROW_CAP, value_parser = at_least_one)]
    row_cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AggregationArgs {
    #[arg(long, default_value = "mean")]
    column_agg: Reduce,
    #[arg(long, default_value = "meanmax")]
    tree_agg: TreeFn,
    #[arg(long, default_value = "mean")]
    dataset_agg: Reduce,
    /// Apply the tree update once to the dataset vector instead of to every column.
    #[arg(long)]
    tree_after_dataset: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    ingest: IngestArgs,
    #[command(flatten)]
    aggregation: AggregationArgs,
    /// Number of tags to report.
    #[arg(long, default_value_t = 3, value_parser = at_least_one)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
    /// Plain-text sidecar whose lines are scored as an extra column.
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Load the model once and summarize every CSV given (or listed on stdin).
    #[arg(long)]
    warm: bool,
    /// Report wall-clock timings in JSON/TSV output (makes output non-reproducible).
    #[arg(long)]
    timings: bool,
    csv: Vec<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    ingest: IngestArgs,
    #[arg(long, default_value_t = tabsum_core::harness::DEFAULT_K, value_parser = at_least_one)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Output::Tsv)]
    output: Output,
    /// Evaluate all 20 column/tree/dataset combinations instead of the default 8.
    #[arg(long)]
    full: bool,
    /// Also write a `config,match_rate` CSV for plotting.
    #[arg(long)]
    plot_csv: Option<PathBuf>,
    /// JSON-lines manifest of `{"path": ..., "true_types": [...]}`.
    manifest: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    ingest: IngestArgs,
    #[command(flatten)]
    aggregation: AggregationArgs,
    #[arg(long, default_value_t = tabsum_core::harness::DEFAULT_K, value_parser = at_least_one)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
    manifest: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Json,
    Tsv,
    Text,
}

fn at_least_one(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

impl IngestArgs {
    fn options(&self, metadata: Option<PathBuf>) -> Result<IngestOptions> {
        if !self.delimiter.is_ascii() {
            bail!("ingest stage: delimiter must be a single ASCII character");
        }
        Ok(IngestOptions {
            has_headers: !self.no_headers,
            delimiter: self.delimiter as u8,
            row_cap: self.row_cap,
            seed: self.seed,
            metadata,
        })
    }
}

impl AggregationArgs {
    fn config(&self) -> AggregationConfig {
        AggregationConfig {
            placement: if self.tree_after_dataset {
                TreePlacement::AfterDataset
            } else {
                TreePlacement::PerColumn
            },
            ..AggregationConfig::new(self.column_agg, self.tree_agg, self.dataset_agg)
        }
    }
}

fn require_file(path: &Path, stage: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{stage} stage: {} does not exist or is not a file", path.display());
    }
    Ok(())
}

/// Loads model and ontology; returns the summarizer and the load time in ms.
fn load(args: &ModelArgs) -> Result<(Summarizer, u64)> {
    require_file(&args.model, "model")?;
    require_file(&args.ontology, "ontology")?;
    let template = TokenTemplate::new(&args.token_template).context("ontology stage")?;
    let start = Instant::now();
    let model = EmbeddingModel::load(&args.model, args.model_format)
        .with_context(|| format!("model stage: {}", args.model.display()))?;
    let ontology = TypeOntology::load(&args.ontology, args.ontology_format)
        .with_context(|| format!("ontology stage: {}", args.ontology.display()))?;
    for w in ontology.warnings() {
        eprintln!("warning: ontology: {w}");
    }
    let summarizer = Summarizer::new(model, ontology, &template).context("score stage")?;
    Ok((summarizer, start.elapsed().as_millis() as u64))
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a Path>,
    tags: &'a [Tag],
    diagnostics: ReportDiagnostics<'a>,
}

#[derive(Serialize)]
struct ReportDiagnostics<'a> {
    oov_cells: usize,
    dropped_columns: &'a [String],
    unscorable_types: &'a [String],
    /// `null` unless timings were requested, so machine output stays reproducible.
    load_ms: Option<u64>,
    score_ms: Option<u64>,
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

fn render_summary(out: &mut String, path: &Path, summary: &Summary, args: &SummarizeArgs, batch: bool) -> Result<()> {
    let d = &summary.diagnostics;
    match args.output {
        Output::Json => {
            let report = Report {
                schema_version: SCHEMA_VERSION,
                path: batch.then_some(path),
                tags: &summary.prediction.tags,
                diagnostics: ReportDiagnostics {
                    oov_cells: d.oov_cells,
                    dropped_columns: &d.dropped_columns,
                    unscorable_types: &d.unscorable_types,
                    load_ms: args.timings.then_some(d.load_ms),
                    score_ms: args.timings.then_some(d.score_ms),
                },
            };
            out.push_str(&serde_json::to_string(&report)?);
            out.push('\n');
        }
        Output::Tsv => {
            for (rank, tag) in summary.prediction.tags.iter().enumerate() {
                if batch {
                    write!(out, "{}\t", path.display())?;
                }
                writeln!(out, "{}\t{}\t{}", rank + 1, tag.type_id, tag.score)?;
            }
        }
        Output::Text => {
            writeln!(out, "{}", path.display())?;
            for (rank, tag) in summary.prediction.tags.iter().enumerate() {
                writeln!(out, "  {:>2}. {:<32} {:.4}", rank + 1, tag.type_id, tag.score)?;
            }
            writeln!(
                out,
                "  oov cells: {}, dropped columns: [{}], unscorable types: {}, load {} ms, score {} ms",
                d.oov_cells,
                d.dropped_columns.join(", "),
                d.unscorable_types.len(),
                d.load_ms,
                d.score_ms
            )?;
        }
    }
    Ok(())
}

fn summarize_one(summarizer: &Summarizer, path: &Path, args: &SummarizeArgs, load_ms: u64) -> Result<Summary> {
    let options = args.ingest.options(args.metadata.clone())?;
    let table = extract_text(path, &options).with_context(|| format!("ingest stage: {}", path.display()))?;
    let mut summary = summarizer
        .summarize(&table, &args.aggregation.config(), args.k)
        .with_context(|| format!("aggregate stage: {}", path.display()))?;
    summary.diagnostics.load_ms = load_ms;
    Ok(summary)
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<()> {
    if !args.warm && args.csv.len() != 1 {
        bail!("usage: summarize takes exactly one CSV; pass --warm to summarize several");
    }
    let mut paths = args.csv.clone();
    let (summarizer, load_ms) = load(&args.model)?;
    if args.warm && paths.is_empty() {
        for line in io::stdin().lock().lines() {
            let line = line.context("ingest stage: reading CSV paths from stdin")?;
            if !line.trim().is_empty() {
                paths.push(PathBuf::from(line.trim()));
            }
        }
    }
    let batch = args.warm;
    let mut failures = 0;
    for path in &paths {
        match summarize_one(&summarizer, path, args, load_ms) {
            Ok(summary) => {
                let mut out = String::new();
                render_summary(&mut out, path, &summary, args, batch)?;
                print!("{out}");
            }
            Err(e) if batch => {
                failures += 1;
                eprintln!("error: {e:#}");
            }
            Err(e) => return Err(e),
        }
    }
    if failures > 0 {
        bail!("{failures} of {} datasets failed", paths.len());
    }
    Ok(())
}

fn harness_stage(e: HarnessError) -> anyhow::Error {
    let stage = match e {
        HarnessError::AllSkipped(_) => "ingest",
        HarnessError::Aggregate(_) => "aggregate",
        _ => "manifest",
    };
    anyhow!(e).context(format!("{stage} stage"))
}

fn prepare(manifest: &Path, model: &ModelArgs, ingest: &IngestArgs) -> Result<(Summarizer, PreparedCorpus)> {
    let corpus: Vec<LabeledDataset> = load_manifest(manifest).map_err(harness_stage)?;
    if corpus.is_empty() {
        return Err(harness_stage(HarnessError::EmptyCorpus));
    }
    let (summarizer, _) = load(model)?;
    let prepared = prepare_corpus(&corpus, &summarizer, &ingest.options(None)?).map_err(harness_stage)?;
    for s in &prepared.skipped {
        eprintln!("warning: skipped {}: {}", s.path.display(), s.reason);
    }
    Ok((summarizer, prepared))
}

fn cmd_grid(args: &GridArgs) -> Result<()> {
    let (summarizer, prepared) = prepare(&args.manifest, &args.model, &args.ingest)?;
    let configs = if args.full { full_grid() } else { default_grid() };
    let result = grid_search(&prepared, summarizer.ontology(), &configs, args.k).map_err(harness_stage)?;
    if let Some(path) = &args.plot_csv {
        std::fs::write(path, result.to_plot_csv()).with_context(|| format!("output: {}", path.display()))?;
    }
    match args.output {
        Output::Json => println!(
            "{}",
            serde_json::to_string(&Envelope {
                schema_version: SCHEMA_VERSION,
                body: &result,
            })?
        ),
        Output::Tsv => print!("{}", result.to_tsv()),
        Output::Text => {
            println!("k = {}, {} datasets", result.k, result.corpus_size);
            for row in &result.rows {
                println!("  {:<24} {:.4}  (n = {})", row.label, row.match_rate, row.n);
            }
        }
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let (summarizer, prepared) = prepare(&args.manifest, &args.model, &args.ingest)?;
    let config = args.aggregation.config();
    let eval = evaluate_prepared(&prepared, summarizer.ontology(), &config, args.k).map_err(harness_stage)?;
    match args.output {
        Output::Json => println!(
            "{}",
            serde_json::to_string(&Envelope {
                schema_version: SCHEMA_VERSION,
                body: &eval,
            })?
        ),
        Output::Tsv => {
            println!("column\ttree\tdataset\tk\tmatch_rate\tn\tskipped");
            println!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                config.column, config.tree, config.dataset, args.k, eval.match_rate, eval.n, eval.skipped
            );
        }
        Output::Text => println!(
            "{}: match rate {:.4} at k = {} over {} datasets ({} skipped)",
            config.label(),
            eval.match_rate,
            args.k,
            eval.n,
            eval.skipped
        ),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Summarize(args) => cmd_summarize(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

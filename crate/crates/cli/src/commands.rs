use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lazyk_core::constraints::Breakdown;
use lazyk_core::corpus::{load_corpus, load_corpus_with_bin, save_corpus, save_corpus_with_bin, Document};
use lazyk_core::eval::{self, EvalReport};
use lazyk_core::synthetic::{gen_synthetic, SyntheticSpec};
use lazyk_core::{Constraint, Dataset, DecodeParams, DecodeStatus, DecoderKind, LazyK};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    Strict(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Strict(m) => f.write_str(m),
            CliError::Data(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "lazyk", version, about = "Lazy k-best constrained decoding for token classification")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode every document and write its labels and outcome.
    Decode(DecodeArgs),
    /// List the k most probable sequences of every document.
    Topk(TopkArgs),
    /// Score decoders against gold labels.
    Eval(EvalArgs),
    /// Time decoders over repeated passes.
    Bench(BenchArgs),
    /// Generate a synthetic corpus.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Line-delimited JSON corpus.
    #[arg(long)]
    input: PathBuf,
    /// Dense little-endian f64 matrices for the corpus.
    #[arg(long)]
    probs_bin: Option<PathBuf>,
    /// cord, wildreceipt, docile, bio, none, never or custom:PATH.
    #[arg(long, default_value = "none")]
    constraints: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Maximum number of sequences examined per document.
    #[arg(long)]
    max_k: Option<usize>,
    /// Stop once the examined sequences hold this much probability.
    #[arg(long)]
    mass_threshold: Option<f64>,
    /// Documents decoded in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "lazyk")]
    decoder: String,
    #[command(flatten)]
    search: SearchArgs,
    /// Exit with status 3 if any document has no satisfying sequence.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct TopkArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    k: usize,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Comma-separated decoders.
    #[arg(long, value_delimiter = ',', default_value = "argmax,lazyk")]
    decoder: Vec<String>,
    /// Comma-separated budgets.
    #[arg(long, value_delimiter = ',')]
    max_k: Vec<usize>,
    #[arg(long)]
    mass_threshold: Option<f64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    output: PathBuf,
    /// Also move the matrices into this side-car file.
    #[arg(long)]
    probs_bin: Option<PathBuf>,
    /// cord, wildreceipt or docile.
    #[arg(long, default_value = "cord")]
    constraints: String,
    #[arg(long, default_value_t = 100)]
    docs: usize,
    #[arg(long, default_value_t = 48)]
    tokens_per_doc: usize,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

const DEFAULT_MAX_K: usize = 1024;

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Decode(a) => decode(a),
        Command::Topk(a) => topk(a),
        Command::Eval(a) => grid(a.input, a.grid, None),
        Command::Bench(a) => {
            if a.repeats == 0 {
                return usage("--repeats must be at least 1");
            }
            grid(a.input, a.grid, Some(a.repeats))
        }
        Command::Gen(a) => gen(a),
    }
}

fn parse_constraint(spec: &str) -> Result<Constraint, CliError> {
    if let Some(path) = spec.strip_prefix("custom:") {
        return Constraint::from_config_file(Path::new(path))
            .with_context(|| format!("loading constraints from {path}"))
            .map_err(CliError::Data);
    }
    match spec {
        "none" => Ok(Constraint::none()),
        "never" => Ok(Constraint::never()),
        "bio" => Ok(Constraint::bio()),
        other => match other.parse::<Dataset>() {
            Ok(d) => Ok(Constraint::dataset(d)),
            Err(_) => usage(format!(
                "unknown constraints {other:?} (expected cord, wildreceipt, docile, bio, none, never or custom:PATH)"
            )),
        },
    }
}

fn parse_decoder(name: &str) -> Result<DecoderKind, CliError> {
    name.parse().map_err(CliError::Usage)
}

fn check_threshold(t: Option<f64>) -> Result<(), CliError> {
    match t {
        Some(t) if !(t > 0.0 && t <= 1.0) => usage(format!("--mass-threshold must be in (0, 1], got {t}")),
        _ => Ok(()),
    }
}

fn params(max_k: usize, threshold: Option<f64>) -> Result<DecodeParams, CliError> {
    if max_k == 0 {
        return usage("--max-k must be at least 1");
    }
    check_threshold(threshold)?;
    let p = DecodeParams::new(max_k);
    Ok(match threshold {
        Some(t) => p.with_mass_threshold(t),
        None => p,
    })
}

fn load(input: &InputArgs) -> Result<Vec<Document>, CliError> {
    let docs = match &input.probs_bin {
        Some(bin) => load_corpus_with_bin(&input.input, bin),
        None => load_corpus(&input.input),
    };
    docs.with_context(|| format!("reading {}", input.input.display())).map_err(CliError::Data)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display())).map_err(CliError::Data)?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(e: io::Error) -> CliError {
    CliError::Data(anyhow::Error::new(e).context("writing output"))
}

fn decode(a: DecodeArgs) -> Result<(), CliError> {
    let kind = parse_decoder(&a.decoder)?;
    if !kind.uses_budget() && (a.search.max_k.is_some() || a.search.mass_threshold.is_some()) {
        return usage(format!("--max-k and --mass-threshold have no effect with --decoder {kind}"));
    }
    let params = params(a.search.max_k.unwrap_or(DEFAULT_MAX_K), a.search.mass_threshold)?;
    let constraint = parse_constraint(&a.input.constraints)?;
    let docs = load(&a.input)?;
    let decoded =
        eval::decode_corpus(&docs, kind, &constraint, params, a.search.jobs).map_err(|e| CliError::Data(e.into()))?;
    let mut out = open_output(a.input.output.as_deref())?;
    let mut unsatisfied = 0;
    for (doc, d) in docs.iter().zip(&decoded) {
        let labels = d.prediction.labels(&doc.table, doc.vocab()).map_err(|e| CliError::Data(e.into()))?;
        if d.outcome.status != DecodeStatus::Satisfied {
            unsatisfied += 1;
        }
        let line = json!({
            "doc_id": doc.record.doc_id,
            "labels": labels,
            "status": d.outcome.status,
            "examined": d.outcome.examined,
            "probability": d.prediction.probability(),
        });
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    if a.strict && unsatisfied > 0 {
        return Err(CliError::Strict(format!("{unsatisfied} of {} documents have no satisfying sequence", docs.len())));
    }
    Ok(())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

fn topk(a: TopkArgs) -> Result<(), CliError> {
    if a.k == 0 {
        return usage("--k must be at least 1");
    }
    let constraint = parse_constraint(&a.input.constraints)?;
    let docs = load(&a.input)?;
    let mut out = open_output(a.input.output.as_deref())?;
    writeln!(out, "doc_id\trank\tprob_pct\tcost\tbio\tsemantic\tlabels").map_err(io_err)?;
    for doc in &docs {
        let ctx = doc.ctx();
        for (i, seq) in LazyK::new(&doc.table).take(a.k).enumerate() {
            let labels: Vec<&str> =
                seq.ranks.iter().enumerate().map(|(p, &r)| doc.vocab()[doc.table.label_at(p, r)].as_str()).collect();
            let Breakdown { bio, semantic } = constraint.breakdown(&ctx, &labels);
            writeln!(
                out,
                "{}\t{}\t{:.3}\t{:.6}\t{}\t{}\t{}",
                doc.record.doc_id,
                i + 1,
                100.0 * seq.cost.probability(),
                seq.cost.value(),
                yes_no(bio),
                semantic.map_or("-", yes_no),
                labels.join(" ")
            )
            .map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

fn grid(input: InputArgs, g: GridArgs, repeats: Option<usize>) -> Result<(), CliError> {
    let kinds: Vec<DecoderKind> = g.decoder.iter().map(|d| parse_decoder(d)).collect::<Result<_, _>>()?;
    if kinds.is_empty() {
        return usage("--decoder needs at least one decoder");
    }
    let ks = if g.max_k.is_empty() { vec![DEFAULT_MAX_K] } else { g.max_k.clone() };
    check_threshold(g.mass_threshold)?;
    let constraint = parse_constraint(&input.constraints)?;
    let docs = load(&input)?;
    let mut out = open_output(input.output.as_deref())?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for &kind in &kinds {
        // Budget-free decoders get one cell.
        let cells = if kind.uses_budget() { ks.clone() } else { vec![ks[0]] };
        for k in cells {
            let p = params(k, g.mass_threshold)?;
            let data = |e: eval::EvalError| CliError::Data(e.into());
            let report = match repeats {
                None => eval::evaluate(&docs, kind, &constraint, p, g.jobs).map_err(data)?,
                Some(r) => {
                    let (timing, decoded) = eval::bench(&docs, kind, &constraint, p, r, g.jobs).map_err(data)?;
                    let mut report = if docs.iter().all(|d| d.record.gold_labels.is_some()) {
                        eval::score(&docs, &decoded, kind, &constraint, p).map_err(data)?
                    } else {
                        EvalReport {
                            decoder: kind,
                            max_k: k,
                            docs: docs.len(),
                            micro_f1: f64::NAN,
                            csr: f64::NAN,
                            f1s: f64::NAN,
                            satisfied: decoded.iter().filter(|d| d.outcome.is_satisfied()).count(),
                            examined: Default::default(),
                            timing: None,
                        }
                    };
                    report.timing = Some(timing);
                    report
                }
            };
            reports.push(report);
        }
    }
    match repeats {
        None => {
            for r in &reports {
                writeln!(out, "{}", serde_json::to_string(r).expect("report serializes")).map_err(io_err)?;
            }
        }
        Some(_) => write_bench_table(&mut out, &reports).map_err(io_err)?,
    }
    out.flush().map_err(io_err)
}

fn write_bench_table(out: &mut dyn Write, reports: &[EvalReport]) -> io::Result<()> {
    writeln!(out, "decoder\tk\tf1s\ttime_mean_s\ttime_std_s\tsearch_mean_s\tsearch_std_s\texamined_mean")?;
    for r in reports {
        let t = r.timing.unwrap_or_default();
        writeln!(
            out,
            "{}\t{}\t{:.4}\t{:.6e}\t{:.3e}\t{:.6e}\t{:.3e}\t{:.1}",
            r.decoder,
            r.max_k,
            r.f1s,
            t.per_page.mean,
            t.per_page.std,
            t.per_page_search.mean,
            t.per_page_search.std,
            r.examined.mean
        )?;
    }
    // Growth of per-page time from the smallest to the largest budget.
    for kind in DecoderKind::ALL {
        let cells: Vec<&EvalReport> = reports.iter().filter(|r| r.decoder == kind).collect();
        if let (Some(lo), Some(hi)) = (cells.iter().min_by_key(|r| r.max_k), cells.iter().max_by_key(|r| r.max_k)) {
            if lo.max_k < hi.max_k {
                let (a, b) = (lo.timing.unwrap_or_default().per_page.mean, hi.timing.unwrap_or_default().per_page.mean);
                writeln!(out, "# {kind} time(k={})/time(k={}) = {:.1}", hi.max_k, lo.max_k, b / a)?;
            }
        }
    }
    Ok(())
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    let dataset: Dataset = a.constraints.parse().map_err(CliError::Usage)?;
    let spec = SyntheticSpec { docs: a.docs, tokens_per_doc: a.tokens_per_doc, noise: a.noise, dataset, seed: a.seed };
    let records = gen_synthetic(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let saved = match &a.probs_bin {
        Some(bin) => save_corpus_with_bin(&a.output, bin, &records),
        None => save_corpus(&a.output, &records),
    };
    saved.context("writing corpus").map_err(CliError::Data)
}

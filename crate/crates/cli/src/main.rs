//! `prodbias`: audit, counterfactual, classifier, flagging and statistics
//! workflows over product-description corpora.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use prodbias::classifier::{evaluate, run_experiment, ClassifierError, Dataset, EvalReport, GenderClassifierModel};
use prodbias::clients::{ClientError, EndpointConfig, HttpEndpoint, HttpToxicityScorer};
use prodbias::config::{Config, ConfigError};
use prodbias::corpus::{Corpus, CorpusError, CorpusFormat};
use prodbias::counterfactual::{
    build_classifier_dataset, derive_pairs, generate_batches, read_pair_file, write_pair_file, CounterfactualError,
    GenerationBatch, HttpGenerator, ReplayGenerator, StubGenerator, TextGenerator,
};
use prodbias::detectors::{audit_corpus, AuditOptions, DetectorError};
use prodbias::flagging::{
    import_human_annotations, render_prompt, run_funnel, write_review_sheet, FlagRecord, FlagTheme, FlaggingError,
    HttpChatClient, LlmClient, ScriptedLlmClient, TemplateSet,
};
use prodbias::report::{emit_report, OutputFormat, Render, RunManifest};
use prodbias::stats::{proportion_ci_with, two_proportion_z, IntervalMethod, StatsError};

#[derive(Parser, Debug)]
#[command(
    name = "prodbias",
    version,
    about = "Gender-bias auditing for generated product descriptions"
)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every seeded step; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Report path; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Markdown,
    Csv,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Markdown => OutputFormat::Markdown,
            Format::Csv => OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InputFormat {
    Jsonl,
    Csv,
}

#[derive(Args, Debug)]
struct CorpusArg {
    /// Corpus file (line-delimited JSON or CSV).
    corpus: PathBuf,
    /// Corpus format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    input_format: Option<InputFormat>,
}

impl CorpusArg {
    fn load(&self) -> Result<Corpus, CliError> {
        let format = match self.input_format {
            Some(InputFormat::Jsonl) => CorpusFormat::JsonLines,
            Some(InputFormat::Csv) => CorpusFormat::Csv,
            None => CorpusFormat::from_path(&self.corpus),
        };
        Ok(Corpus::load(&self.corpus, format)?)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a corpus and summarize it.
    Ingest(CorpusArg),
    /// Run the lexicon detectors and report rates with confidence intervals.
    Audit {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Score toxicity through the configured toxicity endpoint.
        #[arg(long)]
        toxicity: bool,
    },
    /// Build or check counterfactual pair files.
    #[command(subcommand)]
    Pairs(PairsCommand),
    /// Generate descriptions for both sides of every pair.
    Generate {
        /// Pair file.
        pairs: PathBuf,
        /// stub, replay:<path> or http.
        #[arg(long, default_value = "http")]
        generator: String,
        /// Samples per side; overrides the config file.
        #[arg(long)]
        samples: Option<u32>,
        /// Append-only store used to resume interrupted runs.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Write the masked, labeled classifier dataset here.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Write the generation batches here.
        #[arg(long)]
        batches: Option<PathBuf>,
    },
    /// Train, evaluate and rank features of the bigram classifier.
    Classify {
        /// Labeled dataset (line-delimited JSON).
        dataset: PathBuf,
        /// Save the trained model artifact.
        #[arg(long)]
        save_model: Option<PathBuf>,
        /// Evaluate a saved model on the whole dataset instead of training.
        #[arg(long, conflicts_with = "save_model")]
        model: Option<PathBuf>,
    },
    /// Multi-stage flagging: human import, LLM stage, review sampling.
    #[command(subcommand)]
    Flag(FlagCommand),
    /// Standalone statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
}

#[derive(Subcommand, Debug)]
enum PairsCommand {
    /// Derive a pair from every gendered listing in a corpus.
    Derive {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Pair file to write.
        output: PathBuf,
        /// Keep at most this many pairs, in corpus order.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Validate a pair file.
    Check { pairs: PathBuf },
}

#[derive(Subcommand, Debug)]
enum FlagCommand {
    /// Import a human annotation CSV and count flagged records.
    Import { annotations: PathBuf },
    /// Run the funnel: human-flagged records through the LLM stage, then
    /// sample LLM-flagged records for review.
    Run {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Human annotation CSV.
        #[arg(long)]
        human: PathBuf,
        /// http, or scripted:<response> for a fixed answer.
        #[arg(long, default_value = "http")]
        llm: String,
        /// Review sample size; every LLM-flagged record when omitted.
        #[arg(long)]
        review_k: Option<usize>,
        #[arg(long)]
        reviewers: Option<usize>,
        /// Write one review sheet per reviewer into this directory.
        #[arg(long)]
        sheets: Option<PathBuf>,
    },
    /// Print the prompt for one record and theme.
    Prompt {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Record id.
        id: String,
        /// group_association, toxicity, stereotyping_objectification,
        /// exclusionary_norms or other_bias.
        theme: String,
    },
    /// Write the shipped prompt templates into a directory for editing.
    Templates { dir: PathBuf },
}

#[derive(Subcommand, Debug)]
enum StatsCommand {
    /// Proportion with a confidence interval.
    Ci {
        successes: u64,
        trials: u64,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        wilson: bool,
    },
    /// Pooled two-proportion z-test.
    Ztest { x1: u64, n1: u64, x2: u64, n2: u64 },
}

#[derive(Debug)]
enum CliError {
    Input(String),
    External(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::External(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::External(m) => write!(f, "external service failure: {m}"),
        }
    }
}

macro_rules! input_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        })*
    };
}

input_error!(CorpusError, ConfigError, ClassifierError, StatsError, std::io::Error);

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        CliError::External(e.to_string())
    }
}

impl From<DetectorError> for CliError {
    fn from(e: DetectorError) -> Self {
        match e {
            DetectorError::MissingScorer | DetectorError::ScorerUnavailable { .. } => CliError::External(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<FlaggingError> for CliError {
    fn from(e: FlaggingError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CounterfactualError> for CliError {
    fn from(e: CounterfactualError) -> Self {
        CliError::Input(e.to_string())
    }
}

struct Ctx {
    config: Config,
    seed: Option<u64>,
    format: OutputFormat,
    out: Option<PathBuf>,
    command: String,
    started_at: String,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl Ctx {
    fn manifest(&self, inputs: &[&Path]) -> Result<RunManifest, CliError> {
        let mut m = RunManifest::new(&self.command, &self.config, self.seed.or(Some(self.config.seed)));
        for p in inputs {
            m.add_input(p)?;
        }
        m.started_at = self.started_at.clone();
        Ok(m)
    }

    fn emit<R: Render>(&self, report: &R, mut manifest: RunManifest) -> Result<(), CliError> {
        manifest.finished_at = now();
        emit_report(report, &manifest, self.format, self.out.as_deref())?;
        Ok(())
    }

    fn endpoint(&self, cfg: &Option<EndpointConfig>, what: &str) -> Result<HttpEndpoint, CliError> {
        let cfg = cfg
            .clone()
            .filter(|c| !c.url.is_empty())
            .ok_or_else(|| CliError::Input(format!("no `clients.{what}` endpoint configured")))?;
        Ok(HttpEndpoint::from_config(cfg)?)
    }
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    records: u64,
    provenance: String,
    departments: BTreeMap<String, u64>,
    top_level_categories: BTreeMap<String, u64>,
    with_model_tag: u64,
}

impl Render for IngestSummary {
    fn markdown(&self) -> String {
        let mut s = format!(
            "# Corpus\n\n{} records · {}\n\n| Department | Records |\n|---|---|\n",
            self.records, self.provenance
        );
        for (k, v) in &self.departments {
            s.push_str(&format!("| {k} | {v} |\n"));
        }
        s.push_str("\n| Top-level category | Records |\n|---|---|\n");
        for (k, v) in &self.top_level_categories {
            s.push_str(&format!("| {k} | {v} |\n"));
        }
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from("grouping,key,records\n");
        for (k, v) in &self.departments {
            s.push_str(&format!("department,{},{v}\n", csv_cell(k)));
        }
        for (k, v) in &self.top_level_categories {
            s.push_str(&format!("top_level_category,{},{v}\n", csv_cell(k)));
        }
        s
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

#[derive(Debug, Serialize)]
struct PairsSummary {
    pairs: u64,
    pair_ids: Vec<String>,
    skipped: BTreeMap<String, String>,
}

impl Render for PairsSummary {
    fn markdown(&self) -> String {
        let mut s = format!(
            "# Counterfactual pairs\n\n{} pairs, {} listings skipped\n",
            self.pairs,
            self.skipped.len()
        );
        for (id, why) in &self.skipped {
            s.push_str(&format!("- `{id}`: {why}\n"));
        }
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from("pair_id\n");
        for id in &self.pair_ids {
            s.push_str(&csv_cell(id));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Serialize)]
struct GenerateSummary {
    pairs: u64,
    samples_per_side: u32,
    generator: String,
    batches: u64,
    partial_batches: u64,
    texts_per_label: BTreeMap<String, u64>,
    dataset_documents: Option<u64>,
    dataset_balanced: Option<bool>,
    failures: BTreeMap<String, String>,
}

impl Render for GenerateSummary {
    fn markdown(&self) -> String {
        let mut s = format!(
            "# Generation\n\n{} pairs × 2 sides × {} samples via `{}` · {} partial batches\n\n| Label | Texts |\n|---|---|\n",
            self.pairs, self.samples_per_side, self.generator, self.partial_batches
        );
        for (k, v) in &self.texts_per_label {
            s.push_str(&format!("| {k} | {v} |\n"));
        }
        if let Some(n) = self.dataset_documents {
            s.push_str(&format!(
                "\nClassifier dataset: {n} documents, balanced: {}\n",
                self.dataset_balanced == Some(true)
            ));
        }
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from("label,texts\n");
        for (k, v) in &self.texts_per_label {
            s.push_str(&format!("{k},{v}\n"));
        }
        s
    }
}

#[derive(Debug, Serialize)]
struct ImportSummary {
    rows: u64,
    flagged: u64,
    by_theme: BTreeMap<String, u64>,
}

impl Render for ImportSummary {
    fn markdown(&self) -> String {
        let mut s = format!(
            "# Human annotations\n\n{} rows, {} flagged\n\n| Theme | Yes |\n|---|---|\n",
            self.rows, self.flagged
        );
        for (k, v) in &self.by_theme {
            s.push_str(&format!("| {k} | {v} |\n"));
        }
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from("theme,yes\n");
        for (k, v) in &self.by_theme {
            s.push_str(&format!("{k},{v}\n"));
        }
        s
    }
}

fn build_generator(spec: &str, ctx: &Ctx) -> Result<Box<dyn TextGenerator>, CliError> {
    if spec == "stub" {
        Ok(Box::new(StubGenerator))
    } else if let Some(path) = spec.strip_prefix("replay:") {
        Ok(Box::new(ReplayGenerator::from_path(Path::new(path))?))
    } else if spec == "http" {
        Ok(Box::new(HttpGenerator::new(
            ctx.endpoint(&ctx.config.clients.generator, "generator")?,
        )))
    } else {
        Err(CliError::Input(format!(
            "unknown generator `{spec}`; expected stub, replay:<path> or http"
        )))
    }
}

fn build_llm(spec: &str, ctx: &Ctx) -> Result<Box<dyn LlmClient>, CliError> {
    if let Some(resp) = spec.strip_prefix("scripted:") {
        Ok(Box::new(ScriptedLlmClient::new(resp)))
    } else if spec == "http" {
        Ok(Box::new(HttpChatClient::new(
            ctx.endpoint(&ctx.config.clients.llm, "llm")?,
        )))
    } else {
        Err(CliError::Input(format!(
            "unknown LLM client `{spec}`; expected http or scripted:<response>"
        )))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    }
    .with_seed(cli.seed);
    let command = match &cli.command {
        Command::Ingest(_) => "ingest",
        Command::Audit { .. } => "audit",
        Command::Pairs(_) => "pairs",
        Command::Generate { .. } => "generate",
        Command::Classify { .. } => "classify",
        Command::Flag(_) => "flag",
        Command::Stats(_) => "stats",
    };
    let ctx = Ctx {
        config,
        seed: cli.seed,
        format: cli.format.into(),
        out: cli.out.clone(),
        command: command.to_owned(),
        started_at: now(),
    };
    let mut inputs: Vec<&Path> = Vec::new();
    if let Some(c) = &cli.config {
        inputs.push(c);
    }

    match &cli.command {
        Command::Ingest(arg) => {
            let corpus = arg.load()?;
            inputs.push(&arg.corpus);
            let mut departments = BTreeMap::new();
            let mut tops = BTreeMap::new();
            for r in &corpus.records {
                let d = r.listing.department.map_or("None", |d| d.as_str()).to_owned();
                *departments.entry(d).or_insert(0) += 1;
                let t = r.listing.top_level_category().unwrap_or("(none)").to_owned();
                *tops.entry(t).or_insert(0) += 1;
            }
            let summary = IngestSummary {
                records: corpus.len() as u64,
                provenance: corpus.provenance.clone(),
                departments,
                top_level_categories: tops,
                with_model_tag: corpus.records.iter().filter(|r| r.model_tag.is_some()).count() as u64,
            };
            ctx.emit(&summary, ctx.manifest(&inputs)?)
        }
        Command::Audit { corpus: arg, toxicity } => {
            let corpus = arg.load()?;
            inputs.push(&arg.corpus);
            let mut suite_config = ctx.config.clone();
            if *toxicity {
                suite_config
                    .detectors
                    .enabled
                    .insert(prodbias::detectors::DetectorKind::Toxicity);
            }
            let suite = suite_config.detector_suite()?;
            let scorer = match suite
                .config
                .enabled
                .contains(&prodbias::detectors::DetectorKind::Toxicity)
            {
                true => Some(HttpToxicityScorer::new(
                    ctx.endpoint(&ctx.config.clients.toxicity, "toxicity")?,
                )),
                false => None,
            };
            let mut options = AuditOptions::from_suite(&suite);
            options.level = ctx.config.confidence_level;
            options.method = ctx.config.interval_method;
            if let Some(s) = &scorer {
                options = options.with_scorer(s);
            }
            let report = audit_corpus(&corpus, &suite, &options)?;
            let manifest = ctx.manifest(&inputs)?.with_vocabularies(suite.lexicon.digests());
            ctx.emit(&report, manifest)?;
            if !report.unscored.is_empty() {
                return Err(CliError::External(format!(
                    "{} records could not be scored for toxicity",
                    report.unscored.len()
                )));
            }
            Ok(())
        }
        Command::Pairs(PairsCommand::Derive {
            corpus: arg,
            output,
            limit,
        }) => {
            let corpus = arg.load()?;
            inputs.push(&arg.corpus);
            let (mut pairs, skipped) = derive_pairs(corpus.records.into_iter().map(|r| r.listing));
            if let Some(l) = limit {
                pairs.truncate(*l);
            }
            write_pair_file(output, &pairs)?;
            let summary = PairsSummary {
                pairs: pairs.len() as u64,
                pair_ids: pairs.iter().map(|p| p.pair_id.clone()).collect(),
                skipped: skipped.into_iter().map(|(id, e)| (id, e.to_string())).collect(),
            };
            ctx.emit(&summary, ctx.manifest(&inputs)?)
        }
        Command::Pairs(PairsCommand::Check { pairs }) => {
            let p = read_pair_file(pairs)?;
            inputs.push(pairs);
            let summary = PairsSummary {
                pairs: p.len() as u64,
                pair_ids: p.iter().map(|p| p.pair_id.clone()).collect(),
                skipped: BTreeMap::new(),
            };
            ctx.emit(&summary, ctx.manifest(&inputs)?)
        }
        Command::Generate {
            pairs,
            generator,
            samples,
            store,
            dataset,
            batches: batches_out,
        } => {
            let p = read_pair_file(pairs)?;
            inputs.push(pairs);
            let gen = build_generator(generator, &ctx)?;
            let mut opts = ctx.config.generation.options(store.clone());
            if let Some(n) = samples {
                opts.samples = *n;
            }
            let batches = generate_batches(&p, gen.as_ref(), &opts)?;
            if let Some(path) = batches_out {
                write_json_lines(path, &batches)?;
            }
            let mut texts_per_label = BTreeMap::new();
            let mut failures = BTreeMap::new();
            for b in &batches {
                *texts_per_label.entry(b.label.as_str().to_owned()).or_insert(0) += b.texts.len() as u64;
                if let Some(why) = &b.partial {
                    failures.insert(format!("{}/{}", b.pair_id, b.side.as_str()), why.clone());
                }
            }
            let mut summary = GenerateSummary {
                pairs: p.len() as u64,
                samples_per_side: opts.samples,
                generator: gen.tag(),
                batches: batches.len() as u64,
                partial_batches: failures.len() as u64,
                texts_per_label,
                dataset_documents: None,
                dataset_balanced: None,
                failures,
            };
            if let Some(path) = dataset {
                let ds = build_classifier_dataset(&batches)?;
                let file = std::fs::File::create(path)?;
                ds.dataset.write_json_lines(std::io::BufWriter::new(file))?;
                summary.dataset_documents = Some(ds.dataset.documents.len() as u64);
                summary.dataset_balanced = Some(ds.balanced);
            }
            let partial = summary.partial_batches;
            ctx.emit(&summary, ctx.manifest(&inputs)?)?;
            if partial > 0 {
                return Err(CliError::External(format!("{partial} batches are partial")));
            }
            Ok(())
        }
        Command::Classify {
            dataset,
            save_model,
            model,
        } => {
            let ds = Dataset::read_json_lines(dataset)?;
            inputs.push(dataset);
            let report: EvalReport = match model {
                Some(path) => {
                    inputs.push(path);
                    let m = GenderClassifierModel::load(path)?;
                    let mut r = evaluate(&m, &ds.documents, ctx.config.classifier.top_k)?;
                    r.train_size = 0;
                    r
                }
                None => {
                    let (m, r) = run_experiment(&ds, &ctx.config.classifier)?;
                    if let Some(path) = save_model {
                        m.save(path)?;
                    }
                    r
                }
            };
            let manifest = ctx.manifest(&inputs)?;
            ctx.emit(&report, manifest)
        }
        Command::Flag(FlagCommand::Import { annotations }) => {
            let records = import_human_annotations(annotations, &ctx.config.flagging.annotation)?;
            inputs.push(annotations);
            let mut by_theme = BTreeMap::new();
            for r in &records {
                for (t, v) in &r.verdicts {
                    if *v == prodbias::flagging::Verdict::Yes {
                        *by_theme.entry(t.as_str().to_owned()).or_insert(0) += 1;
                    }
                }
            }
            let summary = ImportSummary {
                rows: records.len() as u64,
                flagged: records.iter().filter(|r| r.flagged).count() as u64,
                by_theme,
            };
            ctx.emit(&summary, ctx.manifest(&inputs)?)
        }
        Command::Flag(FlagCommand::Run {
            corpus: arg,
            human,
            llm,
            review_k,
            reviewers,
            sheets,
        }) => {
            let corpus = arg.load()?;
            inputs.push(&arg.corpus);
            inputs.push(human);
            let human_records: Vec<FlagRecord> = import_human_annotations(human, &ctx.config.flagging.annotation)?;
            let templates = ctx.config.flagging.templates()?;
            let client = build_llm(llm, &ctx)?;
            let mut review = ctx.config.flagging.review;
            if review_k.is_some() {
                review.k = *review_k;
            }
            if let Some(r) = reviewers {
                review.reviewers = *r;
            }
            let report = run_funnel(
                &corpus,
                &human_records,
                &templates,
                client.as_ref(),
                &ctx.config.flagging.llm,
                &review,
            )?;
            if let Some(dir) = sheets {
                std::fs::create_dir_all(dir)?;
                for b in &report.review.bundles {
                    let file = std::fs::File::create(dir.join(format!("review_{}.csv", b.reviewer)))?;
                    write_review_sheet(file, b, &corpus)?;
                }
            }
            let failed = report.llm.errors.len();
            ctx.emit(&report, ctx.manifest(&inputs)?)?;
            if failed > 0 {
                return Err(CliError::External(format!("{failed} LLM queries failed after retries")));
            }
            Ok(())
        }
        Command::Flag(FlagCommand::Prompt { corpus: arg, id, theme }) => {
            let corpus = arg.load()?;
            let theme = FlagTheme::parse(theme).ok_or_else(|| CliError::Input(format!("unknown theme `{theme}`")))?;
            let record = corpus
                .get(id)
                .ok_or_else(|| CliError::Input(format!("no record `{id}` in {}", arg.corpus.display())))?;
            let templates = ctx.config.flagging.templates()?;
            let prompt = render_prompt(&templates, theme, record)?;
            write_text(ctx.out.as_deref(), &prompt)
        }
        Command::Flag(FlagCommand::Templates { dir }) => {
            TemplateSet::write_builtin(dir)?;
            Ok(())
        }
        Command::Stats(StatsCommand::Ci {
            successes,
            trials,
            level,
            wilson,
        }) => {
            let method = if *wilson {
                IntervalMethod::Wilson
            } else {
                ctx.config.interval_method
            };
            let est = proportion_ci_with(
                *successes,
                *trials,
                level.unwrap_or(ctx.config.confidence_level),
                method,
            )?;
            ctx.emit(&est, ctx.manifest(&inputs)?)
        }
        Command::Stats(StatsCommand::Ztest { x1, n1, x2, n2 }) => {
            let t = two_proportion_z(*x1, *n1, *x2, *n2)?;
            ctx.emit(&t, ctx.manifest(&inputs)?)
        }
    }
}

fn write_json_lines(path: &Path, batches: &[GenerationBatch]) -> Result<(), CliError> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for b in batches {
        serde_json::to_writer(&mut w, b).map_err(|e| CliError::Input(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("prodbias: {e}");
            ExitCode::from(e.code())
        }
    }
}

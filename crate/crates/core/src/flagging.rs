//! The flagging funnel: human annotations, per-theme LLM questions with
//! any-yes aggregation, and seeded samples for expert review.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::clients::{ClientError, HttpEndpoint};
use crate::corpus::{Corpus, DescribedRecord};
use crate::exec::{fan_out, RetryPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlagTheme {
    GroupAssociation,
    Toxicity,
    StereotypingObjectification,
    ExclusionaryNorms,
    OtherBias,
}

impl FlagTheme {
    /// Annotation question order.
    pub const ALL: [FlagTheme; 5] = [
        FlagTheme::GroupAssociation,
        FlagTheme::Toxicity,
        FlagTheme::StereotypingObjectification,
        FlagTheme::ExclusionaryNorms,
        FlagTheme::OtherBias,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlagTheme::GroupAssociation => "group_association",
            FlagTheme::Toxicity => "toxicity",
            FlagTheme::StereotypingObjectification => "stereotyping_objectification",
            FlagTheme::ExclusionaryNorms => "exclusionary_norms",
            FlagTheme::OtherBias => "other_bias",
        }
    }

    pub fn parse(s: &str) -> Option<FlagTheme> {
        FlagTheme::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Column name in the annotation CSV.
    pub fn annotation_column(self) -> &'static str {
        match self {
            FlagTheme::GroupAssociation => "group_assoc",
            FlagTheme::Toxicity => "toxicity",
            FlagTheme::StereotypingObjectification => "stereotyping",
            FlagTheme::ExclusionaryNorms => "exclusionary",
            FlagTheme::OtherBias => "other",
        }
    }

    /// Themes whose prompt is a standalone template over the record rather
    /// than the shared term/definition template.
    pub fn is_standalone(self) -> bool {
        matches!(self, FlagTheme::GroupAssociation | FlagTheme::OtherBias)
    }

    /// GroupAssociation asks about the item alone.
    pub fn includes_description(self) -> bool {
        self != FlagTheme::GroupAssociation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    NotSure,
    Unasked,
    Unparseable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Human,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagRecord {
    pub record_id: String,
    pub stage: Stage,
    pub verdicts: BTreeMap<FlagTheme, Verdict>,
    pub flagged: bool,
}

impl FlagRecord {
    /// Any yes flags the record; unparseable counts as yes when
    /// `unparseable_as_yes` is set.
    pub fn new(
        record_id: String,
        stage: Stage,
        verdicts: BTreeMap<FlagTheme, Verdict>,
        unparseable_as_yes: bool,
    ) -> Self {
        let flagged = verdicts
            .values()
            .any(|v| *v == Verdict::Yes || (unparseable_as_yes && *v == Verdict::Unparseable));
        FlagRecord {
            record_id,
            stage,
            verdicts,
            flagged,
        }
    }
}

#[derive(Debug, Error)]
pub enum FlaggingError {
    #[error("no prompt template for theme {0:?}")]
    MissingTemplate(FlagTheme),
    #[error("template for {theme:?} leaves slot [{slot}] unfilled")]
    UnfilledSlot { theme: FlagTheme, slot: String },
    #[error("template file {path}: {message}")]
    TemplateFormat { path: String, message: String },
    #[error("annotation file row {row}: {message}")]
    Schema { row: u64, message: String },
    #[error("review sample of {k} requested from {available} flagged records")]
    SampleTooLarge { k: usize, available: usize },
    #[error("reviewer count must be at least 1")]
    NoReviewers,
    #[error("flag record `{0}` is not in the corpus")]
    UnknownRecord(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Term, definition and examples for one theme of the shared template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlagQuestion {
    pub theme: FlagTheme,
    pub term: String,
    /// Stored without a trailing period.
    pub definition: String,
    pub examples_block: String,
}

mod builtin {
    pub const RECORD_TEMPLATE: &str = include_str!("../templates/record_template.txt");
    pub const TOXICITY: &str = include_str!("../templates/toxicity.txt");
    pub const EXCLUSIONARY_NORMS: &str = include_str!("../templates/exclusionary_norms.txt");
    pub const STEREOTYPING: &str = include_str!("../templates/stereotyping_objectification.txt");
    pub const GROUP_ASSOCIATION: &str = include_str!("../templates/group_association.txt");
    pub const OTHER_BIAS: &str = include_str!("../templates/other_bias.txt");
}

pub const RECORD_TEMPLATE_FILE: &str = "record_template.txt";

pub fn template_file_name(theme: FlagTheme) -> String {
    format!("{}.txt", theme.as_str())
}

/// Parses a `[term]` / `[definition]` / `[examples]` sectioned file.
pub fn parse_question(theme: FlagTheme, text: &str, origin: &str) -> Result<FlagQuestion, FlaggingError> {
    let mut sections: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut current: Option<&str> = None;
    for line in text.lines() {
        match line.trim_end() {
            h @ ("[term]" | "[definition]" | "[examples]") => {
                let name = &h[1..h.len() - 1];
                if sections.insert(name, Vec::new()).is_some() {
                    return Err(FlaggingError::TemplateFormat {
                        path: origin.to_owned(),
                        message: format!("section {h} repeated"),
                    });
                }
                current = Some(name);
            }
            _ => match current {
                Some(name) => sections.get_mut(name).expect("section opened").push(line),
                None if line.trim().is_empty() => {}
                None => {
                    return Err(FlaggingError::TemplateFormat {
                        path: origin.to_owned(),
                        message: "text before the first section header".into(),
                    })
                }
            },
        }
    }
    let mut take = |name: &str| -> Result<String, FlaggingError> {
        let lines = sections.remove(name).ok_or_else(|| FlaggingError::TemplateFormat {
            path: origin.to_owned(),
            message: format!("missing [{name}] section"),
        })?;
        Ok(lines.join("\n").trim_matches('\n').to_owned())
    };
    Ok(FlagQuestion {
        theme,
        term: take("term")?.trim().to_owned(),
        definition: take("definition")?.trim().trim_end_matches('.').to_owned(),
        examples_block: take("examples")?,
    })
}

/// Prompt templates for every theme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    record_template: Option<String>,
    questions: BTreeMap<FlagTheme, FlagQuestion>,
    standalone: BTreeMap<FlagTheme, String>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let q = |theme, text| parse_question(theme, text, "builtin").expect("builtin templates parse");
        TemplateSet {
            record_template: Some(builtin::RECORD_TEMPLATE.to_owned()),
            questions: [
                (FlagTheme::Toxicity, q(FlagTheme::Toxicity, builtin::TOXICITY)),
                (
                    FlagTheme::ExclusionaryNorms,
                    q(FlagTheme::ExclusionaryNorms, builtin::EXCLUSIONARY_NORMS),
                ),
                (
                    FlagTheme::StereotypingObjectification,
                    q(FlagTheme::StereotypingObjectification, builtin::STEREOTYPING),
                ),
            ]
            .into(),
            standalone: [
                (FlagTheme::GroupAssociation, builtin::GROUP_ASSOCIATION.to_owned()),
                (FlagTheme::OtherBias, builtin::OTHER_BIAS.to_owned()),
            ]
            .into(),
        }
    }

    /// Reads `record_template.txt` and `<theme>.txt` files from `dir`. Absent
    /// files surface as [`FlaggingError::MissingTemplate`] when rendered.
    pub fn load_dir(dir: &Path) -> Result<Self, FlaggingError> {
        let read = |name: &str| -> Result<Option<(PathBuf, String)>, FlaggingError> {
            let path = dir.join(name);
            match std::fs::read_to_string(&path) {
                Ok(t) => Ok(Some((path, t))),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(e.into()),
            }
        };
        let mut set = TemplateSet {
            record_template: read(RECORD_TEMPLATE_FILE)?.map(|(_, t)| t),
            questions: BTreeMap::new(),
            standalone: BTreeMap::new(),
        };
        for theme in FlagTheme::ALL {
            let Some((path, text)) = read(&template_file_name(theme))? else {
                continue;
            };
            if theme.is_standalone() {
                set.standalone.insert(theme, text);
            } else {
                set.questions
                    .insert(theme, parse_question(theme, &text, &path.display().to_string())?);
            }
        }
        Ok(set)
    }

    pub fn question(&self, theme: FlagTheme) -> Option<&FlagQuestion> {
        self.questions.get(&theme)
    }

    /// Writes the builtin files, e.g. as a starting point for edits.
    pub fn write_builtin(dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let files = [
            (RECORD_TEMPLATE_FILE.to_owned(), builtin::RECORD_TEMPLATE),
            (template_file_name(FlagTheme::Toxicity), builtin::TOXICITY),
            (
                template_file_name(FlagTheme::ExclusionaryNorms),
                builtin::EXCLUSIONARY_NORMS,
            ),
            (
                template_file_name(FlagTheme::StereotypingObjectification),
                builtin::STEREOTYPING,
            ),
            (
                template_file_name(FlagTheme::GroupAssociation),
                builtin::GROUP_ASSOCIATION,
            ),
            (template_file_name(FlagTheme::OtherBias), builtin::OTHER_BIAS),
        ];
        for (name, text) in files {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

/// The record as it appears in the prompt: INPUT block, then the generated
/// description unless the theme asks about the item alone.
pub fn render_query(theme: FlagTheme, record: &DescribedRecord) -> String {
    let mut q = format!("INPUT:\n{}\n\n", record.listing.to_input_block());
    if theme.includes_description() {
        q.push_str(&format!("GENERATED DESCRIPTION:\n{}\n\n", record.description.trim()));
    }
    q.push_str("RESPONSE:");
    q
}

/// Substitutes `[slot]` markers in a single left-to-right pass; inserted
/// values are never rescanned.
fn fill_slots(theme: FlagTheme, template: &str, values: &HashMap<&str, &str>) -> Result<String, FlaggingError> {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find(']');
        let name = close.map(|c| &after[..c]);
        match name {
            Some(n) if !n.is_empty() && n.chars().all(|c| c.is_ascii_lowercase() || c == '_') => {
                let value = values.get(n).ok_or_else(|| FlaggingError::UnfilledSlot {
                    theme,
                    slot: n.to_owned(),
                })?;
                out.push_str(value);
                rest = &after[n.len() + 1..];
            }
            _ => {
                out.push('[');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Renders the prompt for one (theme, record) query.
pub fn render_prompt(
    templates: &TemplateSet,
    theme: FlagTheme,
    record: &DescribedRecord,
) -> Result<String, FlaggingError> {
    let query = render_query(theme, record);
    if theme.is_standalone() {
        let template = templates
            .standalone
            .get(&theme)
            .ok_or(FlaggingError::MissingTemplate(theme))?;
        return fill_slots(theme, template, &HashMap::from([("query", query.as_str())]));
    }
    let template = templates
        .record_template
        .as_deref()
        .ok_or(FlaggingError::MissingTemplate(theme))?;
    let q = templates.question(theme).ok_or(FlaggingError::MissingTemplate(theme))?;
    let values = HashMap::from([
        ("term", q.term.as_str()),
        ("definition", q.definition.as_str()),
        ("examples", q.examples_block.as_str()),
        ("query", query.as_str()),
    ]);
    fill_slots(theme, template, &values)
}

/// Single-word yes/no, case-insensitive, trailing period allowed.
pub fn parse_verdict(response: &str) -> Verdict {
    let t = response.trim();
    let t = t.strip_suffix('.').unwrap_or(t).trim();
    if t.eq_ignore_ascii_case("yes") {
        Verdict::Yes
    } else if t.eq_ignore_ascii_case("no") {
        Verdict::No
    } else {
        Verdict::Unparseable
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{message}")]
pub struct LlmError {
    pub message: String,
    pub retryable: bool,
}

impl From<ClientError> for LlmError {
    fn from(e: ClientError) -> Self {
        LlmError {
            retryable: e.is_retryable(),
            message: e.to_string(),
        }
    }
}

pub trait LlmClient: Send + Sync {
    fn tag(&self) -> String;
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

/// Deterministic client: the first rule whose needles all occur in the
/// prompt supplies the response, else the default.
#[derive(Debug, Default)]
pub struct ScriptedLlmClient {
    rules: Vec<(Vec<String>, Result<String, String>)>,
    default: Option<String>,
    calls: AtomicU64,
}

impl ScriptedLlmClient {
    pub fn new(default_response: impl Into<String>) -> Self {
        ScriptedLlmClient {
            rules: Vec::new(),
            default: Some(default_response.into()),
            calls: AtomicU64::new(0),
        }
    }

    /// Every call fails.
    pub fn failing() -> Self {
        ScriptedLlmClient {
            rules: Vec::new(),
            default: None,
            calls: AtomicU64::new(0),
        }
    }

    pub fn respond(mut self, needles: &[&str], response: impl Into<String>) -> Self {
        self.rules
            .push((needles.iter().map(|s| s.to_string()).collect(), Ok(response.into())));
        self
    }

    pub fn fail_on(mut self, needles: &[&str], message: impl Into<String>) -> Self {
        self.rules
            .push((needles.iter().map(|s| s.to_string()).collect(), Err(message.into())));
        self
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmClient for ScriptedLlmClient {
    fn tag(&self) -> String {
        "scripted".into()
    }

    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let rule = self
            .rules
            .iter()
            .find(|(needles, _)| needles.iter().all(|n| prompt.contains(n.as_str())));
        let outcome = match rule {
            Some((_, r)) => r.clone(),
            None => self.default.clone().ok_or_else(|| "client unavailable".to_owned()),
        };
        outcome.map_err(|message| LlmError {
            message,
            retryable: true,
        })
    }
}

/// Chat-completions style endpoint: `{"model", "messages"}` ->
/// `choices[0].message.content`.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    endpoint: HttpEndpoint,
}

impl HttpChatClient {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        HttpChatClient { endpoint }
    }
}

impl LlmClient for HttpChatClient {
    fn tag(&self) -> String {
        self.endpoint.config().model.clone().unwrap_or_else(|| "chat".into())
    }

    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let body = json!({
            "model": self.endpoint.config().model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        });
        log::debug!("chat request: {body}");
        let resp = self.endpoint.post_json(&body)?;
        log::debug!("chat response: {resp}");
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| LlmError {
                message: "response lacks choices[0].message.content".into(),
                retryable: false,
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmStageOptions {
    pub themes: Vec<FlagTheme>,
    pub in_flight: usize,
    pub retry: RetryPolicy,
    /// Count an unparseable answer as a yes.
    pub unparseable_as_yes: bool,
}

impl Default for LlmStageOptions {
    fn default() -> Self {
        LlmStageOptions {
            themes: FlagTheme::ALL.to_vec(),
            in_flight: 4,
            retry: RetryPolicy::default(),
            unparseable_as_yes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QueryError {
    pub record_id: String,
    pub theme: FlagTheme,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmStageResult {
    /// Sorted by record id.
    pub records: Vec<FlagRecord>,
    pub calls: u64,
    pub unparseable: u64,
    pub errors: Vec<QueryError>,
}

impl LlmStageResult {
    pub fn flagged_ids(&self) -> Vec<String> {
        self.records
            .iter()
            .filter(|r| r.flagged)
            .map(|r| r.record_id.clone())
            .collect()
    }
}

/// One query per (record, theme). Failed queries become `Unasked` and are
/// listed in the error ledger.
pub fn run_llm_stage(
    records: &[&DescribedRecord],
    templates: &TemplateSet,
    client: &dyn LlmClient,
    options: &LlmStageOptions,
) -> Result<LlmStageResult, FlaggingError> {
    let mut themes = options.themes.clone();
    themes.sort();
    themes.dedup();
    let mut sorted: Vec<&DescribedRecord> = records.to_vec();
    sorted.sort_by(|a, b| a.id().cmp(b.id()));
    let mut queries = Vec::with_capacity(sorted.len() * themes.len());
    for (ri, r) in sorted.iter().enumerate() {
        for &theme in &themes {
            queries.push((ri, theme, render_prompt(templates, theme, r)?));
        }
    }

    let calls = AtomicU64::new(0);
    let mut answers: HashMap<(usize, FlagTheme), Result<Verdict, String>> = HashMap::new();
    fan_out(
        &queries,
        options.in_flight,
        |_, (_, _, prompt)| {
            let mut retryable = true;
            options
                .retry
                .run(|_| {
                    if !retryable {
                        return Err(None);
                    }
                    calls.fetch_add(1, Ordering::Relaxed);
                    client.complete(prompt).map_err(|e| {
                        retryable = e.retryable;
                        Some(e.message)
                    })
                })
                .map_err(|(m, _)| m.unwrap_or_else(|| "permanent failure".into()))
        },
        |i, outcome| {
            let (ri, theme, _) = &queries[i];
            answers.insert((*ri, *theme), outcome.map(|text| parse_verdict(&text)));
        },
    );

    let mut out = Vec::with_capacity(sorted.len());
    let mut errors = Vec::new();
    let mut unparseable = 0;
    for (ri, r) in sorted.iter().enumerate() {
        let mut verdicts = BTreeMap::new();
        for &theme in &themes {
            let v = match answers.remove(&(ri, theme)).expect("every query answered") {
                Ok(v) => v,
                Err(message) => {
                    errors.push(QueryError {
                        record_id: r.id().to_owned(),
                        theme,
                        message,
                    });
                    Verdict::Unasked
                }
            };
            if v == Verdict::Unparseable {
                unparseable += 1;
            }
            verdicts.insert(theme, v);
        }
        out.push(FlagRecord::new(
            r.id().to_owned(),
            Stage::Llm,
            verdicts,
            options.unparseable_as_yes,
        ));
    }
    errors.sort();
    Ok(LlmStageResult {
        records: out,
        calls: calls.into_inner(),
        unparseable,
        errors,
    })
}

/// Column order of the annotation CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationLayout {
    pub id_column: String,
    pub columns: Vec<(String, FlagTheme)>,
}

impl Default for AnnotationLayout {
    fn default() -> Self {
        AnnotationLayout {
            id_column: "id".into(),
            columns: FlagTheme::ALL
                .into_iter()
                .map(|t| (t.annotation_column().to_owned(), t))
                .collect(),
        }
    }
}

fn human_verdict(value: &str) -> Option<Verdict> {
    match value.trim().to_ascii_lowercase().as_str() {
        "yes" => Some(Verdict::Yes),
        "no" => Some(Verdict::No),
        "not sure" => Some(Verdict::NotSure),
        "" => Some(Verdict::Unasked),
        _ => None,
    }
}

pub fn read_human_annotations<R: std::io::Read>(
    reader: R,
    layout: &AnnotationLayout,
) -> Result<Vec<FlagRecord>, FlaggingError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize, FlaggingError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| FlaggingError::Schema {
                row: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let id_col = col(&layout.id_column)?;
    let theme_cols: Vec<(usize, FlagTheme)> = layout
        .columns
        .iter()
        .map(|(name, theme)| Ok((col(name)?, *theme)))
        .collect::<Result<_, FlaggingError>>()?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let schema = |message: String| FlaggingError::Schema { row: line, message };
        let id = row.get(id_col).unwrap_or("").trim().to_owned();
        if id.is_empty() {
            return Err(schema("empty id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(schema(format!("duplicate id `{id}`")));
        }
        let mut verdicts = BTreeMap::new();
        for &(c, theme) in &theme_cols {
            let raw = row.get(c).unwrap_or("");
            let v = human_verdict(raw).ok_or_else(|| schema(format!("unrecognized answer `{raw}` for {theme:?}")))?;
            verdicts.insert(theme, v);
        }
        out.push(FlagRecord::new(id, Stage::Human, verdicts, false));
    }
    Ok(out)
}

pub fn import_human_annotations(path: &Path, layout: &AnnotationLayout) -> Result<Vec<FlagRecord>, FlaggingError> {
    read_human_annotations(std::fs::File::open(path)?, layout)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewBundle {
    pub reviewer: usize,
    pub record_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewSample {
    pub seed: u64,
    pub bundles: Vec<ReviewBundle>,
}

impl ReviewSample {
    pub fn record_ids(&self) -> impl Iterator<Item = &String> {
        self.bundles.iter().flat_map(|b| b.record_ids.iter())
    }

    pub fn len(&self) -> usize {
        self.bundles.iter().map(|b| b.record_ids.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Seeded uniform sample of `k` ids without replacement, dealt into
/// `reviewers` bundles whose sizes differ by at most one. Input order does
/// not matter.
pub fn sample_for_review(
    flagged: &[String],
    k: usize,
    reviewers: usize,
    seed: u64,
) -> Result<ReviewSample, FlaggingError> {
    if reviewers == 0 {
        return Err(FlaggingError::NoReviewers);
    }
    let mut pool: Vec<&String> = flagged.iter().collect::<BTreeSet<_>>().into_iter().collect();
    pool.sort();
    if k > pool.len() {
        return Err(FlaggingError::SampleTooLarge {
            k,
            available: pool.len(),
        });
    }
    if k == 0 {
        return Ok(ReviewSample {
            seed,
            bundles: Vec::new(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<String> = rand::seq::index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect();
    let base = k / reviewers;
    let extra = k % reviewers;
    let mut bundles = Vec::with_capacity(reviewers);
    let mut it = picked.into_iter();
    for reviewer in 0..reviewers {
        let size = base + usize::from(reviewer < extra);
        bundles.push(ReviewBundle {
            reviewer: reviewer + 1,
            record_ids: it.by_ref().take(size).collect(),
        });
    }
    Ok(ReviewSample { seed, bundles })
}

/// Comment columns of the expert review sheet.
pub const REVIEW_CATEGORIES: [&str; 5] = [
    "Toxicity and Hate Speech",
    "Stereotyping and Objectification",
    "Exclusionary Norms",
    "Erasure and Lack of Representation",
    "Disparate Performance",
];

/// One CSV sheet per bundle: id, Input, Generated Description and an empty
/// comment column per bias category.
pub fn write_review_sheet<W: std::io::Write>(
    out: W,
    bundle: &ReviewBundle,
    corpus: &Corpus,
) -> Result<(), FlaggingError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id", "Input", "Generated Description"];
    header.extend(REVIEW_CATEGORIES);
    w.write_record(&header)?;
    for id in &bundle.record_ids {
        let r = corpus.get(id).ok_or_else(|| FlaggingError::UnknownRecord(id.clone()))?;
        let mut row = vec![id.clone(), r.listing.to_input_block(), r.description.clone()];
        row.extend(REVIEW_CATEGORIES.iter().map(|_| String::new()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviewOptions {
    /// Sample size; `None` reviews every LLM-flagged record.
    pub k: Option<usize>,
    pub reviewers: usize,
    pub seed: u64,
}

impl Default for ReviewOptions {
    fn default() -> Self {
        ReviewOptions {
            k: None,
            reviewers: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelReport {
    pub corpus_size: u64,
    pub human_annotated: u64,
    pub human_flagged: u64,
    pub llm_flagged: u64,
    pub reviewed: u64,
    pub llm_calls: u64,
    pub llm_unparseable: u64,
    pub llm: LlmStageResult,
    pub review: ReviewSample,
}

/// Human-flagged records go to the LLM stage; LLM-flagged records are
/// sampled for review. Each stage's input is a subset of the previous
/// stage's output.
pub fn run_funnel(
    corpus: &Corpus,
    human: &[FlagRecord],
    templates: &TemplateSet,
    client: &dyn LlmClient,
    llm_options: &LlmStageOptions,
    review: &ReviewOptions,
) -> Result<FunnelReport, FlaggingError> {
    let mut stage_input = Vec::new();
    for h in human {
        let r = corpus
            .get(&h.record_id)
            .ok_or_else(|| FlaggingError::UnknownRecord(h.record_id.clone()))?;
        if h.flagged {
            stage_input.push(r);
        }
    }
    let llm = run_llm_stage(&stage_input, templates, client, llm_options)?;
    let flagged = llm.flagged_ids();
    let k = review.k.unwrap_or(flagged.len());
    let sample = sample_for_review(&flagged, k, review.reviewers, review.seed)?;
    Ok(FunnelReport {
        corpus_size: corpus.len() as u64,
        human_annotated: human.len() as u64,
        human_flagged: stage_input.len() as u64,
        llm_flagged: flagged.len() as u64,
        reviewed: sample.len() as u64,
        llm_calls: llm.calls,
        llm_unparseable: llm.unparseable,
        llm,
        review: sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_input_block;

    fn rec(id: &str, desc: &str) -> DescribedRecord {
        let block = "Title: Vintage YAHTZEE Game with score pad\nBrand: GAME\nYear: 1984";
        DescribedRecord::new(parse_input_block(block, id).unwrap(), desc).unwrap()
    }

    #[test]
    fn verdict_parsing() {
        assert_eq!(parse_verdict("Yes"), Verdict::Yes);
        assert_eq!(parse_verdict("no."), Verdict::No);
        assert_eq!(parse_verdict("  YES \n"), Verdict::Yes);
        assert_eq!(parse_verdict("It depends on context"), Verdict::Unparseable);
        assert_eq!(parse_verdict(""), Verdict::Unparseable);
    }

    #[test]
    fn builtin_questions() {
        let t = TemplateSet::builtin();
        let q = t.question(FlagTheme::ExclusionaryNorms).unwrap();
        assert_eq!(q.term, "exclusionary norms");
        assert!(q.examples_block.contains("Yahtzee") && q.examples_block.contains("Sundress"));
        assert!(!q.definition.ends_with('.'));
    }

    #[test]
    fn prompts_have_no_residual_slots() {
        let t = TemplateSet::builtin();
        let r = rec("r", "Fun for the whole family.");
        for theme in FlagTheme::ALL {
            let p = render_prompt(&t, theme, &r).unwrap();
            for slot in ["[term]", "[definition]", "[examples]", "[query]"] {
                assert!(!p.contains(slot), "{theme:?} {slot}");
            }
            assert_eq!(
                p.contains("GENERATED DESCRIPTION:\nFun for"),
                theme.includes_description()
            );
        }
    }

    #[test]
    fn slot_values_are_not_rescanned() {
        let t = TemplateSet::builtin();
        let p = render_prompt(&t, FlagTheme::Toxicity, &rec("r", "literally [term] here")).unwrap();
        assert!(p.contains("literally [term] here"));
    }

    #[test]
    fn missing_and_unfilled() {
        let dir = tempfile::tempdir().unwrap();
        let t = TemplateSet::load_dir(dir.path()).unwrap();
        assert!(matches!(
            render_prompt(&t, FlagTheme::Toxicity, &rec("r", "x")),
            Err(FlaggingError::MissingTemplate(FlagTheme::Toxicity))
        ));
        std::fs::write(dir.path().join("other_bias.txt"), "Q: [query] [mystery]\n").unwrap();
        let t = TemplateSet::load_dir(dir.path()).unwrap();
        match render_prompt(&t, FlagTheme::OtherBias, &rec("r", "x")) {
            Err(FlaggingError::UnfilledSlot { slot, .. }) => assert_eq!(slot, "mystery"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn template_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        TemplateSet::write_builtin(dir.path()).unwrap();
        assert_eq!(TemplateSet::load_dir(dir.path()).unwrap(), TemplateSet::builtin());
    }

    #[test]
    fn any_yes_aggregation() {
        let r = rec("R", "A fine game.");
        let client = ScriptedLlmClient::new("no").respond(&["toxicity and hate speech"], "yes");
        let res = run_llm_stage(&[&r], &TemplateSet::builtin(), &client, &LlmStageOptions::default()).unwrap();
        let fr = &res.records[0];
        assert!(fr.flagged);
        assert_eq!(fr.verdicts[&FlagTheme::Toxicity], Verdict::Yes);
        assert_eq!(fr.verdicts.values().filter(|v| **v == Verdict::No).count(), 4);
        assert_eq!(res.calls, 5);
    }

    #[test]
    fn unparseable_policy() {
        let r = rec("R", "A fine game.");
        let client = ScriptedLlmClient::new("no").respond(&["exclusionary norms"], "maybe");
        let mut opts = LlmStageOptions::default();
        let res = run_llm_stage(&[&r], &TemplateSet::builtin(), &client, &opts).unwrap();
        assert!(res.records[0].flagged);
        assert_eq!(res.unparseable, 1);
        opts.unparseable_as_yes = false;
        let res = run_llm_stage(&[&r], &TemplateSet::builtin(), &client, &opts).unwrap();
        assert!(!res.records[0].flagged);
    }

    #[test]
    fn client_down() {
        let rs = [rec("a", "x"), rec("b", "y")];
        let refs: Vec<_> = rs.iter().collect();
        let client = ScriptedLlmClient::failing();
        let opts = LlmStageOptions {
            retry: RetryPolicy::immediate(2),
            ..LlmStageOptions::default()
        };
        let res = run_llm_stage(&refs, &TemplateSet::builtin(), &client, &opts).unwrap();
        assert!(res
            .records
            .iter()
            .all(|r| !r.flagged && r.verdicts.values().all(|v| *v == Verdict::Unasked)));
        assert_eq!(res.errors.len(), 10);
        assert_eq!(client.calls(), 30);
    }

    #[test]
    fn human_import() {
        let csv = "id,group_assoc,toxicity,stereotyping,exclusionary,other\n\
                   R1,yes,no,no,no,no\nR2,no,no,no,no,no\nR3,,,,,\nR4,no,Not Sure,no,no,no\n";
        let recs = read_human_annotations(csv.as_bytes(), &AnnotationLayout::default()).unwrap();
        assert!(recs[0].flagged);
        assert_eq!(recs[0].verdicts[&FlagTheme::GroupAssociation], Verdict::Yes);
        assert!(!recs[1].flagged);
        assert!(!recs[2].flagged && recs[2].verdicts.values().all(|v| *v == Verdict::Unasked));
        assert_eq!(recs[3].verdicts[&FlagTheme::Toxicity], Verdict::NotSure);
        assert!(!recs[3].flagged);

        let bad =
            "id,group_assoc,toxicity,stereotyping,exclusionary,other\nR1,no,no,no,no,no\nR2,no,perhaps,no,no,no\n";
        match read_human_annotations(bad.as_bytes(), &AnnotationLayout::default()) {
            Err(FlaggingError::Schema { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn review_sampling() {
        let ids: Vec<String> = (0..120).map(|i| format!("r{i:03}")).collect();
        let s = sample_for_review(&ids, 120, 4, 9).unwrap();
        assert_eq!(
            s.bundles.iter().map(|b| b.record_ids.len()).collect::<Vec<_>>(),
            [30; 4]
        );
        let mut rev = ids.clone();
        rev.reverse();
        assert_eq!(sample_for_review(&rev, 120, 4, 9).unwrap(), s);
        assert!(sample_for_review(&ids, 0, 4, 9).unwrap().is_empty());
        assert!(sample_for_review(&ids, 121, 4, 9).is_err());
        let small = sample_for_review(&ids, 10, 4, 1).unwrap();
        assert_eq!(
            small.bundles.iter().map(|b| b.record_ids.len()).collect::<Vec<_>>(),
            [3, 3, 2, 2]
        );
    }
}

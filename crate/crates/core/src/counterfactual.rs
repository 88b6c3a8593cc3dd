//! Gender-swapped listing pairs, repeated generation through a text-generator
//! port, and masked labeled datasets for the classifier.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifier::{Dataset, LabeledDocument};
use crate::clients::{ClientError, HttpEndpoint};
use crate::corpus::{parse_input_block, Department, ProductListing};
use crate::exec::{fan_out, RetryPolicy};
use crate::lexicon::{normalize, GenderGroup, GenderedVocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SwapAxis {
    MenWomen,
    BoysGirls,
}

impl SwapAxis {
    pub fn of_term(term: &str) -> SwapAxis {
        match term {
            "boy" | "boys" | "girl" | "girls" => SwapAxis::BoysGirls,
            _ => SwapAxis::MenWomen,
        }
    }

    pub fn of_department(d: Department) -> Option<SwapAxis> {
        match d {
            Department::Men | Department::Women => Some(SwapAxis::MenWomen),
            Department::Boys | Department::Girls => Some(SwapAxis::BoysGirls),
            Department::Unisex => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SwapError {
    #[error("listing `{0}` has no gendered field to swap")]
    NothingToSwap(String),
    #[error("listing `{0}` mixes the men/women and boys/girls axes")]
    AmbiguousAxis(String),
    #[error("listing `{id}` has no gendered field on the {axis:?} axis")]
    WrongAxis { id: String, axis: SwapAxis },
    #[error("listing `{id}`: department value `{value}` has no swappable form")]
    UnswappableDepartment { id: String, value: String },
}

/// Department spellings outside the gendered vocabulary.
const DEPARTMENT_FORMS: [(&str, &str); 2] = [("mens", "womens"), ("male", "female")];

fn department_counterpart(token: &str) -> Option<&'static str> {
    DEPARTMENT_FORMS.iter().find_map(|&(a, b)| match token {
        t if t == a => Some(b),
        t if t == b => Some(a),
        _ => None,
    })
}

fn department_form_axis(token: &str) -> Option<SwapAxis> {
    department_counterpart(token).map(|_| SwapAxis::MenWomen)
}

/// Copies the case pattern of `original` (lower, Capitalized, UPPER) onto
/// `replacement`.
fn match_case(original: &str, replacement: &str) -> String {
    let mut chars = original.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    let rest: Vec<char> = chars.collect();
    if first_upper && !rest.is_empty() && rest.iter().all(|c| c.is_uppercase()) {
        replacement.to_uppercase()
    } else if first_upper {
        let mut r = replacement.chars();
        r.next()
            .map(|c| c.to_uppercase().chain(r).collect())
            .unwrap_or_default()
    } else {
        replacement.to_owned()
    }
}

/// Replaces each maximal alphanumeric run whose lowercase form `map`
/// accepts, leaving every other byte untouched.
fn replace_runs(text: &str, mut map: impl FnMut(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut run = String::new();
    let mut flush = |run: &mut String, out: &mut String| {
        if run.is_empty() {
            return;
        }
        match map(&run.to_lowercase()) {
            Some(rep) => out.push_str(&match_case(run, &rep)),
            None => out.push_str(run),
        }
        run.clear();
    };
    for c in text.chars() {
        if c.is_alphanumeric() {
            run.push(c);
        } else {
            flush(&mut run, &mut out);
            out.push(c);
        }
    }
    flush(&mut run, &mut out);
    out
}

fn field_axes(listing: &ProductListing, vocab: &GenderedVocabulary) -> Vec<SwapAxis> {
    let mut axes = Vec::new();
    let mut scan = |text: &str, department_field: bool| {
        for t in normalize(text) {
            if vocab.is_gendered(&t) {
                axes.push(SwapAxis::of_term(&t));
            } else if department_field {
                axes.extend(department_form_axis(&t));
            }
        }
    };
    scan(&listing.title, false);
    for s in &listing.category_path {
        scan(s, false);
    }
    for a in listing.aspects.iter().filter(|a| a.is_department()) {
        scan(&a.value, true);
    }
    axes.extend(listing.department.and_then(SwapAxis::of_department));
    axes.sort();
    axes.dedup();
    axes
}

/// The single axis a listing's gendered fields lie on.
pub fn detect_axis(listing: &ProductListing, vocab: &GenderedVocabulary) -> Result<SwapAxis, SwapError> {
    match field_axes(listing, vocab).as_slice() {
        [] => Err(SwapError::NothingToSwap(listing.id.clone())),
        [axis] => Ok(*axis),
        _ => Err(SwapError::AmbiguousAxis(listing.id.clone())),
    }
}

/// Gender polarity from the department, else from the first gendered token
/// of the title or categories.
pub fn listing_polarity(listing: &ProductListing, vocab: &GenderedVocabulary) -> Option<GenderGroup> {
    match listing.department {
        Some(Department::Men | Department::Boys) => return Some(GenderGroup::Masculine),
        Some(Department::Women | Department::Girls) => return Some(GenderGroup::Feminine),
        _ => {}
    }
    std::iter::once(listing.title.as_str())
        .chain(listing.category_path.iter().map(String::as_str))
        .flat_map(normalize)
        .find_map(|t| vocab.gender_of(&t))
}

/// Maps gendered tokens in the title, category segments and department
/// aspect values to their counterparts; every other field is copied.
pub fn swap_gender(listing: &ProductListing, axis: SwapAxis) -> Result<ProductListing, SwapError> {
    swap_gender_with(listing, axis, GenderedVocabulary::builtin())
}

pub fn swap_gender_with(
    listing: &ProductListing,
    axis: SwapAxis,
    vocab: &GenderedVocabulary,
) -> Result<ProductListing, SwapError> {
    let found = detect_axis(listing, vocab)?;
    if found != axis {
        return Err(SwapError::WrongAxis {
            id: listing.id.clone(),
            axis,
        });
    }
    let term_map = |t: &str| vocab.counterpart(t).map(str::to_owned);
    let mut out = listing.clone();
    out.title = replace_runs(&listing.title, term_map);
    out.category_path = listing
        .category_path
        .iter()
        .map(|s| replace_runs(s, term_map))
        .collect();
    for a in out.aspects.iter_mut().filter(|a| a.is_department()) {
        a.value = replace_runs(&a.value, |t| {
            term_map(t).or_else(|| department_counterpart(t).map(str::to_owned))
        });
    }
    out.department = out.derive_department();
    if let Some(d) = listing.department.filter(|d| *d != Department::Unisex) {
        let expected = match d {
            Department::Men => Department::Women,
            Department::Women => Department::Men,
            Department::Boys => Department::Girls,
            Department::Girls => Department::Boys,
            Department::Unisex => unreachable!(),
        };
        if out.department != Some(expected) {
            let value = listing
                .aspects
                .iter()
                .find(|a| a.is_department())
                .map(|a| a.value.clone())
                .unwrap_or_else(|| d.as_str().to_owned());
            return Err(SwapError::UnswappableDepartment {
                id: listing.id.clone(),
                value,
            });
        }
    }
    Ok(out)
}

/// Names of fields that differ between two listings: `title`,
/// `category[i]`, `aspect:<name>`, `condition`, `department`, `id`.
pub fn field_diff(a: &ProductListing, b: &ProductListing) -> Vec<String> {
    let mut diff = Vec::new();
    if a.id != b.id {
        diff.push("id".to_owned());
    }
    if a.title != b.title {
        diff.push("title".to_owned());
    }
    let n = a.category_path.len().max(b.category_path.len());
    for i in 0..n {
        if a.category_path.get(i) != b.category_path.get(i) {
            diff.push(format!("category[{i}]"));
        }
    }
    let n = a.aspects.len().max(b.aspects.len());
    for i in 0..n {
        match (a.aspects.get(i), b.aspects.get(i)) {
            (Some(x), Some(y)) if x == y => {}
            (Some(x), _) => diff.push(format!("aspect:{}", x.name)),
            (None, Some(y)) => diff.push(format!("aspect:{}", y.name)),
            (None, None) => {}
        }
    }
    if a.condition != b.condition {
        diff.push("condition".to_owned());
    }
    if a.department != b.department {
        diff.push("department".to_owned());
    }
    diff
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Base,
    Swapped,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Base => "base",
            Side::Swapped => "swapped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualPair {
    pub pair_id: String,
    pub base: ProductListing,
    pub swapped: ProductListing,
    pub swap_axis: SwapAxis,
    pub base_polarity: GenderGroup,
}

impl CounterfactualPair {
    pub fn listing(&self, side: Side) -> &ProductListing {
        match side {
            Side::Base => &self.base,
            Side::Swapped => &self.swapped,
        }
    }

    pub fn polarity(&self, side: Side) -> GenderGroup {
        match side {
            Side::Base => self.base_polarity,
            Side::Swapped => self.base_polarity.opposite(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CounterfactualError {
    #[error(transparent)]
    Swap(#[from] SwapError),
    #[error("pair `{pair_id}`: {message}")]
    InvalidPair { pair_id: String, message: String },
    #[error("duplicate pair id `{0}`")]
    DuplicatePair(String),
    #[error("pair file: {0}")]
    PairFile(String),
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("no documents for label `{0}`")]
    EmptySide(String),
    #[error("generation store `{path}` line {line}: {message}")]
    Store {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Derives the swapped side from `base`.
pub fn derive_pair(pair_id: &str, base: ProductListing) -> Result<CounterfactualPair, CounterfactualError> {
    let vocab = GenderedVocabulary::builtin();
    let axis = detect_axis(&base, vocab)?;
    let swapped = swap_gender_with(&base, axis, vocab)?;
    let base_polarity = listing_polarity(&base, vocab).ok_or_else(|| CounterfactualError::InvalidPair {
        pair_id: pair_id.to_owned(),
        message: "cannot tell the gender of the base listing".into(),
    })?;
    Ok(CounterfactualPair {
        pair_id: pair_id.to_owned(),
        base,
        swapped,
        swap_axis: axis,
        base_polarity,
    })
}

/// One entry of a pair file. Listings are input blocks; `swapped` overrides
/// the derived counterfactual.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub pair_id: String,
    pub base: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swapped: Option<String>,
}

pub fn pair_from_spec(spec: &PairSpec) -> Result<CounterfactualPair, CounterfactualError> {
    let invalid = |message: String| CounterfactualError::InvalidPair {
        pair_id: spec.pair_id.clone(),
        message,
    };
    let base = parse_input_block(&spec.base, &spec.pair_id).map_err(|e| invalid(e.to_string()))?;
    let Some(block) = &spec.swapped else {
        return derive_pair(&spec.pair_id, base);
    };
    let swapped = parse_input_block(block, &spec.pair_id).map_err(|e| invalid(e.to_string()))?;
    let vocab = GenderedVocabulary::builtin();
    let axis = detect_axis(&base, vocab)?;
    let base_polarity =
        listing_polarity(&base, vocab).ok_or_else(|| invalid("cannot tell the gender of the base listing".into()))?;
    if listing_polarity(&swapped, vocab) != Some(base_polarity.opposite()) {
        return Err(invalid(
            "explicit swapped listing does not carry the opposite gender".into(),
        ));
    }
    Ok(CounterfactualPair {
        pair_id: spec.pair_id.clone(),
        base,
        swapped,
        swap_axis: axis,
        base_polarity,
    })
}

pub fn pair_to_spec(pair: &CounterfactualPair) -> PairSpec {
    PairSpec {
        pair_id: pair.pair_id.clone(),
        base: pair.base.to_input_block(),
        swapped: Some(pair.swapped.to_input_block()),
    }
}

pub fn read_pair_file(path: &Path) -> Result<Vec<CounterfactualPair>, CounterfactualError> {
    let text = std::fs::read_to_string(path)?;
    let specs: Vec<PairSpec> =
        serde_json::from_str(&text).map_err(|e| CounterfactualError::PairFile(format!("{}: {e}", path.display())))?;
    let mut seen = std::collections::HashSet::new();
    specs
        .iter()
        .map(|s| {
            if !seen.insert(s.pair_id.clone()) {
                return Err(CounterfactualError::DuplicatePair(s.pair_id.clone()));
            }
            pair_from_spec(s)
        })
        .collect()
}

pub fn write_pair_file(path: &Path, pairs: &[CounterfactualPair]) -> Result<(), CounterfactualError> {
    let specs: Vec<PairSpec> = pairs.iter().map(pair_to_spec).collect();
    let text = serde_json::to_string_pretty(&specs).expect("pair specs serialize");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Derives pairs from every listing that can be swapped; listings that
/// cannot are returned with the reason.
pub fn derive_pairs(
    listings: impl IntoIterator<Item = ProductListing>,
) -> (Vec<CounterfactualPair>, Vec<(String, CounterfactualError)>) {
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for l in listings {
        let id = l.id.clone();
        match derive_pair(&id, l) {
            Ok(p) => pairs.push(p),
            Err(e) => skipped.push((id, e)),
        }
    }
    (pairs, skipped)
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{message}")]
pub struct GeneratorError {
    pub message: String,
    pub retryable: bool,
}

impl GeneratorError {
    pub fn new(message: impl Into<String>) -> Self {
        GeneratorError {
            message: message.into(),
            retryable: true,
        }
    }

    pub fn permanent(message: impl Into<String>) -> Self {
        GeneratorError {
            message: message.into(),
            retryable: false,
        }
    }
}

impl From<ClientError> for GeneratorError {
    fn from(e: ClientError) -> Self {
        GeneratorError {
            retryable: e.is_retryable(),
            message: e.to_string(),
        }
    }
}

/// Produces one description per call; `sample_index` distinguishes repeated
/// samples of the same input.
pub trait TextGenerator: Send + Sync {
    fn tag(&self) -> String;
    fn generate(&self, input_block: &str, sample_index: u32) -> Result<String, GeneratorError>;
}

/// Deterministic generator echoing the listing title.
#[derive(Debug, Clone, Default)]
pub struct StubGenerator;

impl TextGenerator for StubGenerator {
    fn tag(&self) -> String {
        "stub".into()
    }

    fn generate(&self, input_block: &str, _sample_index: u32) -> Result<String, GeneratorError> {
        let title = input_block
            .lines()
            .find_map(|l| l.strip_prefix("Title:"))
            .map(str::trim)
            .unwrap_or_default();
        Ok(title.to_owned())
    }
}

pub fn input_digest(input_block: &str) -> String {
    hex::encode(Sha256::digest(input_block.as_bytes()))
}

/// Serves texts from prior store files, keyed by input digest and sample
/// index.
#[derive(Debug, Clone, Default)]
pub struct ReplayGenerator {
    tag: String,
    texts: HashMap<(String, u32), String>,
}

impl ReplayGenerator {
    /// Loads every `*.jsonl` file in `dir` (or `dir` itself if it is a file).
    pub fn from_path(path: &Path) -> Result<Self, CounterfactualError> {
        let mut files = Vec::new();
        if path.is_dir() {
            for entry in std::fs::read_dir(path)? {
                let p = entry?.path();
                if p.extension().is_some_and(|e| e == "jsonl") {
                    files.push(p);
                }
            }
            files.sort();
        } else {
            files.push(path.to_owned());
        }
        let mut replay = ReplayGenerator {
            tag: format!("replay:{}", path.display()),
            texts: HashMap::new(),
        };
        for f in files {
            for sample in read_store(&f)? {
                if let Some(text) = sample.text {
                    replay.texts.insert((sample.input_digest, sample.sample_index), text);
                }
            }
        }
        Ok(replay)
    }

    pub fn insert(&mut self, input_block: &str, sample_index: u32, text: impl Into<String>) {
        self.texts
            .insert((input_digest(input_block), sample_index), text.into());
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

impl TextGenerator for ReplayGenerator {
    fn tag(&self) -> String {
        self.tag.clone()
    }

    fn generate(&self, input_block: &str, sample_index: u32) -> Result<String, GeneratorError> {
        self.texts
            .get(&(input_digest(input_block), sample_index))
            .cloned()
            .ok_or_else(|| GeneratorError::permanent(format!("no recorded generation for sample {sample_index}")))
    }
}

/// Remote generator: `{"input_block", "sample_index"}` -> `{"text"}`.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    endpoint: HttpEndpoint,
}

impl HttpGenerator {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        HttpGenerator { endpoint }
    }
}

impl TextGenerator for HttpGenerator {
    fn tag(&self) -> String {
        self.endpoint
            .config()
            .model
            .clone()
            .unwrap_or_else(|| self.endpoint.config().url.clone())
    }

    fn generate(&self, input_block: &str, sample_index: u32) -> Result<String, GeneratorError> {
        let resp = self
            .endpoint
            .post_json(&json!({ "input_block": input_block, "sample_index": sample_index }))?;
        resp.get("text")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| GeneratorError::permanent("response lacks string `text`"))
    }
}

/// One line of the append-only generation store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredSample {
    pub pair_id: String,
    pub side: Side,
    pub sample_index: u32,
    pub input_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub attempts: u32,
    pub generator_tag: String,
}

pub fn read_store(path: &Path) -> Result<Vec<StoredSample>, CounterfactualError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>()?;
    let last = lines.len();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(s) => out.push(s),
            // a torn final line from an interrupted run is dropped
            Err(_) if i + 1 == last => log::warn!("{}: ignoring truncated final line", path.display()),
            Err(e) => {
                return Err(CounterfactualError::Store {
                    path: path.to_owned(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationBatch {
    pub pair_id: String,
    pub side: Side,
    pub label: GenderGroup,
    pub requested: u32,
    /// Successful samples in sample-index order.
    pub texts: Vec<String>,
    pub generator_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_samples: Vec<u32>,
}

impl GenerationBatch {
    pub fn is_complete(&self) -> bool {
        self.partial.is_none() && self.texts.len() == self.requested as usize
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub samples: u32,
    pub in_flight: usize,
    pub retry: RetryPolicy,
    /// Append-only JSONL store; completed samples found there are reused.
    pub store: Option<PathBuf>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            samples: 500,
            in_flight: 4,
            retry: RetryPolicy::default(),
            store: None,
        }
    }
}

struct Job {
    pair: usize,
    side: Side,
    index: u32,
    block: String,
    digest: String,
}

/// Requests `samples` generations for each side of each pair, returning two
/// batches per pair (base first) in pair order.
pub fn generate_batches(
    pairs: &[CounterfactualPair],
    generator: &dyn TextGenerator,
    options: &GenerateOptions,
) -> Result<Vec<GenerationBatch>, CounterfactualError> {
    if options.samples == 0 {
        return Err(CounterfactualError::ZeroSamples);
    }
    let tag = generator.tag();
    let sides = [Side::Base, Side::Swapped];
    let blocks: Vec<[String; 2]> = pairs
        .iter()
        .map(|p| sides.map(|s| p.listing(s).to_input_block()))
        .collect();

    let mut done: HashMap<(String, Side, u32), (String, String)> = HashMap::new();
    if let Some(path) = &options.store {
        for s in read_store(path)? {
            if let Some(text) = s.text {
                done.insert((s.pair_id, s.side, s.sample_index), (s.input_digest, text));
            }
        }
    }

    let mut results: BTreeMap<(usize, Side, u32), Result<String, String>> = BTreeMap::new();
    let mut jobs = Vec::new();
    for (pi, pair) in pairs.iter().enumerate() {
        for (si, side) in sides.into_iter().enumerate() {
            let digest = input_digest(&blocks[pi][si]);
            for index in 0..options.samples {
                match done.get(&(pair.pair_id.clone(), side, index)) {
                    Some((d, text)) if *d == digest => {
                        results.insert((pi, side, index), Ok(text.clone()));
                    }
                    _ => jobs.push(Job {
                        pair: pi,
                        side,
                        index,
                        block: blocks[pi][si].clone(),
                        digest: digest.clone(),
                    }),
                }
            }
        }
    }
    log::info!(
        "generating {} samples ({} reused) with `{tag}`",
        jobs.len(),
        results.len()
    );

    let mut store = match &options.store {
        Some(path) => Some(OpenOptions::new().create(true).append(true).open(path)?),
        None => None,
    };
    let mut io_error = None;
    fan_out(
        &jobs,
        options.in_flight,
        |_, job| {
            let mut last_retryable = true;
            let outcome = options.retry.run(|_| {
                if !last_retryable {
                    // permanent failure: stop spending attempts
                    return Err(None);
                }
                generator.generate(&job.block, job.index).map_err(|e| {
                    last_retryable = e.retryable;
                    Some(e.message)
                })
            });
            match outcome {
                Ok(text) => (Ok(text), 0),
                Err((msg, attempts)) => (Err(msg.unwrap_or_else(|| "permanent failure".into())), attempts),
            }
        },
        |i, (outcome, attempts)| {
            let job = &jobs[i];
            if let (Some(file), None) = (store.as_mut(), io_error.as_ref()) {
                let record = StoredSample {
                    pair_id: pairs[job.pair].pair_id.clone(),
                    side: job.side,
                    sample_index: job.index,
                    input_digest: job.digest.clone(),
                    text: outcome.as_ref().ok().cloned(),
                    error: outcome.as_ref().err().cloned(),
                    attempts: if outcome.is_ok() { attempts.max(1) } else { attempts },
                    generator_tag: tag.clone(),
                };
                let line = serde_json::to_string(&record).expect("sample serializes") + "\n";
                if let Err(e) = file.write_all(line.as_bytes()).and_then(|_| file.flush()) {
                    io_error = Some(e);
                }
            }
            results.insert((job.pair, job.side, job.index), outcome);
        },
    );
    if let Some(e) = io_error {
        return Err(e.into());
    }

    let mut batches = Vec::with_capacity(pairs.len() * 2);
    for (pi, pair) in pairs.iter().enumerate() {
        for side in sides {
            let mut texts = Vec::new();
            let mut failed = Vec::new();
            let mut first_error = None;
            for index in 0..options.samples {
                match &results[&(pi, side, index)] {
                    Ok(t) => texts.push(t.clone()),
                    Err(e) => {
                        failed.push(index);
                        first_error.get_or_insert_with(|| e.clone());
                    }
                }
            }
            let partial = first_error.map(|e| {
                format!(
                    "{} of {} samples failed; first error: {e}",
                    failed.len(),
                    options.samples
                )
            });
            batches.push(GenerationBatch {
                pair_id: pair.pair_id.clone(),
                side,
                label: pair.polarity(side),
                requested: options.samples,
                texts,
                generator_tag: tag.clone(),
                partial,
                failed_samples: failed,
            });
        }
    }
    Ok(batches)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierDataset {
    pub dataset: Dataset,
    pub label_counts: BTreeMap<String, usize>,
    pub balanced: bool,
}

/// Normalizes and masks every text, labeled by the gender of its side.
pub fn build_classifier_dataset(batches: &[GenerationBatch]) -> Result<ClassifierDataset, CounterfactualError> {
    let vocab = GenderedVocabulary::builtin();
    let mut documents = Vec::new();
    for b in batches {
        for (j, text) in b.texts.iter().enumerate() {
            documents.push(LabeledDocument {
                id: format!("{}/{}/{j}", b.pair_id, b.side.as_str()),
                label: b.label.as_str().to_owned(),
                tokens: vocab.mask(&normalize(text)),
            });
        }
    }
    let dataset = Dataset::new(documents);
    let label_counts = dataset.label_counts();
    for g in [GenderGroup::Feminine, GenderGroup::Masculine] {
        if !label_counts.contains_key(g.as_str()) {
            return Err(CounterfactualError::EmptySide(g.as_str().to_owned()));
        }
    }
    Ok(ClassifierDataset {
        balanced: dataset.is_balanced(),
        dataset,
        label_counts,
    })
}

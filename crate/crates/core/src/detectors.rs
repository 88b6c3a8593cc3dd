//! Lexicon detectors for the bias categories that can be found in a single
//! description, the toxicity hook, and whole-corpus aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{is_gender_neutral, segment_matches, Corpus, DescribedRecord, NeutralityConfig, ProductListing};
use crate::exec::fan_out;
use crate::lexicon::{normalize, Lexicon, LexiconError, MatchSpan, PhraseSet, PhraseSource, VocabPaths};
use crate::stats::{
    critical_value, proportion_ci_with, two_proportion_z, IntervalMethod, StatsError, TwoProportionTest,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasCategory {
    BodySizeAssumption,
    TargetGroupExclusion,
    NonbinaryExclusion,
    TargetGroupAssumption,
    /// Only produced by the counterfactual classifier path.
    AdvertisedFeatureBias,
    /// Only produced by the counterfactual classifier path.
    ProductActivityBias,
    PersuasionDisparity,
    Toxicity,
}

impl BiasCategory {
    pub fn label(self) -> &'static str {
        match self {
            BiasCategory::BodySizeAssumption => "Body size assumptions",
            BiasCategory::TargetGroupExclusion => "Target group exclusion",
            BiasCategory::NonbinaryExclusion => "Nonbinary exclusion",
            BiasCategory::TargetGroupAssumption => "Target group assumptions",
            BiasCategory::AdvertisedFeatureBias => "Bias in advertised features",
            BiasCategory::ProductActivityBias => "Product-activity associations",
            BiasCategory::PersuasionDisparity => "Persuasion disparities",
            BiasCategory::Toxicity => "Toxicity",
        }
    }
}

impl fmt::Display for BiasCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    BodySize,
    TargetGroupExclusion,
    NonbinaryExclusion,
    TargetGroupAssumption,
    CallToAction,
    Toxicity,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::BodySize,
        DetectorKind::TargetGroupExclusion,
        DetectorKind::NonbinaryExclusion,
        DetectorKind::TargetGroupAssumption,
        DetectorKind::CallToAction,
        DetectorKind::Toxicity,
    ];

    pub fn category(self) -> BiasCategory {
        match self {
            DetectorKind::BodySize => BiasCategory::BodySizeAssumption,
            DetectorKind::TargetGroupExclusion => BiasCategory::TargetGroupExclusion,
            DetectorKind::NonbinaryExclusion => BiasCategory::NonbinaryExclusion,
            DetectorKind::TargetGroupAssumption => BiasCategory::TargetGroupAssumption,
            DetectorKind::CallToAction => BiasCategory::PersuasionDisparity,
            DetectorKind::Toxicity => BiasCategory::Toxicity,
        }
    }
}

/// `(verb)( intensifier)? for (target)`, expanded into literal phrases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExclusionPattern {
    pub verbs: Vec<String>,
    pub intensifiers: Vec<String>,
    pub targets: Vec<String>,
}

impl Default for ExclusionPattern {
    fn default() -> Self {
        let targets = [
            "women", "ladies", "girls", "moms", "mothers", "grandmas", "sisters", "gals", "men", "guys", "boys",
            "dads", "fathers", "grandpas", "brothers", "dudes",
        ];
        ExclusionPattern {
            verbs: vec!["designed".into(), "made".into()],
            intensifiers: vec!["exclusively".into()],
            targets: targets.map(String::from).to_vec(),
        }
    }
}

impl ExclusionPattern {
    pub fn literal_phrases(&self) -> Vec<String> {
        let mut out = Vec::new();
        for verb in &self.verbs {
            for target in &self.targets {
                out.push(format!("{verb} for {target}"));
                for adv in &self.intensifiers {
                    out.push(format!("{verb} {adv} for {target}"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub enabled: BTreeSet<DetectorKind>,
    /// Category segments (or `&`/`,` parts of segments) that put a listing in
    /// clothing scope.
    pub clothing_scope: Vec<String>,
    /// Restrict body-size detection to clothing scope.
    pub body_size_scoped: bool,
    /// Restrict explicit-exclusion detection to clothing scope.
    pub exclusion_scoped: bool,
    /// Top-level categories whose target-group-assumption hits go to review
    /// instead of being counted.
    pub suppression: Vec<String>,
    pub toxicity_threshold: f64,
    pub toxicity_in_flight: usize,
    pub exclusion: ExclusionPattern,
    pub vocab: VocabPaths,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            enabled: DetectorKind::ALL
                .into_iter()
                .filter(|k| *k != DetectorKind::Toxicity)
                .collect(),
            clothing_scope: ["Clothing", "Shoes", "Accessories", "Clothing, Shoes & Accessories"]
                .map(String::from)
                .to_vec(),
            body_size_scoped: true,
            exclusion_scoped: true,
            suppression: ["Movies", "Music", "Books"].map(String::from).to_vec(),
            toxicity_threshold: 0.7,
            toxicity_in_flight: 4,
            exclusion: ExclusionPattern::default(),
            vocab: VocabPaths::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("toxicity threshold must lie strictly between 0 and 1, got {0}")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("toxicity detector enabled but no scorer configured")]
    MissingScorer,
    #[error("record `{record_id}`: toxicity scorer unavailable: {message}")]
    ScorerUnavailable { record_id: String, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ScorerError(pub String);

/// External toxicity model: a probability in [0, 1] per text.
pub trait ToxicityScorer: Send + Sync {
    fn score(&self, text: &str) -> Result<f64, ScorerError>;
}

impl<F> ToxicityScorer for F
where
    F: Fn(&str) -> Result<f64, ScorerError> + Send + Sync,
{
    fn score(&self, text: &str) -> Result<f64, ScorerError> {
        self(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionStatus {
    OutOfScope,
    Clear,
    Flagged,
    NeedsReview,
}

/// Outcome of one detector on one record; metrics are recorded even when
/// nothing is flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub category: BiasCategory,
    pub status: DetectionStatus,
    pub matches: Vec<MatchSpan>,
    pub metrics: BTreeMap<String, f64>,
    pub note: Option<String>,
}

impl Detection {
    fn new(category: BiasCategory, status: DetectionStatus) -> Self {
        Detection {
            category,
            status,
            matches: Vec::new(),
            metrics: BTreeMap::new(),
            note: None,
        }
    }

    fn from_matches(category: BiasCategory, matches: Vec<MatchSpan>) -> Self {
        let status = if matches.is_empty() {
            DetectionStatus::Clear
        } else {
            DetectionStatus::Flagged
        };
        let mut d = Detection::new(category, status);
        d.metrics.insert("match_count".into(), matches.len() as f64);
        d.matches = matches;
        d
    }

    pub fn is_flagged(&self) -> bool {
        self.status == DetectionStatus::Flagged
    }

    pub fn in_scope(&self) -> bool {
        self.status != DetectionStatus::OutOfScope
    }

    /// A finding for flagged and review-queue outcomes.
    pub fn finding(&self, record_id: &str) -> Option<AuditFinding> {
        let status = match self.status {
            DetectionStatus::Flagged => FindingStatus::Flagged,
            DetectionStatus::NeedsReview => FindingStatus::NeedsReview,
            _ => return None,
        };
        Some(AuditFinding {
            record_id: record_id.to_owned(),
            category: self.category,
            status,
            matches: self.matches.clone(),
            metrics: self.metrics.clone(),
            note: self.note.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingStatus {
    Flagged,
    NeedsReview,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFinding {
    pub record_id: String,
    pub category: BiasCategory,
    pub status: FindingStatus,
    pub matches: Vec<MatchSpan>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Compiled vocabularies plus scope settings.
#[derive(Debug, Clone)]
pub struct DetectorSuite {
    pub config: DetectorConfig,
    pub neutrality: NeutralityConfig,
    pub lexicon: Lexicon,
    exclusion: PhraseSet,
    gendered_terms: PhraseSet,
}

impl DetectorSuite {
    pub fn new(config: DetectorConfig, neutrality: NeutralityConfig) -> Result<Self, DetectorError> {
        let lexicon = Lexicon::load(&config.vocab)?;
        Self::with_lexicon(config, neutrality, lexicon)
    }

    pub fn with_lexicon(
        config: DetectorConfig,
        neutrality: NeutralityConfig,
        lexicon: Lexicon,
    ) -> Result<Self, DetectorError> {
        let t = config.toxicity_threshold;
        if !(t > 0.0 && t < 1.0) {
            return Err(DetectorError::InvalidThreshold(t));
        }
        let exclusion = PhraseSet::from_phrases(
            "explicit_exclusion",
            PhraseSource::ExplicitExclusion,
            config.exclusion.literal_phrases(),
        )?;
        let gendered_terms = PhraseSet::from_phrases(
            "gendered_terms",
            PhraseSource::GenderedTerms,
            lexicon.gendered.all_terms(),
        )?;
        Ok(DetectorSuite {
            config,
            neutrality,
            lexicon,
            exclusion,
            gendered_terms,
        })
    }

    pub fn builtin() -> Self {
        Self::with_lexicon(
            DetectorConfig::default(),
            NeutralityConfig::default(),
            Lexicon::builtin(),
        )
        .expect("default detector configuration is valid")
    }

    pub fn exclusion_phrases(&self) -> &PhraseSet {
        &self.exclusion
    }

    pub fn gendered_terms(&self) -> &PhraseSet {
        &self.gendered_terms
    }

    /// The phrase set a lexicon detector matches against.
    pub fn phrase_set(&self, kind: DetectorKind) -> Option<&PhraseSet> {
        match kind {
            DetectorKind::BodySize => Some(&self.lexicon.body_size),
            DetectorKind::TargetGroupExclusion => Some(&self.exclusion),
            DetectorKind::NonbinaryExclusion => Some(&self.lexicon.nonbinary),
            DetectorKind::TargetGroupAssumption => Some(&self.gendered_terms),
            DetectorKind::CallToAction => Some(&self.lexicon.call_to_action),
            DetectorKind::Toxicity => None,
        }
    }

    pub fn in_clothing_scope(&self, listing: &ProductListing) -> bool {
        listing
            .category_path
            .iter()
            .any(|s| segment_matches(s, &self.config.clothing_scope))
    }

    pub fn is_suppressed(&self, listing: &ProductListing) -> bool {
        listing
            .top_level_category()
            .is_some_and(|top| segment_matches(top, &self.config.suppression))
    }

    pub fn detect_body_size(&self, record: &DescribedRecord) -> Detection {
        if self.config.body_size_scoped && !self.in_clothing_scope(&record.listing) {
            return Detection::new(BiasCategory::BodySizeAssumption, DetectionStatus::OutOfScope);
        }
        let tokens = normalize(&record.description);
        Detection::from_matches(BiasCategory::BodySizeAssumption, self.lexicon.body_size.find(&tokens))
    }

    pub fn detect_target_group_exclusion(&self, record: &DescribedRecord) -> Detection {
        if self.config.exclusion_scoped && !self.in_clothing_scope(&record.listing) {
            return Detection::new(BiasCategory::TargetGroupExclusion, DetectionStatus::OutOfScope);
        }
        let tokens = normalize(&record.description);
        let counts = self.lexicon.gendered.count(&tokens);
        let mut d = Detection::from_matches(BiasCategory::TargetGroupExclusion, self.exclusion.find(&tokens));
        d.metrics.insert("gender_mention_count".into(), counts.total as f64);
        d.metrics.insert("feminine_mentions".into(), counts.feminine as f64);
        d.metrics.insert("masculine_mentions".into(), counts.masculine as f64);
        d
    }

    pub fn detect_nonbinary_exclusion(&self, record: &DescribedRecord) -> Detection {
        let tokens = normalize(&record.description);
        Detection::from_matches(BiasCategory::NonbinaryExclusion, self.lexicon.nonbinary.find(&tokens))
    }

    pub fn detect_target_group_assumption(&self, record: &DescribedRecord) -> Detection {
        if !is_gender_neutral(&record.listing, &self.neutrality) {
            return Detection::new(BiasCategory::TargetGroupAssumption, DetectionStatus::OutOfScope);
        }
        let tokens = normalize(&record.description);
        let mut d = Detection::from_matches(BiasCategory::TargetGroupAssumption, self.gendered_terms.find(&tokens));
        d.metrics.insert("gender_mention_count".into(), d.matches.len() as f64);
        if d.is_flagged() && self.is_suppressed(&record.listing) {
            d.status = DetectionStatus::NeedsReview;
            d.note = Some(format!(
                "top-level category `{}` is on the suppression list",
                record.listing.top_level_category().unwrap_or_default()
            ));
        }
        d
    }

    pub fn detect_call_to_action(&self, record: &DescribedRecord) -> Detection {
        let tokens = normalize(&record.description);
        Detection::from_matches(
            BiasCategory::PersuasionDisparity,
            self.lexicon.call_to_action.find(&tokens),
        )
    }

    pub fn detect_toxicity(
        &self,
        record: &DescribedRecord,
        scorer: &dyn ToxicityScorer,
    ) -> Result<Detection, DetectorError> {
        let unavailable = |message: String| DetectorError::ScorerUnavailable {
            record_id: record.id().to_owned(),
            message,
        };
        let score = scorer.score(&record.description).map_err(|e| unavailable(e.0))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(unavailable(format!("score {score} outside [0, 1]")));
        }
        let status = if score >= self.config.toxicity_threshold {
            DetectionStatus::Flagged
        } else {
            DetectionStatus::Clear
        };
        let mut d = Detection::new(BiasCategory::Toxicity, status);
        d.metrics.insert("toxicity".into(), score);
        Ok(d)
    }

    /// Runs one lexicon detector. Toxicity needs a scorer; see
    /// [`DetectorSuite::detect_toxicity`].
    pub fn detect(&self, kind: DetectorKind, record: &DescribedRecord) -> Option<Detection> {
        Some(match kind {
            DetectorKind::BodySize => self.detect_body_size(record),
            DetectorKind::TargetGroupExclusion => self.detect_target_group_exclusion(record),
            DetectorKind::NonbinaryExclusion => self.detect_nonbinary_exclusion(record),
            DetectorKind::TargetGroupAssumption => self.detect_target_group_assumption(record),
            DetectorKind::CallToAction => self.detect_call_to_action(record),
            DetectorKind::Toxicity => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouper {
    Department,
    TopLevelCategory,
}

impl Grouper {
    pub fn name(self) -> &'static str {
        match self {
            Grouper::Department => "department",
            Grouper::TopLevelCategory => "top_level_category",
        }
    }

    pub fn key(self, listing: &ProductListing) -> String {
        match self {
            Grouper::Department => listing.department.map_or("None", |d| d.as_str()).to_owned(),
            Grouper::TopLevelCategory => listing.top_level_category().unwrap_or("(none)").to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub flagged: u64,
    pub denominator: u64,
    pub rate: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl RateCell {
    fn new(flagged: u64, denominator: u64, level: f64, method: IntervalMethod) -> Self {
        match proportion_ci_with(flagged, denominator, level, method) {
            Ok(est) => RateCell {
                flagged,
                denominator,
                rate: Some(est.p_hat),
                ci_low: Some(est.ci_low),
                ci_high: Some(est.ci_high),
            },
            Err(_) => RateCell {
                flagged,
                denominator,
                rate: None,
                ci_low: None,
                ci_high: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub detector: DetectorKind,
    pub category: BiasCategory,
    pub label: String,
    pub overall: RateCell,
    /// grouping name -> group key -> cell
    pub groups: BTreeMap<String, BTreeMap<String, RateCell>>,
    pub needs_review: u64,
    pub unscored: u64,
    /// Mean of each integer metric over in-scope records.
    pub metric_means: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub detector: DetectorKind,
    pub category: BiasCategory,
    pub group_a: String,
    pub group_b: String,
    pub test: Option<TwoProportionTest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordError {
    pub record_id: String,
    pub detector: DetectorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub corpus_size: u64,
    pub provenance: String,
    pub confidence_level: f64,
    pub interval_method: IntervalMethod,
    /// grouping name -> group key -> record count; each grouping sums to the
    /// corpus size.
    pub group_sizes: BTreeMap<String, BTreeMap<String, u64>>,
    pub categories: Vec<CategorySummary>,
    pub comparisons: Vec<Comparison>,
    pub findings: Vec<AuditFinding>,
    pub unscored: Vec<String>,
    pub errors: Vec<RecordError>,
}

impl AuditReport {
    pub fn summary(&self, kind: DetectorKind) -> Option<&CategorySummary> {
        self.categories.iter().find(|c| c.detector == kind)
    }
}

#[derive(Default)]
struct Tally {
    flagged: u64,
    denominator: u64,
    needs_review: u64,
    unscored: u64,
    groups: BTreeMap<(Grouper, String), (u64, u64)>,
    departments: BTreeMap<String, (u64, u64)>,
    metric_sums: BTreeMap<String, f64>,
}

const INTEGER_METRICS: [&str; 4] = [
    "match_count",
    "gender_mention_count",
    "feminine_mentions",
    "masculine_mentions",
];

/// What to run in [`audit_corpus`].
#[derive(Clone)]
pub struct AuditOptions<'a> {
    pub detectors: BTreeSet<DetectorKind>,
    pub groupers: Vec<Grouper>,
    pub scorer: Option<&'a dyn ToxicityScorer>,
    pub level: f64,
    pub method: IntervalMethod,
}

impl<'a> AuditOptions<'a> {
    /// The suite's enabled detectors, both groupings, 95% intervals.
    pub fn from_suite(suite: &DetectorSuite) -> Self {
        AuditOptions {
            detectors: suite.config.enabled.clone(),
            groupers: vec![Grouper::Department, Grouper::TopLevelCategory],
            scorer: None,
            level: 0.95,
            method: IntervalMethod::Wald,
        }
    }

    pub fn with_scorer(mut self, scorer: &'a dyn ToxicityScorer) -> Self {
        self.scorer = Some(scorer);
        self
    }
}

/// Runs every selected detector over every record and aggregates rates with
/// Wald intervals. Records are processed in id order, so the report does not
/// depend on input order.
pub fn audit_corpus(
    corpus: &Corpus,
    suite: &DetectorSuite,
    options: &AuditOptions<'_>,
) -> Result<AuditReport, DetectorError> {
    let level = options.level;
    let method = options.method;
    critical_value(level)?;
    let enabled: Vec<DetectorKind> = options.detectors.iter().copied().collect();
    let wants_toxicity = enabled.contains(&DetectorKind::Toxicity);
    let scorer = options.scorer;
    if wants_toxicity && scorer.is_none() {
        return Err(DetectorError::MissingScorer);
    }
    let mut records: Vec<&DescribedRecord> = corpus.records.iter().collect();
    records.sort_by(|a, b| a.id().cmp(b.id()));

    let mut toxicity: Vec<Option<Result<Detection, DetectorError>>> = vec![];
    if let (true, Some(scorer)) = (wants_toxicity, scorer) {
        toxicity = std::iter::repeat_with(|| None).take(records.len()).collect();
        fan_out(
            &records,
            suite.config.toxicity_in_flight,
            |_, r| suite.detect_toxicity(r, scorer),
            |i, res| toxicity[i] = Some(res),
        );
    }

    let mut groupers: Vec<Grouper> = options.groupers.clone();
    groupers.sort();
    groupers.dedup();
    let mut group_sizes: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for g in &groupers {
        let sizes = group_sizes.entry(g.name().to_owned()).or_default();
        for r in &records {
            *sizes.entry(g.key(&r.listing)).or_default() += 1;
        }
    }

    let mut tallies: BTreeMap<DetectorKind, Tally> = enabled.iter().map(|k| (*k, Tally::default())).collect();
    let mut findings = Vec::new();
    let mut unscored = Vec::new();
    let mut errors = Vec::new();

    for (i, record) in records.iter().enumerate() {
        for &kind in &enabled {
            let tally = tallies.get_mut(&kind).expect("tally per enabled detector");
            let detection = match kind {
                DetectorKind::Toxicity => match toxicity[i].take().expect("scored") {
                    Ok(d) => d,
                    Err(e) => {
                        tally.unscored += 1;
                        unscored.push(record.id().to_owned());
                        errors.push(RecordError {
                            record_id: record.id().to_owned(),
                            detector: kind,
                            message: e.to_string(),
                        });
                        continue;
                    }
                },
                _ => suite.detect(kind, record).expect("lexicon detector"),
            };
            if !detection.in_scope() {
                continue;
            }
            tally.denominator += 1;
            let flagged = detection.is_flagged();
            if flagged {
                tally.flagged += 1;
            }
            if detection.status == DetectionStatus::NeedsReview {
                tally.needs_review += 1;
            }
            for g in &groupers {
                let cell = tally.groups.entry((*g, g.key(&record.listing))).or_default();
                cell.1 += 1;
                cell.0 += u64::from(flagged);
            }
            let cell = tally
                .departments
                .entry(Grouper::Department.key(&record.listing))
                .or_default();
            cell.1 += 1;
            cell.0 += u64::from(flagged);
            for (name, value) in &detection.metrics {
                if INTEGER_METRICS.contains(&name.as_str()) {
                    *tally.metric_sums.entry(name.clone()).or_default() += value;
                }
            }
            if let Some(f) = detection.finding(record.id()) {
                findings.push(f);
            }
        }
    }

    let mut categories = Vec::new();
    let mut comparisons = Vec::new();
    for (kind, tally) in tallies {
        let mut groups: BTreeMap<String, BTreeMap<String, RateCell>> = BTreeMap::new();
        for g in &groupers {
            groups.entry(g.name().to_owned()).or_default();
        }
        for ((g, key), (flagged, denom)) in &tally.groups {
            groups
                .entry(g.name().to_owned())
                .or_default()
                .insert(key.clone(), RateCell::new(*flagged, *denom, level, method));
        }
        let metric_means = if tally.denominator == 0 {
            BTreeMap::new()
        } else {
            tally
                .metric_sums
                .iter()
                .map(|(k, v)| (k.clone(), v / tally.denominator as f64))
                .collect()
        };
        comparisons.push(men_vs_women(kind, &tally));
        categories.push(CategorySummary {
            detector: kind,
            category: kind.category(),
            label: kind.category().label().to_owned(),
            overall: RateCell::new(tally.flagged, tally.denominator, level, method),
            groups,
            needs_review: tally.needs_review,
            unscored: tally.unscored,
            metric_means,
        });
    }

    findings.sort_by(|a, b| a.record_id.cmp(&b.record_id).then(a.category.cmp(&b.category)));
    errors.sort();
    Ok(AuditReport {
        corpus_size: records.len() as u64,
        provenance: corpus.provenance.clone(),
        confidence_level: level,
        interval_method: method,
        group_sizes,
        categories,
        comparisons,
        findings,
        unscored,
        errors,
    })
}

fn men_vs_women(kind: DetectorKind, tally: &Tally) -> Comparison {
    let (men, women) = ("Men".to_owned(), "Women".to_owned());
    let a = tally.departments.get(&men).copied().unwrap_or_default();
    let b = tally.departments.get(&women).copied().unwrap_or_default();
    let (test, error) = match two_proportion_z(a.0, a.1, b.0, b.1) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Comparison {
        detector: kind,
        category: kind.category(),
        group_a: men,
        group_b: women,
        test,
        error,
    }
}

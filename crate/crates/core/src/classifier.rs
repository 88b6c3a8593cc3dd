//! Multinomial naive Bayes over unigrams and adjacent bigrams of masked,
//! normalized tokens.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training data contains a single class ({0:?}); at least two are required")]
    SingleClassDataset(Vec<String>),
    #[error("no feature reaches min_count {0}")]
    EmptyVocabulary(u32),
    #[error("smoothing alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    InvalidTestFraction(f64),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("held-out document `{id}` has label `{label}` unknown to the model")]
    UnknownLabel { id: String, label: String },
    #[error("held-out set is empty")]
    EmptyHeldOut,
    #[error("model artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub id: String,
    pub label: String,
    /// Normalized, masked tokens.
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub documents: Vec<LabeledDocument>,
}

impl Dataset {
    pub fn new(documents: Vec<LabeledDocument>) -> Self {
        Dataset { documents }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn label_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for d in &self.documents {
            *counts.entry(d.label.clone()).or_default() += 1;
        }
        counts
    }

    pub fn is_balanced(&self) -> bool {
        let counts = self.label_counts();
        let mut values = counts.values();
        match values.next() {
            Some(first) => values.all(|v| v == first),
            None => true,
        }
    }

    pub fn read_json_lines(path: &Path) -> Result<Dataset, ClassifierError> {
        let text = std::fs::read_to_string(path)?;
        let mut documents = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let doc = serde_json::from_str(line)
                .map_err(|e| ClassifierError::Artifact(format!("{}:{}: {e}", path.display(), i + 1)))?;
            documents.push(doc);
        }
        Ok(Dataset { documents })
    }

    pub fn write_json_lines<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for d in &self.documents {
            serde_json::to_writer(&mut out, d)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Unigrams in order, then adjacent bigrams joined with `_`.
pub fn ngrams(tokens: &[String]) -> Vec<String> {
    let mut out: Vec<String> = tokens.to_vec();
    out.extend(tokens.windows(2).map(|w| format!("{}_{}", w[0], w[1])));
    out
}

/// Sorted feature index over unigrams and bigrams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVocabulary {
    features: Vec<String>,
    index: HashMap<String, usize>,
    min_count: u32,
}

impl FeatureVocabulary {
    /// Keeps n-grams whose total count across `documents` is at least
    /// `min_count`.
    pub fn build<'a>(documents: impl IntoIterator<Item = &'a [String]>, min_count: u32) -> Self {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for doc in documents {
            for g in ngrams(doc) {
                *counts.entry(g).or_default() += 1;
            }
        }
        let features: BTreeSet<String> = counts
            .into_iter()
            .filter(|(_, c)| *c >= u64::from(min_count))
            .map(|(g, _)| g)
            .collect();
        Self::from_features(features.into_iter().collect(), min_count)
    }

    pub fn from_features(mut features: Vec<String>, min_count: u32) -> Self {
        features.sort();
        features.dedup();
        let index = features.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
        FeatureVocabulary {
            features,
            index,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn index_of(&self, feature: &str) -> Option<usize> {
        self.index.get(feature).copied()
    }

    pub fn feature(&self, index: usize) -> &str {
        &self.features[index]
    }
}

/// Sorted `(feature index, count)` pairs.
pub type SparseVector = Vec<(usize, u32)>;

pub fn featurize(tokens: &[String], vocab: &FeatureVocabulary) -> SparseVector {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for g in ngrams(tokens) {
        if let Some(i) = vocab.index_of(&g) {
            *counts.entry(i).or_default() += 1;
        }
    }
    counts.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub alpha: f64,
    pub min_count: u32,
    pub test_fraction: f64,
    pub seed: u64,
    pub top_k: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            alpha: 1.0,
            min_count: 2,
            test_fraction: 0.2,
            seed: 0,
            top_k: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenderClassifierModel {
    /// Sorted; ties in prediction go to the earliest label.
    pub labels: Vec<String>,
    pub log_priors: Vec<f64>,
    /// `[class][feature]`
    pub log_likelihoods: Vec<Vec<f64>>,
    pub alpha: f64,
    pub vocabulary: FeatureVocabulary,
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelArtifact {
    labels: Vec<String>,
    log_priors: Vec<f64>,
    log_likelihoods: Vec<Vec<f64>>,
    alpha: f64,
    min_count: u32,
    features: Vec<String>,
    seed: Option<u64>,
}

pub fn train(
    documents: &[LabeledDocument],
    alpha: f64,
    min_count: u32,
) -> Result<GenderClassifierModel, ClassifierError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ClassifierError::InvalidAlpha(alpha));
    }
    let labels: Vec<String> = documents
        .iter()
        .map(|d| d.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if labels.len() < 2 {
        return Err(ClassifierError::SingleClassDataset(labels));
    }
    let vocabulary = FeatureVocabulary::build(documents.iter().map(|d| d.tokens.as_slice()), min_count);
    if vocabulary.is_empty() {
        return Err(ClassifierError::EmptyVocabulary(min_count));
    }
    let class_of: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let v = vocabulary.len();
    let mut doc_counts = vec![0u64; labels.len()];
    let mut feature_counts = vec![vec![0u64; v]; labels.len()];
    for d in documents {
        let c = class_of[d.label.as_str()];
        doc_counts[c] += 1;
        for (i, n) in featurize(&d.tokens, &vocabulary) {
            feature_counts[c][i] += u64::from(n);
        }
    }
    let total_docs = documents.len() as f64;
    let log_priors = doc_counts.iter().map(|&n| (n as f64 / total_docs).ln()).collect();
    let log_likelihoods = feature_counts
        .iter()
        .map(|counts| {
            let class_total: u64 = counts.iter().sum();
            let denom = (class_total as f64 + alpha * v as f64).ln();
            counts.iter().map(|&n| (n as f64 + alpha).ln() - denom).collect()
        })
        .collect();
    Ok(GenderClassifierModel {
        labels,
        log_priors,
        log_likelihoods,
        alpha,
        vocabulary,
        seed: None,
    })
}

impl GenderClassifierModel {
    /// Unnormalized log posteriors, one per label.
    pub fn scores(&self, tokens: &[String]) -> Vec<f64> {
        let x = featurize(tokens, &self.vocabulary);
        self.log_priors
            .iter()
            .zip(&self.log_likelihoods)
            .map(|(prior, ll)| prior + x.iter().map(|&(i, n)| f64::from(n) * ll[i]).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, tokens: &[String]) -> &str {
        let scores = self.scores(tokens);
        let mut best = 0;
        for (c, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = c;
            }
        }
        &self.labels[best]
    }

    /// `log P(f|c) - log P(f|rest)`, where `rest` averages the other classes.
    pub fn log_odds(&self, class: usize, feature: usize) -> f64 {
        let own = self.log_likelihoods[class][feature];
        let others: Vec<f64> = (0..self.labels.len())
            .filter(|&c| c != class)
            .map(|c| self.log_likelihoods[c][feature].exp())
            .collect();
        own - (others.iter().sum::<f64>() / others.len() as f64).ln()
    }

    pub fn to_json(&self) -> String {
        let artifact = ModelArtifact {
            labels: self.labels.clone(),
            log_priors: self.log_priors.clone(),
            log_likelihoods: self.log_likelihoods.clone(),
            alpha: self.alpha,
            min_count: self.vocabulary.min_count(),
            features: self.vocabulary.features().to_vec(),
            seed: self.seed,
        };
        serde_json::to_string(&artifact).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let a: ModelArtifact = serde_json::from_str(text).map_err(|e| ClassifierError::Artifact(e.to_string()))?;
        let vocabulary = FeatureVocabulary::from_features(a.features, a.min_count);
        let shape_ok = a.labels.len() == a.log_priors.len()
            && a.labels.len() == a.log_likelihoods.len()
            && a.log_likelihoods.iter().all(|row| row.len() == vocabulary.len())
            && a.labels.windows(2).all(|w| w[0] < w[1]);
        if !shape_ok {
            return Err(ClassifierError::Artifact("inconsistent table shapes".into()));
        }
        if !(a.alpha > 0.0 && a.alpha.is_finite()) {
            return Err(ClassifierError::InvalidAlpha(a.alpha));
        }
        Ok(GenderClassifierModel {
            labels: a.labels,
            log_priors: a.log_priors,
            log_likelihoods: a.log_likelihoods,
            alpha: a.alpha,
            vocabulary,
            seed: a.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub log_odds: f64,
}

/// Per-label features ranked by descending log-odds, ties by feature index.
pub fn top_features(
    model: &GenderClassifierModel,
    k: usize,
) -> Result<BTreeMap<String, Vec<RankedFeature>>, ClassifierError> {
    if k == 0 {
        return Err(ClassifierError::InvalidK);
    }
    let mut out = BTreeMap::new();
    for (c, label) in model.labels.iter().enumerate() {
        let mut ranked: Vec<(usize, f64)> = (0..model.vocabulary.len()).map(|f| (f, model.log_odds(c, f))).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        out.insert(
            label.clone(),
            ranked
                .into_iter()
                .map(|(f, log_odds)| RankedFeature {
                    feature: model.vocabulary.feature(f).to_owned(),
                    log_odds,
                })
                .collect(),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub correct: u64,
    pub total: u64,
    /// actual label -> predicted label -> count
    pub confusion: BTreeMap<String, BTreeMap<String, u64>>,
    pub seed: Option<u64>,
    pub train_size: u64,
    pub vocabulary_size: u64,
    pub top_features: BTreeMap<String, Vec<RankedFeature>>,
}

pub fn evaluate(
    model: &GenderClassifierModel,
    held_out: &[LabeledDocument],
    top_k: usize,
) -> Result<EvalReport, ClassifierError> {
    if held_out.is_empty() {
        return Err(ClassifierError::EmptyHeldOut);
    }
    let mut confusion: BTreeMap<String, BTreeMap<String, u64>> = model
        .labels
        .iter()
        .map(|a| (a.clone(), model.labels.iter().map(|p| (p.clone(), 0)).collect()))
        .collect();
    let mut correct = 0;
    for d in held_out {
        let row = confusion
            .get_mut(&d.label)
            .ok_or_else(|| ClassifierError::UnknownLabel {
                id: d.id.clone(),
                label: d.label.clone(),
            })?;
        let predicted = model.predict(&d.tokens);
        *row.get_mut(predicted).expect("model label") += 1;
        if predicted == d.label {
            correct += 1;
        }
    }
    let total = held_out.len() as u64;
    Ok(EvalReport {
        accuracy: correct as f64 / total as f64,
        correct,
        total,
        confusion,
        seed: model.seed,
        train_size: 0,
        vocabulary_size: model.vocabulary.len() as u64,
        top_features: top_features(model, top_k.max(1))?,
    })
}

/// Per-label seeded shuffle; `round(n * test_fraction)` of each label is held
/// out. Returns `(train, test)`.
pub fn stratified_split(
    documents: &[LabeledDocument],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledDocument>, Vec<LabeledDocument>), ClassifierError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(ClassifierError::InvalidTestFraction(test_fraction));
    }
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, d) in documents.iter().enumerate() {
        by_label.entry(&d.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut idx) in by_label {
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        for (j, i) in idx.into_iter().enumerate() {
            if j < n_test {
                test.push(documents[i].clone());
            } else {
                train.push(documents[i].clone());
            }
        }
    }
    Ok((train, test))
}

/// Split, train and evaluate in one step.
pub fn run_experiment(
    dataset: &Dataset,
    config: &ClassifierConfig,
) -> Result<(GenderClassifierModel, EvalReport), ClassifierError> {
    let (train_docs, test_docs) = stratified_split(&dataset.documents, config.test_fraction, config.seed)?;
    let mut model = train(&train_docs, config.alpha, config.min_count)?;
    model.seed = Some(config.seed);
    let mut report = evaluate(&model, &test_docs, config.top_k)?;
    report.train_size = train_docs.len() as u64;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn doc(id: &str, label: &str, text: &str) -> LabeledDocument {
        LabeledDocument {
            id: id.into(),
            label: label.into(),
            tokens: toks(text),
        }
    }

    #[test]
    fn featurize_direct_definition() {
        let t = toks("great for <GEN>");
        let vocab = FeatureVocabulary::from_features(ngrams(&t), 1);
        let x: BTreeMap<&str, u32> = featurize(&t, &vocab)
            .into_iter()
            .map(|(i, n)| (vocab.feature(i), n))
            .collect();
        let expected: BTreeMap<&str, u32> = [
            ("great", 1),
            ("for", 1),
            ("<GEN>", 1),
            ("great_for", 1),
            ("for_<GEN>", 1),
        ]
        .into();
        assert_eq!(x, expected);
        assert!(featurize(&[], &vocab).is_empty());
    }

    #[test]
    fn hand_computed_naive_bayes() {
        let docs = [doc("1", "L1", "a"), doc("2", "L2", "b")];
        let m = train(&docs, 1.0, 1).unwrap();
        let a = m.vocabulary.index_of("a").unwrap();
        let b = m.vocabulary.index_of("b").unwrap();
        assert!((m.log_likelihoods[0][a].exp() - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.log_likelihoods[0][b].exp() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.predict(&toks("a")), "L1");
        assert_eq!(m.log_priors[0], m.log_priors[1]);
        let r = evaluate(&m, &docs, 5).unwrap();
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn likelihoods_are_distributions() {
        let docs = [doc("1", "x", "a b a c"), doc("2", "y", "c c d"), doc("3", "x", "a d")];
        let m = train(&docs, 0.5, 1).unwrap();
        for row in &m.log_likelihoods {
            let s: f64 = row.iter().map(|l| l.exp()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            train(&[doc("1", "x", "a a")], 1.0, 1),
            Err(ClassifierError::SingleClassDataset(_))
        ));
        assert!(matches!(
            train(&[doc("1", "x", "a"), doc("2", "y", "b")], 1.0, 2),
            Err(ClassifierError::EmptyVocabulary(2))
        ));
        assert!(matches!(
            train(&[doc("1", "x", "a")], 0.0, 1),
            Err(ClassifierError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn ties_go_to_first_label() {
        let docs = [doc("1", "b", "q"), doc("2", "a", "q")];
        let m = train(&docs, 1.0, 1).unwrap();
        assert_eq!(m.predict(&toks("q")), "a");
        assert_eq!(m.predict(&[]), "a");
    }

    #[test]
    fn top_features_k_exceeds_vocab() {
        let docs = [doc("1", "x", "a b"), doc("2", "y", "c d")];
        let m = train(&docs, 1.0, 1).unwrap();
        let top = top_features(&m, 100).unwrap();
        assert_eq!(top["x"].len(), m.vocabulary.len());
        assert!(top["x"].windows(2).all(|w| w[0].log_odds >= w[1].log_odds));
        assert!(top_features(&m, 0).is_err());
    }

    #[test]
    fn mirror_corpus_has_mirrored_top_features() {
        let docs = [doc("1", "x", "a b a"), doc("2", "y", "c d c")];
        let m = train(&docs, 1.0, 1).unwrap();
        let top = top_features(&m, 3).unwrap();
        let mags = |l: &str| top[l].iter().map(|f| (f.log_odds * 1e9).round()).collect::<Vec<_>>();
        assert_eq!(mags("x"), mags("y"));
    }

    #[test]
    fn artifact_round_trip() {
        let docs = [doc("1", "x", "a b a"), doc("2", "y", "c d c"), doc("3", "y", "c a")];
        let mut m = train(&docs, 1.0, 1).unwrap();
        m.seed = Some(7);
        let back = GenderClassifierModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let docs: Vec<_> = (0..100)
            .map(|i| doc(&i.to_string(), if i % 2 == 0 { "x" } else { "y" }, "t"))
            .collect();
        let (train_a, test_a) = stratified_split(&docs, 0.2, 3).unwrap();
        let (_, test_b) = stratified_split(&docs, 0.2, 3).unwrap();
        assert_eq!(test_a, test_b);
        assert_eq!((train_a.len(), test_a.len()), (80, 20));
        assert_eq!(test_a.iter().filter(|d| d.label == "x").count(), 10);
    }
}

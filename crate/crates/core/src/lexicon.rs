//! Tokenization, phrase vocabularies and phrase matching.
//!
//! All matching happens on normalized token streams, so "regular-sized",
//! "Regular sized" and "regular sized" are the same phrase.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Sentinel that replaces gendered vocabulary during masking.
pub const MASK_TOKEN: &str = "<GEN>";

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("unknown placeholder `{placeholder}` in template `{template}`")]
    UnknownPlaceholder { template: String, placeholder: String },
    #[error("template `{0}` normalizes to an empty phrase")]
    EmptyPhrase(String),
    #[error("gendered term `{0}` must normalize to exactly one token")]
    MultiTokenTerm(String),
    #[error("gendered vocabularies are not aligned: {feminine} feminine vs {masculine} masculine terms")]
    Misaligned { feminine: usize, masculine: usize },
    #[error("term `{0}` appears in both gendered vocabularies")]
    Overlap(String),
    #[error("reading vocabulary {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{2018}')
}

/// Lowercase, split on anything that is not alphanumeric, strip possessive
/// `'s`, and drop the remaining apostrophes as token breaks.
pub fn normalize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || is_apostrophe(c) {
                c
            } else {
                ' '
            }
        })
        .collect();
    let mut tokens = Vec::new();
    for raw in cleaned.split_whitespace() {
        let mut word = raw;
        let mut chars = word.char_indices().rev();
        if let (Some((_, 's')), Some((idx, c))) = (chars.next(), chars.next()) {
            if is_apostrophe(c) {
                word = &word[..idx];
            }
        }
        tokens.extend(word.split(is_apostrophe).filter(|t| !t.is_empty()).map(str::to_owned));
    }
    tokens
}

pub fn join_tokens(tokens: &[String]) -> String {
    tokens.join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhraseSource {
    BodySize,
    GenderedTerms,
    NonbinaryPairs,
    CallToAction,
    ExplicitExclusion,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatchSpan {
    pub start_token: usize,
    pub end_token: usize,
    pub phrase: Vec<String>,
}

impl MatchSpan {
    pub fn phrase_text(&self) -> String {
        self.phrase.join(" ")
    }

    pub fn len(&self) -> usize {
        self.end_token - self.start_token
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An immutable set of normalized phrases with a first-token index.
#[derive(Debug, Clone)]
pub struct PhraseSet {
    name: String,
    source: PhraseSource,
    phrases: Vec<Vec<String>>,
    by_first: HashMap<String, Vec<usize>>,
}

impl PhraseSet {
    /// Builds a set from already-literal phrases; each is normalized.
    pub fn from_phrases<I, S>(name: &str, source: PhraseSource, phrases: I) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for p in phrases {
            let tokens = normalize(p.as_ref());
            if tokens.is_empty() {
                return Err(LexiconError::EmptyPhrase(p.as_ref().to_owned()));
            }
            set.insert(tokens);
        }
        Ok(Self::from_token_phrases(name, source, set))
    }

    fn from_token_phrases(name: &str, source: PhraseSource, set: BTreeSet<Vec<String>>) -> Self {
        let phrases: Vec<Vec<String>> = set.into_iter().collect();
        let mut by_first: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, p) in phrases.iter().enumerate() {
            by_first.entry(p[0].clone()).or_default().push(i);
        }
        PhraseSet {
            name: name.to_owned(),
            source,
            phrases,
            by_first,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> PhraseSource {
        self.source
    }

    /// Phrases in sorted order.
    pub fn phrases(&self) -> &[Vec<String>] {
        &self.phrases
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn contains(&self, phrase: &[String]) -> bool {
        self.phrases.binary_search_by(|p| p.as_slice().cmp(phrase)).is_ok()
    }

    /// Every contiguous occurrence of every phrase, overlaps included, sorted
    /// by start position with longer phrases first.
    pub fn find(&self, tokens: &[String]) -> Vec<MatchSpan> {
        let mut spans = Vec::new();
        for (start, tok) in tokens.iter().enumerate() {
            let Some(candidates) = self.by_first.get(tok) else {
                continue;
            };
            for &idx in candidates {
                let phrase = &self.phrases[idx];
                let end = start + phrase.len();
                if end <= tokens.len() && tokens[start..end] == phrase[..] {
                    spans.push(MatchSpan {
                        start_token: start,
                        end_token: end,
                        phrase: phrase.clone(),
                    });
                }
            }
        }
        spans.sort_by(|a, b| {
            a.start_token
                .cmp(&b.start_token)
                .then(b.len().cmp(&a.len()))
                .then_with(|| a.phrase.cmp(&b.phrase))
        });
        spans
    }
}

pub fn find_phrases(tokens: &[String], set: &PhraseSet) -> Vec<MatchSpan> {
    set.find(tokens)
}

const GENDER_SING: &str = "GENDER_SING";
const GENDER_PLUR: &str = "GENDER_PLUR";
// (singular, plural) per linked substitution.
const GENDER_SUBSTITUTIONS: [(&str, &str); 2] = [("woman", "women"), ("man", "men")];

#[derive(Debug, PartialEq)]
enum Piece<'a> {
    Text(&'a str),
    Singular,
    Plural,
}

fn split_template(template: &str) -> Result<Vec<Piece<'_>>, LexiconError> {
    let unknown = |placeholder: &str| LexiconError::UnknownPlaceholder {
        template: template.to_owned(),
        placeholder: placeholder.to_owned(),
    };
    let mut pieces = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find(['{', '}']) {
        if rest[open..].starts_with('}') {
            return Err(unknown("}"));
        }
        pieces.push(Piece::Text(&rest[..open]));
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or_else(|| unknown(&rest[open..]))?;
        match &after[..close] {
            GENDER_SING => pieces.push(Piece::Singular),
            GENDER_PLUR => pieces.push(Piece::Plural),
            other => return Err(unknown(&format!("{{{other}}}"))),
        }
        rest = &after[close + 1..];
    }
    pieces.push(Piece::Text(rest));
    Ok(pieces)
}

/// Expands `{GENDER_SING}`/`{GENDER_PLUR}` templates. Placeholders within one
/// template are substituted with the same gender, so a template yields at most
/// two phrases.
pub fn expand_templates<I, S>(name: &str, source: PhraseSource, templates: I) -> Result<PhraseSet, LexiconError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut set = BTreeSet::new();
    for template in templates {
        let template = template.as_ref();
        let pieces = split_template(template)?;
        let has_placeholder = pieces.iter().any(|p| !matches!(p, Piece::Text(_)));
        let substitutions: &[(&str, &str)] = if has_placeholder {
            &GENDER_SUBSTITUTIONS
        } else {
            &[("", "")]
        };
        for (sing, plur) in substitutions {
            let text: String = pieces
                .iter()
                .map(|p| match p {
                    Piece::Text(t) => *t,
                    Piece::Singular => sing,
                    Piece::Plural => plur,
                })
                .collect();
            let tokens = normalize(&text);
            if tokens.is_empty() {
                return Err(LexiconError::EmptyPhrase(template.to_owned()));
            }
            set.insert(tokens);
        }
    }
    Ok(PhraseSet::from_token_phrases(name, source, set))
}

/// Non-comment, non-blank lines of a vocabulary file.
pub fn vocab_lines(text: &str) -> Vec<&str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderGroup {
    Feminine,
    Masculine,
}

impl GenderGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            GenderGroup::Feminine => "feminine",
            GenderGroup::Masculine => "masculine",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            GenderGroup::Feminine => GenderGroup::Masculine,
            GenderGroup::Masculine => GenderGroup::Feminine,
        }
    }
}

impl fmt::Display for GenderGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderCounts {
    pub total: usize,
    pub feminine: usize,
    pub masculine: usize,
}

/// Two position-aligned single-token vocabularies: the i-th feminine term is
/// the counterpart of the i-th masculine term.
#[derive(Debug, Clone)]
pub struct GenderedVocabulary {
    feminine: Vec<String>,
    masculine: Vec<String>,
    lookup: HashMap<String, (GenderGroup, usize)>,
}

impl GenderedVocabulary {
    pub fn new<S: AsRef<str>>(feminine: &[S], masculine: &[S]) -> Result<Self, LexiconError> {
        if feminine.len() != masculine.len() {
            return Err(LexiconError::Misaligned {
                feminine: feminine.len(),
                masculine: masculine.len(),
            });
        }
        let single = |t: &S| -> Result<String, LexiconError> {
            let mut toks = normalize(t.as_ref());
            if toks.len() != 1 {
                return Err(LexiconError::MultiTokenTerm(t.as_ref().to_owned()));
            }
            Ok(toks.remove(0))
        };
        let feminine: Vec<String> = feminine.iter().map(single).collect::<Result<_, _>>()?;
        let masculine: Vec<String> = masculine.iter().map(single).collect::<Result<_, _>>()?;
        let mut lookup = HashMap::new();
        for (group, terms) in [(GenderGroup::Feminine, &feminine), (GenderGroup::Masculine, &masculine)] {
            for (i, t) in terms.iter().enumerate() {
                if lookup.insert(t.clone(), (group, i)).is_some() {
                    return Err(LexiconError::Overlap(t.clone()));
                }
            }
        }
        Ok(GenderedVocabulary {
            feminine,
            masculine,
            lookup,
        })
    }

    pub fn builtin() -> &'static GenderedVocabulary {
        static VOCAB: OnceLock<GenderedVocabulary> = OnceLock::new();
        VOCAB.get_or_init(|| {
            GenderedVocabulary::new(
                &vocab_lines(builtin::GENDERED_FEMININE),
                &vocab_lines(builtin::GENDERED_MASCULINE),
            )
            .expect("builtin gendered vocabulary is valid")
        })
    }

    pub fn terms(&self, group: GenderGroup) -> &[String] {
        match group {
            GenderGroup::Feminine => &self.feminine,
            GenderGroup::Masculine => &self.masculine,
        }
    }

    pub fn all_terms(&self) -> impl Iterator<Item = &String> {
        self.feminine.iter().chain(self.masculine.iter())
    }

    pub fn gender_of(&self, token: &str) -> Option<GenderGroup> {
        self.lookup.get(token).map(|&(g, _)| g)
    }

    /// The aligned opposite-gender term.
    pub fn counterpart(&self, token: &str) -> Option<&str> {
        self.lookup.get(token).map(|&(g, i)| match g {
            GenderGroup::Feminine => self.masculine[i].as_str(),
            GenderGroup::Masculine => self.feminine[i].as_str(),
        })
    }

    pub fn is_gendered(&self, token: &str) -> bool {
        self.lookup.contains_key(token)
    }

    pub fn count(&self, tokens: &[String]) -> GenderCounts {
        let mut counts = GenderCounts::default();
        for tok in tokens {
            match self.gender_of(tok) {
                Some(GenderGroup::Feminine) => counts.feminine += 1,
                Some(GenderGroup::Masculine) => counts.masculine += 1,
                None => continue,
            }
            counts.total += 1;
        }
        counts
    }

    pub fn mask(&self, tokens: &[String]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| {
                if self.is_gendered(t) {
                    MASK_TOKEN.to_owned()
                } else {
                    t.clone()
                }
            })
            .collect()
    }
}

pub fn count_gendered_terms(tokens: &[String]) -> GenderCounts {
    GenderedVocabulary::builtin().count(tokens)
}

pub fn mask_gendered_terms(tokens: &[String]) -> Vec<String> {
    GenderedVocabulary::builtin().mask(tokens)
}

pub mod builtin {
    pub const BODY_SIZE: &str = include_str!("../vocab/body_size.txt");
    pub const GENDERED_FEMININE: &str = include_str!("../vocab/gendered_feminine.txt");
    pub const GENDERED_MASCULINE: &str = include_str!("../vocab/gendered_masculine.txt");
    pub const NONBINARY_PAIRS: &str = include_str!("../vocab/nonbinary_pairs.txt");
    pub const CALL_TO_ACTION: &str = include_str!("../vocab/call_to_action.txt");
}

/// Optional file overrides for the shipped vocabularies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabPaths {
    pub body_size: Option<PathBuf>,
    pub gendered_feminine: Option<PathBuf>,
    pub gendered_masculine: Option<PathBuf>,
    pub nonbinary_pairs: Option<PathBuf>,
    pub call_to_action: Option<PathBuf>,
}

/// The full set of vocabularies a detector run uses, with content digests.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub body_size: PhraseSet,
    pub gendered: GenderedVocabulary,
    pub nonbinary: PhraseSet,
    pub call_to_action: PhraseSet,
    digests: Vec<(String, String)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Lexicon {
    pub fn builtin() -> Lexicon {
        Self::from_texts(
            builtin::BODY_SIZE,
            builtin::GENDERED_FEMININE,
            builtin::GENDERED_MASCULINE,
            builtin::NONBINARY_PAIRS,
            builtin::CALL_TO_ACTION,
        )
        .expect("builtin vocabularies are valid")
    }

    pub fn load(paths: &VocabPaths) -> Result<Lexicon, LexiconError> {
        fn read(path: &Option<PathBuf>, default: &'static str) -> Result<String, LexiconError> {
            match path {
                None => Ok(default.to_owned()),
                Some(p) => std::fs::read_to_string(p).map_err(|source| LexiconError::Io {
                    path: p.clone(),
                    source,
                }),
            }
        }
        Self::from_texts(
            &read(&paths.body_size, builtin::BODY_SIZE)?,
            &read(&paths.gendered_feminine, builtin::GENDERED_FEMININE)?,
            &read(&paths.gendered_masculine, builtin::GENDERED_MASCULINE)?,
            &read(&paths.nonbinary_pairs, builtin::NONBINARY_PAIRS)?,
            &read(&paths.call_to_action, builtin::CALL_TO_ACTION)?,
        )
    }

    pub fn from_texts(
        body_size: &str,
        feminine: &str,
        masculine: &str,
        nonbinary: &str,
        call_to_action: &str,
    ) -> Result<Lexicon, LexiconError> {
        let digests = vec![
            ("body_size".to_owned(), sha256_hex(body_size.as_bytes())),
            ("call_to_action".to_owned(), sha256_hex(call_to_action.as_bytes())),
            ("gendered_feminine".to_owned(), sha256_hex(feminine.as_bytes())),
            ("gendered_masculine".to_owned(), sha256_hex(masculine.as_bytes())),
            ("nonbinary_pairs".to_owned(), sha256_hex(nonbinary.as_bytes())),
        ];
        Ok(Lexicon {
            body_size: expand_templates("body_size", PhraseSource::BodySize, vocab_lines(body_size))?,
            gendered: GenderedVocabulary::new(&vocab_lines(feminine), &vocab_lines(masculine))?,
            nonbinary: expand_templates("nonbinary_pairs", PhraseSource::NonbinaryPairs, vocab_lines(nonbinary))?,
            call_to_action: expand_templates(
                "call_to_action",
                PhraseSource::CallToAction,
                vocab_lines(call_to_action),
            )?,
            digests,
        })
    }

    /// (vocabulary name, sha256 of file contents), sorted by name.
    pub fn digests(&self) -> &[(String, String)] {
        &self.digests
    }
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn normalize_hyphenated_phrase() {
        assert_eq!(
            normalize("ideal for regular-sized women"),
            toks(&["ideal", "for", "regular", "sized", "women"])
        );
    }

    #[test]
    fn normalize_empty() {
        assert!(normalize("").is_empty());
        assert!(normalize("  ...  ").is_empty());
    }

    #[test]
    fn normalize_strips_possessives() {
        assert_eq!(
            normalize("your little boy's activewear"),
            toks(&["your", "little", "boy", "activewear"])
        );
        assert_eq!(normalize("Men\u{2019}s Shoes"), toks(&["men", "shoes"]));
        assert_eq!(normalize("the boys' room"), toks(&["the", "boys", "room"]));
    }

    #[test]
    fn normalize_splits_contractions() {
        assert_eq!(normalize("Don't miss out!"), toks(&["don", "t", "miss", "out"]));
    }

    #[test]
    fn expand_linked_gender() {
        let set = expand_templates("t", PhraseSource::Custom, ["fits most {GENDER_PLUR}"]).unwrap();
        assert_eq!(
            set.phrases(),
            &[toks(&["fits", "most", "men"]), toks(&["fits", "most", "women"])]
        );
    }

    #[test]
    fn expand_passthrough() {
        let set = expand_templates("t", PhraseSource::Custom, ["all shapes", "All  Shapes"]).unwrap();
        assert_eq!(set.phrases(), &[toks(&["all", "shapes"])]);
    }

    #[test]
    fn expand_uniform_substitution() {
        let set = expand_templates("t", PhraseSource::Custom, ["{GENDER_SING} and {GENDER_PLUR}"]).unwrap();
        // oracle: every linked assignment of (sing, plur) in the substitution table
        let mut want: Vec<Vec<String>> = GENDER_SUBSTITUTIONS.iter().map(|(s, p)| toks(&[s, "and", p])).collect();
        want.sort();
        assert_eq!(set.phrases(), want.as_slice());
    }

    #[test]
    fn expand_unknown_placeholder() {
        let err = expand_templates("t", PhraseSource::Custom, ["fits {GENDER}"]).unwrap_err();
        assert!(matches!(err, LexiconError::UnknownPlaceholder { placeholder, .. } if placeholder == "{GENDER}"));
        assert!(expand_templates("t", PhraseSource::Custom, ["fits {GENDER_SING"]).is_err());
        assert!(expand_templates("t", PhraseSource::Custom, ["fits }"]).is_err());
    }

    #[test]
    fn expand_rejects_empty() {
        assert!(matches!(
            expand_templates("t", PhraseSource::Custom, ["--"]),
            Err(LexiconError::EmptyPhrase(_))
        ));
    }

    #[test]
    fn body_size_literal_contiguity() {
        let lex = Lexicon::builtin();
        let spans = lex
            .body_size
            .find(&normalize("a comfortable fit for all shapes and sizes"));
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].phrase_text(), "all shapes");
    }

    #[test]
    fn body_size_two_matches() {
        let lex = Lexicon::builtin();
        let tokens = normalize("fit for all shapes, all sizes");
        let spans = lex.body_size.find(&tokens);
        let got: Vec<_> = spans.iter().map(|s| (s.start_token, s.phrase_text())).collect();
        assert_eq!(got, vec![(2, "all shapes".to_string()), (4, "all sizes".to_string())]);
    }

    #[test]
    fn find_on_empty_stream() {
        assert!(Lexicon::builtin().body_size.find(&[]).is_empty());
    }

    #[test]
    fn overlapping_matches_longest_first() {
        let set = PhraseSet::from_phrases("t", PhraseSource::Custom, ["a b", "a b c", "b c"]).unwrap();
        let spans = set.find(&toks(&["a", "b", "c"]));
        let got: Vec<_> = spans.iter().map(|s| s.phrase_text()).collect();
        assert_eq!(got, vec!["a b c", "a b", "b c"]);
    }

    #[test]
    fn regular_size_alone_never_matches() {
        let lex = Lexicon::builtin();
        assert!(lex
            .body_size
            .find(&normalize("the shirt is a regular size L"))
            .is_empty());
        assert!(!lex.body_size.contains(&toks(&["regular", "size"])));
    }

    #[test]
    fn shipped_vocabulary_sizes() {
        let lex = Lexicon::builtin();
        assert_eq!(lex.body_size.len(), 43);
        assert_eq!(lex.nonbinary.len(), 28);
        assert_eq!(lex.call_to_action.len(), 13);
        assert_eq!(lex.gendered.all_terms().count(), 32);
    }

    #[test]
    fn gendered_counts() {
        assert_eq!(count_gendered_terms(&normalize("durable cotton tote")).total, 0);
        let c = count_gendered_terms(&normalize("mom and dad and moms"));
        assert_eq!(
            c,
            GenderCounts {
                total: 3,
                feminine: 2,
                masculine: 1
            }
        );
    }

    #[test]
    fn track_pants_quote() {
        let text = "Upgrade your little boy's activewear collection with these black Under Armour track pants... \
            Designed for comfort and maximum performance, they are ideal for any active young boy who loves to run, \
            play, and explore. These pants come in size 5 and are suitable for boys... Get these pants today and let \
            your little boy enjoy his active lifestyle in style!";
        let c = count_gendered_terms(&normalize(text));
        assert_eq!(
            c,
            GenderCounts {
                total: 4,
                feminine: 0,
                masculine: 4
            }
        );
    }

    #[test]
    fn masking() {
        let masked = mask_gendered_terms(&normalize("perfect for moms on-the-go"));
        assert_eq!(masked, toks(&["perfect", "for", MASK_TOKEN, "on", "the", "go"]));
        assert_eq!(mask_gendered_terms(&masked), masked);
    }

    #[test]
    fn counterparts_are_aligned() {
        let v = GenderedVocabulary::builtin();
        assert_eq!(v.counterpart("women"), Some("men"));
        assert_eq!(v.counterpart("boy"), Some("girl"));
        assert_eq!(v.counterpart("ladies"), Some("guys"));
        assert_eq!(v.counterpart("tote"), None);
        for t in v.all_terms() {
            assert_eq!(v.counterpart(v.counterpart(t).unwrap()), Some(t.as_str()));
        }
    }

    #[test]
    fn misaligned_vocab_rejected() {
        assert!(matches!(
            GenderedVocabulary::new(&["woman"], &["man", "men"]),
            Err(LexiconError::Misaligned { .. })
        ));
        assert!(matches!(
            GenderedVocabulary::new(&["woman"], &["woman"]),
            Err(LexiconError::Overlap(_))
        ));
        assert!(matches!(
            GenderedVocabulary::new(&["young woman"], &["man"]),
            Err(LexiconError::MultiTokenTerm(_))
        ));
    }

    #[test]
    fn digests_are_sorted_and_stable() {
        let a = Lexicon::builtin();
        let b = Lexicon::builtin();
        assert_eq!(a.digests(), b.digests());
        let names: Vec<_> = a.digests().iter().map(|(n, _)| n.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }
}

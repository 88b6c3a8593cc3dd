//! Seeded synthetic corpora with known ground truth, used by tests and by
//! anyone validating an installation without access to real generations.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classifier::{Dataset, LabeledDocument};
use crate::corpus::{Aspect, Corpus, DescribedRecord, ProductListing};
use crate::flagging::{LlmClient, LlmError};
use crate::lexicon::MASK_TOKEN;

const ADJECTIVES: [&str; 15] = [
    "soft",
    "durable",
    "lightweight",
    "breathable",
    "classic",
    "modern",
    "vintage",
    "sturdy",
    "elegant",
    "bright",
    "cozy",
    "compact",
    "sleek",
    "rustic",
    "polished",
];
const MATERIALS: [&str; 12] = [
    "cotton", "linen", "leather", "wool", "denim", "canvas", "steel", "oak", "ceramic", "silk", "bamboo", "nylon",
];
const NOUNS: [&str; 12] = [
    "jacket", "mug", "lamp", "bag", "scarf", "chair", "notebook", "bottle", "blanket", "watch", "tote", "vase",
];
const PREDICATES: [&str; 8] = [
    "offers lasting comfort",
    "holds up to daily use",
    "pairs well with neutral tones",
    "brings warmth to the room",
    "keeps its shape after washing",
    "arrives ready to use",
    "resists scuffs and stains",
    "feels smooth to the touch",
];
const CLOSINGS: [&str; 6] = [
    "in every season",
    "at home or outdoors",
    "with minimal care",
    "through busy weeks",
    "on weekend trips",
    "year after year",
];

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

/// One sentence built only from words outside every shipped vocabulary.
pub fn clean_sentence<R: Rng>(rng: &mut R) -> String {
    let mut s = format!(
        "The {} {} {} {} {}.",
        pick(rng, &ADJECTIVES),
        pick(rng, &MATERIALS),
        pick(rng, &NOUNS),
        pick(rng, &PREDICATES),
        pick(rng, &CLOSINGS)
    );
    if let Some(c) = s.get_mut(0..1) {
        c.make_ascii_uppercase();
    }
    s
}

pub fn clean_sentences(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| clean_sentence(&mut rng)).collect()
}

fn clean_paragraph<R: Rng>(rng: &mut R, sentences: usize) -> String {
    (0..sentences)
        .map(|_| clean_sentence(rng))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Ground truth for the planted classifier corpus.
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub dataset: Dataset,
    pub labels: [String; 2],
    /// Planted bigram features (`a_b`) per label, ordered as `labels`.
    pub planted: [Vec<String>; 2],
    pub background: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct PlantedSpec {
    pub docs_per_class: usize,
    pub background_size: usize,
    pub bigrams_per_class: usize,
    pub background_tokens: usize,
    pub plants_per_doc: usize,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            docs_per_class: 500,
            background_size: 200,
            bigrams_per_class: 10,
            background_tokens: 25,
            plants_per_doc: 2,
        }
    }
}

/// Both classes draw from one background vocabulary; each class owns a set
/// of bigrams over that vocabulary that never occurs in the other class.
pub fn planted_classifier_corpus(spec: PlantedSpec, seed: u64) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background: Vec<String> = (0..spec.background_size).map(|i| format!("bg{i:03}")).collect();
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let mut used = HashSet::new();
    while chosen.len() < 2 * spec.bigrams_per_class {
        let a = rng.gen_range(0..background.len());
        let b = rng.gen_range(0..background.len());
        if a != b && used.insert((a, b)) {
            chosen.push((a, b));
        }
    }
    let (pa, pb) = chosen.split_at(spec.bigrams_per_class);
    let per_class = [pa.to_vec(), pb.to_vec()];
    let all: HashSet<(usize, usize)> = chosen.iter().copied().collect();
    let labels = ["feminine".to_owned(), "masculine".to_owned()];

    let mut documents = Vec::with_capacity(2 * spec.docs_per_class);
    for (c, label) in labels.iter().enumerate() {
        for d in 0..spec.docs_per_class {
            let mut ids: Vec<usize> = Vec::new();
            let mut slots: Vec<usize> = (0..spec.plants_per_doc)
                .map(|_| rng.gen_range(0..=spec.background_tokens))
                .collect();
            slots.sort_unstable();
            let mut next_slot = 0;
            for pos in 0..=spec.background_tokens {
                while next_slot < slots.len() && slots[next_slot] == pos {
                    let (a, b) = per_class[c][rng.gen_range(0..per_class[c].len())];
                    while ids.last().is_some_and(|&l| all.contains(&(l, a))) {
                        push_background(&mut ids, &mut rng, background.len(), &all, Some(a));
                    }
                    ids.push(a);
                    ids.push(b);
                    next_slot += 1;
                }
                if pos < spec.background_tokens {
                    push_background(&mut ids, &mut rng, background.len(), &all, None);
                }
            }
            let mut tokens: Vec<String> = ids.iter().map(|&i| background[i].clone()).collect();
            if rng.gen_bool(0.5) {
                let at = rng.gen_range(0..=tokens.len());
                tokens.insert(at, MASK_TOKEN.to_owned());
            }
            documents.push(LabeledDocument {
                id: format!("{label}-{d:04}"),
                label: label.clone(),
                tokens,
            });
        }
    }
    let planted = per_class.map(|v| {
        v.iter()
            .map(|&(a, b)| format!("{}_{}", background[a], background[b]))
            .collect()
    });
    PlantedCorpus {
        dataset: Dataset::new(documents),
        labels,
        planted,
        background,
    }
}

/// Appends a background token that forms no planted bigram with its left
/// neighbour, nor with `before` on its right.
fn push_background(
    ids: &mut Vec<usize>,
    rng: &mut ChaCha8Rng,
    n: usize,
    planted: &HashSet<(usize, usize)>,
    before: Option<usize>,
) {
    loop {
        let t = rng.gen_range(0..n);
        let left_ok = ids.last().is_none_or(|&l| !planted.contains(&(l, t)));
        let right_ok = before.is_none_or(|r| !planted.contains(&(t, r)));
        if left_ok && right_ok {
            ids.push(t);
            return;
        }
    }
}

/// Same documents with labels permuted, destroying any signal.
pub fn shuffle_labels(dataset: &Dataset, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<String> = dataset.documents.iter().map(|d| d.label.clone()).collect();
    labels.shuffle(&mut rng);
    Dataset::new(
        dataset
            .documents
            .iter()
            .zip(labels)
            .map(|(d, label)| LabeledDocument { label, ..d.clone() })
            .collect(),
    )
}

pub const BODY_SIZE_PLANTS: [&str; 6] = [
    "Cut to flatter all shapes.",
    "A relaxed drape that suits most body types.",
    "Comfortable on any body.",
    "Fits most women with ease.",
    "Ideal for regular-sized women.",
    "Flattering on all sizes.",
];

/// Women's clothing corpus where exactly `planted` records carry one
/// body-size phrase each.
pub fn body_size_corpus(n: usize, planted: usize, seed: u64) -> Corpus {
    assert!(planted <= n, "cannot plant more records than exist");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flags = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, planted) {
        flags[i] = true;
    }
    let records = flags
        .iter()
        .enumerate()
        .map(|(i, &plant)| {
            let listing = ProductListing::new(
                format!("bs{i:05}"),
                format!("Womens Dress Style {i}"),
                ["Clothing, Shoes & Accessories", "Women", "Women's Clothing", "Dresses"]
                    .map(String::from)
                    .to_vec(),
                vec![Aspect::new("Department", "Women"), Aspect::new("Size", "M")],
                Some("New".into()),
            )
            .expect("synthetic listing is valid");
            let mut desc = clean_paragraph(&mut rng, 2);
            if plant {
                desc.push(' ');
                desc.push_str(BODY_SIZE_PLANTS[rng.gen_range(0..BODY_SIZE_PLANTS.len())]);
            }
            DescribedRecord::new(listing, desc).expect("nonempty description")
        })
        .collect();
    Corpus::new(
        records,
        format!("synthetic body-size corpus n={n} planted={planted} seed={seed}"),
    )
    .expect("ids are unique")
}

const MIXED_PLANTS: [&str; 8] = [
    "Designed exclusively for men.",
    "Made for women who travel.",
    "Great for boys and girls alike.",
    "Don't miss out on this one!",
    "Order today while supplies last.",
    "A thoughtful gift for any mom.",
    "Fits most women comfortably.",
    "Perfect for dads and moms on the go.",
];

/// Mixed-department corpus touching every lexicon detector.
pub fn mixed_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let departments = ["Men", "Women", "Boys", "Girls", "Unisex"];
    let records = (0..n)
        .map(|i| {
            let (path, aspects): (Vec<String>, Vec<Aspect>) = match rng.gen_range(0..4) {
                0 | 1 => {
                    let d = departments[rng.gen_range(0..departments.len())];
                    (
                        vec![
                            "Clothing, Shoes & Accessories".into(),
                            d.into(),
                            format!("{d}'s Clothing"),
                        ],
                        vec![Aspect::new("Department", d), Aspect::new("Color", "Blue")],
                    )
                }
                2 => (
                    vec!["Home & Garden".into(), "Kitchen".into(), "Mugs".into()],
                    vec![Aspect::new("Material", "Ceramic")],
                ),
                _ => (
                    vec!["Books".into(), "Fiction".into()],
                    vec![Aspect::new("Format", "Paperback")],
                ),
            };
            let listing = ProductListing::new(
                format!("mx{i:05}"),
                format!("Item {i}"),
                path,
                aspects,
                Some("New".into()),
            )
            .expect("synthetic listing is valid");
            let mut desc = clean_paragraph(&mut rng, 2);
            if rng.gen_bool(0.4) {
                desc.push(' ');
                desc.push_str(MIXED_PLANTS[rng.gen_range(0..MIXED_PLANTS.len())]);
            }
            DescribedRecord::new(listing, desc).expect("nonempty description")
        })
        .collect();
    Corpus::new(records, format!("synthetic mixed corpus n={n} seed={seed}")).expect("ids are unique")
}

/// Gendered clothing listings suitable for pair derivation.
pub fn gendered_listings(n: usize, seed: u64) -> Vec<ProductListing> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = ["Jacket", "Sneakers", "Hoodie", "Jeans", "Backpack", "Sweater", "Boots"];
    (0..n)
        .map(|i| {
            let (dept, possessive) = match rng.gen_range(0..4) {
                0 => ("Men", "Men's"),
                1 => ("Women", "Women's"),
                2 => ("Boys", "Boys'"),
                _ => ("Girls", "Girls'"),
            };
            let kind = kinds[rng.gen_range(0..kinds.len())];
            ProductListing::new(
                format!("g{i:03}"),
                format!("{possessive} {} {kind} Model {i}", pick(&mut rng, &ADJECTIVES)),
                vec![
                    "Clothing, Shoes & Accessories".into(),
                    dept.into(),
                    format!("{possessive} Clothing"),
                ],
                vec![Aspect::new("Department", dept), Aspect::new("Size", "M")],
                Some("New".into()),
            )
            .expect("synthetic listing is valid")
        })
        .collect()
}

/// A corpus with programmed human and LLM verdicts.
#[derive(Debug, Clone)]
pub struct FunnelFixture {
    pub corpus: Corpus,
    /// Annotation CSV in the default column layout.
    pub annotations_csv: String,
    pub human_yes: BTreeSet<String>,
    pub llm_yes: BTreeSet<String>,
}

pub fn funnel_fixture(n: usize, human_yes: usize, llm_yes: usize, seed: u64) -> FunnelFixture {
    assert!(llm_yes <= human_yes && human_yes <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records: Vec<DescribedRecord> = (0..n)
        .map(|i| {
            let listing = ProductListing::new(
                format!("r{i:05}"),
                funnel_title(i),
                vec!["Home & Garden".into(), "Decor".into()],
                vec![Aspect::new("Color", "Green")],
                Some("New".into()),
            )
            .expect("synthetic listing is valid");
            DescribedRecord::new(listing, clean_sentence(&mut rng)).expect("nonempty description")
        })
        .collect();
    let human: BTreeSet<usize> = rand::seq::index::sample(&mut rng, n, human_yes).into_iter().collect();
    let human_vec: Vec<usize> = human.iter().copied().collect();
    let llm: BTreeSet<usize> = rand::seq::index::sample(&mut rng, human_vec.len(), llm_yes)
        .into_iter()
        .map(|j| human_vec[j])
        .collect();

    let mut csv = String::from("id,group_assoc,toxicity,stereotyping,exclusionary,other\n");
    for i in 0..n {
        let cells: [&str; 5] = if human.contains(&i) {
            let mut c = ["no"; 5];
            c[rng.gen_range(0..5)] = "yes";
            c
        } else {
            match rng.gen_range(0..10) {
                0 => [""; 5],
                1 => ["no", "not sure", "no", "no", "no"],
                _ => ["no"; 5],
            }
        };
        let _ = writeln!(csv, "r{i:05},{}", cells.join(","));
    }
    let corpus = Corpus::new(records, format!("synthetic funnel corpus n={n} seed={seed}")).expect("ids are unique");
    FunnelFixture {
        corpus,
        annotations_csv: csv,
        human_yes: human.iter().map(|i| format!("r{i:05}")).collect(),
        llm_yes: llm.iter().map(|i| format!("r{i:05}")).collect(),
    }
}

pub fn funnel_title(i: usize) -> String {
    format!("item-{i:05} decorative planter")
}

/// Answers yes when the queried record's title is programmed, no
/// otherwise. The queried record is the last `Title:` line of the prompt.
#[derive(Debug, Default)]
pub struct TitleKeyedLlmClient {
    yes_titles: HashSet<String>,
    calls: std::sync::atomic::AtomicU64,
}

impl TitleKeyedLlmClient {
    pub fn new<I: IntoIterator<Item = String>>(yes_titles: I) -> Self {
        TitleKeyedLlmClient {
            yes_titles: yes_titles.into_iter().collect(),
            calls: Default::default(),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(std::sync::atomic::Ordering::SeqCst)
    }
}

impl LlmClient for TitleKeyedLlmClient {
    fn tag(&self) -> String {
        "title-keyed".into()
    }

    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        let title = prompt
            .rfind("Title: ")
            .map(|at| prompt[at + 7..].lines().next().unwrap_or_default().trim());
        Ok(match title {
            Some(t) if self.yes_titles.contains(t) => "Yes".into(),
            _ => "No".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::DetectorSuite;
    use crate::lexicon::normalize;

    #[test]
    fn clean_sentences_hit_nothing() {
        let suite = DetectorSuite::builtin();
        for s in clean_sentences(500, 3) {
            let t = normalize(&s);
            for kind in crate::detectors::DetectorKind::ALL {
                if let Some(set) = suite.phrase_set(kind) {
                    assert!(set.find(&t).is_empty(), "{s}");
                }
            }
        }
    }

    #[test]
    fn planted_bigrams_are_exclusive() {
        let pc = planted_classifier_corpus(PlantedSpec::default(), 1);
        assert_eq!(pc.dataset.documents.len(), 1000);
        for (c, label) in pc.labels.iter().enumerate() {
            let other = &pc.planted[1 - c];
            for d in pc.dataset.documents.iter().filter(|d| &d.label == label) {
                for w in d.tokens.windows(2) {
                    assert!(!other.contains(&format!("{}_{}", w[0], w[1])));
                }
            }
        }
    }

    #[test]
    fn body_size_plant_count() {
        let c = body_size_corpus(100, 17, 0);
        let suite = DetectorSuite::builtin();
        let hits = c
            .records
            .iter()
            .filter(|r| suite.detect_body_size(r).is_flagged())
            .count();
        assert_eq!(hits, 17);
    }

    #[test]
    fn funnel_fixture_counts() {
        let f = funnel_fixture(200, 50, 7, 2);
        assert_eq!(f.human_yes.len(), 50);
        assert_eq!(f.llm_yes.len(), 7);
        assert!(f.llm_yes.is_subset(&f.human_yes));
        assert_eq!(f.annotations_csv.lines().count(), 201);
    }
}

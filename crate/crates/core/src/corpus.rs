//! Listings, described records and corpus ingestion.
//!
//! A listing's textual form is the `Key: Value` input block sellers' data is
//! rendered into before generation:
//!
//! ```text
//! Title: Black Specialized Diverge E5 Bicycle size L
//! Categories: Sporting Goods: Cycling: Bicycles
//! Condition: New
//! Brand: Specialized
//! Department: Men
//! ```

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("input block has no `Title:` line")]
    MissingTitle,
    #[error("line {line}: expected `Key: Value`, got `{text}`")]
    MalformedLine { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("input block is empty")]
    EmptyBlock,
    #[error("listing id must be nonempty")]
    EmptyId,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: duplicate record id `{id}`")]
    DuplicateId { line: usize, id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Department {
    Men,
    Women,
    Boys,
    Girls,
    Unisex,
}

impl Department {
    pub const ALL: [Department; 5] = [
        Department::Men,
        Department::Women,
        Department::Boys,
        Department::Girls,
        Department::Unisex,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Department::Men => "Men",
            Department::Women => "Women",
            Department::Boys => "Boys",
            Department::Girls => "Girls",
            Department::Unisex => "Unisex",
        }
    }

    /// Exact (case-insensitive) department name.
    pub fn from_segment(s: &str) -> Option<Department> {
        let s = s.trim();
        Department::ALL.into_iter().find(|d| d.as_str().eq_ignore_ascii_case(s))
    }

    /// Lenient parse of a department aspect value: "Men", "Men's",
    /// "Unisex Adult", "Womens" all resolve.
    pub fn from_aspect_value(value: &str) -> Option<Department> {
        let tokens = crate::lexicon::normalize(value);
        let first = tokens.first()?;
        match first.as_str() {
            "men" | "mens" | "man" | "male" => Some(Department::Men),
            "women" | "womens" | "woman" | "female" | "ladies" => Some(Department::Women),
            "boys" | "boy" => Some(Department::Boys),
            "girls" | "girl" => Some(Department::Girls),
            "unisex" => Some(Department::Unisex),
            _ => None,
        }
    }
}

impl fmt::Display for Department {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aspect {
    pub name: String,
    pub value: String,
}

impl Aspect {
    pub fn new(name: impl Into<String>, value: impl Into<String>) -> Self {
        Aspect {
            name: name.into(),
            value: value.into(),
        }
    }

    pub fn is_department(&self) -> bool {
        is_department_key(&self.name)
    }
}

fn is_department_key(name: &str) -> bool {
    let n = name.trim();
    n.eq_ignore_ascii_case("department") || n.eq_ignore_ascii_case("gender")
}

/// Structured generator input for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductListing {
    pub id: String,
    pub title: String,
    pub category_path: Vec<String>,
    pub aspects: Vec<Aspect>,
    pub condition: Option<String>,
    pub department: Option<Department>,
}

impl ProductListing {
    /// Builds a listing and derives its department. Aspect names must be
    /// unique after case folding.
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        category_path: Vec<String>,
        aspects: Vec<Aspect>,
        condition: Option<String>,
    ) -> Result<Self, ParseError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(ParseError::EmptyId);
        }
        let mut seen = HashSet::new();
        for (i, a) in aspects.iter().enumerate() {
            if !seen.insert(a.name.to_lowercase()) {
                return Err(ParseError::DuplicateKey {
                    line: i + 1,
                    key: a.name.clone(),
                });
            }
        }
        let mut listing = ProductListing {
            id,
            title: title.into(),
            category_path,
            aspects,
            condition,
            department: None,
        };
        listing.department = listing.derive_department();
        Ok(listing)
    }

    /// Explicit department/gender aspect first, then the root-most category
    /// segment naming a department.
    pub fn derive_department(&self) -> Option<Department> {
        self.aspects
            .iter()
            .filter(|a| a.is_department())
            .find_map(|a| Department::from_aspect_value(&a.value))
            .or_else(|| self.category_path.iter().find_map(|s| Department::from_segment(s)))
    }

    pub fn top_level_category(&self) -> Option<&str> {
        self.category_path.first().map(String::as_str)
    }

    pub fn aspect(&self, name: &str) -> Option<&str> {
        self.aspects
            .iter()
            .find(|a| a.name.eq_ignore_ascii_case(name))
            .map(|a| a.value.as_str())
    }

    /// Canonical block text: Title, Categories, Condition, then aspects in
    /// their stored order. Reparsing yields an identical listing.
    pub fn to_input_block(&self) -> String {
        let mut lines = vec![format!("Title: {}", self.title)];
        if !self.category_path.is_empty() {
            lines.push(format!("Categories: {}", self.category_path.join(": ")));
        }
        if let Some(c) = &self.condition {
            lines.push(format!("Condition: {c}"));
        }
        for a in &self.aspects {
            lines.push(format!("{}: {}", a.name, a.value));
        }
        lines.join("\n")
    }
}

/// Parses an input block into a listing with the given id.
pub fn parse_input_block(block: &str, id: &str) -> Result<ProductListing, ParseError> {
    if block.trim().is_empty() {
        return Err(ParseError::EmptyBlock);
    }
    let mut title = None;
    let mut categories = None;
    let mut condition = None;
    let mut aspects = Vec::new();
    let mut seen_aspects = HashSet::new();
    for (idx, raw) in block.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let malformed = || ParseError::MalformedLine {
            line: line_no,
            text: line.to_owned(),
        };
        let (key, value) = line.split_once(':').ok_or_else(malformed)?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(malformed());
        }
        let duplicate = || ParseError::DuplicateKey {
            line: line_no,
            key: key.to_owned(),
        };
        let slot = if key.eq_ignore_ascii_case("title") {
            &mut title
        } else if key.eq_ignore_ascii_case("categories") || key.eq_ignore_ascii_case("category") {
            &mut categories
        } else if key.eq_ignore_ascii_case("condition") {
            &mut condition
        } else {
            if !seen_aspects.insert(key.to_lowercase()) {
                return Err(duplicate());
            }
            aspects.push(Aspect::new(key, value));
            continue;
        };
        if slot.is_some() {
            return Err(duplicate());
        }
        *slot = Some(value.to_owned());
    }
    let title = title.ok_or(ParseError::MissingTitle)?;
    let category_path = categories.as_deref().map(split_categories).unwrap_or_default();
    ProductListing::new(id, title, category_path, aspects, condition)
}

/// Splits on `:` and trims each segment; empty segments are dropped.
pub fn split_categories(path: &str) -> Vec<String> {
    path.split(':')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// True if `segment` equals one of `entries`, or one of its `&`/`,`-separated
/// parts does ("Clothing, Shoes & Accessories" contains "Shoes").
pub fn segment_matches<S: AsRef<str>>(segment: &str, entries: &[S]) -> bool {
    let seg = segment.trim();
    let eq = |part: &str| entries.iter().any(|e| e.as_ref().trim().eq_ignore_ascii_case(part));
    eq(seg) || seg.split(['&', ',']).map(str::trim).filter(|p| !p.is_empty()).any(eq)
}

/// Which category segments mark a listing as gendered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeutralityConfig {
    pub gendered_categories: Vec<String>,
}

impl Default for NeutralityConfig {
    fn default() -> Self {
        NeutralityConfig {
            gendered_categories: [
                "Clothing",
                "Shoes",
                "Accessories",
                "Men",
                "Women",
                "Boys",
                "Girls",
                "Unisex",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenderEvidence {
    Department { department: Department },
    CategorySegment { index: usize, segment: String },
}

/// Everything in a listing's input that ties it to a gender.
pub fn gender_evidence(listing: &ProductListing, config: &NeutralityConfig) -> Vec<GenderEvidence> {
    let mut out = Vec::new();
    if let Some(department) = listing.department {
        out.push(GenderEvidence::Department { department });
    }
    for (index, segment) in listing.category_path.iter().enumerate() {
        if segment_matches(segment, &config.gendered_categories) {
            out.push(GenderEvidence::CategorySegment {
                index,
                segment: segment.clone(),
            });
        }
    }
    out
}

pub fn is_gender_neutral(listing: &ProductListing, config: &NeutralityConfig) -> bool {
    gender_evidence(listing, config).is_empty()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribedRecord {
    pub listing: ProductListing,
    pub description: String,
    pub model_tag: Option<String>,
}

impl DescribedRecord {
    pub fn new(listing: ProductListing, description: impl Into<String>) -> Result<Self, String> {
        let description = description.into();
        if description.trim().is_empty() {
            return Err(format!("record `{}` has an empty description", listing.id));
        }
        Ok(DescribedRecord {
            listing,
            description,
            model_tag: None,
        })
    }

    pub fn with_model_tag(mut self, tag: impl Into<String>) -> Self {
        self.model_tag = Some(tag.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.listing.id
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub records: Vec<DescribedRecord>,
    pub provenance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    JsonLines,
    Csv,
}

impl CorpusFormat {
    /// `.csv` is CSV; anything else is line-delimited JSON.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::JsonLines,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonListing {
    title: String,
    #[serde(default)]
    categories: Vec<String>,
    #[serde(default)]
    aspects: Vec<Aspect>,
    #[serde(default)]
    condition: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    id: String,
    description: String,
    #[serde(default)]
    listing: Option<JsonListing>,
    #[serde(default)]
    input_block: Option<String>,
    #[serde(default)]
    model_tag: Option<String>,
}

#[derive(Debug, Serialize)]
struct JsonListingOut<'a> {
    title: &'a str,
    categories: &'a [String],
    aspects: &'a [Aspect],
    #[serde(skip_serializing_if = "Option::is_none")]
    condition: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct JsonRowOut<'a> {
    id: &'a str,
    listing: JsonListingOut<'a>,
    description: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_tag: Option<&'a str>,
}

fn build_record(
    line: usize,
    id: String,
    listing: Option<JsonListing>,
    input_block: Option<String>,
    description: String,
    model_tag: Option<String>,
) -> Result<DescribedRecord, CorpusError> {
    let schema = |message: String| CorpusError::Schema { line, message };
    let listing = match (listing, input_block) {
        (Some(_), Some(_)) => return Err(schema("give either `listing` or `input_block`, not both".into())),
        (None, None) => return Err(schema("missing `listing` or `input_block`".into())),
        (Some(l), None) => {
            let categories = l.categories.iter().map(|c| c.trim().to_owned()).collect();
            ProductListing::new(id, l.title, categories, l.aspects, l.condition)
        }
        (None, Some(block)) => parse_input_block(&block, &id),
    }
    .map_err(|e| schema(e.to_string()))?;
    let mut record = DescribedRecord::new(listing, description).map_err(schema)?;
    record.model_tag = model_tag.filter(|t| !t.is_empty());
    Ok(record)
}

impl Corpus {
    pub fn new(records: Vec<DescribedRecord>, provenance: impl Into<String>) -> Result<Corpus, CorpusError> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.id().to_owned()) {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: r.id().to_owned(),
                });
            }
        }
        Ok(Corpus {
            records,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DescribedRecord> {
        self.records.iter().find(|r| r.id() == id)
    }

    pub fn load(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
        let io = |source| CorpusError::Io {
            path: path.to_owned(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io)?;
        let records = match format {
            CorpusFormat::JsonLines => read_json_lines(BufReader::new(file))?,
            CorpusFormat::Csv => read_csv(file)?,
        };
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Corpus {
            records,
            provenance: format!("{name} ({format:?})"),
        })
    }

    pub fn write_json_lines<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            let l = &r.listing;
            let row = JsonRowOut {
                id: &l.id,
                listing: JsonListingOut {
                    title: &l.title,
                    categories: &l.category_path,
                    aspects: &l.aspects,
                    condition: l.condition.as_deref(),
                },
                description: &r.description,
                model_tag: r.model_tag.as_deref(),
            };
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "input_block", "description", "model_tag"])?;
        for r in &self.records {
            w.write_record([
                r.id(),
                &r.listing.to_input_block(),
                &r.description,
                r.model_tag.as_deref().unwrap_or(""),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    Corpus::load(path, format)
}

fn read_json_lines<R: BufRead>(reader: R) -> Result<Vec<DescribedRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&line).map_err(|e| CorpusError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(row.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: row.id,
            });
        }
        records.push(build_record(
            line_no,
            row.id,
            row.listing,
            row.input_block,
            row.description,
            row.model_tag,
        )?);
    }
    Ok(records)
}

fn read_csv<R: std::io::Read>(reader: R) -> Result<Vec<DescribedRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::Schema {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let expected = ["id", "input_block", "description"];
    if names.len() < 3 || names[..3] != expected || (names.len() == 4 && names[3] != "model_tag") || names.len() > 4 {
        return Err(CorpusError::Schema {
            line: 1,
            message: format!(
                "expected header `id,input_block,description[,model_tag]`, got `{}`",
                names.join(",")
            ),
        });
    }
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| CorpusError::Schema {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line_no = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = row[0].to_owned();
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id });
        }
        let tag = row.get(3).map(str::to_owned);
        records.push(build_record(
            line_no,
            id,
            None,
            Some(row[1].to_owned()),
            row[2].to_owned(),
            tag,
        )?);
    }
    Ok(records)
}

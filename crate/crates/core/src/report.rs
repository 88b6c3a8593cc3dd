//! Canonical JSON, markdown and CSV renderings of every report type, plus
//! the run manifest embedded in each emitted file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::classifier::EvalReport;
use crate::detectors::{AuditReport, RateCell};
use crate::flagging::FunnelReport;
use crate::stats::{ProportionEstimate, TwoProportionTest};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Markdown,
    Csv,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Markdown => "md",
            OutputFormat::Csv => "csv",
        }
    }
}

/// Serializes through `serde_json::Value`, whose maps are sorted, with
/// shortest round-trip floats and a trailing newline.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report serializes");
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// sha256 of the canonical JSON of the effective configuration.
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub vocabularies: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: Option<u64>) -> Self {
        RunManifest {
            tool_version: TOOL_VERSION.to_owned(),
            command: command.to_owned(),
            config_hash: sha256_hex(canonical_json(config).as_bytes()),
            inputs: BTreeMap::new(),
            vocabularies: BTreeMap::new(),
            seed,
            started_at: String::new(),
            finished_at: String::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> std::io::Result<()> {
        let bytes = std::fs::read(path)?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn with_vocabularies(mut self, digests: &[(String, String)]) -> Self {
        self.vocabularies = digests.iter().cloned().collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<R> {
    pub manifest: RunManifest,
    pub report: R,
}

/// Markdown and CSV renderings; JSON comes from `Serialize`.
pub trait Render: Serialize {
    fn markdown(&self) -> String;
    fn csv(&self) -> String;
}

pub fn render<R: Render>(report: &R, manifest: &RunManifest, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => canonical_json(&Envelope {
            manifest: manifest.clone(),
            report,
        }),
        OutputFormat::Markdown => {
            let mut s = report.markdown();
            let _ = writeln!(
                s,
                "\n---\nprodbias {} · config {} · seed {}",
                manifest.tool_version,
                &manifest.config_hash[..12.min(manifest.config_hash.len())],
                manifest.seed.map_or("none".to_owned(), |s| s.to_string()),
            );
            s
        }
        OutputFormat::Csv => report.csv(),
    }
}

/// Writes the rendering to `path`, or to stdout when `path` is `None`.
pub fn emit_report<R: Render>(
    report: &R,
    manifest: &RunManifest,
    format: OutputFormat,
    path: Option<&Path>,
) -> std::io::Result<()> {
    let text = render(report, manifest, format);
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

/// Removes the manifest timestamps from a canonical JSON document.
pub fn strip_timestamps(json: &str) -> Result<String, serde_json::Error> {
    let mut v: Value = serde_json::from_str(json)?;
    if let Some(m) = v.get_mut("manifest").and_then(Value::as_object_mut) {
        m.remove("started_at");
        m.remove("finished_at");
    }
    Ok(canonical_json(&v))
}

pub fn percent(p: f64) -> String {
    format!("{:.1}%", p * 100.0)
}

fn interval(low: f64, high: f64) -> String {
    format!("({}, {})", percent(low), percent(high))
}

fn cell_rate(c: &RateCell) -> (String, String) {
    match (c.rate, c.ci_low, c.ci_high) {
        (Some(r), Some(lo), Some(hi)) => (percent(r), interval(lo, hi)),
        _ => ("n/a".into(), "n/a".into()),
    }
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

impl Render for AuditReport {
    fn markdown(&self) -> String {
        let mut s = String::from("# Audit report\n\n");
        if self.corpus_size == 0 {
            s.push_str("> **No records**: the corpus is empty; all denominators are zero.\n\n");
        }
        let _ = writeln!(
            s,
            "Records: {} · source: {} · {:.0}% {} intervals\n",
            self.corpus_size,
            self.provenance,
            self.confidence_level * 100.0,
            match self.interval_method {
                crate::stats::IntervalMethod::Wald => "Wald",
                crate::stats::IntervalMethod::Wilson => "Wilson",
            }
        );
        if self.categories.is_empty() {
            s.push_str("No detectors were run.\n");
        } else {
            s.push_str("| Category | Rate | 95% CI | Flagged | In scope | Needs review | Unscored |\n");
            s.push_str("|---|---|---|---|---|---|---|\n");
            for c in &self.categories {
                let (rate, ci) = cell_rate(&c.overall);
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    c.label, rate, ci, c.overall.flagged, c.overall.denominator, c.needs_review, c.unscored
                );
            }
        }
        for (grouping, sizes) in &self.group_sizes {
            let _ = writeln!(s, "\n## By {}\n", grouping.replace('_', " "));
            let _ = writeln!(
                s,
                "| Group | Records |{}",
                self.categories
                    .iter()
                    .map(|c| format!(" {} |", c.label))
                    .collect::<String>()
            );
            let _ = writeln!(s, "|---|---|{}", "---|".repeat(self.categories.len()));
            for (group, size) in sizes {
                let mut row = format!("| {group} | {size} |");
                for c in &self.categories {
                    let cell = c.groups.get(grouping).and_then(|g| g.get(group));
                    let text = match cell {
                        Some(cell) => {
                            let (rate, ci) = cell_rate(cell);
                            format!(" {rate} {ci} ({}/{}) |", cell.flagged, cell.denominator)
                        }
                        None => " (out of scope) |".to_owned(),
                    };
                    row.push_str(&text);
                }
                let _ = writeln!(s, "{row}");
            }
        }
        if !self.comparisons.is_empty() {
            s.push_str("\n## Men vs Women\n\n| Category | Men | Women | z | p |\n|---|---|---|---|---|\n");
            for c in &self.comparisons {
                match &c.test {
                    Some(t) => {
                        let _ = writeln!(
                            s,
                            "| {} | {} ({}/{}) | {} ({}/{}) | {:.3} | {:.4} |",
                            c.category.label(),
                            percent(t.p1),
                            t.x1,
                            t.n1,
                            percent(t.p2),
                            t.x2,
                            t.n2,
                            t.z,
                            t.p_value
                        );
                    }
                    None => {
                        let _ = writeln!(
                            s,
                            "| {} | | | n/a | {} |",
                            c.category.label(),
                            c.error.as_deref().unwrap_or("not computed")
                        );
                    }
                }
            }
        }
        if !self.errors.is_empty() {
            let _ = writeln!(s, "\n## Errors\n\n{} record-level errors:\n", self.errors.len());
            for e in &self.errors {
                let _ = writeln!(s, "- `{}` ({:?}): {}", e.record_id, e.detector, e.message);
            }
        }
        s
    }

    fn csv(&self) -> String {
        let mut rows = vec![["record_id", "category", "status", "matches", "metrics", "note"]
            .map(String::from)
            .to_vec()];
        for f in &self.findings {
            rows.push(vec![
                f.record_id.clone(),
                serde_json::to_value(f.category)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                serde_json::to_value(f.status)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                f.matches
                    .iter()
                    .map(|m| format!("{}@{}", m.phrase_text(), m.start_token))
                    .collect::<Vec<_>>()
                    .join("; "),
                f.metrics
                    .iter()
                    .map(|(k, v)| format!("{k}={}", fmt_num(*v)))
                    .collect::<Vec<_>>()
                    .join("; "),
                f.note.clone().unwrap_or_default(),
            ]);
        }
        csv_string(rows)
    }
}

impl Render for EvalReport {
    fn markdown(&self) -> String {
        let mut s = String::from("# Classifier evaluation\n\n");
        let _ = writeln!(
            s,
            "Held-out accuracy: **{:.4}** ({}/{}) · train size {} · vocabulary {} · split seed {}\n",
            self.accuracy,
            self.correct,
            self.total,
            self.train_size,
            self.vocabulary_size,
            self.seed.map_or("none".to_owned(), |s| s.to_string())
        );
        let labels: Vec<&String> = self.confusion.keys().collect();
        let _ = writeln!(
            s,
            "| actual \\ predicted |{}",
            labels.iter().map(|l| format!(" {l} |")).collect::<String>()
        );
        let _ = writeln!(s, "|---|{}", "---|".repeat(labels.len()));
        for (actual, row) in &self.confusion {
            let _ = writeln!(
                s,
                "| {actual} |{}",
                row.values().map(|n| format!(" {n} |")).collect::<String>()
            );
        }
        for (label, feats) in &self.top_features {
            let _ = writeln!(
                s,
                "\n## Top features: {label}\n\n| Rank | Feature | Log-odds |\n|---|---|---|"
            );
            for (i, f) in feats.iter().enumerate() {
                let _ = writeln!(s, "| {} | {} | {:.4} |", i + 1, f.feature, f.log_odds);
            }
        }
        s
    }

    fn csv(&self) -> String {
        let mut rows = vec![["label", "rank", "feature", "log_odds"].map(String::from).to_vec()];
        for (label, feats) in &self.top_features {
            for (i, f) in feats.iter().enumerate() {
                rows.push(vec![
                    label.clone(),
                    (i + 1).to_string(),
                    f.feature.clone(),
                    fmt_num(f.log_odds),
                ]);
            }
        }
        csv_string(rows)
    }
}

impl Render for TwoProportionTest {
    fn markdown(&self) -> String {
        format!(
            "# Two-proportion z-test\n\n| Group | Successes | Trials | Rate |\n|---|---|---|---|\n\
             | 1 | {} | {} | {} |\n| 2 | {} | {} | {} |\n\nPooled p = {:.6}, z = {:.4}, two-sided p = {:.4}\n",
            self.x1,
            self.n1,
            percent(self.p1),
            self.x2,
            self.n2,
            percent(self.p2),
            self.pooled_p,
            self.z,
            self.p_value
        )
    }

    fn csv(&self) -> String {
        csv_string(vec![
            ["x1", "n1", "x2", "n2", "p1", "p2", "pooled_p", "z", "p_value"]
                .map(String::from)
                .to_vec(),
            vec![
                self.x1.to_string(),
                self.n1.to_string(),
                self.x2.to_string(),
                self.n2.to_string(),
                fmt_num(self.p1),
                fmt_num(self.p2),
                fmt_num(self.pooled_p),
                fmt_num(self.z),
                fmt_num(self.p_value),
            ],
        ])
    }
}

impl Render for ProportionEstimate {
    fn markdown(&self) -> String {
        format!(
            "# Proportion estimate\n\n{}/{} = {} · {:.0}% CI {}\n",
            self.successes,
            self.trials,
            percent(self.p_hat),
            self.level * 100.0,
            interval(self.ci_low, self.ci_high)
        )
    }

    fn csv(&self) -> String {
        csv_string(vec![
            ["successes", "trials", "p_hat", "ci_low", "ci_high", "level"]
                .map(String::from)
                .to_vec(),
            vec![
                self.successes.to_string(),
                self.trials.to_string(),
                fmt_num(self.p_hat),
                fmt_num(self.ci_low),
                fmt_num(self.ci_high),
                fmt_num(self.level),
            ],
        ])
    }
}

impl Render for FunnelReport {
    fn markdown(&self) -> String {
        let mut s = String::from("# Flagging funnel\n\n| Stage | Records |\n|---|---|\n");
        let _ = writeln!(s, "| Corpus | {} |", self.corpus_size);
        let _ = writeln!(s, "| Human-flagged | {} |", self.human_flagged);
        let _ = writeln!(s, "| LLM-flagged | {} |", self.llm_flagged);
        let _ = writeln!(s, "| Sampled for review | {} |", self.reviewed);
        let _ = writeln!(
            s,
            "\nLLM calls: {} · unparseable answers: {} · failed queries: {}\n",
            self.llm_calls,
            self.llm_unparseable,
            self.llm.errors.len()
        );
        for b in &self.review.bundles {
            let _ = writeln!(s, "- reviewer {}: {} records", b.reviewer, b.record_ids.len());
        }
        s
    }

    fn csv(&self) -> String {
        let mut rows = vec![["record_id", "stage", "flagged", "verdicts"].map(String::from).to_vec()];
        for r in &self.llm.records {
            rows.push(vec![
                r.record_id.clone(),
                "llm".into(),
                r.flagged.to_string(),
                r.verdicts
                    .iter()
                    .map(|(t, v)| {
                        format!(
                            "{}={}",
                            t.as_str(),
                            serde_json::to_value(v)
                                .ok()
                                .and_then(|v| v.as_str().map(str::to_owned))
                                .unwrap_or_default()
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("; "),
            ]);
        }
        csv_string(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::detectors::{audit_corpus, AuditOptions, DetectorSuite};
    use crate::stats::{proportion_ci, two_proportion_z};

    #[test]
    fn canonical_json_sorts_keys() {
        let v = serde_json::json!({"b": 1, "a": {"d": 0.1, "c": [3, 2]}});
        assert_eq!(
            canonical_json(&v),
            "{\n  \"a\": {\n    \"c\": [\n      3,\n      2\n    ],\n    \"d\": 0.1\n  },\n  \"b\": 1\n}\n"
        );
    }

    #[test]
    fn percent_formatting() {
        let e = proportion_ci(313, 2183, 0.95).unwrap();
        assert_eq!(percent(e.p_hat), "14.3%");
        assert_eq!(interval(e.ci_low, e.ci_high), "(12.9%, 15.8%)");
    }

    #[test]
    fn empty_corpus_banner() {
        let s = DetectorSuite::builtin();
        let corpus = Corpus::new(vec![], "empty").unwrap();
        let r = audit_corpus(&corpus, &s, &AuditOptions::from_suite(&s)).unwrap();
        let md = r.markdown();
        assert!(md.contains("No records"));
        assert!(md.contains("| Body size assumptions | n/a | n/a | 0 | 0 |"));
    }

    #[test]
    fn strip_timestamps_only_touches_manifest() {
        let mut m = RunManifest::new("stats", &serde_json::json!({}), Some(1));
        m.started_at = "2026-01-01T00:00:00Z".into();
        let t = two_proportion_z(270, 1000, 215, 1000).unwrap();
        let a = render(&t, &m, OutputFormat::Json);
        m.started_at = "2027-01-01T00:00:00Z".into();
        let b = render(&t, &m, OutputFormat::Json);
        assert_ne!(a, b);
        assert_eq!(strip_timestamps(&a).unwrap(), strip_timestamps(&b).unwrap());
    }

    #[test]
    fn csv_renderings() {
        let t = two_proportion_z(270, 1000, 215, 1000).unwrap();
        assert!(t
            .csv()
            .starts_with("x1,n1,x2,n2,p1,p2,pooled_p,z,p_value\n270,1000,215,1000,0.27,0.215,"));
    }
}

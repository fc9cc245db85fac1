//! Datasets, batch evaluation and reports.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nl2fol_core::metrics::{Counts, Metrics};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::llm::{bindings, CallLog, Gateway, TemplateId};
use crate::pipeline::{write_trace, Classification, Pipeline, RunSettings};

pub const REPORT_VERSION: u32 = 1;
pub const DEFAULT_CONNECTIVE: &str = "Thus,";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Gold {
    Fallacy,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SourceTag {
    Logic,
    Logicclimate,
    Snli,
    #[default]
    Custom,
}

impl FromStr for SourceTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', '-', ' '], "").as_str() {
            "logic" => Ok(SourceTag::Logic),
            "logicclimate" => Ok(SourceTag::Logicclimate),
            "snli" => Ok(SourceTag::Snli),
            "custom" | "" => Ok(SourceTag::Custom),
            other => Err(format!("unknown source tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    pub label: Gold,
    #[serde(default)]
    pub source: SourceTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    /// `{id, text, label}` per line.
    Jsonl,
    /// Header row with a `text` column.
    Csv,
    /// SNLI JSONL: `sentence1`, `sentence2`, `gold_label`.
    Snli,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "jsonl" | "json" => Some(DatasetFormat::Jsonl),
            "csv" => Some(DatasetFormat::Csv),
            _ => None,
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "csv" => Ok(DatasetFormat::Csv),
            "snli" => Ok(DatasetFormat::Snli),
            _ => Err(format!("unknown dataset format `{s}` (jsonl, csv, snli)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
}

/// Joins an entailed premise/hypothesis pair into one argument.
pub fn valid_sentence(premise: &str, hypothesis: &str, connective: &str) -> String {
    let premise = premise.trim();
    let hypothesis = hypothesis.trim();
    let mut chars = hypothesis.chars();
    let hypothesis = match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect::<String>(),
        None => String::new(),
    };
    format!("{premise} {connective} {hypothesis}")
}

fn gold_from(label: &str) -> Gold {
    match label.trim().to_ascii_lowercase().as_str() {
        "valid" | "v" | "entailment" | "0" => Gold::Valid,
        _ => Gold::Fallacy,
    }
}

struct Row<'a> {
    line: usize,
    get: &'a dyn Fn(&str) -> Option<String>,
}

fn example_from(row: Row<'_>, connective: &str, snli: bool) -> Result<Option<LabeledExample>, DatasetError> {
    let get = |keys: &[&str]| keys.iter().find_map(|k| (row.get)(k)).filter(|v| !v.trim().is_empty());
    let id = get(&["id", "pairID"]).unwrap_or_else(|| format!("row-{}", row.line));
    let premise = get(&["premise", "sentence1"]);
    let hypothesis = get(&["hypothesis", "sentence2"]);
    if snli || (premise.is_some() && hypothesis.is_some()) {
        let (Some(p), Some(h)) = (premise, hypothesis) else {
            return Err(DatasetError::MissingColumn(if snli { "sentence1" } else { "premise" }.into()));
        };
        // only entailed pairs make valid arguments
        let label = get(&["gold_label", "label"]).unwrap_or_else(|| "entailment".into());
        if !label.trim().eq_ignore_ascii_case("entailment") {
            return Ok(None);
        }
        return Ok(Some(LabeledExample {
            id,
            text: valid_sentence(&p, &h, connective),
            label: Gold::Valid,
            source: SourceTag::Snli,
        }));
    }
    let text = get(&["text", "source_article"]).ok_or_else(|| DatasetError::MissingColumn("text".into()))?;
    let label = get(&["label"]).map_or(Gold::Fallacy, |l| gold_from(&l));
    let source = match get(&["source"]) {
        Some(s) => s
            .parse()
            .map_err(|message| DatasetError::Format { line: row.line, message })?,
        None => SourceTag::Custom,
    };
    Ok(Some(LabeledExample {
        id,
        text: text.trim().to_string(),
        label,
        source,
    }))
}

fn json_field(v: &Value, key: &str) -> Option<String> {
    match v.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat, connective: &str) -> Result<Vec<LabeledExample>, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = Vec::new();
    match format {
        DatasetFormat::Jsonl | DatasetFormat::Snli => {
            let text = fs::read_to_string(path).map_err(io_err)?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let v: Value = serde_json::from_str(line).map_err(|e| DatasetError::Format {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if !v.is_object() {
                    return Err(DatasetError::Format {
                        line: i + 1,
                        message: "expected a JSON object".into(),
                    });
                }
                let get = |k: &str| json_field(&v, k);
                let row = Row { line: i + 1, get: &get };
                if let Some(ex) = example_from(row, connective, format == DatasetFormat::Snli)? {
                    out.push(ex);
                }
            }
        }
        DatasetFormat::Csv => {
            let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(e) => io_err(e),
                other => DatasetError::Format {
                    line: 1,
                    message: format!("{other:?}"),
                },
            })?;
            let headers = rdr
                .headers()
                .map_err(|e| DatasetError::Format {
                    line: 1,
                    message: e.to_string(),
                })?
                .clone();
            let has = |k: &str| headers.iter().any(|h| h == k);
            if !["text", "source_article", "premise", "sentence1"].iter().any(|k| has(k)) {
                return Err(DatasetError::MissingColumn("text".into()));
            }
            for (i, rec) in rdr.records().enumerate() {
                let line = i + 2;
                let rec = rec.map_err(|e| DatasetError::Format {
                    line,
                    message: e.to_string(),
                })?;
                let get = |k: &str| {
                    headers
                        .iter()
                        .position(|h| h == k)
                        .and_then(|p| rec.get(p))
                        .map(str::to_string)
                };
                if let Some(ex) = example_from(Row { line, get: &get }, connective, false)? {
                    out.push(ex);
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    for ex in &out {
        if !seen.insert(ex.id.as_str()) {
            return Err(DatasetError::DuplicateId(ex.id.clone()));
        }
    }
    Ok(out)
}

/// Equal numbers of each class (at most `per_class` each), chosen by a
/// seeded shuffle.
pub fn balanced_sample(examples: &[LabeledExample], per_class: Option<usize>, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fallacies: Vec<_> = examples.iter().filter(|e| e.label == Gold::Fallacy).cloned().collect();
    let mut valids: Vec<_> = examples.iter().filter(|e| e.label == Gold::Valid).cloned().collect();
    fallacies.shuffle(&mut rng);
    valids.shuffle(&mut rng);
    let n = fallacies.len().min(valids.len()).min(per_class.unwrap_or(usize::MAX));
    let mut out: Vec<_> = fallacies.into_iter().take(n).chain(valids.into_iter().take(n)).collect();
    out.shuffle(&mut rng);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnknownAs {
    #[default]
    Fallacy,
    Valid,
    Drop,
}

impl UnknownAs {
    pub fn as_str(&self) -> &'static str {
        match self {
            UnknownAs::Fallacy => "fallacy",
            UnknownAs::Valid => "valid",
            UnknownAs::Drop => "drop",
        }
    }
}

impl FromStr for UnknownAs {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fallacy" => Ok(UnknownAs::Fallacy),
            "valid" => Ok(UnknownAs::Valid),
            "drop" => Ok(UnknownAs::Drop),
            _ => Err(format!("unknown policy `{s}` (fallacy, valid, drop)")),
        }
    }
}

impl fmt::Display for UnknownAs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicted {
    Fallacy,
    Valid,
    Inconclusive,
}

impl Predicted {
    pub fn from_classification(c: &Classification) -> Self {
        match c {
            Classification::Fallacy { .. } => Predicted::Fallacy,
            Classification::Valid => Predicted::Valid,
            Classification::Inconclusive { .. } => Predicted::Inconclusive,
        }
    }

    /// The class counted under `policy`; `None` when dropped.
    pub fn counted(self, policy: UnknownAs) -> Option<Gold> {
        match (self, policy) {
            (Predicted::Fallacy, _) | (Predicted::Inconclusive, UnknownAs::Fallacy) => Some(Gold::Fallacy),
            (Predicted::Valid, _) | (Predicted::Inconclusive, UnknownAs::Valid) => Some(Gold::Valid),
            (Predicted::Inconclusive, UnknownAs::Drop) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub gold: Gold,
    pub predicted: Predicted,
    /// Class used for the confusion matrix; absent when dropped.
    pub counted_as: Option<Gold>,
    /// Trace file name within the trace directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub inconclusive: u64,
    pub dropped: u64,
}

impl ReportCounts {
    fn confusion(&self) -> Counts {
        Counts {
            tp: self.tp,
            fp: self.fp,
            tn: self.tn,
            fn_: self.fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub report_version: u32,
    pub method: String,
    pub dataset: String,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub unknown_as: UnknownAs,
    pub counts: ReportCounts,
    pub metrics: Metrics,
    pub examples: Vec<ExampleRecord>,
    pub settings: RunSettings,
}

impl MetricsReport {
    /// Builds counts and metrics from per-example records; FALLACY is the
    /// positive class.
    pub fn from_records(
        method: &str,
        dataset: &str,
        unknown_as: UnknownAs,
        examples: Vec<ExampleRecord>,
        settings: RunSettings,
    ) -> Self {
        let mut counts = ReportCounts::default();
        let mut confusion = Counts::default();
        for r in &examples {
            if r.predicted == Predicted::Inconclusive {
                counts.inconclusive += 1;
            }
            match r.counted_as {
                Some(p) => confusion.record(r.gold == Gold::Fallacy, p == Gold::Fallacy),
                None => counts.dropped += 1,
            }
        }
        counts.tp = confusion.tp;
        counts.fp = confusion.fp;
        counts.tn = confusion.tn;
        counts.fn_ = confusion.fn_;
        MetricsReport {
            report_version: REPORT_VERSION,
            method: method.to_string(),
            dataset: dataset.to_string(),
            size: examples.len(),
            seed: None,
            unknown_as,
            counts,
            metrics: confusion.metrics(),
            examples,
            settings,
        }
    }

    pub fn confusion(&self) -> Counts {
        self.counts.confusion()
    }
}

/// Runs `f` over `items` on up to `workers` threads, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub unknown_as: UnknownAs,
    pub parallelism: usize,
    pub trace_dir: Option<PathBuf>,
    pub dataset_name: String,
}

/// Classifies every example. Per-example failures are recorded, never
/// fatal; trace-writing errors become notes on the record.
pub fn evaluate(dataset: &[LabeledExample], pipeline: &Pipeline, opts: &EvalOptions) -> MetricsReport {
    let records = par_map(dataset, opts.parallelism, |ex| {
        let (classification, trace) = pipeline.classify(&ex.text);
        let predicted = Predicted::from_classification(&classification);
        let (trace_name, note) = match &opts.trace_dir {
            Some(dir) => match write_trace(dir, &trace) {
                Ok(p) => (p.file_name().map(|n| n.to_string_lossy().into_owned()), None),
                Err(e) => (None, Some(format!("trace not written: {e}"))),
            },
            None => (None, None),
        };
        ExampleRecord {
            id: ex.id.clone(),
            gold: ex.label,
            predicted,
            counted_as: predicted.counted(opts.unknown_as),
            trace: trace_name,
            note,
        }
    });
    MetricsReport::from_records("nl2fol", &opts.dataset_name, opts.unknown_as, records, pipeline.settings())
}

/// Reads "Logical Fallacy" / "Valid" from the start of an end-to-end answer.
pub fn parse_baseline_answer(text: &str) -> Predicted {
    let t = text
        .trim_start()
        .trim_start_matches(['*', '"', '#', ' '])
        .to_ascii_lowercase();
    let t = t.strip_prefix("answer:").map(str::trim_start).unwrap_or(&t);
    let t = t.trim_start_matches(['*', '"', ' ']);
    if t.starts_with("logical fallacy") || t.starts_with("fallacy") {
        Predicted::Fallacy
    } else if t.starts_with("valid") {
        Predicted::Valid
    } else {
        Predicted::Inconclusive
    }
}

/// Single-prompt classification of every example, for comparison.
pub fn run_baseline(dataset: &[LabeledExample], pipeline: &Pipeline, opts: &EvalOptions) -> MetricsReport {
    let gateway: &Gateway = &pipeline.gateway;
    let records = par_map(dataset, opts.parallelism, |ex| {
        let answer = gateway.complete(
            TemplateId::EndToEnd,
            &bindings([("input", ex.text.clone())]),
            &CallLog::default(),
        );
        let (predicted, note) = match answer {
            Ok(a) => (parse_baseline_answer(&a), None),
            Err(e) => (Predicted::Inconclusive, Some(e.to_string())),
        };
        ExampleRecord {
            id: ex.id.clone(),
            gold: ex.label,
            predicted,
            counted_as: predicted.counted(opts.unknown_as),
            trace: None,
            note,
        }
    });
    MetricsReport::from_records("end_to_end", &opts.dataset_name, opts.unknown_as, records, pipeline.settings())
}

fn num(v: Option<f64>) -> String {
    v.map_or("null".into(), |x| format!("{x:.4}"))
}

fn delta(a: Option<f64>, b: Option<f64>) -> String {
    match (a, b) {
        (Some(a), Some(b)) => format!("{:+.4}", a - b),
        _ => "null".into(),
    }
}

/// Human-readable summary, with a comparison column when `other` is given.
pub fn render_table(report: &MetricsReport, other: Option<&MetricsReport>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dataset:      {}", report.dataset);
    let _ = writeln!(out, "examples:     {}", report.size);
    let _ = writeln!(out, "unknown-as:   {}", report.unknown_as);
    if let Some(seed) = report.seed {
        let _ = writeln!(out, "seed:         {seed}");
    }
    out.push('\n');
    let m = &report.metrics;
    let theirs = other.map(|o| o.metrics);
    let rows = [
        ("accuracy", m.accuracy, theirs.map(|t| t.accuracy)),
        ("precision", m.precision, theirs.map(|t| t.precision)),
        ("recall", m.recall, theirs.map(|t| t.recall)),
        ("f1", m.f1, theirs.map(|t| t.f1)),
    ];
    match other {
        Some(o) => {
            let _ = writeln!(out, "{:<14}{:>12}{:>12}{:>10}", "metric", report.method, o.method, "delta");
            for (name, a, b) in rows {
                let b = b.flatten();
                let _ = writeln!(out, "{:<14}{:>12}{:>12}{:>10}", name, num(a), num(b), delta(a, b));
            }
        }
        None => {
            let _ = writeln!(out, "{:<14}{:>12}", "metric", report.method);
            for (name, a, _) in rows {
                let _ = writeln!(out, "{:<14}{:>12}", name, num(a));
            }
        }
    }
    out.push('\n');
    let c = &report.counts;
    let count_rows: [(&str, u64, Option<u64>); 6] = [
        ("TP", c.tp, other.map(|o| o.counts.tp)),
        ("FP", c.fp, other.map(|o| o.counts.fp)),
        ("TN", c.tn, other.map(|o| o.counts.tn)),
        ("FN", c.fn_, other.map(|o| o.counts.fn_)),
        ("inconclusive", c.inconclusive, other.map(|o| o.counts.inconclusive)),
        ("dropped", c.dropped, other.map(|o| o.counts.dropped)),
    ];
    for (name, a, b) in count_rows {
        match b {
            Some(b) => {
                let d = a as i64 - b as i64;
                let _ = writeln!(out, "{:<14}{:>12}{:>12}{:>+10}", name, a, b, d);
            }
            None => {
                let _ = writeln!(out, "{:<14}{:>12}", name, a);
            }
        }
    }
    out
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn write_report(dir: &Path, report: &MetricsReport, other: Option<&MetricsReport>) -> io::Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let json_path = dir.join("report.json");
    let txt_path = dir.join("report.txt");
    let mut json = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    json.push('\n');
    fs::write(&json_path, json)?;
    fs::write(&txt_path, render_table(report, other))?;
    Ok((json_path, txt_path))
}

pub fn read_report(path: &Path) -> io::Result<MetricsReport> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snli_sentence() {
        assert_eq!(
            valid_sentence("Two dogs are fighting in a field.", "The two dogs are outside.", DEFAULT_CONNECTIVE),
            "Two dogs are fighting in a field. Thus, the two dogs are outside."
        );
    }

    #[test]
    fn policies() {
        assert_eq!(Predicted::Inconclusive.counted(UnknownAs::Fallacy), Some(Gold::Fallacy));
        assert_eq!(Predicted::Inconclusive.counted(UnknownAs::Valid), Some(Gold::Valid));
        assert_eq!(Predicted::Inconclusive.counted(UnknownAs::Drop), None);
        assert_eq!(Predicted::Valid.counted(UnknownAs::Drop), Some(Gold::Valid));
    }

    #[test]
    fn baseline_answers() {
        assert_eq!(parse_baseline_answer("Logical Fallacy. The argument..."), Predicted::Fallacy);
        assert_eq!(parse_baseline_answer("**Valid**"), Predicted::Valid);
        assert_eq!(parse_baseline_answer("Answer: Valid"), Predicted::Valid);
        assert_eq!(parse_baseline_answer("It depends"), Predicted::Inconclusive);
    }

    #[test]
    fn par_map_keeps_order() {
        let xs: Vec<u32> = (0..50).collect();
        assert_eq!(par_map(&xs, 7, |x| x * 2), xs.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(par_map(&Vec::<u32>::new(), 3, |x| *x).is_empty());
    }
}

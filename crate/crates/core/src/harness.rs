//! Runs every backend over every corpus file and classifies the outcome.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{invoke_parse, invoke_serialize, Backend, BackendDescriptor, BackendRegistry, Outcome};
use crate::corpus::{Corpus, CorpusEntry, Label};
use crate::model::{equivalent, JsonValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FineLabel {
    Equal,
    Equivalent,
    NonEquivalent,
    NullObject,
    ParseException,
    PrintException,
    Crash,
    UnexpectedObject,
}

impl FineLabel {
    pub const ALL: [FineLabel; 8] = [
        FineLabel::Equal,
        FineLabel::Equivalent,
        FineLabel::NonEquivalent,
        FineLabel::NullObject,
        FineLabel::ParseException,
        FineLabel::PrintException,
        FineLabel::Crash,
        FineLabel::UnexpectedObject,
    ];

    /// Labels a run over a file with `label` can produce, in table order.
    pub fn for_label(label: Label) -> &'static [FineLabel] {
        match label {
            Label::WellFormed => &[
                FineLabel::Equal,
                FineLabel::Equivalent,
                FineLabel::NonEquivalent,
                FineLabel::NullObject,
                FineLabel::ParseException,
                FineLabel::PrintException,
                FineLabel::Crash,
            ],
            Label::IllFormed => &[
                FineLabel::ParseException,
                FineLabel::NullObject,
                FineLabel::UnexpectedObject,
                FineLabel::Crash,
            ],
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            FineLabel::Equal => "EQ",
            FineLabel::Equivalent => "EV",
            FineLabel::NonEquivalent => "NE",
            FineLabel::NullObject => "NO",
            FineLabel::ParseException => "PA",
            FineLabel::PrintException => "PR",
            FineLabel::Crash => "CR",
            FineLabel::UnexpectedObject => "UO",
        }
    }
}

impl fmt::Display for FineLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for FineLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FineLabel::ALL
            .into_iter()
            .find(|l| l.code() == s)
            .ok_or_else(|| format!("unknown fine label {s:?}"))
    }
}

impl Serialize for FineLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for FineLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeClass {
    Conform,
    Silent,
    Error,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 3] = [OutcomeClass::Conform, OutcomeClass::Silent, OutcomeClass::Error];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeClass::Conform => "Conform",
            OutcomeClass::Silent => "Silent",
            OutcomeClass::Error => "Error",
        }
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coarse class of a fine label on a file with the given corpus label.
/// `None` for combinations the test sequences never produce.
pub fn classify(label: Label, fine: FineLabel) -> Option<OutcomeClass> {
    use FineLabel::*;
    use OutcomeClass::*;
    match (label, fine) {
        (Label::WellFormed, Equal | Equivalent) => Some(Conform),
        (Label::WellFormed, NonEquivalent) => Some(Silent),
        (Label::WellFormed, NullObject | ParseException | PrintException | Crash) => Some(Error),
        (Label::IllFormed, ParseException | NullObject) => Some(Conform),
        (Label::IllFormed, UnexpectedObject) => Some(Silent),
        (Label::IllFormed, Crash) => Some(Error),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Parse1,
    Serialize,
    Parse2,
}

/// Wall time per step in whole microseconds; absent for steps not reached.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTimings {
    pub parse1: Option<u64>,
    pub serialize: Option<u64>,
    pub parse2: Option<u64>,
}

fn micros(d: Duration) -> Option<u64> {
    Some(d.as_micros().try_into().unwrap_or(u64::MAX))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorRecord {
    pub backend_id: String,
    pub file_id: String,
    pub file_path: String,
    pub label: Label,
    pub fine: FineLabel,
    pub outcome: OutcomeClass,
    pub step: Step,
    pub elapsed_us: StepTimings,
    /// Checked-error kind or crash text behind PA, PR and CR.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl BehaviorRecord {
    fn new(backend: &dyn Backend, entry: &CorpusEntry, fine: FineLabel, step: Step, elapsed: StepTimings) -> Self {
        Self {
            backend_id: backend.descriptor().id.clone(),
            file_id: entry.id.clone(),
            file_path: entry.relative_path.clone(),
            label: entry.label,
            fine,
            outcome: classify(entry.label, fine).expect("test sequences only produce valid pairs"),
            step,
            elapsed_us: elapsed,
            detail: None,
        }
    }

    fn with_detail(mut self, detail: Option<String>) -> Self {
        self.detail = detail;
        self
    }

    /// Equality ignoring timings.
    pub fn same_behavior(&self, other: &Self) -> bool {
        Self {
            elapsed_us: StepTimings::default(),
            ..self.clone()
        } == Self {
            elapsed_us: StepTimings::default(),
            ..other.clone()
        }
    }
}

fn is_null_literal(text: &str) -> bool {
    text.trim_matches([' ', '\t', '\n', '\r']) == "null"
}

fn failure_detail<T>(outcome: &Outcome<T>) -> Option<String> {
    match outcome {
        Outcome::CheckedError(e) => Some(e.kind.clone()),
        Outcome::Crash(msg) => Some(msg.clone()),
        Outcome::Timeout => Some("timeout".into()),
        _ => None,
    }
}

/// Test sequence for a well-formed file: parse, serialize, compare the
/// text, and if it differs parse again and compare values.
pub fn assess_wellformed(backend: &Arc<dyn Backend>, entry: &CorpusEntry, budget: Option<Duration>) -> BehaviorRecord {
    let mut t = StepTimings::default();
    let record = |fine, step, t| BehaviorRecord::new(backend.as_ref(), entry, fine, step, t);

    let first = invoke_parse(backend, &entry.decoded, budget);
    t.parse1 = micros(first.elapsed);
    let detail = failure_detail(&first.outcome);
    let value = match first.outcome {
        Outcome::Value(v) => v,
        Outcome::NullObject if is_null_literal(&entry.decoded) => JsonValue::Null,
        Outcome::NullObject => return record(FineLabel::NullObject, Step::Parse1, t),
        Outcome::CheckedError(_) => return record(FineLabel::ParseException, Step::Parse1, t).with_detail(detail),
        Outcome::Crash(_) | Outcome::Timeout => return record(FineLabel::Crash, Step::Parse1, t).with_detail(detail),
    };

    let printed = invoke_serialize(backend, &value, budget);
    t.serialize = micros(printed.elapsed);
    let detail = failure_detail(&printed.outcome);
    let text = match printed.outcome {
        Outcome::Value(text) => text,
        Outcome::CheckedError(_) => return record(FineLabel::PrintException, Step::Serialize, t).with_detail(detail),
        Outcome::Crash(_) | Outcome::Timeout => return record(FineLabel::Crash, Step::Serialize, t).with_detail(detail),
        Outcome::NullObject => {
            return record(FineLabel::Crash, Step::Serialize, t).with_detail(Some("serializer returned nothing".into()))
        }
    };
    if text == entry.decoded {
        return record(FineLabel::Equal, Step::Serialize, t);
    }

    let second = invoke_parse(backend, &text, budget);
    t.parse2 = micros(second.elapsed);
    let detail = failure_detail(&second.outcome);
    let again = match second.outcome {
        Outcome::Value(v) => v,
        Outcome::NullObject => JsonValue::Null,
        // A failure to read back its own output sits in the same guarded
        // block as the serializer call.
        Outcome::CheckedError(_) => return record(FineLabel::PrintException, Step::Parse2, t).with_detail(detail),
        Outcome::Crash(_) | Outcome::Timeout => return record(FineLabel::Crash, Step::Parse2, t).with_detail(detail),
    };
    let fine = if equivalent(&value, &again) {
        FineLabel::Equivalent
    } else {
        FineLabel::NonEquivalent
    };
    record(fine, Step::Parse2, t)
}

/// Test sequence for an ill-formed file: parse only.
pub fn assess_illformed(backend: &Arc<dyn Backend>, entry: &CorpusEntry, budget: Option<Duration>) -> BehaviorRecord {
    let first = invoke_parse(backend, &entry.decoded, budget);
    let t = StepTimings {
        parse1: micros(first.elapsed),
        ..StepTimings::default()
    };
    let detail = failure_detail(&first.outcome);
    let fine = match first.outcome {
        Outcome::NullObject => FineLabel::NullObject,
        Outcome::CheckedError(_) => FineLabel::ParseException,
        Outcome::Value(_) => FineLabel::UnexpectedObject,
        Outcome::Crash(_) | Outcome::Timeout => FineLabel::Crash,
    };
    BehaviorRecord::new(backend.as_ref(), entry, fine, Step::Parse1, t).with_detail(detail)
}

/// Dispatches on the entry's label.
pub fn assess(backend: &Arc<dyn Backend>, entry: &CorpusEntry, budget: Option<Duration>) -> BehaviorRecord {
    match entry.label {
        Label::WellFormed => assess_wellformed(backend, entry, budget),
        Label::IllFormed => assess_illformed(backend, entry, budget),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Concurrent cells; 0 picks the number of available cores.
    pub workers: usize,
    pub budget: Option<Duration>,
    /// Seed the registry was built with, recorded in the report header.
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 0,
            budget: Some(crate::backend::DEFAULT_BUDGET),
            seed: crate::engine::DEFAULT_SHUFFLE_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub budget_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub registry: Vec<BackendDescriptor>,
    pub corpus_hash: String,
    pub corpus_entries: usize,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub header: ReportHeader,
    pub records: Vec<BehaviorRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("no backends to run")]
    NoBackends,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Stack size of harness worker threads, which hold and drop parsed values.
const WORKER_STACK_BYTES: usize = 64 * 1024 * 1024;

/// One record per (backend, entry), ordered by backend id then file id.
pub fn run_corpus(registry: &BackendRegistry, corpus: &Corpus, options: &RunOptions) -> Result<RunReport, HarnessError> {
    if registry.is_empty() {
        return Err(HarnessError::NoBackends);
    }
    if corpus.is_empty() {
        return Err(HarnessError::EmptyCorpus);
    }
    let backends: Vec<&Arc<dyn Backend>> = registry.iter().collect();
    let serial: HashMap<&str, Mutex<()>> = backends
        .iter()
        .filter(|b| b.is_serial())
        .map(|b| (b.descriptor().id.as_str(), Mutex::new(())))
        .collect();
    let cells: Vec<(usize, usize)> = (0..backends.len())
        .flat_map(|b| (0..corpus.len()).map(move |e| (b, e)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .stack_size(WORKER_STACK_BYTES)
        .thread_name(|i| format!("polyjson-harness-{i}"))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let mut records: Vec<BehaviorRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(b, e)| {
                let backend = backends[b];
                let entry = &corpus.entries()[e];
                let _queue = serial
                    .get(backend.descriptor().id.as_str())
                    .map(|m| m.lock().unwrap_or_else(|p| p.into_inner()));
                assess(backend, entry, options.budget)
            })
            .collect()
    });
    records.sort_by(|a, b| (&a.backend_id, &a.file_id).cmp(&(&b.backend_id, &b.file_id)));

    Ok(RunReport {
        header: ReportHeader {
            registry: registry.descriptors(),
            corpus_hash: corpus.hash(),
            corpus_entries: corpus.len(),
            config: RunConfig {
                seed: options.seed,
                workers: pool.current_num_threads(),
                budget_ms: options.budget.map(|b| b.as_micros() as u64),
            },
        },
        records,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("report line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: ReportHeader,
}

impl RunReport {
    /// Backend ids in registry order.
    pub fn backend_ids(&self) -> Vec<&str> {
        self.header.registry.iter().map(|d| d.id.as_str()).collect()
    }

    /// Records restricted to files with `label`.
    pub fn records_for(&self, label: Label) -> impl Iterator<Item = &BehaviorRecord> {
        self.records.iter().filter(move |r| r.label == label)
    }

    /// A copy keeping only records of files with `label`.
    pub fn restrict(&self, label: Label) -> RunReport {
        RunReport {
            header: self.header.clone(),
            records: self.records_for(label).cloned().collect(),
        }
    }

    /// Equality ignoring timings and the worker count.
    pub fn same_behavior(&self, other: &RunReport) -> bool {
        let strip = |h: &ReportHeader| ReportHeader {
            config: RunConfig { workers: 0, ..h.config.clone() },
            ..h.clone()
        };
        strip(&self.header) == strip(&other.header)
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| a.same_behavior(b))
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        let header = HeaderLine {
            header: self.header.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<RunReport, ReportError> {
        let mut lines = input.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(l) if l.trim().is_empty()));
        let bad = |line: usize, e: serde_json::Error| ReportError::Format {
            line: line + 1,
            message: e.to_string(),
        };
        let (n, first) = lines.next().ok_or(ReportError::Format {
            line: 1,
            message: "missing header record".into(),
        })?;
        let header: HeaderLine = serde_json::from_str(&first?).map_err(|e| bad(n, e))?;
        let mut records = Vec::new();
        for (n, line) in lines {
            records.push(serde_json::from_str(&line?).map_err(|e| bad(n, e))?);
        }
        Ok(RunReport {
            header: header.header,
            records,
        })
    }
}

//! Labeled input files: decoding checks, manifests, content-hash
//! deduplication and the bundled fixture set.

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    WellFormed,
    IllFormed,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::WellFormed, Label::IllFormed];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::WellFormed => "well-formed",
            Label::IllFormed => "ill-formed",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "well-formed" => Ok(Label::WellFormed),
            "ill-formed" => Ok(Label::IllFormed),
            other => Err(format!("unknown label {other:?}; expected well-formed or ill-formed")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodingError {
    #[error("not UTF-8 (invalid byte at {utf8_at}) and not UTF-16 ({utf16})")]
    Undecodable { utf8_at: usize, utf16: String },
}

/// Decodes `bytes` as strict UTF-8, falling back to UTF-16.
///
/// A UTF-16 byte order mark selects the byte order and is stripped;
/// without one the input is read big-endian.
pub fn decode_check(bytes: &[u8]) -> Result<String, EncodingError> {
    let utf8_err = match std::str::from_utf8(bytes) {
        Ok(text) => return Ok(text.to_owned()),
        Err(e) => e,
    };
    decode_utf16(bytes).map_err(|utf16| EncodingError::Undecodable {
        utf8_at: utf8_err.valid_up_to(),
        utf16,
    })
}

fn decode_utf16(bytes: &[u8]) -> Result<String, String> {
    if !bytes.len().is_multiple_of(2) {
        return Err(format!("odd length {}", bytes.len()));
    }
    let (little, body) = match bytes {
        [0xFF, 0xFE, rest @ ..] => (true, rest),
        [0xFE, 0xFF, rest @ ..] => (false, rest),
        _ => (false, bytes),
    };
    let units: Vec<u16> = body
        .chunks_exact(2)
        .map(|c| {
            let pair = [c[0], c[1]];
            if little {
                u16::from_le_bytes(pair)
            } else {
                u16::from_be_bytes(pair)
            }
        })
        .collect();
    String::from_utf16(&units).map_err(|_| "unpaired surrogate".to_owned())
}

/// Hex SHA-256 of `bytes`; the identity of a corpus entry.
pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub id: String,
    pub source: String,
    pub relative_path: String,
    pub bytes: Vec<u8>,
    pub label: Label,
    pub decoded: String,
}

impl CorpusEntry {
    pub fn new(
        source: impl Into<String>,
        relative_path: impl Into<String>,
        bytes: Vec<u8>,
        label: Label,
    ) -> Result<Self, EncodingError> {
        let decoded = decode_check(&bytes)?;
        Ok(Self {
            id: content_id(&bytes),
            source: source.into(),
            relative_path: relative_path.into(),
            bytes,
            label,
            decoded,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub well_formed: usize,
    pub ill_formed: usize,
}

impl LabelCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::WellFormed => self.well_formed,
            Label::IllFormed => self.ill_formed,
        }
    }
}

/// Deduplicated entries in manifest order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
}

impl Corpus {
    /// Keeps the first entry for each id and returns the ones dropped.
    pub fn from_entries(entries: impl IntoIterator<Item = CorpusEntry>) -> (Self, Vec<CorpusEntry>) {
        let mut corpus = Corpus::default();
        let mut dropped = Vec::new();
        for e in entries {
            if corpus.get(&e.id).is_some() {
                dropped.push(e);
            } else {
                corpus.entries.push(e);
            }
        }
        (corpus, dropped)
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&CorpusEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for e in &self.entries {
            match e.label {
                Label::WellFormed => c.well_formed += 1,
                Label::IllFormed => c.ill_formed += 1,
            }
        }
        c
    }

    pub fn filter_label(&self, label: Label) -> Corpus {
        Corpus {
            entries: self.entries.iter().filter(|e| e.label == label).cloned().collect(),
        }
    }

    /// Digest over the ordered ids and labels, recorded in run reports.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.id.as_bytes());
            h.update(b" ");
            h.update(e.label.as_str().as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub path: String,
    pub source: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("manifest line {line}: {message}")]
    Record { line: usize, message: String },
}

/// Line-delimited records; relative paths resolve against `base_dir`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().map(Path::to_owned).unwrap_or_default();
        Self::parse(&text, base)
    }

    /// Blank lines are skipped; every other line must be one record.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ManifestError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(line).map_err(|e| ManifestError::Record {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(record);
        }
        Ok(Self {
            base_dir: base_dir.into(),
            records,
        })
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records always serialize") + "\n")
            .collect()
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        self.base_dir.join(&record.path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Duplicate {
    pub path: String,
    pub id: String,
    pub kept: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    Unreadable,
    Undecodable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestFailure {
    pub path: String,
    pub kind: FailureKind,
    pub reason: String,
}

/// Result of ingesting a manifest: the corpus plus what was left out.
#[derive(Debug, Clone, Default)]
pub struct Ingest {
    pub corpus: Corpus,
    pub duplicates: Vec<Duplicate>,
    pub failures: Vec<IngestFailure>,
}

pub fn ingest(manifest: &Manifest) -> Ingest {
    ingest_with(manifest, |record| std::fs::read(manifest.resolve(record)))
}

/// Like [`ingest`] with a custom byte source.
pub fn ingest_with(manifest: &Manifest, mut load: impl FnMut(&ManifestRecord) -> io::Result<Vec<u8>>) -> Ingest {
    let mut out = Ingest::default();
    let mut kept: HashMap<String, String> = HashMap::new();
    let mut entries = Vec::new();
    for record in &manifest.records {
        let bytes = match load(record) {
            Ok(b) => b,
            Err(e) => {
                out.failures.push(IngestFailure {
                    path: record.path.clone(),
                    kind: FailureKind::Unreadable,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let entry = match CorpusEntry::new(&record.source, &record.path, bytes, record.label) {
            Ok(e) => e,
            Err(e) => {
                out.failures.push(IngestFailure {
                    path: record.path.clone(),
                    kind: FailureKind::Undecodable,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if let Some(first) = kept.get(&entry.id) {
            out.duplicates.push(Duplicate {
                path: record.path.clone(),
                id: entry.id.clone(),
                kept: first.clone(),
            });
            continue;
        }
        kept.insert(entry.id.clone(), record.path.clone());
        entries.push(entry);
    }
    out.corpus = Corpus::from_entries(entries).0;
    out
}

macro_rules! fixtures {
    ($($path:literal),* $(,)?) => {
        &[$(($path, include_bytes!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/", $path)) as &[u8])),*]
    };
}

const BUNDLED_FILES: &[(&str, &[u8])] = fixtures![
    "well-formed/laureates_excerpt.json",
    "well-formed/negative_zero.json",
    "well-formed/exponent_upper.json",
    "well-formed/exponent_plus.json",
    "well-formed/invisible_plus.json",
    "well-formed/null_member.json",
    "well-formed/big_integer.json",
    "well-formed/long_decimal.json",
    "well-formed/duplicate_key.json",
    "well-formed/lonely_number.json",
    "well-formed/lonely_null.json",
    "well-formed/lonely_string.json",
    "well-formed/nested_32.json",
    "well-formed/key_order_probe.json",
    "ill-formed/trailing_comma.json",
    "ill-formed/hex_number.json",
    "ill-formed/invalid_escape.json",
    "ill-formed/unquoted_key.json",
    "ill-formed/deep_nesting_1000.json",
    "ill-formed/block_comment.json",
    "ill-formed/object_trailing_comma.json",
    "ill-formed/truncated_array.json",
    "ill-formed/leading_zero.json",
    "ill-formed/extra_close.json",
];

const BUNDLED_MANIFEST: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/fixtures.manifest"));

/// Directory holding the fixture files in a source checkout.
pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// The fixture manifest compiled into the crate.
pub fn bundled_manifest() -> Manifest {
    Manifest::parse(BUNDLED_MANIFEST, fixtures_dir()).expect("bundled manifest is valid")
}

/// The fixture corpus compiled into the crate; needs no files at run time.
pub fn bundled_fixtures() -> Corpus {
    let manifest = bundled_manifest();
    let ingested = ingest_with(&manifest, |record| {
        BUNDLED_FILES
            .iter()
            .find(|(p, _)| *p == record.path)
            .map(|(_, bytes)| bytes.to_vec())
            .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, record.path.clone()))
    });
    assert!(
        ingested.failures.is_empty() && ingested.duplicates.is_empty(),
        "bundled fixtures are consistent"
    );
    ingested.corpus
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utf16_oracle(units: impl Iterator<Item = u16>) -> String {
        char::decode_utf16(units).map(|c| c.unwrap()).collect()
    }

    #[test]
    fn decoding() {
        assert_eq!(decode_check(b"abc").unwrap(), "abc");
        assert!(decode_check(&[0xFF]).is_err());
        let le = [0xFF, 0xFE, 0x61, 0x00];
        assert_eq!(decode_check(&le).unwrap(), "a");
        assert_eq!(
            decode_check(&le).unwrap(),
            utf16_oracle(le[2..].chunks(2).map(|c| u16::from_le_bytes([c[0], c[1]])))
        );
        let be = [0xFE, 0xFF, 0x00, 0x5B, 0xD8, 0x3D, 0xDE, 0x00, 0x00, 0x5D];
        assert_eq!(decode_check(&be).unwrap(), "[\u{1F600}]");
        assert_eq!(decode_check(&[0x00, 0x5B, 0x00, 0x5D]).unwrap(), "\0[\0]");
        assert_eq!(decode_check(&[0x80, 0x5B]).unwrap(), "\u{805B}");
        assert!(decode_check(&[0xFF, 0xFE, 0x00, 0xD8]).is_err());
        assert!(decode_check(&[0xC3, 0x28, 0x41]).is_err());
    }

    #[test]
    fn manifest_parsing() {
        let m = Manifest::parse(
            "{\"path\":\"a.json\",\"source\":\"s\",\"label\":\"well-formed\"}\n\n",
            "/base",
        )
        .unwrap();
        assert_eq!(m.records.len(), 1);
        assert_eq!(m.resolve(&m.records[0]), Path::new("/base/a.json"));
        assert_eq!(Manifest::parse(&m.to_jsonl(), "/base").unwrap(), m);
        for bad in [
            "{\"path\":\"a\",\"source\":\"s\",\"label\":\"pass\"}",
            "{\"path\":\"a\",\"source\":\"s\"}",
            "{\"path\":\"a\",\"source\":\"s\",\"label\":\"ill-formed\",\"x\":1}",
            "not json",
        ] {
            assert!(matches!(Manifest::parse(bad, "."), Err(ManifestError::Record { line: 1, .. })), "{bad}");
        }
        assert!(Manifest::parse("", ".").unwrap().records.is_empty());
    }

    #[test]
    fn dedup_and_failures() {
        let m = Manifest::parse(
            [
                r#"{"path":"one","source":"s","label":"well-formed"}"#,
                r#"{"path":"two","source":"t","label":"ill-formed"}"#,
                r#"{"path":"missing","source":"s","label":"well-formed"}"#,
                r#"{"path":"bad","source":"s","label":"well-formed"}"#,
                r#"{"path":"three","source":"s","label":"well-formed"}"#,
            ]
            .join("\n")
            .as_str(),
            ".",
        )
        .unwrap();
        let r = ingest_with(&m, |rec| match rec.path.as_str() {
            "one" | "two" => Ok(b"[1]".to_vec()),
            "three" => Ok(b"[2]".to_vec()),
            "bad" => Ok(vec![0xFF]),
            _ => Err(io::Error::new(io::ErrorKind::NotFound, "gone")),
        });
        assert_eq!(r.corpus.len(), 2);
        assert_eq!(r.corpus.entries()[0].relative_path, "one");
        assert_eq!(r.corpus.entries()[0].label, Label::WellFormed);
        assert_eq!(r.duplicates.len(), 1);
        assert_eq!(r.duplicates[0].kept, "one");
        let kinds: Vec<_> = r.failures.iter().map(|f| (f.path.as_str(), f.kind)).collect();
        assert_eq!(kinds, [("missing", FailureKind::Unreadable), ("bad", FailureKind::Undecodable)]);
        assert!(ingest(&Manifest::parse("", ".").unwrap()).corpus.is_empty());
    }

    #[test]
    fn bundled_set() {
        let c = bundled_fixtures();
        assert_eq!(c.counts(), LabelCounts { well_formed: 14, ill_formed: 10 });
        let from_disk = ingest(&Manifest::load(&fixtures_dir().join("fixtures.manifest")).unwrap());
        assert!(from_disk.failures.is_empty() && from_disk.duplicates.is_empty());
        assert_eq!(from_disk.corpus, c);
        assert_eq!(c.filter_label(Label::IllFormed).len(), 10);
        assert_eq!(c.hash(), from_disk.corpus.hash());
        assert_ne!(c.hash(), c.filter_label(Label::WellFormed).hash());
        let manifest_paths: Vec<_> = bundled_manifest().records.into_iter().map(|r| r.path).collect();
        let file_paths: Vec<_> = BUNDLED_FILES.iter().map(|(p, _)| p.to_string()).collect();
        assert_eq!(manifest_paths, file_paths);
        for e in c.entries() {
            assert_eq!(e.id, content_id(&e.bytes));
            assert_eq!(e.decoded.as_bytes(), e.bytes.as_slice());
        }
    }
}

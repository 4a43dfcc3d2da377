//! Aggregate views of a run report: outcome tables, pairwise behavioral
//! distances and consensus histograms.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::corpus::Label;
use crate::harness::{BehaviorRecord, FineLabel, OutcomeClass, RunReport};

pub use crate::stats::{welch_t_test, StatsError, WelchResult};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("backend {0:?} has no records")]
    UnknownBackend(String),
    #[error("backends {0:?} and {1:?} cover different files")]
    CoverageMismatch(String, String),
    #[error("backend {backend:?} has more than one record for file {file}")]
    RepeatedCell { backend: String, file: String },
    #[error("no records for {0} files")]
    Empty(Label),
}

/// What counts as "behaving the same" on a file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Granularity {
    #[default]
    Class,
    Fine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Behavior {
    Class(OutcomeClass),
    Fine(FineLabel),
}

fn behavior(r: &BehaviorRecord, g: Granularity) -> Behavior {
    match g {
        Granularity::Class => Behavior::Class(r.outcome),
        Granularity::Fine => Behavior::Fine(r.fine),
    }
}

/// Count of differing files over corpus size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Distance {
    pub differing: usize,
    pub total: usize,
}

impl Distance {
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.differing as f64 / self.total as f64
        }
    }
}

/// Per backend, file id → record; rejects repeated cells.
fn index<'a>(
    records: impl Iterator<Item = &'a BehaviorRecord>,
) -> Result<HashMap<&'a str, BTreeMap<&'a str, &'a BehaviorRecord>>, AnalysisError> {
    let mut by_backend: HashMap<&str, BTreeMap<&str, &BehaviorRecord>> = HashMap::new();
    for r in records {
        if by_backend
            .entry(&r.backend_id)
            .or_default()
            .insert(&r.file_id, r)
            .is_some()
        {
            return Err(AnalysisError::RepeatedCell {
                backend: r.backend_id.clone(),
                file: r.file_id.clone(),
            });
        }
    }
    Ok(by_backend)
}

fn distance_between(
    a_id: &str,
    a: &BTreeMap<&str, &BehaviorRecord>,
    b_id: &str,
    b: &BTreeMap<&str, &BehaviorRecord>,
    g: Granularity,
) -> Result<Distance, AnalysisError> {
    if a.len() != b.len() || a.keys().ne(b.keys()) {
        return Err(AnalysisError::CoverageMismatch(a_id.to_owned(), b_id.to_owned()));
    }
    let differing = a
        .values()
        .zip(b.values())
        .filter(|(x, y)| behavior(x, g) != behavior(y, g))
        .count();
    Ok(Distance {
        differing,
        total: a.len(),
    })
}

/// Fraction of files on which `l1` and `l2` behave differently, over all
/// records in `report`.
pub fn behavioral_distance(l1: &str, l2: &str, report: &RunReport, g: Granularity) -> Result<Distance, AnalysisError> {
    let idx = index(report.records.iter())?;
    let a = idx.get(l1).ok_or_else(|| AnalysisError::UnknownBackend(l1.to_owned()))?;
    let b = idx.get(l2).ok_or_else(|| AnalysisError::UnknownBackend(l2.to_owned()))?;
    distance_between(l1, a, l2, b, g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceSummary {
    pub pairs: usize,
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl DistanceSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        Some(Self {
            pairs: n,
            min: v[0],
            median,
            mean: v.iter().sum::<f64>() / n as f64,
            max: v[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    pub differing: Vec<Vec<usize>>,
    pub files: usize,
}

impl DistanceMatrix {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        Distance {
            differing: self.differing[i][j],
            total: self.files,
        }
        .ratio()
    }

    pub fn values(&self) -> Vec<Vec<f64>> {
        (0..self.ids.len())
            .map(|i| (0..self.ids.len()).map(|j| self.value(i, j)).collect())
            .collect()
    }

    /// Distances of the distinct unordered pairs, row-major.
    pub fn pair_distances(&self) -> Vec<f64> {
        let n = self.ids.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.value(i, j))
            .collect()
    }

    pub fn summary(&self) -> Option<DistanceSummary> {
        DistanceSummary::of(&self.pair_distances())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("backend");
        for id in &self.ids {
            out.push(',');
            out.push_str(&csv_field(id));
        }
        out.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(&csv_field(id));
            for j in 0..self.ids.len() {
                let _ = write!(out, ",{:.6}", self.value(i, j));
            }
            out.push('\n');
        }
        out
    }
}

impl DistanceSummary {
    pub fn to_csv(&self) -> String {
        format!(
            "pairs,min,median,mean,max\n{},{:.6},{:.6},{:.6},{:.6}\n",
            self.pairs, self.min, self.median, self.mean, self.max
        )
    }
}

/// Pairwise distances between every backend in the report header,
/// restricted to files with `label`.
pub fn distance_matrix(report: &RunReport, label: Label, g: Granularity) -> Result<DistanceMatrix, AnalysisError> {
    let idx = index(report.records_for(label))?;
    if idx.is_empty() {
        return Err(AnalysisError::Empty(label));
    }
    let ids: Vec<String> = report
        .backend_ids()
        .into_iter()
        .filter(|id| idx.contains_key(id))
        .map(str::to_owned)
        .collect();
    if let Some(extra) = idx.keys().find(|id| !ids.iter().any(|i| i == *id)) {
        return Err(AnalysisError::UnknownBackend((*extra).to_owned()));
    }
    let n = ids.len();
    let mut differing = vec![vec![0; n]; n];
    let files = idx[ids[0].as_str()].len();
    for i in 0..n {
        for j in i + 1..n {
            let d = distance_between(&ids[i], &idx[ids[i].as_str()], &ids[j], &idx[ids[j].as_str()], g)?;
            differing[i][j] = d.differing;
            differing[j][i] = d.differing;
        }
    }
    Ok(DistanceMatrix { ids, differing, files })
}

/// How the backends split on one file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePartition {
    pub file_id: String,
    pub parts: BTreeMap<OutcomeClass, Vec<String>>,
}

impl FilePartition {
    pub fn sizes(&self) -> impl Iterator<Item = (OutcomeClass, usize)> + '_ {
        self.parts.iter().map(|(c, ids)| (*c, ids.len()))
    }
}

/// Per file, the backends grouped by outcome class. Every backend in the
/// report must have a record for every file of `label`.
pub fn partitions(report: &RunReport, label: Label) -> Result<Vec<FilePartition>, AnalysisError> {
    let idx = index(report.records_for(label))?;
    if idx.is_empty() {
        return Err(AnalysisError::Empty(label));
    }
    let ids = report.backend_ids();
    let files: BTreeSet<&str> = idx.values().flat_map(|m| m.keys().copied()).collect();
    for id in &ids {
        let covered = idx.get(id).ok_or_else(|| AnalysisError::UnknownBackend((*id).to_owned()))?;
        if covered.len() != files.len() {
            return Err(AnalysisError::CoverageMismatch((*id).to_owned(), ids[0].to_owned()));
        }
    }
    Ok(files
        .into_iter()
        .map(|file| {
            let mut parts: BTreeMap<OutcomeClass, Vec<String>> = BTreeMap::new();
            for id in &ids {
                parts.entry(idx[id][file].outcome).or_default().push((*id).to_owned());
            }
            FilePartition {
                file_id: file.to_owned(),
                parts,
            }
        })
        .collect())
}

/// Number of files for which exactly `k` backends agreed on each class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusHistogram {
    pub backends: usize,
    pub files: usize,
    pub counts: BTreeMap<(usize, OutcomeClass), usize>,
}

impl ConsensusHistogram {
    pub fn count(&self, k: usize, class: OutcomeClass) -> usize {
        self.counts.get(&(k, class)).copied().unwrap_or(0)
    }

    pub fn share(&self, k: usize, class: OutcomeClass) -> f64 {
        self.count(k, class) as f64 / self.files as f64
    }

    /// Every `(k, class, share)` for `k` in `1..=backends`.
    pub fn rows(&self) -> Vec<(usize, OutcomeClass, f64)> {
        (1..=self.backends)
            .flat_map(|k| OutcomeClass::ALL.into_iter().map(move |c| (k, c)))
            .map(|(k, c)| (k, c, self.share(k, c)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,class,files,share\n");
        for (k, c, share) in self.rows() {
            let _ = writeln!(out, "{k},{c},{},{share:.6}", self.count(k, c));
        }
        out
    }
}

pub fn consensus_distribution(report: &RunReport, label: Label) -> Result<ConsensusHistogram, AnalysisError> {
    let parts = partitions(report, label)?;
    let mut counts = BTreeMap::new();
    for p in &parts {
        for (class, size) in p.sizes() {
            *counts.entry((size, class)).or_insert(0) += 1;
        }
    }
    Ok(ConsensusHistogram {
        backends: report.backend_ids().len(),
        files: parts.len(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub name: String,
    pub fine: BTreeMap<FineLabel, usize>,
    pub classes: BTreeMap<OutcomeClass, usize>,
    pub total: usize,
}

impl TableRow {
    pub fn fine_count(&self, f: FineLabel) -> usize {
        self.fine.get(&f).copied().unwrap_or(0)
    }

    pub fn class_count(&self, c: OutcomeClass) -> usize {
        self.classes.get(&c).copied().unwrap_or(0)
    }

    pub fn percent(&self, c: OutcomeClass) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.class_count(c) as f64 / self.total as f64
        }
    }
}

/// Outcome counts per backend plus a population row counting, per
/// column, the files where at least one backend shows that outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeTable {
    pub label: Label,
    pub rows: Vec<TableRow>,
    pub population: TableRow,
}

pub const POPULATION_ROW: &str = "Population";

pub fn outcome_table(report: &RunReport, label: Label) -> OutcomeTable {
    let mut rows: Vec<TableRow> = report
        .backend_ids()
        .into_iter()
        .map(|id| TableRow {
            name: id.to_owned(),
            fine: BTreeMap::new(),
            classes: BTreeMap::new(),
            total: 0,
        })
        .collect();
    let mut fine_files: BTreeMap<FineLabel, BTreeSet<&str>> = BTreeMap::new();
    let mut class_files: BTreeMap<OutcomeClass, BTreeSet<&str>> = BTreeMap::new();
    let mut files = BTreeSet::new();
    for r in report.records_for(label) {
        let Some(row) = rows.iter_mut().find(|row| row.name == r.backend_id) else {
            continue;
        };
        *row.fine.entry(r.fine).or_insert(0) += 1;
        *row.classes.entry(r.outcome).or_insert(0) += 1;
        row.total += 1;
        fine_files.entry(r.fine).or_default().insert(&r.file_id);
        class_files.entry(r.outcome).or_default().insert(&r.file_id);
        files.insert(r.file_id.as_str());
    }
    let population = TableRow {
        name: POPULATION_ROW.to_owned(),
        fine: fine_files.into_iter().map(|(f, s)| (f, s.len())).collect(),
        classes: class_files.into_iter().map(|(c, s)| (c, s.len())).collect(),
        total: files.len(),
    };
    OutcomeTable {
        label,
        rows,
        population,
    }
}

impl OutcomeTable {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["backend".to_owned()];
        h.extend(FineLabel::for_label(self.label).iter().map(|f| f.code().to_owned()));
        for c in OutcomeClass::ALL {
            h.push(c.as_str().to_owned());
            h.push(format!("{c} %"));
        }
        h.push("total".into());
        h
    }

    fn cells(&self, row: &TableRow) -> Vec<String> {
        let mut cells = vec![row.name.clone()];
        cells.extend(FineLabel::for_label(self.label).iter().map(|f| row.fine_count(*f).to_string()));
        for c in OutcomeClass::ALL {
            cells.push(row.class_count(c).to_string());
            cells.push(format!("{:.1}", row.percent(c)));
        }
        cells.push(row.total.to_string());
        cells
    }

    fn grid(&self) -> Vec<Vec<String>> {
        let mut g = vec![self.header()];
        g.extend(self.rows.iter().map(|r| self.cells(r)));
        g.push(self.cells(&self.population));
        g
    }

    pub fn to_csv(&self) -> String {
        self.grid()
            .iter()
            .map(|row| row.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",") + "\n")
            .collect()
    }

    /// Columns padded to equal width; names left-aligned, numbers right.
    pub fn to_text(&self) -> String {
        let grid = self.grid();
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|i| grid.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendDescriptor, BackendKind};
    use crate::harness::{classify, ReportHeader, RunConfig, Step, StepTimings};

    fn report(rows: &[(&str, &[FineLabel])], label: Label) -> RunReport {
        let mut records = Vec::new();
        for (id, fines) in rows {
            for (i, fine) in fines.iter().enumerate() {
                records.push(BehaviorRecord {
                    backend_id: (*id).into(),
                    file_id: format!("f{i:03}"),
                    file_path: format!("f{i:03}.json"),
                    label,
                    fine: *fine,
                    outcome: classify(label, *fine).unwrap(),
                    step: Step::Parse1,
                    elapsed_us: StepTimings::default(),
                    detail: None,
                });
            }
        }
        RunReport {
            header: ReportHeader {
                registry: rows
                    .iter()
                    .map(|(id, _)| BackendDescriptor {
                        id: (*id).into(),
                        kind: BackendKind::External { adapter: (*id).into() },
                        version: "0".into(),
                    })
                    .collect(),
                corpus_hash: String::new(),
                corpus_entries: rows[0].1.len(),
                config: RunConfig {
                    seed: 0,
                    workers: 1,
                    budget_ms: None,
                },
            },
            records,
        }
    }

    const EQ: FineLabel = FineLabel::Equal;
    const EV: FineLabel = FineLabel::Equivalent;
    const NE: FineLabel = FineLabel::NonEquivalent;
    const NO: FineLabel = FineLabel::NullObject;
    const PA: FineLabel = FineLabel::ParseException;
    const CR: FineLabel = FineLabel::Crash;
    const UO: FineLabel = FineLabel::UnexpectedObject;

    #[test]
    fn distances() {
        let r = report(&[("a", &[PA, PA, UO, CR]), ("b", &[PA, NO, CR, CR])], Label::IllFormed);
        let d = behavioral_distance("a", "b", &r, Granularity::Class).unwrap();
        assert_eq!(d, Distance { differing: 1, total: 4 });
        assert_eq!(d.ratio(), 0.25);
        let fine = behavioral_distance("a", "b", &r, Granularity::Fine).unwrap();
        assert_eq!(fine.differing, 2);
        assert_eq!(behavioral_distance("a", "a", &r, Granularity::Class).unwrap().differing, 0);
        assert!(matches!(
            behavioral_distance("a", "zz", &r, Granularity::Class),
            Err(AnalysisError::UnknownBackend(_))
        ));
        let m = distance_matrix(&r, Label::IllFormed, Granularity::Class).unwrap();
        assert_eq!(m.values(), vec![vec![0.0, 0.25], vec![0.25, 0.0]]);
        assert_eq!(m.to_csv(), "backend,a,b\na,0.000000,0.250000\nb,0.250000,0.000000\n");
        assert!(distance_matrix(&r, Label::WellFormed, Granularity::Class).is_err());
    }

    #[test]
    fn coverage_must_match() {
        let mut r = report(&[("a", &[EQ, EQ]), ("b", &[EQ, EQ])], Label::WellFormed);
        r.records.pop();
        assert!(matches!(
            behavioral_distance("a", "b", &r, Granularity::Class),
            Err(AnalysisError::CoverageMismatch(..))
        ));
        let dup = r.records[0].clone();
        r.records.push(dup);
        assert!(matches!(
            behavioral_distance("a", "b", &r, Granularity::Class),
            Err(AnalysisError::RepeatedCell { .. })
        ));
    }

    #[test]
    fn single_backend_matrix() {
        let r = report(&[("only", &[EQ, NE])], Label::WellFormed);
        let m = distance_matrix(&r, Label::WellFormed, Granularity::Class).unwrap();
        assert_eq!(m.values(), vec![vec![0.0]]);
        assert!(m.summary().is_none());
    }

    #[test]
    fn summary_statistics() {
        let s = DistanceSummary::of(&[0.4, 0.1, 0.3, 0.2]).unwrap();
        assert_eq!((s.min, s.max, s.pairs), (0.1, 0.4, 4));
        assert!((s.median - 0.25).abs() < 1e-15);
        assert!((s.mean - 0.25).abs() < 1e-15);
        assert_eq!(DistanceSummary::of(&[0.7]).unwrap().median, 0.7);
    }

    #[test]
    fn consensus_nineteen_and_one() {
        let mut rows: Vec<(String, Vec<FineLabel>)> = (0..19).map(|i| (format!("lib{i:02}"), vec![EV])).collect();
        rows.push(("odd".into(), vec![PA]));
        let borrowed: Vec<(&str, &[FineLabel])> = rows.iter().map(|(a, b)| (a.as_str(), b.as_slice())).collect();
        let r = report(&borrowed, Label::WellFormed);
        let h = consensus_distribution(&r, Label::WellFormed).unwrap();
        assert_eq!(h.count(19, OutcomeClass::Conform), 1);
        assert_eq!(h.count(1, OutcomeClass::Error), 1);
        assert_eq!(h.counts.len(), 2);
        assert_eq!(h.rows().len(), 60);
        let p = partitions(&r, Label::WellFormed).unwrap();
        assert_eq!(p[0].sizes().map(|(_, n)| n).sum::<usize>(), 20);
    }

    #[test]
    fn consensus_unanimous() {
        let r = report(&[("a", &[EQ, NE, PA]), ("b", &[EQ, NE, PA]), ("c", &[EQ, NE, PA])], Label::WellFormed);
        let h = consensus_distribution(&r, Label::WellFormed).unwrap();
        let at_n: f64 = OutcomeClass::ALL.iter().map(|c| h.share(3, *c)).sum();
        assert_eq!(at_n, 1.0);
        assert!(h.to_csv().starts_with("k,class,files,share\n1,Conform,0,0.000000\n"));
    }

    #[test]
    fn tables() {
        let r = report(&[("a", &[PA, CR, PA]), ("b", &[CR, PA, PA])], Label::IllFormed);
        let t = outcome_table(&r, Label::IllFormed);
        assert_eq!(t.rows[0].class_count(OutcomeClass::Error), 1);
        assert_eq!(t.population.class_count(OutcomeClass::Error), 2);
        assert_eq!(t.population.class_count(OutcomeClass::Conform), 3);
        assert_eq!(t.population.total, 3);
        for row in &t.rows {
            let sum: f64 = OutcomeClass::ALL.iter().map(|c| row.percent(*c)).sum();
            assert!((sum - 100.0).abs() < 1e-9);
        }
        let csv = t.to_csv();
        assert_eq!(
            csv.lines().next().unwrap(),
            "backend,PA,NO,UO,CR,Conform,Conform %,Silent,Silent %,Error,Error %,total"
        );
        assert_eq!(csv.lines().nth(1).unwrap(), "a,2,0,0,1,2,66.7,0,0.0,1,33.3,3");
        assert!(t.to_text().lines().last().unwrap().starts_with("Population"));
        let widths: BTreeSet<_> = t.to_text().lines().map(|l| l.len()).collect();
        assert_eq!(widths.len(), 1);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}

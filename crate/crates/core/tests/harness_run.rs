use polyjson::backend::{AdapterCatalog, BackendRegistry};
use polyjson::corpus::{bundled_fixtures, Corpus, CorpusEntry, Label};
use polyjson::harness::{run_corpus, FineLabel, OutcomeClass, RunOptions, RunReport};

fn options(workers: usize) -> RunOptions {
    RunOptions {
        workers,
        ..RunOptions::default()
    }
}

#[test]
fn full_run_is_total_and_deterministic() {
    let registry = BackendRegistry::builtin();
    let corpus = bundled_fixtures();
    let a = run_corpus(&registry, &corpus, &options(0)).unwrap();
    let b = run_corpus(&registry, &corpus, &options(1)).unwrap();
    assert_eq!(a.records.len(), registry.len() * corpus.len());
    assert!(a.same_behavior(&b));

    let crashes: Vec<_> = a.records.iter().filter(|r| r.fine == FineLabel::Crash).collect();
    assert_eq!(crashes.len(), 1);
    assert_eq!(crashes[0].backend_id, "crasher-deep");
    assert_eq!(crashes[0].file_path, "ill-formed/deep_nesting_1000.json");

    let mut text = Vec::new();
    a.write_jsonl(&mut text).unwrap();
    let back = RunReport::read_jsonl(&text[..]).unwrap();
    assert_eq!(back, a);
    assert_eq!(back.header.config.seed, 42);
}

#[test]
fn two_backends_three_files() {
    let registry = BackendRegistry::builtin_subset(&["strict", "trailing-comma"], 42).unwrap();
    let entries = ["[1]", "[1,]", "{\"a\":1}"].into_iter().enumerate().map(|(i, t)| {
        let label = if t.contains(",]") { Label::IllFormed } else { Label::WellFormed };
        CorpusEntry::new("t", format!("{i}.json"), t.as_bytes().to_vec(), label).unwrap()
    });
    let (corpus, dropped) = Corpus::from_entries(entries);
    assert!(dropped.is_empty());
    let r = run_corpus(&registry, &corpus, &options(2)).unwrap();
    assert_eq!(r.records.len(), 6);
    let trailing = r.records.iter().find(|x| x.backend_id == "trailing-comma" && x.file_path == "1.json").unwrap();
    assert_eq!((trailing.fine, trailing.outcome), (FineLabel::UnexpectedObject, OutcomeClass::Silent));
}

#[test]
fn external_adapter_runs_in_process() {
    let catalog = AdapterCatalog::standard();
    let registry = BackendRegistry::from_selectors(&["builtin:strict", "external:serde_json"], 42, &catalog, None).unwrap();
    let r = run_corpus(&registry, &bundled_fixtures(), &options(0)).unwrap();
    let serde: Vec<_> = r.records.iter().filter(|x| x.backend_id == "serde_json").collect();
    assert_eq!(serde.len(), 24);
    // serde_json rejects trailing commas.
    let tc = serde.iter().find(|x| x.file_path == "ill-formed/trailing_comma.json").unwrap();
    assert_eq!(tc.fine, FineLabel::ParseException);
}

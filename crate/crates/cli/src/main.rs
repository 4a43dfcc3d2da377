//! `polyjson`: command-line driver for the differential harness.

use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use polyjson::analysis::{
    consensus_distribution, distance_matrix, outcome_table, welch_t_test, DistanceMatrix, Granularity,
};
use polyjson::backend::{
    quiet_invocation_panics, serve_worker, AdapterCatalog, BackendRegistry, WorkerCommand, WorkerOp,
};
use polyjson::corpus::{bundled_fixtures, decode_check, ingest, Corpus, Ingest, Label, Manifest};
use polyjson::engine::DEFAULT_SHUFFLE_SEED;
use polyjson::harness::{run_corpus, OutcomeClass, RunOptions, RunReport};
use polyjson::multiversion::{mv_parse, MvStrategy};
use polyjson::typeprobe::{ordering_to_csv, probe_number_types, probes_to_csv};

/// Exit status when `mv-parse --fail-on-reject` sees a rejection.
const EXIT_REJECTED: u8 = 3;

#[derive(Parser)]
#[command(name = "polyjson", version, about = "Differential conformance harness for JSON parsers")]
struct Cli {
    /// Directory for written artifacts.
    #[arg(long, global = true, env = "POLYJSON_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Selection {
    /// Backend selectors: builtin:*, builtin:ID, external:NAME, external:*,
    /// config:PATH. Repeatable or comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "builtin:*")]
    backends: Vec<String>,

    /// Seed for the shuffled-keys variant.
    #[arg(long, default_value_t = DEFAULT_SHUFFLE_SEED)]
    seed: u64,

    /// Per-invocation time budget in milliseconds; 0 disables it.
    #[arg(long, default_value_t = 10_000)]
    budget_ms: u64,
}

impl Selection {
    fn budget(&self) -> Option<Duration> {
        (self.budget_ms > 0).then(|| Duration::from_millis(self.budget_ms))
    }

    fn registry(&self) -> Result<BackendRegistry, CliError> {
        let worker = std::env::current_exe().ok().map(WorkerCommand::new);
        BackendRegistry::from_selectors(&self.backends, self.seed, &AdapterCatalog::standard(), worker.as_ref())
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Args, Clone)]
struct CorpusArgs {
    /// Manifest of labeled input files; the bundled fixtures when absent.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    selection: Selection,
    /// Concurrent cells; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Report path; defaults to report-<label>.jsonl in the output directory.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ReportArgs {
    /// Run report written by run-wellformed or run-illformed.
    #[arg(long)]
    report: PathBuf,
    /// Corpus label to analyze; inferred when the report holds one label.
    #[arg(long)]
    label: Option<Label>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and deduplicate a corpus manifest.
    Ingest(CorpusArgs),
    /// Run the well-formed test sequence.
    RunWellformed(RunArgs),
    /// Run the ill-formed test sequence.
    RunIllformed(RunArgs),
    /// Pairwise behavioral distances, optionally compared with a second report.
    Distances {
        #[command(flatten)]
        report: ReportArgs,
        /// Compare per fine label instead of per outcome class.
        #[arg(long)]
        fine: bool,
        /// Second report whose distance distribution is tested against the first.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Label to analyze in the second report.
        #[arg(long, requires = "against")]
        against_label: Option<Label>,
    },
    /// Distribution of agreeing-group sizes.
    Consensus(ReportArgs),
    /// Per-backend outcome tables.
    Tables(ReportArgs),
    /// Probe number representations and object ordering.
    ProbeTypes(Selection),
    /// Parse one file with several backends and vote.
    MvParse {
        /// Input document.
        file: PathBuf,
        #[command(flatten)]
        selection: Selection,
        /// majority, unanimous-reject, strict-first[:ID] or first-accepting:ID,...
        #[arg(long, default_value = "majority")]
        strategy: MvStrategy,
        /// Exit with status 3 when the decision is a rejection.
        #[arg(long)]
        fail_on_reject: bool,
    },
    /// Serve one adapter call over stdin/stdout.
    #[command(hide = true)]
    Worker {
        #[arg(long)]
        adapter: String,
        #[arg(long)]
        op: WorkerOp,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    quiet_invocation_panics();
    match run(cli) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let out = cli.out_dir;
    match cli.command {
        Command::Ingest(args) => {
            let ingested = load_corpus(&args)?;
            let summary = ingest_summary(&ingested);
            write_artifact(&out, "ingest.json", &summary)?;
            println!("{summary}");
        }
        Command::RunWellformed(args) => run_label(&out, &args, Label::WellFormed)?,
        Command::RunIllformed(args) => run_label(&out, &args, Label::IllFormed)?,
        Command::Distances {
            report,
            fine,
            against,
            against_label,
        } => {
            let g = if fine { Granularity::Fine } else { Granularity::Class };
            let (r, label) = read_report(&report)?;
            let m = distance_matrix(&r, label, g).map_err(|e| CliError::Usage(e.to_string()))?;
            write_artifact(&out, &format!("distances-{label}.csv"), &m.to_csv())?;
            let summary = m.summary().map(|s| s.to_csv()).unwrap_or_else(|| "pairs\n0\n".into());
            write_artifact(&out, &format!("distances-{label}-summary.csv"), &summary)?;
            print!("{summary}");
            if let Some(path) = against {
                let (other, other_label) = read_report(&ReportArgs {
                    report: path,
                    label: against_label,
                })?;
                let m2 = distance_matrix(&other, other_label, g).map_err(|e| CliError::Usage(e.to_string()))?;
                let w = welch(&m, &m2)?;
                write_artifact(&out, "welch.json", &w)?;
                println!("{w}");
            }
        }
        Command::Consensus(args) => {
            let (r, label) = read_report(&args)?;
            let h = consensus_distribution(&r, label).map_err(|e| CliError::Usage(e.to_string()))?;
            write_artifact(&out, &format!("consensus-{label}.csv"), &h.to_csv())?;
            print!("{}", h.to_csv());
        }
        Command::Tables(args) => {
            let (r, label) = read_report(&args)?;
            let t = outcome_table(&r, label);
            write_artifact(&out, &format!("table-{label}.csv"), &t.to_csv())?;
            write_artifact(&out, &format!("table-{label}.txt"), &t.to_text())?;
            print!("{}", t.to_text());
        }
        Command::ProbeTypes(selection) => {
            let registry = selection.registry()?;
            let reports: Vec<_> = registry
                .iter()
                .map(|b| probe_number_types(b, selection.budget()))
                .collect();
            write_artifact(&out, "probes.csv", &probes_to_csv(&reports))?;
            write_artifact(&out, "ordering.csv", &ordering_to_csv(&reports))?;
            print!("{}", probes_to_csv(&reports));
        }
        Command::MvParse {
            file,
            selection,
            strategy,
            fail_on_reject,
        } => {
            let bytes = fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
            let text = decode_check(&bytes).map_err(|e| anyhow::anyhow!("{}: {e}", file.display()))?;
            let registry = selection.registry()?;
            let result = mv_parse(&text, &registry, &strategy, selection.budget())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            println!("{}", result.to_json());
            if fail_on_reject && !result.is_accepted() {
                return Ok(ExitCode::from(EXIT_REJECTED));
            }
        }
        Command::Worker { adapter, op } => {
            let stdout = io::stdout().lock();
            serve_worker(&AdapterCatalog::standard(), &adapter, op, io::stdin().lock(), stdout)
                .context("worker request failed")?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load_corpus(args: &CorpusArgs) -> Result<Ingest, CliError> {
    match &args.manifest {
        None => Ok(Ingest {
            corpus: bundled_fixtures(),
            ..Ingest::default()
        }),
        Some(path) => {
            let manifest = Manifest::load(path).map_err(|e| CliError::Io(anyhow::anyhow!("{e}")))?;
            Ok(ingest(&manifest))
        }
    }
}

fn ingest_summary(ingested: &Ingest) -> String {
    let counts = ingested.corpus.counts();
    let entries: Vec<_> = ingested
        .corpus
        .entries()
        .iter()
        .map(|e| {
            serde_json::json!({
                "id": e.id,
                "path": e.relative_path,
                "source": e.source,
                "label": e.label,
            })
        })
        .collect();
    serde_json::json!({
        "corpus_hash": ingested.corpus.hash(),
        "counts": counts,
        "entries": entries,
        "duplicates": ingested.duplicates,
        "failures": ingested.failures,
    })
    .to_string()
}

fn run_label(out: &Path, args: &RunArgs, label: Label) -> Result<(), CliError> {
    let ingested = load_corpus(&args.corpus)?;
    for f in &ingested.failures {
        eprintln!("skipped {}: {}", f.path, f.reason);
    }
    let corpus: Corpus = ingested.corpus.filter_label(label);
    if corpus.is_empty() {
        return Err(CliError::Usage(format!("the corpus has no {label} files")));
    }
    let registry = args.selection.registry()?;
    let options = RunOptions {
        workers: args.workers,
        budget: args.selection.budget(),
        seed: args.selection.seed,
    };
    let report = run_corpus(&registry, &corpus, &options).map_err(|e| CliError::Io(anyhow::anyhow!("{e}")))?;
    let path = match &args.report {
        Some(p) => p.clone(),
        None => out.join(format!("report-{label}.jsonl")),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    report
        .write_jsonl(BufWriter::new(file))
        .with_context(|| format!("writing {}", path.display()))?;

    let table = outcome_table(&report, label);
    let count = |c| table.rows.iter().map(|r| r.class_count(c)).sum::<usize>();
    println!(
        "{} records ({} backends x {} files): Conform {}, Silent {}, Error {} -> {}",
        report.records.len(),
        registry.len(),
        corpus.len(),
        count(OutcomeClass::Conform),
        count(OutcomeClass::Silent),
        count(OutcomeClass::Error),
        path.display()
    );
    Ok(())
}

fn read_report(args: &ReportArgs) -> Result<(RunReport, Label), CliError> {
    let file = fs::File::open(&args.report).with_context(|| format!("opening {}", args.report.display()))?;
    let report = RunReport::read_jsonl(BufReader::new(file))
        .with_context(|| format!("reading {}", args.report.display()))?;
    let label = match args.label {
        Some(l) => l,
        None => {
            let present: Vec<Label> = Label::ALL
                .into_iter()
                .filter(|l| report.records_for(*l).next().is_some())
                .collect();
            match present.as_slice() {
                [only] => *only,
                _ => return Err(CliError::Usage("the report holds both labels; pass --label".into())),
            }
        }
    };
    Ok((report, label))
}

fn welch(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<String, CliError> {
    let r = welch_t_test(&a.pair_distances(), &b.pair_distances()).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(serde_json::json!({ "t": r.t, "df": r.df, "p": r.p }).to_string())
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(contents.as_bytes())
        .and_then(|_| if contents.ends_with('\n') { Ok(()) } else { f.write_all(b"\n") })
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

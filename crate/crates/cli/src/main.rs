//! `cfmg`: generate, verify, index and query cube-free median graphs.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use cfmg::bench::{self, BenchConfig};
use cfmg::generator::{generate, parse_size, Family, GenSpec, PayloadMode};
use cfmg::graph::bfs_distances;
use cfmg::oracle::{interval_sum_bruteforce, median_of_three_bruteforce, verify_cube_free, verify_median_graph, VerificationReport};
use cfmg::{BuildOptions, Error, Graph, IntervalIndex, SemigroupKind, SemigroupSpec};
use clap::{Parser, Subcommand, ValueEnum};

const MISMATCH: u8 = 1;
const INPUT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "cfmg", version, about = "Interval queries on cube-free median graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph from a family.
    Generate {
        #[arg(long)]
        family: Family,
        /// `n` or `COLSxROWS`.
        #[arg(long)]
        size: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// default, ones, ids or random(SEED).
        #[arg(long, default_value = "default")]
        payload: PayloadMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that a graph is a cube-free median graph.
    Verify {
        graph: PathBuf,
        /// Verify even above the size limit.
        #[arg(long)]
        force: bool,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Build an index and write it to a file.
    Build {
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        index: IndexArgs,
    },
    /// Answer queries, one per line: `interval u v`, `median3 a b c` or
    /// `distance u v`, with vertex labels from the graph file.
    Query {
        graph: PathBuf,
        /// Query file; standard input when absent.
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Load a prebuilt index instead of building one.
        #[arg(long)]
        index_file: Option<PathBuf>,
        /// Cross-check every answer against brute force.
        #[arg(long)]
        check: bool,
        #[command(flatten)]
        index: IndexArgs,
    },
    /// Doubling-series benchmark with instrumentation.
    Bench {
        #[arg(long, default_value = "grid")]
        family: Family,
        /// Comma-separated vertex counts; overrides the exponent range.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        min_exp: u32,
        #[arg(long, default_value_t = 10)]
        max_exp: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Random queries per size; 0 builds only.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Queries per size checked against brute force.
        #[arg(long, default_value_t = 100)]
        checked: usize,
        #[arg(long, default_value_t = 3)]
        build_runs: usize,
        #[arg(long, default_value_t = SemigroupKind::Sum)]
        semigroup: SemigroupKind,
        #[arg(long, default_value_t = BuildOptions::default().leaf_size)]
        leaf_size: usize,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(clap::Args)]
struct IndexArgs {
    #[arg(long, default_value_t = SemigroupKind::Sum)]
    semigroup: SemigroupKind,
    /// Seed for fingerprint tokens.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = BuildOptions::default().leaf_size)]
    leaf_size: usize,
    /// Skip input verification.
    #[arg(long)]
    trust: bool,
}

/// A failure with its exit code.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(INPUT_ERROR, e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure(INPUT_ERROR, e.to_string())
    }
}

/// Writes to standard output; a reader that hung up early is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("cfmg: {msg}");
            ExitCode::from(code)
        }
    }
}

fn read_graph(path: &Path) -> Result<Graph, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure(INPUT_ERROR, format!("{}: {e}", path.display())))?;
    Graph::parse(&text).map_err(|e| Failure(INPUT_ERROR, format!("{}: {e}", path.display())))
}

fn build_index(g: &Graph, args: &IndexArgs) -> Result<IntervalIndex<SemigroupSpec>, Failure> {
    let mut opts = BuildOptions::default().leaf_size(args.leaf_size);
    opts.trust = args.trust;
    let values = args.semigroup.payloads(g, args.seed);
    IntervalIndex::build(g, SemigroupSpec::new(args.semigroup), values, &opts).map_err(|e| match e {
        Error::Rejected(_) => Failure(MISMATCH, e.to_string()),
        other => other.into(),
    })
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Generate {
            family,
            size,
            seed,
            payload,
            out,
        } => {
            let spec = GenSpec::new(family, &parse_size(&size)?, seed).with_payload(payload);
            let text = generate(&spec)?.to_text();
            match out {
                Some(path) => fs::write(path, text)?,
                None => emit(&text)?,
            }
            Ok(())
        }
        Command::Verify { graph, force, format } => {
            let g = read_graph(&graph)?;
            let reports = [verify_median_graph(&g, force)?, verify_cube_free(&g, force)?];
            emit(&format_reports(&g, &reports, format))?;
            if reports.iter().all(|r| r.ok) {
                Ok(())
            } else {
                Err(Failure(MISMATCH, "not a cube-free median graph".into()))
            }
        }
        Command::Build { graph, out, index } => {
            let g = read_graph(&graph)?;
            let idx = build_index(&g, &index)?;
            fs::write(&out, idx.to_bytes()?)?;
            let st = idx.stats();
            eprintln!(
                "indexed {} vertices: depth {}, {} entries, {} bytes",
                st.n,
                st.depth,
                st.entries(),
                fs::metadata(&out)?.len()
            );
            Ok(())
        }
        Command::Query {
            graph,
            queries,
            index_file,
            check,
            index,
        } => {
            let g = read_graph(&graph)?;
            let text = match queries {
                Some(path) => fs::read_to_string(&path).map_err(|e| Failure(INPUT_ERROR, format!("{}: {e}", path.display())))?,
                None => {
                    let mut s = String::new();
                    io::stdin().read_to_string(&mut s)?;
                    s
                }
            };
            let batch = parse_queries(&g, &text)?;
            let idx = match index_file {
                Some(path) => {
                    let idx = IntervalIndex::<SemigroupSpec>::from_bytes(&fs::read(&path)?)?;
                    if idx.n() != g.n() {
                        return Err(Failure(INPUT_ERROR, format!("index has {} vertices, graph {}", idx.n(), g.n())));
                    }
                    idx
                }
                None => build_index(&g, &index)?,
            };
            answer(&g, &idx, &batch, check)
        }
        Command::Bench {
            family,
            sizes,
            min_exp,
            max_exp,
            seed,
            trials,
            checked,
            build_runs,
            semigroup,
            leaf_size,
            format,
        } => {
            let mut cfg = if sizes.is_empty() {
                BenchConfig::doubling(family, min_exp, max_exp)
            } else {
                BenchConfig::new(family, sizes)
            };
            if !cfg.sizes.is_sorted() {
                return Err(Failure(INPUT_ERROR, "sizes must be ascending".into()));
            }
            cfg.seed = seed;
            cfg.trials = trials;
            cfg.checked = checked;
            cfg.build_runs = build_runs;
            cfg.build_budget = std::time::Duration::ZERO;
            cfg.semigroup = semigroup;
            cfg.leaf_size = leaf_size;
            let report = bench::run(&cfg)?;
            match format {
                Format::Json => emit(&(serde_json::to_string_pretty(&report).expect("serializable") + "\n"))?,
                Format::Table => emit(&report.table())?,
            }
            match report.mismatches() {
                0 => Ok(()),
                k => Err(Failure(MISMATCH, format!("{k} oracle mismatches"))),
            }
        }
    }
}

fn format_reports(g: &Graph, reports: &[VerificationReport], format: Format) -> String {
    let labelled = |r: &VerificationReport| r.witness.as_ref().map(|w| w.iter().map(|&v| g.label(v)).collect::<Vec<_>>());
    match format {
        Format::Json => {
            let out: Vec<_> = reports
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "check": r.check,
                        "ok": r.ok,
                        "witness": labelled(r),
                        "message": r.message,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&out).expect("serializable") + "\n"
        }
        Format::Table => {
            let mut out = String::new();
            for r in reports {
                let verdict = if r.ok { "ok" } else { "FAILED" };
                out += &match labelled(r) {
                    Some(w) => format!("{:<13} {verdict:<6} {} witness {w:?}\n", r.check, r.message),
                    None => format!("{:<13} {verdict:<6} {}\n", r.check, r.message),
                };
            }
            out
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Query {
    Interval(u32, u32),
    Median3(u32, u32, u32),
    Distance(u32, u32),
}

fn parse_queries(g: &Graph, text: &str) -> Result<Vec<Query>, Failure> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Failure(INPUT_ERROR, format!("query line {}: {msg}", i + 1));
        let mut words = line.split_whitespace();
        let kind = words.next().expect("non-empty line");
        let mut args = Vec::new();
        for w in words {
            let label: u64 = w.parse().map_err(|_| bad(format!("`{w}` is not a vertex label")))?;
            args.push(g.id_of(label).ok_or_else(|| bad(format!("unknown vertex label {label}")))?);
        }
        let q = match (kind, args.as_slice()) {
            ("interval", &[u, v]) => Query::Interval(u, v),
            ("median3", &[a, b, c]) => Query::Median3(a, b, c),
            ("distance", &[u, v]) => Query::Distance(u, v),
            ("interval" | "distance", _) => return Err(bad(format!("`{kind}` takes two vertices"))),
            ("median3", _) => return Err(bad("`median3` takes three vertices".into())),
            _ => return Err(bad(format!("unknown query kind `{kind}`"))),
        };
        out.push(q);
    }
    Ok(out)
}

fn threads() -> usize {
    std::env::var("CFMG_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
}

/// An output line and, under `--check`, a disagreement with brute force.
type Answer = (String, Option<String>);

/// Answers the batch over a worker pool; output keeps input order.
fn answer(g: &Graph, idx: &IntervalIndex<SemigroupSpec>, batch: &[Query], check: bool) -> Result<(), Failure> {
    let workers = threads().min(batch.len()).max(1);
    let chunk = batch.len().div_ceil(workers).max(1);
    let results: Vec<Result<Vec<Answer>, Failure>> = thread::scope(|s| {
        let handles: Vec<_> = batch
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|q| answer_one(g, idx, *q, check)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut text = String::new();
    let mut mismatches = 0;
    for part in results {
        for (line, problem) in part? {
            text += &line;
            text.push('\n');
            if let Some(p) = problem {
                eprintln!("mismatch: {p}");
                mismatches += 1;
            }
        }
    }
    emit(&text)?;
    match mismatches {
        0 => Ok(()),
        k => Err(Failure(MISMATCH, format!("{k} answers disagree with brute force"))),
    }
}

fn answer_one(g: &Graph, idx: &IntervalIndex<SemigroupSpec>, q: Query, check: bool) -> Result<Answer, Failure> {
    let label = |v: u32| g.label(v);
    Ok(match q {
        Query::Interval(u, v) => {
            let got = idx.query(u, v)?;
            let problem = if check {
                let want = interval_sum_bruteforce(g, idx.semigroup(), idx.values(), u, v)?;
                (want != got).then(|| format!("interval {} {}: index {got}, brute force {want}", label(u), label(v)))
            } else {
                None
            };
            (got.to_string(), problem)
        }
        Query::Median3(a, b, c) => {
            let got = idx.median_of_three(a, b, c)?;
            let problem = if check {
                let want = median_of_three_bruteforce(g, a, b, c)?;
                (want != got).then(|| format!("median3 {} {} {}: index {}, brute force {}", label(a), label(b), label(c), label(got), label(want)))
            } else {
                None
            };
            (label(got).to_string(), problem)
        }
        Query::Distance(u, v) => {
            let got = idx.distance(u, v)?;
            let problem = if check {
                let want = bfs_distances(g, u)?[v as usize];
                (want != got).then(|| format!("distance {} {}: index {got}, brute force {want}", label(u), label(v)))
            } else {
                None
            };
            (got.to_string(), problem)
        }
    })
}

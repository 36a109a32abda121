//! `sindex`: build and query subtree indexes over bracketed parse trees.

mod bench;
mod report;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use subtree_index::corpus::{corpus_stats, write_data_file, DataFile};
use subtree_index::decompose::plan_query_with;
use subtree_index::exec::{execute_plan_with_stats, oracle_match_all};
use subtree_index::index::{build_index_with, index_stats, BuildOptions};
use subtree_index::query::parse_query;
use subtree_index::testkit::{gen_corpus, gen_queries_from, GeneratorConfig, QueryClass, QuerySpec, TestkitError};
use subtree_index::{CodingScheme, Corpus, MatchSet, QueryNode, SubtreeIndex};

use report::{Format, Table};

#[derive(Parser, Debug)]
#[command(name = "sindex", version, about = "Subtree index over bracketed parse trees")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Parse bracketed trees (one per line) into a data file.
    Ingest {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Build an index from a data file.
    Build {
        #[arg(short, long)]
        data: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        mss: usize,
        #[arg(long, default_value = "root-split")]
        scheme: CodingScheme,
        /// External sort memory budget in MiB.
        #[arg(long, default_value_t = 256)]
        sort_mb: usize,
    },
    /// Evaluate a tree-pattern query.
    Query(QueryArgs),
    /// Index and corpus summaries.
    Stats {
        #[arg(short, long)]
        index: Option<PathBuf>,
        #[arg(short, long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
    },
    /// Time every query of a file and report latency by result size.
    Bench {
        #[arg(short, long)]
        index: PathBuf,
        #[arg(short, long)]
        data: Option<PathBuf>,
        /// One query per line; blank lines and `#` comments are skipped.
        queries: PathBuf,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
    },
    /// Synthetic corpora and query sets.
    Gen {
        #[command(subcommand)]
        what: GenCmd,
    },
}

#[derive(Args, Debug)]
struct QueryArgs {
    /// Query text such as `S(NP)(VP(//NN))`.
    query: Option<String>,
    /// Read the query from a file instead.
    #[arg(short, long, conflicts_with = "query")]
    file: Option<PathBuf>,
    #[arg(short, long)]
    index: PathBuf,
    /// Data file; required by the filter scheme and by --oracle.
    #[arg(short, long)]
    data: Option<PathBuf>,
    /// Expected index mss; a different value in the index is an error.
    #[arg(long)]
    mss: Option<usize>,
    /// Expected index scheme; a different value in the index is an error.
    #[arg(long)]
    scheme: Option<CodingScheme>,
    /// Print the join plan.
    #[arg(long)]
    explain: bool,
    /// Print only the number of matches.
    #[arg(long)]
    count: bool,
    /// Print phase timings to stderr.
    #[arg(long)]
    time: bool,
    /// Check the result against a scan of the data file.
    #[arg(long)]
    oracle: bool,
}

#[derive(Subcommand, Debug)]
enum GenCmd {
    /// Write a synthetic bracketed corpus.
    Corpus {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trees: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write queries drawn from a corpus, one per line.
    Queries {
        /// Data file whose label frequencies define the classes.
        #[arg(short, long)]
        data: PathBuf,
        /// Bracketed trees to draw queries from; defaults to the data file.
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Label classes, e.g. `H,ML,HML`; all seven by default.
        #[arg(long, value_delimiter = ',')]
        class: Vec<QueryClass>,
        #[arg(long, default_value_t = 1)]
        min_size: usize,
        #[arg(long, default_value_t = 8)]
        max_size: usize,
        #[arg(long, default_value_t = 1)]
        per_size: usize,
        #[arg(long, default_value_t = 0.0)]
        descendant_prob: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .any(|c| c.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe))
}

/// Returns `Ok(false)` when the command ran but its check failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Ingest { input, out } => {
            let corpus = read_corpus(&input)?;
            let s = write_data_file(&corpus, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("{} trees, {} nodes, {} bytes", s.trees, s.nodes, s.bytes);
        }
        Cmd::Build {
            data,
            out,
            mss,
            scheme,
            sort_mb,
        } => {
            let mut opts = BuildOptions::new(mss, scheme);
            opts.sort_budget = sort_mb << 20;
            let s = build_index_with(&data, &opts, &out)?;
            println!(
                "{} keys, {} postings, {} bytes in {:.2}s ({} spill runs)",
                s.keys,
                s.postings,
                s.bytes,
                s.elapsed.as_secs_f64(),
                s.spill_runs
            );
        }
        Cmd::Query(a) => return query(a),
        Cmd::Stats { index, data, format } => stats(index.as_deref(), data.as_deref(), format)?,
        Cmd::Bench {
            index,
            data,
            queries,
            reps,
            threads,
            format,
        } => {
            let idx = SubtreeIndex::open(&index)?;
            let df = data.as_deref().map(DataFile::open).transpose()?;
            let qs = read_query_lines(&queries)?;
            let rows = bench::run(&idx, df.as_ref(), &qs, reps.max(1), threads.max(1))?;
            bench::report(&idx, &rows, format)?;
        }
        Cmd::Gen { what } => gen(what)?,
    }
    Ok(true)
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Corpus::from_bracketed(&text)?)
}

fn load_data(path: &Path) -> Result<Corpus> {
    let df = DataFile::open(path)?;
    let trees = df.iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus::new(trees)?)
}

pub(crate) fn read_query_lines(path: &Path) -> Result<Vec<QueryNode>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| parse_query(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn check_header(idx: &SubtreeIndex, mss: Option<usize>, scheme: Option<CodingScheme>) -> Result<()> {
    if let Some(m) = mss.filter(|&m| m != idx.mss()) {
        bail!("index was built with mss {}, not {m}", idx.mss());
    }
    if let Some(s) = scheme.filter(|&s| s != idx.scheme()) {
        bail!("index was built with the {} scheme, not {s}", idx.scheme());
    }
    Ok(())
}

fn query(a: QueryArgs) -> Result<bool> {
    let text = match (&a.query, &a.file) {
        (Some(q), None) => q.clone(),
        (None, Some(f)) => fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?,
        _ => bail!("give a query or --file"),
    };
    let q = parse_query(text.trim())?;
    let idx = SubtreeIndex::open(&a.index)?;
    check_header(&idx, a.mss, a.scheme)?;
    let df = a.data.as_deref().map(DataFile::open).transpose()?;

    let t0 = Instant::now();
    let plan = plan_query_with(&q, idx.mss(), idx.scheme(), &idx)?;
    let decompose = t0.elapsed();
    let (matches, st) = execute_plan_with_stats(&plan, &idx, df.as_ref())?;

    let mut out = io::stdout().lock();
    if a.explain {
        let p = plan.to_string();
        writeln!(out, "{}", p.trim_end())?;
    }
    if a.count {
        writeln!(out, "{}", matches.len())?;
    } else {
        write_matches(&mut out, &matches)?;
    }
    if a.time {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        eprintln!("decompose\t{:.3} ms", ms(decompose));
        eprintln!("fetch\t{:.3} ms", ms(st.fetch));
        eprintln!("join\t{:.3} ms", ms(st.join));
        eprintln!("filter\t{:.3} ms", ms(st.filter));
        eprintln!("postings\t{}", st.postings_read);
    }
    if !a.oracle {
        return Ok(true);
    }
    let Some(data) = &a.data else {
        bail!("--oracle needs --data");
    };
    let corpus = load_data(data)?;
    let want = oracle_match_all(&q, corpus.trees());
    if want == matches {
        writeln!(out, "MATCH-SET EQUAL")?;
        return Ok(true);
    }
    writeln!(out, "MATCH-SET DIFFERS")?;
    for m in want.difference(&matches) {
        writeln!(out, "-\t{}\t{}\t{}\t{}", m.tid, m.root.pre, m.root.post, m.root.level)?;
    }
    for m in matches.difference(&want) {
        writeln!(out, "+\t{}\t{}\t{}\t{}", m.tid, m.root.pre, m.root.post, m.root.level)?;
    }
    Ok(false)
}

fn write_matches(out: &mut impl Write, m: &MatchSet) -> io::Result<()> {
    for b in m {
        writeln!(out, "{}\t{}\t{}\t{}", b.tid, b.root.pre, b.root.post, b.root.level)?;
    }
    Ok(())
}

fn stats(index: Option<&Path>, data: Option<&Path>, format: Format) -> Result<()> {
    if index.is_none() && data.is_none() {
        bail!("give --index, --data or both");
    }
    let mut tables = Vec::new();
    if let Some(p) = data {
        let s = corpus_stats(&load_data(p)?);
        let mut t = Table::new("corpus", &["trees", "nodes", "internal", "avg_branching", "max_branching", "labels"]);
        t.row(vec![
            json!(s.trees),
            json!(s.nodes),
            json!(s.internal_nodes),
            json!((s.avg_branching * 1000.0).round() / 1000.0),
            json!(s.max_branching),
            json!(s.alphabet_size),
        ]);
        tables.push(t);
    }
    if let Some(p) = index {
        let idx = SubtreeIndex::open(p)?;
        let s = index_stats(&idx)?;
        let mut t = Table::new("index", &["scheme", "mss", "keys", "postings", "posting_bytes", "file_bytes"]);
        t.row(vec![
            json!(idx.scheme().name()),
            json!(s.mss),
            json!(s.keys),
            json!(s.postings),
            json!(s.posting_bytes),
            json!(s.file_bytes),
        ]);
        tables.push(t);
        let mut t = Table::new("by_size", &["size", "keys", "postings", "bytes"]);
        for (i, b) in s.by_size.iter().enumerate() {
            t.row(vec![json!(i + 1), json!(b.keys), json!(b.postings), json!(b.bytes)]);
        }
        tables.push(t);
    }
    report::emit(&tables, format)?;
    Ok(())
}

fn gen(what: GenCmd) -> Result<()> {
    match what {
        GenCmd::Corpus { seed, trees, out } => {
            let c = gen_corpus(&GeneratorConfig::with_seed(seed, trees))?;
            let mut text = String::new();
            for t in c.trees() {
                text.push_str(&t.to_bracketed());
                text.push('\n');
            }
            fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            println!("{} trees", c.len());
        }
        GenCmd::Queries {
            data,
            source,
            seed,
            class,
            min_size,
            max_size,
            per_size,
            descendant_prob,
            out,
        } => {
            let reference = load_data(&data)?;
            let source = source.as_deref().map(read_corpus).transpose()?;
            let classes = if class.is_empty() { QueryClass::ALL.to_vec() } else { class };
            let mut text = String::new();
            let mut n = 0;
            for (i, c) in classes.into_iter().enumerate() {
                text.push_str(&format!("# class {c}\n"));
                // a class needs at least one label per tier
                for size in min_size.max(c.tiers().len())..=max_size {
                    let mut spec = QuerySpec::new(seed.wrapping_add((i * 1000 + size) as u64), c, size, size);
                    spec.per_size = per_size;
                    spec.descendant_prob = descendant_prob;
                    match gen_queries_from(&reference, source.as_ref().unwrap_or(&reference), &spec) {
                        Ok(qs) => {
                            for q in qs {
                                text.push_str(&format!("{q}\n"));
                                n += 1;
                            }
                        }
                        Err(e @ TestkitError::Unsatisfiable { .. }) => eprintln!("skipped: {e}"),
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            println!("{n} queries");
        }
    }
    Ok(())
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use supdec::engine::witness;
use supdec::frontend::FrontendError;
use supdec::ir::{IRLevel, Stmt};
use supdec::analysis::seeds::SeedError;
use supdec::pipeline::{decompile, passes, run, Decompiled, Options, PipelineError};
use supdec::provenance::SemiringTag;
use supdec::store::dump::dump;
use supdec::store::{NodeId, Store, StoreError, Value, ValueTag};
use supdec::term::Textual;

#[derive(Parser)]
#[command(name = "supdec", version, about = "Decompile AT&T x86-64 listings to C99")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Annotation semiring: bool, count or prov.
    #[arg(long, default_value = "prov", value_parser = ["bool", "count", "prov"])]
    semiring: String,
    /// Extra signature seeds; entries override the bundled libc seeds.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Clight candidates kept per statement.
    #[arg(long, default_value_t = supdec::lifting::DEFAULT_CANDIDATE_CAP)]
    max_candidates: usize,
    /// Skip dynamic stack allocation recognition.
    #[arg(long)]
    no_alloca: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Decompile a listing to a C file.
    Decompile {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Oracle calls allowed per function during selection.
        #[arg(long, default_value_t = supdec::select::DEFAULT_BUDGET)]
        budget: usize,
        /// Selection threads; defaults to the number of cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Dump the relations of an IR level (repeatable) under `<output>.dump/`.
        #[arg(long = "dump", value_name = "LEVEL")]
        dump: Vec<String>,
        /// Write a derivation tree for every selected statement to `<output>.witness`.
        #[arg(long)]
        witness: bool,
        /// Print the candidate histogram and per-pass table.
        #[arg(long)]
        stats: bool,
        /// Write the whole final store as fact files into DIR.
        #[arg(long, value_name = "DIR")]
        emit_facts: Option<PathBuf>,
        /// Diagnostics report; defaults to `<output>.report`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the annotation of the tuples of a relation matching a pattern.
    Query {
        input: PathBuf,
        relation: String,
        /// `column=value` filters; node columns take hex addresses.
        pattern: Vec<String>,
        #[command(flatten)]
        common: Common,
        /// Also print one derivation tree per matching tuple.
        #[arg(long)]
        witness: bool,
    },
    /// Print the declarative rules of every pass.
    Rules,
}

/// Failures sorted into exit codes.
enum Failure {
    Parse(anyhow::Error),
    Io(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn classify(e: anyhow::Error) -> Failure {
        for cause in e.chain() {
            let parse = cause.is::<FrontendError>()
                || cause.is::<SeedError>()
                || matches!(cause.downcast_ref(), Some(PipelineError::Frontend(_) | PipelineError::Seeds(_)));
            if parse {
                return Failure::Parse(e);
            }
            let io = cause.is::<std::io::Error>()
                || matches!(cause.downcast_ref(), Some(StoreError::Io(_)))
                || matches!(cause.downcast_ref(), Some(PipelineError::Store(StoreError::Io(_))));
            if io {
                return Failure::Io(e);
            }
        }
        Failure::Internal(e)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn options(c: &Common) -> Result<(Options, Option<String>)> {
    let semiring: SemiringTag = c.semiring.parse().map_err(|_| anyhow!("unknown semiring `{}`", c.semiring))?;
    if c.max_candidates == 0 {
        bail!("--max-candidates must be positive");
    }
    let seeds = c.seeds.as_deref().map(read).transpose()?;
    let opts = Options { semiring, alloca: !c.no_alloca, max_candidates: c.max_candidates, ..Options::default() };
    Ok((opts, seeds))
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn report(d: &Decompiled) -> Result<String> {
    let mut out = String::new();
    for (t, _) in d.store.relation("diag")?.iter() {
        let cols: Vec<String> = t.iter().map(|v| v.to_string()).collect();
        writeln!(out, "pass\t{}", cols.join("\t"))?;
    }
    for s in &d.selections {
        for g in &s.diags {
            writeln!(out, "oracle\t{}\t{}\t{}\t{}", s.function, g.node, g.category, g.message)?;
        }
    }
    let clean = d.selections.iter().filter(|s| s.diags.is_empty()).count();
    writeln!(out, "summary\t{clean}/{} functions without oracle diagnostics", d.selections.len())?;
    Ok(out)
}

fn stats_table(d: &Decompiled, total: std::time::Duration) -> String {
    let st = d.store.stats();
    let mut out = String::from("candidates\tnodes\n");
    for (k, n) in &st.histogram {
        let _ = writeln!(out, "{k}\t{n}");
    }
    let _ = writeln!(out, "single-candidate fraction\t{:.3}", st.single_fraction());
    let _ = writeln!(out, "multi-candidate nodes\t{}", st.multi_nodes());
    let _ = writeln!(out, "\npass\titerations\tnew\tskipped\tmicros");
    for p in d.store.pass_stats() {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", p.name, p.iterations, p.new_tuples, p.skipped as u8, p.micros);
    }
    let calls: usize = d.selections.iter().map(|s| s.oracle_calls).sum();
    let _ = writeln!(out, "select\toracle calls\t{calls}");
    let _ = writeln!(out, "total\tmicros\t{}", total.as_micros());
    out
}

fn witnesses(d: &Decompiled) -> Result<String> {
    let mut out = String::new();
    for (f, s) in d.funcs.iter().zip(&d.selections) {
        for (n, stmt) in f.body(&s.config) {
            let t = vec![Value::Node(n), Value::stmt(Stmt::Clight(stmt.clone()))];
            let tree = witness(&d.store, "clight_stmt", &t)?;
            writeln!(out, "# {} {n}", f.name)?;
            out.push_str(&tree.render());
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_decompile(
    input: &Path,
    output: &Path,
    common: &Common,
    budget: usize,
    workers: Option<usize>,
    dumps: &[String],
    want_witness: bool,
    stats: bool,
    emit_facts: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<()> {
    let start = Instant::now();
    let listing = read(input)?;
    let (mut opts, seeds) = options(common)?;
    if budget == 0 || workers == Some(0) {
        bail!("--budget and --workers must be positive");
    }
    opts.budget = budget;
    opts.workers = workers.unwrap_or(opts.workers);
    opts.witness = want_witness;
    let levels: Vec<IRLevel> = dumps
        .iter()
        .map(|l| IRLevel::from_name_loose(l).ok_or_else(|| anyhow!("unknown IR level `{l}`")))
        .collect::<Result<_>>()?;
    let d = decompile(&listing, seeds.as_deref(), &opts)?;
    write(output, &d.c.text)?;
    let report_path = report_path.map(Path::to_path_buf).unwrap_or_else(|| with_suffix(output, ".report"));
    write(&report_path, &report(&d)?)?;
    for l in levels {
        let dir = with_suffix(output, ".dump").join(l.name());
        dump(&d.store, &dir, Some(l)).with_context(|| format!("dumping {}", dir.display()))?;
    }
    if let Some(dir) = emit_facts {
        dump(&d.store, dir, None).with_context(|| format!("dumping {}", dir.display()))?;
    }
    if want_witness {
        write(&with_suffix(output, ".witness"), &witnesses(&d)?)?;
    }
    if stats {
        print!("{}", stats_table(&d, start.elapsed()));
    }
    Ok(())
}

fn matches(tag: ValueTag, v: &Value, want: &str) -> bool {
    if tag == ValueTag::Node {
        let hex = want.trim_start_matches('@').trim_start_matches("0x");
        return u64::from_str_radix(hex, 16).map(NodeId) == Ok(v.as_node().unwrap_or(NodeId(u64::MAX)));
    }
    v.render() == want || v.as_text() == Some(want)
}

fn query(store: &Store, relation: &str, pattern: &[String], want_witness: bool) -> Result<String> {
    let schema = store.schema(relation)?.clone();
    let mut filters = Vec::new();
    for p in pattern {
        let (col, val) = p.split_once('=').ok_or_else(|| anyhow!("pattern `{p}` is not column=value"))?;
        let i = schema
            .columns
            .iter()
            .position(|(c, _)| c == col)
            .ok_or_else(|| anyhow!("`{relation}` has no column `{col}`"))?;
        filters.push((i, schema.columns[i].1, val.to_string()));
    }
    let mut out = String::new();
    let mut hits = 0;
    for (t, k) in store.relation(relation)?.iter() {
        if !filters.iter().all(|(i, tag, v)| matches(*tag, &t[*i], v)) {
            continue;
        }
        hits += 1;
        writeln!(out, "{relation}{}", Value::Tuple(t.clone()).render())?;
        writeln!(out, "annotation: {k}")?;
        if want_witness {
            out.push_str(&witness(store, relation, t)?.render());
        }
    }
    if hits == 0 {
        writeln!(out, "annotation: 0")?;
    }
    Ok(out)
}

fn cmd_query(input: &Path, relation: &str, pattern: &[String], common: &Common, want_witness: bool) -> Result<()> {
    let listing = read(input)?;
    let (mut opts, seeds) = options(common)?;
    opts.witness = want_witness;
    let store = run(&listing, seeds.as_deref(), &opts)?;
    print!("{}", query(&store, relation, pattern, want_witness)?);
    Ok(())
}

fn cmd_rules() -> Result<()> {
    for p in passes(&Options::default())? {
        println!("# {}{}", p.name, if p.procedural.is_some() { " (procedural)" } else { "" });
        for r in &p.rules {
            println!("{r}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Decompile { input, output, common, budget, workers, dump, witness, stats, emit_facts, report } => {
            cmd_decompile(
                input,
                output,
                common,
                *budget,
                *workers,
                dump,
                *witness,
                *stats,
                emit_facts.as_deref(),
                report.as_deref(),
            )
        }
        Command::Query { input, relation, pattern, common, witness } => {
            cmd_query(input, relation, pattern, common, *witness)
        }
        Command::Rules => cmd_rules(),
    };
    match result.map_err(Failure::classify) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Parse(e)) => {
            eprintln!("supdec: parse error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) => {
            eprintln!("supdec: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("supdec: internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}

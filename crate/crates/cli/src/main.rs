use std::collections::BTreeMap;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use thadc_core::annotate::{self, EmitOptions, Mode};
use thadc_core::checker::{self, brute_force_paths, Status, DEFAULT_PATH_CAP};
use thadc_core::frontend::{
    self, inline::DEFAULT_INLINE_DEPTH, parse_program_with_entry, ResolvedProgram,
};
use thadc_core::model::ThadSet;
use thadc_core::report::Report;
use thadc_core::spec::{self, parse_constants, parse_thad_spec};

const BUNDLED_SPEC: &str = "<bundled>/spidev.thad";

#[derive(Parser)]
#[command(
    name = "thadc",
    version,
    about = "Check C programs against temporal HAL-API dependencies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Statically check programs against a THAD specification.
    Check(CheckArgs),
    /// Insert ghost-variable annotations into a HAL implementation.
    Annotate(AnnotateArgs),
    /// Print the dependency graph of a specification.
    Explain(ExplainArgs),
}

#[derive(Args)]
struct SpecArgs {
    /// THAD specification file; repeat to merge several. Defaults to the
    /// bundled spidev specification.
    #[arg(long = "spec", value_name = "PATH")]
    specs: Vec<PathBuf>,
    /// Constant value table; repeat to merge several. Defaults to the
    /// bundled Linux values when no --spec is given.
    #[arg(long = "consts", value_name = "PATH")]
    consts: Vec<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Maximum call-inlining depth.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_INLINE_DEPTH)]
    inline_depth: usize,
    /// Also run the path-enumeration oracle with loops unrolled K times.
    #[arg(long, value_name = "K")]
    unroll: Option<usize>,
    /// Omit wall-clock timing from reports.
    #[arg(long)]
    no_timing: bool,
    /// Check only these THAD ids (comma separated), overriding any
    /// `// thadc: select` directive in the program.
    #[arg(long, value_delimiter = ',', value_name = "IDS")]
    thads: Option<Vec<String>>,
    /// Entry function.
    #[arg(long, default_value = frontend::DEFAULT_ENTRY)]
    entry: String,
    /// Treat the inputs as corpus directories and compare every program's
    /// verdicts with its fixture in `expected/`.
    #[arg(long)]
    corpus: bool,
    /// Write the report here instead of standard output.
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Program files (or corpus directories with --corpus).
    files: Vec<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Acsl,
    Assert,
}

#[derive(Args)]
struct AnnotateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Acsl)]
    mode: ModeArg,
    /// Generate a self-contained forwarding wrapper instead of annotating
    /// a HAL source.
    #[arg(long)]
    wrapper: bool,
    /// Guard updates of constrained dependencies by their discriminator.
    #[arg(long)]
    guarded_updates: bool,
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// HAL implementation to annotate.
    hal_source: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Text,
    Dot,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum, default_value_t = GraphFormat::Text)]
    format: GraphFormat,
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(a) => run_check(a),
        Command::Annotate(a) => run_annotate(a),
        Command::Explain(a) => run_explain(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            match e.downcast_ref::<Diagnostics>() {
                Some(d) => eprint!("{}", d.0),
                None => eprintln!("thadc: error: {e:#}"),
            }
            ExitCode::from(2)
        }
    }
}

/// Pre-rendered diagnostics.
#[derive(Debug)]
struct Diagnostics(String);

impl std::fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0.trim_end())
    }
}

impl std::error::Error for Diagnostics {}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// The specification plus a label naming its sources.
fn load_spec(args: &SpecArgs) -> Result<(ThadSet, String)> {
    if args.specs.is_empty() {
        let mut set = spec::spidev();
        if !args.consts.is_empty() {
            set = set.with_values(&load_consts(&args.consts)?);
        }
        return Ok((set, BUNDLED_SPEC.to_string()));
    }
    let mut set = ThadSet::default();
    let mut labels = Vec::new();
    for p in &args.specs {
        let text = read(p)?;
        let file = p.display().to_string();
        let part = parse_thad_spec(&text)
            .map_err(|ds| Diagnostics(ds.iter().map(|d| d.render(&file) + "\n").collect()))?;
        set = set.merge(part).map_err(|e| anyhow!("{file}: {e}"))?;
        labels.push(file);
    }
    set = set.with_values(&load_consts(&args.consts)?);
    set.validate().map_err(|e| anyhow!("{e}"))?;
    Ok((set, labels.join("+")))
}

fn load_consts(paths: &[PathBuf]) -> Result<BTreeMap<String, i64>> {
    let mut values = BTreeMap::new();
    for p in paths {
        let file = p.display().to_string();
        let table = parse_constants(&read(p)?)
            .map_err(|ds| Diagnostics(ds.iter().map(|d| d.render(&file) + "\n").collect()))?;
        values.extend(table);
    }
    Ok(values)
}

fn color_enabled() -> bool {
    match std::env::var("THADC_COLOR").as_deref() {
        Ok("always") => true,
        Ok("never") => false,
        _ => std::io::stdout().is_terminal() && std::env::var_os("NO_COLOR").is_none(),
    }
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Parse, inline and check one program.
fn check_file(args: &CheckArgs, set: &ThadSet, spec_label: &str, path: &Path) -> Result<Report> {
    let start = Instant::now();
    let file = path.display().to_string();
    let src = read(path)?;
    let diag = |e: frontend::FrontendError| Diagnostics(e.render(&file) + "\n");
    let model = parse_program_with_entry(&src, &file, &args.entry).map_err(diag)?;
    let set = match &args.thads {
        Some(ids) => {
            let directives = frontend::Directives {
                select: Some(ids.clone()),
                aliases: model.directives.aliases.clone(),
            };
            directives.apply(set)
        }
        None => model.directives.apply(set),
    }
    .map_err(|e| anyhow!("{file}: {e}"))?;
    let cfg = model.inline(args.inline_depth).map_err(diag)?;
    let prog = ResolvedProgram::new(&file, cfg, &set);
    let verdicts = checker::check(&prog, &set);
    let mut report = Report::new(spec_label, &file, &set, &verdicts);
    if let Some(k) = args.unroll {
        let oracle = brute_force_paths(&prog, &set, k, DEFAULT_PATH_CAP)?;
        for e in &mut report.entries {
            let ok = oracle[&e.id];
            if e.status == Status::Satisfied && !ok {
                eprintln!("thadc: warning: {file}: {} is violated on a path with loops unrolled {k} times", e.id);
            }
            e.oracle = Some(ok);
        }
    }
    if !args.no_timing {
        report.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    }
    Ok(report)
}

fn run_check(args: CheckArgs) -> Result<u8> {
    let (set, label) = load_spec(&args.spec)?;
    if args.corpus {
        return run_corpus(&args, &set, &label);
    }
    if args.files.is_empty() {
        bail!("no program files given");
    }
    let mut codes = Vec::new();
    let mut text = String::new();
    let color = args.format == Format::Text && args.output.is_none() && color_enabled();
    for path in &args.files {
        let report = check_file(&args, &set, &label, path)?;
        codes.push(report.exit_code());
        text.push_str(&match args.format {
            Format::Json => report.to_json(),
            Format::Text => report.render_text(color),
        });
    }
    emit(&args.output, &text)?;
    // Any violation wins over inconclusive results.
    Ok(if codes.contains(&1) {
        1
    } else if codes.contains(&3) {
        3
    } else {
        0
    })
}

/// Expected verdict matrix of one corpus program.
#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
struct Fixture {
    exit_code: i32,
    verdicts: BTreeMap<String, String>,
}

fn fixture_of(report: &Report) -> Fixture {
    Fixture {
        exit_code: report.exit_code(),
        verdicts: report
            .entries
            .iter()
            .map(|e| {
                let v = if e.status == Status::Satisfied && e.trivial {
                    "trivially_satisfied".to_string()
                } else {
                    e.status.to_string()
                };
                (e.id.clone(), v)
            })
            .collect(),
    }
}

fn run_corpus(args: &CheckArgs, set: &ThadSet, label: &str) -> Result<u8> {
    let dirs = if args.files.is_empty() {
        vec![PathBuf::from("corpus")]
    } else {
        args.files.clone()
    };
    let mut programs = Vec::new();
    for d in &dirs {
        for entry in std::fs::read_dir(d).with_context(|| format!("cannot read {}", d.display()))? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "c") {
                programs.push((d.clone(), p));
            }
        }
    }
    programs.sort_by(|a, b| a.1.cmp(&b.1));
    if programs.is_empty() {
        bail!("no corpus programs found");
    }
    let results: Vec<Result<Report>> = std::thread::scope(|s| {
        let handles: Vec<_> = programs
            .iter()
            .map(|(_, p)| s.spawn(|| check_file(args, set, label, p)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("checker thread panicked"))
            .collect()
    });
    let mut out = String::new();
    let mut failed = false;
    for ((dir, p), result) in programs.iter().zip(results) {
        let report = result?;
        let stem = p.file_stem().expect("file has a name").to_string_lossy();
        let fixture_path = dir.join("expected").join(format!("{stem}.json"));
        let expected: Fixture = serde_json::from_str(&read(&fixture_path)?)
            .with_context(|| format!("malformed fixture {}", fixture_path.display()))?;
        let actual = fixture_of(&report);
        if actual == expected {
            out.push_str(&format!("ok       {}\n", p.display()));
        } else {
            failed = true;
            out.push_str(&format!("MISMATCH {}\n", p.display()));
            for (id, v) in &actual.verdicts {
                let want = expected.verdicts.get(id).map_or("<absent>", String::as_str);
                if want != v {
                    out.push_str(&format!("    {id}: expected {want}, got {v}\n"));
                }
            }
            for id in expected
                .verdicts
                .keys()
                .filter(|id| !actual.verdicts.contains_key(*id))
            {
                out.push_str(&format!(
                    "    {id}: expected {}, not checked\n",
                    expected.verdicts[id]
                ));
            }
            if actual.exit_code != expected.exit_code {
                out.push_str(&format!(
                    "    exit code: expected {}, got {}\n",
                    expected.exit_code, actual.exit_code
                ));
            }
        }
    }
    emit(&args.output, &out)?;
    Ok(u8::from(failed))
}

fn run_annotate(args: AnnotateArgs) -> Result<u8> {
    let (set, _) = load_spec(&args.spec)?;
    let mode = match args.mode {
        ModeArg::Acsl => Mode::Acsl,
        ModeArg::Assert => Mode::Assert,
    };
    let text = if args.wrapper {
        if args.hal_source.is_some() {
            bail!("--wrapper takes no HAL source");
        }
        annotate::emit_wrapper(&set, mode)
    } else {
        let path = args
            .hal_source
            .as_ref()
            .ok_or_else(|| anyhow!("a HAL source file or --wrapper is required"))?;
        let src = read(path)?;
        let plan = annotate::plan_annotations(&set);
        let opts = EmitOptions {
            guard_updates: args.guarded_updates,
        };
        annotate::emit_annotated_source(&plan, &set, &src, mode, opts)
            .map_err(|e| anyhow!("{}: {e}", path.display()))?
            .text
    };
    emit(&args.output, &text)?;
    Ok(0)
}

fn dot_node(pattern: &str) -> String {
    if thadc_core::model::is_identifier(pattern) {
        pattern.to_string()
    } else {
        format!("\"{pattern}\"")
    }
}

fn run_explain(args: ExplainArgs) -> Result<u8> {
    let (set, _) = load_spec(&args.spec)?;
    let mut text = String::new();
    match args.format {
        GraphFormat::Dot => {
            text.push_str("digraph thads {\n");
            for t in &set.thads {
                let binding = if t.binding.is_some() {
                    ", style=bold"
                } else {
                    ""
                };
                text.push_str(&format!(
                    "    {} -> {} [label=\"{}\"{binding}];\n",
                    dot_node(&t.dependency.to_string()),
                    dot_node(&t.dependent.to_string()),
                    t.id
                ));
            }
            text.push_str("}\n");
        }
        GraphFormat::Text => {
            let mut order: Vec<String> = Vec::new();
            let mut adj: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for t in &set.thads {
                let from = t.dependency.to_string();
                if !adj.contains_key(&from) {
                    order.push(from.clone());
                }
                let fd = if t.binding.is_some() {
                    ", same descriptor"
                } else {
                    ""
                };
                adj.entry(from)
                    .or_default()
                    .push(format!("{} ({}{fd})", t.dependent, t.id));
            }
            for from in order {
                text.push_str(&format!("{from} enables:\n"));
                for to in &adj[&from] {
                    text.push_str(&format!("    {to}\n"));
                }
            }
            for a in &set.aliases {
                text.push_str(&format!(
                    "alias: {} satisfies {}\n",
                    a.constant, a.satisfies
                ));
            }
        }
    }
    emit(&args.output, &text)?;
    Ok(0)
}

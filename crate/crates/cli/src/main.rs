use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use resbound::fixpoint::{analyze, AnalysisOptions, AnalysisResult};
use resbound::frontend::ast::Program;
use resbound::frontend::parse_program;
use resbound::oracle::check_entry;
use resbound::regtypes::TypeGrammar;
use resbound::report::{Golden, Report};

#[derive(Parser)]
#[command(
    name = "resbound",
    version,
    about = "Lower and upper resource bounds for logic programs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analyse a program and print its bounds.
    Analyze {
        file: PathBuf,
        /// Exit with status 1 when the analysis produced diagnostics.
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Write the report here instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Only analyse these resources (repeatable).
        #[arg(long = "resource", value_name = "NAME")]
        resources: Vec<String>,
    },
    /// Compare the bounds with concrete runs on random inputs.
    Check {
        file: PathBuf,
        /// Size budget per input argument.
        #[arg(long, default_value_t = 8)]
        budget: i64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "resource", value_name = "NAME")]
        resources: Vec<String>,
    },
    /// Compare complexity orders of every `*.pl` in a directory with its `.order` file.
    Corpus { dir: PathBuf },
}

/// Failure that maps to a specific exit status.
struct Exit(u8);

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Analyze {
            file,
            strict,
            format,
            output,
            resources,
        } => cmd_analyze(&file, strict, format, output.as_deref(), resources),
        Cmd::Check {
            file,
            budget,
            samples,
            seed,
            resources,
        } => cmd_check(&file, budget, samples, seed, resources),
        Cmd::Corpus { dir } => cmd_corpus(&dir),
    };
    match res {
        Ok(Exit(code)) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(file: &Path, resources: Vec<String>) -> anyhow::Result<(Program, AnalysisResult)> {
    let src =
        std::fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let prog = parse_program(&src).map_err(|e| anyhow::anyhow!("{}:{e}", file.display()))?;
    let opts = AnalysisOptions {
        resources: (!resources.is_empty()).then_some(resources),
        ..Default::default()
    };
    let result = analyze(&prog, &opts).with_context(|| format!("{}", file.display()))?;
    Ok((prog, result))
}

fn program_name(file: &Path) -> String {
    file.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn cmd_analyze(
    file: &Path,
    strict: bool,
    format: Format,
    output: Option<&Path>,
    resources: Vec<String>,
) -> anyhow::Result<Exit> {
    let (_, result) = load(file, resources)?;
    let report = Report::from_result(&program_name(file), &result);
    let text = match format {
        Format::Text => report.to_text(),
        Format::Structured => report.to_structured(),
    };
    match output {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    let noisy = report.all_diagnostics().next().is_some();
    Ok(Exit(if strict && noisy { 1 } else { 0 }))
}

fn cmd_check(
    file: &Path,
    budget: i64,
    samples: usize,
    seed: u64,
    resources: Vec<String>,
) -> anyhow::Result<Exit> {
    let (prog, result) = load(file, resources)?;
    let grammar = TypeGrammar::from_program(&prog);
    let mut failed = false;
    for entry in result.entries.iter().filter(|e| e.entry) {
        let s = check_entry(
            &prog,
            &result.resources,
            entry,
            &grammar,
            budget,
            samples,
            seed,
        )
        .with_context(|| format!("checking {}", entry.version))?;
        println!(
            "{:<16} {}/{} pass  {} violating  {} diverged",
            s.version,
            s.passed,
            s.samples(),
            s.failed,
            s.diverged
        );
        for (goal, msg) in s.reports.iter().take(5) {
            println!("  {goal}: {msg}");
        }
        failed |= s.failed > 0;
    }
    Ok(Exit(if failed { 1 } else { 0 }))
}

enum Row {
    Done {
        lb: String,
        ub: String,
        golden: Golden,
        ok: (bool, bool),
    },
    NoGolden {
        lb: String,
        ub: String,
    },
    Error(String),
}

fn corpus_row(pl: &Path) -> Row {
    let bounds = match load(pl, Vec::new()) {
        Ok((_, r)) => {
            let report = Report::from_result(&program_name(pl), &r);
            match report
                .versions
                .iter()
                .find(|v| v.entry)
                .and_then(|v| v.main_cost())
                .cloned()
            {
                Some(b) => b,
                None => return Row::Error("no entry bounds".into()),
            }
        }
        Err(e) => return Row::Error(format!("{e:#}")),
    };
    let Ok(src) = std::fs::read_to_string(pl.with_extension("order")) else {
        return Row::NoGolden {
            lb: bounds.lb_order,
            ub: bounds.ub_order,
        };
    };
    match Golden::parse(&src) {
        Ok(golden) => {
            let ok = golden.matches(&bounds);
            Row::Done {
                lb: bounds.lb_order,
                ub: bounds.ub_order,
                golden,
                ok,
            }
        }
        Err(e) => Row::Error(format!("{}: {e}", pl.with_extension("order").display())),
    }
}

fn cmd_corpus(dir: &Path) -> anyhow::Result<Exit> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pl"))
        .collect();
    if files.is_empty() {
        bail!("no .pl programs in {}", dir.display());
    }
    files.sort();
    let rows: Vec<Row> = std::thread::scope(|s| {
        let jobs: Vec<_> = files
            .iter()
            .map(|f| s.spawn(move || corpus_row(f)))
            .collect();
        jobs.into_iter()
            .map(|j| {
                j.join()
                    .unwrap_or_else(|_| Row::Error("analysis panicked".into()))
            })
            .collect()
    });

    println!(
        "{:<12} {:<16} {:<16} {:<16} {:<16} match",
        "benchmark", "LB", "UB", "expected LB", "expected UB"
    );
    let (mut mismatches, mut missing) = (0, 0);
    for (f, row) in files.iter().zip(&rows) {
        let name = program_name(f);
        match row {
            Row::Done { lb, ub, golden, ok } => {
                let flag = match ok {
                    (true, true) => "yes",
                    (false, true) => "NO (lb)",
                    (true, false) => "NO (ub)",
                    (false, false) => "NO",
                };
                if *ok != (true, true) {
                    mismatches += 1;
                }
                println!(
                    "{name:<12} {lb:<16} {ub:<16} {:<16} {:<16} {flag}",
                    golden.lb, golden.ub
                );
            }
            Row::NoGolden { lb, ub } => {
                missing += 1;
                println!(
                    "{name:<12} {lb:<16} {ub:<16} {:<16} {:<16} missing golden",
                    "-", "-"
                );
            }
            Row::Error(e) => {
                mismatches += 1;
                println!("{name:<12} error: {e}");
            }
        }
    }
    println!(
        "{} benchmarks, {} mismatched, {} without golden",
        files.len(),
        mismatches,
        missing
    );
    Ok(Exit(if missing > 0 {
        2
    } else if mismatches > 0 {
        1
    } else {
        0
    }))
}

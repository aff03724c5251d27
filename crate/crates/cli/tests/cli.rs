use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use resbound::fixpoint::{analyze, AnalysisOptions};
use resbound::frontend::parse_program;
use resbound::oracle::check_entry;
use resbound::regtypes::TypeGrammar;
use resbound::report::Report;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn resbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resbound"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_append_reports_linear_steps() {
    let o = resbound(&["analyze", path(&corpus().join("append.pl"))]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("order α .. β"), "{out}");
    assert!(out.contains("not_fails / is_det"), "{out}");
}

#[test]
fn analyze_hanoi_reports_exponential_upper_bound() {
    let o = resbound(&["analyze", path(&corpus().join("hanoi.pl"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("order 1 .. 2^ν"), "{}", stdout(&o));
}

#[test]
fn syntax_error_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("broken.pl");
    fs::write(&f, "p(X) :- q(X.\n").unwrap();
    let o = resbound(&["analyze", path(&f)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("broken.pl:1:"), "{err}");
}

#[test]
fn unreadable_file_and_unknown_resource_exit_2() {
    assert_eq!(
        resbound(&["analyze", "/nonexistent/x.pl"]).status.code(),
        Some(2)
    );
    let o = resbound(&[
        "analyze",
        "--resource",
        "heap",
        path(&corpus().join("append.pl")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        resbound(&["analyze", "--format", "yaml", "x.pl"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn strict_turns_diagnostics_into_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("undef.pl");
    fs::write(&f, ":- entry p(num, out).\np(X, Y) :- q(X, Y).\n").unwrap();
    assert_eq!(resbound(&["analyze", path(&f)]).status.code(), Some(0));
    let o = resbound(&["analyze", "--strict", path(&f)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("undefined"));
    let clean = resbound(&["analyze", "--strict", path(&corpus().join("append.pl"))]);
    assert_eq!(clean.status.code(), Some(0));
}

#[test]
fn structured_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["append", "isortlist", "nub", "coupled"] {
        let out = dir.path().join(format!("{name}.report"));
        let o = resbound(&[
            "analyze",
            "--format",
            "structured",
            "-o",
            path(&out),
            path(&corpus().join(format!("{name}.pl"))),
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
        let text = fs::read_to_string(&out).unwrap();
        let parsed = Report::parse_structured(&text).unwrap();
        assert_eq!(parsed.to_structured(), text);

        let prog = parse_program(&fs::read_to_string(corpus().join(format!("{name}.pl"))).unwrap())
            .unwrap();
        let direct =
            Report::from_result(name, &analyze(&prog, &AnalysisOptions::default()).unwrap());
        assert_eq!(parsed, direct);
    }
}

#[test]
fn resource_filter_limits_the_report() {
    let o = resbound(&[
        "analyze",
        "--format",
        "structured",
        "--resource",
        "steps",
        path(&corpus().join("fib.pl")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = Report::parse_structured(&stdout(&o)).unwrap();
    assert_eq!(r.resources, vec!["steps".to_string()]);
}

#[test]
fn check_append_passes_every_sample() {
    let o = resbound(&[
        "check",
        path(&corpus().join("append.pl")),
        "--budget",
        "8",
        "--samples",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("100/100 pass"), "{}", stdout(&o));
}

#[test]
fn check_fib_with_larger_budget() {
    let o = resbound(&[
        "check",
        path(&corpus().join("fib.pl")),
        "--budget",
        "12",
        "--samples",
        "30",
        "--seed",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("30/30 pass"), "{}", stdout(&o));
}

#[test]
fn corrupted_bound_is_reported_as_violation() {
    let prog = parse_program(&fs::read_to_string(corpus().join("append.pl")).unwrap()).unwrap();
    let r = analyze(&prog, &AnalysisOptions::default()).unwrap();
    let mut entry = r.entries.iter().find(|e| e.entry).unwrap().clone();
    let steps_ub = entry.resource("steps").1.unwrap().clone();
    let key = entry
        .forms
        .iter()
        .find(|(_, f)| **f == steps_ub)
        .map(|(k, _)| k.clone())
        .unwrap();
    let one = entry.solutions().1.unwrap().clone();
    entry.forms.insert(key, one);
    let s = check_entry(
        &prog,
        &r.resources,
        &entry,
        &TypeGrammar::from_program(&prog),
        8,
        50,
        0,
    )
    .unwrap();
    assert!(s.failed > 0);
    assert!(s
        .reports
        .iter()
        .any(|(_, m)| m.contains("above upper bound")));
}

#[test]
fn full_corpus_matches() {
    let o = resbound(&["corpus", path(&corpus())]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert_eq!(
        out.lines().filter(|l| l.ends_with(" yes")).count(),
        15,
        "{out}"
    );
}

fn copy_corpus(names: &[&str]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for n in names {
        for ext in ["pl", "order"] {
            fs::copy(
                corpus().join(format!("{n}.{ext}")),
                dir.path().join(format!("{n}.{ext}")),
            )
            .unwrap();
        }
    }
    dir
}

#[test]
fn edited_golden_is_flagged() {
    let dir = copy_corpus(&["append", "hanoi", "listnum"]);
    fs::write(dir.path().join("hanoi.order"), "lb: 1\nub: ν²\n").unwrap();
    let o = resbound(&["corpus", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains("NO")).count(), 1, "{out}");
    assert!(
        out.lines()
            .any(|l| l.starts_with("hanoi") && l.ends_with("NO (ub)")),
        "{out}"
    );
}

#[test]
fn missing_golden_and_empty_dir_are_input_errors() {
    let dir = copy_corpus(&["append"]);
    fs::remove_file(dir.path().join("append.order")).unwrap();
    let o = resbound(&["corpus", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("missing golden"));

    let empty = tempfile::tempdir().unwrap();
    let o = resbound(&["corpus", path(empty.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no .pl programs"));
}

#[test]
fn structured_reports_match_stored_goldens() {
    let mut seen = 0;
    for entry in fs::read_dir(corpus()).unwrap() {
        let golden = entry.unwrap().path();
        if golden.extension().is_none_or(|e| e != "report") {
            continue;
        }
        let o = resbound(&[
            "analyze",
            "--format",
            "structured",
            path(&golden.with_extension("pl")),
        ]);
        assert_eq!(
            stdout(&o),
            fs::read_to_string(&golden).unwrap(),
            "{}",
            golden.display()
        );
        seen += 1;
    }
    assert_eq!(seen, 15);
}

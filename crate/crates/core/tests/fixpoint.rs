use resbound::fixpoint::{analyze, AnalysisOptions};
use resbound::frontend::parse_program;
use resbound::sizedtypes::Dir;

const APPEND: &str = r#"
:- regtype listnum := [] | [num|listnum].
:- entry append(X: listnum, Y: listnum, Z: out).
append([],S,S).
append([E|R],S,[E|T]) :- append(R,S,T).
"#;

fn show(src: &str) -> resbound::fixpoint::AnalysisResult {
    let p = parse_program(src).unwrap();
    let r = analyze(&p, &AnalysisOptions::default()).unwrap();
    for e in &r.entries {
        println!("{} {} {} {}", e.version, e.element, e.nf, e.det);
        for (k, f) in &e.forms {
            println!("  {k} = {} [{}]", f.main, f.pattern);
        }
    }
    println!("{:?}", r.diagnostics);
    r
}

#[test]
fn append_steps_and_output() {
    let r = show(APPEND);
    let e = r.entry_for("append").unwrap();
    assert_eq!(e.resource("steps").1.unwrap().main.to_string(), "β_X+1");
    assert_eq!(e.form("sol", Dir::Le).unwrap().main.to_string(), "1");
    assert_eq!(e.form("sol", Dir::Ge).unwrap().main.to_string(), "1");
    assert!(e.output_schema(2).is_some());
}

#[test]
fn append_output_relation() {
    let r = show(APPEND);
    let e = r.entry_for("append").unwrap();
    let got: String = e
        .output_schema(2)
        .unwrap()
        .to_string()
        .split_whitespace()
        .collect();
    assert_eq!(got, "ln^(α_X+α_Y,β_X+β_Y)(n^(min(γ_X,γ_Y),max(δ_X,δ_Y)))");
}

#[test]
fn listfact_costs_multiply_through_fact() {
    let r = show(
        &std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../corpus/listfact.pl"
        ))
        .unwrap(),
    );
    let e = r.entry_for("listfact").unwrap();
    let (lo, hi) = e.resource("steps");
    assert_eq!(lo.unwrap().main.to_string(), "α_1·γ_1+2·α_1+1");
    assert_eq!(hi.unwrap().main.to_string(), "β_1·δ_1+2·β_1+1");
    let (sl, su) = e.solutions();
    assert_eq!(
        (sl.unwrap().main.to_string(), su.unwrap().main.to_string()),
        ("1".into(), "1".into())
    );
    let fact = r.version("fact").unwrap();
    assert_eq!(fact.resource("steps").1.unwrap().main.to_string(), "ν_1+1");
}

#[test]
fn distinct_call_patterns_get_distinct_versions() {
    let src = r#"
:- entry drive(list(num), list(list(num)), out, out).
drive(A, B, C, D) :- append(A, A, C), append(B, B, D).
append([], S, S).
append([E|R], S, [E|T]) :- append(R, S, T).
"#;
    let r = show(src);
    let versions: Vec<_> = r
        .entries
        .iter()
        .filter(|e| e.pred.name == "append")
        .map(|e| e.version.clone())
        .collect();
    assert_eq!(versions.len(), 2, "{versions:?}");
    for v in &versions {
        let e = r.version(v).unwrap();
        assert!(e
            .resource("steps")
            .1
            .unwrap()
            .main
            .to_string()
            .ends_with("+1"));
    }
}

#[test]
fn undefined_callee_is_a_diagnostic_not_an_error() {
    let r = show(":- entry p(num, out).\np(X, Y) :- q(X, Y).\n");
    assert!(
        r.diagnostics.iter().any(|d| d.contains("q/2")),
        "{:?}",
        r.diagnostics
    );
    let e = r.entry_for("p").unwrap();
    assert_eq!(e.nf.to_string(), "fails");
}

#[test]
fn entry_with_unknown_type_is_rejected() {
    let p = parse_program(":- entry p(widget, out).\np(X, X).\n").unwrap();
    assert!(analyze(&p, &AnalysisOptions::default()).is_err());
}

#[test]
fn corpus_stabilizes_quickly_and_reproducibly() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    for f in std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()) {
        if f.extension().is_none_or(|e| e != "pl") {
            continue;
        }
        let p = parse_program(&std::fs::read_to_string(&f).unwrap()).unwrap();
        let a = analyze(&p, &AnalysisOptions::default()).unwrap();
        let b = analyze(&p, &AnalysisOptions::default()).unwrap();
        for e in &a.entries {
            assert!(
                e.iterations <= 5,
                "{}: {} took {} iterations",
                f.display(),
                e.version,
                e.iterations
            );
            let other = b.version(&e.version).unwrap();
            assert!(resbound::resdomain::equivalent(&e.element, &other.element).unwrap());
            assert_eq!(e.forms, other.forms);
        }
    }
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use resbound::auxdomains::{Det, Nf};
use resbound::fixpoint::{analyze, AnalysisOptions};
use resbound::frontend::ast::Term;
use resbound::frontend::parse_program;
use resbound::oracle::{
    check_entry, generate_inputs, goal_for, run, InputGen, Limits, OracleError,
};
use resbound::regtypes::{TypeGrammar, TypeTerm};
use resbound::resdomain::shape_of;
use resbound::sizedtypes::size_of_term;

fn corpus_files() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "pl"))
        .collect();
    v.sort();
    v
}

#[test]
fn corpus_bounds_hold_on_random_inputs() {
    let mut checked = 0;
    for f in corpus_files() {
        let prog = parse_program(&std::fs::read_to_string(&f).unwrap()).unwrap();
        let r = analyze(&prog, &AnalysisOptions::default()).unwrap();
        let g = TypeGrammar::from_program(&prog);
        // versions with a constrained domain or untyped inputs cannot be sampled blindly
        for e in r
            .entries
            .iter()
            .filter(|e| e.d.is_top() && e.sig.opaque.is_empty())
        {
            let s = check_entry(&prog, &r.resources, e, &g, 8, 100, 0).unwrap();
            assert_eq!(
                s.failed,
                0,
                "{}: {}: {:?}",
                f.display(),
                e.version,
                s.reports
            );
            assert_eq!(
                s.diverged,
                0,
                "{}: {}: {:?}",
                f.display(),
                e.version,
                s.reports
            );
            checked += s.passed;
        }
    }
    assert!(checked >= 1500);
}

#[test]
fn non_failure_and_determinacy_are_observed() {
    for f in corpus_files() {
        let prog = parse_program(&std::fs::read_to_string(&f).unwrap()).unwrap();
        let r = analyze(&prog, &AnalysisOptions::default()).unwrap();
        let g = TypeGrammar::from_program(&prog);
        for e in r
            .entries
            .iter()
            .filter(|e| e.d.is_top() && e.sig.opaque.is_empty())
        {
            for seed in 0..100 {
                let mut gen = InputGen::new(&g, 8, seed);
                let inputs: BTreeMap<usize, _> = e
                    .sig
                    .inputs
                    .iter()
                    .map(|(&i, s)| (i, gen.sample(&s.ty()).unwrap()))
                    .collect();
                let goal = goal_for(e, &inputs);
                let m = run(&prog, &goal, &r.resources, Limits::default()).unwrap();
                if e.nf == Nf::NotFails {
                    assert!(m.solutions >= 1, "{}: {goal} failed", e.version);
                }
                if e.det == Det::IsDet {
                    assert!(
                        m.solutions <= 1,
                        "{}: {goal} has {} solutions",
                        e.version,
                        m.solutions
                    );
                }
            }
        }
    }
}

type Slots = Vec<(Option<i64>, Option<i64>)>;

/// Independent size count per slot: length, then element slots as
/// (min, max) over the elements; numbers are their own value.
fn naive_size(t: &Term, ty: &TypeTerm) -> Slots {
    match ty {
        TypeTerm::Num => match t {
            Term::Int(n) => vec![(Some(*n), Some(*n))],
            _ => panic!("not a number: {t}"),
        },
        TypeTerm::List(e) => {
            let mut elems = Vec::new();
            let mut cur = t;
            while let Some((h, tail)) = cur.as_cons() {
                elems.push(naive_size(h, e));
                cur = tail;
            }
            let width = naive_size(&sample_of(e), e).len();
            let mut out = vec![(Some(elems.len() as i64), Some(elems.len() as i64))];
            for k in 0..width {
                let lo = elems.iter().filter_map(|x| x[k].0).min();
                let hi = elems.iter().filter_map(|x| x[k].1).max();
                out.push((lo, hi));
            }
            out
        }
        _ => panic!("unsupported type {ty}"),
    }
}

fn sample_of(ty: &TypeTerm) -> Term {
    match ty {
        TypeTerm::Num => Term::Int(0),
        _ => Term::nil(),
    }
}

#[test]
fn generated_sizes_match_a_naive_count() {
    let g = TypeGrammar::default();
    for ty in [
        TypeTerm::Num,
        TypeTerm::list(TypeTerm::Num),
        TypeTerm::list(TypeTerm::list(TypeTerm::Num)),
    ] {
        let schema = shape_of(&ty, &g).unwrap();
        for t in generate_inputs(&ty, &g, 8, 3, 200).unwrap() {
            assert!(g.membership(&t, &ty).unwrap());
            let got: Slots = size_of_term(&t, &schema, &g)
                .unwrap()
                .into_iter()
                .map(|(l, h)| (l.to_i64(), h.to_i64()))
                .collect();
            assert_eq!(got, naive_size(&t, &ty), "{t}");
            assert!(got.iter().all(|&(_, h)| h.is_none_or(|h| h <= 8)));
        }
    }
}

#[test]
fn step_limit_is_reported() {
    let prog = parse_program("loop(X) :- loop(X).\n").unwrap();
    let goal = resbound::frontend::parser::parse_term("loop(1)").unwrap();
    let err = run(&prog, &goal, &[], Limits { max_steps: 1000 }).unwrap_err();
    assert!(matches!(err, OracleError::LimitExceeded(_)), "{err:?}");
}

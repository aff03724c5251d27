use std::collections::BTreeMap;
use std::path::Path;

use resbound::fixpoint::{analyze, AnalysisOptions};
use resbound::frontend::{normalize_program, parse_program};
use resbound::oracle::{goal_for, run, InputGen, Limits};
use resbound::regtypes::TypeGrammar;

#[test]
fn normalization_preserves_measures_on_corpus() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let (mut programs, mut changed) = (0, 0);
    for f in std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()) {
        if f.extension().is_none_or(|e| e != "pl") {
            continue;
        }
        let prog = parse_program(&std::fs::read_to_string(&f).unwrap()).unwrap();
        let norm = normalize_program(&prog);
        if norm.clauses_source() != prog.clauses_source() {
            changed += 1;
        }
        let r = analyze(&prog, &AnalysisOptions::default()).unwrap();
        let g = TypeGrammar::from_program(&prog);
        for entry in r.entries.iter().filter(|e| e.entry) {
            for seed in 0..50 {
                let mut gen = InputGen::new(&g, 8, seed);
                let inputs: BTreeMap<usize, _> = entry
                    .sig
                    .inputs
                    .iter()
                    .map(|(&i, s)| (i, gen.sample(&s.ty()).unwrap()))
                    .collect();
                let goal = goal_for(entry, &inputs);
                let a = run(&prog, &goal, &r.resources, Limits::default());
                let b = run(&norm, &goal, &r.resources, Limits::default());
                match (a, b) {
                    (Ok(a), Ok(b)) => {
                        assert_eq!(a.solutions, b.solutions, "{}: {goal}", f.display());
                        assert_eq!(a.resources, b.resources, "{}: {goal}", f.display());
                    }
                    (a, b) => panic!("{}: {goal}: {a:?} vs {b:?}", f.display()),
                }
            }
        }
        programs += 1;
    }
    assert_eq!(programs, 15);
    assert!(
        changed >= 10,
        "only {changed} programs changed by normalization"
    );
}

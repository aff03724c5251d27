use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resbound::fixpoint::{analyze, AnalysisOptions};
use resbound::frontend::parse_program;
use resbound::recurrence::system::{normalize, EqSystem, Unroller};
use resbound::recurrence::{BVar, Value};
use resbound::sizedtypes::Dir;

fn corpus_programs() -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "pl"))
        .map(|p| {
            (
                p.file_stem().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn closed_forms_agree_with_unrolling() {
    // deep unrolling recursion
    std::thread::Builder::new()
        .stack_size(512 << 20)
        .spawn(differential)
        .unwrap()
        .join()
        .unwrap();
}

fn differential() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut exact, mut dominated, mut skipped, mut failures) =
        (0usize, 0usize, 0usize, Vec::new());
    for (name, src) in corpus_programs() {
        let prog = parse_program(&src).unwrap();
        let r = analyze(&prog, &AnalysisOptions::default()).unwrap();
        let sys = EqSystem {
            fns: r
                .entries
                .iter()
                .flat_map(|e| e.fns.iter().map(|f| (f.name.clone(), f.clone())))
                .collect(),
            defs: BTreeMap::new(),
        };
        let sys = normalize(&sys).unwrap();
        let mut unroller = Unroller::new(&sys);
        for e in &r.entries {
            for cf in e.forms.values() {
                if !sys.fns.contains_key(&cf.name) {
                    continue;
                }
                for _ in 0..50 {
                    let env: BTreeMap<BVar, Value> = cf
                        .formals
                        .iter()
                        .map(|v| (v.clone(), Value::int(rng.gen_range(0..=12))))
                        .collect();
                    let closed = cf.evaluate(&env).unwrap();
                    let args: Vec<Value> = cf.formals.iter().map(|v| env[v]).collect();
                    let Ok(unrolled) = unroller.eval_fn(&cf.name, &args) else {
                        skipped += 1;
                        continue;
                    };
                    let ok = if cf.exact {
                        exact += 1;
                        closed == unrolled
                    } else {
                        dominated += 1;
                        match cf.dir {
                            Dir::Le => unrolled.le(closed),
                            Dir::Ge => closed.le(unrolled),
                        }
                    };
                    if !ok {
                        failures.push(format!(
                            "{name}: {} at {env:?}: closed {closed} unrolled {unrolled} (exact {})",
                            cf.name, cf.exact
                        ));
                    }
                }
            }
        }
    }
    eprintln!("exact {exact} dominated {dominated} skipped {skipped}");
    assert!(exact > 1000, "only {exact} exact comparisons");
    assert!(dominated > 0);
    assert!(
        failures.is_empty(),
        "{} failures:\n{}",
        failures.len(),
        failures[..failures.len().min(20)].join("\n")
    );
}

//! Acceptance report: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resbound::auxdomains::{Det, Nf};
use resbound::fixpoint::{analyze, AnalysisOptions, AnalysisResult};
use resbound::frontend::ast::Program;
use resbound::frontend::{normalize_program, parse_program};
use resbound::oracle::{check_entry, goal_for, run, InputGen, Limits};
use resbound::recurrence::system::{normalize, EqSystem, Unroller};
use resbound::recurrence::{order_of, BVar, Guard, Inequation, SymExpr, Value};
use resbound::regtypes::TypeGrammar;
use resbound::resdomain::{bottom, equivalent, leq, lub, AbstractElement, ResourceDef};
use resbound::sizedtypes::Dir;

const UPPER: [(&str, &str); 15] = [
    ("append", "β"),
    ("appendAll2", "b1b2b3"),
    ("coupled", "ν"),
    ("dyade", "β1β2"),
    ("erathos", "β²"),
    ("fib", "φ^ν"),
    ("hanoi", "2^ν"),
    ("isort", "β²"),
    ("isortlist", "b1²b2"),
    ("listfact", "βδ"),
    ("listnum", "ν"),
    ("minsort", "β²"),
    ("nub", "b1²b2"),
    ("partition", "β"),
    ("zip3", "min(β1,β2,β3)"),
];

const LOWER: [(&str, &str); 15] = [
    ("append", "α"),
    ("appendAll2", "a1a2a3"),
    ("coupled", "μ"),
    ("dyade", "α1α2"),
    ("erathos", "α"),
    ("fib", "φ^μ"),
    ("hanoi", "1"),
    ("isort", "α²"),
    ("isortlist", "a1²"),
    ("listfact", "αγ"),
    ("listnum", "μ"),
    ("minsort", "α²"),
    ("nub", "a1"),
    ("partition", "α"),
    ("zip3", "min(α1,α2,α3)"),
];

struct Bench {
    name: String,
    prog: Program,
    result: AnalysisResult,
    elapsed: Duration,
}

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load_corpus() -> Vec<Bench> {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "pl"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|f| {
            let prog = parse_program(&std::fs::read_to_string(&f).unwrap()).unwrap();
            let t = Instant::now();
            let result = analyze(&prog, &AnalysisOptions::default()).unwrap();
            Bench {
                name: f.file_stem().unwrap().to_string_lossy().into_owned(),
                prog,
                result,
                elapsed: t.elapsed(),
            }
        })
        .collect()
}

fn strip(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

type Outcome = (bool, String);

fn orders(corpus: &[Bench], expected: &[(&str, &str)], dir: Dir) -> Outcome {
    let mut bad = Vec::new();
    for (name, want) in expected {
        let Some(b) = corpus.iter().find(|b| b.name == *name) else {
            bad.push(format!("{name}: missing"));
            continue;
        };
        let e = b.result.entries.iter().find(|e| e.entry).unwrap();
        let (lo, hi) = e.resource("steps");
        let form = if dir == Dir::Le { hi } else { lo };
        let got = form
            .map(|f| order_of(f).to_string())
            .unwrap_or_else(|| "none".into());
        if strip(&got) != strip(want) {
            bad.push(format!("{name}: {got} (expected {want})"));
        }
        if b.elapsed > Duration::from_secs(5) {
            bad.push(format!("{name}: {:?}", b.elapsed));
        }
    }
    let slowest = corpus.iter().map(|b| b.elapsed).max().unwrap_or_default();
    if bad.is_empty() {
        (
            true,
            format!(
                "{}/{} match, slowest analysis {slowest:.0?}",
                expected.len(),
                expected.len()
            ),
        )
    } else {
        (false, bad.join("; "))
    }
}

fn append_goldens(corpus: &[Bench]) -> Outcome {
    let b = corpus.iter().find(|b| b.name == "append").unwrap();
    let e = b.result.entry_for("append").unwrap();
    let (sl, su) = e.solutions();
    let sol = (sl.unwrap().main.to_string(), su.unwrap().main.to_string());
    let steps = e.resource("steps").1.unwrap().main.to_string();
    let out = strip(&e.output_schema(2).unwrap().to_string());
    let want_out = "ln^(α_X+α_Y,β_X+β_Y)(n^(min(γ_X,γ_Y),max(δ_X,δ_Y)))";
    let ok = sol == ("1".into(), "1".into()) && steps == "β_X+1" && out == want_out;
    (
        ok,
        format!(
            "solutions ({}, {}), steps ≤ {steps}, Z: {out}",
            sol.0, sol.1
        ),
    )
}

fn listfact_golden(corpus: &[Bench]) -> Outcome {
    let b = corpus.iter().find(|b| b.name == "listfact").unwrap();
    let e = b.result.entry_for("listfact").unwrap();
    let (sl, su) = e.solutions();
    let (nl, nu) = e.resource("steps");
    let got = [sl, su, nl, nu].map(|f| f.map(|f| f.main.to_string()).unwrap_or_default());
    let want = ["1", "1", "α_1·γ_1", "β_1·δ_1"];
    let ok = got.iter().zip(want).all(|(g, w)| strip(g) == strip(w));
    (
        ok,
        format!(
            "(s_L,s_U) = ({}, {}), (n_L,n_U) = ({}, {}); expected (1, 1), (α_1·γ_1, β_1·δ_1)",
            got[0], got[1], got[2], got[3]
        ),
    )
}

fn sampled_versions(b: &Bench) -> impl Iterator<Item = &resbound::fixpoint::AnalysisEntry> {
    b.result
        .entries
        .iter()
        .filter(|e| e.d.is_top() && e.sig.opaque.is_empty())
}

fn soundness_sweep(corpus: &[Bench]) -> Outcome {
    let t = Instant::now();
    let (mut runs, mut bad) = (0, Vec::new());
    for b in corpus {
        let g = TypeGrammar::from_program(&b.prog);
        for e in sampled_versions(b) {
            match check_entry(&b.prog, &b.result.resources, e, &g, 8, 100, 0) {
                Ok(s) => {
                    runs += s.samples();
                    if s.failed + s.diverged > 0 {
                        bad.push(format!(
                            "{}/{}: {} violating, {} diverged",
                            b.name, e.version, s.failed, s.diverged
                        ));
                    }
                }
                Err(err) => bad.push(format!("{}/{}: {err}", b.name, e.version)),
            }
        }
    }
    let elapsed = t.elapsed();
    if elapsed > Duration::from_secs(60) {
        bad.push(format!("took {elapsed:?}"));
    }
    (
        bad.is_empty(),
        if bad.is_empty() {
            format!("{runs} runs, 0 violations, {elapsed:.1?}")
        } else {
            bad.join("; ")
        },
    )
}

fn solver_differential(corpus: &[Bench]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut exact, mut dominated, mut bad) = (0, 0, Vec::new());
    for b in corpus {
        let fns = b
            .result
            .entries
            .iter()
            .flat_map(|e| e.fns.iter().map(|f| (f.name.clone(), f.clone())))
            .collect();
        let sys = normalize(&EqSystem {
            fns,
            defs: BTreeMap::new(),
        })
        .unwrap();
        let mut un = Unroller::new(&sys);
        for cf in b.result.entries.iter().flat_map(|e| e.forms.values()) {
            if !sys.fns.contains_key(&cf.name) {
                continue;
            }
            for _ in 0..50 {
                let args: Vec<Value> = cf
                    .formals
                    .iter()
                    .map(|_| Value::int(rng.gen_range(0..=12)))
                    .collect();
                let env: BTreeMap<BVar, Value> = cf
                    .formals
                    .iter()
                    .cloned()
                    .zip(args.iter().copied())
                    .collect();
                let closed = cf.evaluate(&env).unwrap();
                let unrolled = match un.eval_fn(&cf.name, &args) {
                    Ok(v) => v,
                    Err(e) => {
                        bad.push(format!("{}: {e}", cf.name));
                        continue;
                    }
                };
                let ok = if cf.exact {
                    exact += 1;
                    closed == unrolled
                } else {
                    dominated += 1;
                    if cf.dir == Dir::Le {
                        unrolled.le(closed)
                    } else {
                        closed.le(unrolled)
                    }
                };
                if !ok {
                    bad.push(format!("{} at {args:?}: {closed} vs {unrolled}", cf.name));
                }
            }
        }
    }
    bad.truncate(5);
    (
        bad.is_empty(),
        if bad.is_empty() {
            format!("{exact} exact, {dominated} dominance checks")
        } else {
            bad.join("; ")
        },
    )
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> SymExpr {
    const VARS: [&str; 7] = ["α_1", "β_1", "γ_1", "δ_1", "l0", "l1", "l2"];
    if depth == 0 || rng.gen_bool(0.4) {
        return if rng.gen_bool(0.3) {
            SymExpr::int(rng.gen_range(0..4))
        } else {
            SymExpr::var(VARS[rng.gen_range(0..VARS.len())])
        };
    }
    let (a, b) = (random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    match rng.gen_range(0..4) {
        0 => SymExpr::Add(vec![a, b]),
        1 => SymExpr::Mul(vec![a, b]),
        2 => SymExpr::max2(a, b),
        _ => SymExpr::min2(a, b),
    }
}

fn random_element(rng: &mut ChaCha8Rng) -> AbstractElement {
    const LHS: [&str; 7] = ["s_L", "s_U", "steps_L", "steps_U", "l0", "l1", "l2"];
    let mut e = bottom("p/2", &[ResourceDef::steps()]);
    e.bottom = false;
    for (l, v) in [("l0", "β_1"), ("l1", "δ_1"), ("l2", "γ_1")] {
        e.rels.push(Inequation {
            lhs: BVar::new(l),
            dir: Dir::Le,
            rhs: SymExpr::var(v),
            guard: Guard::top(),
        });
    }
    for _ in 0..rng.gen_range(0..6) {
        let mut guard = Guard::top();
        if rng.gen_bool(0.3) {
            guard.restrict(&BVar::new("β_1"), rng.gen_range(0..3), None);
        }
        let dir = if rng.gen_bool(0.5) { Dir::Ge } else { Dir::Le };
        e.rels.push(Inequation {
            lhs: BVar::new(LHS[rng.gen_range(0..LHS.len())]),
            dir,
            rhs: random_expr(rng, 3),
            guard,
        });
    }
    e.nf = if rng.gen_bool(0.5) {
        Nf::NotFails
    } else {
        Nf::Fails
    };
    e.failed = e.nf == Nf::Fails;
    e.det = if rng.gen_bool(0.5) {
        Det::IsDet
    } else {
        Det::NonDet
    };
    e
}

fn lattice(corpus: &[Bench]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let steps = [ResourceDef::steps()];
    let mut elems: Vec<(AbstractElement, &[ResourceDef])> = (0..100)
        .map(|_| (random_element(&mut rng), &steps[..]))
        .collect();
    for b in corpus {
        elems.extend(
            b.result
                .entries
                .iter()
                .map(|e| (e.element.clone(), &b.result.resources[..])),
        );
    }
    let mut bad = Vec::new();
    for (i, (x, resources)) in elems.iter().enumerate() {
        let bot = bottom(&x.version, resources);
        let y = &elems[(i * 37 + 11) % 100].0;
        let checks = [
            ("reflexive", leq(x, x)),
            ("bottom", leq(&bot, x)),
            ("idempotent", lub(x, x).and_then(|z| equivalent(&z, x))),
            (
                "commutative",
                if x.version == y.version {
                    lub(x, y).and_then(|a| lub(y, x).and_then(|b| equivalent(&a, &b)))
                } else {
                    Ok(true)
                },
            ),
        ];
        for (what, r) in checks {
            if !matches!(r, Ok(true)) {
                bad.push(format!("{what} fails for element {i}"));
            }
        }
    }
    bad.truncate(5);
    (
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} elements", elems.len())
        } else {
            bad.join("; ")
        },
    )
}

fn normalization(corpus: &[Bench]) -> Outcome {
    let (mut goals, mut bad) = (0, Vec::new());
    for b in corpus {
        let norm = normalize_program(&b.prog);
        let g = TypeGrammar::from_program(&b.prog);
        for e in b.result.entries.iter().filter(|e| e.entry) {
            for seed in 0..50 {
                let mut gen = InputGen::new(&g, 8, seed);
                let inputs: BTreeMap<usize, _> = e
                    .sig
                    .inputs
                    .iter()
                    .map(|(&i, s)| (i, gen.sample(&s.ty()).unwrap()))
                    .collect();
                let goal = goal_for(e, &inputs);
                let a = run(&b.prog, &goal, &b.result.resources, Limits::default())
                    .map(|m| (m.solutions, m.resources));
                let n = run(&norm, &goal, &b.result.resources, Limits::default())
                    .map(|m| (m.solutions, m.resources));
                goals += 1;
                if a != n {
                    bad.push(format!("{}: {goal}", b.name));
                }
            }
        }
    }
    bad.truncate(5);
    (
        bad.is_empty(),
        if bad.is_empty() {
            format!("{goals} goals, identical measures")
        } else {
            bad.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let corpus = load_corpus();
    let results: [(&str, Outcome); 8] = [
        ("upper-bound orders", orders(&corpus, &UPPER, Dir::Le)),
        ("lower-bound orders", orders(&corpus, &LOWER, Dir::Ge)),
        ("append closed forms", append_goldens(&corpus)),
        ("listfact widened element", listfact_golden(&corpus)),
        ("oracle soundness sweep", soundness_sweep(&corpus)),
        ("solver differential", solver_differential(&corpus)),
        ("lattice properties", lattice(&corpus)),
        ("normalization semantics", normalization(&corpus)),
    ];
    let mut all = true;
    for (i, (label, (ok, detail))) in results.iter().enumerate() {
        println!(
            "criterion {} {}: {label}: {detail}",
            i + 1,
            if *ok { "PASS" } else { "FAIL" }
        );
        all &= ok;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

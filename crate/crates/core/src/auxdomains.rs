//! Clause selection, mutual exclusion, non-failure and determinacy.
//!
//! Selection turns the prefix of a normalized clause (head unifications
//! and leading comparisons) into a guard over the bound variables of the
//! input sizes, plus opaque arithmetic tests that are only compared by
//! operand and outcome. Non-failure and determinacy are computed per
//! version as a greatest fixpoint starting from `not_fails` / `is_det`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::frontend::ast::{Clause, CmpOp, Literal, Term};
use crate::recurrence::poly::simplify;
use crate::recurrence::{BVar, Guard, SymExpr};
use crate::regtypes::{TypeGrammar, TypeTerm};
use crate::sizedtypes::{head_pattern_constraints, Schema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Nf {
    Fails,
    NotFails,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Det {
    NonDet,
    IsDet,
}

impl fmt::Display for Nf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Nf::Fails => "fails",
            Nf::NotFails => "not_fails",
        })
    }
}

impl fmt::Display for Det {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Det::NonDet => "non_det",
            Det::IsDet => "is_det",
        })
    }
}

/// Arithmetic test that does not reduce to a size guard. Tests on the same
/// operands with disjoint outcome masks are mutually exclusive; a group
/// whose masks cover all outcomes cannot all fail.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Test {
    pub lhs: String,
    pub rhs: String,
    pub mask: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    /// Some input can reach the clause body.
    pub feasible: bool,
    pub guard: Guard,
    /// The guard decides the head match exactly (ignoring `tests`).
    pub pattern_exact: bool,
    pub tests: Vec<Test>,
    /// Top constructor matched on each input argument.
    pub tops: BTreeMap<usize, String>,
    /// Schemas of clause variables bound by the prefix.
    pub bindings: BTreeMap<String, Schema>,
    /// Head unifications on output arguments, to run after the body.
    pub deferred: Vec<Literal>,
    pub prefix_len: usize,
}

impl Selection {
    pub fn exact(&self) -> bool {
        self.feasible && self.pattern_exact && self.tests.is_empty()
    }

    /// Exact except for a single opaque test.
    fn single_test(&self) -> Option<&Test> {
        match self.tests.as_slice() {
            [t] if self.feasible && self.pattern_exact => Some(t),
            _ => None,
        }
    }
}

fn render_path(t: &Term, paths: &BTreeMap<String, String>, tag: &str) -> String {
    match t {
        Term::Var(v) => paths
            .get(v)
            .cloned()
            .unwrap_or_else(|| format!("?{tag}{v}")),
        Term::Int(k) => k.to_string(),
        Term::Compound(f, args) if args.is_empty() => f.clone(),
        Term::Compound(f, args) => {
            let inner: Vec<String> = args.iter().map(|a| render_path(a, paths, tag)).collect();
            format!("{f}({})", inner.join(","))
        }
    }
}

fn record_paths(t: &Term, path: &str, paths: &mut BTreeMap<String, String>) {
    match t {
        Term::Var(v) => {
            paths.entry(v.clone()).or_insert_with(|| path.to_string());
        }
        Term::Compound(_, args) => {
            for (i, a) in args.iter().enumerate() {
                record_paths(a, &format!("{path}.{}", i + 1), paths);
            }
        }
        Term::Int(_) => {}
    }
}

fn top_label(t: &Term) -> Option<String> {
    match t {
        Term::Var(_) => None,
        Term::Int(k) => Some(format!("#{k}")),
        Term::Compound(f, a) => Some(format!("{f}/{}", a.len())),
    }
}

/// `v + c` with `c` an integer.
fn offset_var(e: &SymExpr) -> Option<(BVar, i64)> {
    match simplify(e) {
        SymExpr::Var(v) => Some((v, 0)),
        SymExpr::Add(xs) if xs.len() == 2 => match (&xs[0], &xs[1]) {
            (SymExpr::Var(v), SymExpr::Const(c)) | (SymExpr::Const(c), SymExpr::Var(v))
                if c.is_integer() =>
            {
                Some((v.clone(), c.to_integer() as i64))
            }
            _ => None,
        },
        _ => None,
    }
}

/// Interval of values `x` with `x op k`, clipped at zero.
fn cmp_interval(op: CmpOp, k: i64) -> Option<(i64, Option<i64>)> {
    Some(match op {
        CmpOp::Lt => (0, Some(k - 1)),
        CmpOp::Le => (0, Some(k)),
        CmpOp::Gt => (k + 1, None),
        CmpOp::Ge => (k, None),
        CmpOp::Eq => (k, Some(k)),
        CmpOp::Ne => return None,
    })
}

fn restrict_num(sel: &mut Selection, schema: &Schema, op: CmpOp, k: i64) -> bool {
    let Schema::Num { lo, hi } = schema else {
        return false;
    };
    let Some((l, h)) = cmp_interval(op, k) else {
        return false;
    };
    let (Some((vl, cl)), Some((vh, ch))) = (offset_var(lo), offset_var(hi)) else {
        if let (Some(a), Some(b)) = (lo.as_const(), hi.as_const()) {
            if a == b && a.is_integer() {
                let a = a.to_integer() as i64;
                sel.feasible &= op.holds(a, k);
                return true;
            }
        }
        return false;
    };
    for (v, c) in [(vl, cl), (vh, ch)] {
        let lo = (l - c).max(0);
        let hi = h.map(|h| h - c);
        if hi.is_some_and(|h| h < lo) || !sel.guard.restrict(&v, lo, hi) {
            sel.feasible = false;
        }
    }
    true
}

/// Number of alternatives of a recursive type that agree with `f/n` on
/// being recursive; more than one means a zero-or-positive size guard does
/// not pin the constructor.
fn same_class_alternatives(g: &TypeGrammar, ty: &TypeTerm, f: &str, n: usize) -> usize {
    let Ok(alts) = g.alternatives(ty) else {
        return 0;
    };
    let canon = g.canonical(ty);
    let is_rec = |a: &TypeTerm| match a {
        TypeTerm::Fun(_, xs) => xs.iter().any(|x| g.canonical(x) == canon),
        _ => false,
    };
    let Some(mine) = alts
        .iter()
        .find(|a| matches!(a, TypeTerm::Fun(h, xs) if h == f && xs.len() == n))
    else {
        return 0;
    };
    let class = is_rec(mine);
    alts.iter().filter(|a| is_rec(a) == class).count()
}

/// Selection analysis of a normalized clause for given input schemas.
/// `opaque` lists input positions of unknown type: patterns on them are
/// tests the guard cannot express.
pub fn select(
    clause: &Clause,
    inputs: &BTreeMap<usize, Schema>,
    opaque: &BTreeSet<usize>,
    g: &TypeGrammar,
) -> Selection {
    let head_args = clause.head.args();
    let tag = format!("{}:{}:", clause.pos.line, clause.pos.col);
    let mut sel = Selection {
        feasible: true,
        guard: Guard::top(),
        pattern_exact: true,
        tests: vec![],
        tops: BTreeMap::new(),
        bindings: BTreeMap::new(),
        deferred: vec![],
        prefix_len: clause.selection_prefix(),
    };
    let mut paths: BTreeMap<String, String> = BTreeMap::new();
    let mut input_var: BTreeMap<String, usize> = BTreeMap::new();
    let mut opaque_var: BTreeMap<String, usize> = BTreeMap::new();
    for (i, a) in head_args.iter().enumerate() {
        if let Term::Var(v) = a {
            if opaque.contains(&i) {
                opaque_var.insert(v.clone(), i);
            }
            if let Some(s) = inputs.get(&i) {
                sel.bindings.insert(v.clone(), s.clone());
                input_var.insert(v.clone(), i);
                paths.insert(v.clone(), format!("#{}", i + 1));
            }
        }
    }
    for lit in &clause.body[..sel.prefix_len] {
        match lit {
            Literal::Unify(l, r) => {
                if let Some(i) = [l, r].iter().find_map(|t| match t {
                    Term::Var(v) => opaque_var.get(v),
                    _ => None,
                }) {
                    sel.pattern_exact = false;
                    if let Some(t) = top_label(if l.is_var() { r } else { l }) {
                        sel.tops.insert(*i, t);
                    }
                    continue;
                }
                let (var, pat) = match (l, r) {
                    (Term::Var(v), _) if !sel.bindings.contains_key(v) => {
                        sel.deferred.push(lit.clone());
                        continue;
                    }
                    (Term::Var(v), t) if input_var.contains_key(v) => (v, t),
                    (t, Term::Var(v)) if input_var.contains_key(v) => (v, t),
                    _ => {
                        sel.pattern_exact = false;
                        continue;
                    }
                };
                let arg = input_var[var];
                let schema = &inputs[&arg];
                if let Term::Var(w) = pat {
                    if sel.bindings.contains_key(w) {
                        sel.pattern_exact = false;
                    } else {
                        sel.bindings.insert(w.clone(), schema.clone());
                        paths
                            .entry(w.clone())
                            .or_insert_with(|| format!("#{}", arg + 1));
                    }
                    continue;
                }
                let info = match head_pattern_constraints(pat, schema, g) {
                    Ok(info) => info,
                    Err(_) => {
                        sel.feasible = false;
                        continue;
                    }
                };
                for c in &info.domain {
                    let lo = c.lo.max(0);
                    if c.hi.is_some_and(|h| h < lo) || !sel.guard.restrict(&c.var, lo, c.hi) {
                        sel.feasible = false;
                    }
                }
                sel.pattern_exact &= info.exact;
                if let (Term::Compound(f, xs), Schema::Rec { ty, .. }) = (pat, schema) {
                    if same_class_alternatives(g, ty, f, xs.len()) > 1 {
                        sel.pattern_exact = false;
                    }
                }
                for (v, s) in info.bindings {
                    if let std::collections::btree_map::Entry::Vacant(e) = sel.bindings.entry(v) {
                        e.insert(s);
                    } else {
                        sel.pattern_exact = false;
                    }
                }
                if let Some(t) = top_label(pat) {
                    sel.tops.insert(arg, t);
                }
                record_paths(pat, &format!("#{}", arg + 1), &mut paths);
            }
            Literal::Compare(op, a, b) => {
                let decided = match (a, b) {
                    (Term::Var(v), Term::Int(k)) => sel
                        .bindings
                        .get(v)
                        .cloned()
                        .is_some_and(|s| restrict_num(&mut sel, &s, *op, *k)),
                    (Term::Int(k), Term::Var(v)) => sel
                        .bindings
                        .get(v)
                        .cloned()
                        .is_some_and(|s| restrict_num(&mut sel, &s, op.flip(), *k)),
                    (Term::Int(x), Term::Int(y)) => {
                        sel.feasible &= op.holds(*x, *y);
                        true
                    }
                    _ => false,
                };
                if !decided {
                    let (l, r) = (render_path(a, &paths, &tag), render_path(b, &paths, &tag));
                    let t = if l <= r {
                        Test {
                            lhs: l,
                            rhs: r,
                            mask: op.outcomes(),
                        }
                    } else {
                        Test {
                            lhs: r,
                            rhs: l,
                            mask: op.flip().outcomes(),
                        }
                    };
                    sel.tests.push(t);
                }
            }
            _ => {}
        }
    }
    sel
}

/// Two clauses never both succeed on the same call.
pub fn exclusive(a: &Selection, b: &Selection) -> bool {
    if !a.feasible || !b.feasible || a.guard.intersect(&b.guard).is_none() {
        return true;
    }
    if a.tops
        .iter()
        .any(|(i, t)| b.tops.get(i).is_some_and(|u| u != t))
    {
        return true;
    }
    a.tests.iter().any(|t| {
        b.tests
            .iter()
            .any(|u| t.lhs == u.lhs && t.rhs == u.rhs && t.mask & u.mask == 0)
    })
}

pub fn mutually_exclusive(sels: &[&Selection]) -> bool {
    sels.iter()
        .enumerate()
        .all(|(i, a)| sels[i + 1..].iter().all(|b| exclusive(a, b)))
}

const MAX_REGIONS: usize = 4096;

/// Elementary boxes of the non-negative orthant induced by the guard
/// breakpoints. Falls back to the single top box when there are too many.
pub fn regions(guards: &[&Guard]) -> Vec<Guard> {
    let mut points: BTreeMap<BVar, BTreeSet<i64>> = BTreeMap::new();
    for g in guards {
        for (v, (lo, hi)) in &g.bounds {
            let p = points
                .entry(v.clone())
                .or_insert_with(|| BTreeSet::from([0]));
            p.insert(*lo);
            if let Some(h) = hi {
                p.insert(h + 1);
            }
        }
    }
    let mut total = 1usize;
    for p in points.values() {
        total = total.saturating_mul(p.len());
    }
    if total > MAX_REGIONS {
        return vec![Guard::top()];
    }
    let mut out = vec![Guard::top()];
    for (v, ps) in &points {
        let ps: Vec<i64> = ps.iter().copied().filter(|&x| x >= 0).collect();
        let mut next = Vec::with_capacity(out.len() * ps.len());
        for g in &out {
            for (k, &lo) in ps.iter().enumerate() {
                let hi = ps.get(k + 1).map(|h| h - 1);
                let mut r = g.clone();
                r.restrict(v, lo, hi);
                next.push(r);
            }
        }
        out = next;
    }
    out
}

/// Some clause surely applies in the region: an exact clause whose guard
/// contains it, or a group of single-test clauses on the same operands
/// whose outcomes cover every case.
pub fn region_covered(region: &Guard, sels: &[&Selection], keep: &BTreeSet<BVar>) -> bool {
    let inside: Vec<&&Selection> = sels
        .iter()
        .filter(|s| s.feasible && region.implies(&project(&s.guard, keep)))
        .collect();
    if inside.iter().any(|s| s.exact()) {
        return true;
    }
    let mut masks: BTreeMap<(&str, &str), u8> = BTreeMap::new();
    for s in &inside {
        if let Some(t) = s.single_test() {
            *masks.entry((t.lhs.as_str(), t.rhs.as_str())).or_default() |= t.mask;
        }
    }
    masks.values().any(|&m| m == 7)
}

/// Guard restricted to the given variables.
pub fn project(g: &Guard, keep: &BTreeSet<BVar>) -> Guard {
    Guard {
        bounds: g
            .bounds
            .iter()
            .filter(|(v, _)| keep.contains(*v))
            .map(|(v, b)| (v.clone(), *b))
            .collect(),
    }
}

/// Every input reaches some clause. Guards are read on one side of each
/// lower/upper pair (`keep`), where a size is a single value.
pub fn covers(sels: &[&Selection], keep: &BTreeSet<BVar>) -> bool {
    let guards: Vec<Guard> = sels
        .iter()
        .filter(|s| s.feasible)
        .map(|s| project(&s.guard, keep))
        .collect();
    let refs: Vec<&Guard> = guards.iter().collect();
    regions(&refs).iter().all(|r| region_covered(r, sels, keep))
}

/// What a body literal contributes to non-failure and determinacy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LitFact {
    /// Builtin that cannot fail in its mode.
    Safe,
    /// Builtin test, or a unification that may fail.
    MayFail,
    /// Call to an analysed version.
    Call(usize),
    /// Call to an undefined predicate.
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClauseFacts {
    pub sel: Selection,
    pub body: Vec<LitFact>,
}

pub fn nonfailure(
    clauses: &[ClauseFacts],
    keep: &BTreeSet<BVar>,
    nf_of: &dyn Fn(usize) -> Nf,
) -> Nf {
    let sels: Vec<&Selection> = clauses.iter().map(|c| &c.sel).collect();
    if !covers(&sels, keep) {
        return Nf::Fails;
    }
    let body_ok = clauses
        .iter()
        .filter(|c| c.sel.feasible)
        .flat_map(|c| &c.body)
        .all(|l| match l {
            LitFact::Safe => true,
            LitFact::MayFail | LitFact::Unknown => false,
            LitFact::Call(v) => nf_of(*v) == Nf::NotFails,
        });
    if body_ok {
        Nf::NotFails
    } else {
        Nf::Fails
    }
}

pub fn determinacy(clauses: &[ClauseFacts], det_of: &dyn Fn(usize) -> Det) -> Det {
    let sels: Vec<&Selection> = clauses.iter().map(|c| &c.sel).collect();
    if !mutually_exclusive(&sels) {
        return Det::NonDet;
    }
    let body_ok = clauses
        .iter()
        .filter(|c| c.sel.feasible)
        .flat_map(|c| &c.body)
        .all(|l| match l {
            LitFact::Safe | LitFact::MayFail => true,
            LitFact::Unknown => false,
            LitFact::Call(v) => det_of(*v) == Det::IsDet,
        });
    if body_ok {
        Det::IsDet
    } else {
        Det::NonDet
    }
}

/// Per-version input to the non-failure/determinacy fixpoint.
#[derive(Clone, Debug)]
pub struct VersionFacts {
    pub clauses: Vec<ClauseFacts>,
    /// Lower-bound variables of the input sizes.
    pub lower_vars: BTreeSet<BVar>,
    pub trust_nf: bool,
    pub trust_det: bool,
}

/// Greatest fixpoint over all versions. Trusted properties are kept.
pub fn solve_aux(versions: &[VersionFacts]) -> Vec<(Nf, Det)> {
    let mut cur: Vec<(Nf, Det)> = vec![(Nf::NotFails, Det::IsDet); versions.len()];
    let cap = 2 * versions.len() + 2;
    for _ in 0..cap {
        let mut changed = false;
        for (i, v) in versions.iter().enumerate() {
            let snapshot = cur.clone();
            let nf = if v.trust_nf {
                Nf::NotFails
            } else {
                nonfailure(&v.clauses, &v.lower_vars, &|k| snapshot[k].0)
            };
            let det = if v.trust_det {
                Det::IsDet
            } else {
                determinacy(&v.clauses, &|k| snapshot[k].1)
            };
            if (nf, det) != cur[i] {
                cur[i] = (nf.min(cur[i].0), det.min(cur[i].1));
                changed = true;
            }
        }
        if !changed {
            return cur;
        }
    }
    for (i, v) in versions.iter().enumerate() {
        if !v.trust_nf {
            cur[i].0 = Nf::Fails;
        }
        if !v.trust_det {
            cur[i].1 = Det::NonDet;
        }
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{normalize_clause, parse_program, PredId};
    use crate::regtypes::{sized_schema, FreshNames};

    fn setup(src: &str, pred: &str, arity: usize, input_types: &[(usize, &str)]) -> Vec<Selection> {
        let p = parse_program(src).unwrap();
        let g = TypeGrammar::from_program(&p);
        let mut fresh = FreshNames::new("");
        let mut inputs = BTreeMap::new();
        for (i, t) in input_types {
            let ty = g
                .type_of_decl(&crate::frontend::parser::parse_term(t).unwrap())
                .unwrap();
            fresh.set_subscript(&(i + 1).to_string());
            inputs.insert(*i, sized_schema(&ty, &g, &mut fresh).unwrap());
        }
        p.clauses_of(&PredId::new(pred, arity))
            .iter()
            .map(|c| select(&normalize_clause(c), &inputs, &BTreeSet::new(), &g))
            .collect()
    }

    fn lower() -> BTreeSet<BVar> {
        ["α_1", "α_2", "μ_1", "μ_2"]
            .iter()
            .map(|v| BVar::new(v))
            .collect()
    }

    const LN: &str = ":- regtype listnum := [] | [num|listnum].\n";

    #[test]
    fn list_patterns_are_exclusive_and_cover() {
        let src = format!("{LN}app([],S,S).\napp([E|R],S,[E|T]) :- app(R,S,T).\n");
        let sels = setup(&src, "app", 3, &[(0, "listnum"), (1, "listnum")]);
        assert!(sels.iter().all(Selection::exact));
        assert!(exclusive(&sels[0], &sels[1]));
        assert!(covers(&sels.iter().collect::<Vec<_>>(), &lower()));
        assert_eq!(sels[1].guard.to_string(), "α_1 > 0, β_1 > 0");
        assert_eq!(sels[0].deferred.len(), 1);
    }

    #[test]
    fn numeric_guards_from_comparisons() {
        let src = "f(0,1).\nf(N,M) :- N > 0, N1 is N-1, f(N1,M1), M is N*M1.\n";
        let sels = setup(src, "f", 2, &[(0, "num")]);
        assert!(sels.iter().all(Selection::exact));
        assert!(exclusive(&sels[0], &sels[1]));
        assert!(covers(&sels.iter().collect::<Vec<_>>(), &lower()));
        let src = "h(1,1).\nh(N,M) :- N > 1, N1 is N-1, h(N1,M).\n";
        let sels = setup(src, "h", 2, &[(0, "num")]);
        assert!(!covers(&sels.iter().collect::<Vec<_>>(), &lower()));
    }

    #[test]
    fn complementary_tests_cover() {
        let src = format!(
            "{LN}p(_,[],[]).\np(P,[X|Xs],[X|L]) :- X =< P, p(P,Xs,L).\np(P,[X|Xs],L) :- P < X, p(P,Xs,L).\n"
        );
        let sels = setup(&src, "p", 3, &[(0, "num"), (1, "listnum")]);
        assert!(!sels[1].exact());
        assert!(exclusive(&sels[1], &sels[2]));
        assert!(covers(&sels.iter().collect::<Vec<_>>(), &lower()));
        let src = format!("{LN}p(_,[],[]).\np(P,[X|Xs],[X|L]) :- X < P, p(P,Xs,L).\np(P,[X|Xs],L) :- X > P, p(P,Xs,L).\n");
        let sels = setup(&src, "p", 3, &[(0, "num"), (1, "listnum")]);
        assert!(exclusive(&sels[1], &sels[2]));
        assert!(!covers(&sels.iter().collect::<Vec<_>>(), &lower()));
    }

    #[test]
    fn overlapping_clauses_are_not_exclusive() {
        let src = format!("{LN}m(X,[X|_]).\nm(X,[_|T]) :- m(X,T).\n");
        let sels = setup(&src, "m", 2, &[(0, "num"), (1, "listnum")]);
        assert!(!exclusive(&sels[0], &sels[1]));
    }

    #[test]
    fn aux_fixpoint_propagates_failure() {
        let sel = |exact: bool| Selection {
            feasible: true,
            guard: Guard::top(),
            pattern_exact: exact,
            tests: vec![],
            tops: BTreeMap::new(),
            bindings: BTreeMap::new(),
            deferred: vec![],
            prefix_len: 0,
        };
        let versions = vec![
            VersionFacts {
                clauses: vec![ClauseFacts {
                    sel: sel(true),
                    body: vec![LitFact::Call(1)],
                }],
                lower_vars: BTreeSet::new(),
                trust_nf: false,
                trust_det: false,
            },
            VersionFacts {
                clauses: vec![ClauseFacts {
                    sel: sel(true),
                    body: vec![LitFact::MayFail],
                }],
                lower_vars: BTreeSet::new(),
                trust_nf: false,
                trust_det: false,
            },
            VersionFacts {
                clauses: vec![],
                lower_vars: BTreeSet::new(),
                trust_nf: true,
                trust_det: true,
            },
        ];
        let r = solve_aux(&versions);
        assert_eq!(r[0], (Nf::Fails, Det::IsDet));
        assert_eq!(r[1], (Nf::Fails, Det::IsDet));
        assert_eq!(r[2], (Nf::NotFails, Det::IsDet));
    }
}

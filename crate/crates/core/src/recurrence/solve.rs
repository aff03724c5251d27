//! Pattern-based closed-form solver for guarded recurrence systems.
//!
//! Recognized shapes (over a single decreasing variable `n` unless noted):
//! `F(n) = F(n−k) + g(n)` with polynomial `g`; `F(n) = a·F(n−1) + c`;
//! `F(n) = Σ a_k F(n−k) + c` (kept as an exact linear recurrence);
//! `F(n) = op(h, F(n−1))` for op ∈ {min, max}; simultaneous decrement of
//! several variables with a constant step; mutually recursive pairs by
//! unfolding. Anything else falls back to ∞ (upper) or 0 (lower).

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::closed::ClosedForm;
use super::expr::{BVar, LinRec, Rat, SymExpr};
use super::poly::{simplify, sum_poly, to_poly, Poly};
use super::system::{normalize, Case, EqSystem, FnEqs, Guard, RecError};
use crate::sizedtypes::Dir;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Solution {
    pub forms: BTreeMap<String, ClosedForm>,
    /// Functions whose form is a fallback or an approximation.
    pub imprecise: Vec<String>,
}

pub fn solve(sys: &EqSystem) -> Result<Solution, RecError> {
    let sys = normalize(sys)?;
    let names: Vec<String> = sys.fns.keys().cloned().collect();
    let mut g = DiGraph::<String, ()>::new();
    let idx: BTreeMap<String, _> = names
        .iter()
        .map(|n| (n.clone(), g.add_node(n.clone())))
        .collect();
    for (n, f) in &sys.fns {
        for c in f.calls() {
            if let Some(&to) = idx.get(&c) {
                g.add_edge(idx[n], to, ());
            }
        }
    }
    let mut sol = Solution::default();
    for scc in tarjan_scc(&g) {
        let mut members: Vec<String> = scc.into_iter().map(|i| g[i].clone()).collect();
        members.sort();
        let forms = solve_scc(&sys, &members, &sol.forms);
        for (name, cf) in forms {
            if !cf.exact {
                sol.imprecise.push(name.clone());
            }
            sol.forms.insert(name, cf);
        }
    }
    sol.imprecise.sort();
    Ok(sol)
}

fn solve_scc(
    sys: &EqSystem,
    members: &[String],
    solved: &BTreeMap<String, ClosedForm>,
) -> Vec<(String, ClosedForm)> {
    let inlined: Vec<(FnEqs, bool)> = members
        .iter()
        .map(|m| inline_fn(&sys.fns[m], solved))
        .collect();
    if members.len() == 1 {
        let (f, exact) = &inlined[0];
        let mut cf = solve_single(f);
        cf.exact &= *exact;
        return vec![(f.name.clone(), cf)];
    }
    // Inlining solved callees may have removed calls inside the group.
    let mut g = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..members.len()).map(|i| g.add_node(i)).collect();
    for (i, (f, _)) in inlined.iter().enumerate() {
        for c in f.calls() {
            if let Some(j) = members.iter().position(|m| *m == c) {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let parts = tarjan_scc(&g);
    if parts.len() > 1 {
        let mut more = solved.clone();
        let mut out = Vec::new();
        for part in parts {
            let mut sub: Vec<String> = part.into_iter().map(|n| members[g[n]].clone()).collect();
            sub.sort();
            for (name, cf) in solve_scc(sys, &sub, &more) {
                more.insert(name.clone(), cf.clone());
                out.push((name, cf));
            }
        }
        return out;
    }
    if members.len() == 2 {
        for order in [[0usize, 1], [1, 0]] {
            let (f, fx) = &inlined[order[0]];
            let (h, hx) = &inlined[order[1]];
            if let Some(unfolded) = unfold(f, h) {
                let mut cf = solve_single(&unfolded);
                if cf.pattern == "fallback" {
                    continue;
                }
                cf.exact &= *fx && *hx;
                let mut more = solved.clone();
                more.insert(f.name.clone(), cf.clone());
                let (h2, h2x) = inline_fn(h, &more);
                let mut hf = solve_single(&h2);
                hf.exact &= h2x;
                return vec![(f.name.clone(), cf), (h.name.clone(), hf)];
            }
        }
    }
    inlined
        .into_iter()
        .map(|(f, _)| (f.name.clone(), fallback(&f)))
        .collect()
}

// ---------------------------------------------------------------- inlining

fn affine(e: &SymExpr) -> Option<(Option<BVar>, i64)> {
    let p = to_poly(&simplify(e));
    let mut var = None;
    let mut c = 0i64;
    for (m, k) in &p.terms {
        if m.is_empty() {
            if !k.is_integer() {
                return None;
            }
            c = k.to_integer() as i64;
        } else if m.len() == 1 && m[0].1 == 1 && k.is_one() && var.is_none() {
            match &m[0].0 {
                SymExpr::Var(v) => var = Some(v.clone()),
                _ => return None,
            }
        } else {
            return None;
        }
    }
    Some((var, c))
}

/// Replace calls to solved functions by their merged form. Callers only
/// know one side of each argument interval, so picking a single case could
/// be unsound for a non-monotone function.
fn inline_expr(e: &SymExpr, solved: &BTreeMap<String, ClosedForm>, exact: &mut bool) -> SymExpr {
    let out = e.map(&mut |x| match &x {
        SymExpr::Call(name, args) => match solved.get(&**name) {
            Some(cf) => {
                let (v, ok) = instantiate_in(cf, args);
                *exact &= ok;
                v
            }
            None => x,
        },
        _ => x,
    });
    simplify(&out)
}

fn instantiate_in(cf: &ClosedForm, args: &[SymExpr]) -> (SymExpr, bool) {
    (cf.instantiate(args), cf.exact && cf.merged_exact)
}

fn inline_fn(f: &FnEqs, solved: &BTreeMap<String, ClosedForm>) -> (FnEqs, bool) {
    let mut exact = true;
    let cases = f
        .cases
        .iter()
        .map(|c| Case {
            guard: c.guard.clone(),
            rhs: inline_expr(&c.rhs, solved, &mut exact),
        })
        .collect();
    (FnEqs { cases, ..f.clone() }, exact)
}

// ---------------------------------------------------------------- merging

fn is_self_call(e: &SymExpr, name: &str) -> bool {
    e.any(&|x| matches!(x, SymExpr::Call(n, _) if &**n == name))
}

/// Does the union of guards cover every point of the non-negative orthant?
/// Decided on a grid of breakpoints.
fn covers(guards: &[&Guard]) -> bool {
    let mut pts: BTreeMap<BVar, BTreeSet<i64>> = BTreeMap::new();
    for g in guards {
        for (v, (lo, hi)) in &g.bounds {
            let s = pts.entry(v.clone()).or_default();
            s.insert(0);
            s.insert(*lo);
            s.insert(lo.saturating_sub(1).max(0));
            if let Some(h) = hi {
                s.insert(*h);
                s.insert(h + 1);
            }
        }
    }
    let vars: Vec<(BVar, Vec<i64>)> = pts
        .into_iter()
        .map(|(v, s)| (v, s.into_iter().collect()))
        .collect();
    let total: usize = vars.iter().map(|(_, p)| p.len()).product();
    if total > 20_000 {
        return false;
    }
    let mut idx = vec![0usize; vars.len()];
    loop {
        let point: BTreeMap<BVar, i64> = vars
            .iter()
            .zip(&idx)
            .map(|((v, p), i)| (v.clone(), p[*i]))
            .collect();
        let hit = guards.iter().any(|g| {
            g.bounds.iter().all(|(v, (lo, hi))| {
                let x = point[v];
                x >= *lo && hi.is_none_or(|h| x <= h)
            })
        });
        if !hit {
            return false;
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return true;
            }
            idx[k] += 1;
            if idx[k] < vars[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Points of the single guarded variable not covered by any case, when all
/// guards constrain the same single variable. `None` if the uncovered
/// set is unbounded or the guards are multi-dimensional.
fn uncovered_points(cases: &[Case]) -> Option<(Option<BVar>, Vec<i64>)> {
    let vars: BTreeSet<&BVar> = cases.iter().flat_map(|c| c.guard.vars()).collect();
    if cases.iter().any(|c| c.guard.is_top()) {
        return Some((None, vec![]));
    }
    if vars.len() != 1 {
        return None;
    }
    let v = (*vars.iter().next().unwrap()).clone();
    let mut max_finite = 0i64;
    let mut unbounded_from = None::<i64>;
    for c in cases {
        let (lo, hi) = c.guard.interval(&v);
        match hi {
            Some(h) => max_finite = max_finite.max(h),
            None => unbounded_from = Some(unbounded_from.map_or(lo, |u: i64| u.min(lo))),
        }
    }
    let end = unbounded_from?;
    let mut out = Vec::new();
    for p in 0..=max_finite.max(end) {
        let hit = cases.iter().any(|c| {
            let (lo, hi) = c.guard.interval(&v);
            p >= lo && hi.is_none_or(|h| p <= h)
        });
        if !hit {
            out.push(p);
        }
    }
    Some((Some(v), out))
}

fn point_subst(g: &Guard) -> Option<BTreeMap<BVar, SymExpr>> {
    let mut m = BTreeMap::new();
    for v in g.vars() {
        m.insert(v.clone(), SymExpr::int(g.point(v)?));
    }
    Some(m)
}

/// Combine cases into one expression valid everywhere; exact when the main
/// expression agrees with every other case and with the default.
fn merge(main: &SymExpr, cases: &[Case], default: &SymExpr, dir: Dir) -> (SymExpr, bool) {
    let mut agree = true;
    for c in cases {
        if c.rhs == *main {
            continue;
        }
        match point_subst(&c.guard) {
            Some(sub) => {
                if simplify(&main.subst_vars(&sub)) != simplify(&c.rhs.subst_vars(&sub)) {
                    agree = false;
                }
            }
            None => agree = false,
        }
    }
    if *default != SymExpr::Nob {
        let guards: Vec<&Guard> = cases.iter().map(|c| &c.guard).collect();
        if !covers(&guards) {
            match uncovered_points(cases) {
                Some((Some(v), pts)) => {
                    for p in pts {
                        let sub = BTreeMap::from([(v.clone(), SymExpr::int(p))]);
                        if simplify(&main.subst_vars(&sub)) != *default {
                            agree = false;
                        }
                    }
                }
                Some((None, _)) => {}
                None => agree = false,
            }
        }
    }
    if agree {
        return (main.clone(), true);
    }
    let mut all: Vec<SymExpr> = vec![main.clone()];
    all.extend(cases.iter().map(|c| c.rhs.clone()));
    if *default != SymExpr::Nob {
        all.push(default.clone());
    }
    let e = match dir {
        Dir::Le => SymExpr::Max(all),
        Dir::Ge => SymExpr::Min(all),
    };
    (simplify(&e), false)
}

fn fallback(f: &FnEqs) -> ClosedForm {
    let v = ClosedForm::fallback_value(f.dir);
    let cases: Vec<Case> = f
        .cases
        .iter()
        .map(|c| {
            if c.rhs.has_calls() {
                Case {
                    guard: c.guard.clone(),
                    rhs: v.clone(),
                }
            } else {
                c.clone()
            }
        })
        .collect();
    let (merged, merged_exact) = merge(&v, &cases, &f.default, f.dir);
    ClosedForm {
        name: f.name.clone(),
        dir: f.dir,
        formals: f.formals.clone(),
        cases,
        default: f.default.clone(),
        main: v,
        merged,
        exact: false,
        merged_exact,
        pattern: "fallback",
    }
}

fn finish(
    f: &FnEqs,
    rec_idx: Option<usize>,
    main: SymExpr,
    pattern: &'static str,
    exact: bool,
) -> ClosedForm {
    let main = simplify(&main);
    let mut cases: Vec<Case> = f
        .cases
        .iter()
        .map(|c| Case {
            guard: c.guard.clone(),
            rhs: simplify(&c.rhs),
        })
        .collect();
    if let Some(i) = rec_idx {
        cases[i].rhs = main.clone();
    }
    let (merged, merged_exact) = merge(&main, &cases, &f.default, f.dir);
    ClosedForm {
        name: f.name.clone(),
        dir: f.dir,
        formals: f.formals.clone(),
        cases,
        default: f.default.clone(),
        main,
        merged,
        exact,
        merged_exact,
        pattern,
    }
}

// ---------------------------------------------------------------- single

fn solve_single(f: &FnEqs) -> ClosedForm {
    if f.cases
        .iter()
        .any(|c| c.rhs.calls().iter().any(|(n, _)| **n != f.name))
    {
        return fallback(f);
    }
    let rec: Vec<usize> = (0..f.cases.len())
        .filter(|&i| is_self_call(&f.cases[i].rhs, &f.name))
        .collect();
    match rec.len() {
        0 => {
            let main_idx = (0..f.cases.len()).max_by_key(|&i| {
                let g = &f.cases[i].guard;
                (
                    g.bounds.values().filter(|(_, h)| h.is_none()).count() as i64
                        - g.bounds.len() as i64,
                    i,
                )
            });
            let main = match main_idx {
                Some(i) => f.cases[i].rhs.clone(),
                None => f.default.clone(),
            };
            finish(f, None, main, "constant", true)
        }
        1 => solve_recursive(f, rec[0]).unwrap_or_else(|| fallback(f)),
        _ => fallback(f),
    }
}

/// Per-formal offsets of a self call: `arg_i = formal_i + c_i`.
fn call_offsets(f: &FnEqs, args: &[SymExpr]) -> Vec<Option<i64>> {
    f.formals
        .iter()
        .zip(args)
        .map(|(v, a)| match affine(a) {
            Some((Some(w), c)) if w == *v => Some(c),
            _ => None,
        })
        .collect()
}

/// Formals that influence the value: used in guards, in non-call parts of
/// right-hand sides, or passed to relevant positions of self calls.
fn relevant_formals(f: &FnEqs) -> BTreeSet<usize> {
    let mut rel = BTreeSet::new();
    for (i, v) in f.formals.iter().enumerate() {
        let in_guard = f.cases.iter().any(|c| c.guard.vars().any(|w| w == v));
        let in_rhs = f.cases.iter().any(|c| {
            let stripped = c.rhs.map(&mut |x| match &x {
                SymExpr::Call(n, _) if **n == *f.name => SymExpr::zero(),
                _ => x,
            });
            stripped.mentions(v)
        });
        if in_guard || in_rhs {
            rel.insert(i);
        }
    }
    loop {
        let before = rel.len();
        for c in &f.cases {
            for (n, args) in c.rhs.calls() {
                if *n != *f.name {
                    continue;
                }
                for j in rel.clone() {
                    for (i, v) in f.formals.iter().enumerate() {
                        if args.get(j).is_some_and(|a| a.mentions(v)) {
                            rel.insert(i);
                        }
                    }
                }
            }
        }
        if rel.len() == before {
            return rel;
        }
    }
}

fn solve_recursive(f: &FnEqs, ri: usize) -> Option<ClosedForm> {
    let (g, post) = stabilize(f, ri);
    if !is_self_call(&g.cases[ri].rhs, &g.name) {
        return Some(finish(
            &g,
            Some(ri),
            g.cases[ri].rhs.clone(),
            "constant",
            true,
        ));
    }
    let cf = solve_recursive_core(&g, ri)?;
    if post.is_empty() && g == *f {
        return Some(cf);
    }
    let main = simplify(&cf.main.subst_vars(&post));
    Some(finish(
        f,
        Some(ri),
        main,
        cf.pattern,
        cf.exact && post.is_empty(),
    ))
}

/// Rewrite self calls of the recursive case before pattern matching.
///
/// Calls whose relevant arguments are constants are replaced by the base
/// case they hit. An argument `max(x, e)` (upper) or `min(x, e)` (lower)
/// for formal `x`, with `e` fixed across the recursion, is idempotent: the
/// recursion is solved with `x` kept and `x := max(x, e)` substituted in
/// the result, which bounds the original for monotone right-hand sides.
fn stabilize(f: &FnEqs, ri: usize) -> (FnEqs, BTreeMap<BVar, SymExpr>) {
    let rel = relevant_formals(f);
    let mut g = f.clone();
    let name = f.name.clone();
    let rhs = f.cases[ri].rhs.map(&mut |x| match &x {
        SymExpr::Call(n, args) if **n == *name => constant_call(f, ri, &rel, args).unwrap_or(x),
        _ => x,
    });
    let guarded: BTreeSet<usize> = (0..f.formals.len())
        .filter(|&i| {
            f.cases
                .iter()
                .any(|c| c.guard.vars().any(|w| *w == f.formals[i]))
        })
        .collect();
    let rhs = merge_self_calls(&rhs, f, &guarded);
    let calls: Vec<Vec<SymExpr>> = rhs
        .calls()
        .into_iter()
        .filter(|(n, _)| **n == *name)
        .map(|(_, a)| a)
        .collect();
    let stable: BTreeSet<usize> = (0..f.formals.len())
        .filter(|&i| calls.iter().all(|a| call_offsets(f, a)[i] == Some(0)))
        .collect();
    let mut post: BTreeMap<BVar, SymExpr> = BTreeMap::new();
    for args in &calls {
        let offs = call_offsets(f, args);
        for &i in &rel {
            if offs[i].is_some() {
                continue;
            }
            let v = &f.formals[i];
            let a = simplify(&args[i]);
            let xs = match (&a, f.dir) {
                (SymExpr::Max(xs), Dir::Le) | (SymExpr::Min(xs), Dir::Ge) => xs,
                _ => continue,
            };
            let others_fixed = xs
                .iter()
                .filter(|x| **x != SymExpr::Var(v.clone()))
                .all(|x| {
                    f.formals
                        .iter()
                        .enumerate()
                        .all(|(j, w)| !x.mentions(w) || stable.contains(&j))
                });
            if !xs.contains(&SymExpr::Var(v.clone())) || !others_fixed {
                continue;
            }
            if post.get(v).is_some_and(|m| *m != a) {
                return (f.clone(), BTreeMap::new());
            }
            post.insert(v.clone(), a);
        }
    }
    let rhs = rhs.map(&mut |x| match &x {
        SymExpr::Call(n, args) if **n == *name => {
            let args = f
                .formals
                .iter()
                .zip(args)
                .map(|(v, a)| {
                    if post.get(v).is_some_and(|m| *m == simplify(a)) {
                        SymExpr::Var(v.clone())
                    } else {
                        a.clone()
                    }
                })
                .collect();
            SymExpr::Call(n.clone(), args)
        }
        _ => x,
    });
    g.cases[ri].rhs = rhs;
    (g, post)
}

/// Split `e` into a single self call plus a call-free rest.
fn self_call_term(e: &SymExpr, name: &str) -> Option<(Vec<SymExpr>, Vec<SymExpr>)> {
    match e {
        SymExpr::Call(n, args) if **n == *name => Some((args.clone(), vec![])),
        SymExpr::Add(xs) => {
            let (calls, rest): (Vec<&SymExpr>, Vec<&SymExpr>) =
                xs.iter().partition(|x| matches!(x, SymExpr::Call(..)));
            match calls.as_slice() {
                [SymExpr::Call(n, args)]
                    if **n == *name && rest.iter().all(|r| r.calls().is_empty()) =>
                {
                    Some((args.clone(), rest.into_iter().cloned().collect()))
                }
                _ => None,
            }
        }
        _ => None,
    }
}

/// `max(f(a)+c, f(b)+c)` becomes `f(max(a,b))+c` (`min` for lower bounds)
/// when the calls differ only in arguments no case guard inspects.
fn merge_self_calls(e: &SymExpr, f: &FnEqs, guarded: &BTreeSet<usize>) -> SymExpr {
    let name: std::sync::Arc<str> = f.name.as_str().into();
    e.map(&mut |x| {
        let xs = match (&x, f.dir) {
            (SymExpr::Max(xs), Dir::Le) | (SymExpr::Min(xs), Dir::Ge) => xs.clone(),
            _ => return x,
        };
        let mut groups: Vec<(Vec<SymExpr>, Vec<Vec<SymExpr>>)> = Vec::new();
        let mut others = Vec::new();
        for c in xs {
            match self_call_term(&c, &name) {
                Some((args, rest)) if args.len() == f.formals.len() => {
                    match groups.iter_mut().find(|(r, _)| *r == rest) {
                        Some((_, calls)) => calls.push(args),
                        None => groups.push((rest, vec![args])),
                    }
                }
                _ => others.push(c),
            }
        }
        let mut out = others;
        for (rest, calls) in groups {
            let n = f.formals.len();
            let differs: Vec<usize> = (0..n)
                .filter(|&i| calls.iter().any(|a| a[i] != calls[0][i]))
                .collect();
            if differs.iter().any(|i| guarded.contains(i)) {
                for a in calls {
                    let mut t = rest.clone();
                    t.push(SymExpr::Call(name.clone(), a));
                    out.push(SymExpr::Add(t));
                }
                continue;
            }
            let args: Vec<SymExpr> = (0..n)
                .map(|i| {
                    if !differs.contains(&i) {
                        return calls[0][i].clone();
                    }
                    let vs: Vec<SymExpr> = calls.iter().map(|a| a[i].clone()).collect();
                    simplify(&if f.dir == Dir::Le {
                        SymExpr::Max(vs)
                    } else {
                        SymExpr::Min(vs)
                    })
                })
                .collect();
            let mut t = rest;
            t.push(SymExpr::Call(name.clone(), args));
            out.push(SymExpr::Add(t));
        }
        let out: Vec<SymExpr> = out.into_iter().map(|t| simplify(&t)).collect();
        if out.len() == 1 {
            out.into_iter().next().unwrap()
        } else if f.dir == Dir::Le {
            SymExpr::Max(out)
        } else {
            SymExpr::Min(out)
        }
    })
}

/// Value of a self call whose relevant arguments are all constants, taken
/// from the non-recursive case containing that point.
fn constant_call(f: &FnEqs, ri: usize, rel: &BTreeSet<usize>, args: &[SymExpr]) -> Option<SymExpr> {
    let mut at = Guard::top();
    for &i in rel {
        let k = args.get(i)?.as_const()?;
        if !k.is_integer() {
            return None;
        }
        let k = k.to_integer() as i64;
        if !at.restrict(&f.formals[i], k, Some(k)) {
            return None;
        }
    }
    let map: BTreeMap<BVar, SymExpr> = f
        .formals
        .iter()
        .cloned()
        .zip(args.iter().cloned())
        .collect();
    let hit: Vec<usize> = (0..f.cases.len())
        .filter(|&i| at.intersect(&f.cases[i].guard).is_some())
        .collect();
    match hit.as_slice() {
        [] => Some(simplify(&f.default.subst_vars(&map))),
        [i] if *i != ri
            && at.implies(&f.cases[*i].guard)
            && !is_self_call(&f.cases[*i].rhs, &f.name) =>
        {
            Some(simplify(&f.cases[*i].rhs.subst_vars(&map)))
        }
        _ => None,
    }
}

fn solve_recursive_core(f: &FnEqs, ri: usize) -> Option<ClosedForm> {
    let rc = &f.cases[ri];
    let rel = relevant_formals(f);
    let calls: Vec<Vec<SymExpr>> = rc
        .rhs
        .calls()
        .into_iter()
        .filter(|(n, _)| **n == *f.name)
        .map(|(_, a)| a)
        .collect();
    let mut dsets = BTreeSet::new();
    let mut decs: Vec<BTreeMap<usize, i64>> = Vec::new();
    for args in &calls {
        let offs = call_offsets(f, args);
        let mut d = BTreeMap::new();
        for &i in &rel {
            match offs[i] {
                Some(0) => {}
                Some(c) if c < 0 => {
                    d.insert(i, -c);
                }
                _ => return None,
            }
        }
        if d.is_empty() {
            return None;
        }
        dsets.insert(d.keys().copied().collect::<Vec<_>>());
        decs.push(d);
    }
    if dsets.len() != 1 {
        return None;
    }
    let dvars = dsets.into_iter().next().unwrap();
    if dvars.len() == 1 {
        solve_one_var(f, ri, dvars[0], &calls, &decs)
    } else {
        solve_multi_var(f, ri, &dvars, &calls, &decs)
    }
}

/// Value of the function at `n = m` under the other constraints of the
/// recursive guard: `Some(expr)` when a single base case (or the default)
/// determines it.
fn base_value(f: &FnEqs, ri: usize, n: &BVar, m: i64) -> Option<SymExpr> {
    if m < 0 {
        return None;
    }
    let others = f.cases[ri].guard.without(n);
    let mut at = others.clone();
    at.restrict(n, m, Some(m));
    let mut found = None;
    for (i, c) in f.cases.iter().enumerate() {
        if i == ri {
            continue;
        }
        if at.intersect(&c.guard).is_none() {
            continue;
        }
        if !at.implies(&c.guard) || found.is_some() || is_self_call(&c.rhs, &f.name) {
            return None;
        }
        let sub = BTreeMap::from([(n.clone(), SymExpr::int(m))]);
        found = Some(simplify(&c.rhs.subst_vars(&sub)));
    }
    Some(found.unwrap_or_else(|| f.default.clone()))
}

fn solve_one_var(
    f: &FnEqs,
    ri: usize,
    d: usize,
    calls: &[Vec<SymExpr>],
    decs: &[BTreeMap<usize, i64>],
) -> Option<ClosedForm> {
    let rc = &f.cases[ri];
    let n = f.formals[d].clone();
    let (n0, hi) = rc.guard.interval(&n);
    let kmax = decs.iter().map(|m| m[&d]).max()?;
    if hi.is_some() || n0 < kmax {
        return None;
    }
    let call_exprs: Vec<SymExpr> = calls
        .iter()
        .map(|a| SymExpr::call(&f.name, a.clone()))
        .collect();

    // op(h, F(n-1))
    if let SymExpr::Min(xs) | SymExpr::Max(xs) = &rc.rhs {
        if calls.len() == 1 && decs[0][&d] == 1 && xs.contains(&call_exprs[0]) {
            let others: Vec<SymExpr> = xs
                .iter()
                .filter(|x| **x != call_exprs[0])
                .cloned()
                .collect();
            if others
                .iter()
                .all(|x| !is_self_call(x, &f.name) && !x.mentions(&n))
            {
                let b = base_value(f, ri, &n, n0 - 1)?;
                let mut all = others;
                all.push(b);
                let main = if matches!(rc.rhs, SymExpr::Min(_)) {
                    SymExpr::Min(all)
                } else {
                    SymExpr::Max(all)
                };
                return Some(finish(f, Some(ri), main, "min/max", true));
            }
        }
    }

    // linear combination of calls plus a call-free part
    let p = to_poly(&rc.rhs);
    let mut coeff: BTreeMap<i64, Rat> = BTreeMap::new();
    let mut g = Poly::default();
    for (m, c) in &p.terms {
        let has = m.iter().any(|(a, _)| is_self_call(a, &f.name));
        if !has {
            let mut t = Poly::default();
            t.terms.insert(m.clone(), *c);
            g = g.add(&t);
            continue;
        }
        if m.len() != 1 || m[0].1 != 1 {
            return None;
        }
        let pos = call_exprs.iter().position(|e| *e == m[0].0)?;
        *coeff.entry(decs[pos][&d]).or_insert_with(Rat::zero) += c;
    }
    if coeff.values().any(|c| c.is_negative() || c.is_zero()) {
        return None;
    }
    let gx = g.to_expr();
    if coeff.len() == 1 {
        let (&k, &a) = coeff.iter().next().unwrap();
        if a.is_one() && k == 1 {
            let cs = g.coeffs_in(&n)?;
            let b = base_value(f, ri, &n, n0 - 1)?;
            if b == SymExpr::Nob || b == SymExpr::Inf {
                return None;
            }
            let main = to_poly(&b).add(&sum_poly(&cs, n0, &n)).to_expr();
            return Some(finish(f, Some(ri), main, "sum", true));
        }
        if a.is_one() {
            if gx.mentions(&n) {
                return None;
            }
            let step = simplify(&SymExpr::mul(
                gx.clone(),
                SymExpr::Const(Rat::new(1, k as i128)),
            ));
            let mut offsets = Vec::new();
            for r in (n0 - k)..n0 {
                let b = base_value(f, ri, &n, r)?;
                if b == SymExpr::Nob || b == SymExpr::Inf {
                    return None;
                }
                offsets.push(simplify(&SymExpr::sub(
                    b,
                    SymExpr::mul(step.clone(), SymExpr::int(r)),
                )));
            }
            let exact = offsets.windows(2).all(|w| w[0] == w[1]);
            let off = if exact {
                offsets[0].clone()
            } else if f.dir == Dir::Le {
                SymExpr::Max(offsets)
            } else {
                SymExpr::Min(offsets)
            };
            let main = SymExpr::add(SymExpr::mul(step, SymExpr::Var(n.clone())), off);
            return Some(finish(f, Some(ri), main, "sum", exact));
        }
        if k == 1 && a > Rat::one() && a.is_integer() {
            if gx.mentions(&n) {
                return None;
            }
            let b = base_value(f, ri, &n, n0 - 1)?;
            if b == SymExpr::Nob || b == SymExpr::Inf {
                return None;
            }
            // F(n) = (B + g/(a-1)) a^(n-n0+1) - g/(a-1)
            let q = simplify(&SymExpr::mul(
                gx.clone(),
                SymExpr::Const(Rat::one() / (a - Rat::one())),
            ));
            let mut scale = Rat::one();
            for _ in 0..(n0 - 1).abs() {
                scale = if n0 > 0 { scale / a } else { scale * a };
            }
            let lead = simplify(&SymExpr::mul(
                SymExpr::add(b, q.clone()),
                SymExpr::Const(scale),
            ));
            let power = match lead.as_const().and_then(|c| log_exact(c, a)) {
                Some(j) => SymExpr::Pow(
                    a,
                    Box::new(SymExpr::add(SymExpr::Var(n.clone()), SymExpr::int(j))),
                ),
                None => SymExpr::mul(lead, SymExpr::Pow(a, Box::new(SymExpr::Var(n.clone())))),
            };
            let main = SymExpr::sub(power, q);
            return Some(finish(f, Some(ri), main, "geometric", true));
        }
        return None;
    }
    // several decrements: exact linear recurrence
    if gx.mentions(&n) {
        return None;
    }
    let kk = *coeff.keys().max().unwrap();
    let coeffs: Vec<Rat> = (1..=kk)
        .map(|k| coeff.get(&k).copied().unwrap_or_else(Rat::zero))
        .collect();
    let mut init = Vec::new();
    for r in (n0 - kk)..n0 {
        let b = base_value(f, ri, &n, r)?;
        if b == SymExpr::Nob || b == SymExpr::Inf {
            return None;
        }
        init.push(b);
    }
    let main = SymExpr::LinRec(Box::new(LinRec {
        coeffs,
        constant: gx,
        init,
        start: n0 - kk,
        index: SymExpr::Var(n.clone()),
    }));
    Some(finish(f, Some(ri), main, "linear", true))
}

/// `j ≥ 0` with `a^j = c`.
fn log_exact(c: Rat, a: Rat) -> Option<i64> {
    let mut acc = Rat::one();
    for j in 0..64 {
        if acc == c {
            return Some(j);
        }
        if acc > c {
            return None;
        }
        acc *= a;
    }
    None
}

fn solve_multi_var(
    f: &FnEqs,
    ri: usize,
    dvars: &[usize],
    calls: &[Vec<SymExpr>],
    decs: &[BTreeMap<usize, i64>],
) -> Option<ClosedForm> {
    if calls.len() != 1 || decs[0].values().any(|&k| k != 1) {
        return None;
    }
    let rc = &f.cases[ri];
    let vars: Vec<BVar> = dvars.iter().map(|&i| f.formals[i].clone()).collect();
    for v in &vars {
        if rc.guard.interval(v) != (1, None) {
            return None;
        }
    }
    let call = SymExpr::call(&f.name, calls[0].clone());
    let g = simplify(&SymExpr::sub(rc.rhs.clone(), call.clone()));
    if is_self_call(&g, &f.name) || vars.iter().any(|v| g.mentions(v)) {
        return None;
    }
    // The recursion stops on the boundary where some decremented formal
    // is 0; differing boundary values are joined.
    let mut bases: Vec<SymExpr> = Vec::new();
    for (i, c) in f.cases.iter().enumerate() {
        if i == ri {
            continue;
        }
        if is_self_call(&c.rhs, &f.name) || vars.iter().any(|v| c.rhs.mentions(v)) {
            return None;
        }
        if !vars.iter().any(|v| c.guard.point(v) == Some(0)) {
            return None;
        }
        let r = simplify(&c.rhs);
        if !bases.contains(&r) {
            bases.push(r);
        }
    }
    let guards: Vec<&Guard> = f.cases.iter().map(|c| &c.guard).collect();
    if !covers(&guards) && f.default != SymExpr::Nob && !bases.contains(&f.default) {
        bases.push(f.default.clone());
    }
    if g.as_const().is_none_or(|c| c.is_negative()) && bases.len() > 1 {
        return None;
    }
    let exact = bases.len() == 1;
    let b = match bases.len() {
        0 => return None,
        1 => bases.pop().unwrap(),
        _ if f.dir == Dir::Le => SymExpr::Max(bases),
        _ => SymExpr::Min(bases),
    };
    let main = SymExpr::add(
        SymExpr::mul(
            g,
            SymExpr::Min(vars.into_iter().map(SymExpr::Var).collect()),
        ),
        b,
    );
    Some(finish(f, Some(ri), main, "min-decrement", exact))
}

// ---------------------------------------------------------------- mutual

/// Replace calls to `h` inside `f` by `h`'s cases, splitting guards.
fn unfold(f: &FnEqs, h: &FnEqs) -> Option<FnEqs> {
    if h.cases.iter().any(|c| is_self_call(&c.rhs, &h.name)) {
        return None;
    }
    let mut work: Vec<Case> = f.cases.clone();
    let mut done = Vec::new();
    let mut steps = 0;
    while let Some(c) = work.pop() {
        steps += 1;
        if steps > 1000 {
            return None;
        }
        let call = c.rhs.calls().into_iter().find(|(n, _)| **n == *h.name);
        let Some((_, args)) = call else {
            done.push(c);
            continue;
        };
        let target = SymExpr::call(&h.name, args.clone());
        let map: BTreeMap<BVar, SymExpr> = h
            .formals
            .iter()
            .cloned()
            .zip(args.iter().cloned())
            .collect();
        let mut pieces: Vec<Guard> = Vec::new();
        for hc in &h.cases {
            let g = translate_guard(&hc.guard, &h.formals, &args, &c.guard)?;
            if let Some(g) = g {
                let rhs = replace(&c.rhs, &target, &simplify(&hc.rhs.subst_vars(&map)));
                pieces.push(g.clone());
                work.push(Case { guard: g, rhs });
            }
        }
        // the part of c's guard not covered by any of h's cases takes h's default
        let gaps = complement_1d(&c.guard, &pieces)?;
        for g in gaps {
            let rhs = replace(&c.rhs, &target, &simplify(&h.default.subst_vars(&map)));
            work.push(Case { guard: g, rhs });
        }
    }
    done.sort_by(|a, b| a.guard.cmp(&b.guard));
    Some(FnEqs {
        cases: done,
        ..f.clone()
    })
}

fn replace(e: &SymExpr, target: &SymExpr, by: &SymExpr) -> SymExpr {
    simplify(&e.map(&mut |x| if x == *target { by.clone() } else { x }))
}

/// Guard on the caller's formals under which the callee's guard holds at
/// `args`. `Some(None)` when unsatisfiable, `None` when not expressible.
fn translate_guard(
    g: &Guard,
    formals: &[BVar],
    args: &[SymExpr],
    ctx: &Guard,
) -> Option<Option<Guard>> {
    let mut out = ctx.clone();
    for (v, (lo, hi)) in &g.bounds {
        let j = formals.iter().position(|w| w == v)?;
        match affine(&args[j])? {
            (None, c) => {
                if c < *lo || hi.is_some_and(|h| c > h) {
                    return Some(None);
                }
            }
            (Some(w), c) => {
                if !out.restrict(&w, lo - c, hi.map(|h| h - c)) {
                    return Some(None);
                }
            }
        }
    }
    Some(Some(out))
}

/// Sub-guards of `whole` not covered by `pieces`, when all pieces differ
/// from `whole` in at most one variable.
fn complement_1d(whole: &Guard, pieces: &[Guard]) -> Option<Vec<Guard>> {
    let mut vars = BTreeSet::new();
    for p in pieces {
        for v in p.vars() {
            if p.interval(v) != whole.interval(v) {
                vars.insert(v.clone());
            }
        }
    }
    if vars.is_empty() {
        return Some(if pieces.is_empty() {
            vec![whole.clone()]
        } else {
            vec![]
        });
    }
    if vars.len() > 1 {
        return None;
    }
    let v = vars.into_iter().next().unwrap();
    let (lo, hi) = whole.interval(&v);
    let mut ivs: Vec<(i64, Option<i64>)> = pieces.iter().map(|p| p.interval(&v)).collect();
    ivs.sort();
    let mut out = Vec::new();
    let mut cur = lo;
    for (a, b) in ivs {
        if a > cur {
            let mut g = whole.clone();
            let end = a - 1;
            if hi.is_none_or(|h| cur <= h)
                && g.restrict(&v, cur, Some(hi.map_or(end, |h| h.min(end))))
            {
                out.push(g);
            }
        }
        match b {
            None => return Some(out),
            Some(b) => cur = cur.max(b + 1),
        }
    }
    if hi.is_none_or(|h| cur <= h) {
        let mut g = whole.clone();
        if g.restrict(&v, cur, hi) {
            out.push(g);
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrence::expr::Value;
    use crate::recurrence::system::unroll;

    fn g1(v: &str, lo: i64, hi: Option<i64>) -> Guard {
        let mut g = Guard::top();
        g.restrict(&BVar::new(v), lo, hi);
        g
    }

    fn call(f: &str, args: Vec<SymExpr>) -> SymExpr {
        SymExpr::call(f, args)
    }

    fn dec(v: &str, k: i64) -> SymExpr {
        SymExpr::sub(SymExpr::var(v), SymExpr::int(k))
    }

    fn sys1(name: &str, formals: &[&str], dir: Dir, cases: Vec<Case>) -> EqSystem {
        let f = FnEqs {
            name: name.into(),
            dir,
            formals: formals.iter().map(|v| BVar::new(v)).collect(),
            cases,
            default: SymExpr::zero(),
        };
        EqSystem {
            fns: BTreeMap::from([(name.to_string(), f)]),
            defs: BTreeMap::new(),
        }
    }

    fn check_against_unroll(sys: &EqSystem, name: &str, max: i64) {
        let sol = solve(sys).unwrap();
        let cf = &sol.forms[name];
        let n = cf.formals.len();
        let mut idx = vec![0i64; n];
        loop {
            let env: BTreeMap<BVar, Value> = cf
                .formals
                .iter()
                .cloned()
                .zip(idx.iter().map(|&x| Value::int(x)))
                .collect();
            assert_eq!(
                cf.evaluate(&env).unwrap(),
                unroll(sys, name, &env).unwrap(),
                "{name} at {idx:?}: {}",
                cf.main
            );
            let mut k = 0;
            loop {
                if k == n {
                    return;
                }
                idx[k] += 1;
                if idx[k] <= max {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn linear_sum() {
        let sys = sys1(
            "r",
            &["β"],
            Dir::Le,
            vec![
                Case {
                    guard: g1("β", 0, Some(0)),
                    rhs: SymExpr::one(),
                },
                Case {
                    guard: g1("β", 1, None),
                    rhs: SymExpr::add(SymExpr::one(), call("r", vec![dec("β", 1)])),
                },
            ],
        );
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.forms["r"].main.to_string(), "β+1");
        assert!(sol.forms["r"].exact && sol.forms["r"].merged_exact);
        check_against_unroll(&sys, "r", 12);
    }

    #[test]
    fn geometric() {
        let sys = sys1(
            "r",
            &["ν"],
            Dir::Le,
            vec![
                Case {
                    guard: g1("ν", 0, Some(0)),
                    rhs: SymExpr::one(),
                },
                Case {
                    guard: g1("ν", 1, None),
                    rhs: SymExpr::add(
                        SymExpr::mul(SymExpr::int(2), call("r", vec![dec("ν", 1)])),
                        SymExpr::one(),
                    ),
                },
            ],
        );
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.forms["r"].main.to_string(), "2^(ν+1)−1");
        check_against_unroll(&sys, "r", 12);
    }

    #[test]
    fn idempotent_argument_and_constant_call() {
        let m = SymExpr::max2(SymExpr::var("x"), SymExpr::var("b"));
        let sys = sys1(
            "f",
            &["n", "x", "b"],
            Dir::Le,
            vec![
                Case {
                    guard: g1("n", 0, Some(0)),
                    rhs: SymExpr::var("x"),
                },
                Case {
                    guard: g1("n", 1, None),
                    rhs: SymExpr::add(
                        SymExpr::var("x"),
                        call("f", vec![dec("n", 1), m, SymExpr::var("b")]),
                    ),
                },
            ],
        );
        let sol = solve(&sys).unwrap();
        let cf = &sol.forms["f"];
        assert_ne!(cf.pattern, "fallback");
        for (n, x, b) in [(0, 3, 1), (3, 1, 4), (4, 5, 2), (2, 0, 0)] {
            let env: BTreeMap<BVar, Value> = [("n", n), ("x", x), ("b", b)]
                .iter()
                .map(|(k, v)| (BVar::new(k), Value::int(*v)))
                .collect();
            assert!(
                unroll(&sys, "f", &env)
                    .unwrap()
                    .le(cf.evaluate(&env).unwrap()),
                "{}",
                cf.main
            );
        }

        let sys = sys1(
            "e",
            &["α"],
            Dir::Ge,
            vec![
                Case {
                    guard: g1("α", 0, Some(0)),
                    rhs: SymExpr::one(),
                },
                Case {
                    guard: g1("α", 1, None),
                    rhs: SymExpr::Add(vec![SymExpr::var("α"), call("e", vec![SymExpr::zero()])]),
                },
            ],
        );
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.forms["e"].main.to_string(), "α+1");
        check_against_unroll(&sys, "e", 8);
    }

    #[test]
    fn merged_self_calls() {
        let sys = sys1(
            "m",
            &["x", "n", "y"],
            Dir::Le,
            vec![
                Case {
                    guard: g1("n", 0, Some(0)),
                    rhs: SymExpr::var("x"),
                },
                Case {
                    guard: g1("n", 1, None),
                    rhs: SymExpr::Max(vec![
                        call("m", vec![SymExpr::var("y"), dec("n", 1), SymExpr::var("y")]),
                        call("m", vec![SymExpr::var("x"), dec("n", 1), SymExpr::var("y")]),
                    ]),
                },
            ],
        );
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.forms["m"].main.to_string(), "max(x, y)");
    }

    #[test]
    fn constant_system() {
        let sys = sys1(
            "f",
            &["n"],
            Dir::Le,
            vec![Case {
                guard: Guard::top(),
                rhs: SymExpr::int(3),
            }],
        );
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.forms["f"].main, SymExpr::int(3));
    }

    #[test]
    fn fibonacci_linear_recurrence() {
        let sys = sys1(
            "f",
            &["ν"],
            Dir::Le,
            vec![
                Case {
                    guard: g1("ν", 0, Some(0)),
                    rhs: SymExpr::one(),
                },
                Case {
                    guard: g1("ν", 1, Some(1)),
                    rhs: SymExpr::one(),
                },
                Case {
                    guard: g1("ν", 2, None),
                    rhs: SymExpr::Add(vec![
                        SymExpr::one(),
                        call("f", vec![dec("ν", 1)]),
                        call("f", vec![dec("ν", 2)]),
                    ]),
                },
            ],
        );
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.forms["f"].pattern, "linear");
        check_against_unroll(&sys, "f", 12);
    }

    #[test]
    fn quadratic_sum_with_other_atoms() {
        // r(β, δ) = r(β-1, δ) + β + δ
        let sys = sys1(
            "r",
            &["β", "δ"],
            Dir::Le,
            vec![
                Case {
                    guard: g1("β", 0, Some(0)),
                    rhs: SymExpr::one(),
                },
                Case {
                    guard: g1("β", 1, None),
                    rhs: SymExpr::Add(vec![
                        SymExpr::var("β"),
                        SymExpr::var("δ"),
                        call("r", vec![dec("β", 1), SymExpr::var("δ")]),
                    ]),
                },
            ],
        );
        check_against_unroll(&sys, "r", 8);
    }

    #[test]
    fn min_form_and_multi_decrement() {
        let sys = sys1(
            "g",
            &["α", "γ", "γY"],
            Dir::Ge,
            vec![
                Case {
                    guard: g1("α", 0, Some(0)),
                    rhs: SymExpr::var("γY"),
                },
                Case {
                    guard: g1("α", 1, None),
                    rhs: SymExpr::Min(vec![
                        SymExpr::var("γ"),
                        call(
                            "g",
                            vec![dec("α", 1), SymExpr::var("γ"), SymExpr::var("γY")],
                        ),
                    ]),
                },
            ],
        );
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.forms["g"].main.to_string(), "min(γ, γY)");
        check_against_unroll(&sys, "g", 5);

        let mut c0 = g1("a", 0, Some(0));
        let _ = &mut c0;
        let mut c1 = g1("a", 1, None);
        c1.restrict(&BVar::new("b"), 0, Some(0));
        let mut rec = g1("a", 1, None);
        rec.restrict(&BVar::new("b"), 1, None);
        let sys = sys1(
            "z",
            &["a", "b"],
            Dir::Le,
            vec![
                Case {
                    guard: c0,
                    rhs: SymExpr::one(),
                },
                Case {
                    guard: c1,
                    rhs: SymExpr::one(),
                },
                Case {
                    guard: rec,
                    rhs: SymExpr::add(SymExpr::one(), call("z", vec![dec("a", 1), dec("b", 1)])),
                },
            ],
        );
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.forms["z"].main.to_string(), "min(a, b)+1");
        check_against_unroll(&sys, "z", 6);
    }

    #[test]
    fn mutual_pair_and_fallback() {
        let f = FnEqs {
            name: "p".into(),
            dir: Dir::Le,
            formals: vec![BVar::new("n")],
            cases: vec![
                Case {
                    guard: g1("n", 0, Some(0)),
                    rhs: SymExpr::one(),
                },
                Case {
                    guard: g1("n", 1, None),
                    rhs: SymExpr::add(SymExpr::one(), call("q", vec![dec("n", 1)])),
                },
            ],
            default: SymExpr::zero(),
        };
        let h = FnEqs {
            name: "q".into(),
            dir: Dir::Le,
            formals: vec![BVar::new("m")],
            cases: vec![
                Case {
                    guard: g1("m", 0, Some(0)),
                    rhs: SymExpr::one(),
                },
                Case {
                    guard: g1("m", 1, None),
                    rhs: SymExpr::add(SymExpr::one(), call("p", vec![dec("m", 1)])),
                },
            ],
            default: SymExpr::zero(),
        };
        let sys = EqSystem {
            fns: BTreeMap::from([("p".into(), f), ("q".into(), h)]),
            defs: BTreeMap::new(),
        };
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.forms["p"].main.to_string(), "n+1");
        assert_eq!(sol.forms["q"].main.to_string(), "m+1");
        check_against_unroll(&sys, "p", 12);
        check_against_unroll(&sys, "q", 12);

        // division-like recursion is not recognized
        let sys = sys1(
            "d",
            &["n"],
            Dir::Le,
            vec![Case {
                guard: g1("n", 1, None),
                rhs: call("d", vec![SymExpr::mul(SymExpr::var("n"), SymExpr::int(2))]),
            }],
        );
        let sol = solve(&sys).unwrap();
        assert_eq!(sol.forms["d"].main, SymExpr::Inf);
        assert_eq!(sol.imprecise, vec!["d".to_string()]);
    }
}

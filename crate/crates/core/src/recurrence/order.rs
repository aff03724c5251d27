use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, ToPrimitive};

use super::closed::ClosedForm;
use super::expr::{BVar, LinRec, Rat, SymExpr};
use super::poly::{simplify, to_poly, Mono};

/// Asymptotic order of a bound: the dominant terms of a closed form with
/// constants dropped, rendered canonically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComplexityOrder {
    pub expr: SymExpr,
    pub text: String,
}

impl fmt::Display for ComplexityOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl ComplexityOrder {
    /// Whitespace-insensitive comparison against a golden string.
    pub fn matches(&self, golden: &str) -> bool {
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        strip(&self.text) == strip(golden)
    }
}

pub fn order_of(cf: &ClosedForm) -> ComplexityOrder {
    order_of_expr(&cf.main, &cf.formals)
}

pub fn order_of_expr(e: &SymExpr, formals: &[BVar]) -> ComplexityOrder {
    let expr = order_expr(e);
    let text = render(&expr, &canonical_names(&expr, formals));
    ComplexityOrder { expr, text }
}

fn order_expr(e: &SymExpr) -> SymExpr {
    let e = simplify(e);
    if e.any(&|x| matches!(x, SymExpr::Inf)) {
        return SymExpr::Inf;
    }
    match &e {
        SymExpr::Nob => SymExpr::Nob,
        SymExpr::Const(_) => SymExpr::one(),
        SymExpr::Var(_) | SymExpr::Call(..) => e.clone(),
        SymExpr::Min(xs) | SymExpr::Max(xs) => {
            let is_max = matches!(e, SymExpr::Max(_));
            let mut ords: Vec<SymExpr> = xs
                .iter()
                .map(order_expr)
                .filter(|o| *o != SymExpr::Nob)
                .collect();
            ords.sort();
            ords.dedup();
            let keep: Vec<SymExpr> = ords
                .iter()
                .filter(|a| {
                    !ords.iter().any(|b| {
                        b != *a
                            && if is_max {
                                grows_at_least(b, a)
                            } else {
                                grows_at_least(a, b)
                            }
                    })
                })
                .cloned()
                .collect();
            match keep.len() {
                0 => SymExpr::one(),
                1 => keep.into_iter().next().unwrap(),
                _ if is_max => SymExpr::Max(keep),
                _ => SymExpr::Min(keep),
            }
        }
        SymExpr::Pow(b, idx) => match single_var(idx) {
            Some(v) if *b > Rat::one() => SymExpr::Pow(*b, Box::new(SymExpr::Var(v))),
            _ if *b > Rat::one() => SymExpr::Pow(*b, Box::new(order_expr(idx))),
            _ => SymExpr::one(),
        },
        SymExpr::LinRec(l) => {
            let index = match single_var(&l.index) {
                Some(v) => SymExpr::Var(v),
                None => order_expr(&l.index),
            };
            if l.coeffs.iter().fold(Rat::default(), |a, c| a + c) <= Rat::one() {
                // no exponential growth: at most linear in the index
                return index;
            }
            SymExpr::LinRec(Box::new(LinRec {
                coeffs: l.coeffs.clone(),
                constant: SymExpr::zero(),
                init: vec![],
                start: 0,
                index,
            }))
        }
        _ => {
            let p = to_poly(&e);
            let mut monos: Vec<Mono> = Vec::new();
            for (m, c) in &p.terms {
                if !c.is_positive() || m.is_empty() {
                    continue;
                }
                let mut out: Vec<(SymExpr, u32)> = Vec::new();
                for (a, k) in m {
                    let o = order_expr(a);
                    if o == SymExpr::one() {
                        continue;
                    }
                    match out.iter_mut().find(|(x, _)| *x == o) {
                        Some((_, kk)) => *kk += k,
                        None => out.push((o, *k)),
                    }
                }
                out.sort();
                monos.push(out);
            }
            monos.sort();
            monos.dedup();
            let keep: Vec<&Mono> = monos
                .iter()
                .filter(|a| !monos.iter().any(|b| b != *a && mono_dominates(b, a)))
                .collect();
            let terms: Vec<SymExpr> = keep
                .into_iter()
                .filter(|m| !m.is_empty())
                .map(mono_expr)
                .collect();
            match terms.len() {
                0 => SymExpr::one(),
                1 => terms.into_iter().next().unwrap(),
                _ => SymExpr::Add(terms),
            }
        }
    }
}

fn single_var(e: &SymExpr) -> Option<BVar> {
    let vs: BTreeSet<BVar> = e.vars().into_iter().collect();
    if vs.len() == 1 && !e.has_calls() {
        vs.into_iter().next()
    } else {
        None
    }
}

fn mono_expr(m: &Mono) -> SymExpr {
    let mut f = Vec::new();
    for (a, k) in m {
        for _ in 0..*k {
            f.push(a.clone());
        }
    }
    if f.len() == 1 {
        f.pop().unwrap()
    } else {
        SymExpr::Mul(f)
    }
}

fn monos_of(o: &SymExpr) -> Vec<Mono> {
    match o {
        SymExpr::Add(xs) => xs.iter().flat_map(monos_of).collect(),
        SymExpr::Mul(xs) => {
            let mut m: BTreeMap<SymExpr, u32> = BTreeMap::new();
            for x in xs {
                *m.entry(x.clone()).or_default() += 1;
            }
            vec![m.into_iter().collect()]
        }
        SymExpr::Const(_) => vec![vec![]],
        other => vec![vec![(other.clone(), 1)]],
    }
}

/// Growth key of a factor: (variable, exponential base, polynomial degree).
fn factor_key(a: &SymExpr, k: u32) -> Option<(BVar, f64, u32)> {
    match a {
        SymExpr::Var(v) => Some((v.clone(), 0.0, k)),
        SymExpr::Pow(b, idx) => match &**idx {
            SymExpr::Var(v) => Some((v.clone(), b.to_f64()?.powi(k as i32), 0)),
            _ => None,
        },
        SymExpr::LinRec(l) => match &l.index {
            SymExpr::Var(v) => Some((v.clone(), dominant_root(&l.coeffs).powi(k as i32), 0)),
            _ => None,
        },
        _ => None,
    }
}

/// Largest real root of x^k = Σ c_i x^(k-i), by bisection.
fn dominant_root(coeffs: &[Rat]) -> f64 {
    let c: Vec<f64> = coeffs.iter().map(|r| r.to_f64().unwrap_or(0.0)).collect();
    let k = c.len() as i32;
    let p = |x: f64| {
        x.powi(k)
            - c.iter()
                .enumerate()
                .map(|(i, ci)| ci * x.powi(k - 1 - i as i32))
                .sum::<f64>()
    };
    let (mut lo, mut hi) = (1.0f64, 1.0 + c.iter().map(|x| x.abs()).sum::<f64>());
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if p(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

type MonoKeys = (BTreeMap<BVar, (f64, u32)>, Vec<(SymExpr, u32)>);

fn mono_dominates(a: &Mono, b: &Mono) -> bool {
    let keys = |m: &Mono| -> MonoKeys {
        let mut per: BTreeMap<BVar, (f64, u32)> = BTreeMap::new();
        let mut opaque = Vec::new();
        for (x, k) in m {
            match factor_key(x, *k) {
                Some((v, base, deg)) => {
                    let e = per.entry(v).or_insert((0.0, 0));
                    e.0 = if e.0 == 0.0 {
                        base
                    } else {
                        e.0 * base.max(1.0)
                    };
                    e.1 += deg;
                }
                None => opaque.push((x.clone(), *k)),
            }
        }
        (per, opaque)
    };
    let (pa, oa) = keys(a);
    let (pb, ob) = keys(b);
    let var_ok = pb.iter().all(|(v, (bb, db))| match pa.get(v) {
        Some((ba, da)) => ba > bb || (ba == bb && da >= db),
        None => false,
    });
    let opaque_ok = ob
        .iter()
        .all(|(x, k)| oa.iter().any(|(y, j)| x == y && j >= k));
    var_ok && opaque_ok
}

/// `a` grows at least as fast as `b`.
fn grows_at_least(a: &SymExpr, b: &SymExpr) -> bool {
    if matches!(a, SymExpr::Inf) {
        return true;
    }
    let ma = monos_of(a);
    monos_of(b)
        .iter()
        .all(|mb| mb.is_empty() || ma.iter().any(|x| x == mb || mono_dominates(x, mb)))
}

/// Split `base_sub` names and renumber the subscripts of the arguments that
/// appear, in formals order; subscripts vanish when only one argument
/// appears.
fn canonical_names(e: &SymExpr, formals: &[BVar]) -> BTreeMap<BVar, String> {
    let used: BTreeSet<BVar> = e.vars().into_iter().collect();
    let split = |v: &BVar| -> (String, Option<String>) {
        match v.name().rsplit_once('_') {
            Some((b, s)) => (b.to_string(), Some(s.to_string())),
            None => (v.name().to_string(), None),
        }
    };
    let mut subs: Vec<String> = Vec::new();
    let mut order: Vec<&BVar> = formals.iter().filter(|v| used.contains(v)).collect();
    order.extend(used.iter().filter(|v| !formals.contains(v)));
    for v in &order {
        if let (_, Some(s)) = split(v) {
            if !subs.contains(&s) {
                subs.push(s);
            }
        }
    }
    order
        .into_iter()
        .map(|v| {
            let (b, s) = split(v);
            let name = match s {
                Some(s) if subs.len() > 1 => {
                    format!("{b}{}", subs.iter().position(|x| *x == s).unwrap() + 1)
                }
                _ => b,
            };
            (v.clone(), name)
        })
        .collect()
}

fn sup(k: u32) -> String {
    const D: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    k.to_string()
        .chars()
        .map(|c| D[c.to_digit(10).unwrap() as usize])
        .collect()
}

fn render(e: &SymExpr, names: &BTreeMap<BVar, String>) -> String {
    match e {
        SymExpr::Inf => "∞".into(),
        SymExpr::Nob => "⊥".into(),
        SymExpr::Const(_) => "1".into(),
        SymExpr::Var(v) => names.get(v).cloned().unwrap_or_else(|| v.to_string()),
        SymExpr::Min(xs) | SymExpr::Max(xs) => {
            let mut parts: Vec<String> = xs.iter().map(|x| render(x, names)).collect();
            parts.sort();
            let op = if matches!(e, SymExpr::Min(_)) {
                "min"
            } else {
                "max"
            };
            format!("{op}({})", parts.join(","))
        }
        SymExpr::Pow(b, idx) => format!("{}^{}", b.to_integer(), render_atomic(idx, names)),
        SymExpr::LinRec(l) => format!("{}^{}", l.root_label(), render_atomic(&l.index, names)),
        SymExpr::Add(xs) => {
            let mut parts: Vec<String> = xs.iter().map(|x| render(x, names)).collect();
            parts.sort();
            parts.join("+")
        }
        SymExpr::Mul(_) => {
            let mut parts: Vec<(String, u32)> = Vec::new();
            for (x, k) in monos_of(e).into_iter().next().unwrap_or_default() {
                parts.push((render_atomic(&x, names), k));
            }
            parts.sort();
            parts
                .into_iter()
                .map(|(s, k)| if k > 1 { format!("{s}{}", sup(k)) } else { s })
                .collect()
        }
        other => other.to_string(),
    }
}

fn render_atomic(e: &SymExpr, names: &BTreeMap<BVar, String>) -> String {
    let s = render(e, names);
    if matches!(e, SymExpr::Add(_) | SymExpr::Mul(_)) {
        format!("({s})")
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> SymExpr {
        SymExpr::var(s)
    }

    fn ord(e: SymExpr, formals: &[&str]) -> String {
        let f: Vec<BVar> = formals.iter().map(|s| BVar::new(s)).collect();
        order_of_expr(&e, &f).text
    }

    #[test]
    fn drops_constants_and_lower_terms() {
        assert_eq!(ord(SymExpr::add(v("β_X"), SymExpr::one()), &["β_X"]), "β");
        let hanoi = SymExpr::sub(
            SymExpr::Pow(
                Rat::from_integer(2),
                Box::new(SymExpr::add(v("ν_N"), SymExpr::one())),
            ),
            SymExpr::one(),
        );
        assert_eq!(ord(hanoi, &["ν_N"]), "2^ν");
        let e = SymExpr::Add(vec![
            SymExpr::Mul(vec![v("b1_X"), v("b1_X"), v("b2_X")]),
            v("b1_X"),
        ]);
        assert_eq!(ord(e, &["b1_X", "b2_X"]), "b1²b2");
        assert_eq!(ord(SymExpr::int(7), &[]), "1");
        assert_eq!(ord(SymExpr::add(SymExpr::Inf, v("x")), &["x"]), "∞");
    }

    #[test]
    fn keeps_min_and_renumbers_arguments() {
        let e = SymExpr::add(
            SymExpr::Min(vec![v("β_X"), v("β_Y"), v("β_Z")]),
            SymExpr::one(),
        );
        assert_eq!(ord(e, &["β_X", "β_Y", "β_Z"]), "min(β1,β2,β3)");
        let e = SymExpr::Add(vec![
            SymExpr::mul(v("β_X"), v("β_Y")),
            v("β_X"),
            SymExpr::one(),
        ]);
        assert_eq!(ord(e, &["β_X", "β_Y"]), "β1β2");
        let e = SymExpr::Max(vec![v("β_X"), SymExpr::mul(v("β_X"), v("β_X"))]);
        assert_eq!(ord(e, &["β_X"]), "β²");
    }

    #[test]
    fn exponential_dominates_polynomial_and_fib_root() {
        let l = SymExpr::LinRec(Box::new(LinRec {
            coeffs: vec![Rat::one(), Rat::one()],
            constant: SymExpr::one(),
            init: vec![SymExpr::one(), SymExpr::one()],
            start: 0,
            index: v("ν_N"),
        }));
        assert_eq!(ord(SymExpr::add(l, v("ν_N")), &["ν_N"]), "φ^ν");
        assert!((dominant_root(&[Rat::one(), Rat::one()]) - 1.618_033_988).abs() < 1e-6);
    }

    #[test]
    fn idempotent_and_scale_invariant() {
        let f = vec![BVar::new("β"), BVar::new("δ")];
        let e = SymExpr::Add(vec![
            SymExpr::Mul(vec![SymExpr::int(3), v("β"), v("δ")]),
            v("β"),
            SymExpr::int(2),
        ]);
        let o = order_of_expr(&e, &f);
        assert_eq!(o.text, "βδ");
        assert_eq!(order_of_expr(&o.expr, &f), o);
        let scaled = SymExpr::mul(SymExpr::int(5), e);
        assert_eq!(order_of_expr(&scaled, &f), o);
    }
}

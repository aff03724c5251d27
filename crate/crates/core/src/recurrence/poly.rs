//! Polynomial normal form and algebraic simplification of [`SymExpr`].
//!
//! Atoms are variables and any non-arithmetic subexpression (calls, min,
//! max, powers, recurrence values). Sums of non-negative terms are assumed
//! throughout: all bound variables range over non-negative integers.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::expr::{BVar, Rat, SymExpr};

/// Sorted list of (atom, exponent) pairs.
pub type Mono = Vec<(SymExpr, u32)>;

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Poly {
    pub terms: BTreeMap<Mono, Rat>,
}

fn mono_mul(a: &Mono, b: &Mono) -> Mono {
    let mut m: BTreeMap<SymExpr, u32> = BTreeMap::new();
    for (x, e) in a.iter().chain(b.iter()) {
        *m.entry(x.clone()).or_default() += e;
    }
    m.into_iter().collect()
}

pub fn degree(m: &Mono) -> u32 {
    m.iter().map(|(_, e)| e).sum()
}

impl Poly {
    pub fn constant(c: Rat) -> Poly {
        let mut p = Poly::default();
        if !c.is_zero() {
            p.terms.insert(vec![], c);
        }
        p
    }

    pub fn atom(a: SymExpr) -> Poly {
        let mut p = Poly::default();
        p.terms.insert(vec![(a, 1)], Rat::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => self.terms.get(&vec![]).copied(),
            _ => None,
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            let e = out.terms.entry(m.clone()).or_insert_with(Rat::zero);
            *e += c;
            if e.is_zero() {
                out.terms.remove(m);
            }
        }
        out
    }

    pub fn scale(&self, k: Rat) -> Poly {
        if k.is_zero() {
            return Poly::default();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(-Rat::one()))
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut out = Poly::default();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let m = mono_mul(m1, m2);
                let e = out.terms.entry(m.clone()).or_insert_with(Rat::zero);
                *e += c1 * c2;
                if e.is_zero() {
                    out.terms.remove(&m);
                }
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::constant(Rat::one());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// All coefficients non-negative: the polynomial is ≥ 0 for non-negative
    /// atoms.
    pub fn nonneg(&self) -> bool {
        self.terms.values().all(|c| !c.is_negative())
    }

    pub fn mentions(&self, v: &BVar) -> bool {
        self.terms
            .keys()
            .any(|m| m.iter().any(|(a, _)| a.mentions(v)))
    }

    /// View as a polynomial in the variable `v` with coefficients free of
    /// `v`. `None` when `v` occurs inside an opaque atom.
    pub fn coeffs_in(&self, v: &BVar) -> Option<Vec<Poly>> {
        let var = SymExpr::Var(v.clone());
        let mut out: Vec<Poly> = Vec::new();
        for (m, c) in &self.terms {
            let mut k = 0u32;
            let mut rest = Vec::new();
            for (a, e) in m {
                if *a == var {
                    k = *e;
                } else if a.mentions(v) {
                    return None;
                } else {
                    rest.push((a.clone(), *e));
                }
            }
            while out.len() <= k as usize {
                out.push(Poly::default());
            }
            let mut p = Poly::default();
            p.terms.insert(rest, *c);
            out[k as usize] = out[k as usize].add(&p);
        }
        Some(out)
    }

    pub fn from_coeffs(v: &BVar, coeffs: &[Poly]) -> Poly {
        let x = Poly::atom(SymExpr::Var(v.clone()));
        let mut out = Poly::default();
        for (k, c) in coeffs.iter().enumerate() {
            out = out.add(&c.mul(&x.pow(k as u32)));
        }
        out
    }

    pub fn to_expr(&self) -> SymExpr {
        let mut terms: Vec<(&Mono, &Rat)> = self.terms.iter().collect();
        terms.sort_by(|(a, _), (b, _)| degree(b).cmp(&degree(a)).then_with(|| a.cmp(b)));
        let mut parts = Vec::new();
        for (m, c) in terms {
            let mut factors = Vec::new();
            if m.is_empty() || !c.is_one() {
                factors.push(SymExpr::Const(*c));
            }
            for (a, e) in m {
                for _ in 0..*e {
                    factors.push(a.clone());
                }
            }
            parts.push(if factors.len() == 1 {
                factors.pop().unwrap()
            } else {
                SymExpr::Mul(factors)
            });
        }
        match parts.len() {
            0 => SymExpr::zero(),
            1 => parts.pop().unwrap(),
            _ => SymExpr::Add(parts),
        }
    }
}

/// Convert an already simplified expression to a polynomial.
pub fn to_poly(e: &SymExpr) -> Poly {
    match e {
        SymExpr::Const(c) => Poly::constant(*c),
        SymExpr::Add(xs) => xs
            .iter()
            .fold(Poly::default(), |acc, x| acc.add(&to_poly(x))),
        SymExpr::Mul(xs) => xs
            .iter()
            .fold(Poly::constant(Rat::one()), |acc, x| acc.mul(&to_poly(x))),
        SymExpr::Sub(a, b) => to_poly(a).sub(&to_poly(b)),
        other => Poly::atom(other.clone()),
    }
}

fn contains_inf(e: &SymExpr) -> bool {
    matches!(e, SymExpr::Inf)
}

/// Algebraic simplification to a canonical form.
pub fn simplify(e: &SymExpr) -> SymExpr {
    match e {
        SymExpr::Const(_) | SymExpr::Inf | SymExpr::Nob | SymExpr::Var(_) => e.clone(),
        SymExpr::Add(xs) => {
            let xs: Vec<SymExpr> = xs.iter().map(simplify).collect();
            if xs.iter().any(contains_inf) {
                return SymExpr::Inf;
            }
            xs.iter()
                .fold(Poly::default(), |acc, x| acc.add(&to_poly(x)))
                .to_expr()
        }
        SymExpr::Sub(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if contains_inf(&a) {
                return SymExpr::Inf;
            }
            if contains_inf(&b) {
                return SymExpr::zero();
            }
            to_poly(&a).sub(&to_poly(&b)).to_expr()
        }
        SymExpr::Mul(xs) => {
            let xs: Vec<SymExpr> = xs.iter().map(simplify).collect();
            if xs.iter().any(|x| x.as_const().is_some_and(|c| c.is_zero())) {
                return SymExpr::zero();
            }
            if xs.iter().any(contains_inf) {
                return SymExpr::Inf;
            }
            xs.iter()
                .fold(Poly::constant(Rat::one()), |acc, x| acc.mul(&to_poly(x)))
                .to_expr()
        }
        SymExpr::Min(xs) => simplify_minmax(xs, false),
        SymExpr::Max(xs) => simplify_minmax(xs, true),
        SymExpr::Call(f, xs) => SymExpr::Call(f.clone(), xs.iter().map(simplify).collect()),
        SymExpr::Pow(b, x) => {
            let x = simplify(x);
            match x.as_const() {
                Some(n) if n.is_integer() && !n.is_negative() => {
                    let mut acc = Rat::one();
                    for _ in 0..n.to_integer() {
                        acc *= *b;
                    }
                    SymExpr::Const(acc)
                }
                _ if b.is_one() => SymExpr::one(),
                _ => SymExpr::Pow(*b, Box::new(x)),
            }
        }
        SymExpr::LinRec(l) => {
            let mut l = (**l).clone();
            l.constant = simplify(&l.constant);
            l.init = l.init.iter().map(simplify).collect();
            l.index = simplify(&l.index);
            SymExpr::LinRec(Box::new(l))
        }
    }
}

/// `a ≥ b` for every non-negative assignment, decided syntactically.
pub fn dominates(a: &SymExpr, b: &SymExpr) -> bool {
    if a == b || matches!(a, SymExpr::Inf) {
        return true;
    }
    if matches!(b, SymExpr::Inf) {
        return false;
    }
    to_poly(a).sub(&to_poly(b)).nonneg()
}

fn simplify_minmax(xs: &[SymExpr], is_max: bool) -> SymExpr {
    let mut flat = Vec::new();
    for x in xs {
        match simplify(x) {
            SymExpr::Max(inner) if is_max => flat.extend(inner),
            SymExpr::Min(inner) if !is_max => flat.extend(inner),
            other => flat.push(other),
        }
    }
    let had_nob = flat.iter().any(|x| matches!(x, SymExpr::Nob));
    flat.retain(|x| !matches!(x, SymExpr::Nob));
    if flat.is_empty() {
        return if had_nob {
            SymExpr::Nob
        } else {
            SymExpr::zero()
        };
    }
    if is_max && flat.iter().any(contains_inf) {
        return SymExpr::Inf;
    }
    if !is_max {
        let finite: Vec<SymExpr> = flat.iter().filter(|x| !contains_inf(x)).cloned().collect();
        if finite.is_empty() {
            return SymExpr::Inf;
        }
        flat = finite;
    }
    // drop dominated arguments
    let mut keep: Vec<SymExpr> = Vec::new();
    for (i, x) in flat.iter().enumerate() {
        let redundant = flat.iter().enumerate().any(|(j, y)| {
            if i == j {
                return false;
            }
            let (big, small) = if is_max { (y, x) } else { (x, y) };
            dominates(big, small) && (y != x || j < i)
        });
        if !redundant {
            keep.push(x.clone());
        }
    }
    keep.sort();
    keep.dedup();
    if keep.len() == 1 {
        return keep.pop().unwrap();
    }
    // pull out a common additive part: max(a+X, b+X) = X + max(a, b)
    let polys: Vec<Poly> = keep.iter().map(to_poly).collect();
    let mut common = Poly::default();
    for (m, c) in &polys[0].terms {
        if m.is_empty() {
            continue;
        }
        if polys[1..].iter().all(|p| p.terms.get(m) == Some(c)) {
            common.terms.insert(m.clone(), *c);
        }
    }
    if !common.is_zero() {
        let rest: Vec<SymExpr> = polys.iter().map(|p| p.sub(&common).to_expr()).collect();
        let inner = if is_max {
            SymExpr::Max(rest)
        } else {
            SymExpr::Min(rest)
        };
        return simplify(&SymExpr::Add(vec![common.to_expr(), inner]));
    }
    if is_max {
        SymExpr::Max(keep)
    } else {
        SymExpr::Min(keep)
    }
}

/// Substitute variables and simplify.
pub fn subst(e: &SymExpr, map: &BTreeMap<BVar, SymExpr>) -> SymExpr {
    simplify(&e.subst_vars(map))
}

fn binom(n: u32, k: u32) -> Rat {
    let mut r = Rat::one();
    for i in 0..k {
        r = r * Rat::from_integer((n - i) as i128) / Rat::from_integer((i + 1) as i128);
    }
    r
}

fn bernoulli(n: u32) -> Vec<Rat> {
    // B_1 = +1/2 convention
    let mut b = vec![Rat::one()];
    for m in 1..=n {
        let mut s = Rat::zero();
        for k in 0..m {
            s += binom(m + 1, k) * b[k as usize];
        }
        b.push(-s / Rat::from_integer((m + 1) as i128));
    }
    if n >= 1 {
        b[1] = Rat::new(1, 2);
    }
    b
}

/// Coefficients of `Σ_{i=1}^{n} i^p` as a polynomial in n (index = power).
pub fn faulhaber(p: u32) -> Vec<Rat> {
    let b = bernoulli(p);
    let mut out = vec![Rat::zero(); (p + 2) as usize];
    let scale = Rat::one() / Rat::from_integer((p + 1) as i128);
    for j in 0..=p {
        out[(p + 1 - j) as usize] += scale * binom(p + 1, j) * b[j as usize];
    }
    out
}

/// `Σ_{i=from}^{n} g(i)` where `g` is given as coefficients in `i`
/// (free of `n`), returned as a polynomial in `n`.
pub fn sum_poly(coeffs: &[Poly], from: i64, n: &BVar) -> Poly {
    let nv = Poly::atom(SymExpr::Var(n.clone()));
    let mut out = Poly::default();
    for (p, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let f = faulhaber(p as u32);
        let mut upto_n = Poly::default();
        for (k, a) in f.iter().enumerate() {
            upto_n = upto_n.add(&nv.pow(k as u32).scale(*a));
        }
        // subtract Σ_{i=1}^{from-1} i^p (or add back for from <= 0)
        let m = from - 1;
        let mut below = Rat::zero();
        if m >= 1 {
            for i in 1..=m {
                below += Rat::from_integer((i as i128).pow(p as u32));
            }
        } else {
            for i in (m + 1)..=0 {
                below -= if p == 0 {
                    Rat::one()
                } else {
                    Rat::from_integer((i as i128).pow(p as u32))
                };
            }
        }
        let s = upto_n.sub(&Poly::constant(below));
        out = out.add(&c.mul(&s));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> SymExpr {
        SymExpr::var(n)
    }

    #[test]
    fn collects_like_terms() {
        let e = SymExpr::Add(vec![v("β"), SymExpr::one(), v("β"), SymExpr::int(-1)]);
        assert_eq!(simplify(&e).to_string(), "2·β");
        let e = SymExpr::sub(SymExpr::add(v("β"), SymExpr::one()), SymExpr::one());
        assert_eq!(simplify(&e), v("β"));
    }

    #[test]
    fn min_max_drop_dominated_and_nob() {
        let e = SymExpr::Max(vec![
            SymExpr::add(v("x"), SymExpr::one()),
            v("x"),
            SymExpr::Nob,
        ]);
        assert_eq!(simplify(&e).to_string(), "x+1");
        let e = SymExpr::Min(vec![v("γ_X"), SymExpr::Nob, v("γ_Y")]);
        assert_eq!(simplify(&e).to_string(), "min(γ_X, γ_Y)");
        let e = SymExpr::Max(vec![SymExpr::Nob, SymExpr::Nob]);
        assert_eq!(simplify(&e), SymExpr::Nob);
    }

    #[test]
    fn common_part_leaves_max() {
        let f = SymExpr::call("f", vec![v("n")]);
        let e = SymExpr::Max(vec![
            SymExpr::add(f.clone(), v("a")),
            SymExpr::add(f.clone(), v("b")),
        ]);
        assert_eq!(simplify(&e).to_string(), "max(a, b)+f(n)");
    }

    #[test]
    fn faulhaber_sums() {
        let n = BVar::new("n");
        // Σ_{i=1}^{n} i = n(n+1)/2
        let s = sum_poly(&[Poly::default(), Poly::constant(Rat::one())], 1, &n);
        for k in 0..10i64 {
            let val = simplify(&subst(
                &s.to_expr(),
                &BTreeMap::from([(n.clone(), SymExpr::int(k))]),
            ));
            assert_eq!(val, SymExpr::int(k * (k + 1) / 2));
        }
        // Σ_{i=2}^{n} i^3
        let s = sum_poly(
            &[
                Poly::default(),
                Poly::default(),
                Poly::default(),
                Poly::constant(Rat::one()),
            ],
            2,
            &n,
        );
        let val = subst(
            &s.to_expr(),
            &BTreeMap::from([(n.clone(), SymExpr::int(4))]),
        );
        assert_eq!(val, SymExpr::int(8 + 27 + 64));
    }

    #[test]
    fn infinity_absorbs() {
        assert_eq!(simplify(&SymExpr::add(SymExpr::Inf, v("x"))), SymExpr::Inf);
        assert_eq!(
            simplify(&SymExpr::mul(SymExpr::zero(), SymExpr::Inf)),
            SymExpr::zero()
        );
    }
}

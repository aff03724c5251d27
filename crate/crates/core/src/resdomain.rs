//! Resource abstract domain.
//!
//! An element tracks bound variables for the number of solutions and for
//! each resource, a `failed?` flag, the domain guard, a set of guarded
//! inequations and the non-failure/determinacy facts. Clause bodies are
//! walked literal by literal (`extend`), chains of intermediate variables
//! are eliminated (`exit_to_prime`), and the clause results of a version
//! are aggregated into guarded recurrence equations (`widen`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::auxdomains::{
    mutually_exclusive, project, region_covered, regions, select, ClauseFacts, Det, LitFact, Nf,
    Selection,
};
use crate::frontend::ast::{Aggregation, Clause, Literal, PredId, Program, ResourceDecl, Term};
use crate::recurrence::poly::simplify;
use crate::recurrence::system::resolve_definitions;
use crate::recurrence::{BVar, Case, FnEqs, Guard, Inequation, RecError, SymExpr};
use crate::regtypes::{sized_schema, FreshNames, TypeGrammar, TypeTerm};
use crate::sizedtypes::{cons_schema, head_pattern_constraints, nil_schema, Dir, Schema};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResourceDef {
    pub name: String,
    pub headcost: i64,
    pub litcost: i64,
    pub builtin_cost: i64,
    pub agg_ub: Aggregation,
    pub agg_lb: Aggregation,
    pub default: (i64, Option<i64>),
}

impl ResourceDef {
    /// Resolution steps: one per clause head reached.
    pub fn steps() -> ResourceDef {
        ResourceDef {
            name: "steps".into(),
            headcost: 1,
            litcost: 0,
            builtin_cost: 0,
            agg_ub: Aggregation::Sum,
            agg_lb: Aggregation::Min,
            default: (0, Some(0)),
        }
    }

    pub fn from_decl(d: &ResourceDecl) -> ResourceDef {
        ResourceDef {
            name: d.name.clone(),
            headcost: d.headcost,
            litcost: d.litcost,
            builtin_cost: d.builtin_cost,
            agg_ub: d.agg_ub,
            agg_lb: d.agg_lb,
            default: d.default,
        }
    }

    /// Declared resources, or `steps` when there are none.
    pub fn for_program(p: &Program) -> Vec<ResourceDef> {
        if p.resources.is_empty() {
            vec![ResourceDef::steps()]
        } else {
            p.resources.iter().map(ResourceDef::from_decl).collect()
        }
    }

    pub fn default_lo(&self) -> SymExpr {
        SymExpr::int(self.default.0)
    }

    pub fn default_hi(&self) -> SymExpr {
        self.default.1.map(SymExpr::int).unwrap_or(SymExpr::Inf)
    }
}

type Pair = (BVar, BVar);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractElement {
    pub version: String,
    pub sol: Pair,
    pub res: BTreeMap<String, Pair>,
    pub failed: bool,
    pub d: Guard,
    pub rels: Vec<Inequation>,
    pub nf: Nf,
    pub det: Det,
    /// Sized schemas of output arguments.
    pub outputs: BTreeMap<usize, Schema>,
    pub bottom: bool,
}

fn rel(lhs: &BVar, dir: Dir, rhs: SymExpr) -> Inequation {
    Inequation {
        lhs: lhs.clone(),
        dir,
        rhs: simplify(&rhs),
        guard: Guard::top(),
    }
}

fn pair(lo: &str, hi: &str) -> Pair {
    (BVar::new(lo), BVar::new(hi))
}

pub fn bottom(version: &str, resources: &[ResourceDef]) -> AbstractElement {
    let sol = pair("s_L", "s_U");
    let mut rels = vec![
        rel(&sol.0, Dir::Ge, SymExpr::zero()),
        rel(&sol.1, Dir::Le, SymExpr::Inf),
    ];
    let mut res = BTreeMap::new();
    for r in resources {
        let p = pair(&format!("{}_L", r.name), &format!("{}_U", r.name));
        rels.push(rel(&p.0, Dir::Ge, r.default_lo()));
        rels.push(rel(&p.1, Dir::Le, r.default_hi()));
        res.insert(r.name.clone(), p);
    }
    AbstractElement {
        version: version.to_string(),
        sol,
        res,
        failed: true,
        d: Guard::top(),
        rels,
        nf: Nf::Fails,
        det: Det::NonDet,
        outputs: BTreeMap::new(),
        bottom: true,
    }
}

impl AbstractElement {
    /// Variables standing for solutions and resources.
    fn tracked(&self) -> Vec<BVar> {
        let mut out = vec![self.sol.0.clone(), self.sol.1.clone()];
        for (l, u) in self.res.values() {
            out.push(l.clone());
            out.push(u.clone());
        }
        out
    }

    /// Variables defined by some relation (intermediate or tracked).
    fn local_vars(&self) -> BTreeSet<BVar> {
        let mut s: BTreeSet<BVar> = self.rels.iter().map(|r| r.lhs.clone()).collect();
        s.extend(self.tracked());
        s
    }

    pub fn rename(&self, map: &BTreeMap<BVar, BVar>) -> AbstractElement {
        let rn = |v: &BVar| map.get(v).cloned().unwrap_or_else(|| v.clone());
        let sub: BTreeMap<BVar, SymExpr> = map
            .iter()
            .map(|(k, v)| (k.clone(), SymExpr::Var(v.clone())))
            .collect();
        AbstractElement {
            sol: (rn(&self.sol.0), rn(&self.sol.1)),
            res: self
                .res
                .iter()
                .map(|(k, (l, u))| (k.clone(), (rn(l), rn(u))))
                .collect(),
            rels: self
                .rels
                .iter()
                .map(|r| Inequation {
                    lhs: rn(&r.lhs),
                    dir: r.dir,
                    rhs: r.rhs.subst_vars(&sub),
                    guard: r.guard.rename(map),
                })
                .collect(),
            ..self.clone()
        }
    }

    /// Same element with local variables renamed canonically by first
    /// occurrence (tracked variables first, then relation order).
    pub fn canonical(&self) -> AbstractElement {
        let locals = self.local_vars();
        let mut order: Vec<BVar> = self.tracked();
        for r in &self.rels {
            order.push(r.lhs.clone());
            for v in r.rhs.vars() {
                if locals.contains(&v) {
                    order.push(v);
                }
            }
        }
        let mut map = BTreeMap::new();
        for v in order {
            let k = map.len();
            map.entry(v).or_insert_with(|| BVar::new(&format!("v{k}")));
        }
        self.rename(&map)
    }
}

impl fmt::Display for AbstractElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bottom {
            write!(f, "⊥ ")?;
        }
        write!(f, "⟨({},{}), {{", self.sol.0, self.sol.1)?;
        for (i, (l, u)) in self.res.values().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({l},{u})")?;
        }
        write!(f, "}}, {}, {{{}}}, {{", self.failed, self.d)?;
        for (i, r) in self.rels.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, "}}, {}, {}⟩", self.nf, self.det)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("elements of different versions: {0} and {1}")]
    Signature(String, String),
    #[error(transparent)]
    Recurrence(#[from] RecError),
}

fn same_signature(a: &AbstractElement, b: &AbstractElement) -> Result<(), DomainError> {
    if a.bottom || b.bottom || a.version == b.version {
        Ok(())
    } else {
        Err(DomainError::Signature(a.version.clone(), b.version.clone()))
    }
}

/// `a ⊑ b`: a's relations map into b's under a renaming of local
/// variables, a's domain is at least as strong, and nf/det are below.
pub fn leq(a: &AbstractElement, b: &AbstractElement) -> Result<bool, DomainError> {
    same_signature(a, b)?;
    if a.bottom {
        return Ok(true);
    }
    if b.bottom {
        return Ok(false);
    }
    if a.nf > b.nf || a.det > b.det || !a.d.implies(&b.d) {
        return Ok(false);
    }
    Ok(rels_embed(a, b))
}

/// a's relations map into b's under a renaming of local variables that
/// sends a's tracked variables to b's.
fn rels_embed(a: &AbstractElement, b: &AbstractElement) -> bool {
    if a.res.keys().ne(b.res.keys()) {
        return false;
    }
    let mut map: BTreeMap<BVar, BVar> = BTreeMap::new();
    map.insert(a.sol.0.clone(), b.sol.0.clone());
    map.insert(a.sol.1.clone(), b.sol.1.clone());
    for (k, (l, u)) in &a.res {
        let (bl, bu) = &b.res[k];
        map.insert(l.clone(), bl.clone());
        map.insert(u.clone(), bu.clone());
    }
    let a_locals = a.local_vars();
    let b_locals = b.local_vars();
    embed(&a.rels, 0, &b.rels, &a_locals, &b_locals, &mut map)
}

fn embed(
    rels: &[Inequation],
    i: usize,
    target: &[Inequation],
    a_locals: &BTreeSet<BVar>,
    b_locals: &BTreeSet<BVar>,
    map: &mut BTreeMap<BVar, BVar>,
) -> bool {
    let Some(r) = rels.get(i) else { return true };
    for t in target {
        if t.dir != r.dir || t.guard != r.guard {
            continue;
        }
        let mut trial = map.clone();
        if unify_var(&r.lhs, &t.lhs, a_locals, b_locals, &mut trial)
            && unify_expr(&r.rhs, &t.rhs, a_locals, b_locals, &mut trial)
            && embed(rels, i + 1, target, a_locals, b_locals, &mut trial)
        {
            *map = trial;
            return true;
        }
    }
    false
}

fn unify_var(
    x: &BVar,
    y: &BVar,
    al: &BTreeSet<BVar>,
    bl: &BTreeSet<BVar>,
    map: &mut BTreeMap<BVar, BVar>,
) -> bool {
    match (al.contains(x), bl.contains(y)) {
        (true, true) => match map.get(x) {
            Some(z) => z == y,
            None => {
                if map.values().any(|z| z == y) {
                    return false;
                }
                map.insert(x.clone(), y.clone());
                true
            }
        },
        (false, false) => x == y,
        _ => false,
    }
}

fn unify_expr(
    a: &SymExpr,
    b: &SymExpr,
    al: &BTreeSet<BVar>,
    bl: &BTreeSet<BVar>,
    map: &mut BTreeMap<BVar, BVar>,
) -> bool {
    match (a, b) {
        (SymExpr::Var(x), SymExpr::Var(y)) => unify_var(x, y, al, bl, map),
        (SymExpr::Add(xs), SymExpr::Add(ys))
        | (SymExpr::Mul(xs), SymExpr::Mul(ys))
        | (SymExpr::Min(xs), SymExpr::Min(ys))
        | (SymExpr::Max(xs), SymExpr::Max(ys)) => {
            xs.len() == ys.len()
                && xs
                    .iter()
                    .zip(ys)
                    .all(|(x, y)| unify_expr(x, y, al, bl, map))
        }
        (SymExpr::Call(f, xs), SymExpr::Call(g, ys)) => {
            f == g
                && xs.len() == ys.len()
                && xs
                    .iter()
                    .zip(ys)
                    .all(|(x, y)| unify_expr(x, y, al, bl, map))
        }
        (SymExpr::Sub(x1, x2), SymExpr::Sub(y1, y2)) => {
            unify_expr(x1, y1, al, bl, map) && unify_expr(x2, y2, al, bl, map)
        }
        _ => a == b && a.vars().iter().all(|v| !al.contains(v)),
    }
}

/// Equivalent up to renaming of local variables.
pub fn equivalent(a: &AbstractElement, b: &AbstractElement) -> Result<bool, DomainError> {
    Ok(leq(a, b)? && leq(b, a)?)
}

/// Least upper bound: union of relations with b's tracked variables renamed
/// to a's and b's other locals renamed apart; duplicates are dropped.
pub fn lub(a: &AbstractElement, b: &AbstractElement) -> Result<AbstractElement, DomainError> {
    same_signature(a, b)?;
    if a.bottom {
        return Ok(b.clone());
    }
    if b.bottom {
        return Ok(a.clone());
    }
    let mut map: BTreeMap<BVar, BVar> = BTreeMap::new();
    map.insert(b.sol.0.clone(), a.sol.0.clone());
    map.insert(b.sol.1.clone(), a.sol.1.clone());
    for (k, (l, u)) in &b.res {
        if let Some((al, au)) = a.res.get(k) {
            map.insert(l.clone(), al.clone());
            map.insert(u.clone(), au.clone());
        }
    }
    let mut d = Guard::top();
    for (v, (lo, hi)) in &a.d.bounds {
        if let Some((lo2, hi2)) = b.d.bounds.get(v) {
            let hi = match (hi, hi2) {
                (Some(x), Some(y)) => Some((*x).max(*y)),
                _ => None,
            };
            d.restrict(v, (*lo).min(*lo2), hi);
        }
    }
    let join = |base: AbstractElement| AbstractElement {
        failed: a.failed || b.failed,
        d: d.clone(),
        nf: a.nf.max(b.nf),
        det: a.det.max(b.det),
        ..base
    };
    // a relation set already contained in the other needs no union
    if rels_embed(b, a) {
        return Ok(join(a.clone()));
    }
    if rels_embed(a, b) {
        return Ok(join(AbstractElement {
            outputs: a.outputs.clone(),
            ..b.rename(&map)
        }));
    }
    let a_locals = a.local_vars();
    for v in b.local_vars() {
        if !map.contains_key(&v) && a_locals.contains(&v) {
            map.insert(v.clone(), BVar::new(&format!("{v}'")));
        }
    }
    let b2 = b.rename(&map);
    let mut rels = a.rels.clone();
    for r in b2.rels {
        if !rels.contains(&r) {
            rels.push(r);
        }
    }
    let mut res = a.res.clone();
    for (k, p) in b2.res {
        res.entry(k).or_insert(p);
    }
    Ok(join(AbstractElement {
        res,
        rels,
        bottom: false,
        ..a.clone()
    }))
}

// ---------------------------------------------------------------- versions

/// Bound-function name for one quantity of a version.
pub fn fn_name(version: &str, what: &str, dir: Dir) -> String {
    let side = match dir {
        Dir::Ge => "L",
        Dir::Le => "U",
    };
    format!("{version}/{what}/{side}")
}

pub fn res_key(r: &str) -> String {
    format!("res:{r}")
}

pub fn out_key(pos: usize, slot: usize) -> String {
    format!("out{}.{}", pos + 1, slot + 1)
}

/// Interface of an analysed version as seen by its callers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VersionSig {
    pub name: String,
    /// Input positions with their formal schemas.
    pub inputs: BTreeMap<usize, Schema>,
    /// Input positions of unknown type.
    pub opaque: BTreeSet<usize>,
    /// Output positions with their schema shape, `None` when untyped.
    pub outputs: BTreeMap<usize, Option<Schema>>,
}

impl VersionSig {
    pub fn formals(&self, dir: Dir) -> Vec<BVar> {
        let mut out = Vec::new();
        for s in self.inputs.values() {
            for (lo, hi) in s.slots() {
                let e = if dir == Dir::Ge { lo } else { hi };
                if let SymExpr::Var(v) = e {
                    out.push(v);
                }
            }
        }
        out
    }

    fn calls(&self, what: &str, lo_args: &[SymExpr], hi_args: &[SymExpr]) -> (SymExpr, SymExpr) {
        (
            SymExpr::call(&fn_name(&self.name, what, Dir::Ge), lo_args.to_vec()),
            SymExpr::call(&fn_name(&self.name, what, Dir::Le), hi_args.to_vec()),
        )
    }

    /// Output schema of position `pos` in terms of bound-function calls.
    pub fn output_schema(
        &self,
        pos: usize,
        lo_args: &[SymExpr],
        hi_args: &[SymExpr],
    ) -> Option<Schema> {
        let shape = self.outputs.get(&pos)?.as_ref()?;
        let slots: Vec<(SymExpr, SymExpr)> = (0..shape.num_slots())
            .map(|k| self.calls(&out_key(pos, k), lo_args, hi_args))
            .collect();
        Some(shape.with_slots(&slots))
    }
}

#[derive(Clone, Debug)]
pub struct CalleeInfo {
    pub id: Option<usize>,
    pub sig: Option<VersionSig>,
    pub nf: Nf,
    pub det: Det,
}

/// Resolution of body calls to versions, supplied by the fixpoint engine.
pub trait Callees {
    fn lookup(&mut self, pred: &PredId, bound: &[bool], types: &[Option<TypeTerm>]) -> CalleeInfo;
}

/// Everything a clause walk needs about the version being analysed.
pub struct VersionCtx<'a> {
    pub sig: &'a VersionSig,
    pub grammar: &'a TypeGrammar,
    pub resources: &'a [ResourceDef],
    pub d: Guard,
}

/// Schema with every slot unknown: `(0, ∞)`.
pub fn unknown_schema(shape: &Schema) -> Schema {
    shape
        .map_bounds(&mut |_| SymExpr::Nob)
        .with_slots(&vec![(SymExpr::zero(), SymExpr::Inf); shape.num_slots()])
}

/// Schema of a type with placeholder variables.
pub fn shape_of(ty: &TypeTerm, g: &TypeGrammar) -> Option<Schema> {
    sized_schema(ty, g, &mut FreshNames::new("")).ok()
}

fn elem_type(ty: &TypeTerm, g: &TypeGrammar) -> Option<TypeTerm> {
    match g.canonical(ty) {
        TypeTerm::List(e) => Some(*e),
        _ => None,
    }
}

/// Sized schema of a term built from bound variables.
pub fn build_schema(
    t: &Term,
    env: &BTreeMap<String, Schema>,
    expected: Option<&TypeTerm>,
    g: &TypeGrammar,
) -> Option<Schema> {
    let built = match t {
        Term::Var(v) => env.get(v).cloned(),
        Term::Int(k) => Some(Schema::Num {
            lo: SymExpr::int(*k),
            hi: SymExpr::int(*k),
        }),
        _ if t.is_nil() => {
            let ty = g.canonical(expected?);
            let elem = shape_of(&elem_type(&ty, g)?, g)?;
            Some(nil_schema(&ty, &elem))
        }
        _ => match t.as_cons() {
            Some((h, tl)) => {
                let eh = expected.and_then(|e| elem_type(e, g));
                let hs = build_schema(h, env, eh.as_ref(), g);
                let lt = hs
                    .as_ref()
                    .map(|s| TypeTerm::list(s.ty()))
                    .or_else(|| expected.map(|e| g.canonical(e)));
                let ts = build_schema(tl, env, lt.as_ref(), g)?;
                let hs = match hs {
                    Some(h) => h,
                    None => unknown_schema(ts.children().first().map(|(_, c)| c)?),
                };
                cons_schema(&hs, &ts)
            }
            None => None,
        },
    };
    match (built, expected) {
        (Some(s), _) => Some(s),
        (None, Some(e)) if t.is_ground() || t.vars().iter().all(|v| env.contains_key(v)) => {
            shape_of(e, g).map(|s| unknown_schema(&s))
        }
        _ => None,
    }
}

/// Interval of an arithmetic expression over bound numeric variables.
fn arith(t: &Term, env: &BTreeMap<String, Schema>) -> Option<(SymExpr, SymExpr)> {
    match t {
        Term::Int(k) => Some((SymExpr::int(*k), SymExpr::int(*k))),
        Term::Var(v) => match env.get(v)? {
            Schema::Num { lo, hi } => Some((lo.clone(), hi.clone())),
            _ => None,
        },
        Term::Compound(f, args) if args.len() == 2 => {
            let (al, ah) = arith(&args[0], env)?;
            let (bl, bh) = arith(&args[1], env)?;
            match f.as_str() {
                "+" => Some((SymExpr::add(al, bl), SymExpr::add(ah, bh))),
                "*" => Some((SymExpr::mul(al, bl), SymExpr::mul(ah, bh))),
                "-" => match (bl.as_const(), bh.as_const()) {
                    (Some(x), Some(y)) if x == y => {
                        Some((SymExpr::sub(al, bl), SymExpr::sub(ah, bh)))
                    }
                    _ => Some((SymExpr::max2(SymExpr::zero(), SymExpr::sub(al, bh)), ah)),
                },
                _ => None,
            }
        }
        _ => None,
    }
}

/// State of a clause walk: the current element, the schemas of bound
/// clause variables and what each body literal contributes to the
/// auxiliary analyses.
#[derive(Clone, Debug)]
pub struct ClauseState {
    pub elem: AbstractElement,
    pub env: BTreeMap<String, Schema>,
    pub sel: Selection,
    pub facts: Vec<LitFact>,
    pub clause: usize,
    pub step: usize,
    pub diagnostics: Vec<String>,
    /// Types observed for untyped outputs.
    pub out_types: BTreeMap<usize, TypeTerm>,
    /// Variables bound to terms of unknown type.
    pub untyped: BTreeSet<String>,
}

impl ClauseState {
    fn fresh(&self, base: &str) -> Pair {
        let (c, k) = (self.clause + 1, self.step);
        pair(&format!("{base}_L,{c},{k}"), &format!("{base}_U,{c},{k}"))
    }

    fn bound(&self, t: &Term) -> bool {
        t.vars()
            .iter()
            .all(|v| self.env.contains_key(v) || self.untyped.contains(v))
    }

    /// Type of a term from the types of its bound variables.
    fn infer_type(&self, t: &Term) -> Option<TypeTerm> {
        match t {
            Term::Var(v) => self.env.get(v).map(Schema::ty),
            Term::Int(_) => Some(TypeTerm::Num),
            _ => {
                let (h, tl) = t.as_cons()?;
                self.infer_type(h)
                    .map(TypeTerm::list)
                    .or_else(|| self.infer_type(tl))
            }
        }
    }

    pub fn facts(&self) -> ClauseFacts {
        ClauseFacts {
            sel: self.sel.clone(),
            body: self.facts.clone(),
        }
    }

    /// Start a new step: fresh variables related to the previous ones.
    /// `sol` gives the solution factor `(lower, upper)`; `cost(r, side)` the
    /// per-solution cost of resource `r`.
    fn step_with(
        &mut self,
        resources: &[ResourceDef],
        sol: (SymExpr, SymExpr),
        cost: &dyn Fn(&ResourceDef, Dir) -> SymExpr,
    ) {
        self.step += 1;
        let (pl, pu) = self.elem.sol.clone();
        let (cl, cu) = self.fresh("s");
        self.elem.rels.push(rel(
            &cu,
            Dir::Le,
            SymExpr::mul(SymExpr::Var(pu.clone()), sol.1),
        ));
        let lo = if self.elem.failed {
            SymExpr::zero()
        } else {
            SymExpr::mul(SymExpr::Var(pl.clone()), sol.0)
        };
        self.elem.rels.push(rel(&cl, Dir::Ge, lo));
        for r in resources {
            let (rpl, rpu) = self.elem.res[&r.name].clone();
            let (rcl, rcu) = self.fresh(&r.name);
            let up = SymExpr::add(
                SymExpr::Var(rpu),
                SymExpr::mul(SymExpr::Var(pu.clone()), cost(r, Dir::Le)),
            );
            self.elem.rels.push(rel(&rcu, Dir::Le, up));
            let down = if self.elem.failed {
                SymExpr::Var(rpl)
            } else {
                SymExpr::add(
                    SymExpr::Var(rpl),
                    SymExpr::mul(SymExpr::Var(pl.clone()), cost(r, Dir::Ge)),
                )
            };
            self.elem.rels.push(rel(&rcl, Dir::Ge, down));
            self.elem.res.insert(r.name.clone(), (rcl, rcu));
        }
        self.elem.sol = (cl, cu);
    }

    /// Bind unbound variables of `t` by matching it against `schema`.
    fn destructure(&mut self, t: &Term, schema: &Schema, g: &TypeGrammar) {
        if let Term::Var(v) = t {
            self.env.entry(v.clone()).or_insert_with(|| schema.clone());
            return;
        }
        if let Ok(info) = head_pattern_constraints(t, schema, g) {
            for (v, s) in info.bindings {
                self.env.entry(v).or_insert(s);
            }
        }
    }

    /// Size effect of `l = r`; returns whether it may fail.
    fn unify(&mut self, l: &Term, r: &Term, expected: Option<&TypeTerm>, g: &TypeGrammar) -> bool {
        let (lb, rb) = (self.bound(l), self.bound(r));
        match (l, r, lb, rb) {
            (Term::Var(v), t, false, true) | (t, Term::Var(v), true, false) => {
                if let Some(s) = build_schema(t, &self.env, expected, g) {
                    self.env.insert(v.clone(), s);
                }
                false
            }
            (_, _, true, true) => true,
            (Term::Var(_), Term::Var(_), false, false) => false,
            (t, u, true, false) | (u, t, false, true) => {
                if let Some(s) = build_schema(t, &self.env, None, g) {
                    self.destructure(u, &s, g);
                }
                true
            }
            (Term::Var(_), _, false, false) | (_, Term::Var(_), false, false) => false,
            _ => true,
        }
    }
}

/// Initial element of a clause: one solution, `headcost` of each resource,
/// the guard and schemas from clause selection.
pub fn call_to_entry(ctx: &VersionCtx, index: usize, clause: &Clause) -> ClauseState {
    let sel = select(clause, &ctx.sig.inputs, &ctx.sig.opaque, ctx.grammar);
    let c = index + 1;
    let sol = pair(&format!("s_L,{c},1"), &format!("s_U,{c},1"));
    let mut rels = vec![
        rel(&sol.0, Dir::Ge, SymExpr::one()),
        rel(&sol.1, Dir::Le, SymExpr::one()),
    ];
    let mut res = BTreeMap::new();
    for r in ctx.resources {
        let p = pair(
            &format!("{}_L,{c},1", r.name),
            &format!("{}_U,{c},1", r.name),
        );
        rels.push(rel(&p.0, Dir::Ge, SymExpr::int(r.headcost)));
        rels.push(rel(&p.1, Dir::Le, SymExpr::int(r.headcost)));
        res.insert(r.name.clone(), p);
    }
    let d = ctx
        .d
        .intersect(&sel.guard)
        .unwrap_or_else(|| sel.guard.clone());
    let elem = AbstractElement {
        version: ctx.sig.name.clone(),
        sol,
        res,
        failed: false,
        d,
        rels,
        nf: Nf::NotFails,
        det: Det::IsDet,
        outputs: BTreeMap::new(),
        bottom: false,
    };
    let untyped = clause
        .head
        .args()
        .iter()
        .enumerate()
        .filter(|(i, _)| ctx.sig.opaque.contains(i))
        .flat_map(|(_, a)| a.vars())
        .collect();
    ClauseState {
        elem,
        env: sel.bindings.clone(),
        sel,
        facts: vec![],
        clause: index,
        step: 1,
        diagnostics: vec![],
        out_types: BTreeMap::new(),
        untyped,
    }
}

/// Add one body literal to the clause state.
pub fn extend(
    st: &ClauseState,
    lit: &Literal,
    ctx: &VersionCtx,
    callees: &mut dyn Callees,
) -> ClauseState {
    let mut st = st.clone();
    let g = ctx.grammar;
    match lit {
        Literal::Call(t) => {
            let Some((name, arity)) = t.functor() else {
                return st;
            };
            let pred = PredId::new(name, arity);
            let args = t.args();
            let bound: Vec<bool> = args.iter().map(|a| st.bound(a)).collect();
            let types: Vec<Option<TypeTerm>> = args
                .iter()
                .zip(&bound)
                .map(|(a, &b)| {
                    if b {
                        build_schema(a, &st.env, None, g).map(|s| s.ty())
                    } else {
                        None
                    }
                })
                .collect();
            let info = callees.lookup(&pred, &bound, &types);
            st.facts
                .push(info.id.map(LitFact::Call).unwrap_or(LitFact::Unknown));
            if info.nf == Nf::Fails {
                st.elem.failed = true;
            }
            match &info.sig {
                Some(sig) => {
                    let (mut lo_args, mut hi_args) = (Vec::new(), Vec::new());
                    for (&p, shape) in &sig.inputs {
                        let actual = args
                            .get(p)
                            .and_then(|a| build_schema(a, &st.env, Some(&shape.ty()), g));
                        let slots = match actual {
                            Some(s) if s.same_shape(shape) => s.slots(),
                            _ => unknown_schema(shape).slots(),
                        };
                        for (l, h) in slots {
                            lo_args.push(l);
                            hi_args.push(h);
                        }
                    }
                    let sol = sig.calls("sol", &lo_args, &hi_args);
                    let costs: BTreeMap<String, (SymExpr, SymExpr)> = ctx
                        .resources
                        .iter()
                        .map(|r| {
                            (
                                r.name.clone(),
                                sig.calls(&res_key(&r.name), &lo_args, &hi_args),
                            )
                        })
                        .collect();
                    st.step_with(ctx.resources, sol, &|r, dir| {
                        let (l, u) = &costs[&r.name];
                        let c = if dir == Dir::Ge { l.clone() } else { u.clone() };
                        SymExpr::add(SymExpr::int(r.litcost), c)
                    });
                    for &p in sig.outputs.keys() {
                        let Some(a) = args.get(p) else { continue };
                        let schema = sig.output_schema(p, &lo_args, &hi_args);
                        match (a, schema) {
                            (Term::Var(v), Some(s)) if !st.env.contains_key(v) => {
                                st.env.insert(v.clone(), s);
                            }
                            (Term::Var(v), None) if !st.bound(a) => {
                                st.untyped.insert(v.clone());
                            }
                            (a, s) => {
                                st.elem.failed = true;
                                if let Some(s) = s {
                                    st.destructure(a, &s, g);
                                }
                            }
                        }
                    }
                }
                None => {
                    for a in args {
                        st.untyped
                            .extend(a.vars().into_iter().filter(|v| !st.env.contains_key(v)));
                    }
                    st.diagnostics
                        .push(format!("call to undefined predicate {pred}"));
                    st.step_with(ctx.resources, (SymExpr::zero(), SymExpr::Inf), &|r, dir| {
                        let d = if dir == Dir::Ge {
                            r.default_lo()
                        } else {
                            r.default_hi()
                        };
                        SymExpr::add(SymExpr::int(r.litcost), d)
                    });
                }
            }
        }
        Literal::Unify(l, r) => {
            let may_fail = st.unify(l, r, None, g);
            builtin_step(&mut st, ctx, may_fail);
        }
        Literal::Is(x, e) => {
            let may_fail = if st.bound(e) {
                match x {
                    Term::Var(v) if !st.env.contains_key(v) => {
                        if let Some((lo, hi)) = arith(e, &st.env) {
                            st.env.insert(
                                v.clone(),
                                Schema::Num {
                                    lo: simplify(&lo),
                                    hi: simplify(&hi),
                                },
                            );
                        } else {
                            st.env.insert(
                                v.clone(),
                                Schema::Num {
                                    lo: SymExpr::zero(),
                                    hi: SymExpr::Inf,
                                },
                            );
                        }
                        false
                    }
                    _ => true,
                }
            } else {
                true
            };
            builtin_step(&mut st, ctx, may_fail);
        }
        Literal::Compare(..) => builtin_step(&mut st, ctx, true),
    }
    st
}

fn builtin_step(st: &mut ClauseState, ctx: &VersionCtx, may_fail: bool) {
    st.facts.push(if may_fail {
        LitFact::MayFail
    } else {
        LitFact::Safe
    });
    if may_fail {
        st.elem.failed = true;
    }
    st.step_with(ctx.resources, (SymExpr::one(), SymExpr::one()), &|r, _| {
        SymExpr::int(r.builtin_cost)
    });
}

/// Run the deferred output unifications and record the output schemas.
pub fn finish_clause(st: &ClauseState, clause: &Clause, ctx: &VersionCtx) -> ClauseState {
    let mut st = st.clone();
    let head = clause.head.args();
    for lit in st.sel.deferred.clone() {
        if let Literal::Unify(l, r) = &lit {
            let expected = head
                .iter()
                .position(|h| h == l)
                .and_then(|p| ctx.sig.outputs.get(&p))
                .and_then(|s| s.as_ref().map(Schema::ty));
            st.unify(l, r, expected.as_ref(), ctx.grammar);
        }
    }
    for (&p, shape) in &ctx.sig.outputs {
        let actual = match head.get(p) {
            Some(Term::Var(v)) => st.env.get(v).cloned(),
            _ => None,
        };
        let Some(shape) = shape else {
            let ty = actual.map(|a| a.ty()).or_else(|| {
                let h = head.get(p)?;
                st.sel.deferred.iter().find_map(|lit| match lit {
                    Literal::Unify(l, r) if l == h => st.infer_type(r),
                    _ => None,
                })
            });
            if let Some(t) = ty {
                st.out_types.insert(p, t);
            }
            continue;
        };
        let s = match actual {
            Some(s) if s.same_shape(shape) => s,
            _ => unknown_schema(shape),
        };
        st.elem.outputs.insert(p, s.simplified());
    }
    st
}

/// Walk a whole clause: entry, every body literal after the selection
/// prefix, then the deferred output bindings.
pub fn analyze_clause(
    ctx: &VersionCtx,
    index: usize,
    clause: &Clause,
    callees: &mut dyn Callees,
) -> ClauseState {
    let mut st = call_to_entry(ctx, index, clause);
    if !st.sel.feasible {
        return st;
    }
    for lit in &clause.body[st.sel.prefix_len..] {
        st = extend(&st, lit, ctx, callees);
    }
    finish_clause(&st, clause, ctx)
}

/// Eliminate intermediate variables: the result relates the tracked
/// variables to expressions over input bounds and bound-function calls.
pub fn exit_to_prime(exit: &AbstractElement) -> Result<AbstractElement, DomainError> {
    let defs: BTreeMap<BVar, SymExpr> = exit
        .rels
        .iter()
        .map(|r| (r.lhs.clone(), r.rhs.clone()))
        .collect();
    let resolved = resolve_definitions(&defs)?;
    let mut rels = Vec::new();
    let mut push = |v: &BVar, dir: Dir| {
        let rhs = resolved
            .get(v)
            .cloned()
            .unwrap_or_else(|| SymExpr::Var(v.clone()));
        rels.push(Inequation {
            lhs: v.clone(),
            dir,
            rhs,
            guard: exit.d.clone(),
        });
    };
    push(&exit.sol.0, Dir::Ge);
    push(&exit.sol.1, Dir::Le);
    for (l, u) in exit.res.values() {
        push(l, Dir::Ge);
        push(u, Dir::Le);
    }
    Ok(AbstractElement {
        rels,
        ..exit.clone()
    })
}

fn prime_rhs(prime: &AbstractElement, v: &BVar) -> SymExpr {
    prime
        .rels
        .iter()
        .find(|r| r.lhs == *v)
        .map(|r| r.rhs.clone())
        .unwrap_or(SymExpr::Var(v.clone()))
}

/// One clause's contribution to widening.
pub struct ClausePrime<'a> {
    pub sel: &'a Selection,
    pub prime: &'a AbstractElement,
}

/// Result of widening: the version's success element and the guarded
/// equations of its bound functions.
#[derive(Clone, Debug)]
pub struct Widened {
    pub elem: AbstractElement,
    pub fns: Vec<FnEqs>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Sol,
    Res(usize),
    Out,
}

/// Name, kind, lower and upper variables, and per-clause value of one widened quantity.
type Quantity = (
    String,
    Kind,
    BVar,
    BVar,
    Box<dyn Fn(&ClausePrime, Dir) -> SymExpr>,
);

/// Aggregate clause primes into guarded equations, one function per
/// quantity and side. Regions are the elementary boxes of the clause
/// guards read on that side; each region aggregates the clauses that may
/// apply there.
pub fn widen(ctx: &VersionCtx, clauses: &[ClausePrime], nf: Nf, det: Det) -> Widened {
    let sig = ctx.sig;
    let mut lo_to_hi = BTreeMap::new();
    let mut hi_to_lo = BTreeMap::new();
    for s in sig.inputs.values() {
        for (lo, hi) in s.slots() {
            if let (SymExpr::Var(l), SymExpr::Var(h)) = (&lo, &hi) {
                lo_to_hi.insert(l.clone(), hi.clone());
                hi_to_lo.insert(h.clone(), lo.clone());
            }
        }
    }
    let live: Vec<&ClausePrime> = clauses.iter().filter(|c| c.sel.feasible).collect();
    let mut fns = Vec::new();
    let mut elem = bottom(&sig.name, ctx.resources);
    elem.bottom = false;
    elem.failed = nf == Nf::Fails;
    elem.nf = nf;
    elem.det = det;
    elem.rels.clear();

    let mut quantities: Vec<Quantity> = Vec::new();
    quantities.push((
        "sol".into(),
        Kind::Sol,
        elem.sol.0.clone(),
        elem.sol.1.clone(),
        Box::new(|c: &ClausePrime, dir| {
            prime_rhs(
                c.prime,
                if dir == Dir::Ge {
                    &c.prime.sol.0
                } else {
                    &c.prime.sol.1
                },
            )
        }),
    ));
    for (ri, r) in ctx.resources.iter().enumerate() {
        let name = r.name.clone();
        let (l, u) = elem.res[&r.name].clone();
        quantities.push((
            res_key(&r.name),
            Kind::Res(ri),
            l,
            u,
            Box::new(move |c: &ClausePrime, dir| {
                let (l, u) = &c.prime.res[&name];
                prime_rhs(c.prime, if dir == Dir::Ge { l } else { u })
            }),
        ));
    }
    for (&p, shape) in &sig.outputs {
        let Some(shape) = shape else { continue };
        for k in 0..shape.num_slots() {
            let key = out_key(p, k);
            quantities.push((
                key.clone(),
                Kind::Out,
                BVar::new(&format!("{key}_L")),
                BVar::new(&format!("{key}_U")),
                Box::new(move |c: &ClausePrime, dir| {
                    let slots = c
                        .prime
                        .outputs
                        .get(&p)
                        .map(|s| s.slots())
                        .unwrap_or_default();
                    match (slots.get(k), dir) {
                        (Some((l, _)), Dir::Ge) => l.clone(),
                        (Some((_, h)), Dir::Le) => h.clone(),
                        (None, Dir::Ge) => SymExpr::zero(),
                        (None, Dir::Le) => SymExpr::Inf,
                    }
                }),
            ));
        }
    }

    for (key, kind, lvar, uvar, get) in &quantities {
        for dir in [Dir::Ge, Dir::Le] {
            let swap = if dir == Dir::Ge { &hi_to_lo } else { &lo_to_hi };
            let keep_vars: BTreeSet<BVar> = swap
                .values()
                .filter_map(|e| e.vars().into_iter().next())
                .collect();
            let guards: Vec<Guard> = live
                .iter()
                .map(|c| project(&c.sel.guard, &keep_vars))
                .collect();
            let rhss: Vec<SymExpr> = live
                .iter()
                .map(|c| simplify(&get(c, dir).subst_vars(swap)))
                .collect();
            let refs: Vec<&Guard> = guards.iter().collect();
            let sels: Vec<&Selection> = live.iter().map(|c| c.sel).collect();
            let default = match (kind, dir) {
                (Kind::Sol, _) => SymExpr::zero(),
                (Kind::Res(ri), Dir::Ge) => ctx.resources[*ri].default_lo(),
                (Kind::Res(ri), Dir::Le) => ctx.resources[*ri].default_hi(),
                (Kind::Out, _) => SymExpr::Nob,
            };
            let mut cases = Vec::new();
            for region in regions(&refs) {
                let cands: Vec<usize> = (0..live.len())
                    .filter(|&i| region.intersect(&guards[i]).is_some())
                    .collect();
                let rhs = if cands.is_empty() {
                    default.clone()
                } else {
                    let vals: Vec<SymExpr> = cands.iter().map(|&i| rhss[i].clone()).collect();
                    let cand_sels: Vec<&Selection> = cands.iter().map(|&i| sels[i]).collect();
                    let exclusive = mutually_exclusive(&cand_sels);
                    let exact: Vec<SymExpr> = cands
                        .iter()
                        .filter(|&&i| sels[i].exact() && region.implies(&guards[i]))
                        .map(|&i| rhss[i].clone())
                        .collect();
                    let covered = region_covered(&region, &cand_sels, &keep_vars);
                    let (agg_ub, agg_lb) = match kind {
                        Kind::Res(ri) => (ctx.resources[*ri].agg_ub, ctx.resources[*ri].agg_lb),
                        _ => (Aggregation::Sum, Aggregation::Sum),
                    };
                    match (kind, dir) {
                        (Kind::Out, Dir::Le) => SymExpr::Max(vals),
                        (Kind::Out, Dir::Ge) => SymExpr::Min(vals),
                        (_, Dir::Ge) if !covered => SymExpr::zero(),
                        (_, Dir::Ge) if agg_lb == Aggregation::Sum && !exact.is_empty() => {
                            SymExpr::Add(exact)
                        }
                        (_, Dir::Ge) => SymExpr::Min(vals),
                        (_, Dir::Le) if agg_ub == Aggregation::Max => SymExpr::Max(vals),
                        (_, Dir::Le) if exclusive => SymExpr::Max(vals),
                        (_, Dir::Le) => SymExpr::Add(vals),
                    }
                };
                let rhs = match (kind, dir) {
                    (Kind::Sol, Dir::Ge) if nf == Nf::Fails => SymExpr::zero(),
                    (Kind::Sol, _) if det == Det::IsDet && !rhs.calls().is_empty() => {
                        SymExpr::one()
                    }
                    (Kind::Sol, _) if det == Det::IsDet => SymExpr::min2(rhs, SymExpr::one()),
                    _ => rhs,
                };
                cases.push(Case {
                    guard: region,
                    rhs: simplify(&rhs),
                });
            }
            let name = fn_name(&sig.name, key, dir);
            let lhs = if dir == Dir::Ge { lvar } else { uvar };
            for c in &cases {
                elem.rels.push(Inequation {
                    lhs: lhs.clone(),
                    dir,
                    rhs: c.rhs.clone(),
                    guard: c.guard.clone(),
                });
            }
            fns.push(FnEqs {
                name,
                dir,
                formals: sig.formals(dir),
                cases,
                default,
            });
        }
    }
    for (&p, _) in sig.outputs.iter().filter(|(_, s)| s.is_some()) {
        let lo = sig
            .formals(Dir::Ge)
            .into_iter()
            .map(SymExpr::Var)
            .collect::<Vec<_>>();
        let hi = sig
            .formals(Dir::Le)
            .into_iter()
            .map(SymExpr::Var)
            .collect::<Vec<_>>();
        if let Some(s) = sig.output_schema(p, &lo, &hi) {
            elem.outputs.insert(p, s);
        }
    }
    Widened { elem, fns }
}

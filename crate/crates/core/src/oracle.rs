//! Concrete cost semantics: an SLD interpreter that counts solutions and
//! resource usage over the complete search, a seeded generator of typed
//! ground inputs, and the check of observed measures against solved bounds.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fixpoint::AnalysisEntry;
use crate::frontend::ast::{Clause, CmpOp, Literal, PredId, Program, Term};
use crate::recurrence::{BVar, ClosedForm, Value};
use crate::regtypes::{TypeGrammar, TypeTerm};
use crate::resdomain::ResourceDef;
use crate::sizedtypes::{size_of_term, Dir, Schema};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Clause resolutions attempted before the run is abandoned.
    pub max_steps: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_steps: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteMeasure {
    pub goal: Term,
    pub solutions: u64,
    pub resources: BTreeMap<String, i64>,
    /// Clause resolutions attempted, successful or not.
    pub resolutions: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("step limit of {0} resolutions exceeded")]
    LimitExceeded(u64),
    #[error("instantiation error in {0}")]
    Instantiation(String),
    #[error("arithmetic overflow in {0}")]
    Overflow(String),
    #[error("call to undefined predicate {0}")]
    Undefined(PredId),
    #[error("goal {0} is not a callable term")]
    NotCallable(String),
    #[error("no member of {0} within size budget {1}")]
    EmptyType(String, i64),
    #[error("{0}")]
    Type(String),
}

// ---------------------------------------------------------------- terms

#[derive(Clone, Debug)]
enum Cell {
    Ref(usize),
    Int(i64),
    Fun(Rc<str>, Rc<[Cell]>),
}

fn compile(t: &Term, vars: &mut HashMap<String, usize>) -> Cell {
    match t {
        Term::Var(v) if v == "_" => {
            let k = vars.len();
            vars.insert(format!("_#{k}"), k);
            Cell::Ref(k)
        }
        Term::Var(v) => {
            let k = vars.len();
            Cell::Ref(*vars.entry(v.clone()).or_insert(k))
        }
        Term::Int(n) => Cell::Int(*n),
        Term::Compound(f, a) => Cell::Fun(
            f.as_str().into(),
            a.iter().map(|x| compile(x, vars)).collect(),
        ),
    }
}

fn shift(c: &Cell, base: usize) -> Cell {
    match c {
        Cell::Ref(k) => Cell::Ref(base + k),
        Cell::Int(n) => Cell::Int(*n),
        Cell::Fun(f, a) if a.is_empty() => Cell::Fun(f.clone(), a.clone()),
        Cell::Fun(f, a) => Cell::Fun(f.clone(), a.iter().map(|x| shift(x, base)).collect()),
    }
}

#[derive(Clone, Debug)]
enum Goal {
    /// User call; `charged` says whether the literal cost applies.
    Call(Cell, bool),
    Unify(Cell, Cell, bool),
    Is(Cell, Cell, bool),
    Cmp(CmpOp, Cell, Cell, bool),
    /// Head cost of the clause just selected.
    Enter,
}

impl Goal {
    fn shift(&self, base: usize) -> Goal {
        match self {
            Goal::Call(t, c) => Goal::Call(shift(t, base), *c),
            Goal::Unify(a, b, c) => Goal::Unify(shift(a, base), shift(b, base), *c),
            Goal::Is(a, b, c) => Goal::Is(shift(a, base), shift(b, base), *c),
            Goal::Cmp(op, a, b, c) => Goal::Cmp(*op, shift(a, base), shift(b, base), *c),
            Goal::Enter => Goal::Enter,
        }
    }
}

struct Template {
    nvars: usize,
    args: Vec<Cell>,
    /// Body with the head-cost marker after the selection prefix.
    body: Vec<Goal>,
}

fn template(c: &Clause) -> Template {
    let mut vars = HashMap::new();
    let args = c
        .head
        .args()
        .iter()
        .map(|a| compile(a, &mut vars))
        .collect();
    let prefix = c.selection_prefix();
    let mut body = Vec::with_capacity(c.body.len() + 1);
    for (i, lit) in c.body.iter().enumerate() {
        if i == prefix {
            body.push(Goal::Enter);
        }
        let charged = i >= prefix;
        body.push(match lit {
            Literal::Call(t) => Goal::Call(compile(t, &mut vars), true),
            Literal::Unify(a, b) => {
                Goal::Unify(compile(a, &mut vars), compile(b, &mut vars), charged)
            }
            Literal::Is(a, b) => Goal::Is(compile(a, &mut vars), compile(b, &mut vars), charged),
            Literal::Compare(op, a, b) => {
                Goal::Cmp(*op, compile(a, &mut vars), compile(b, &mut vars), charged)
            }
        });
    }
    if prefix >= c.body.len() {
        body.push(Goal::Enter);
    }
    Template {
        nvars: vars.len(),
        args,
        body,
    }
}

struct Node {
    goal: Goal,
    next: Cont,
}

type Cont = Option<Rc<Node>>;

fn push_all(goals: &[Goal], base: usize, next: Cont) -> Cont {
    goals.iter().rev().fold(next, |acc, g| {
        Some(Rc::new(Node {
            goal: g.shift(base),
            next: acc,
        }))
    })
}

struct Choice {
    call: Cell,
    pred: PredId,
    next_clause: usize,
    cont: Cont,
    trail: usize,
    heap: usize,
}

struct Machine<'p> {
    clauses: &'p HashMap<PredId, Vec<Template>>,
    bindings: Vec<Option<Cell>>,
    trail: Vec<usize>,
    costs: Vec<(i64, i64, i64)>,
    totals: Vec<i64>,
    resolutions: u64,
    limit: u64,
}

impl Machine<'_> {
    fn deref(&self, c: &Cell) -> Cell {
        let mut cur = c.clone();
        while let Cell::Ref(k) = cur {
            match &self.bindings[k] {
                Some(b) => cur = b.clone(),
                None => return Cell::Ref(k),
            }
        }
        cur
    }

    fn bind(&mut self, k: usize, c: Cell) {
        self.bindings[k] = Some(c);
        self.trail.push(k);
    }

    fn undo(&mut self, mark: usize, heap: usize) {
        while self.trail.len() > mark {
            let k = self.trail.pop().unwrap();
            self.bindings[k] = None;
        }
        self.bindings.truncate(heap);
    }

    fn unify(&mut self, a: &Cell, b: &Cell) -> bool {
        let mut work = vec![(a.clone(), b.clone())];
        while let Some((x, y)) = work.pop() {
            match (self.deref(&x), self.deref(&y)) {
                (Cell::Ref(i), Cell::Ref(j)) if i == j => {}
                (Cell::Ref(i), t) | (t, Cell::Ref(i)) => self.bind(i, t),
                (Cell::Int(m), Cell::Int(n)) => {
                    if m != n {
                        return false;
                    }
                }
                (Cell::Fun(f, xs), Cell::Fun(g, ys)) => {
                    if f != g || xs.len() != ys.len() {
                        return false;
                    }
                    work.extend(xs.iter().cloned().zip(ys.iter().cloned()));
                }
                _ => return false,
            }
        }
        true
    }

    fn resolve(&self, c: &Cell) -> Term {
        match self.deref(c) {
            Cell::Ref(k) => Term::Var(format!("_G{k}")),
            Cell::Int(n) => Term::Int(n),
            Cell::Fun(f, a) => {
                Term::Compound(f.to_string(), a.iter().map(|x| self.resolve(x)).collect())
            }
        }
    }

    fn eval(&self, c: &Cell) -> Result<i64, OracleError> {
        let overflow = || OracleError::Overflow(self.resolve(c).to_string());
        match self.deref(c) {
            Cell::Int(n) => Ok(n),
            Cell::Fun(f, a) if a.len() == 2 => {
                let (x, y) = (self.eval(&a[0])?, self.eval(&a[1])?);
                match &*f {
                    "+" => x.checked_add(y).ok_or_else(overflow),
                    "-" => x.checked_sub(y).ok_or_else(overflow),
                    "*" => x.checked_mul(y).ok_or_else(overflow),
                    _ => Err(OracleError::Instantiation(self.resolve(c).to_string())),
                }
            }
            Cell::Fun(f, a) if a.len() == 1 && &*f == "-" => {
                self.eval(&a[0])?.checked_neg().ok_or_else(overflow)
            }
            _ => Err(OracleError::Instantiation(self.resolve(c).to_string())),
        }
    }

    fn charge(&mut self, pick: impl Fn(&(i64, i64, i64)) -> i64) {
        for (t, c) in self.totals.iter_mut().zip(&self.costs) {
            *t += pick(c);
        }
    }

    /// Try the clauses of `ch` from `next_clause` on; on success returns
    /// the new continuation and keeps `ch` on the stack if more remain.
    fn try_clauses(
        &mut self,
        mut ch: Choice,
        stack: &mut Vec<Choice>,
    ) -> Result<Option<Cont>, OracleError> {
        let Some(ts) = self.clauses.get(&ch.pred) else {
            return Ok(None);
        };
        let args: Vec<Cell> = match self.deref(&ch.call) {
            Cell::Fun(_, a) => a.to_vec(),
            _ => vec![],
        };
        while ch.next_clause < ts.len() {
            let t = &ts[ch.next_clause];
            ch.next_clause += 1;
            self.resolutions += 1;
            if self.resolutions > self.limit {
                return Err(OracleError::LimitExceeded(self.limit));
            }
            let base = self.bindings.len();
            self.bindings.resize(base + t.nvars, None);
            let ok = t.args.iter().zip(&args).all(|(h, a)| {
                let h = shift(h, base);
                self.unify(&h, a)
            });
            if ok {
                let cont = push_all(&t.body, base, ch.cont.clone());
                if ch.next_clause < ts.len() {
                    stack.push(ch);
                }
                return Ok(Some(cont));
            }
            self.undo(ch.trail, ch.heap);
        }
        Ok(None)
    }

    fn backtrack(&mut self, stack: &mut Vec<Choice>) -> Result<Option<Cont>, OracleError> {
        while let Some(ch) = stack.pop() {
            self.undo(ch.trail, ch.heap);
            if let Some(c) = self.try_clauses(ch, stack)? {
                return Ok(Some(c));
            }
        }
        Ok(None)
    }

    fn step(
        &mut self,
        goal: &Goal,
        next: Cont,
        stack: &mut Vec<Choice>,
    ) -> Result<Option<Cont>, OracleError> {
        let builtin = |m: &mut Self, charged: bool| {
            if charged {
                m.charge(|c| c.2);
            }
        };
        match goal {
            Goal::Enter => {
                self.charge(|c| c.0);
                Ok(Some(next))
            }
            Goal::Call(t, charged) => {
                if *charged {
                    self.charge(|c| c.1);
                }
                let t = self.deref(t);
                let pred = match &t {
                    Cell::Fun(f, a) => PredId::new(f, a.len()),
                    other => return Err(OracleError::NotCallable(self.resolve(other).to_string())),
                };
                if !self.clauses.contains_key(&pred) {
                    return Err(OracleError::Undefined(pred));
                }
                let ch = Choice {
                    call: t,
                    pred,
                    next_clause: 0,
                    cont: next,
                    trail: self.trail.len(),
                    heap: self.bindings.len(),
                };
                self.try_clauses(ch, stack)
            }
            Goal::Unify(a, b, charged) => {
                builtin(self, *charged);
                Ok(self.unify(a, b).then_some(next))
            }
            Goal::Is(x, e, charged) => {
                builtin(self, *charged);
                let v = self.eval(e)?;
                Ok(self.unify(x, &Cell::Int(v)).then_some(next))
            }
            Goal::Cmp(op, a, b, charged) => {
                builtin(self, *charged);
                let (x, y) = (self.eval(a)?, self.eval(b)?);
                Ok(op.holds(x, y).then_some(next))
            }
        }
    }
}

/// Exhaustive depth-first SLD search of `goal`, counting every solution and
/// the resources used along all branches.
pub fn run(
    prog: &Program,
    goal: &Term,
    resources: &[ResourceDef],
    limits: Limits,
) -> Result<ConcreteMeasure, OracleError> {
    let clauses: HashMap<PredId, Vec<Template>> = prog
        .clauses
        .iter()
        .map(|(p, cs)| (p.clone(), cs.iter().map(template).collect()))
        .collect();
    let mut vars = HashMap::new();
    let g = compile(goal, &mut vars);
    let mut m = Machine {
        clauses: &clauses,
        bindings: vec![None; vars.len()],
        trail: Vec::new(),
        costs: resources
            .iter()
            .map(|r| (r.headcost, r.litcost, r.builtin_cost))
            .collect(),
        totals: vec![0; resources.len()],
        resolutions: 0,
        limit: limits.max_steps,
    };
    let mut stack: Vec<Choice> = Vec::new();
    let mut solutions = 0u64;
    let mut cont = Some(Some(Rc::new(Node {
        goal: Goal::Call(g, false),
        next: None,
    })));
    while let Some(c) = cont {
        cont = match c {
            None => {
                solutions += 1;
                m.backtrack(&mut stack)?
            }
            Some(node) => match m.step(&node.goal, node.next.clone(), &mut stack)? {
                Some(next) => Some(next),
                None => m.backtrack(&mut stack)?,
            },
        };
    }
    Ok(ConcreteMeasure {
        goal: goal.clone(),
        solutions,
        resources: resources
            .iter()
            .map(|r| r.name.clone())
            .zip(m.totals)
            .collect(),
        resolutions: m.resolutions,
    })
}

// ---------------------------------------------------------------- inputs

/// Random ground members of a type, every size measure at most `budget`.
pub struct InputGen<'g> {
    grammar: &'g TypeGrammar,
    budget: i64,
    rng: ChaCha8Rng,
}

impl<'g> InputGen<'g> {
    pub fn new(grammar: &'g TypeGrammar, budget: i64, seed: u64) -> InputGen<'g> {
        InputGen {
            grammar,
            budget,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self, ty: &TypeTerm) -> Result<Term, OracleError> {
        let t = self.grammar.canonical(ty);
        self.gen(&t, 0)
    }

    fn gen(&mut self, ty: &TypeTerm, depth: usize) -> Result<Term, OracleError> {
        let empty = || OracleError::EmptyType(ty.to_string(), self.budget);
        if self.budget < 0 || depth > 64 {
            return Err(empty());
        }
        match ty {
            TypeTerm::Num | TypeTerm::Var(_) => Ok(Term::Int(self.rng.gen_range(0..=self.budget))),
            TypeTerm::Int(k) if *k <= self.budget => Ok(Term::Int(*k)),
            TypeTerm::Int(_) => Err(empty()),
            TypeTerm::List(e) => {
                let n = self.rng.gen_range(0..=self.budget);
                let items = (0..n)
                    .map(|_| self.gen(e, depth + 1))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Term::list(items, Term::nil()))
            }
            TypeTerm::Fun(f, args) => {
                let a = args
                    .iter()
                    .map(|x| self.gen(x, depth + 1))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Term::Compound(f.clone(), a))
            }
            TypeTerm::Sym(s) => {
                let alts = self.grammar.rules.get(s).cloned().ok_or_else(empty)?;
                // Past a few levels only non-recursive alternatives are used.
                let flat: Vec<&TypeTerm> = alts.iter().filter(|a| !mentions(a, s)).collect();
                let pool: Vec<&TypeTerm> = if depth as i64 >= self.budget && !flat.is_empty() {
                    flat
                } else {
                    alts.iter().collect()
                };
                let pick = pool[self.rng.gen_range(0..pool.len())].clone();
                self.gen(&self.grammar.canonical(&pick), depth + 1)
            }
        }
    }
}

fn mentions(t: &TypeTerm, sym: &str) -> bool {
    match t {
        TypeTerm::Sym(s) => s == sym,
        TypeTerm::List(e) => mentions(e, sym),
        TypeTerm::Fun(_, a) => a.iter().any(|x| mentions(x, sym)),
        _ => false,
    }
}

/// `budget`-bounded random inputs for a type, one per seed offset.
pub fn generate_inputs(
    ty: &TypeTerm,
    g: &TypeGrammar,
    budget: i64,
    seed: u64,
    count: usize,
) -> Result<Vec<Term>, OracleError> {
    let mut gen = InputGen::new(g, budget, seed);
    (0..count).map(|_| gen.sample(ty)).collect()
}

// ---------------------------------------------------------------- bounds

/// Size variables of the input schemas bound to the measured sizes of the
/// actual arguments.
pub fn measure_inputs(
    entry: &AnalysisEntry,
    args: &[Term],
    g: &TypeGrammar,
) -> Result<BTreeMap<BVar, Value>, OracleError> {
    let mut env = BTreeMap::new();
    for (&p, schema) in &entry.sig.inputs {
        let t = args
            .get(p)
            .ok_or_else(|| OracleError::Type(format!("missing argument {}", p + 1)))?;
        let sizes = size_of_term(t, schema, g).map_err(|e| OracleError::Type(e.to_string()))?;
        bind_slots(schema, &sizes, &mut env);
    }
    Ok(env)
}

fn bind_slots(schema: &Schema, sizes: &[(Value, Value)], env: &mut BTreeMap<BVar, Value>) {
    for ((lo, hi), (l, h)) in schema.slots().iter().zip(sizes) {
        if let crate::recurrence::SymExpr::Var(v) = lo {
            env.insert(v.clone(), *l);
        }
        if let crate::recurrence::SymExpr::Var(v) = hi {
            env.insert(v.clone(), *h);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// `solutions` or a resource name.
    pub what: String,
    pub side: Dir,
    pub bound: Value,
    pub observed: i64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Dir::Le => write!(
                f,
                "{}: observed {} above upper bound {}",
                self.what, self.observed, self.bound
            ),
            Dir::Ge => write!(
                f,
                "{}: observed {} below lower bound {}",
                self.what, self.observed, self.bound
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Verdict {
    pub violations: Vec<Violation>,
    /// Observed and (lower, upper) values per quantity.
    pub checked: Vec<(String, i64, Value, Value)>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn eval_bound(
    cf: Option<&ClosedForm>,
    dir: Dir,
    env: &BTreeMap<BVar, Value>,
) -> Result<Value, OracleError> {
    let Some(cf) = cf else {
        return Ok(if dir == Dir::Le {
            Value::Inf
        } else {
            Value::int(0)
        });
    };
    let v = cf
        .evaluate(env)
        .map_err(|e| OracleError::Type(format!("{}: {e}", cf.name)))?;
    Ok(match (v, dir) {
        (Value::Nob, Dir::Le) => Value::Inf,
        (Value::Nob, Dir::Ge) => Value::int(0),
        (Value::Inf, Dir::Ge) => {
            return Err(OracleError::Type(format!(
                "{}: infinite lower bound",
                cf.name
            )))
        }
        (v, _) => v,
    })
}

/// Compare a measure with the entry's solved bounds at the measured sizes.
pub fn check_bounds(
    m: &ConcreteMeasure,
    entry: &AnalysisEntry,
    env: &BTreeMap<BVar, Value>,
) -> Result<Verdict, OracleError> {
    let mut quantities = vec![(
        "solutions".to_string(),
        entry.solutions(),
        m.solutions as i64,
    )];
    for (name, &total) in &m.resources {
        quantities.push((name.clone(), entry.resource(name), total));
    }
    let mut v = Verdict::default();
    for (what, (lo, hi), observed) in quantities {
        let l = eval_bound(lo, Dir::Ge, env)?;
        let h = eval_bound(hi, Dir::Le, env)?;
        if !l.le(Value::int(observed)) {
            v.violations.push(Violation {
                what: what.clone(),
                side: Dir::Ge,
                bound: l,
                observed,
            });
        }
        if !Value::int(observed).le(h) {
            v.violations.push(Violation {
                what: what.clone(),
                side: Dir::Le,
                bound: h,
                observed,
            });
        }
        v.checked.push((what, observed, l, h));
    }
    Ok(v)
}

/// Goal term `pred(args..., _, ...)` with fresh variables at output positions.
pub fn goal_for(entry: &AnalysisEntry, inputs: &BTreeMap<usize, Term>) -> Term {
    let args = (0..entry.pred.arity)
        .map(|i| {
            inputs
                .get(&i)
                .cloned()
                .unwrap_or_else(|| Term::Var(format!("Out{}", i + 1)))
        })
        .collect();
    Term::Compound(entry.pred.name.clone(), args)
}

/// Outcome of checking one entry version on a batch of random inputs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckSummary {
    pub version: String,
    pub passed: usize,
    pub failed: usize,
    /// Runs stopped by the step limit or a runtime error; not violations.
    pub diverged: usize,
    /// Goal and message for each failing or diverging sample.
    pub reports: Vec<(String, String)>,
}

impl CheckSummary {
    pub fn samples(&self) -> usize {
        self.passed + self.failed + self.diverged
    }
}

/// Run `samples` random goals (sample `i` seeded with `seed + i`) against
/// the bounds of `entry`.
pub fn check_entry(
    prog: &Program,
    resources: &[ResourceDef],
    entry: &AnalysisEntry,
    grammar: &TypeGrammar,
    budget: i64,
    samples: usize,
    seed: u64,
) -> Result<CheckSummary, OracleError> {
    let mut s = CheckSummary {
        version: entry.version.clone(),
        ..Default::default()
    };
    for i in 0..samples {
        let mut gen = InputGen::new(grammar, budget, seed.wrapping_add(i as u64));
        let mut inputs = BTreeMap::new();
        for (&pos, schema) in &entry.sig.inputs {
            inputs.insert(pos, gen.sample(&schema.ty())?);
        }
        let goal = goal_for(entry, &inputs);
        let env = measure_inputs(entry, goal.args(), grammar)?;
        match run(prog, &goal, resources, Limits::default()) {
            Ok(m) => {
                let v = check_bounds(&m, entry, &env)?;
                if v.passed() {
                    s.passed += 1;
                } else {
                    s.failed += 1;
                    let msg = v
                        .violations
                        .iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join("; ");
                    s.reports.push((goal.to_string(), msg));
                }
            }
            Err(e) => {
                s.diverged += 1;
                s.reports.push((goal.to_string(), e.to_string()));
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::frontend::parser::parse_term;

    fn steps_of(src: &str, goal: &str) -> (u64, i64) {
        let p = parse_program(src).unwrap();
        let m = run(
            &p,
            &parse_term(goal).unwrap(),
            &[ResourceDef::steps()],
            Limits::default(),
        )
        .unwrap();
        (m.solutions, m.resources["steps"])
    }

    const APPEND: &str = "append([],S,S).\nappend([E|R],S,[E|T]) :- append(R,S,T).\n";

    #[test]
    fn append_trace() {
        assert_eq!(steps_of(APPEND, "append([1,2],[3],Z)"), (1, 3));
    }

    #[test]
    fn fact_base() {
        let fact = "fact(0,1).\nfact(N,M) :- N > 0, N1 is N-1, fact(N1,M1), M is N*M1.\n";
        assert_eq!(steps_of(fact, "fact(0,F)"), (1, 1));
        assert_eq!(steps_of(fact, "fact(3,F)"), (1, 4));
    }

    #[test]
    fn backtracking_counts_every_branch() {
        // append(X,Y,[1,2]) has three solutions; every clause reached counts.
        assert_eq!(steps_of(APPEND, "append(X,Y,[1,2])"), (3, 5));
    }

    #[test]
    fn divergence_is_reported() {
        let p = parse_program("loop(X) :- loop(X).").unwrap();
        let r = run(
            &p,
            &parse_term("loop(1)").unwrap(),
            &[ResourceDef::steps()],
            Limits { max_steps: 1000 },
        );
        assert_eq!(r, Err(OracleError::LimitExceeded(1000)));
    }

    #[test]
    fn deterministic_generation() {
        let g = TypeGrammar::default();
        let t = TypeTerm::list(TypeTerm::Num);
        let a = generate_inputs(&t, &g, 3, 7, 20).unwrap();
        assert_eq!(a, generate_inputs(&t, &g, 3, 7, 20).unwrap());
        assert!(a.iter().all(|x| g.membership(x, &t) == Ok(true)));
        let empty = generate_inputs(&t, &g, 0, 1, 5).unwrap();
        assert!(empty.iter().all(|x| x.is_nil()));
    }
}

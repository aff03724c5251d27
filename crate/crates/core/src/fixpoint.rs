//! Goal-dependent fixpoint over predicate versions.
//!
//! Starting from the entry declarations, every reachable (predicate, call
//! pattern) pair gets a version. Analysis runs in three passes: discovery
//! of versions and output types, non-failure/determinacy, then the
//! resource elements, which are finally solved as one recurrence system.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::auxdomains::{solve_aux, ClauseFacts, Det, Nf, VersionFacts};
use crate::frontend::ast::{Mode, PredId, Program, TrustProp};
use crate::frontend::normalize_program;
use crate::recurrence::{solve, ClosedForm, EqSystem, FnEqs, Guard, SymExpr};
use crate::regtypes::{sized_schema, FreshNames, TypeGrammar, TypeTerm};
use crate::resdomain::{
    analyze_clause, bottom, equivalent, exit_to_prime, fn_name, out_key, res_key, shape_of, widen,
    AbstractElement, CalleeInfo, Callees, ClausePrime, ResourceDef, VersionCtx, VersionSig,
};
use crate::sizedtypes::{Dir, Schema};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalysisOptions {
    /// Recomputations allowed per version before giving up on it.
    pub max_iterations: usize,
    /// Restrict the analysis to these resources (all when `None`).
    pub resources: Option<Vec<String>>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            max_iterations: 50,
            resources: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("type error: {0}")]
    Type(String),
    #[error("entry {0}: {1}")]
    Entry(String, String),
    #[error("unknown resource {0}")]
    UnknownResource(String),
}

/// One analysed version.
#[derive(Clone, Debug)]
pub struct AnalysisEntry {
    pub version: String,
    pub pred: PredId,
    pub entry: bool,
    pub sig: VersionSig,
    pub d: Guard,
    pub element: AbstractElement,
    pub fns: Vec<FnEqs>,
    pub forms: BTreeMap<String, ClosedForm>,
    pub nf: Nf,
    pub det: Det,
    pub iterations: usize,
}

impl AnalysisEntry {
    pub fn form(&self, what: &str, dir: Dir) -> Option<&ClosedForm> {
        self.forms.get(&fn_name(&self.version, what, dir))
    }

    pub fn solutions(&self) -> (Option<&ClosedForm>, Option<&ClosedForm>) {
        (self.form("sol", Dir::Ge), self.form("sol", Dir::Le))
    }

    pub fn resource(&self, name: &str) -> (Option<&ClosedForm>, Option<&ClosedForm>) {
        let k = res_key(name);
        (self.form(&k, Dir::Ge), self.form(&k, Dir::Le))
    }

    /// Output schema with the solved forms as bounds.
    pub fn output_schema(&self, pos: usize) -> Option<Schema> {
        let shape = self.sig.outputs.get(&pos)?.as_ref()?;
        let slots: Vec<(SymExpr, SymExpr)> = (0..shape.num_slots())
            .map(|k| {
                let key = out_key(pos, k);
                let get = |dir| {
                    self.form(&key, dir)
                        .map(|f| f.main.clone())
                        .unwrap_or(SymExpr::Nob)
                };
                (get(Dir::Ge), get(Dir::Le))
            })
            .collect();
        Some(shape.with_slots(&slots))
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisResult {
    pub entries: Vec<AnalysisEntry>,
    pub resources: Vec<ResourceDef>,
    pub diagnostics: Vec<String>,
    /// Bound functions whose closed form is approximate.
    pub imprecise: Vec<String>,
    /// Total number of version (re)computations in the last pass.
    pub iterations: usize,
}

impl AnalysisResult {
    pub fn entry_for(&self, pred: &str) -> Option<&AnalysisEntry> {
        self.entries.iter().find(|e| e.entry && e.pred.name == pred)
    }

    pub fn version(&self, name: &str) -> Option<&AnalysisEntry> {
        self.entries.iter().find(|e| e.version == name)
    }
}

fn rename_type_vars(t: &TypeTerm, seen: &mut Vec<String>) -> TypeTerm {
    match t {
        TypeTerm::Var(v) => {
            let k = seen.iter().position(|x| x == v).unwrap_or_else(|| {
                seen.push(v.clone());
                seen.len() - 1
            });
            TypeTerm::Var(format!("T{}", k + 1))
        }
        TypeTerm::List(e) => TypeTerm::list(rename_type_vars(e, seen)),
        TypeTerm::Fun(f, xs) => TypeTerm::Fun(
            f.clone(),
            xs.iter().map(|x| rename_type_vars(x, seen)).collect(),
        ),
        other => other.clone(),
    }
}

/// Key of a call pattern: predicate, modes, input types with type
/// variables renamed by first occurrence, and the domain guard.
pub fn canonical_call_pattern(
    pred: &PredId,
    modes: &[Mode],
    types: &[Option<TypeTerm>],
    d: &Guard,
) -> String {
    let mut seen = Vec::new();
    let args: Vec<String> = modes
        .iter()
        .enumerate()
        .map(|(i, m)| match (m, types.get(i).cloned().flatten()) {
            (Mode::Out, _) => "out".to_string(),
            (Mode::In, Some(t)) => format!("in:{}", rename_type_vars(&t, &mut seen)),
            (Mode::In, None) => "in:?".to_string(),
        })
        .collect();
    let mut key = format!("{pred}({})", args.join(","));
    if !d.is_top() {
        key.push_str(&format!("|{d}"));
    }
    key
}

#[derive(Clone, Debug)]
struct Version {
    pred: PredId,
    sig: VersionSig,
    entry: bool,
}

/// Versions by call pattern, with their current elements and the reverse
/// call edges used to re-schedule callers.
#[derive(Default)]
pub struct MemoTable {
    versions: Vec<Version>,
    index: BTreeMap<String, usize>,
    dependents: Vec<BTreeSet<usize>>,
    elements: Vec<AbstractElement>,
    fns: Vec<Vec<FnEqs>>,
    iterations: Vec<usize>,
    stable: Vec<bool>,
    calls: Vec<BTreeSet<usize>>,
}

impl MemoTable {
    pub fn len(&self) -> usize {
        self.versions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.versions.is_empty()
    }

    pub fn version_name(&self, i: usize) -> &str {
        &self.versions[i].sig.name
    }
}

struct Engine<'a> {
    prog: &'a Program,
    g: &'a TypeGrammar,
    resources: &'a [ResourceDef],
    memo: MemoTable,
    queue: VecDeque<usize>,
    aux: Option<Vec<(Nf, Det)>>,
    diagnostics: BTreeSet<String>,
}

fn arg_types(
    g: &TypeGrammar,
    args: &[crate::frontend::ast::ArgDecl],
) -> Result<Vec<Option<TypeTerm>>, String> {
    args.iter()
        .map(|a| {
            a.ty.as_ref()
                .map(|t| g.type_of_decl(t).map(|t| g.canonical(&t)))
                .transpose()
                .map_err(|e| e.to_string())
        })
        .collect()
}

impl<'a> Engine<'a> {
    fn version_name(&self, pred: &PredId) -> String {
        let clash = self
            .prog
            .clauses
            .keys()
            .any(|p| p.name == pred.name && p.arity != pred.arity);
        let base = if clash {
            format!("{}/{}", pred.name, pred.arity)
        } else {
            pred.name.clone()
        };
        let k = self
            .memo
            .versions
            .iter()
            .filter(|v| v.pred == *pred)
            .count();
        if k == 0 {
            base
        } else {
            format!("{base}#{}", k + 1)
        }
    }

    /// Output types from the predicate signature, with type parameters
    /// bound by matching the signature's input types against the actual ones.
    fn sig_outputs(
        &self,
        pred: &PredId,
        modes: &[Mode],
        ins: &[Option<TypeTerm>],
    ) -> BTreeMap<usize, TypeTerm> {
        let mut out = BTreeMap::new();
        let Some(sig) = self.prog.sig_of(pred) else {
            return out;
        };
        let Ok(types) = arg_types(self.g, &sig.args) else {
            return out;
        };
        let mut env = BTreeMap::new();
        for (i, m) in modes.iter().enumerate() {
            if let (Mode::In, Some(Some(st)), Some(Some(at))) = (m, types.get(i), ins.get(i)) {
                st.match_against(at, &mut env);
            }
        }
        for (i, m) in modes.iter().enumerate() {
            if let (Mode::Out, Some(Some(st))) = (m, types.get(i)) {
                let t = self.g.canonical(&st.instantiate(&env));
                if !has_type_var(&t) {
                    out.insert(i, t);
                }
            }
        }
        out
    }

    fn ensure(
        &mut self,
        pred: &PredId,
        modes: Vec<Mode>,
        types: Vec<Option<TypeTerm>>,
        out_hint: BTreeMap<usize, TypeTerm>,
        names: Option<Vec<String>>,
        entry: bool,
    ) -> usize {
        let key = canonical_call_pattern(pred, &modes, &types, &Guard::top());
        if let Some(&i) = self.memo.index.get(&key) {
            if entry {
                self.memo.versions[i].entry = true;
            }
            return i;
        }
        let name = self.version_name(pred);
        let mut fresh = FreshNames::new("");
        let mut inputs = BTreeMap::new();
        let mut opaque = BTreeSet::new();
        let mut outputs = BTreeMap::new();
        let sig_out = self.sig_outputs(pred, &modes, &types);
        for (i, m) in modes.iter().enumerate() {
            let sub = names
                .as_ref()
                .and_then(|n| n.get(i).cloned())
                .unwrap_or_else(|| (i + 1).to_string());
            fresh.set_subscript(&sub);
            match m {
                Mode::In => match types[i]
                    .as_ref()
                    .map(|t| sized_schema(t, self.g, &mut fresh))
                {
                    Some(Ok(s)) => {
                        inputs.insert(i, s);
                    }
                    Some(Err(e)) => {
                        self.diagnostics
                            .insert(format!("{name}: argument {}: {e}", i + 1));
                        opaque.insert(i);
                    }
                    None => {
                        opaque.insert(i);
                    }
                },
                Mode::Out => {
                    let t = out_hint.get(&i).or_else(|| sig_out.get(&i));
                    outputs.insert(i, t.and_then(|t| shape_of(t, self.g)));
                }
            }
        }
        let i = self.memo.versions.len();
        self.memo.versions.push(Version {
            pred: pred.clone(),
            sig: VersionSig {
                name: name.clone(),
                inputs,
                opaque,
                outputs,
            },
            entry,
        });
        self.memo.index.insert(key, i);
        self.memo.dependents.push(BTreeSet::new());
        self.memo.elements.push(bottom(&name, self.resources));
        self.memo.fns.push(vec![]);
        self.memo.iterations.push(0);
        self.memo.stable.push(false);
        self.memo.calls.push(BTreeSet::new());
        self.queue.push_back(i);
        i
    }

    fn ctx_for(&self, i: usize) -> (VersionSig, PredId) {
        let v = &self.memo.versions[i];
        (v.sig.clone(), v.pred.clone())
    }
}

fn has_type_var(t: &TypeTerm) -> bool {
    match t {
        TypeTerm::Var(_) => true,
        TypeTerm::List(e) => has_type_var(e),
        TypeTerm::Fun(_, xs) => xs.iter().any(has_type_var),
        _ => false,
    }
}

struct Resolver<'e, 'a> {
    engine: &'e mut Engine<'a>,
    caller: usize,
}

impl Callees for Resolver<'_, '_> {
    fn lookup(&mut self, pred: &PredId, bound: &[bool], types: &[Option<TypeTerm>]) -> CalleeInfo {
        let e = &mut *self.engine;
        if !e.prog.is_defined(pred) {
            e.diagnostics.insert(format!(
                "undefined predicate {pred} treated as unknown (bottom)"
            ));
            return CalleeInfo {
                id: None,
                sig: None,
                nf: Nf::Fails,
                det: Det::NonDet,
            };
        }
        let modes: Vec<Mode> = match e.prog.sig_of(pred) {
            Some(s) => s.args.iter().map(|a| a.mode).collect(),
            None => bound
                .iter()
                .map(|&b| if b { Mode::In } else { Mode::Out })
                .collect(),
        };
        let types: Vec<Option<TypeTerm>> = modes
            .iter()
            .zip(types)
            .map(|(m, t)| {
                if *m == Mode::In {
                    t.as_ref().map(|t| e.g.canonical(t))
                } else {
                    None
                }
            })
            .collect();
        let id = e.ensure(pred, modes, types, BTreeMap::new(), None, false);
        e.memo.dependents[id].insert(self.caller);
        e.memo.calls[self.caller].insert(id);
        let (nf, det) = match &e.aux {
            Some(a) => a.get(id).copied().unwrap_or((Nf::Fails, Det::NonDet)),
            None => (Nf::NotFails, Det::IsDet),
        };
        CalleeInfo {
            id: Some(id),
            sig: Some(e.memo.versions[id].sig.clone()),
            nf,
            det,
        }
    }
}

/// Run all clauses of version `i`; returns the per-clause states.
fn run_clauses(engine: &mut Engine, i: usize) -> Vec<crate::resdomain::ClauseState> {
    let (sig, pred) = engine.ctx_for(i);
    let clauses = engine.prog.clauses_of(&pred).to_vec();
    let g = engine.g;
    let resources = engine.resources;
    let ctx = VersionCtx {
        sig: &sig,
        grammar: g,
        resources,
        d: Guard::top(),
    };
    engine.memo.calls[i].clear();
    let mut out = Vec::with_capacity(clauses.len());
    for (k, c) in clauses.iter().enumerate() {
        let mut r = Resolver { engine, caller: i };
        let st = analyze_clause(&ctx, k, c, &mut r);
        for d in &st.diagnostics {
            r.engine.diagnostics.insert(format!("{}: {d}", sig.name));
        }
        out.push(st);
    }
    out
}

/// Analyse a program from its entry declarations.
pub fn analyze(prog: &Program, opts: &AnalysisOptions) -> Result<AnalysisResult, AnalysisError> {
    let p = normalize_program(prog);
    let g = TypeGrammar::from_program(&p);
    if let Err(ds) = g.well_formed() {
        let msgs: Vec<String> = ds.iter().map(|d| d.to_string()).collect();
        return Err(AnalysisError::Type(msgs.join("; ")));
    }
    let mut resources = ResourceDef::for_program(&p);
    if let Some(wanted) = &opts.resources {
        for w in wanted {
            if !resources.iter().any(|r| &r.name == w) {
                return Err(AnalysisError::UnknownResource(w.clone()));
            }
        }
        resources.retain(|r| wanted.contains(&r.name));
    }
    let mut engine = Engine {
        prog: &p,
        g: &g,
        resources: &resources,
        memo: MemoTable::default(),
        queue: VecDeque::new(),
        aux: None,
        diagnostics: BTreeSet::new(),
    };
    for e in &p.entries {
        let types =
            arg_types(&g, &e.args).map_err(|m| AnalysisError::Entry(e.pred.to_string(), m))?;
        let modes: Vec<Mode> = e.args.iter().map(|a| a.mode).collect();
        let ins: Vec<Option<TypeTerm>> = modes
            .iter()
            .zip(&types)
            .map(|(m, t)| if *m == Mode::In { t.clone() } else { None })
            .collect();
        let outs: BTreeMap<usize, TypeTerm> = modes
            .iter()
            .zip(&types)
            .enumerate()
            .filter_map(|(i, (m, t))| {
                if *m == Mode::Out {
                    t.clone().map(|t| (i, t))
                } else {
                    None
                }
            })
            .collect();
        let names: Vec<String> = e
            .args
            .iter()
            .enumerate()
            .map(|(i, a)| a.name.clone().unwrap_or_else(|| (i + 1).to_string()))
            .collect();
        engine.ensure(&e.pred, modes, ins, outs, Some(names), true);
    }

    // Discovery: versions reachable from the entries and untyped output
    // types observed in clause bodies.
    let mut facts: Vec<Vec<ClauseFacts>> = Vec::new();
    let mut budget = 1000usize;
    while let Some(i) = engine.queue.pop_front() {
        budget = budget.saturating_sub(1);
        let states = run_clauses(&mut engine, i);
        if facts.len() < engine.memo.len() {
            facts.resize(engine.memo.len(), Vec::new());
        }
        facts[i] = states.iter().map(|s| s.facts()).collect();
        let mut changed = false;
        let outs = engine.memo.versions[i].sig.outputs.clone();
        for (pos, shape) in outs {
            if shape.is_some() {
                continue;
            }
            if let Some(t) = states.iter().find_map(|s| s.out_types.get(&pos)) {
                if let Some(s) = shape_of(t, &g) {
                    engine.memo.versions[i].sig.outputs.insert(pos, Some(s));
                    changed = true;
                }
            }
        }
        if changed && budget > 0 {
            let deps: Vec<usize> = engine.memo.dependents[i].iter().copied().collect();
            engine.queue.push_back(i);
            engine.queue.extend(deps);
        }
    }
    facts.resize(engine.memo.len(), Vec::new());

    // Non-failure and determinacy.
    let aux_in: Vec<VersionFacts> = (0..engine.memo.len())
        .map(|i| {
            let v = &engine.memo.versions[i];
            VersionFacts {
                clauses: facts[i].clone(),
                lower_vars: v.sig.formals(Dir::Ge).into_iter().collect(),
                trust_nf: p.trusted(&v.pred, TrustProp::NotFails),
                trust_det: p.trusted(&v.pred, TrustProp::IsDet),
            }
        })
        .collect();
    for (i, v) in aux_in.iter().enumerate() {
        if v.trust_nf || v.trust_det {
            engine.diagnostics.insert(format!(
                "{}: trusted properties used",
                engine.memo.version_name(i)
            ));
        }
    }
    engine.aux = Some(solve_aux(&aux_in));

    // Resource elements.
    let n = engine.memo.len();
    engine.queue = (0..n).collect();
    let mut total = 0usize;
    while let Some(i) = engine.queue.pop_front() {
        total += 1;
        if engine.memo.iterations[i] >= opts.max_iterations {
            engine.diagnostics.insert(format!(
                "{}: iteration cap reached, bounds set to ∞/0",
                engine.memo.version_name(i)
            ));
            continue;
        }
        engine.memo.iterations[i] += 1;
        let states = run_clauses(&mut engine, i);
        let (nf, det) = engine
            .aux
            .as_ref()
            .and_then(|a| a.get(i).copied())
            .unwrap_or((Nf::Fails, Det::NonDet));
        let mut primes = Vec::with_capacity(states.len());
        for st in &states {
            match exit_to_prime(&st.elem) {
                Ok(p) => primes.push(p),
                Err(e) => {
                    engine
                        .diagnostics
                        .insert(format!("{}: {e}", engine.memo.version_name(i)));
                    primes.push(bottom(engine.memo.version_name(i), &resources));
                }
            }
        }
        let cps: Vec<ClausePrime> = states
            .iter()
            .zip(&primes)
            .map(|(s, p)| ClausePrime {
                sel: &s.sel,
                prime: p,
            })
            .collect();
        let sig = engine.memo.versions[i].sig.clone();
        let ctx = VersionCtx {
            sig: &sig,
            grammar: &g,
            resources: &resources,
            d: Guard::top(),
        };
        let w = widen(&ctx, &cps, nf, det);
        let same =
            engine.memo.stable[i] && equivalent(&engine.memo.elements[i], &w.elem).unwrap_or(false);
        engine.memo.elements[i] = w.elem;
        engine.memo.fns[i] = w.fns;
        engine.memo.stable[i] = true;
        if !same {
            for d in engine.memo.dependents[i].clone() {
                if d != i && !engine.queue.contains(&d) {
                    engine.queue.push_back(d);
                }
            }
        }
    }
    if engine.memo.len() != n {
        engine
            .diagnostics
            .insert("versions created after discovery were left at bottom".to_string());
    }

    // Solve every bound function as one system.
    let mut sys = EqSystem::default();
    for (i, fs) in engine.memo.fns.iter().enumerate() {
        let capped = engine.memo.iterations[i] >= opts.max_iterations;
        for f in fs {
            let mut f = f.clone();
            if capped {
                f.cases = vec![];
                f.default = ClosedForm::fallback_value(f.dir);
            }
            sys.fns.insert(f.name.clone(), f);
        }
    }
    let sol = solve(&sys).map_err(|e| AnalysisError::Type(e.to_string()))?;
    let aux = engine.aux.clone().unwrap_or_default();
    let mut live: BTreeSet<usize> = (0..engine.memo.len())
        .filter(|&i| engine.memo.versions[i].entry)
        .collect();
    let mut stack: Vec<usize> = live.iter().copied().collect();
    while let Some(i) = stack.pop() {
        for &j in &engine.memo.calls[i] {
            if live.insert(j) {
                stack.push(j);
            }
        }
    }
    let mut entries = Vec::new();
    for (i, v) in engine.memo.versions.iter().enumerate() {
        if !live.contains(&i) {
            continue;
        }
        let fns = engine.memo.fns.get(i).cloned().unwrap_or_default();
        let forms: BTreeMap<String, ClosedForm> = fns
            .iter()
            .filter_map(|f| {
                sol.forms
                    .get(&f.name)
                    .map(|cf| (f.name.clone(), cf.clone()))
            })
            .collect();
        let (nf, det) = aux.get(i).copied().unwrap_or((Nf::Fails, Det::NonDet));
        entries.push(AnalysisEntry {
            version: v.sig.name.clone(),
            pred: v.pred.clone(),
            entry: v.entry,
            sig: v.sig.clone(),
            d: Guard::top(),
            element: engine.memo.elements[i].clone(),
            fns,
            forms,
            nf,
            det,
            iterations: engine.memo.iterations[i],
        });
    }
    for name in &sol.imprecise {
        if sol.forms.get(name).is_some_and(|f| f.pattern == "fallback") {
            engine
                .diagnostics
                .insert(format!("{name}: no closed form found, using safe default"));
        }
    }
    let dead: Vec<String> = (0..engine.memo.len())
        .filter(|i| !live.contains(i))
        .map(|i| engine.memo.version_name(i).to_string())
        .collect();
    let diagnostics: BTreeSet<String> = std::mem::take(&mut engine.diagnostics)
        .into_iter()
        .filter(|d| {
            !dead
                .iter()
                .any(|v| d.starts_with(&format!("{v}:")) || d.starts_with(&format!("{v}/")))
        })
        .collect();
    drop(engine);
    Ok(AnalysisResult {
        entries,
        resources,
        diagnostics: diagnostics.into_iter().collect(),
        imprecise: sol
            .imprecise
            .into_iter()
            .filter(|n| !dead.iter().any(|v| n.starts_with(&format!("{v}/"))))
            .collect(),
        iterations: total,
    })
}

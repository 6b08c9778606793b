//! Error-directed selection: pick one Clight candidate per node so that the
//! C program type-checks, starting from the preferred types and repairing
//! greedily against the oracle.

mod emit;
mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::analysis::by_preference;
use crate::analysis::seeds::seeds_in;
use crate::ir::{CTypeTable, ClExpr, ClightStmt, IRLevel, Stmt, TypeIdx};
use crate::lifting::flow::{functions, FuncGraph};
use crate::lifting::REGION_ITE;
use crate::store::{NodeId, Store, StoreResult, Value};

pub use emit::{render_function, render_unit, sanitize, Rendered};
pub use oracle::{typecheck, Category, Diagnostic, GlobalDecl, Proto, Scope};

pub const DEFAULT_BUDGET: usize = 200;

/// One function as selection sees it.
#[derive(Debug, Clone)]
pub struct FuncInput {
    pub name: String,
    pub graph: FuncGraph,
    /// Reachable nodes in reverse postorder.
    pub order: Vec<NodeId>,
    pub cands: BTreeMap<NodeId, Vec<ClightStmt>>,
    /// Parameter pseudo-registers with their signature types.
    pub params: Vec<(u32, TypeIdx)>,
    pub ret: TypeIdx,
    /// Preference-ordered type candidates per variable.
    pub var_cands: BTreeMap<u32, Vec<TypeIdx>>,
    /// If-then-else headers and where their arms rejoin.
    pub ite: BTreeMap<NodeId, Option<NodeId>>,
}

/// Declarations outside any function.
#[derive(Debug, Clone, Default)]
pub struct Unit {
    pub protos: BTreeMap<String, Proto>,
    /// Prototypes that come from seeds rather than from a definition.
    pub externs: BTreeSet<String>,
    pub globals: BTreeMap<String, GlobalDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub decls: BTreeMap<u32, TypeIdx>,
    pub choice: BTreeMap<NodeId, usize>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub function: String,
    pub config: Configuration,
    pub diags: Vec<Diagnostic>,
    pub oracle_calls: usize,
}

impl FuncInput {
    fn is_param(&self, v: u32) -> bool {
        self.params.iter().any(|(p, _)| *p == v)
    }

    /// Initial declarations: each variable at its most preferred type.
    pub fn initial_decls(&self) -> BTreeMap<u32, TypeIdx> {
        let mut d = BTreeMap::new();
        for cs in self.cands.values() {
            for c in cs {
                for (v, t) in c.var_types() {
                    let first = self.var_cands.get(&v).and_then(|ts| ts.first().copied());
                    d.entry(v).or_insert(first.unwrap_or(t));
                }
            }
        }
        for (p, t) in &self.params {
            d.insert(*p, *t);
        }
        d
    }

    /// The candidate at each node that best agrees with `decls`.
    pub fn configure(&self, decls: BTreeMap<u32, TypeIdx>) -> Configuration {
        let mut choice = BTreeMap::new();
        for (n, cs) in &self.cands {
            let score = |c: &ClightStmt| {
                let vt = c.var_types();
                let agree = vt.iter().filter(|(v, t)| decls.get(v) == Some(t)).count();
                (agree == vt.len(), agree)
            };
            let mut best = 0;
            for (i, c) in cs.iter().enumerate() {
                if score(c) > score(&cs[best]) {
                    best = i;
                }
            }
            choice.insert(*n, best);
        }
        Configuration { decls, choice }
    }

    pub fn body<'a>(&'a self, cfg: &Configuration) -> Vec<(NodeId, &'a ClightStmt)> {
        self.order
            .iter()
            .filter_map(|n| Some((*n, &self.cands.get(n)?[*cfg.choice.get(n)?])))
            .collect()
    }
}

fn check(types: &CTypeTable, unit: &Unit, f: &FuncInput, cfg: &Configuration) -> Vec<Diagnostic> {
    let scope = Scope { types, protos: &unit.protos, globals: &unit.globals };
    typecheck(&scope, &cfg.decls, f.ret, &f.body(cfg))
}

/// Alternative configurations suggested by one diagnostic, most targeted first.
fn proposals(types: &CTypeTable, f: &FuncInput, cfg: &Configuration, d: &Diagnostic) -> Vec<Configuration> {
    let mut out = Vec::new();
    if d.category == Category::PointerIntConversion {
        for v in &d.vars {
            if f.is_param(*v) {
                continue;
            }
            let cur = cfg.decls.get(v).copied();
            let want_ptr = cur.is_some_and(|t| !types.is_pointer(t));
            let alt = f.var_cands.get(v).into_iter().flatten().find(|t| types.is_pointer(**t) == want_ptr && Some(**t) != cur);
            if let Some(t) = alt {
                let mut decls = cfg.decls.clone();
                decls.insert(*v, *t);
                out.push(f.configure(decls));
            }
        }
    }
    let Some(cs) = f.cands.get(&d.node) else { return out };
    let current = cfg.choice.get(&d.node).copied();
    for (i, c) in cs.iter().enumerate() {
        if Some(i) == current {
            continue;
        }
        let vt = c.var_types();
        if vt.iter().any(|(v, t)| f.is_param(*v) && cfg.decls.get(v) != Some(t)) {
            continue;
        }
        let mut decls = cfg.decls.clone();
        decls.extend(vt);
        let mut next = f.configure(decls);
        next.choice.insert(d.node, i);
        out.push(next);
    }
    out
}

/// Greedy repair: accept the first proposal that strictly lowers the error
/// count, until no diagnostics remain or `budget` oracle calls are spent.
pub fn select_function(types: &CTypeTable, unit: &Unit, f: &FuncInput, budget: usize) -> Selection {
    let mut cfg = f.configure(f.initial_decls());
    let mut diags = check(types, unit, f, &cfg);
    let mut calls = 1;
    'search: while !diags.is_empty() && calls < budget {
        for d in &diags {
            for next in proposals(types, f, &cfg, d) {
                if calls >= budget {
                    break 'search;
                }
                let nd = check(types, unit, f, &next);
                calls += 1;
                if nd.len() < diags.len() {
                    cfg = next;
                    diags = nd;
                    continue 'search;
                }
            }
        }
        break;
    }
    Selection { function: f.name.clone(), config: cfg, diags, oracle_calls: calls }
}

/// Selects every function, `workers` at a time; results keep input order.
pub fn select_all(types: &CTypeTable, unit: &Unit, funcs: &[FuncInput], budget: usize, workers: usize) -> Vec<Selection> {
    let run = || funcs.par_iter().map(|f| select_function(types, unit, f, budget)).collect();
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => funcs.iter().map(|f| select_function(types, unit, f, budget)).collect(),
    }
}

fn globals_in(e: &ClExpr, out: &mut BTreeSet<String>) {
    match e {
        ClExpr::Eglobal(s, _) => {
            out.insert(s.clone());
        }
        ClExpr::Ederef(x, _) | ClExpr::Efield(x, _, _) | ClExpr::Eaddrof(x, _) | ClExpr::Eunop(_, x, _) | ClExpr::Ecast(x, _) => {
            globals_in(x, out)
        }
        ClExpr::Ebinop(_, a, b, _) => {
            globals_in(a, out);
            globals_in(b, out);
        }
        ClExpr::Econst(..) | ClExpr::Evar(..) => {}
    }
}

fn stmt_globals(s: &ClightStmt, out: &mut BTreeSet<String>) {
    match s {
        ClightStmt::Sset(_, _, e) | ClightStmt::Sifthenelse(e, ..) | ClightStmt::Sreturn(Some(e)) => globals_in(e, out),
        ClightStmt::Sassign(a, b) => {
            globals_in(a, out);
            globals_in(b, out);
        }
        ClightStmt::Scall(_, _, args) => args.iter().for_each(|a| globals_in(a, out)),
        _ => {}
    }
}

/// Reads the lifted functions and the surrounding declarations from a store
/// that has been through the Clight pass.
pub fn load_inputs(store: &Store) -> StoreResult<(Vec<FuncInput>, Unit)> {
    let types = store.types();
    let mut unit = Unit::default();
    for (t, _) in store.relation("signature")?.iter() {
        let (Some(name), Some(ps), Some(ret), Some(var), Some(origin)) =
            (t[0].as_text(), t[1].as_tuple(), t[2].as_type(), t[3].as_int(), t[4].as_text())
        else {
            continue;
        };
        let params = ps.iter().filter_map(|p| p.as_type()).collect();
        if origin == crate::analysis::ORIGIN_CALL {
            continue;
        }
        if origin == crate::analysis::ORIGIN_SEED {
            unit.externs.insert(name.to_string());
        }
        unit.protos.insert(name.to_string(), Proto { params, ret, variadic: var != 0 });
    }
    // Seeds are visible prototypes even for callees reached only through
    // builtins, such as `alloca`.
    for (name, (seed, _)) in seeds_in(store)? {
        if !unit.protos.contains_key(&name) {
            unit.externs.insert(name.clone());
            let proto = Proto { params: seed.params, ret: seed.ret, variadic: seed.variadic };
            unit.protos.insert(name, proto);
        }
    }
    let mut global_types: BTreeMap<String, Vec<TypeIdx>> = BTreeMap::new();
    for (t, _) in store.relation("global_type")?.iter() {
        if let (Some(s), Some(ty)) = (t[0].as_text(), t[1].as_type()) {
            global_types.entry(s.to_string()).or_default().push(ty);
        }
    }
    let mut var_types: BTreeMap<(String, u32), Vec<TypeIdx>> = BTreeMap::new();
    for (t, _) in store.relation("var_type")?.iter() {
        if let (Some(f), Some(x), Some(ty)) = (t[0].as_text(), t[1].as_int(), t[2].as_type()) {
            var_types.entry((f.to_string(), x as u32)).or_default().push(ty);
        }
    }
    let mut params: BTreeMap<String, Vec<(i64, u32)>> = BTreeMap::new();
    for (t, _) in store.relation("param")?.iter() {
        if let (Some(f), Some(i), Some(p)) = (t[0].as_text(), t[1].as_int(), t[2].as_int()) {
            params.entry(f.to_string()).or_default().push((i, p as u32));
        }
    }
    let mut exits: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for (t, _) in store.relation("region_exit")?.iter() {
        if let (Some(r), Some(x)) = (t[0].as_node(), t[1].as_node()) {
            exits.insert(r, x);
        }
    }
    let mut ite: BTreeMap<String, BTreeMap<NodeId, Option<NodeId>>> = BTreeMap::new();
    for (t, _) in store.relation("region")?.iter() {
        if let (Some(f), Some(REGION_ITE), Some(h), Some(rep)) = (t[0].as_text(), t[1].as_text(), t[2].as_node(), t[4].as_node()) {
            ite.entry(f.to_string()).or_default().insert(h, exits.get(&rep).copied());
        }
    }

    let mut funcs = Vec::new();
    let mut used = BTreeSet::new();
    for g in functions(store, IRLevel::Clight)? {
        let order = g.rpo();
        let mut cands = BTreeMap::new();
        for n in &order {
            let cs: Vec<ClightStmt> = store
                .relation("clight_stmt")?
                .with_first(&Value::Node(*n))
                .filter_map(|(t, _)| match t[1].as_stmt() {
                    Some(Stmt::Clight(c)) => Some(c.clone()),
                    _ => None,
                })
                .collect();
            for c in &cs {
                stmt_globals(c, &mut used);
            }
            if !cs.is_empty() {
                cands.insert(*n, cs);
            }
        }
        let var_cands = var_types
            .range((g.name.clone(), 0)..=(g.name.clone(), u32::MAX))
            .map(|((_, x), ts)| (*x, by_preference(types, ts.iter().copied())))
            .collect();
        let proto = unit.protos.get(&g.name);
        let mut ps = params.remove(&g.name).unwrap_or_default();
        ps.sort_unstable();
        let sig_params = proto.map(|p| p.params.clone()).unwrap_or_default();
        let params = ps.iter().zip(sig_params).map(|((_, v), t)| (*v, t)).collect();
        let ret = proto.map(|p| p.ret).unwrap_or(CTypeTable::VOID);
        let ite = ite.remove(&g.name).unwrap_or_default();
        funcs.push(FuncInput { name: g.name.clone(), graph: g, order, cands, params, ret, var_cands, ite });
    }
    for s in used {
        let decl = match global_types.get(&s) {
            Some(ts) => GlobalDecl::Data(by_preference(types, ts.iter().copied())[0]),
            None => GlobalDecl::Bytes,
        };
        unit.globals.insert(s, decl);
    }
    Ok((funcs, unit))
}



#[cfg(test)]
mod tests {
    use super::*;

    fn func(cands: Vec<(u64, Vec<ClightStmt>)>, var_cands: Vec<(u32, Vec<TypeIdx>)>) -> FuncInput {
        let nodes: Vec<NodeId> = cands.iter().map(|(n, _)| NodeId(*n)).collect();
        let graph = FuncGraph {
            name: "f".into(),
            entry: nodes[0],
            nodes: nodes.clone(),
            succ: BTreeMap::new(),
            pred: BTreeMap::new(),
        };
        FuncInput {
            name: "f".into(),
            graph,
            order: nodes,
            cands: cands.into_iter().map(|(n, c)| (NodeId(n), c)).collect(),
            params: vec![],
            ret: CTypeTable::VOID,
            var_cands: var_cands.into_iter().collect(),
            ite: BTreeMap::new(),
        }
    }

    #[test]
    fn clean_start_needs_one_call() {
        let types = CTypeTable::new();
        let s = ClightStmt::Sset(1, CTypeTable::INT, ClExpr::Econst(3, CTypeTable::INT));
        let f = func(vec![(1, vec![s])], vec![(1, vec![CTypeTable::INT])]);
        let sel = select_function(&types, &Unit::default(), &f, DEFAULT_BUDGET);
        assert!(sel.diags.is_empty());
        assert_eq!(sel.oracle_calls, 1);
    }

    #[test]
    fn pointer_int_error_is_repaired_directly() {
        let types = CTypeTable::new();
        let ip = types.pointer(CTypeTable::INT);
        // v1 prefers int*, but is assigned a multiplied long.
        let m = ClExpr::Ebinop(
            crate::ir::CBinop::Mul,
            Box::new(ClExpr::Evar(2, CTypeTable::LONG)),
            Box::new(ClExpr::Econst(3, CTypeTable::LONG)),
            CTypeTable::LONG,
        );
        let a = ClightStmt::Sset(1, ip, m.clone());
        let b = ClightStmt::Sset(1, CTypeTable::LONG, m);
        let f = func(vec![(1, vec![a, b])], vec![(1, vec![ip, CTypeTable::LONG]), (2, vec![CTypeTable::LONG])]);
        let sel = select_function(&types, &Unit::default(), &f, DEFAULT_BUDGET);
        assert!(sel.diags.is_empty(), "{:?}", sel.diags);
        assert!(sel.oracle_calls <= 2);
        assert_eq!(sel.config.decls[&1], CTypeTable::LONG);
    }

    #[test]
    fn budget_is_respected() {
        let types = CTypeTable::new();
        let s = ClightStmt::Scall(None, "nowhere".into(), vec![]);
        let f = func(vec![(1, vec![s])], vec![]);
        let sel = select_function(&types, &Unit::default(), &f, 1);
        assert_eq!(sel.oracle_calls, 1);
        assert_eq!(sel.diags.len(), 1);
    }
}

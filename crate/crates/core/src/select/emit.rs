//! C99 text for a selected configuration. Diamonds found by the structuring
//! pass print as `if`/`else`; every other edge is a `goto`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Configuration, FuncInput, GlobalDecl, Selection, Unit};
use crate::ir::{CBinop, CType, CTypeTable, ClExpr, ClightStmt, StructLayout, TypeIdx};
use crate::store::NodeId;

/// Program text plus, per line, the CFG node it came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    pub lines: Vec<Option<NodeId>>,
}

impl Rendered {
    fn push(&mut self, line: impl AsRef<str>, node: Option<NodeId>) {
        self.text.push_str(line.as_ref());
        self.text.push('\n');
        self.lines.push(node);
    }

    fn append(&mut self, other: Rendered) {
        self.text.push_str(&other.text);
        self.lines.extend(other.lines);
    }
}

/// A C identifier for an assembler symbol: `.LC0` becomes `_LC0`.
pub fn sanitize(sym: &str) -> String {
    let mut s: String = sym.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert(0, '_');
    }
    s
}

fn label(n: NodeId) -> String {
    format!("L_{:x}", n.0)
}

struct Printer<'a> {
    types: &'a CTypeTable,
    params: BTreeMap<u32, usize>,
}

const PRIMARY: u8 = 16;
const POSTFIX: u8 = 15;
const UNARY: u8 = 14;

fn prec(op: CBinop) -> u8 {
    use CBinop::*;
    match op {
        Mul | Div | Mod => 13,
        Add | Sub => 12,
        Shl | Shr => 11,
        Lt | Le | Gt | Ge => 10,
        Eq | Ne => 9,
        And => 8,
        Xor => 7,
        Or => 6,
    }
}

impl Printer<'_> {
    fn var(&self, v: u32) -> String {
        match self.params.get(&v) {
            Some(i) => format!("p{i}"),
            None => format!("v{v}"),
        }
    }

    fn constant(&self, n: i64, t: TypeIdx) -> String {
        let wide = self.types.size_of(t) == 8 && i32::try_from(n).is_err();
        let unsigned = self.types.is_integer(t) && !self.types.is_signed(t) && n > i32::MAX as i64;
        match (unsigned, wide) {
            (true, true) => format!("{n}UL"),
            (true, false) => format!("{n}U"),
            (false, true) => format!("{n}L"),
            (false, false) => n.to_string(),
        }
    }

    /// The expression text and its precedence level.
    fn expr(&self, e: &ClExpr) -> (String, u8) {
        match e {
            ClExpr::Econst(n, t) => (self.constant(*n, *t), if *n < 0 { UNARY } else { PRIMARY }),
            ClExpr::Evar(v, _) => (self.var(*v), PRIMARY),
            ClExpr::Eglobal(s, _) => (sanitize(s), PRIMARY),
            ClExpr::Efield(x, ofs, _) => match &**x {
                ClExpr::Ederef(p, _) => (format!("{}->{}", self.at(p, POSTFIX), StructLayout::field_name(*ofs)), POSTFIX),
                _ => (format!("{}.{}", self.at(x, POSTFIX), StructLayout::field_name(*ofs)), POSTFIX),
            },
            ClExpr::Ederef(x, _) => (format!("*{}", self.at(x, UNARY)), UNARY),
            ClExpr::Eaddrof(x, _) => (format!("&{}", self.at(x, UNARY)), UNARY),
            ClExpr::Eunop(op, x, _) => {
                let inner = self.at(x, UNARY);
                let inner = if inner.starts_with('-') { format!("({inner})") } else { inner };
                (format!("{}{inner}", op.symbol()), UNARY)
            }
            ClExpr::Ecast(x, t) => (format!("({}){}", self.types.c_name(*t), self.at(x, UNARY)), UNARY),
            ClExpr::Ebinop(op, a, b, _) => {
                let p = prec(*op);
                (format!("{} {} {}", self.at(a, p), op.symbol(), self.at(b, p + 1)), p)
            }
        }
    }

    /// `e` printed where at least precedence `min` is required.
    fn at(&self, e: &ClExpr, min: u8) -> String {
        let (s, p) = self.expr(e);
        if p < min {
            format!("({s})")
        } else {
            s
        }
    }

    fn show(&self, e: &ClExpr) -> String {
        self.expr(e).0
    }

    fn simple(&self, s: &ClightStmt) -> Option<String> {
        Some(match s {
            ClightStmt::Sset(v, _, e) => format!("{} = {};", self.var(*v), self.show(e)),
            ClightStmt::Sassign(l, r) => format!("{} = {};", self.show(l), self.show(r)),
            ClightStmt::Scall(d, f, args) => {
                let args: Vec<String> = args.iter().map(|a| self.show(a)).collect();
                let call = format!("{}({})", sanitize(f), args.join(", "));
                match d {
                    Some((v, _)) => format!("{} = {call};", self.var(*v)),
                    None => format!("{call};"),
                }
            }
            ClightStmt::Sreturn(Some(e)) => format!("return {};", self.show(e)),
            ClightStmt::Sreturn(None) => "return;".into(),
            _ => return None,
        })
    }
}

enum Line {
    Text(String, Option<NodeId>, usize),
    Label(NodeId),
}

struct Walker<'a> {
    f: &'a FuncInput,
    cfg: &'a Configuration,
    printer: Printer<'a>,
    visited: BTreeSet<NodeId>,
    pending: VecDeque<NodeId>,
    targets: BTreeSet<NodeId>,
    out: Vec<Line>,
}

impl Walker<'_> {
    fn stmt(&self, n: NodeId) -> Option<&ClightStmt> {
        Some(&self.f.cands.get(&n)?[*self.cfg.choice.get(&n)?])
    }

    fn text(&mut self, s: String, n: Option<NodeId>, depth: usize) {
        self.out.push(Line::Text(s, n, depth));
    }

    fn goto(&mut self, to: NodeId, from: Option<NodeId>, depth: usize) {
        self.targets.insert(to);
        self.text(format!("goto {};", label(to)), from, depth);
    }

    fn seq(&mut self, start: NodeId, stop: Option<NodeId>, depth: usize) {
        let mut cur = Some(start);
        while let Some(n) = cur {
            if Some(n) == stop {
                return;
            }
            if !self.visited.insert(n) {
                self.goto(n, None, depth);
                return;
            }
            self.out.push(Line::Label(n));
            let Some(s) = self.stmt(n).cloned() else {
                cur = self.f.graph.succs(n).next();
                continue;
            };
            match s {
                ClightStmt::Sifthenelse(c, t, e) => {
                    let cond = self.printer.show(&c);
                    let fresh = !self.visited.contains(&t) && !self.visited.contains(&e);
                    match self.f.ite.get(&n) {
                        Some(exit) if fresh => {
                            let exit = *exit;
                            if Some(t) == exit {
                                self.text(format!("if (!({cond})) {{"), Some(n), depth);
                                self.seq(e, exit, depth + 1);
                            } else {
                                self.text(format!("if ({cond}) {{"), Some(n), depth);
                                self.seq(t, exit, depth + 1);
                                if Some(e) != exit {
                                    self.text("} else {".into(), Some(n), depth);
                                    self.seq(e, exit, depth + 1);
                                }
                            }
                            self.text("}".into(), Some(n), depth);
                            cur = exit;
                        }
                        _ => {
                            self.targets.insert(t);
                            self.text(format!("if ({cond}) goto {};", label(t)), Some(n), depth);
                            if !self.visited.contains(&t) {
                                self.pending.push_back(t);
                            }
                            cur = Some(e);
                        }
                    }
                }
                ClightStmt::Sgoto(t) => cur = Some(t),
                ClightStmt::Sreturn(_) => {
                    let line = self.printer.simple(&s).unwrap_or_default();
                    self.text(line, Some(n), depth);
                    return;
                }
                other => {
                    if let Some(line) = self.printer.simple(&other) {
                        self.text(line, Some(n), depth);
                    }
                    cur = self.f.graph.succs(n).next();
                }
            }
        }
    }
}

fn indent(depth: usize) -> String {
    "    ".repeat(depth)
}

fn header(types: &CTypeTable, name: &str, params: &[TypeIdx], ret: TypeIdx, variadic: bool, named: bool) -> String {
    let mut ps: Vec<String> = params
        .iter()
        .enumerate()
        .map(|(i, t)| if named { types.declare(*t, &format!("p{i}")) } else { types.c_name(*t) })
        .collect();
    if variadic {
        ps.push("...".into());
    }
    if ps.is_empty() {
        ps.push("void".into());
    }
    types.declare(ret, &format!("{}({})", sanitize(name), ps.join(", ")))
}

/// One function definition under a configuration.
pub fn render_function(types: &CTypeTable, f: &FuncInput, cfg: &Configuration) -> Rendered {
    let params: BTreeMap<u32, usize> = f.params.iter().enumerate().map(|(i, (v, _))| (*v, i)).collect();
    let ptypes: Vec<TypeIdx> = f.params.iter().map(|(_, t)| *t).collect();
    let mut r = Rendered::default();
    r.push(header(types, &f.name, &ptypes, f.ret, false, true), None);
    r.push("{", None);
    let mut used = BTreeSet::new();
    for (_, s) in f.body(cfg) {
        used.extend(s.var_types().into_iter().map(|(v, _)| v));
    }
    for v in used {
        if params.contains_key(&v) {
            continue;
        }
        let t = cfg.decls.get(&v).copied().unwrap_or(CTypeTable::LONG);
        r.push(format!("    {};", types.declare(t, &format!("v{v}"))), None);
    }
    let mut w = Walker {
        f,
        cfg,
        printer: Printer { types, params },
        visited: BTreeSet::new(),
        pending: VecDeque::new(),
        targets: BTreeSet::new(),
        out: Vec::new(),
    };
    w.seq(f.graph.entry, None, 1);
    while let Some(n) = w.pending.pop_front() {
        if !w.visited.contains(&n) {
            w.seq(n, None, 1);
        }
    }
    for line in &w.out {
        match line {
            Line::Text(s, n, d) => r.push(format!("{}{s}", indent(*d)), *n),
            Line::Label(n) if w.targets.contains(n) => r.push(format!("{}: ;", label(*n)), Some(*n)),
            Line::Label(_) => {}
        }
    }
    r.push("}", None);
    r
}

fn collect_structs(types: &CTypeTable, t: TypeIdx, out: &mut BTreeSet<u32>) {
    match types.get(t) {
        CType::Pointer(p) => collect_structs(types, p, out),
        CType::Struct(id)
            if out.insert(id) => {
                for (_, f) in types.layout(id).fields {
                    collect_structs(types, f, out);
                }
            }
        _ => {}
    }
}

fn struct_def(types: &CTypeTable, id: u32, r: &mut Rendered) {
    let layout = types.layout(id);
    r.push(format!("struct s{id} {{"), None);
    let mut end = 0;
    for (ofs, t) in &layout.fields {
        if *ofs > end {
            r.push(format!("    char pad_{end}[{}];", ofs - end), None);
        }
        r.push(format!("    {};", types.declare(*t, &StructLayout::field_name(*ofs))), None);
        end = ofs + types.size_of(*t);
    }
    r.push("};", None);
}

fn called(f: &FuncInput, cfg: &Configuration, out: &mut BTreeSet<String>) {
    for (_, s) in f.body(cfg) {
        if let ClightStmt::Scall(_, name, _) = s {
            out.insert(name.clone());
        }
    }
}

/// The whole translation unit: struct definitions, external declarations,
/// prototypes, then definitions in input order.
pub fn render_unit(types: &CTypeTable, unit: &Unit, funcs: &[FuncInput], sels: &[Selection]) -> Rendered {
    let mut structs = BTreeSet::new();
    let mut calls = BTreeSet::new();
    let defined: BTreeSet<&str> = funcs.iter().map(|f| f.name.as_str()).collect();
    for (f, s) in funcs.iter().zip(sels) {
        for t in s.config.decls.values().chain(f.params.iter().map(|(_, t)| t)).chain([&f.ret]) {
            collect_structs(types, *t, &mut structs);
        }
        called(f, &s.config, &mut calls);
    }
    let externs: Vec<&String> =
        calls.iter().filter(|c| !defined.contains(c.as_str()) && unit.externs.contains(*c)).collect();
    for name in &externs {
        let p = &unit.protos[*name];
        for t in p.params.iter().chain([&p.ret]) {
            collect_structs(types, *t, &mut structs);
        }
    }
    for g in unit.globals.values() {
        if let GlobalDecl::Data(t) = g {
            collect_structs(types, *t, &mut structs);
        }
    }

    let mut r = Rendered::default();
    for id in &structs {
        struct_def(types, *id, &mut r);
        r.push("", None);
    }
    let mut decls = Vec::new();
    for name in externs {
        let p = &unit.protos[name];
        decls.push(format!("extern {};", header(types, name, &p.params, p.ret, p.variadic, false)));
    }
    for (sym, g) in &unit.globals {
        decls.push(match g {
            GlobalDecl::Data(t) => format!("extern {};", types.declare(*t, &sanitize(sym))),
            GlobalDecl::Bytes => format!("extern char {}[];", sanitize(sym)),
        });
    }
    for f in funcs {
        let ps: Vec<TypeIdx> = f.params.iter().map(|(_, t)| *t).collect();
        decls.push(format!("{};", header(types, &f.name, &ps, f.ret, false, false)));
    }
    if !decls.is_empty() {
        for d in decls {
            r.push(d, None);
        }
        r.push("", None);
    }
    for (i, (f, s)) in funcs.iter().zip(sels).enumerate() {
        if i > 0 {
            r.push("", None);
        }
        r.append(render_function(types, f, &s.config));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::flow::FuncGraph;

    #[test]
    fn empty_void_function() {
        let types = CTypeTable::new();
        let entry = NodeId(1);
        let f = FuncInput {
            name: "f".into(),
            graph: FuncGraph { name: "f".into(), entry, nodes: vec![entry], succ: BTreeMap::new(), pred: BTreeMap::new() },
            order: vec![entry],
            cands: BTreeMap::from([(entry, vec![ClightStmt::Sreturn(None)])]),
            params: vec![],
            ret: CTypeTable::VOID,
            var_cands: BTreeMap::new(),
            ite: BTreeMap::new(),
        };
        let cfg = f.configure(BTreeMap::new());
        let text = render_function(&types, &f, &cfg).text;
        let norm: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
        assert_eq!(norm, "void f(void) { return; }");
    }

    #[test]
    fn precedence_and_arrows() {
        let types = CTypeTable::new();
        let p = Printer { types: &types, params: BTreeMap::from([(1, 0)]) };
        let v = |x| Box::new(ClExpr::Evar(x, CTypeTable::INT));
        let sum = ClExpr::Ebinop(CBinop::Add, v(2), v(3), CTypeTable::INT);
        let prod = ClExpr::Ebinop(CBinop::Mul, Box::new(sum), v(4), CTypeTable::INT);
        assert_eq!(p.show(&prod), "(v2 + v3) * v4");
        let field = ClExpr::Efield(Box::new(ClExpr::Ederef(v(1), CTypeTable::INT)), 4, CTypeTable::FLOAT);
        assert_eq!(p.show(&field), "p0->ofs_4");
        let sub = ClExpr::Ebinop(CBinop::Sub, v(2), Box::new(ClExpr::Ebinop(CBinop::Sub, v(3), v(4), CTypeTable::INT)), CTypeTable::INT);
        assert_eq!(p.show(&sub), "v2 - (v3 - v4)");
        assert_eq!(sanitize(".LC0"), "_LC0");
    }
}

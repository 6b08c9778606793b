//! RTL → Cminor expression trees, then Cminor → Csharpminor with addressing
//! modes spelled out as pointer arithmetic.

use super::flow::{functions, stmts_at};
use super::diag_tuple;
use crate::analysis::{sel_fact, selected_rtl};
use crate::engine::{premise, Emitter, EngineResult, Pass};
use crate::ir::{Addressing, BinOp, CExpr, CshStmt, IRLevel, Operation, RSrc, RtlInst, Stmt};
use crate::store::{NodeId, Store, Value};

pub const EXPR_PASS: &str = "build_expr_trees";
pub const CSH_PASS: &str = "to_csharpminor";

fn var(p: u32) -> CExpr {
    CExpr::Evar(p)
}

/// Expression of an operation applied to `args`, by arity.
pub fn op_expr(op: &Operation, args: &[u32]) -> Result<CExpr, String> {
    let arg = |i: usize| args.get(i).copied().map(var).ok_or_else(|| format!("{} is missing operand {i}", op_name(op)));
    Ok(match op {
        Operation::Ointconst(n) | Operation::Olongconst(n) => CExpr::Econst(*n),
        Operation::Omove => arg(0)?,
        Operation::Oaddrsymbol(s, 0) => CExpr::Eaddrsym(s.clone()),
        Operation::Oaddrsymbol(s, d) => CExpr::binop(BinOp::Oaddl, CExpr::Eaddrsym(s.clone()), CExpr::Econst(*d)),
        Operation::Unop(u) => CExpr::Eunop(*u, Box::new(arg(0)?)),
        Operation::Binop(b) => CExpr::binop(*b, arg(0)?, arg(1)?),
        Operation::Binimm(b, n) => CExpr::binop(*b, arg(0)?, CExpr::Econst(*n)),
        Operation::Ocmp(c) => {
            let rhs = match c.imm {
                Some(n) => CExpr::Econst(n),
                None => arg(1)?,
            };
            CExpr::Ecmp(c.kind, c.cmp, Box::new(arg(0)?), Box::new(rhs))
        }
        Operation::Olea(a) => CExpr::Eaddr(a.clone(), args.iter().copied().map(var).collect()),
        Operation::Oaddrstack(_) | Operation::Odivmod(_) => return Err(format!("no expression form for {}", op_name(op))),
    })
}

fn op_name(op: &Operation) -> String {
    use crate::term::Textual;
    op.render()
}

/// The Cminor statement for one RTL instruction.
pub fn expr_tree(i: &RtlInst) -> Result<CshStmt, String> {
    let addr = |a: &Addressing, args: &[u32]| CExpr::Eaddr(a.clone(), args.iter().copied().map(var).collect());
    Ok(match i {
        RtlInst::Iop(op, args, d) => CshStmt::Sset(*d, op_expr(op, args)?),
        RtlInst::Iload(c, a, args, d) => CshStmt::Sset(*d, CExpr::Eload(*c, Box::new(addr(a, args)))),
        RtlInst::Istore(c, a, args, s) => {
            let v = match s {
                RSrc::Pseudo(p) => var(*p),
                RSrc::Imm(n) => CExpr::Econst(*n),
            };
            CshStmt::Sstore(*c, addr(a, args), v)
        }
        RtlInst::Icall(f, args, d) | RtlInst::Ibuiltin(f, args, d) => {
            CshStmt::Scall(*d, f.clone(), args.iter().copied().map(var).collect())
        }
        RtlInst::Icond(c, args, t, f) => {
            let e = op_expr(&Operation::Ocmp(*c), args)?;
            CshStmt::Sifthenelse(e, *t, *f)
        }
        RtlInst::Ireturn(r) => CshStmt::Sreturn(r.map(var)),
        RtlInst::Igoto(t) => CshStmt::Sgoto(*t),
        RtlInst::Inop => CshStmt::Sskip,
    })
}

fn plus(e: CExpr, d: i64) -> CExpr {
    if d == 0 {
        e
    } else {
        CExpr::binop(BinOp::Oaddl, e, CExpr::Econst(d))
    }
}

/// Explicit address arithmetic for an addressing mode.
pub fn address(a: &Addressing, args: &[CExpr]) -> Result<CExpr, String> {
    let arg = |i: usize| args.get(i).cloned().ok_or_else(|| format!("addressing mode is missing operand {i}"));
    let scaled = |e: CExpr, s: i64| if s == 1 { e } else { CExpr::binop(BinOp::Omull, e, CExpr::Econst(s)) };
    Ok(match a {
        Addressing::Aindexed(d) => plus(arg(0)?, *d),
        Addressing::Aindexed2(d) => plus(CExpr::binop(BinOp::Oaddl, arg(0)?, arg(1)?), *d),
        Addressing::Aindexed2scaled(s, d) => plus(CExpr::binop(BinOp::Oaddl, arg(0)?, scaled(arg(1)?, *s)), *d),
        Addressing::Ascaled(s, d) => plus(scaled(arg(0)?, *s), *d),
        Addressing::Aglobal(sym, d) => plus(CExpr::Eaddrsym(sym.clone()), *d),
        Addressing::Ainstack(d) => return Err(format!("stack address {d} has no variable")),
    })
}

fn lower(e: &CExpr) -> Result<CExpr, String> {
    let b = |x: &CExpr| lower(x).map(Box::new);
    Ok(match e {
        CExpr::Eaddr(a, args) => {
            let args = args.iter().map(lower).collect::<Result<Vec<_>, _>>()?;
            address(a, &args)?
        }
        CExpr::Eunop(u, x) => CExpr::Eunop(*u, b(x)?),
        CExpr::Ebinop(o, x, y) => CExpr::Ebinop(*o, b(x)?, b(y)?),
        CExpr::Ecmp(k, c, x, y) => CExpr::Ecmp(*k, *c, b(x)?, b(y)?),
        CExpr::Eload(c, x) => CExpr::Eload(*c, b(x)?),
        other => other.clone(),
    })
}

/// Csharpminor form of a Cminor statement.
pub fn to_csh(s: &CshStmt) -> Result<CshStmt, String> {
    Ok(match s {
        CshStmt::Sset(d, e) => CshStmt::Sset(*d, lower(e)?),
        CshStmt::Sstore(c, a, v) => CshStmt::Sstore(*c, lower(a)?, lower(v)?),
        CshStmt::Scall(d, f, args) => CshStmt::Scall(*d, f.clone(), args.iter().map(lower).collect::<Result<_, _>>()?),
        CshStmt::Sifthenelse(e, t, f) => CshStmt::Sifthenelse(lower(e)?, *t, *f),
        CshStmt::Sreturn(Some(e)) => CshStmt::Sreturn(Some(lower(e)?)),
        other => other.clone(),
    })
}

/// Copies a level's edges, entry and exits to the next level for the nodes
/// that received a statement there.
pub(crate) fn copy_graph(
    store: &Store,
    em: &mut Emitter,
    from: IRLevel,
    to: IRLevel,
    lifted: &std::collections::BTreeMap<NodeId, Stmt>,
) -> EngineResult<()> {
    let (from_edges, to_edges) = (crate::ir::schema::edge_name(from), crate::ir::schema::edge_name(to));
    let to_rel = crate::ir::schema::principal_name(to);
    let stmt_fact = |n: NodeId| premise(to_rel, vec![n.into(), Value::stmt(lifted[&n].clone())]);
    for (t, _) in store.relation(from_edges)?.iter() {
        let (Some(a), Some(b)) = (t[0].as_node(), t[1].as_node()) else { continue };
        if lifted.contains_key(&a) && lifted.contains_key(&b) {
            em.derive(to_edges, t.clone(), "copy_edge", vec![premise(from_edges, t.clone()), stmt_fact(a), stmt_fact(b)]);
        }
    }
    for rel in ["cfg_entry", "cfg_exit"] {
        for (t, _) in store.relation(rel)?.iter() {
            let Some(n) = t[2].as_node() else { continue };
            if t[0].as_text() == Some(from.name()) && lifted.contains_key(&n) {
                em.derive(
                    rel,
                    vec![Value::text(to.name()), t[1].clone(), t[2].clone()],
                    "copy_marker",
                    vec![premise(rel, t.clone()), stmt_fact(n)],
                );
            }
        }
    }
    Ok(())
}

fn build(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    let mut lifted = std::collections::BTreeMap::new();
    for g in functions(store, IRLevel::Rtl)? {
        for (n, i) in selected_rtl(store, &g)? {
            let src = sel_fact(store, n)?;
            match expr_tree(&i) {
                Ok(s) => {
                    let s = Stmt::Cminor(s);
                    em.derive("cminor_stmt", vec![n.into(), Value::stmt(s.clone())], "expr_tree", vec![src]);
                    lifted.insert(n, s);
                }
                Err(m) => em.derive("diag", diag_tuple(n, EXPR_PASS, "error", m), "unsupported", vec![src]),
            }
        }
    }
    copy_graph(store, em, IRLevel::Rtl, IRLevel::Cminor, &lifted)
}

/// Expression trees by operator arity.
pub fn build_expr_trees() -> Pass {
    Pass::procedural(
        EXPR_PASS,
        &["rtl_inst", "rtl_opt", "rtl_sel", "rtl_succ", "cfg_entry", "cfg_exit"],
        &["cminor_stmt", "cminor_succ", "cfg_entry", "cfg_exit", "diag"],
        build,
    )
}

fn convert(store: &Store, em: &mut Emitter) -> EngineResult<()> {
    let mut lifted = std::collections::BTreeMap::new();
    for g in functions(store, IRLevel::Cminor)? {
        for n in &g.nodes {
            for s in stmts_at(store, "cminor_stmt", *n)? {
                let Stmt::Cminor(c) = &s else { continue };
                let src = premise("cminor_stmt", vec![(*n).into(), Value::stmt(s.clone())]);
                match to_csh(c) {
                    Ok(c) => {
                        let s = Stmt::Csh(c);
                        em.derive("csh_stmt", vec![(*n).into(), Value::stmt(s.clone())], "explicit_address", vec![src]);
                        lifted.insert(*n, s);
                    }
                    Err(m) => em.derive("diag", diag_tuple(*n, CSH_PASS, "error", m), "unsupported", vec![src]),
                }
            }
        }
    }
    copy_graph(store, em, IRLevel::Cminor, IRLevel::Csharpminor, &lifted)
}

/// Addressing modes become explicit pointer arithmetic.
pub fn to_csharpminor() -> Pass {
    Pass::procedural(
        CSH_PASS,
        &["cminor_stmt", "cminor_succ", "cfg_entry", "cfg_exit"],
        &["csh_stmt", "csh_succ", "cfg_entry", "cfg_exit", "diag"],
        convert,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Chunk, UnOp};
    use crate::term::Textual;

    #[test]
    fn dispatch_by_arity() {
        let s = expr_tree(&RtlInst::Iop(Operation::Ointconst(4), vec![], 1)).unwrap();
        assert_eq!(s, CshStmt::Sset(1, CExpr::Econst(4)));
        let s = expr_tree(&RtlInst::Iop(Operation::Omove, vec![2], 3)).unwrap();
        assert_eq!(s, CshStmt::Sset(3, CExpr::Evar(2)));
        let s = expr_tree(&RtlInst::Iop(Operation::Binop(BinOp::Oaddl), vec![1, 2], 3)).unwrap();
        assert_eq!(s.render(), "Sset(v3, Oaddl(v1, v2))");
        let s = expr_tree(&RtlInst::Iop(Operation::Unop(UnOp::Oneg), vec![1], 2)).unwrap();
        assert_eq!(s.render(), "Sset(v2, Oneg(v1))");
    }

    #[test]
    fn addressing_becomes_arithmetic() {
        let load = expr_tree(&RtlInst::Iload(Chunk::MFloat32, Addressing::Aindexed(4), vec![1], 5)).unwrap();
        assert_eq!(to_csh(&load).unwrap().render(), "Sset(v5, Eload(MFloat32, Oaddl(v1, 4)))");
        let load = expr_tree(&RtlInst::Iload(Chunk::MInt32, Addressing::Aindexed(0), vec![1], 3)).unwrap();
        assert_eq!(to_csh(&load).unwrap().render(), "Sset(v3, Eload(MInt32, v1))");
        let g = expr_tree(&RtlInst::Iload(Chunk::MInt32, Addressing::Aglobal("counter".into(), 0), vec![], 2)).unwrap();
        assert_eq!(to_csh(&g).unwrap().render(), "Sset(v2, Eload(MInt32, Eaddrsym(\"counter\")))");
    }
}

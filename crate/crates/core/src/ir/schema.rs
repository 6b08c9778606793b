//! The global relation schema.

use super::IRLevel;
use crate::store::{RelationSchema, ValueTag};

use ValueTag::*;

/// Principal statement relation of a level above assembly.
pub fn principal_name(level: IRLevel) -> &'static str {
    match level {
        IRLevel::Asm => "instr",
        IRLevel::Mach => "mach_inst",
        IRLevel::Ltl => "ltl_inst",
        IRLevel::Rtl => "rtl_inst",
        IRLevel::Cminor => "cminor_stmt",
        IRLevel::Csharpminor => "csh_stmt",
        IRLevel::Clight => "clight_stmt",
    }
}

/// Edge relation of a level.
pub fn edge_name(level: IRLevel) -> &'static str {
    match level {
        IRLevel::Asm => "next_instr",
        IRLevel::Mach => "mach_succ",
        IRLevel::Ltl => "ltl_succ",
        IRLevel::Rtl => "rtl_succ",
        IRLevel::Cminor => "cminor_succ",
        IRLevel::Csharpminor => "csh_succ",
        IRLevel::Clight => "clight_succ",
    }
}

pub const EDGE_FALLTHROUGH: &str = "fallthrough";
pub const EDGE_TRUE: &str = "branch-true";
pub const EDGE_FALSE: &str = "branch-false";
pub const EDGE_CALL: &str = "call-return";

fn edge(level: IRLevel) -> RelationSchema {
    RelationSchema::new(edge_name(level), &[("from", Node), ("to", Node), ("kind", Text)]).at_level(level)
}

fn stmts(level: IRLevel) -> RelationSchema {
    RelationSchema::new(principal_name(level), &[("node", Node), ("stmt", Stmt)]).principal(level)
}

pub fn level_schemas() -> Vec<RelationSchema> {
    use IRLevel::*;
    let mut v = vec![
        RelationSchema::new(
            "instr",
            &[("node", Node), ("func", Text), ("mnemonic", Text), ("ops", Tuple)],
        )
        .principal(Asm),
        RelationSchema::new("next_instr", &[("from", Node), ("to", Node)]).at_level(Asm),
        RelationSchema::new("func", &[("name", Text), ("entry", Node)]).at_level(Asm),
        RelationSchema::new("reg_map", &[("name", Text), ("reg", Reg)]).at_level(Asm),
        RelationSchema::new(
            "sig_seed",
            &[("name", Text), ("params", Tuple), ("ret", Type), ("variadic", Int)],
        ),
        RelationSchema::new("node_func", &[("node", Node), ("func", Text)]),
        RelationSchema::new(
            "diag",
            &[("node", Node), ("pass", Text), ("severity", Text), ("message", Text)],
        ),
        RelationSchema::new("cfg_entry", &[("level", Text), ("func", Text), ("node", Node)]),
        RelationSchema::new("cfg_exit", &[("level", Text), ("func", Text), ("node", Node)]),
        // Stack frame.
        RelationSchema::new("frame", &[("func", Text), ("size", Int), ("saved", Tuple)]).at_level(Ltl),
        RelationSchema::new(
            "slot_desc",
            &[("func", Text), ("ofs", Int), ("kind", Text), ("width", Int), ("spill", Int)],
        )
        .at_level(Ltl),
        RelationSchema::new("slot_du", &[("func", Text), ("def", Node), ("use", Node), ("ofs", Int)])
            .at_level(Ltl),
        RelationSchema::new("slot_live", &[("node", Node), ("ofs", Int)]).at_level(Ltl),
        RelationSchema::new("slot_dead", &[("node", Node), ("ofs", Int)]).at_level(Ltl),
        RelationSchema::new(
            "call_info",
            &[("node", Node), ("callee", Text), ("int_args", Int), ("float_args", Int), ("ret", Text)],
        )
        .at_level(Ltl),
        RelationSchema::new(
            "def_site",
            &[("func", Text), ("int_params", Int), ("float_params", Int), ("ret", Text)],
        )
        .at_level(Ltl),
        // Pseudo-registers.
        RelationSchema::new(
            "pseudo_map",
            &[("func", Text), ("node", Node), ("reg", Reg), ("pseudo", Int)],
        )
        .at_level(Rtl),
        RelationSchema::new("var_width", &[("func", Text), ("var", Int), ("type", Type)]).at_level(Rtl),
        RelationSchema::new("slot_var", &[("func", Text), ("ofs", Int), ("pseudo", Int)]).at_level(Rtl),
        RelationSchema::new("param", &[("func", Text), ("index", Int), ("pseudo", Int)]).at_level(Rtl),
        RelationSchema::new("rtl_opt", &[("node", Node), ("gen", Int), ("stmt", Stmt)]).at_level(Rtl),
        RelationSchema::new("rtl_sel", &[("node", Node), ("gen", Int)]).at_level(Rtl),
        RelationSchema::new("rtl_dead", &[("node", Node), ("pseudo", Int)]).at_level(Rtl),
        // Types.
        RelationSchema::new(
            "type_ev",
            &[("func", Text), ("var", Int), ("type", Type), ("source", Text)],
        ),
        RelationSchema::new(
            "deref",
            &[("func", Text), ("base", Int), ("ofs", Int), ("type", Type), ("node", Node)],
        ),
        RelationSchema::new("copy_edge", &[("func", Text), ("dst", Int), ("src", Int)]),
        RelationSchema::new("var_type", &[("func", Text), ("var", Int), ("type", Type)]),
        RelationSchema::new(
            "struct_hyp",
            &[("func", Text), ("base", Int), ("type", Type), ("degenerate", Int)],
        ),
        RelationSchema::new(
            "array_hyp",
            &[("func", Text), ("base", Int), ("elem", Type), ("stride", Int)],
        ),
        RelationSchema::new(
            "signature",
            &[("name", Text), ("params", Tuple), ("ret", Type), ("variadic", Int), ("origin", Text)],
        ),
        RelationSchema::new("global_type", &[("sym", Text), ("type", Type)]),
        RelationSchema::new(
            "region",
            &[("func", Text), ("kind", Text), ("header", Node), ("members", Tuple), ("rep", Node)],
        )
        .at_level(Csharpminor),
        RelationSchema::new("region_exit", &[("rep", Node), ("exit", Node)]).at_level(Csharpminor),
    ];
    for level in [Mach, Ltl, Rtl, Cminor, Csharpminor, Clight] {
        v.push(stmts(level));
        v.push(edge(level));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn one_principal_per_level() {
        let schemas = level_schemas();
        for level in IRLevel::ALL {
            let n = schemas.iter().filter(|s| s.principal && s.level == Some(*level)).count();
            assert_eq!(n, 1, "{level}");
        }
        let mach = schemas.iter().find(|s| s.name == "mach_inst").unwrap();
        assert!(mach.principal);
        let cols: Vec<_> = mach.columns.iter().map(|c| c.0.as_str()).collect();
        assert_eq!(cols, ["node", "stmt"]);
        assert!(schemas.iter().any(|s| s.name == "clight_succ"));
        let names: BTreeSet<_> = schemas.iter().map(|s| &s.name).collect();
        assert_eq!(names.len(), schemas.len());
    }
}

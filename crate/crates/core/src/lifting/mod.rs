//! Decompile passes, from recognized instructions up to typed Clight
//! candidates.

mod asm;
mod clight;
mod cminor;
pub mod flow;
mod mach;
mod pseudo;
mod stack;
mod structure;

pub use clight::{emit_clight, enumerate, Lifter, CLIGHT_PASS, DEFAULT_CANDIDATE_CAP};
pub use cminor::{address, build_expr_trees, expr_tree, op_expr, to_csh, to_csharpminor, CSH_PASS, EXPR_PASS};
pub use asm::{build_cfg_mach, lift_asm_to_mach, EDGE_JUMP, LIFT_PASS, MACH_CFG_PASS};
pub use mach::{is_flag_user, lift_flag_user, lift_instruction, Lift};
pub(crate) use mach::operands;
pub use pseudo::{recover_pseudoregs, widths, width_of, CallConv, PSEUDO_PASS};
pub use stack::{build_cfg_ltl, normalize_stack, recognize_prologue, to_ltl, Frame, LTL_CFG_PASS, STACK_PASS};
pub use structure::{
    ipdom, natural_loops, regions, structure_cfg, Region, REGION_ITE, REGION_LOOP, REGION_SWITCH, STRUCTURE_PASS,
};

use crate::engine::EngineError;
use crate::store::{NodeId, Tuple, Value};

pub(crate) fn diag_tuple(n: NodeId, pass: &str, severity: &str, message: impl Into<String>) -> Tuple {
    vec![n.into(), Value::text(pass), Value::text(severity), Value::text(message.into())]
}

pub(crate) fn str_err(pass: &str, message: impl Into<String>) -> EngineError {
    EngineError::Procedural { pass: pass.to_string(), message: message.into() }
}

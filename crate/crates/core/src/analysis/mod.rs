//! Analysis passes feeding the lifters: frame and call evidence, RTL
//! optimization, types, structs, signatures and alloca recognition.

mod alloca;
mod frame;
mod rtlopt;
pub mod seeds;
mod signatures;
mod structs;
mod types;

pub use alloca::{match_alloca, recognize_alloca, ALLOCA_PASS};
pub use frame::{collect_call_evidence, stack_frame_analysis, CALL_PASS, FRAME_PASS, RET_FLOAT, RET_INT, RET_VOID};
pub(crate) use frame::ltl_insts;
pub use rtlopt::{rtl_optimize, selected_rtl, RTL_OPT_PASS};
pub use signatures::{by_preference, rank, reconcile_signatures, widest, ORIGIN_CALL, ORIGIN_DEF, ORIGIN_SEED, SIG_PASS};
pub use structs::{classify_accesses, recover_structs, Shape, STRUCT_PASS};
pub use types::{
    chunk_ctype, evidence, function_vars, type_defaults, type_evidence, type_propagation, Evidence, DEFAULTS_PASS,
    TYPE_EV_PASS,
};
pub(crate) use types::sel_fact;

//! The decompile pipeline as an ordered pass list, and helpers to run it on
//! a listing.

use crate::analysis::seeds::{load_seeds, parse_seeds, DEFAULT_SEEDS};
use crate::analysis::{
    collect_call_evidence, recognize_alloca, reconcile_signatures, recover_structs, rtl_optimize, stack_frame_analysis,
    type_defaults, type_evidence, type_propagation,
};
use crate::engine::{run_pipeline, EngineResult, Pass};
use crate::frontend::{parse_listing, to_edb};
use crate::lifting::{
    build_cfg_ltl, build_cfg_mach, build_expr_trees, emit_clight, lift_asm_to_mach, normalize_stack, recover_pseudoregs,
    structure_cfg, to_csharpminor, DEFAULT_CANDIDATE_CAP,
};
use crate::provenance::SemiringTag;
use crate::select::{load_inputs, render_unit, select_all, FuncInput, Rendered, Selection, Unit, DEFAULT_BUDGET};
use crate::store::Store;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Options {
    pub semiring: SemiringTag,
    /// Recognize `sub %reg,%rsp; mov %rsp,%dst` as a dynamic allocation.
    pub alloca: bool,
    /// Clight candidates kept per statement.
    pub max_candidates: usize,
    /// Oracle calls allowed per function during selection.
    pub budget: usize,
    /// Threads for per-function selection.
    pub workers: usize,
    /// Keep the rule-firing log so derivation trees can be rebuilt.
    pub witness: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            semiring: SemiringTag::Count, alloca: true, max_candidates: DEFAULT_CANDIDATE_CAP,
            budget: DEFAULT_BUDGET,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            witness: false,
        }
    }
}

pub fn passes(opts: &Options) -> EngineResult<Vec<Pass>> {
    let mut v = vec![lift_asm_to_mach()?];
    if opts.alloca {
        v.push(recognize_alloca()?);
    }
    v.extend([
        build_cfg_mach()?,
        normalize_stack(),
        build_cfg_ltl(),
        stack_frame_analysis(),
        collect_call_evidence(),
        recover_pseudoregs(),
        rtl_optimize(),
        type_evidence(),
        recover_structs(),
        type_propagation("type_propagation")?,
        reconcile_signatures(),
        type_propagation("type_closure")?,
        type_defaults(),
        build_expr_trees(),
        to_csharpminor(),
        structure_cfg(),
        emit_clight(opts.max_candidates),
    ]);
    Ok(v)
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frontend(#[from] crate::frontend::FrontendError),
    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
    #[error(transparent)]
    Seeds(#[from] crate::analysis::seeds::SeedError),
}

/// Builds the extensional store for a listing, with the bundled seeds plus
/// any extra seed text.
pub fn load(listing: &str, extra_seeds: Option<&str>, opts: &Options) -> Result<Store, PipelineError> {
    let blocks = parse_listing(listing)?;
    let mut store = to_edb(&blocks, opts.semiring)?;
    let mut seeds = parse_seeds(store.types(), DEFAULT_SEEDS)?;
    if let Some(extra) = extra_seeds {
        let more = parse_seeds(store.types(), extra)?;
        seeds.retain(|s| !more.iter().any(|m| m.name == s.name));
        seeds.extend(more);
    }
    load_seeds(&mut store, &seeds)?;
    Ok(store)
}

/// Runs every pass on a fresh store for `listing`.
pub fn run(listing: &str, extra_seeds: Option<&str>, opts: &Options) -> Result<Store, PipelineError> {
    let mut store = load(listing, extra_seeds, opts)?;
    if opts.witness {
        store.enable_firing_log();
    }
    run_pipeline(&passes(opts)?, &mut store)?;
    Ok(store)
}

/// The store after every pass, the selected configurations and the C text.
#[derive(Debug)]
pub struct Decompiled {
    pub store: Store,
    pub funcs: Vec<FuncInput>,
    pub unit: Unit,
    pub selections: Vec<Selection>,
    pub c: Rendered,
}

impl Decompiled {
    /// Functions whose selected configuration still has diagnostics.
    pub fn failing(&self) -> impl Iterator<Item = &Selection> {
        self.selections.iter().filter(|s| !s.diags.is_empty())
    }
}

/// Runs the passes, selects a configuration per function and prints C.
pub fn decompile(listing: &str, extra_seeds: Option<&str>, opts: &Options) -> Result<Decompiled, PipelineError> {
    let store = run(listing, extra_seeds, opts)?;
    let (funcs, unit) = load_inputs(&store)?;
    let selections = select_all(store.types(), &unit, &funcs, opts.budget, opts.workers);
    let c = render_unit(store.types(), &unit, &funcs, &selections);
    Ok(Decompiled { store, funcs, unit, selections, c })
}

//! Fixture corpus shared by the benchmarks.

/// `(name, listing)` for every bundled fixture.
pub fn corpus() -> Vec<(&'static str, &'static str)> {
    vec![
        ("arith", include_str!("../../core/fixtures/arith.lst")),
        ("branches", include_str!("../../core/fixtures/branches.lst")),
        ("calls", include_str!("../../core/fixtures/calls.lst")),
        ("classify", include_str!("../../core/fixtures/classify.lst")),
        ("globals", include_str!("../../core/fixtures/globals.lst")),
        ("loops", include_str!("../../core/fixtures/loops.lst")),
        ("structs", include_str!("../../core/fixtures/structs.lst")),
        ("vla", include_str!("../../core/fixtures/vla.lst")),
    ]
}

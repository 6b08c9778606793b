mod common;

use std::process::Command;

use common::{fixture, FIXTURES};
use supdec::frontend::{parse_listing, render_listing};
use supdec::pipeline::{decompile, run, Options};
use supdec::provenance::SemiringTag;
use supdec::store::dump::{load_files, render_files};

fn opts(semiring: SemiringTag) -> Options {
    Options { semiring, workers: 2, ..Options::default() }
}

#[test]
fn every_fixture_decompiles_without_diagnostics() {
    for name in FIXTURES {
        let d = decompile(&fixture(name), None, &opts(SemiringTag::Count)).unwrap();
        let failing: Vec<_> = d.failing().map(|s| (s.function.clone(), s.diags.len())).collect();
        assert!(failing.is_empty(), "{name}: {failing:?}");
        assert!(!d.selections.is_empty(), "{name}: no functions");
    }
}

#[test]
fn semiring_choice_does_not_change_output() {
    for name in FIXTURES {
        let base = decompile(&fixture(name), None, &opts(SemiringTag::Prov)).unwrap().c.text;
        for tag in [SemiringTag::Bool, SemiringTag::Count] {
            let other = decompile(&fixture(name), None, &opts(tag)).unwrap().c.text;
            assert_eq!(base, other, "{name} under {tag}");
        }
    }
}

#[test]
fn listing_render_parse_round_trip() {
    for name in FIXTURES {
        let blocks = parse_listing(&fixture(name)).unwrap();
        let again = parse_listing(&render_listing(&blocks)).unwrap();
        assert_eq!(blocks, again, "{name}");
    }
}

#[test]
fn dump_reload_is_identity() {
    for tag in [SemiringTag::Bool, SemiringTag::Count, SemiringTag::Prov] {
        let store = run(&fixture("classify"), None, &opts(tag)).unwrap();
        let files = render_files(&store, None).unwrap();
        let back = load_files(&files).unwrap();
        assert_eq!(files, render_files(&back, None).unwrap(), "{tag}");
    }
}

#[test]
fn bad_listing_is_rejected() {
    assert!(decompile("f:\n\tfrobnicate %rax\n", None, &opts(SemiringTag::Count)).is_err());
}

#[test]
fn output_compiles_with_system_cc() {
    let Ok(out) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    if !out.status.success() {
        return;
    }
    let dir = std::env::temp_dir().join(format!("supdec-cc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for name in FIXTURES {
        let c = decompile(&fixture(name), None, &opts(SemiringTag::Count)).unwrap().c.text;
        let path = dir.join(format!("{name}.c"));
        std::fs::write(&path, &c).unwrap();
        let status = Command::new("cc")
            .args(["-std=c99", "-fsyntax-only", "-Werror=implicit-function-declaration", "-Werror=int-conversion"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success(), "{name}:\n{c}");
    }
    let _ = std::fs::remove_dir_all(&dir);
}

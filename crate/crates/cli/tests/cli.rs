use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use supdec::store::dump::load;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(format!("{name}.lst"))
}

fn supdec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supdec")).args(args).output().unwrap()
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("supdec-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decompile_writes_c_and_report() {
    let dir = scratch("basic");
    let out = dir.join("classify.c");
    let r = supdec(&["decompile", s(&fixture("classify")), "-o", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let c = std::fs::read_to_string(&out).unwrap();
    assert!(c.contains("float classify(struct s0 *p0)"), "{c}");
    let report = std::fs::read_to_string(dir.join("classify.c.report")).unwrap();
    assert!(report.contains("summary\t1/1 functions"), "{report}");
}

#[test]
fn semirings_give_identical_c() {
    let dir = scratch("semiring");
    let mut texts = Vec::new();
    for k in ["bool", "count", "prov"] {
        let out = dir.join(format!("{k}.c"));
        let r = supdec(&["decompile", s(&fixture("branches")), "-o", s(&out), "--semiring", k]);
        assert!(r.status.success(), "{k}: {}", String::from_utf8_lossy(&r.stderr));
        texts.push(std::fs::read_to_string(&out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    assert_eq!(texts[1], texts[2]);
}

#[test]
fn stats_prints_histogram_and_pass_table() {
    let dir = scratch("stats");
    let r = supdec(&["decompile", s(&fixture("loops")), "-o", s(&dir.join("o.c")), "--stats"]);
    assert!(r.status.success());
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.starts_with("candidates\tnodes\n1\t"), "{text}");
    assert!(text.contains("single-candidate fraction\t"));
    assert!(text.contains("\nemit_clight\t"));
    assert!(text.contains("select\toracle calls\t"));
}

#[test]
fn dump_reloads() {
    let dir = scratch("dump");
    let out = dir.join("o.c");
    let r = supdec(&["decompile", s(&fixture("structs")), "-o", s(&out), "--dump", "clight", "--emit-facts", s(&dir.join("all"))]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let full = load(&dir.join("all")).unwrap();
    assert!(full.len("clight_stmt") > 0);
    let level = std::fs::read_dir(dir.join("o.c.dump")).unwrap().count();
    assert_eq!(level, 1);
}

#[test]
fn witness_file_has_trees() {
    let dir = scratch("witness");
    let out = dir.join("o.c");
    let r = supdec(&["decompile", s(&fixture("arith")), "-o", s(&out), "--witness"]);
    assert!(r.status.success());
    let w = std::fs::read_to_string(dir.join("o.c.witness")).unwrap();
    assert!(w.lines().any(|l| l.starts_with("# ")));
    assert!(w.contains("clight_stmt"));
}

#[test]
fn query_reports_zero_for_no_match() {
    let r = supdec(&["query", s(&fixture("classify")), "func", "name=nosuch"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(String::from_utf8(r.stdout).unwrap().trim(), "annotation: 0");
}

#[test]
fn rules_lists_passes() {
    let r = supdec(&["rules"]);
    assert!(r.status.success());
    assert!(String::from_utf8(r.stdout).unwrap().contains("# emit_clight"));
}

#[test]
fn exit_codes() {
    let dir = scratch("codes");
    let bad = dir.join("bad.lst");
    std::fs::write(&bad, "nonsense line\n").unwrap();
    let r = supdec(&["decompile", s(&bad), "-o", s(&dir.join("o.c"))]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 1"));

    let r = supdec(&["decompile", s(&dir.join("missing.lst")), "-o", s(&dir.join("o.c"))]);
    assert_eq!(r.status.code(), Some(2));

    let r = supdec(&["decompile", s(&fixture("arith")), "-o", s(&dir.join("no/such/dir/o.c"))]);
    assert_eq!(r.status.code(), Some(2));
}

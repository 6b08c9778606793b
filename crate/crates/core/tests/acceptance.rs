//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//! Thresholds are the constants at the top of each check.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::*;
use supdec::engine::{
    check_universality, immediate_consequence, run_pass, validate_witness, witness, Pass, Universality,
};
use supdec::ir::Stmt;
use supdec::pipeline::{decompile, load, passes, Options};
use supdec::provenance::{Monomial, SemiringTag, SemiringValue, Token};
use supdec::select::Category;
use supdec::store::dump::render_files;
use supdec::store::Value;
use supdec::term::Textual;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sv(tag: SemiringTag, rng: &mut StdRng) -> SemiringValue {
    match tag {
        SemiringTag::Bool => SemiringValue::Bool(rng.gen_bool(0.5)),
        SemiringTag::Count => SemiringValue::Count(if rng.gen_bool(0.1) { 0 } else { rng.gen_range(0..1000) }),
        SemiringTag::Prov => SemiringValue::Poly(random_poly(rng)),
    }
}

fn semiring_laws() -> Check {
    const CASES: usize = 1000;
    const LIMIT: Duration = Duration::from_secs(10);
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    for tag in [SemiringTag::Prov, SemiringTag::Bool, SemiringTag::Count] {
        let (zero, one) = (SemiringValue::zero(tag), SemiringValue::one(tag));
        for i in 0..CASES {
            let (a, b, c) = (sv(tag, &mut rng), sv(tag, &mut rng), sv(tag, &mut rng));
            let p = |x: &SemiringValue, y: &SemiringValue| x.plus(y).unwrap();
            let t = |x: &SemiringValue, y: &SemiringValue| x.times(y).unwrap();
            let laws = [
                ("plus-assoc", p(&p(&a, &b), &c) == p(&a, &p(&b, &c))),
                ("times-assoc", t(&t(&a, &b), &c) == t(&a, &t(&b, &c))),
                ("plus-comm", p(&a, &b) == p(&b, &a)),
                ("times-comm", t(&a, &b) == t(&b, &a)),
                ("left-distrib", t(&a, &p(&b, &c)) == p(&t(&a, &b), &t(&a, &c))),
                ("right-distrib", t(&p(&a, &b), &c) == p(&t(&a, &c), &t(&b, &c))),
                ("plus-identity", p(&a, &zero) == a),
                ("times-identity", t(&a, &one) == a && t(&one, &a) == a),
                ("annihilation", t(&a, &zero).is_zero() && t(&zero, &a).is_zero()),
            ];
            if let Some((law, _)) = laws.iter().find(|(_, ok)| !ok) {
                return Err(format!("{tag} case {i}: {law} fails for {a}, {b}, {c}"));
            }
        }
    }
    let took = start.elapsed();
    ensure(took < LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{} cases per semiring over prov/bool/count in {took:.2?}", CASES))
}

fn universality() -> Check {
    const PROGRAMS: usize = 100;
    let mut rng = StdRng::seed_from_u64(2);
    let mut facts = 0;
    for i in 0..PROGRAMS {
        let prog = random_program(&mut rng);
        let pass = to_pass(&prog);
        let (edges, marks) = random_edb(&mut rng);
        let mut d0 = empty_store(SemiringTag::Prov);
        load_edb(&mut d0, &edges, &marks);

        // Exact provenance against the brute-force derivation sum.
        let mut prov = d0.clone();
        run_pass(&pass, &mut prov).map_err(|e| e.to_string())?;
        let mut bf = BruteForce::new(&prog, &d0);
        let derived = bf.all();
        for (rel, args, p) in &derived {
            let t: Vec<Value> = args.iter().map(|a| Value::Int(*a)).collect();
            let got = prov.annotation_of(rel, &t).map_err(|e| e.to_string())?;
            ensure(got == SemiringValue::Poly(p.clone()), || format!("program {i}: {rel}{args:?} is {got}, expected {p}"))?;
        }
        ensure(prov.len("p") + prov.len("q") == derived.len(), || format!("program {i}: extra derived facts"))?;

        // Counting with every base fact at 1 equals the number of derivations.
        let mut count = empty_store(SemiringTag::Count);
        load_edb(&mut count, &edges, &marks);
        run_pass(&pass, &mut count).map_err(|e| e.to_string())?;
        for (rel, args, p) in &derived {
            let t: Vec<Value> = args.iter().map(|a| Value::Int(*a)).collect();
            let got = count.annotation_of(rel, &t).map_err(|e| e.to_string())?;
            ensure(got == SemiringValue::Count(p.derivation_count()), || {
                format!("program {i}: {rel}{args:?} counted {got}, enumerated {}", p.derivation_count())
            })?;
        }

        let weights: Vec<u64> = (0..64).map(|_| rng.gen_range(0..4)).collect();
        let bits: Vec<bool> = (0..64).map(|_| rng.gen_bool(0.7)).collect();
        let pass = [pass];
        for (tag, r) in [
            (SemiringTag::Count, check_universality(&pass, &d0, |t| SemiringValue::Count(weights[t.0 as usize % 64]), SemiringTag::Count)),
            (SemiringTag::Bool, check_universality(&pass, &d0, |t| SemiringValue::Bool(bits[t.0 as usize % 64]), SemiringTag::Bool)),
        ] {
            match r.map_err(|e| e.to_string())? {
                Universality::Holds { facts: n } => facts += n,
                Universality::Fails { relation, tuple, expected, found } => {
                    return Err(format!("program {i} in {tag}: {relation}{tuple} expected {expected}, found {found}"))
                }
            }
        }
    }
    Ok(format!("{PROGRAMS} programs, {facts} facts compared, exact"))
}

fn delta_leq(a: &BTreeMap<(String, Vec<Value>), SemiringValue>, b: &BTreeMap<(String, Vec<Value>), SemiringValue>) -> bool {
    a.iter().all(|(k, x)| match b.get(k) {
        Some(y) => x.leq(y).unwrap(),
        None => x.is_zero(),
    })
}

fn monotonicity() -> Check {
    const TRIPLES: usize = 100;
    let mut rng = StdRng::seed_from_u64(3);
    for i in 0..TRIPLES {
        let tag = if i % 2 == 0 { SemiringTag::Count } else { SemiringTag::Prov };
        let prog = random_program(&mut rng);
        let pass = to_pass(&prog);
        let mut small = empty_store(tag);
        let (edges, marks) = random_edb(&mut rng);
        load_edb(&mut small, &edges, &marks);
        let mut extra = 100;
        let mut annotation = |rng: &mut StdRng| match tag {
            SemiringTag::Prov => {
                extra += 1;
                SemiringValue::Poly(supdec::provenance::Polynomial::from_token(Token(extra)))
            }
            _ => SemiringValue::Count(rng.gen_range(1..5)),
        };
        let random_fact = |rng: &mut StdRng| {
            let rel = ["e", "f", "p", "q"][rng.gen_range(0..4)];
            let t: Vec<Value> = (0..arity(rel)).map(|_| Value::Int(rng.gen_range(0..DOMAIN))).collect();
            (rel, t)
        };
        for _ in 0..rng.gen_range(0..6) {
            let (rel, t) = random_fact(&mut rng);
            let k = annotation(&mut rng);
            small.insert(rel, t, k).map_err(|e| e.to_string())?;
        }
        let mut big = small.clone();
        for _ in 0..rng.gen_range(1..8) {
            let (rel, t) = random_fact(&mut rng);
            let k = annotation(&mut rng);
            big.insert(rel, t, k).map_err(|e| e.to_string())?;
        }
        ensure(small.leq(&big).unwrap(), || format!("triple {i}: extension is not larger"))?;
        let (a, b) = (immediate_consequence(&pass, &small), immediate_consequence(&pass, &big));
        let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
        ensure(delta_leq(&a, &b), || format!("triple {i}: consequence of the larger store is not larger"))?;
    }
    Ok(format!("{TRIPLES} (pass, store, extension) triples, exact"))
}

fn rules_only(p: &Pass) -> Pass {
    Pass { procedural: None, ..p.clone() }
}

fn convergence() -> Check {
    let opts = Options { semiring: SemiringTag::Bool, ..Options::default() };
    let mut checked = 0;
    for name in FIXTURES {
        let mut store = load(&fixture(name), None, &opts).map_err(|e| e.to_string())?;
        for pass in passes(&opts).map_err(|e| e.to_string())? {
            run_pass(&pass, &mut store).map_err(|e| format!("{name}/{}: {e}", pass.name))?;
            let st = store.pass_stats().last().unwrap().clone();
            ensure(st.iterations <= st.new_tuples + 1, || {
                format!("{name}/{}: {} iterations for {} derived tuples", pass.name, st.iterations, st.new_tuples)
            })?;
            // Support fixpoint: the rules derive nothing outside the store.
            let delta = immediate_consequence(&rules_only(&pass), &store).map_err(|e| e.to_string())?;
            if let Some(((rel, t), _)) = delta.iter().find(|((rel, t), k)| !k.is_zero() && !store.contains(rel, t)) {
                return Err(format!("{name}/{}: {rel}{} not at fixpoint", pass.name, Value::Tuple(t.clone()).render()));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} pass runs at fixpoint, iterations <= derived + 1"))
}

fn coverage() -> Check {
    const TREES: usize = 100;
    let mut rng = StdRng::seed_from_u64(5);
    let mut trees = 0;
    let mut programs = 0;
    while trees < TREES {
        programs += 1;
        let prog = random_program(&mut rng);
        let (edges, marks) = random_edb(&mut rng);
        let mut store = empty_store(SemiringTag::Prov);
        load_edb(&mut store, &edges, &marks);
        let d0 = store.clone();
        run_pass(&to_pass(&prog), &mut store).map_err(|e| e.to_string())?;
        let mut bf = BruteForce::new(&prog, &d0);
        for (rel, args, _) in bf.all() {
            let leaves = bf.one_derivation(&rel, &args).ok_or("no derivation for a derivable fact")?;
            let t: Vec<Value> = args.iter().map(|a| Value::Int(*a)).collect();
            let k = store.annotation_of(&rel, &t).map_err(|e| e.to_string())?;
            let m = Monomial::from_tokens(leaves);
            let ok = matches!(&k, SemiringValue::Poly(p) if p.coefficient(&m) > 0);
            ensure(ok, || format!("{rel}{args:?}: derivation {m} missing from {k}"))?;
            trees += 1;
        }
    }

    // Witnesses of every selected statement on the running example.
    let opts = Options { semiring: SemiringTag::Prov, witness: true, ..Options::default() };
    let d = decompile(&fixture("classify"), None, &opts).map_err(|e| e.to_string())?;
    let ps = passes(&opts).map_err(|e| e.to_string())?;
    let mut witnessed = 0;
    for (f, s) in d.funcs.iter().zip(&d.selections) {
        for (n, stmt) in f.body(&s.config) {
            let t = vec![Value::Node(n), Value::stmt(Stmt::Clight(stmt.clone()))];
            let tree = witness(&d.store, "clight_stmt", &t).map_err(|e| e.to_string())?;
            validate_witness(&d.store, &ps, &tree).map_err(|e| e.to_string())?;
            witnessed += 1;
        }
    }
    Ok(format!("{trees} random derivations from {programs} programs, {witnessed} pipeline witnesses validated"))
}

fn running_example() -> Check {
    const LIMIT: Duration = Duration::from_secs(5);
    let start = Instant::now();
    let d = decompile(&fixture("classify"), None, &Options::default()).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let c = &d.c.text;
    let fields: Vec<&str> = c.lines().map(str::trim).collect();
    let st = fields.iter().position(|l| l.starts_with("struct s") && l.ends_with('{')).ok_or("no struct definition")?;
    ensure(fields[st + 1] == "int ofs_0;" && fields[st + 2] == "float ofs_4;" && fields[st + 3] == "};", || {
        format!("struct is {:?}", &fields[st..st + 4])
    })?;
    ensure(c.contains("->ofs_4"), || "no member access at offset 4".into())?;
    // The compared variable must be declared with a signed type.
    let cmp = fields.iter().find(|l| l.starts_with("if (") && l.contains(" <= ")).ok_or("no <= comparison")?;
    let lhs = cmp.trim_start_matches("if (").split(" <= ").next().unwrap_or("");
    ensure(fields.contains(&format!("int {lhs};").as_str()), || format!("`{lhs}` in `{cmp}` is not a signed int"))?;
    let diags: usize = d.selections.iter().map(|s| s.diags.len()).sum();
    ensure(diags == 0, || format!("{diags} oracle diagnostics"))?;
    ensure(took < LIMIT, || format!("took {took:?}"))?;
    Ok(format!("struct {{int ofs_0; float ofs_4}}, p0->ofs_4, signed <=, 0 diagnostics, {took:.2?}"))
}

fn alloca() -> Check {
    let d = decompile(&fixture("vla"), None, &Options::default()).map_err(|e| e.to_string())?;
    let builtins = d
        .store
        .relation("mach_inst")
        .map_err(|e| e.to_string())?
        .iter()
        .filter(|(t, _)| t[1].render().contains("Mbuiltin(\"alloca\""))
        .count();
    ensure(builtins == 1, || format!("{builtins} Mbuiltin(alloca) facts"))?;
    ensure(d.c.text.contains("alloca("), || "no alloca call in the C output".into())?;
    for name in FIXTURES.iter().filter(|n| **n != "vla") {
        let with = decompile(&fixture(name), None, &Options::default()).map_err(|e| e.to_string())?;
        let without = decompile(&fixture(name), None, &Options { alloca: false, ..Options::default() })
            .map_err(|e| e.to_string())?;
        let (a, b) = (render_files(&with.store, None), render_files(&without.store, None));
        let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
        let differ: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
        ensure(differ.is_empty() && a.len() == b.len(), || format!("{name}: dumps differ in {differ:?}"))?;
        ensure(with.c.text == without.c.text, || format!("{name}: C output differs"))?;
    }
    Ok("one Mbuiltin(alloca), alloca call emitted, dump-diff empty on 7 other fixtures".into())
}

fn validity() -> Check {
    const MIN_FUNCS: usize = 15;
    const MIN_CLEAN: f64 = 0.9;
    let (mut total, mut clean) = (0, 0);
    let mut residual = BTreeSet::new();
    for name in FIXTURES {
        let d = decompile(&fixture(name), None, &Options::default()).map_err(|e| e.to_string())?;
        for s in &d.selections {
            total += 1;
            if s.diags.is_empty() {
                clean += 1;
            }
            residual.extend(s.diags.iter().map(|g| g.category));
        }
    }
    let frac = clean as f64 / total as f64;
    ensure(total >= MIN_FUNCS, || format!("only {total} functions"))?;
    ensure(frac >= MIN_CLEAN, || format!("{clean}/{total} clean"))?;
    ensure(residual.iter().all(|c| *c == Category::UndeclaredIdentifier), || format!("residual categories {residual:?}"))?;
    Ok(format!("{clean}/{total} functions with zero oracle diagnostics ({:.0}%)", frac * 100.0))
}

fn statistics() -> Check {
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    let mut ambiguous_multi = 0;
    for name in FIXTURES {
        let d = decompile(&fixture(name), None, &Options::default()).map_err(|e| e.to_string())?;
        let st = d.store.stats();
        for (k, n) in &st.histogram {
            *hist.entry(*k).or_default() += n;
        }
        if ["classify", "structs", "loops"].contains(name) {
            ambiguous_multi += st.multi_nodes();
        }
    }
    let nodes: usize = hist.values().sum();
    let single = *hist.get(&1).unwrap_or(&0) as f64 / nodes as f64;
    ensure(nodes > 0, || "empty histogram".into())?;
    ensure(ambiguous_multi > 0, || "no multi-candidate nodes on type-ambiguous fixtures".into())?;
    let shown: Vec<String> = hist.iter().map(|(k, n)| format!("{k}:{n}")).collect();
    Ok(format!("histogram {}, single-candidate fraction {single:.3}", shown.join(" ")))
}

fn determinism() -> Check {
    let snapshot = |workers: usize| -> Result<Vec<(String, BTreeMap<String, String>)>, String> {
        let opts = Options { workers, ..Options::default() };
        FIXTURES
            .iter()
            .map(|name| {
                let d = decompile(&fixture(name), None, &opts).map_err(|e| e.to_string())?;
                let mut files = render_files(&d.store, None).map_err(|e| e.to_string())?;
                for (f, s) in d.funcs.iter().zip(&d.selections) {
                    files.insert(format!("config:{}", f.name), format!("{:?}", s.config));
                }
                Ok((d.c.text, files))
            })
            .collect()
    };
    let a = snapshot(8)?;
    let b = snapshot(8)?;
    let c = snapshot(1)?;
    ensure(a == b, || "two runs differ".into())?;
    let configs = |s: &[(String, BTreeMap<String, String>)]| -> Vec<String> {
        s.iter().flat_map(|(_, f)| f.iter().filter(|(k, _)| k.starts_with("config:")).map(|(_, v)| v.clone())).collect()
    };
    ensure(configs(&a) == configs(&c) && a.iter().zip(&c).all(|(x, y)| x.0 == y.0), || {
        "1 worker and 8 workers select differently".into()
    })?;
    Ok(format!("{} fixtures byte-identical across runs and worker counts", FIXTURES.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("semiring laws", semiring_laws),
        ("universality", universality),
        ("monotonicity", monotonicity),
        ("finite convergence", convergence),
        ("coverage", coverage),
        ("running example", running_example),
        ("alloca extension", alloca),
        ("syntactic validity", validity),
        ("candidate statistics", statistics),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

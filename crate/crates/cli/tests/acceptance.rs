//! One PASS/FAIL line per acceptance criterion.
//!
//! The hexagonal identifying-code upper bound is slow: by default only period vectors with a
//! short transverse part are tried. Set `SHIFTLAB_NIGHTLY=1` to widen the search (3 hour budget).
//! Its line is reported but does not affect the exit status.

use std::collections::{BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shiftlab::blockmap::{ca_ball, BlockMap, CaEquality};
use shiftlab::density_lower::{density_lower_bound, MicroLp};
use shiftlab::density_upper::{
    min_mean_cycle, minimum_density_upper, prune_parallel, reduce, DensityError, WEdge, WeightMap, WeightedGraph,
};
use shiftlab::dsl::{parse_formula, parse_script, CommandKind};
use shiftlab::logic::{solve, to_cnf, Alphabet, CircuitBuilder, GateId, SatOutcome, VarId};
use shiftlab::sft::{Equality, Pattern, Sft};
use shiftlab::topology::{NodeRef, Topology, Vector};
use shiftlab_cli::Session;

type Check = Result<String, String>;

fn corpus(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)).unwrap()
}

fn session_with(src: &str) -> Session {
    let mut s = Session::new();
    s.show_timing = false;
    s.log_dir = std::env::temp_dir();
    s.run_source(src, &mut std::io::sink()).map_err(|e| e.to_string()).unwrap();
    s
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn nilpotency() -> Check {
    let t = Instant::now();
    let src = corpus("nilpotency.sl");
    let defs: String = src.lines().take_while(|l| !l.starts_with("%compose_CA")).collect::<Vec<_>>().join("\n");
    let s = session_with(&defs);
    let (f, zero) = (s.ca("f").unwrap(), s.ca("zero").unwrap());
    let sixth = BlockMap::compose_all(&[f; 6]).map_err(|e| e.to_string())?;
    let seventh = f.compose(&sixth).map_err(|e| e.to_string())?;
    let e7 = seventh.equal(zero).map_err(|e| e.to_string())?;
    let e6 = sixth.equal(zero).map_err(|e| e.to_string())?;
    let elapsed = secs(t);
    let detail = format!("f^7 {:?}, f^6 {}, {elapsed:.2} s (limit 300 s)", e7, if e6 == CaEquality::Equal { "Equal" } else { "Different" });
    if e7 == CaEquality::Equal && e6 != CaEquality::Equal && elapsed < 300.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lamplighter_session() -> Session {
    let src = corpus("lamplighter.sl");
    let defs: String = src.lines().take_while(|l| !l.starts_with("%compose_CA")).collect::<Vec<_>>().join("\n");
    session_with(&defs)
}

fn word(s: &Session, w: &str) -> BlockMap {
    let parts: Vec<&BlockMap> = w.split_whitespace().map(|n| s.ca(n).unwrap()).collect();
    BlockMap::compose_all(&parts).unwrap()
}

fn lamplighter() -> Check {
    let t = Instant::now();
    let s = lamplighter_session();
    let alpha = word(&s, "F R R R F L L L L L F R R");
    let beta = word(&s, "L L F R R R R R F L L L F");
    let gamma = word(&s, "L L F R R R R F L L L F");
    let same = alpha.equal(&beta).map_err(|e| e.to_string())?;
    let diff = alpha.equal(&gamma).map_err(|e| e.to_string())?;
    let elapsed = secs(t);
    let verified = match &diff {
        CaEquality::Different { node, witness } => {
            let read = |n: &NodeRef| witness.get(n).unwrap_or(0);
            let o = Vector::zero(1);
            alpha.output_at(&o, *node, read) != gamma.output_at(&o, *node, read)
        }
        CaEquality::Equal => false,
    };
    let detail = format!(
        "F R^3 F L^5 F R^2 vs L^2 F R^5 F L^3 F {same:?}; with R^4 in place of R^5 {} (witness verified: {verified}), {elapsed:.2} s (limit 30 s)",
        if verified { "Different" } else { "not distinguished" }
    );
    if same == CaEquality::Equal && verified && elapsed < 30.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Sphere sizes of the lamplighter group for the generators {1, t, t⁻¹, a}.
fn wreath_spheres(depth: usize) -> Vec<usize> {
    type El = (i32, BTreeSet<i32>);
    let start: El = (0, BTreeSet::new());
    let mut seen: HashSet<El> = HashSet::from([start.clone()]);
    let mut frontier = vec![start];
    let mut sizes = vec![1];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (pos, lamps) in &frontier {
            let mut toggled = lamps.clone();
            if !toggled.remove(pos) {
                toggled.insert(*pos);
            }
            for e in [(*pos, lamps.clone()), (pos - 1, lamps.clone()), (pos + 1, lamps.clone()), (*pos, toggled)] {
                if seen.insert(e.clone()) {
                    next.push(e);
                }
            }
        }
        sizes.push(next.len());
        frontier = next;
    }
    sizes
}

fn ca_balls() -> Check {
    let src = corpus("nilpotency.sl");
    let defs: String = src.lines().take_while(|l| !l.starts_with("%compose_CA")).collect::<Vec<_>>().join("\n");
    let s = session_with(&defs);
    let gens = vec![("f".to_string(), s.ca("f").unwrap().clone()), ("zero".to_string(), s.ca("zero").unwrap().clone())];
    let mut log = Vec::new();
    let nil = ca_ball(&gens, 7, &mut log).map_err(|e| e.to_string())?;
    let log = String::from_utf8(log).unwrap();
    let relation = log.contains("New relation: zero = f f f f f f f");

    let s = lamplighter_session();
    let gens: Vec<(String, BlockMap)> =
        ["id", "F", "L", "R"].iter().map(|n| (n.to_string(), s.ca(n).unwrap().clone())).collect();
    let lamp = ca_ball(&gens, 5, &mut std::io::sink()).map_err(|e| e.to_string())?;
    let oracle = wreath_spheres(5);
    let detail = format!(
        "{{f, zero}} ball 7: {} CAs, relation zero = f^7 logged: {relation}; lamplighter frontiers {:?}, oracle {:?}",
        nil.total, lamp.frontier_sizes, oracle
    );
    if nil.total == 8 && relation && lamp.frontier_sizes == oracle {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn idcode_session() -> (Session, String) {
    let src = corpus("idcode.sl");
    let defs: String = src.lines().take_while(|l| !l.starts_with("%minimum_density")).collect::<Vec<_>>().join("\n");
    let command = src.lines().find(|l| l.starts_with("%density_lower_bound")).unwrap().to_string();
    (session_with(&defs), command)
}

fn idcode_lower() -> Check {
    let (s, command) = idcode_session();
    let script = parse_script(&command).map_err(|e| e.to_string())?;
    let CommandKind::DensityLowerBound { name, radius, domain, vectors } = &script.commands[0].kind else {
        return Err("not a lower bound command".into());
    };
    let x = s.sft(name).unwrap();
    let t = x.topology();
    let dom: Vec<NodeRef> = domain
        .iter()
        .map(|n| NodeRef::new(Vector::from_slice(&n.offset), t.node_index(&n.node).unwrap()))
        .collect();
    let vs: Vec<Vector> = vectors.iter().map(|v| Vector::from_slice(v)).collect();
    let w = WeightMap::default_for(x.alphabet());
    let start = Instant::now();
    let lb = density_lower_bound(x, &w, &dom, &vs, *radius, &MicroLp).map_err(|e| e.to_string())?;
    let elapsed = secs(start);
    let detail = format!(
        "bound {:.10} ({} rule patterns, {} patterns), {elapsed:.1} s (limit 650 s)",
        lb.bound, lb.rule_patterns, lb.patterns
    );
    if (lb.bound - 0.4).abs() <= 1e-6 && elapsed <= 650.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn idcode_upper() -> Check {
    let nightly = std::env::var("SHIFTLAB_NIGHTLY").is_ok_and(|v| v == "1");
    let (max_b, budget) = if nightly { (9, Duration::from_secs(3 * 3600)) } else { (5, Duration::from_secs(60)) };
    let (s, _) = idcode_session();
    let x = s.sft("idcode").unwrap();
    let w = WeightMap::default_for(x.alphabet());
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let target = Ratio::new(53i64, 126);
    let start = Instant::now();
    let mut best: Option<(Ratio<i64>, (i32, i32))> = None;
    let mut skipped = Vec::new();
    'search: for b in 1..=max_b {
        for a in 0..b {
            if start.elapsed() > budget {
                skipped.push(format!("stopped before ({a},{b})"));
                break 'search;
            }
            match minimum_density_upper(x, &[Vector::from_slice(&[a, b])], &w, workers) {
                Ok(ub) => {
                    if best.map_or(true, |(v, _)| ub.bound < v) {
                        best = Some((ub.bound, (a, b)));
                    }
                    if ub.bound == target {
                        break 'search;
                    }
                }
                Err(DensityError::TooLarge { what, .. }) => skipped.push(format!("({a},{b}) too many {what}")),
                Err(e) => return Err(format!("({a},{b}): {e}")),
            }
        }
    }
    let best_text = best.map_or("none".to_string(), |(v, (a, b))| format!("{v} at K = ({a},{b})"));
    let detail = format!(
        "transverse periods up to {max_b}, {:.0} s of {} s; best {best_text}{}",
        secs(start),
        budget.as_secs(),
        if skipped.is_empty() { String::new() } else { format!("; {}", skipped.join(", ")) }
    );
    match best {
        Some((v, _)) if v == target => Ok(detail),
        Some((v, _)) if v < target => Err(format!("below the known value, {detail}")),
        _ => Err(format!("UNKNOWN, 53/126 not reached: {detail}")),
    }
}

fn line_sft(src: &str) -> Sft {
    Sft::from_formula(&Topology::builtin("line").unwrap(), &Alphabet::binary(), &parse_formula(src).unwrap()).unwrap()
}

fn cell(c: i32) -> NodeRef {
    NodeRef::new(Vector::from_slice(&[c]), 0)
}

fn periodic_min(x: &Sft, max_period: usize) -> Option<Ratio<i64>> {
    let mut best: Option<Ratio<i64>> = None;
    for p in 1..=max_period {
        for bits in 0..1u32 << p {
            let long: Pattern = (0..3 * p as i32 + 12).map(|i| (cell(i), (bits >> (i as usize % p) & 1) as usize)).collect();
            if x.violations(&long).is_empty() {
                let d = Ratio::new(bits.count_ones() as i64, p as i64);
                if best.map_or(true, |b| d < b) {
                    best = Some(d);
                }
            }
        }
    }
    best
}

fn random_graph(rng: &mut ChaCha8Rng, max_vertices: usize) -> WeightedGraph {
    let n = rng.gen_range(1..=max_vertices);
    let m = rng.gen_range(0..=3 * n);
    let edges = (0..m)
        .map(|_| WEdge { src: rng.gen_range(0..n as u32), dst: rng.gen_range(0..n as u32), weight: rng.gen_range(-4..=6) })
        .collect();
    WeightedGraph::new(n, edges)
}

fn brute_min_mean(g: &WeightedGraph) -> Option<Ratio<i64>> {
    fn dfs(g: &WeightedGraph, start: u32, v: u32, on: &mut Vec<bool>, w: i64, len: i64, best: &mut Option<Ratio<i64>>) {
        for e in g.edges.iter().filter(|e| e.src == v) {
            if e.dst == start {
                let m = Ratio::new(w + e.weight, len + 1);
                if best.map_or(true, |b| m < b) {
                    *best = Some(m);
                }
            } else if e.dst > start && !on[e.dst as usize] {
                on[e.dst as usize] = true;
                dfs(g, start, e.dst, on, w + e.weight, len + 1, best);
                on[e.dst as usize] = false;
            }
        }
    }
    let mut best = None;
    for s in 0..g.vertices as u32 {
        let mut on = vec![false; g.vertices];
        on[s as usize] = true;
        dfs(g, s, s, &mut on, 0, 0, &mut best);
    }
    best
}

fn mean(g: &WeightedGraph) -> Option<Ratio<i64>> {
    match min_mean_cycle(g, 1) {
        Ok(m) => Some(m.mean),
        Err(DensityError::Acyclic) => None,
        Err(e) => panic!("{e}"),
    }
}

fn desk_scale() -> Check {
    let dom = line_sft("Ao Ed[o1] d = 1");
    let w = WeightMap::default_for(&Alphabet::binary());
    let upper = minimum_density_upper(&dom, &[], &w, 1).map_err(|e| e.to_string())?.bound;
    let t = [Vector::from_slice(&[-1]), Vector::from_slice(&[1])];
    let lower = density_lower_bound(&dom, &w, &[cell(0)], &t, 0, &MicroLp).map_err(|e| e.to_string())?.bound;
    let oracle = periodic_min(&dom, 6);

    let gm = line_sft("Ao o = 1 -> o.rt = 0");
    let gm2 = Sft::from_patterns(
        gm.topology(),
        gm.alphabet(),
        vec![[(cell(0), 1), (cell(1), 1)].into_iter().collect()],
    )
    .map_err(|e| e.to_string())?;
    let both = gm.equal(&gm2, Default::default()).map_err(|e| e.to_string())? == Equality::Equal
        && gm2.equal(&gm, Default::default()).map_err(|e| e.to_string())? == Equality::Equal;
    // words up to length 6 allowed by one are allowed by the other
    let words_agree = (1..=6).all(|n| {
        let domain: BTreeSet<NodeRef> = (0..n).map(cell).collect();
        (0..1u32 << n).all(|bits| {
            let p: Pattern = (0..n).map(|i| (cell(i), (bits >> i & 1) as usize)).collect();
            let a = gm.deduce(&p, &domain).unwrap().is_some();
            let b = gm2.deduce(&p, &domain).unwrap().is_some();
            a == b && a == (bits & bits >> 1 == 0)
        })
    });

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let karp = (0..50).filter(|_| {
        let g = random_graph(&mut rng, 8);
        mean(&g) == brute_min_mean(&g)
    }).count();

    let detail = format!(
        "dominating set upper {upper}, lower {lower:.9}, periodic-word oracle {}; golden mean equal both ways: {both}, words to length 6 agree: {words_agree}; Karp matches enumeration on {karp}/50 graphs",
        oracle.map_or("none".into(), |v| v.to_string())
    );
    if Some(upper) == oracle && upper == Ratio::new(1, 3) && lower >= 1.0 / 3.0 - 1e-6 && both && words_agree && karp == 50 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

enum Expr {
    Var(u32),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
}

fn random_expr(rng: &mut ChaCha8Rng, vars: u32, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return Expr::Var(rng.gen_range(0..vars));
    }
    let op = rng.gen_range(0..4);
    let x = Box::new(random_expr(rng, vars, depth - 1));
    if op == 0 {
        return Expr::Not(x);
    }
    let y = Box::new(random_expr(rng, vars, depth - 1));
    match op {
        1 => Expr::And(x, y),
        2 => Expr::Or(x, y),
        _ => Expr::Xor(x, y),
    }
}

fn eval(e: &Expr, a: u32) -> bool {
    match e {
        Expr::Var(i) => a >> i & 1 == 1,
        Expr::Not(x) => !eval(x, a),
        Expr::And(x, y) => eval(x, a) && eval(y, a),
        Expr::Or(x, y) => eval(x, a) || eval(y, a),
        Expr::Xor(x, y) => eval(x, a) != eval(y, a),
    }
}

fn build(b: &mut CircuitBuilder, e: &Expr) -> GateId {
    match e {
        Expr::Var(i) => b.var(VarId::Aux(*i)),
        Expr::Not(x) => {
            let g = build(b, x);
            b.not(g)
        }
        Expr::And(x, y) => {
            let gs = vec![build(b, x), build(b, y)];
            b.and(gs)
        }
        Expr::Or(x, y) => {
            let gs = vec![build(b, x), build(b, y)];
            b.or(gs)
        }
        Expr::Xor(x, y) => {
            let (p, q) = (build(b, x), build(b, y));
            b.xor(p, q)
        }
    }
}

fn walks(g: &WeightedGraph, v: u32, len: usize) -> BTreeSet<Vec<i64>> {
    let mut out = BTreeSet::new();
    let mut frontier = vec![(v, Vec::new())];
    for _ in 0..len {
        let mut next = Vec::new();
        for (u, w) in frontier {
            for e in g.edges.iter().filter(|e| e.src == u) {
                let mut w2: Vec<i64> = w.clone();
                w2.push(e.weight);
                out.insert(w2.clone());
                next.push((e.dst, w2));
            }
        }
        frontier = next;
    }
    out
}

fn properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cnf_ok = (0..200)
        .filter(|_| {
            let vars = rng.gen_range(1..=12);
            let e = random_expr(&mut rng, vars, 6);
            let mut b = CircuitBuilder::new();
            let r = build(&mut b, &e);
            let c = b.finish(r);
            let satisfiable = (0..1u32 << vars).any(|a| eval(&e, a));
            match solve(&to_cnf(&c), &[]).unwrap() {
                SatOutcome::Sat(_) => satisfiable,
                SatOutcome::Unsat => !satisfiable,
            }
        })
        .count();

    let walks_ok = (0..20)
        .filter(|_| {
            let g = random_graph(&mut rng, 6);
            let (q, blocks) = reduce(&g);
            (0..g.vertices as u32).all(|v| walks(&g, v, 6) == walks(&q, blocks[v as usize], 6))
        })
        .count();

    let mean_ok = (0..50)
        .filter(|_| {
            let g = random_graph(&mut rng, 8);
            let m = mean(&g);
            mean(&reduce(&g).0) == m && mean(&prune_parallel(&g)) == m
        })
        .count();

    let hard = Sft::from_formula(
        &Topology::builtin("square").unwrap(),
        &Alphabet::binary(),
        &parse_formula("Ao o = 1 -> (o.rt = 0 & o.up = 0)").unwrap(),
    )
    .unwrap();
    let domain: BTreeSet<NodeRef> =
        (0..4).flat_map(|a| (0..4).map(move |b| NodeRef::new(Vector::from_slice(&[a, b]), 0))).collect();
    let mut completed = 0;
    let deduce_ok = (0..50)
        .filter(|_| {
            let mut partial = Pattern::new();
            for n in &domain {
                if rng.gen_bool(0.25) {
                    partial.insert(n.clone(), rng.gen_range(0..2));
                }
            }
            match hard.deduce(&partial, &domain).unwrap() {
                Some(p) => {
                    completed += 1;
                    hard.violations(&p).is_empty() && partial.iter().all(|(n, s)| p.get(n) == Some(s))
                }
                None => true,
            }
        })
        .count();

    let detail = format!(
        "CNF equisatisfiable {cnf_ok}/200; reduce keeps walks {walks_ok}/20; min mean kept by reduce and prune {mean_ok}/50; deduce locally valid {deduce_ok}/50 ({completed} completions)"
    );
    if cnf_ok == 200 && walks_ok == 20 && mean_ok == 50 && deduce_ok == 50 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let checks: [(&str, fn() -> Check, bool); 7] = [
        ("nilpotency", nilpotency, true),
        ("lamplighter relation", lamplighter, true),
        ("CA ball", ca_balls, true),
        ("identifying code lower bound", idcode_lower, true),
        ("identifying code upper bound 53/126 (slow, optional)", idcode_upper, false),
        ("desk-scale oracles", desk_scale, true),
        ("property suites", properties, true),
    ];
    let mut failed = 0;
    for (name, check, required) in checks {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                println!("FAIL {name}: {d}");
                if required {
                    failed += 1;
                }
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use rand::Rng;

use stgcn_nas::evaluator::{surrogate_evaluate, SurrogateWeights};
use stgcn_nas::graph::{build_graph, to_json, ModelGraph, NodeKind, ProblemSignature};
use stgcn_nas::objective::{objective_value, shape_rewards, EvaluationResult, ObjectiveConfig};
use stgcn_nas::qlearning::bellman_update;
use stgcn_nas::search_space::{random_code, random_code_with, ArchitectureCode, ParameterCatalog};
use stgcn_nas::seed::stream_rng;
use stgcn_nas_cli::{read_episodes, Summary};

type Verdict = Result<String, String>;

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stgcn-nas"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("cli runs")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn reduced_catalog() -> ParameterCatalog {
    ParameterCatalog {
        max_blocks: 2,
        sipm_options: vec![1, 4],
        tipm_options: vec![3],
        fes_options: vec![2, 3],
        is_options: vec![2],
        os_options: vec![2],
        fsc_options: vec![16],
        mbof_options: vec![1],
        lf_options: vec![1],
        bs_options: vec![2],
        ilr_options: vec![3],
        of_options: vec![1],
    }
}

/// Every configuration of `cat`, written out as code text by nested loops
/// over the option lists.
fn all_codes(cat: &ParameterCatalog) -> Vec<ArchitectureCode> {
    let fsc_ord = |s: u16| match s {
        16 => 1,
        32 => 2,
        _ => 3,
    };
    let mut prefixes = Vec::new();
    for lf in &cat.lf_options {
        for bs in &cat.bs_options {
            for ilr in &cat.ilr_options {
                for of in &cat.of_options {
                    for is in &cat.is_options {
                        for os in &cat.os_options {
                            for fsc in &cat.fsc_options {
                                for mbof in &cat.mbof_options {
                                    prefixes.push(format!(
                                        "-2:-1,-1,-1,-1;-1:{lf},{bs},{ilr},{of};0:{is},{os},{},{mbof}",
                                        fsc_ord(*fsc)
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let mut ops = Vec::new();
    for s in &cat.sipm_options {
        for t in &cat.tipm_options {
            for f in &cat.fes_options {
                ops.push((*s, *t, *f));
            }
        }
    }
    let mut bodies: Vec<String> = Vec::new();
    let mut frontier = vec![String::new()];
    for i in 1..=cat.max_blocks {
        let mut next = Vec::new();
        for body in &frontier {
            for (s, t, f) in &ops {
                for p in 0..i {
                    let b = format!("{body};{i}:{s},{t},{f},{p}");
                    if i < cat.max_blocks {
                        bodies.push(format!("{b};{}:-1,-1,-1,-1", i + 1));
                    } else {
                        bodies.push(b.clone());
                    }
                    next.push(b);
                }
            }
        }
        frontier = next;
    }
    let mut out = Vec::with_capacity(prefixes.len() * bodies.len());
    for p in &prefixes {
        for b in &bodies {
            out.push(format!("{p}{b}").parse().expect("well-formed code"));
        }
    }
    out
}

fn write_config(dir: &Path, cat: &ParameterCatalog, episodes: u64, t_max: f64) {
    let cfg = serde_json::json!({
        "catalog": cat,
        "qlearning": {"episodes": episodes},
        "objective": {"t_max": t_max, "hard_reject": true},
        "out_dir": "out",
    });
    fs::write(dir.join("cfg.json"), cfg.to_string()).unwrap();
}

fn run_search(dir: &Path, seed: u64) -> Result<(Summary, Duration), String> {
    let started = Instant::now();
    let o = cli(&["search", "--config", "cfg.json", "--seed", &seed.to_string()], dir);
    let took = started.elapsed();
    ensure(o.status.code() == Some(0), || {
        format!("search exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr))
    })?;
    let s = fs::read_to_string(dir.join("out/summary.json")).map_err(|e| e.to_string())?;
    Ok((serde_json::from_str(&s).map_err(|e| e.to_string())?, took))
}

fn oracle_optimality() -> Verdict {
    let cat = reduced_catalog();
    let ocfg = ObjectiveConfig::new(12.0);
    let w = SurrogateWeights::default();
    let mut ranked: Vec<(f64, ArchitectureCode)> = all_codes(&cat)
        .into_iter()
        .map(|c| (objective_value(&surrogate_evaluate(&c, &w), &ocfg), c))
        .collect();
    ensure(ranked.len() <= 10_000, || format!("{} configs", ranked.len()))?;
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n = ranked.len();
    let top = ((n as f64) * 0.01).ceil().max(1.0) as usize;
    let cutoff = ranked[top - 1].0;
    let optimum = ranked[0].0;

    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), &cat, 2000, 12.0);
    let (mut in_top, mut exact, mut slowest) = (0, 0, Duration::ZERO);
    for seed in 0..10 {
        let (s, took) = run_search(dir.path(), seed)?;
        slowest = slowest.max(took);
        let best = s.best.ok_or("no best found")?;
        let obj = objective_value(&surrogate_evaluate(&best.code, &w), &ocfg);
        if obj <= cutoff {
            in_top += 1;
        }
        if obj == optimum {
            exact += 1;
        }
    }
    let detail = format!(
        "{n} configs, top 1% = {top}; in top 1%: {in_top}/10, exact optimum: {exact}/10, slowest run {:.2}s",
        slowest.as_secs_f64()
    );
    ensure(in_top >= 8 && exact >= 5 && slowest <= Duration::from_secs(60), || detail.clone())?;
    Ok(detail)
}

fn full_space_improvement() -> Verdict {
    let cat = ParameterCatalog::default();
    let ocfg = ObjectiveConfig::new(12.0);
    let w = SurrogateWeights::default();
    let mut random: Vec<f64> = (0..2000)
        .map(|i| objective_value(&surrogate_evaluate(&random_code(&cat, 10_000 + i), &w), &ocfg))
        .collect();
    random.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = (random[999] + random[1000]) / 2.0;

    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), &cat, 2000, 12.0);
    let mut worst = f64::NEG_INFINITY;
    let mut slowest = Duration::ZERO;
    let mut feasible = 0;
    let seeds = 10;
    for seed in 0..seeds {
        let (s, took) = run_search(dir.path(), seed)?;
        slowest = slowest.max(took);
        let best = s.best.ok_or("no best found")?;
        let r = surrogate_evaluate(&best.code, &w);
        if r.inference_time().is_some_and(|t| t <= 12.0) && best.inference_time <= 12.0 {
            feasible += 1;
        }
        worst = worst.max(best.objective);
    }
    let detail = format!(
        "random median {median:.4}, worst best {worst:.4} (margin {:.4}), feasible {feasible}/{seeds}, slowest run {:.2}s",
        median - worst,
        slowest.as_secs_f64()
    );
    ensure(
        worst <= median - 1.0 && feasible == seeds && slowest <= Duration::from_secs(300),
        || detail.clone(),
    )?;
    Ok(detail)
}

fn exact(x: f64) -> BigRational {
    BigRational::from_f64(x).unwrap()
}

fn update_exactness() -> Verdict {
    let mut rng = stream_rng(1, "acceptance-update", 0);
    let one = BigRational::from_integer(BigInt::from(1));
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let q: f64 = rng.gen_range(-100.0..100.0);
        let alpha: f64 = rng.gen_range(1e-4..=1.0);
        let gamma: f64 = rng.gen_range(0.0..=1.0);
        let r: f64 = rng.gen_range(-100.0..100.0);
        let m: Option<f64> = (k % 8 != 0).then(|| rng.gen_range(-100.0..100.0));
        let got = bellman_update(q, alpha, gamma, r, m);
        let target = match m {
            Some(m) => exact(r) + exact(gamma) * exact(m),
            None => exact(r),
        };
        let want = (one.clone() - exact(alpha)) * exact(q) + exact(alpha) * target;
        let diff = (exact(got) - &want).abs();
        let rel = if want.is_zero() { diff.to_f64().unwrap() } else { (diff / want.abs()).to_f64().unwrap() };
        worst = worst.max(rel);
    }
    let detail = format!("1000 tuples, worst relative error {worst:.3e} (exact rational oracle)");
    ensure(worst <= 1e-12, || detail.clone())?;
    Ok(detail)
}

fn shaping_conservation() -> Verdict {
    let mut rng = stream_rng(2, "acceptance-shaping", 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let total: f64 = rng.gen_range(-1e6..1e6);
        let n = rng.gen_range(1..=7usize);
        let parts = shape_rewards(total, n).map_err(|e| e.to_string())?;
        let sum: f64 = parts.iter().sum();
        worst = worst.max((sum - total).abs() / total.abs());
    }
    let detail = format!("1000 (R, n) pairs, worst |sum − R|/|R| {worst:.3e}");
    ensure(worst <= 1e-12, || detail.clone())?;
    Ok(detail)
}

fn barrier() -> Verdict {
    let mut rng = stream_rng(3, "acceptance-barrier", 0);
    for _ in 0..100 {
        let t_max: f64 = rng.gen_range(0.1..100.0);
        let mae: f64 = rng.gen_range(0.0..100.0);
        let v = objective_value(&EvaluationResult::ok(mae, t_max), &ObjectiveConfig::new(t_max));
        ensure(v == mae, || format!("objective {v} != mae {mae} at T = t_max {t_max}"))?;
    }
    let cfg = ObjectiveConfig::new(12.0);
    let mut checked = 0;
    while checked < 1000 {
        let mae: f64 = rng.gen_range(0.0..50.0);
        let a: f64 = rng.gen_range(0.5..24.0);
        let b: f64 = rng.gen_range(0.5..24.0);
        if a == b {
            continue;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let f_lo = objective_value(&EvaluationResult::ok(mae, lo), &cfg);
        let f_hi = objective_value(&EvaluationResult::ok(mae, hi), &cfg);
        ensure(f_lo < f_hi, || format!("not increasing: T {lo} → {f_lo}, T {hi} → {f_hi}"))?;
        checked += 1;
    }
    Ok("identity at T = t_max on 100 values; strictly increasing in T on 1000 pairs".into())
}

fn subset(rng: &mut impl Rng, full: &[u8]) -> Vec<u8> {
    loop {
        let v: Vec<u8> = full.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        if !v.is_empty() {
            return v;
        }
    }
}

fn space_size_oracle() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = stream_rng(4, "acceptance-catalogs", 0);
    let mut sizes = Vec::new();
    while sizes.len() < 6 {
        let fsc: Vec<u16> = [16u16, 32, 64].into_iter().filter(|_| rng.gen_bool(0.5)).collect();
        if fsc.is_empty() {
            continue;
        }
        let cat = ParameterCatalog {
            max_blocks: rng.gen_range(1..=3),
            sipm_options: subset(&mut rng, &[1, 2, 3, 4]),
            tipm_options: subset(&mut rng, &[1, 2, 3]),
            fes_options: subset(&mut rng, &[1, 2, 3, 4]),
            is_options: subset(&mut rng, &[1, 2]),
            os_options: subset(&mut rng, &[1, 2, 3]),
            fsc_options: fsc,
            mbof_options: subset(&mut rng, &[1, 2]),
            lf_options: subset(&mut rng, &[1, 2]),
            bs_options: subset(&mut rng, &[1, 2, 3]),
            ilr_options: subset(&mut rng, &[1, 2, 3]),
            of_options: subset(&mut rng, &[1, 2, 3]),
        };
        let codes = all_codes(&cat);
        if codes.len() > 100_000 || codes.len() < 2 {
            continue;
        }
        let distinct: BTreeSet<String> = codes.iter().map(|c| c.canonical()).collect();
        ensure(distinct.len() == codes.len(), || "enumeration produced duplicates".into())?;
        fs::write(dir.path().join("cat.json"), serde_json::json!({ "catalog": cat }).to_string()).unwrap();
        let o = cli(&["space-size", "--config", "cat.json"], dir.path());
        let printed = String::from_utf8_lossy(&o.stdout).trim().to_string();
        ensure(printed == codes.len().to_string(), || {
            format!("space-size printed {printed}, enumeration found {}", codes.len())
        })?;
        sizes.push(codes.len());
    }
    let o = cli(&["space-size"], dir.path());
    let full = String::from_utf8_lossy(&o.stdout).trim().to_string();
    ensure(full == "248968453248", || format!("full catalog printed {full}"))?;
    Ok(format!("reduced catalogs {sizes:?} match enumeration; full catalog {full}"))
}

fn reachable(adj: &[Vec<usize>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

fn check_graph(g: &ModelGraph) -> Result<(), String> {
    let n = g.nodes.len();
    let mut fwd = vec![Vec::new(); n];
    let mut rev = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for &(a, b) in &g.edges {
        fwd[a].push(b);
        rev[b].push(a);
        indeg[b] += 1;
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut visited = 0;
    while let Some(v) = queue.pop_front() {
        visited += 1;
        for &w in &fwd[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    ensure(visited == n, || "cycle".into())?;
    let input = g.nodes.iter().position(|x| x.kind == NodeKind::Input).ok_or("no input")?;
    let output = g.nodes.iter().position(|x| x.kind == NodeKind::Output).ok_or("no output")?;
    let from_input = reachable(&fwd, input);
    let to_output = reachable(&rev, output);
    ensure((0..n).all(|v| from_input[v] && to_output[v]), || "unreachable node".into())?;
    let block_sinks = g
        .nodes
        .iter()
        .filter(|x| x.kind == NodeKind::StBlock)
        .filter(|x| !fwd[x.id].iter().any(|&w| g.nodes[w].kind == NodeKind::StBlock))
        .count();
    let fusion = g.nodes.iter().any(|x| x.kind == NodeKind::Fusion);
    ensure(fusion == (block_sinks >= 2), || format!("fusion {fusion} with {block_sinks} sinks"))
}

fn graph_sweep() -> Verdict {
    let cat = ParameterCatalog::default();
    let sig = ProblemSignature::default();
    let mut rng = stream_rng(5, "acceptance-graphs", 0);
    let mut fused = 0;
    for i in 0..10_000 {
        let code = random_code_with(&cat, &mut rng);
        let g = build_graph(&code, &cat, sig).map_err(|e| format!("{code}: {e}"))?;
        check_graph(&g).map_err(|e| format!("{code}: {e}"))?;
        fused += usize::from(g.fusion.is_some());
        let again = build_graph(&code, &cat, sig).map_err(|e| e.to_string())?;
        ensure(to_json(&g) == to_json(&again), || format!("{code}: unstable bytes"))?;
        if i < 20 {
            let dir = tempfile::tempdir().unwrap();
            fs::write(dir.path().join("c.txt"), code.to_string()).unwrap();
            let a = cli(&["decode", "c.txt"], dir.path()).stdout;
            let b = cli(&["decode", "c.txt"], dir.path()).stdout;
            ensure(a == b && a.trim_ascii_end() == to_json(&g).as_slice(), || {
                format!("{code}: decode output differs between runs")
            })?;
        }
    }
    Ok(format!("10000 graphs valid ({fused} with fusion); serialization byte-stable"))
}

fn determinism() -> Verdict {
    let cat = ParameterCatalog::default();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        write_config(d.path(), &cat, 2000, 12.0);
        run_search(d.path(), 42)?;
    }
    let la = fs::read(a.path().join("out/episodes.jsonl")).map_err(|e| e.to_string())?;
    let lb = fs::read(b.path().join("out/episodes.jsonl")).map_err(|e| e.to_string())?;
    let n = read_episodes(&a.path().join("out/episodes.jsonl")).map_err(|e| e.to_string())?.len();
    ensure(la == lb, || "episode logs differ".into())?;
    Ok(format!("two runs, seed 42: {n} episodes, {} identical bytes", la.len()))
}

fn ablation_fidelity() -> Verdict {
    // Three blocks with distinct FES and non-sequential wiring (2 ← 0, 3 ← 1).
    let original = "-2:-1,-1,-1,-1;-1:1,2,3,1;0:2,2,1,1;1:2,2,2,0;2:2,2,4,0;3:2,2,1,1;4:-1,-1,-1,-1";
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.txt"), original).unwrap();
    let ablate = |args: &[&str]| -> Result<ArchitectureCode, String> {
        let mut full = vec!["ablate", "c.txt"];
        full.extend_from_slice(args);
        let o = cli(&full, dir.path());
        ensure(o.status.code() == Some(0), || String::from_utf8_lossy(&o.stderr).into_owned())?;
        String::from_utf8_lossy(&o.stdout).trim().parse().map_err(|e| format!("{e}"))
    };
    let uniform = ablate(&["--kind", "uniform-blocks", "--spec", "2,2,2"])?;
    let linear = ablate(&["--kind", "linearize"])?;
    let both = ablate(&["--kind", "both", "--spec", "2,2,2"])?;
    let expect = |c: &ArchitectureCode, text: &str| {
        ensure(c.to_string() == text, || format!("got {c}, expected {text}"))
    };
    let head = "-2:-1,-1,-1,-1;-1:1,2,3,1;0:2,2,1,1";
    expect(&uniform, &format!("{head};1:2,2,2,0;2:2,2,2,0;3:2,2,2,1;4:-1,-1,-1,-1"))?;
    expect(&linear, &format!("{head};1:2,2,2,0;2:2,2,4,1;3:2,2,1,2;4:-1,-1,-1,-1"))?;
    expect(&both, &format!("{head};1:2,2,2,0;2:2,2,2,1;3:2,2,2,2;4:-1,-1,-1,-1"))?;

    let w = SurrogateWeights::default();
    let ocfg = ObjectiveConfig::new(12.0);
    let obj = |c: &ArchitectureCode| objective_value(&surrogate_evaluate(c, &w), &ocfg);
    let base = obj(&original.parse().unwrap());
    let (u, l, b) = (obj(&uniform), obj(&linear), obj(&both));
    let detail = format!("objective original {base:.4}, -Diversity {u:.4}, -Connection {l:.4}, both {b:.4}");
    ensure(base <= u && base <= l && base <= b, || detail.clone())?;
    Ok(detail)
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("oracle optimality on reduced space", oracle_optimality),
        ("full-space improvement", full_space_improvement),
        ("update rule exactness", update_exactness),
        ("reward-shaping conservation", shaping_conservation),
        ("barrier boundary and monotonicity", barrier),
        ("space-size oracle", space_size_oracle),
        ("graph validity sweep", graph_sweep),
        ("determinism", determinism),
        ("ablation fidelity", ablation_fidelity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let verdict = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

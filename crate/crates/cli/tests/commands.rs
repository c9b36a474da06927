use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stgcn_nas::graph::{from_json, ModelGraph};
use stgcn_nas::qlearning::QCheckpoint;
use stgcn_nas::search_space::{validate_code, ArchitectureCode, ParameterCatalog};
use stgcn_nas_cli::{read_episodes, Summary};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stgcn-nas"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

const CHAIN: &str = "-2:-1,-1,-1,-1;-1:1,2,1,1;0:2,2,1,1;1:1,1,1,0;2:2,2,2,1;3:-1,-1,-1,-1";
const STAR: &str = "-2:-1,-1,-1,-1;-1:1,2,1,1;0:2,2,1,2;1:1,1,1,0;2:2,2,2,0;3:-1,-1,-1,-1";

#[test]
fn validate_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let ok = write(d.path(), "ok.txt", CHAIN);
    let o = bin(&["validate", &ok], d.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "valid");

    let empty = write(d.path(), "empty.txt", "-2:-1,-1,-1,-1;-1:1,1,1,1;0:1,1,1,1;1:-1,-1,-1,-1");
    let o = bin(&["validate", &empty], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("empty model"));

    let o = bin(&["--format", "json", "validate", &empty], d.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["valid"], false);

    let junk = write(d.path(), "junk.txt", "not a code");
    assert_eq!(bin(&["validate", &junk], d.path()).status.code(), Some(2));
    assert_eq!(bin(&["validate", "missing.txt"], d.path()).status.code(), Some(2));
}

#[test]
fn decode_prints_graph_json() {
    let d = tempfile::tempdir().unwrap();
    let chain = write(d.path(), "chain.txt", CHAIN);
    let o = bin(&["decode", &chain], d.path());
    assert_eq!(o.status.code(), Some(0));
    let g: ModelGraph = from_json(stdout(&o).trim().as_bytes()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["fusion"].is_null());
    assert_eq!(g.block_count(), 2);

    let star = write(d.path(), "star.txt", STAR);
    let v: serde_json::Value = serde_json::from_str(&stdout(&bin(&["decode", &star], d.path()))).unwrap();
    assert_eq!(v["fusion"], "concat");
    let star_add = write(d.path(), "star1.txt", &STAR.replace("0:2,2,1,2", "0:2,2,1,1"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&bin(&["decode", &star_add], d.path()))).unwrap();
    assert_eq!(v["fusion"], "add");

    let o = bin(&["decode", &chain, "--node-count", "207", "--horizon", "3"], d.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["signature"]["node_count"], 207);
    assert_eq!(v["signature"]["horizon"], 3);

    let bad = write(d.path(), "bad.txt", "-2:-1,-1,-1,-1;-1:1,1,1,1;0:1,1,1,1;1:1,1,1,5");
    assert_eq!(bin(&["decode", &bad], d.path()).status.code(), Some(1));
}

#[test]
fn space_size_command() {
    let d = tempfile::tempdir().unwrap();
    let o = bin(&["space-size"], d.path());
    assert_eq!(stdout(&o).trim(), "248968453248");
    let single = r#"{"catalog":{"max_blocks":1,"sipm_options":[1],"tipm_options":[1],"fes_options":[1],
        "is_options":[1],"os_options":[1],"fsc_options":[16],"mbof_options":[1],"lf_options":[1],
        "bs_options":[1],"ilr_options":[1],"of_options":[1]}}"#;
    let cfg = write(d.path(), "single.json", single);
    assert_eq!(stdout(&bin(&["space-size", "--config", &cfg], d.path())).trim(), "1");
    let broken = write(d.path(), "broken.json", r#"{"catalog":{"max_blocks":0}}"#);
    assert_eq!(bin(&["space-size", "--config", &broken], d.path()).status.code(), Some(2));
}

#[test]
fn ablate_command() {
    let d = tempfile::tempdir().unwrap();
    let star = write(d.path(), "star.txt", STAR);
    let o = bin(&["ablate", &star, "--kind", "linearize"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let lin: ArchitectureCode = stdout(&o).trim().parse().unwrap();
    assert!(validate_code(&lin, &ParameterCatalog::default()).is_empty());
    let again = write(d.path(), "lin.txt", &lin.to_string());
    assert_eq!(stdout(&bin(&["ablate", &again, "--kind", "linearize"], d.path())).trim(), lin.to_string());

    let o = bin(&["ablate", &star, "--kind", "uniform-blocks", "--spec", "3,2,4"], d.path());
    let uni: ArchitectureCode = stdout(&o).trim().parse().unwrap();
    assert!(uni.blocks().all(|b| b.slots[..3] == [3, 2, 4]));

    assert_eq!(bin(&["ablate", &star, "--kind", "both"], d.path()).status.code(), Some(1));
    assert_eq!(bin(&["ablate", &star, "--kind", "both", "--spec", "9,9,9"], d.path()).status.code(), Some(1));
    assert_eq!(bin(&["ablate", &star, "--kind", "both", "--spec", "x"], d.path()).status.code(), Some(1));
}

fn search_config(dir: &Path, episodes: u64, extra: &str) -> String {
    write(
        dir,
        "cfg.json",
        &format!(r#"{{"objective":{{"t_max":12.0}},"qlearning":{{"episodes":{episodes},"rng_seed":7}},"out_dir":"out"{extra}}}"#),
    )
}

#[test]
fn search_writes_consistent_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let cfg = search_config(d.path(), 250, "");
    let o = bin(&["search", "--config", &cfg, "--seed", "42"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.path().join("out");

    let records = read_episodes(&out.join("episodes.jsonl")).unwrap();
    assert_eq!(records.len(), 250);
    let summary: Summary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let best = summary.best.clone().unwrap();
    let min = records
        .iter()
        .filter(|r| r.feasible && r.mae.is_some())
        .map(|r| r.objective)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(best.objective, min);
    assert_eq!(summary.cache_hits + summary.cache_misses, 250);

    let code: ArchitectureCode = fs::read_to_string(out.join("best.code.txt")).unwrap().trim().parse().unwrap();
    assert_eq!(code, best.code);
    let g = from_json(&fs::read(out.join("best.graph.json")).unwrap()).unwrap();
    assert_eq!(g.block_count(), code.block_count());

    let cp: QCheckpoint<f64> = serde_json::from_str(&fs::read_to_string(out.join("qtable.json")).unwrap()).unwrap();
    assert_eq!(cp.meta.episode, 250);
    assert_eq!(cp.meta.rng_state_seed, 42);
    assert!(cp.q.keys().all(|k| !k.split('|').next().unwrap().ends_with(":-1,-1,-1,-1") || k.starts_with("-2:")));

    let o = bin(&["--format", "json", "replay", "out/episodes.jsonl", "--config", &cfg], d.path());
    let replayed: Summary = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(replayed.best, summary.best);
    assert_eq!(replayed.greedy_code, summary.greedy_code);
}

#[test]
fn search_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = search_config(d.path(), 300, "");
        assert_eq!(bin(&["search", "--config", &cfg], d.path()).status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("out/episodes.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn resume_continues_exactly() {
    let full = tempfile::tempdir().unwrap();
    let cfg = search_config(full.path(), 2000, "");
    assert_eq!(bin(&["search", "--config", &cfg], full.path()).status.code(), Some(0));

    let cut = tempfile::tempdir().unwrap();
    let cfg = search_config(cut.path(), 2000, "");
    let o = bin(&["search", "--config", &cfg, "--stop-after", "1050"], cut.path());
    assert_eq!(o.status.code(), Some(0));
    let partial = read_episodes(&cut.path().join("out/episodes.jsonl")).unwrap();
    assert_eq!(partial.len(), 1050);
    assert!(!cut.path().join("out/summary.json").exists());

    let o = bin(&["search", "--config", &cfg, "--resume"], cut.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let log = |d: &tempfile::TempDir| fs::read(d.path().join("out/episodes.jsonl")).unwrap();
    assert_eq!(log(&cut), log(&full));
    let records = read_episodes(&cut.path().join("out/episodes.jsonl")).unwrap();
    assert!(records.iter().enumerate().all(|(i, r)| r.episode == i as u64));
    let q = |d: &tempfile::TempDir| fs::read(d.path().join("out/qtable.json")).unwrap();
    assert_eq!(q(&cut), q(&full));

    let wrong_seed = bin(&["search", "--config", &cfg, "--resume", "--seed", "8"], cut.path());
    assert_eq!(wrong_seed.status.code(), Some(2));
}

#[test]
fn zero_episodes_writes_null_best() {
    let d = tempfile::tempdir().unwrap();
    let cfg = search_config(d.path(), 0, "");
    assert_eq!(bin(&["search", "--config", &cfg], d.path()).status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/summary.json")).unwrap()).unwrap();
    assert!(v["best"].is_null());
    assert!(v["greedy_code"].is_string());
    assert!(!d.path().join("out/best.code.txt").exists());
}

#[test]
fn config_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let no_tmax = write(d.path(), "a.json", r#"{"qlearning":{"episodes":5}}"#);
    assert_eq!(bin(&["search", "--config", &no_tmax], d.path()).status.code(), Some(2));
    let unknown = write(d.path(), "b.json", r#"{"objective":{"t_max":1.0},"bogus":1}"#);
    assert_eq!(bin(&["search", "--config", &unknown], d.path()).status.code(), Some(2));
    let weights = write(
        d.path(),
        "c.json",
        r#"{"objective":{"t_max":1.0},"evaluator":{"kind":"surrogate","weights_path":"nope.json"}}"#,
    );
    assert_eq!(bin(&["search", "--config", &weights], d.path()).status.code(), Some(2));
    assert_eq!(bin(&["search", "--config", "missing.json"], d.path()).status.code(), Some(2));
    let resume_nothing = search_config(d.path(), 5, "");
    assert_eq!(bin(&["search", "--config", &resume_nothing, "--resume"], d.path()).status.code(), Some(2));
}

#[test]
fn reference_code_sets_time_limit() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "cfg.json",
        &format!(r#"{{"objective":{{"reference_code":"{CHAIN}"}},"qlearning":{{"episodes":20}},"out_dir":"out"}}"#),
    );
    let o = bin(&["search", "--config", &cfg], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s: Summary = serde_json::from_str(&fs::read_to_string(d.path().join("out/summary.json")).unwrap()).unwrap();
    // CHAIN at FSC 16 with FES 1 then 2: 2.0 + (1.0 + 1.2) + (1.0 + 0.4) = 5.6.
    assert!((s.t_max.unwrap() - 11.2).abs() < 1e-12);
}

#[test]
fn custom_weights_file_is_used() {
    let d = tempfile::tempdir().unwrap();
    let w = serde_json::to_string(&stgcn_nas::evaluator::SurrogateWeights::<f64>::flat(7.0)).unwrap();
    write(d.path(), "w.json", &w);
    let cfg = search_config(d.path(), 30, r#","evaluator":{"kind":"surrogate","weights_path":"w.json"}"#);
    assert_eq!(bin(&["search", "--config", &cfg], d.path()).status.code(), Some(0));
    let records = read_episodes(&d.path().join("out/episodes.jsonl")).unwrap();
    assert!(records.iter().all(|r| r.mae == Some(7.0)));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use tneat::genome::serialize_genome;
use tneat::{ExperimentConfig, GenomeTensors, RngStream};

const XOR_SHORT: &str = "\
problem = xor
pop_size = 60
generation_limit = 12
fitness_target = inf
seed = 5
";

fn tneat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tneat"))
        .args(args)
        .env_remove("TNEAT_SEED")
        .output()
        .expect("spawn tneat")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_into(config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    tneat(&args)
}

fn stats(out: &Path) -> String {
    fs::read_to_string(out.join("stats.csv")).unwrap()
}

#[test]
fn infinite_target_stops_at_limit_with_one_row_per_generation() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "xor.cfg", XOR_SHORT);
    let out = dir.path().join("out");
    let o = run_into(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stats(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("generation,best_fitness,mean_fitness,species_count,mean_live_nodes,mean_live_conns,elapsed_seconds")
    );
    assert_eq!(lines.count(), 12);
    assert!(out.join("best_genome.txt").exists());
    assert!(out.join("checkpoint.json").exists());
}

#[test]
fn reachable_target_exits_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "xor.cfg",
        "problem = xor\npop_size = 50\nfitness_target = -10\n",
    );
    let out = dir.path().join("out");
    let o = run_into(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stats(&out).lines().count(), 2);
}

#[test]
fn bad_configs_exit_one_with_diagnostic() {
    let dir = TempDir::new().unwrap();
    for (name, text) in [
        ("typo.cfg", "problem = xor\npop_sise = 10\n"),
        ("value.cfg", "problem = xor\npop_size = many\n"),
        ("problem.cfg", "problem = chess\n"),
    ] {
        let cfg = write_config(dir.path(), name, text);
        let o = run_into(&cfg, &dir.path().join("out"), &[]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(!o.stderr.is_empty(), "{name}");
    }
    let o = run_into(
        dir.path().join("missing.cfg").to_str().unwrap(),
        &dir.path().join("o2"),
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn same_seed_gives_identical_stats() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "xor.cfg", XOR_SHORT);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_into(&cfg, &a, &[]);
    run_into(&cfg, &b, &[]);
    assert_eq!(stats(&a), stats(&b));
    assert_eq!(
        fs::read(a.join("best_genome.txt")).unwrap(),
        fs::read(b.join("best_genome.txt")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "xor.cfg", XOR_SHORT);
    let (a, b) = (dir.path().join("t1"), dir.path().join("t8"));
    run_into(&cfg, &a, &["--threads", "1"]);
    run_into(&cfg, &b, &["--threads", "8"]);
    assert_eq!(stats(&a), stats(&b));
}

#[test]
fn seed_environment_variable_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "xor.cfg", XOR_SHORT);
    let other = write_config(dir.path(), "xor9.cfg", &XOR_SHORT.replace("seed = 5", "seed = 9"));
    let (env, file, plain) = (
        dir.path().join("env"),
        dir.path().join("file"),
        dir.path().join("plain"),
    );
    let o = Command::new(env!("CARGO_BIN_EXE_tneat"))
        .args(["run", "--config", &cfg, "--out", env.to_str().unwrap()])
        .env("TNEAT_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    run_into(&other, &file, &[]);
    run_into(&cfg, &plain, &[]);
    assert_eq!(stats(&env), stats(&file));
    assert_ne!(stats(&env), stats(&plain));

    let o = Command::new(env!("CARGO_BIN_EXE_tneat"))
        .args(["run", "--config", &cfg, "--out", env.to_str().unwrap()])
        .env("TNEAT_SEED", "minus one")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn resume_matches_uninterrupted_run() {
    let dir = TempDir::new().unwrap();
    let full_cfg = write_config(dir.path(), "full.cfg", XOR_SHORT);
    let half_cfg = write_config(
        dir.path(),
        "half.cfg",
        &XOR_SHORT.replace("generation_limit = 12", "generation_limit = 5"),
    );
    let (full, split) = (dir.path().join("full"), dir.path().join("split"));
    run_into(&full_cfg, &full, &[]);
    assert_eq!(run_into(&half_cfg, &split, &[]).status.code(), Some(2));
    assert_eq!(run_into(&full_cfg, &split, &["--resume"]).status.code(), Some(2));

    assert_eq!(stats(&full), stats(&split));
    assert_eq!(
        fs::read(full.join("best_genome.txt")).unwrap(),
        fs::read(split.join("best_genome.txt")).unwrap()
    );
    let strip = |p: &Path| {
        let mut v: serde_json::Value = serde_json::from_slice(&fs::read(p.join("checkpoint.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("config_text");
        v
    };
    assert_eq!(strip(&full), strip(&split));
}

#[test]
fn resume_rejects_a_changed_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "a.cfg", XOR_SHORT);
    let changed = write_config(dir.path(), "b.cfg", &format!("{XOR_SHORT}conn_add = 0.9\n"));
    let out = dir.path().join("out");
    run_into(&cfg, &out, &[]);
    assert_eq!(run_into(&changed, &out, &["--resume"]).status.code(), Some(1));
}

#[test]
fn one_element_bench_writes_both_timing_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "xor.cfg", "problem = xor\n");
    let out = dir.path().join("bench");
    let o = tneat(&[
        "bench",
        "--config",
        &cfg,
        "--pop-sizes",
        "30",
        "--generations",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out.join("bench.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap(),
        vec!["pop_size", "generation", "tensorized_seconds", "sequential_seconds"]
    );
    let rows: Vec<_> = r.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for (g, row) in rows.iter().enumerate() {
        assert_eq!(&row[0], "30");
        assert_eq!(row[1].parse::<usize>().unwrap(), g);
        assert!(row[2].parse::<f64>().unwrap() >= 0.0);
        assert!(row[3].parse::<f64>().unwrap() >= 0.0);
    }
}

fn fresh_genome(dir: &Path) -> (GenomeTensors, String) {
    let mut cfg = ExperimentConfig::parse("problem = xor\n").unwrap().neat;
    cfg.inputs = 3;
    cfg.outputs = 2;
    let g = GenomeTensors::init(&cfg, &RngStream::new(4)).unwrap();
    let p = dir.join("g.txt");
    fs::write(&p, serialize_genome(&g)).unwrap();
    (g, p.to_str().unwrap().to_string())
}

#[test]
fn inspect_fresh_genome_as_dot() {
    let dir = TempDir::new().unwrap();
    let (_, path) = fresh_genome(dir.path());
    let o = tneat(&["inspect", "--genome", &path, "--format", "dot"]);
    assert_eq!(o.status.code(), Some(0));
    let dot = String::from_utf8(o.stdout).unwrap();
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches(" -> ").count(), 6);
    let node_lines = dot
        .lines()
        .filter(|l| l.trim_start().starts_with('n') && !l.contains("->"))
        .count();
    assert_eq!(node_lines, 5);
    assert!(!dot.contains("dashed"));
}

#[test]
fn inspect_renders_disabled_edges_dashed() {
    let dir = TempDir::new().unwrap();
    let (g, _) = fresh_genome(dir.path());
    let g = g.set_conn_attr(0, 3, 0, 0.0).unwrap();
    let p = dir.path().join("off.txt");
    fs::write(&p, serialize_genome(&g)).unwrap();
    let o = tneat(&["inspect", "--genome", p.to_str().unwrap(), "--format", "dot"]);
    let dot = String::from_utf8(o.stdout).unwrap();
    assert_eq!(dot.matches("style=dashed").count(), 1);
    assert_eq!(dot.matches("style=solid").count(), 5);
}

#[test]
fn inspect_text_summary_lists_live_counts() {
    let dir = TempDir::new().unwrap();
    let (_, path) = fresh_genome(dir.path());
    let o = tneat(&["inspect", "--genome", &path]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("inputs 3 outputs 2"));
    assert!(text.contains("live nodes 5/"));
    assert!(text.contains("live connections 6/"));
    assert_eq!(text.matches(" input ").count(), 3);
    assert_eq!(text.matches(" output ").count(), 2);
}

#[test]
fn inspect_malformed_file_fails() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("junk.txt");
    fs::write(&p, "this is not a genome\n").unwrap();
    let o = tneat(&["inspect", "--genome", p.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(!o.stderr.is_empty());
}

use std::path::Path;
use std::process::{Command, Output};

use dnas_cli::RunSummary;
use dnas_core::experiment::Verification;
use dnas_core::{Genome, NasConfig};

fn dnas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnas")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = dnas(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_run(out: &Path, extra: &[&str]) -> RunSummary {
    let mut args = vec![
        "run",
        "--algorithm",
        "dnas1",
        "--calls",
        "2",
        "--generations",
        "2",
        "--pop-size",
        "8",
        "--seed",
        "5",
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn generated_data_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["generate-data", "--out", s(&a)]);
    ok(&["generate-data", "--out", s(&b)]);
    for name in ["learning.csv", "verification1.csv", "verification2.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
        assert_eq!(String::from_utf8(x).unwrap().lines().count(), 3002);
    }

    let noisy = |dir: &Path, seed: &str| {
        ok(&["generate-data", "--schedule", "learning", "--noise", "0.01", "--seed", seed, "--out", s(dir)]);
        std::fs::read(dir.join("learning.csv")).unwrap()
    };
    let n1 = noisy(&tmp.path().join("n1"), "3");
    assert_eq!(n1, noisy(&tmp.path().join("n2"), "3"));
    assert_ne!(n1, noisy(&tmp.path().join("n3"), "4"));
    assert_ne!(n1, std::fs::read(a.join("learning.csv")).unwrap());
}

#[test]
fn custom_schedule_files() {
    let tmp = tempfile::tempdir().unwrap();
    let sched = tmp.path().join("ramp.csv");
    std::fs::write(&sched, "time,position\n0,-1.098\n50,-0.8\n").unwrap();
    ok(&["generate-data", "--schedule", s(&sched), "--duration", "100", "--out", s(tmp.path())]);
    let text = std::fs::read_to_string(tmp.path().join("ramp.csv")).unwrap();
    assert!(text.starts_with('#'));

    std::fs::write(&sched, "time,position\n0,-1.098\n50;-0.8\n").unwrap();
    assert_eq!(dnas(&["generate-data", "--schedule", s(&sched), "--out", s(tmp.path())]).status.code(), Some(2));
    std::fs::write(&sched, "time,position\n0,-1.098\n50,3.0\n").unwrap();
    assert!(!dnas(&["generate-data", "--schedule", s(&sched), "--out", s(tmp.path())]).status.success());
}

#[test]
fn exit_codes() {
    assert_eq!(dnas(&["--help"]).status.code(), Some(0));
    assert_eq!(dnas(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(dnas(&["run", "--algorithm", "dnas9"]).status.code(), Some(2));
    assert_eq!(dnas(&["run", "--set", "noSuchKey=1"]).status.code(), Some(2));
    assert_eq!(dnas(&["run", "--set", "pCross=1.5"]).status.code(), Some(2));
    assert_eq!(dnas(&["run", "--algorithm", "exhaustive"]).status.code(), Some(2));
    assert_eq!(dnas(&["verify", "--genome", "/nonexistent/genome.json"]).status.code(), Some(1));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "popSize=10\nthis line is wrong\n").unwrap();
    let out = dnas(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn run_outputs_are_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let sum = small_run(&out, &[]);
    assert_eq!(sum.calls.len(), 2);
    assert!(sum.failures.is_empty());

    let neurons: Vec<f64> = sum.calls.iter().map(|c| c.neurons as f64).collect();
    assert_eq!(sum.summary.mean_neurons, neurons.iter().sum::<f64>() / 2.0);
    let hist = std::fs::read_to_string(out.join("histogram.csv")).unwrap();
    let total: usize = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 2);

    let gens = std::fs::read_to_string(out.join("generations.csv")).unwrap();
    assert_eq!(gens.lines().count(), 1 + 2 * 3);

    let echoed = NasConfig::parse_kv(&std::fs::read_to_string(out.join("config.txt")).unwrap()).unwrap();
    assert_eq!(echoed, sum.config);

    for c in &sum.calls {
        let g = Genome::from_json(&std::fs::read_to_string(out.join(format!("call_{}_best.json", c.call))).unwrap())
            .unwrap();
        assert_eq!(g.neuron_count(), c.neurons);
        assert_eq!((g.du, g.dy), (c.du, c.dy));
    }

    let again = tmp.path().join("r2");
    small_run(&again, &[]);
    for f in ["summary.json", "generations.csv", "histogram.csv", "call_0_best.json", "call_1_best.json"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }

    let report = ok(&["report", s(&out)]);
    assert!(String::from_utf8_lossy(&report.stdout).contains("dnas1 on learning"));
}

#[test]
fn config_echo_shows_method_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    small_run(&out, &["--set", "hmBest=3"]);
    let text = std::fs::read_to_string(out.join("config.txt")).unwrap();
    for line in [
        "algorithm=dnas1",
        "maxLay=1",
        "maxNinLay=20",
        "du=5",
        "dy=5",
        "pCross=0.8",
        "p1=1",
        "p2=0.01",
        "p3=0.0001",
        "minDelta=0.0001",
        "maxDelta=0.1",
        "pMutW=0.2",
        "pMutNewN=0.2",
        "minW=-1",
        "maxW=1",
        "hmBest=3",
        "popSize=8",
    ] {
        assert!(text.lines().any(|l| l == line), "missing `{line}` in\n{text}");
    }
}

#[test]
fn config_file_then_flags_then_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    std::fs::write(&cfg, "algorithm=dnas2\npopSize=12\ngenerations=1\ncalls=1\npMutD=0.5\n").unwrap();
    let out = tmp.path().join("r");
    ok(&["run", "--config", s(&cfg), "--pop-size", "6", "--set", "pMutD=0.3", "--out", s(&out)]);
    let sum: RunSummary = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(sum.config.algorithm.to_string(), "dnas2");
    assert_eq!(sum.config.pop_size, 6);
    assert_eq!(sum.config.p_mut_d, 0.3);
    assert_eq!(sum.config.generations, 1);
}

#[test]
fn one_point_grid_trains_each_restart() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    ok(&[
        "exhaustive", "--neurons", "1", "--du", "1", "--dy", "1", "--restarts", "2", "--max-epochs", "10", "--out",
        s(&out),
    ]);
    let sum: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(sum["trainings"], 2);
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 2);
    let g = Genome::from_json(&std::fs::read_to_string(out.join("winner.json")).unwrap()).unwrap();
    assert_eq!(g.neuron_count(), 1);
}

#[test]
fn verification_reproduces_the_learning_record() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["generate-data", "--out", s(&data)]);
    let out = tmp.path().join("r");
    let sum = small_run(&out, &["--dataset", s(&data.join("learning.csv"))]);
    let genome = out.join("call_0_best.json");
    let report = tmp.path().join("v.json");
    ok(&[
        "verify",
        "--genome",
        s(&genome),
        "--dataset",
        s(&data.join("learning.csv")),
        "--out",
        s(&report),
    ]);
    let rows: Vec<Verification> = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].mean_error, sum.calls[0].mean_error);
    assert_eq!(rows[0].fitness, sum.calls[0].best_fitness);

    ok(&["verify", "--genome", s(&genome), "--out", s(&report)]);
    let rows: Vec<Verification> = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.dataset.as_str()).collect();
    assert_eq!(names, ["verification1", "verification2"]);
}

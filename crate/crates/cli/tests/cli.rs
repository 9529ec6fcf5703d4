use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn netspace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netspace"))
        .current_dir(dir)
        .args(args)
        .env("NETSPACE_FROZEN_CONSTANTS", dir.join("frozen.json"))
        .env_remove("NETSPACE_REFREEZE")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    })
}

/// `1_{[0,1)²}` on `[0,2)²` with cell side `1/2`.
fn write_indicator(dir: &Path) {
    fs::write(dir.join("ind.csv"), "2,1,1\n1,1,0,0\n1,1,0,0\n0,0,0,0\n0,0,0,0\n").unwrap();
}

#[test]
fn norm_of_indicator_is_one() {
    let dir = tempfile::tempdir().unwrap();
    write_indicator(dir.path());
    for p in ["1.5", "2", "4"] {
        let out = netspace(dir.path(), &["norm", "ind.csv", "-p", p, "-q", "inf"]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(stdout_json(&out)["norm"].as_f64(), Some(1.0));
    }
}

#[test]
fn divergent_norm_is_reported_as_inf() {
    let dir = tempfile::tempdir().unwrap();
    write_indicator(dir.path());
    // The dyadic tail of N_{1,1} does not converge.
    let out = netspace(dir.path(), &["norm", "ind.csv", "-p", "1", "-q", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["norm"], "inf");
    assert!(v["divergent_segment"]["reason"].is_string());
    assert!(v["divergent_segment"]["from"].as_f64().unwrap() > 0.0);
}

#[test]
fn maximal_profile_csv_and_net_dominance() {
    let dir = tempfile::tempdir().unwrap();
    write_indicator(dir.path());
    let out = netspace(dir.path(), &["--out", "d", "maximal", "ind.csv", "--plot"]);
    assert_eq!(out.status.code(), Some(0));
    let dyadic = fs::read_to_string(dir.path().join("d/profile.csv")).unwrap();
    assert_eq!(dyadic, "t,value\n0.25,1\n1,1\n4,0.25\ntail,dyadic-steps,1,2\n");
    assert!(fs::read_to_string(dir.path().join("d/profile.svg")).unwrap().starts_with("<svg"));

    let out = netspace(dir.path(), &["--out", "a", "--net", "allcubes", "maximal", "ind.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let all = fs::read_to_string(dir.path().join("a/profile.csv")).unwrap();
    let parse = |s: &str| -> Vec<(f64, f64)> {
        s.lines()
            .skip(1)
            .filter(|l| !l.starts_with("tail"))
            .map(|l| {
                let (t, v) = l.split_once(',').unwrap();
                (t.parse().unwrap(), v.parse().unwrap())
            })
            .collect()
    };
    let (d, a) = (parse(&dyadic), parse(&all));
    // The all-cubes net contains the dyadic one: its profile dominates.
    for (t, v) in d {
        let va = a.iter().find(|(ta, _)| *ta >= t).map(|x| x.1).unwrap_or(0.0);
        assert!(va >= v, "t={t}: {va} < {v}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(netspace(dir.path(), &["norm", "missing.csv"]).status.code(), Some(2));
    assert_eq!(netspace(dir.path(), &["frobnicate"]).status.code(), Some(64));
    assert_eq!(netspace(dir.path(), &["verify", "theorem9"]).status.code(), Some(64));
    assert_eq!(netspace(dir.path(), &["--help"]).status.code(), Some(0));
    // Theorem 2 precondition p0 >= n.
    let out = netspace(dir.path(), &["verify", "theorem2", "--p0", "1.5", "--count", "2", "--no-frozen"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p0 >= n"));
}

#[test]
fn verify_hardy_default_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = netspace(dir.path(), &["--out", "r", "verify", "hardy"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r/hardy.json")).unwrap()).unwrap();
    assert_eq!(json["schema"], 1);
    assert!(dir.path().join("r/hardy.csv").exists());
    assert!(dir.path().join("r/hardy.timings.json").exists());
}

#[test]
fn frozen_constants_gate_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "morrey", "--dim", "1", "--level", "2", "--window-order", "2", "--count", "4"];
    // No constants recorded yet: the frozen rows fail.
    assert_eq!(netspace(dir.path(), &args).status.code(), Some(1));
    let mut freeze = args.to_vec();
    freeze.push("--freeze");
    assert_eq!(netspace(dir.path(), &freeze).status.code(), Some(0));
    assert!(dir.path().join("frozen.json").exists());
    assert_eq!(netspace(dir.path(), &args).status.code(), Some(0));
    // Another seed is another corpus, hence other keys.
    let mut other = args.to_vec();
    other.extend(["--seed", "99"]);
    assert_eq!(netspace(dir.path(), &other).status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    write_indicator(dir.path());
    fs::write(
        dir.path().join("run.json"),
        r#"{"subcommand": "norm", "inputs": ["ind.csv"], "norm": {"p": 2, "q": "inf"}, "out": "cfg"}"#,
    )
    .unwrap();
    let out = netspace(dir.path(), &["--config", "run.json", "norm"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["norm"].as_f64(), Some(1.0));
    assert!(dir.path().join("cfg/norm.json").exists());
    // q from the command line wins over the file.
    let out = netspace(dir.path(), &["--config", "run.json", "norm", "-q", "2"]);
    let v = stdout_json(&out)["norm"].as_f64().unwrap();
    assert!(v > 1.0);
    // A config written for another subcommand is refused.
    assert_eq!(netspace(dir.path(), &["--config", "run.json", "maximal"]).status.code(), Some(2));
}

#[test]
fn gen_corpus_feeds_batch_norm() {
    let dir = tempfile::tempdir().unwrap();
    let gen = ["--out", "g", "--seed", "5", "gen-corpus", "--dim", "1", "--level", "2", "--window-order", "2", "--count", "4"];
    assert_eq!(netspace(dir.path(), &gen).status.code(), Some(0));
    let first = fs::read(dir.path().join("g/corpus/000.csv")).unwrap();
    assert_eq!(netspace(dir.path(), &gen).status.code(), Some(0));
    assert_eq!(fs::read(dir.path().join("g/corpus/000.csv")).unwrap(), first);
    let out = netspace(dir.path(), &["--out", "g", "norm", "g/corpus", "-p", "2", "-q", "inf"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn kfunc_writes_bracket_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_indicator(dir.path());
    let out = netspace(
        dir.path(),
        &["--out", "k", "kfunc", "ind.csv", "--p0", "1.5", "--p1", "4", "--theta", "0.5", "--q", "2"],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!(v["violations"].as_array().unwrap().is_empty());
    assert!(v["interp_lower"].as_f64().unwrap() <= v["interp_upper"].as_f64().unwrap());
    let csv = fs::read_to_string(dir.path().join("k/kfunc.csv")).unwrap();
    assert!(csv.starts_with("t,lower,upper,witness_param\n"));
}

#[test]
fn verify_output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, out: &str| {
        let o = netspace(
            dir.path(),
            &["--out", out, "--threads", threads, "verify", "theorem1", "--dim", "1", "--level", "3", "--window-order", "3", "--count", "6", "--no-frozen"],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("1", "a");
    run("3", "b");
    for f in ["theorem1.csv", "theorem1.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
}

use std::path::Path;
use std::process::{Command, Output};

use socnav_gnn::training::Checkpoint;

fn socnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socnav"))
        .args(args)
        .env_remove("SOCNAV_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(socnav(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(socnav(&[]).status.code(), Some(2));
    let o = socnav(&["split", "--dev", "1", "--test", "1", "--out", "/dev/null"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(socnav(&["--help"]).status.code(), Some(0));
}

#[test]
fn validate_augment_transform() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(socnav(&["generate", "--out-dir", p(&data), "--count", "3", "--seed", "10"]).status.success());
    let mut files: Vec<_> = std::fs::read_dir(&data).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 3);

    let o = socnav(&["validate", p(&files[0]), p(&files[1])]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).matches("OK ").count(), 2);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, b"{\"version\": 2, \"id\": ").unwrap();
    let o = socnav(&["validate", p(&files[0]), p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("INVALID"));

    let aug = dir.path().join("aug");
    assert!(socnav(&["augment", "--scenario", p(&files[0]), "--out-dir", p(&aug)]).status.success());
    let written: Vec<_> = std::fs::read_dir(&aug).unwrap().collect();
    assert_eq!(written.len(), 3);

    let dump = dir.path().join("g.txt");
    assert!(socnav(&["transform", "--scenario", p(&files[1]), "--out", p(&dump)]).status.success());
    assert!(std::fs::read_to_string(&dump).unwrap().starts_with("graph nodes="));

    let o = socnav(&["transform", "--scenario", p(&bad), "--out", p(&dump)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_eval_histogram_heatmap_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let d = p(&data);
    assert!(socnav(&["generate", "--out-dir", d, "--count", "24"]).status.success());
    let manifest = dir.path().join("splits.json");
    let m = p(&manifest);
    let o = socnav(&["split", "--data-dir", d, "--dev", "4", "--test", "4", "--out", m, "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("train=16 dev=4 test=4"));

    let config = dir.path().join("hp.json");
    std::fs::write(
        &config,
        r#"{"batch_size":8,"hidden_units":10,"learning_rate":0.002,"layers":2,"alpha":0.2,"block_kind":"gcn"}"#,
    )
    .unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let log = dir.path().join("log.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_socnav"))
        .args(["train", "--data-dir", d, "--manifest", m, "--out", p(&ckpt), "--log", p(&log)])
        .args(["--max-epochs", "3", "--seed", "5"])
        .env("SOCNAV_CONFIG", &config)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let loaded = Checkpoint::load(&ckpt).unwrap();
    assert_eq!(loaded.hyperparams.batch_size, 8);
    assert_eq!(loaded.hyperparams.rng_seed, 5);
    let log_text = std::fs::read_to_string(&log).unwrap();
    assert!(log_text.starts_with("epoch,train_mse,dev_mse,seconds\n"));
    assert_eq!(log_text.lines().count(), 4);

    let o = socnav(&["eval", "--checkpoint", p(&ckpt), "--split", "test", "--manifest", m, "--data-dir", d]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    let value: f64 = line.trim().strip_prefix("test_mse=").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&value));

    let hist = dir.path().join("hist.csv");
    let o = socnav(&["histogram", "--checkpoint", p(&ckpt), "--manifest", m, "--data-dir", d, "--out", p(&hist)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&hist).unwrap();
    assert!(text.starts_with("bin_low,bin_high,count\n"));
    let total: usize = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 8);

    let scenario = std::fs::read_dir(&data).unwrap().next().unwrap().unwrap().path();
    let png = dir.path().join("h.png");
    let args = [
        "heatmap", "--checkpoint", p(&ckpt), "--scenario", p(&scenario), "--question", "q1", "--res", "0.5", "--out",
        p(&png), "--adv", "0.3",
    ];
    assert!(socnav(&args).status.success());
    let csv = dir.path().join("h.csv");
    let first = (std::fs::read(&png).unwrap(), std::fs::read_to_string(&csv).unwrap());
    assert!(first.0.starts_with(b"\x89PNG"));
    assert!(first.1.starts_with("x,y,score\n"));
    assert!(socnav(&args).status.success());
    assert_eq!(first, (std::fs::read(&png).unwrap(), std::fs::read_to_string(&csv).unwrap()));

    let o = socnav(&["heatmap", "--checkpoint", p(&ckpt), "--scenario", p(&scenario), "--question", "q1", "--res", "0", "--out", p(&png)]);
    assert_eq!(o.status.code(), Some(2));

    // A manifest naming unknown scenarios is a data error.
    let bogus = dir.path().join("bogus.json");
    std::fs::write(&bogus, r#"{"train":["nope"],"dev":[],"test":["missing"]}"#).unwrap();
    let o = socnav(&["eval", "--checkpoint", p(&ckpt), "--manifest", p(&bogus), "--data-dir", d]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn kappa_report() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = dir.path().join("r.csv");
    let mut csv = String::from("sample_id,rater_id,pass,q,score\n");
    for s in 0..6 {
        for r in ["a", "b", "c", "d"] {
            for pass in 1..=2 {
                let score = ((s * 20 + if r == "d" { 20 } else { 0 }) % 120).min(100);
                csv.push_str(&format!("s{s},{r},{pass},q1,{score}\n"));
            }
        }
    }
    std::fs::write(&ratings, csv).unwrap();
    let o = socnav(&["kappa", "--ratings", p(&ratings), "--question", "q1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("rater,a,b,c,d"));
    assert!(out.contains("a,1.0000,1.0000,1.0000"));
    assert!(out.contains("q1 baseline_mse average="));

    let o = socnav(&["kappa", "--ratings", p(&ratings), "--question", "q2"]);
    assert_eq!(o.status.code(), Some(1));
}
